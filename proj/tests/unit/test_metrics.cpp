#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "bikepose/error.hpp"
#include "bikepose/metrics.hpp"
#include "bikepose/oracle/oracles.hpp"

namespace bikepose {
namespace {

const CanonicalTemplate kTmpl = CanonicalTemplate::default_template();

OrientedBox3D unit_cube(const Vec3& centre) {
  OrientedBox3D b;
  b.center = centre;
  b.half_extents = Vec3::Constant(0.5);
  return b;
}

std::vector<PredictionRecord> as_predictions(const Dataset& ds) {
  std::vector<PredictionRecord> out;
  for (const auto& r : ds.records) {
    PredictionRecord p;
    p.sample_id = r.sample_id;
    p.pose = r.pose;
    p.residuals = r.residuals;
    p.converged = true;
    out.push_back(p);
  }
  return out;
}

Dataset small_dataset() {
  DatasetConfig cfg;
  cfg.n_templates = 3;
  cfg.samples_per_template = 20;
  cfg.seed = 31;
  return generate_dataset(cfg, kTmpl, Camera{});
}

TEST(PoseErrors, IdenticalIsZero) {
  const PoseErrors e = pose_errors(rotation_from_euler(3, 40, -2), Vec3(1, 2, 3),
                                   rotation_from_euler(3, 40, -2), Vec3(1, 2, 3));
  EXPECT_NEAR(e.rot_err, 0.0, 1e-12);
  EXPECT_EQ(e.trans_err, 0.0);
}

TEST(PoseErrors, YawOffsetConstruction) {
  const Rotation3 gt = rotation_from_euler(2, -30, 1);
  const PoseErrors e = pose_errors(gt * rotation_about_y(4), Vec3(0.03, 0, 0), gt, Vec3::Zero());
  EXPECT_NEAR(e.rot_err, 4.0, 1e-10);
  EXPECT_NEAR(e.trans_err, 0.03, 1e-15);
  EXPECT_TRUE(kPoseCriteria[0].passes(e));
  EXPECT_FALSE((PoseCriterion{3.9, 0.05}.passes(e)));
  EXPECT_FALSE((PoseCriterion{5.0, 0.029}.passes(e)));
}

TEST(PoseErrors, Antipodal) {
  const PoseErrors e = pose_errors(rotation_about_y(180), Vec3::Zero(), Rotation3::Identity(), Vec3::Zero());
  EXPECT_NEAR(e.rot_err, 180.0, 1e-9);
}

TEST(PoseErrors, RotationErrorIsAMetric) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Rotation3 a = oracle::random_pose(rng).rotation();
    const Rotation3 b = oracle::random_pose(rng).rotation();
    const Rotation3 c = oracle::random_pose(rng).rotation();
    const double ab = pose_errors(a, Vec3::Zero(), b, Vec3::Zero()).rot_err;
    const double ba = pose_errors(b, Vec3::Zero(), a, Vec3::Zero()).rot_err;
    const double bc = pose_errors(b, Vec3::Zero(), c, Vec3::Zero()).rot_err;
    const double ac = pose_errors(a, Vec3::Zero(), c, Vec3::Zero()).rot_err;
    EXPECT_NEAR(ab, ba, 1e-9);
    EXPECT_LE(ac, ab + bc + 1e-9);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 180.0);
  }
}

TEST(Mae, WrapAndOracleLoop) {
  Pose8D a, b;
  a.theta_y = 179;
  b.theta_y = -179;
  const std::vector<Pose8D> pa{a}, pb{b};
  EXPECT_NEAR(mae_per_parameter(pa, pb)[static_cast<std::size_t>(PoseParam::kThetaY)], 2.0, 1e-12);

  std::mt19937_64 rng(4);
  std::vector<Pose8D> preds, gts;
  for (int i = 0; i < 100; ++i) {
    preds.push_back(oracle::random_pose(rng));
    gts.push_back(oracle::random_pose(rng));
  }
  const auto mae = mae_per_parameter(preds, gts);
  for (std::size_t k = 0; k < kNumPoseParams; ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const double d = preds[i].to_array()[k] - gts[i].to_array()[k];
      double ad = std::abs(d);
      if (k < 5) {
        ad = std::fmod(ad, 360.0);
        if (ad > 180.0) ad = 360.0 - ad;
      }
      sum += ad;
    }
    EXPECT_NEAR(mae[k], sum / 100.0, 1e-12);
  }
}

TEST(Mae, RejectsMisalignedOrEmpty) {
  const std::vector<Pose8D> one(1), two(2), none;
  EXPECT_THROW(mae_per_parameter(one, two), InvalidArgumentError);
  EXPECT_THROW(mae_per_parameter(none, none), InvalidArgumentError);
}

TEST(Iou, IdenticalIsExactlyOne) {
  OrientedBox3D b;
  b.center = Vec3(0.3, -0.2, 5);
  b.rotation = rotation_from_euler(10, 33, -7);
  b.half_extents = Vec3(0.2, 0.5, 0.9);
  EXPECT_EQ(iou3d_exact(b, b), 1.0);
}

TEST(Iou, DisjointIsZero) {
  EXPECT_EQ(iou3d_exact(unit_cube(Vec3::Zero()), unit_cube(Vec3(10, 0, 0))), 0.0);
}

TEST(Iou, HalfOffsetCubes) {
  const OrientedBox3D a = unit_cube(Vec3::Zero());
  const OrientedBox3D b = unit_cube(Vec3(0.5, 0, 0));
  EXPECT_EQ(iou3d_exact(a, b), 1.0 / 3.0);
  EXPECT_NEAR(iou3d_monte_carlo(a, b, 200000, 1), 1.0 / 3.0, 0.01);
  IouOptions mc;
  mc.mode = IouMode::kMonteCarlo;
  EXPECT_NEAR(iou3d(a, b, mc), 1.0 / 3.0, 0.01);
}

TEST(Iou, SymmetricAndRigidInvariant) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    auto [a, b] = oracle::random_overlapping_boxes(rng);
    const double ab = iou3d_exact(a, b);
    EXPECT_NEAR(ab, iou3d_exact(b, a), 1e-9);
    const Rotation3 r = oracle::random_pose(rng).rotation();
    const Vec3 t(1.5, -2.0, 0.7);
    for (OrientedBox3D* box : {&a, &b}) {
      box->center = r * box->center + t;
      box->rotation = r * box->rotation;
    }
    EXPECT_NEAR(iou3d_exact(a, b), ab, 1e-9);
  }
}

TEST(Iou, ClippingPreservesVolumeWhenPlaneMissesBox) {
  const Polytope p = box_polytope(unit_cube(Vec3::Zero()));
  EXPECT_NEAR(p.volume(), 1.0, 1e-15);
  EXPECT_NEAR(clip_polytope(p, Vec3::UnitX(), 2.0).volume(), 1.0, 1e-15);
  EXPECT_NEAR(clip_polytope(p, Vec3::UnitX(), 0.0).volume(), 0.5, 1e-15);
  EXPECT_NEAR(clip_polytope(p, Vec3(1, 1, 1).normalized(), 0.0).volume(), 0.5, 1e-12);
  EXPECT_EQ(clip_polytope(p, Vec3::UnitX(), -2.0).volume(), 0.0);
}

TEST(Iou, NearlyCoincidentBoxesStayNearOne) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> tiny(0.0, 1e-10);
  for (int i = 0; i < 500; ++i) {
    OrientedBox3D a;
    a.center = Vec3(0.4, -0.6, 3.0);
    a.rotation = rotation_from_euler(2.0 * i, 3.0 * i, -1.0 * i);
    a.half_extents = Vec3(0.25, 0.55, 0.95);
    OrientedBox3D b = a;
    b.center += Vec3(tiny(rng), tiny(rng), tiny(rng));
    b.rotation = rotation_from_euler(2.0 * i + tiny(rng), 3.0 * i + tiny(rng), -1.0 * i + tiny(rng));
    EXPECT_NEAR(iou3d_exact(a, b), 1.0, 1e-6) << "draw " << i;
  }
}

TEST(Iou, BikeBoxesAtRoundingDistance) {
  const CanonicalTemplate tmpl = CanonicalTemplate::default_template();
  const OrientedBox3D box = bounding_box_3d(tmpl, tmpl.mean_keypoints);
  const Pose8D gt = Pose8D::from_array({155.1265758501072, 84.186098526005367, 4.3409587054246916,
                                        80.099371413085464, -0.16477320238625115,
                                        -0.44123039040647838, 0.30818797388462238,
                                        -1.7904642322002324});
  const Pose8D pred = Pose8D::from_array({155.12657585016009, 84.186098526383347,
                                          4.3409587054176795, 80.099371413057852,
                                          -0.16477320245934174, -0.44123039040645812,
                                          0.30818797388463637, -1.7904642322003572});
  EXPECT_NEAR(iou3d_exact(repose_box(box, gt), repose_box(box, pred)), 1.0, 1e-6);
}

TEST(Iou, CoplanarClipKeepsVolume) {
  const Polytope p = box_polytope(unit_cube(Vec3::Zero()));
  EXPECT_NEAR(clip_polytope(p, Vec3::UnitX(), 0.5).volume(), 1.0, 1e-15);
  EXPECT_NEAR(clip_polytope(p, Vec3::UnitX(), 0.5 - 1e-13).volume(), 1.0, 1e-12);
  EXPECT_NEAR(clip_polytope(p, Vec3::UnitX(), 0.5 + 1e-13).volume(), 1.0, 1e-12);
}

TEST(Recall, Counting) {
  const std::vector<int> xs{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(average_recall(std::span<const int>(xs), [](int x) { return x < 4; }), 75.0);
  EXPECT_DOUBLE_EQ(average_recall(std::span<const int>(xs), [](int) { return true; }), 100.0);
  const std::vector<int> none;
  EXPECT_THROW(average_recall(std::span<const int>(none), [](int) { return true; }),
               InvalidArgumentError);
}

TEST(Add, Fixtures) {
  const KeypointSet3D kc = kTmpl.mean_keypoints;
  Pose8D gt;
  gt.theta_y = 20;
  EXPECT_EQ(add_metric(gt, gt, kc), 0.0);
  Pose8D shifted = gt;
  shifted.t.x() += 0.1;
  EXPECT_NEAR(add_metric(shifted, gt, kc), 0.1, 1e-15);
  Pose8D pedal = gt;
  pedal.theta_p += 180;
  EXPECT_NEAR(add_metric(pedal, gt, kc), 2.0 * (2.0 * 0.17) / 11.0, 1e-9);
}

TEST(Add, MatchesBruteForceReposing) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 20; ++i) {
    const KeypointSet3D kc = canonical_keypoints(kTmpl, oracle::random_residuals(rng, 0.1));
    const Pose8D a = oracle::random_pose(rng), b = oracle::random_pose(rng);
    const KeypointSet3D pa = oracle::repose_homogeneous(kc, a);
    const KeypointSet3D pb = oracle::repose_homogeneous(kc, b);
    double sum = 0.0;
    for (std::size_t k = 0; k < kNumKeypoints; ++k) sum += (pa[k] - pb[k]).norm();
    EXPECT_NEAR(add_metric(a, b, kc), sum / kNumKeypoints, 1e-9);
  }
}

TEST(Recall2D, ConstantOffset) {
  KeypointSet2D gt, pred;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    gt[i] = Vec2(100 + i, 200);
    pred[i] = gt[i] + Vec2(7, 0);
  }
  std::array<bool, kNumKeypoints> vis{};
  vis.fill(true);
  const std::vector<KeypointSet2D> p{pred}, g{gt};
  const std::vector<std::array<bool, kNumKeypoints>> v{vis};
  const auto ar = keypoint2d_ar(p, g, v, kPixelThresholds);
  EXPECT_EQ(ar, (std::vector<double>{0, 100, 100, 100}));
}

TEST(Recall2D, MixedDistancesAveragingTwelve) {
  // Four at 4 px, four at 20 px, three at 12 px: 132 / 11 = 12.
  constexpr std::array<double, kNumKeypoints> dist = {4, 20, 12, 4, 20, 12, 4, 20, 12, 4, 20};
  KeypointSet2D gt, pred;
  double sum = 0.0;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    pred[i] = Vec2(0.6 * dist[i], 0.8 * dist[i]);
    sum += dist[i];
  }
  std::array<bool, kNumKeypoints> vis{};
  vis.fill(true);
  EXPECT_NEAR(mean_keypoint_distance(pred, gt, vis), sum / kNumKeypoints, 1e-12);
  EXPECT_NEAR(sum / kNumKeypoints, 12.0, 1e-12);
  const std::vector<KeypointSet2D> p{pred}, g{gt};
  const std::vector<std::array<bool, kNumKeypoints>> v{vis};
  EXPECT_EQ(keypoint2d_ar(p, g, v, kPixelThresholds), (std::vector<double>{0, 0, 100, 100}));
}

TEST(Recall2D, PerKeypointVariant) {
  KeypointSet2D gt, pred;
  pred[0] = Vec2(25, 0);
  std::array<bool, kNumKeypoints> vis{};
  vis.fill(true);
  const std::vector<KeypointSet2D> p{pred}, g{gt};
  const std::vector<std::array<bool, kNumKeypoints>> v{vis};
  const auto ar = keypoint2d_ar(p, g, v, kPixelThresholds, true);
  EXPECT_NEAR(ar[0], 100.0 * 10 / 11, 1e-12);
  EXPECT_NEAR(ar[3], 100.0, 1e-12);
  vis.fill(false);
  const std::vector<std::array<bool, kNumKeypoints>> hidden{vis};
  EXPECT_THROW(keypoint2d_ar(p, g, hidden, kPixelThresholds), InvalidArgumentError);
}

TEST(Report, PerfectPredictions) {
  const Dataset ds = small_dataset();
  const MetricsReport r = build_report(ds, as_predictions(ds));
  for (double m : r.mae) EXPECT_EQ(m, 0.0);
  for (double a : r.ar_3d) EXPECT_EQ(a, 100.0);
  for (double a : r.pose_criteria) EXPECT_EQ(a, 100.0);
  for (double a : r.ar_2d_i) EXPECT_EQ(a, 100.0);
  for (double a : r.ar_2d_ib) EXPECT_EQ(a, 100.0);
  EXPECT_EQ(r.add, 0.0);
  EXPECT_EQ(r.sample_count, 60u);
  EXPECT_EQ(r.converged_count, 60u);
  EXPECT_EQ(r.failed_count, 0u);
}

TEST(Report, GlobalYawShift) {
  const Dataset ds = small_dataset();
  auto preds = as_predictions(ds);
  for (auto& p : preds) p.pose.theta_y = wrap_degrees(p.pose.theta_y + 8.0);
  const MetricsReport r = build_report(ds, preds);
  EXPECT_NEAR(r.mae[static_cast<std::size_t>(PoseParam::kThetaY)], 8.0, 1e-9);
  EXPECT_EQ(r.pose_criteria[0], 0.0);
  EXPECT_EQ(r.pose_criteria[1], 100.0);
}

TEST(Report, MismatchedIdsAreListed) {
  const Dataset ds = small_dataset();
  auto preds = as_predictions(ds);
  preds.pop_back();
  preds.front().sample_id = "ghost_00000";
  try {
    build_report(ds, preds);
    FAIL();
  } catch (const InvalidArgumentError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("ghost_00000"), std::string::npos);
    EXPECT_NE(msg.find(ds.records.back().sample_id), std::string::npos);
  }
  EXPECT_THROW(build_report(ds, std::vector<PredictionRecord>{}), InvalidArgumentError);
}

TEST(Report, DeterministicAndFormatted) {
  const Dataset ds = small_dataset();
  auto preds = as_predictions(ds);
  for (auto& p : preds) p.pose.t.z() += 0.07;
  const MetricsReport a = build_report(ds, preds);
  const MetricsReport b = build_report(ds, preds);
  EXPECT_EQ(a, b);
  const std::string table = format_report_table(a);
  EXPECT_NE(table.find("theta_y"), std::string::npos);
  EXPECT_NE(table.find("5"), std::string::npos);
  const std::string jsonl = format_report_jsonl(a);
  EXPECT_NE(jsonl.find("\"add\""), std::string::npos);
}

TEST(Report, FailedPredictionsCountAsMisses) {
  const Dataset ds = small_dataset();
  auto preds = as_predictions(ds);
  preds[0].error = "under-constrained";
  const MetricsReport r = build_report(ds, preds);
  EXPECT_EQ(r.failed_count, 1u);
  EXPECT_LT(r.pose_criteria[3], 100.0);
}

}  // namespace
}  // namespace bikepose
