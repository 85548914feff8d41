#include <gtest/gtest.h>

#include <random>

#include "bikepose/oracle/oracles.hpp"

namespace bikepose::oracle {
namespace {

TEST(OracleSelfCheck, RodriguesAgreesWithAxisMatrices) {
  for (double deg : {-120.0, -3.0, 0.0, 45.0, 170.0}) {
    const Mat4 about_x = rotation_about_line(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitX(), deg);
    EXPECT_LE((about_x.block<3, 3>(0, 0) - axis_x(deg)).norm(), 1e-14);
    const Mat4 about_y = rotation_about_line(Eigen::Vector3d::Zero(), Eigen::Vector3d(0, 3, 0), deg);
    EXPECT_LE((about_y.block<3, 3>(0, 0) - axis_y(deg)).norm(), 1e-14);
  }
}

TEST(OracleSelfCheck, PivotIsFixed) {
  const Eigen::Vector3d pivot(0.3, -1.0, 2.0);
  const Mat4 m = rotation_about_line(pivot, Eigen::Vector3d(1, 2, 3), 77.0);
  const Eigen::Vector4d h = m * Eigen::Vector4d(pivot.x(), pivot.y(), pivot.z(), 1.0);
  EXPECT_LE((h.head<3>() - pivot).norm(), 1e-14);
}

TEST(OracleSelfCheck, RandomResidualsInsideBall) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const ResidualSet r = random_residuals(rng, 0.2);
    for (const Vec3& v : r) EXPECT_LE(v.norm(), 0.2);
    EXPECT_EQ(r[KeypointId::kGroundRoot], Vec3::Zero());
  }
}

TEST(OracleSelfCheck, GradientAgreementTolerance) {
  Eigen::VectorXd a(3), b(3);
  a << 1.0, -2.0, 1e-9;
  b << 1.0 + 5e-5, -2.0, 0.0;
  EXPECT_TRUE(gradients_agree(a, b, 1e-4));
  b[0] = 1.001;
  EXPECT_FALSE(gradients_agree(a, b, 1e-4));
}

TEST(Suites, KinematicsPasses) {
  const SuiteResult r = kinematics_suite(SuiteOptions{});
  EXPECT_TRUE(r.ok()) << r.first_failure;
  EXPECT_GE(r.total, 1000u);
}

TEST(Suites, IouPasses) {
  const SuiteResult r = iou_suite(SuiteOptions{});
  EXPECT_TRUE(r.ok()) << r.first_failure;
  EXPECT_EQ(r.total, 101u);
}

TEST(Suites, IouNegativeControlFails) {
  SuiteOptions opts;
  opts.iou_tol = 1e-4;
  const SuiteResult r = iou_suite(opts);
  EXPECT_FALSE(r.ok());
  EXPECT_FALSE(r.first_failure.empty());
}

TEST(Suites, GradientPasses) {
  const SuiteResult r = gradient_suite(SuiteOptions{});
  EXPECT_TRUE(r.ok()) << r.first_failure;
  EXPECT_EQ(r.total, 100u);
}

TEST(Suites, Deterministic) {
  SuiteOptions opts;
  opts.kinematics_draws = 50;
  opts.iou_pairs = 10;
  opts.gradient_points = 10;
  const auto a = run_all(opts);
  const auto b = run_all(opts);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].passed, b[i].passed);
    EXPECT_EQ(a[i].total, b[i].total);
  }
}

}  // namespace
}  // namespace bikepose::oracle
