#include <Eigen/Dense>
#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <random>
#include <vector>

#include "rigkit/annotate.hpp"
#include "rigkit/primitives.hpp"
#include "test_support.hpp"

namespace {

using Eigen::Vector3d;
using rigkit::geom::FrameId;
using rigkit::geom::RigidTransform;
using rigkit::geom::TimedPose;
using rigkit::geom::Trajectory;
using rigkit::registration::PointCloud;
using rigkit::registration::TriangleMesh;
namespace ann = rigkit::annotate;
namespace geom = rigkit::geom;
namespace prim = rigkit::primitives;
namespace reg = rigkit::registration;
namespace ts = test_support;

const FrameId kBase{"TB"};
const FrameId kMarker{"MB"};
const FrameId kMesh{"mesh"};

ann::TipMeasurementSession touch_session(const std::vector<RigidTransform>& poses,
                                         const Vector3d& tip) {
  return {poses, tip};
}

// Marker poses whose tip lands exactly on the given base-frame targets.
std::vector<RigidTransform> poses_reaching(const std::vector<Vector3d>& targets,
                                           const Vector3d& tip, std::mt19937_64& rng) {
  std::vector<RigidTransform> poses;
  for (const auto& target : targets) {
    const Eigen::Quaterniond q = ts::random_unit_quaternion(rng);
    poses.emplace_back(q, target - q * tip, kMarker, kBase);
  }
  return poses;
}

struct ObjectFixture {
  TriangleMesh mesh;
  RigidTransform true_pose = RigidTransform::identity(kMesh, kBase);
  PointCloud correspondences;  // on the mesh surface, mesh frame
  PointCloud points;           // the same points in the base frame
};

ObjectFixture box_fixture(std::mt19937_64& rng, int n_points, double noise_axis_m = 0.0) {
  ObjectFixture f;
  f.mesh = prim::make_box({0.12, 0.08, 0.05}, kMesh);
  f.true_pose = RigidTransform(ts::random_unit_quaternion(rng),
                               ts::random_vector(rng, 0.3), kMesh, kBase);
  f.correspondences = reg::sample_surface(f.mesh, n_points, rng);
  f.points = reg::transform_cloud(f.correspondences, f.true_pose);
  if (noise_axis_m > 0.0) {
    std::normal_distribution<double> n(0.0, noise_axis_m);
    for (auto& p : f.points.points) p += Vector3d(n(rng), n(rng), n(rng));
  }
  return f;
}

}  // namespace

TEST_CASE("tip points place the tip offset through each marker pose") {
  std::mt19937_64 rng(11);
  const Vector3d tip(0.010, -0.005, 0.120);
  const std::vector<Vector3d> targets = {{0.1, 0.0, 0.0},
                                         {0.0, 0.2, 0.05},
                                         {-0.1, 0.1, 0.3},
                                         {0.25, -0.15, 0.12},
                                         {0.0, 0.0, 0.0}};
  const auto poses = poses_reaching(targets, tip, rng);
  const PointCloud cloud = ann::tip_points(touch_session(poses, tip));

  REQUIRE(cloud.size() == targets.size());
  REQUIRE(cloud.frame == kBase);
  for (std::size_t i = 0; i < targets.size(); ++i)
    CHECK((cloud.points[i] - targets[i]).norm() < 1e-12);
}

TEST_CASE("tip points with a zero offset return the marker positions") {
  std::mt19937_64 rng(12);
  std::vector<RigidTransform> poses;
  for (int i = 0; i < 6; ++i)
    poses.push_back(ts::random_transform(rng, kMarker, kBase, 0.4));
  const PointCloud cloud = ann::tip_points(touch_session(poses, Vector3d::Zero()));
  for (std::size_t i = 0; i < poses.size(); ++i)
    CHECK((cloud.points[i] - poses[i].translation()).norm() == 0.0);
}

TEST_CASE("tip points validation") {
  std::mt19937_64 rng(13);
  std::vector<RigidTransform> three;
  for (int i = 0; i < 3; ++i) three.push_back(ts::random_transform(rng, kMarker, kBase));
  CHECK_THROWS_AS(ann::tip_points(touch_session(three, Vector3d::Zero())),
                  rigkit::TooFewPoints);

  auto mixed = three;
  mixed.push_back(ts::random_transform(rng, kMarker, FrameId{"other"}));
  CHECK_THROWS_AS(ann::tip_points(touch_session(mixed, Vector3d::Zero())),
                  rigkit::FrameMismatch);

  CHECK(ann::kRecommendedMinPoints == 10);
}

TEST_CASE("object annotation recovers an exact pose from noise-free points") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const auto f = box_fixture(rng, 25);
    const auto a = ann::annotate_object(f.points, f.mesh, f.correspondences);
    const auto err = geom::pose_error(a.pose, f.true_pose);
    CHECK(err.translation_m < 1e-9);
    CHECK(err.rotation_deg < 1e-7);
    CHECK(a.correspondence_rmse < 1e-12);
    CHECK(a.icp_rmse < 1e-9);
    CHECK(a.point_count == 25);
    CHECK(a.method == "tracker");
  }
}

TEST_CASE("object annotation stays tight under robot-level point noise") {
  std::mt19937_64 rng(22);
  const double sigma_axis = 0.1e-3 / std::sqrt(3.0);  // 0.1 mm deviation magnitude
  std::vector<double> trans_errs;
  std::vector<double> rot_errs;
  for (int seed = 0; seed < 10; ++seed) {
    const auto f = box_fixture(rng, 25, sigma_axis);
    ann::AnnotationParams params;
    params.method = "robot";
    const auto a = ann::annotate_object(f.points, f.mesh, f.correspondences, params);
    const auto err = geom::pose_error(a.pose, f.true_pose);
    trans_errs.push_back(err.translation_m);
    rot_errs.push_back(err.rotation_deg);
    CHECK(a.method == "robot");
    CHECK(a.correspondence_rmse < 5.0 * 0.1e-3);
  }
  std::sort(trans_errs.begin(), trans_errs.end());
  std::sort(rot_errs.begin(), rot_errs.end());
  CHECK(trans_errs[trans_errs.size() / 2] < 0.6e-3);
  CHECK(rot_errs[rot_errs.size() / 2] < 1.2);
  CHECK(trans_errs.back() < 0.6e-3);
  CHECK(rot_errs.back() < 1.2);
}

TEST_CASE("object annotation discards gross outliers via trimming") {
  std::mt19937_64 rng(23);
  auto f = box_fixture(rng, 25);
  std::uniform_real_distribution<double> pick(0.0, 1.0);
  for (int k = 0; k < 5; ++k) {
    Vector3d dir = ts::random_vector(rng).normalized();
    f.points.points[static_cast<std::size_t>(k) * 5] += 0.03 * dir;
  }
  ann::AnnotationParams params;
  params.icp.trim_fraction = 0.2;
  params.icp.max_iterations = 600;
  params.icp.rel_change_tol = 1e-14;
  const auto a = ann::annotate_object(f.points, f.mesh, f.correspondences, params);
  const auto err = geom::pose_error(a.pose, f.true_pose);
  CHECK(err.translation_m < 1e-6);
  CHECK(err.rotation_deg < 1e-4);
  CHECK(a.icp_rmse < 1e-9);
}

TEST_CASE("object annotation is equivariant under a rigid change of base frame") {
  std::mt19937_64 rng(24);
  const auto f = box_fixture(rng, 20, 0.2e-3);
  const auto a = ann::annotate_object(f.points, f.mesh, f.correspondences);

  const RigidTransform g = ts::random_transform(rng, kBase, FrameId{"TB2"}, 0.5);
  const PointCloud moved = reg::transform_cloud(f.points, g);
  const auto b = ann::annotate_object(moved, f.mesh, f.correspondences);

  const RigidTransform expected = geom::compose(g, a.pose);
  const auto err = geom::pose_error(b.pose, expected);
  CHECK(err.translation_m < 1e-9);
  CHECK(err.rotation_deg < 1e-7);
  CHECK(std::abs(a.correspondence_rmse - b.correspondence_rmse) < 1e-12);
  CHECK(std::abs(a.icp_rmse - b.icp_rmse) < 1e-12);
}

TEST_CASE("annotation input validation") {
  std::mt19937_64 rng(25);
  auto f = box_fixture(rng, 10);

  auto short_corr = f.correspondences;
  short_corr.points.pop_back();
  CHECK_THROWS_AS(ann::annotate_object(f.points, f.mesh, short_corr), rigkit::Error);

  auto wrong_frame = f.correspondences;
  wrong_frame.frame = FrameId{"not_mesh"};
  CHECK_THROWS_AS(ann::annotate_object(f.points, f.mesh, wrong_frame),
                  rigkit::FrameMismatch);

  PointCloud empty;
  empty.frame = kBase;
  CHECK_THROWS_AS(ann::annotate_object(empty, f.mesh, empty), rigkit::EmptyInput);
}

TEST_CASE("background alignment recovers a displaced initial pose") {
  std::mt19937_64 rng(31);
  const auto floor = prim::make_rectangle(0.8, 0.8, kMesh);
  auto wall_x = prim::make_rectangle(0.8, 0.4, kMesh);
  auto wall_y = prim::make_rectangle(0.4, 0.8, kMesh);
  const Eigen::Quaterniond rx(Eigen::AngleAxisd(geom::kPi / 2, Vector3d::UnitX()));
  const Eigen::Quaterniond ry(Eigen::AngleAxisd(-geom::kPi / 2, Vector3d::UnitY()));
  wall_x = reg::transform_mesh(wall_x, RigidTransform(rx, {0.0, 0.4, 0.2}, kMesh, kMesh));
  wall_y = reg::transform_mesh(wall_y, RigidTransform(ry, {0.4, 0.0, 0.2}, kMesh, kMesh));
  const auto corner = prim::merge_meshes({floor, wall_x, wall_y});

  const RigidTransform true_pose(ts::random_unit_quaternion(rng),
                                 ts::random_vector(rng, 0.3), kMesh, kBase);
  const PointCloud scan =
      reg::transform_cloud(reg::sample_surface(corner, 400, rng), true_pose);

  const RigidTransform init = ts::perturb(rng, true_pose, 5e-3 / std::sqrt(3.0), 2.0);
  ann::AnnotationParams params;
  params.icp.max_iterations = 600;
  params.icp.rel_change_tol = 1e-14;
  const auto a = ann::align_background(scan, corner, init, params);

  const auto err = geom::pose_error(a.pose, true_pose);
  CHECK(err.translation_m < 1e-6);
  CHECK(err.rotation_deg < 1e-4);
  CHECK(a.correspondence_rmse == 0.0);
  CHECK(a.point_count == 400);

  CHECK_THROWS_AS(
      ann::align_background(scan, corner, RigidTransform::identity(FrameId{"x"}, kBase), params),
      rigkit::FrameMismatch);
}

TEST_CASE("camera trajectory composes marker poses with the hand-eye transform") {
  std::mt19937_64 rng(41);
  const FrameId camera{"CB"};
  std::vector<TimedPose> samples;
  for (int i = 0; i < 40; ++i)
    samples.push_back({0.1 * i, ts::random_transform(rng, kMarker, kBase, 0.5)});
  const Trajectory marker(kBase, kMarker, samples);
  const RigidTransform hand_eye = ts::random_transform(rng, camera, kMarker, 0.1);

  const Trajectory cam = ann::annotate_camera_trajectory(marker, hand_eye);
  REQUIRE(cam.parent_frame() == kBase);
  REQUIRE(cam.child_frame() == camera);
  REQUIRE(cam.samples().size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(cam.samples()[i].t == samples[i].t);
    const auto err =
        geom::pose_error(cam.samples()[i].pose, geom::compose(samples[i].pose, hand_eye));
    CHECK(err.translation_m == 0.0);
    CHECK(err.rotation_deg < 1e-12);
  }

  const Trajectory relabeled =
      ann::annotate_camera_trajectory(marker, RigidTransform::identity(camera, kMarker));
  for (std::size_t i = 0; i < samples.size(); ++i)
    CHECK((relabeled.samples()[i].pose.translation() -
           samples[i].pose.translation()).norm() == 0.0);

  CHECK_THROWS_AS(
      ann::annotate_camera_trajectory(marker, ts::random_transform(rng, camera, FrameId{"EE"})),
      rigkit::FrameMismatch);
}

TEST_CASE("error budget of a single stage is that stage's magnitude") {
  const ann::ErrorStage only{"stage", 3e-3, 0.0, 0.0, ann::StageScope::kAlways};
  const auto budget = ann::error_budget({only});
  CHECK(budget.lower_bound == Catch::Approx(3e-3).margin(1e-15));
  CHECK(budget.upper_bound == Catch::Approx(3e-3).margin(1e-15));
  CHECK(budget.stages.size() == 1);
}

TEST_CASE("error budget combines stages as root sum of squares") {
  const ann::ErrorStage a{"a", 3e-3, 0.0, 0.0, ann::StageScope::kAlways};
  const ann::ErrorStage b{"b", 4e-3, 0.0, 0.0, ann::StageScope::kAlways};
  const auto budget = ann::error_budget({a, b});
  CHECK(budget.lower_bound == Catch::Approx(5e-3).margin(1e-15));
  CHECK(budget.upper_bound == Catch::Approx(5e-3).margin(1e-15));

  // One degree over a one meter lever arm is pi/180 meters of point error.
  const ann::ErrorStage rot{"rot", 0.0, 1.0, 1.0, ann::StageScope::kAlways};
  const auto rot_budget = ann::error_budget({rot});
  CHECK(rot_budget.lower_bound == Catch::Approx(geom::kPi / 180.0).margin(1e-15));
}

TEST_CASE("error budget from the measured pipeline stages lands in the expected band") {
  const std::vector<ann::ErrorStage> stages = {
      {"pivot_tip", 0.27e-3, 0.0, 0.0, ann::StageScope::kAlways},
      {"hand_eye", 0.32e-3, 0.0, 0.0, ann::StageScope::kAlways},
      {"tracker_static", 0.67e-3, 0.12, 0.5, ann::StageScope::kStaticOnly},
      {"tracker_dynamic", 0.92e-3, 0.16, 0.5, ann::StageScope::kDynamicOnly},
  };
  const auto budget = ann::error_budget(stages);

  // Independent arithmetic for the same numbers.
  const double static_stage =
      std::sqrt(0.67e-3 * 0.67e-3 + std::pow(0.12 * geom::kPi / 180.0 * 0.5, 2));
  const double dynamic_stage =
      std::sqrt(0.92e-3 * 0.92e-3 + std::pow(0.16 * geom::kPi / 180.0 * 0.5, 2));
  const double base_sq = 0.27e-3 * 0.27e-3 + 0.32e-3 * 0.32e-3;
  CHECK(budget.lower_bound ==
        Catch::Approx(std::sqrt(base_sq + static_stage * static_stage)).margin(1e-12));
  CHECK(budget.upper_bound ==
        Catch::Approx(std::sqrt(base_sq + dynamic_stage * dynamic_stage)).margin(1e-12));

  CHECK(budget.lower_bound == Catch::Approx(1.3117e-3).margin(1e-6));
  CHECK(budget.upper_bound == Catch::Approx(1.7238e-3).margin(1e-6));
  CHECK(budget.lower_bound < budget.upper_bound);
  CHECK(budget.lower_bound > 1.0e-3);
  CHECK(budget.upper_bound < 2.5e-3);
}

TEST_CASE("scaling any stage up never shrinks the budget bounds") {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> mag(0.0, 2e-3);
  std::uniform_real_distribution<double> deg(0.0, 0.3);
  std::uniform_int_distribution<int> scope_pick(0, 2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ann::ErrorStage> stages;
    const int n = 2 + trial % 4;
    for (int i = 0; i < n; ++i)
      stages.push_back({"s" + std::to_string(i), mag(rng), deg(rng), 0.5,
                        static_cast<ann::StageScope>(scope_pick(rng))});
    const auto before = ann::error_budget(stages);

    const std::size_t k = static_cast<std::size_t>(trial) % stages.size();
    stages[k].trans_rmse *= 1.5;
    stages[k].rot_rmse_deg *= 1.5;
    const auto after = ann::error_budget(stages);

    REQUIRE(after.lower_bound >= before.lower_bound - 1e-15);
    REQUIRE(after.upper_bound >= before.upper_bound - 1e-15);
    if (ann::stage_error(stages[k]) > 1e-9 &&
        stages[k].scope != ann::StageScope::kDynamicOnly)
      REQUIRE(after.lower_bound > before.lower_bound);
  }
}

TEST_CASE("error budget validation") {
  CHECK_THROWS_AS(ann::error_budget({}), rigkit::EmptyInput);
  CHECK_THROWS_AS(ann::error_budget({{"bad", -1e-3, 0.0, 0.0, ann::StageScope::kAlways}}),
                  rigkit::NegativeError);
  CHECK_THROWS_AS(ann::error_budget({{"bad", 0.0, -0.1, 0.0, ann::StageScope::kAlways}}),
                  rigkit::NegativeError);
  CHECK_THROWS_AS(ann::error_budget({{"bad", 0.0, 0.1, -0.5, ann::StageScope::kAlways}}),
                  rigkit::NegativeError);
  CHECK_THROWS_AS(
      ann::error_budget({{"bad", std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0,
                          ann::StageScope::kAlways}}),
      rigkit::Error);
}
