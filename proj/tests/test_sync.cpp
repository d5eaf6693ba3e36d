#include <Eigen/Dense>
#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>
#include <vector>

#include "rigkit/sync.hpp"
#include "rigkit/trajectory.hpp"
#include "test_support.hpp"

namespace {

using Eigen::Vector3d;
using rigkit::geom::FrameId;
using rigkit::geom::RigidTransform;
using rigkit::geom::TimedPose;
using rigkit::geom::Trajectory;
using rigkit::sync::DistanceCurve;
namespace sync = rigkit::sync;
namespace geom = rigkit::geom;

// Orbit with deliberate speed variation so arc length is not linear in time
// and a time shift leaves a distinctive signature.
Vector3d world_pos(double tau) {
  const double theta = 0.6 * tau + 0.25 * std::sin(0.8 * tau);
  return {0.5 * std::cos(theta), 0.5 * std::sin(theta), 0.3 + 0.1 * std::sin(0.9 * tau)};
}

// Stream sampling the world motion at uniform world times, recording
// timestamps world_time - clock_shift; adding clock_shift re-aligns it.
Trajectory stream(double clock_shift, double duration, double dt,
                  std::mt19937_64* noise_rng = nullptr, double sigma_axis = 0.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<TimedPose> samples;
  const auto count = static_cast<int>(std::round(duration / dt)) + 1;
  for (int k = 0; k < count; ++k) {
    const double tau = k * dt;
    Vector3d p = world_pos(tau);
    if (noise_rng != nullptr)
      p += sigma_axis * Vector3d(n(*noise_rng), n(*noise_rng), n(*noise_rng));
    samples.push_back({tau - clock_shift,
                       RigidTransform(Eigen::Quaterniond::Identity(), p,
                                      FrameId{"MB"}, FrameId{"TB"})});
  }
  return {FrameId{"TB"}, FrameId{"MB"}, std::move(samples)};
}

DistanceCurve ramp_curve(double t0, double dt, int n, double slope) {
  DistanceCurve c;
  c.dt = dt;
  for (int k = 0; k < n; ++k) c.samples.push_back({t0 + k * dt, slope * k * dt});
  c.validate();
  return c;
}

}  // namespace

TEST_CASE("distance curve of a stationary trajectory is zero") {
  std::vector<TimedPose> samples;
  for (int i = 0; i < 50; ++i)
    samples.push_back({i * 0.1, RigidTransform(Eigen::Quaterniond::Identity(),
                                               Vector3d(0.2, -0.1, 0.4),
                                               FrameId{"MB"}, FrameId{"TB"})});
  const Trajectory traj(FrameId{"TB"}, FrameId{"MB"}, std::move(samples));
  const auto curve = sync::distance_curve(traj, 0.1);
  curve.validate();
  REQUIRE(curve.samples.size() == 50);
  for (const auto& s : curve.samples) CHECK(s.d == 0.0);
}

TEST_CASE("distance curve of constant-velocity motion") {
  std::vector<TimedPose> samples;
  for (int i = 0; i <= 100; ++i) {
    const double t = i * 0.05;
    samples.push_back({t, RigidTransform(Eigen::Quaterniond::Identity(),
                                         Vector3d(0.1 * t, 0, 0),
                                         FrameId{"MB"}, FrameId{"TB"})});
  }
  const Trajectory traj(FrameId{"TB"}, FrameId{"MB"}, std::move(samples));
  const auto curve = sync::distance_curve(traj, 0.1);
  curve.validate();
  REQUIRE(curve.samples.size() == 51);
  for (std::size_t k = 0; k < curve.samples.size(); ++k)
    CHECK(curve.samples[k].d == Catch::Approx(0.01 * static_cast<double>(k)).margin(1e-12));
}

TEST_CASE("distance curve of circular motion matches the analytic arc length") {
  const double r = 0.5, omega = 1.0, dt = 1.0 / 60.0;
  std::vector<TimedPose> samples;
  for (int i = 0; i <= 600; ++i) {
    const double t = i * dt;
    samples.push_back({t, RigidTransform(Eigen::Quaterniond::Identity(),
                                         Vector3d(r * std::cos(omega * t),
                                                  r * std::sin(omega * t), 0.1),
                                         FrameId{"MB"}, FrameId{"TB"})});
  }
  const Trajectory traj(FrameId{"TB"}, FrameId{"MB"}, std::move(samples));
  const auto curve = sync::distance_curve(traj, dt);
  curve.validate();
  for (const auto& s : curve.samples)
    CHECK(std::abs(s.d - r * omega * s.t) < 1e-4);
}

TEST_CASE("distance curve input validation") {
  std::vector<TimedPose> one = {{0.0, RigidTransform::identity(FrameId{"MB"},
                                                               FrameId{"TB"})}};
  const Trajectory tiny(FrameId{"TB"}, FrameId{"MB"}, one);
  CHECK_THROWS_AS(sync::distance_curve(tiny, 0.1), rigkit::TooFewPoses);

  const auto traj = stream(0.0, 1.0, 1.0 / 60.0);
  CHECK_THROWS_AS(sync::distance_curve(traj, 0.0), rigkit::NonPositiveStep);
  CHECK_THROWS_AS(sync::distance_curve(traj, -0.1), rigkit::NonPositiveStep);
}

TEST_CASE("offset of a curve against itself is exactly zero") {
  const auto traj = stream(0.0, 20.0, 1.0 / 60.0);
  const auto curve = sync::distance_curve(traj, 1.0 / 60.0);
  const auto result = sync::estimate_offset_icp(curve, curve, 2.0);
  CHECK(result.offset == 0.0);
  CHECK(result.residual < 1e-12);
  CHECK(result.converged);
}

TEST_CASE("icp recovers injected sub-sample offsets on clean curves") {
  const double dt = 1.0 / 60.0;
  const auto a = sync::distance_curve(stream(0.0, 20.0, dt), dt);
  for (const double truth : {0.137, -0.25, 1.0}) {
    const auto b = sync::distance_curve(stream(truth, 20.0, dt), dt);
    const auto result = sync::estimate_offset_icp(a, b, 2.0);
    CHECK(std::abs(result.offset - truth) < dt / 2);
    const auto oracle = sync::brute_force_offset(a, b, 2.0);
    CHECK(std::abs(result.offset - oracle.offset) < dt / 2);
  }
}

TEST_CASE("icp agrees with brute force on noisy curves") {
  const double dt = 1.0 / 60.0;
  std::mt19937_64 rng(42);
  const double sigma = 0.92e-3 / std::sqrt(3.0);

  const auto traj_a = stream(0.0, 20.0, dt, &rng, sigma);
  const auto traj_b = stream(0.137, 20.0, dt, &rng, sigma);

  SECTION("raw curves") {
    const auto a = sync::distance_curve(traj_a, dt);
    const auto b = sync::distance_curve(traj_b, dt);
    const auto icp = sync::estimate_offset_icp(a, b, 2.0);
    const auto oracle = sync::brute_force_offset(a, b, 2.0);
    CHECK(std::abs(icp.offset - oracle.offset) <= dt);
  }

  SECTION("smoothed curves recover the true offset") {
    const int w = 15;  // quarter second at 60 Hz
    const auto a = sync::distance_curve(sync::smooth_positions(traj_a, w), dt);
    const auto b = sync::distance_curve(sync::smooth_positions(traj_b, w), dt);
    const auto icp = sync::estimate_offset_icp(a, b, 2.0);
    CHECK(std::abs(icp.offset - 0.137) < dt / 2);
    const auto oracle = sync::brute_force_offset(a, b, 2.0);
    CHECK(std::abs(icp.offset - oracle.offset) <= dt);
  }
}

TEST_CASE("icp offset is antisymmetric") {
  const double dt = 1.0 / 60.0;
  const auto a = sync::distance_curve(stream(0.0, 20.0, dt), dt);
  const auto b = sync::distance_curve(stream(0.4, 20.0, dt), dt);
  const auto ab = sync::estimate_offset_icp(a, b, 2.0);
  const auto ba = sync::estimate_offset_icp(b, a, 2.0);
  CHECK(ab.converged);
  CHECK(ba.converged);
  CHECK(std::abs(ab.offset + ba.offset) < dt);
}

TEST_CASE("icp residual is never worse than leaving streams unaligned") {
  const double dt = 1.0 / 60.0;
  std::mt19937_64 rng(7);
  for (const double truth : {0.0, 0.1, 0.8}) {
    const auto a = sync::distance_curve(stream(0.0, 15.0, dt, &rng, 0.3e-3), dt);
    const auto b = sync::distance_curve(stream(truth, 15.0, dt, &rng, 0.3e-3), dt);
    const auto result = sync::estimate_offset_icp(a, b, 1.5);
    CHECK(result.residual <= sync::curve_rmse(a, b, 0.0) + 1e-15);
  }
}

TEST_CASE("brute force offset on constructed curves") {
  const auto a = ramp_curve(0.0, 0.1, 100, 0.1);

  SECTION("identical curves give zero") {
    const auto r = sync::brute_force_offset(a, a, 1.0);
    CHECK(r.offset == 0.0);
    CHECK(r.residual < 1e-15);
  }

  SECTION("ramp against shifted ramp") {
    auto b = a;
    for (auto& s : b.samples) s.t -= 3 * 0.1;
    const auto r = sync::brute_force_offset(a, b, 1.0);
    CHECK(r.offset == Catch::Approx(0.3).margin(1e-12));
    CHECK(r.residual < 1e-12);
  }

  SECTION("grid-aligned shift on simulated motion is exact") {
    const double dt = 1.0 / 60.0;
    const auto c = sync::distance_curve(stream(0.0, 10.0, dt), dt);
    const auto d = sync::distance_curve(stream(3 * dt, 10.0, dt), dt);
    const auto r = sync::brute_force_offset(c, d, 1.0);
    CHECK(r.offset == Catch::Approx(3 * dt).margin(1e-12));
  }
}

TEST_CASE("offset estimators validate their inputs") {
  const auto a = ramp_curve(0.0, 0.1, 60, 0.1);
  const auto b = ramp_curve(0.0, 0.05, 60, 0.1);
  CHECK_THROWS_AS(sync::estimate_offset_icp(a, b, 1.0), rigkit::TimestampMismatch);
  CHECK_THROWS_AS(sync::brute_force_offset(a, b, 1.0), rigkit::TimestampMismatch);

  const auto short_a = ramp_curve(0.0, 0.1, 10, 0.1);
  const auto short_b = ramp_curve(0.0, 0.1, 10, 0.1);
  CHECK_THROWS_AS(sync::estimate_offset_icp(short_a, short_b, 0.9),
                  rigkit::InsufficientOverlap);
  CHECK_THROWS_AS(sync::brute_force_offset(short_a, short_b, 0.9),
                  rigkit::InsufficientOverlap);

  CHECK_THROWS_AS(sync::estimate_offset_icp(a, a, 0.0), rigkit::OutOfRange);

  DistanceCurve bad = a;
  bad.samples[5].d = bad.samples[4].d - 0.01;
  CHECK_THROWS_AS(sync::estimate_offset_icp(bad, a, 1.0), rigkit::Error);
}

TEST_CASE("apply_offset shifts timestamps and nothing else") {
  const auto traj = stream(0.0, 5.0, 1.0 / 60.0);

  const auto same = sync::apply_offset(traj, 0.0);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    CHECK(same.samples()[i].t == traj.samples()[i].t);
    CHECK(same.samples()[i].pose.translation() == traj.samples()[i].pose.translation());
  }

  const auto back = sync::apply_offset(sync::apply_offset(traj, 1.0), -1.0);
  for (std::size_t i = 0; i < traj.size(); ++i)
    CHECK(std::abs(back.samples()[i].t - traj.samples()[i].t) < 1e-12);

  const auto shifted = sync::apply_offset(traj, 0.7);
  for (const double t : {1.0, 2.5, 4.2}) {
    const auto p1 = geom::interpolate_pose(shifted, t + 0.7);
    const auto p2 = geom::interpolate_pose(traj, t);
    CHECK((p1.translation() - p2.translation()).norm() < 1e-12);
  }
}

TEST_CASE("position smoothing preserves linear motion and attenuates noise") {
  const double dt = 1.0 / 60.0;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);

  std::vector<TimedPose> clean, noisy;
  for (int i = 0; i <= 600; ++i) {
    const double t = i * dt;
    const Vector3d p(0.2 * t, -0.1 * t, 0.05 * t);
    clean.push_back({t, RigidTransform(Eigen::Quaterniond::Identity(), p,
                                       FrameId{"MB"}, FrameId{"TB"})});
    noisy.push_back({t, RigidTransform(Eigen::Quaterniond::Identity(),
                                       p + 1e-3 * Vector3d(n(rng), n(rng), n(rng)),
                                       FrameId{"MB"}, FrameId{"TB"})});
  }
  const Trajectory clean_traj(FrameId{"TB"}, FrameId{"MB"}, clean);
  const Trajectory noisy_traj(FrameId{"TB"}, FrameId{"MB"}, noisy);

  const auto smoothed_clean = sync::smooth_positions(clean_traj, 10);
  for (std::size_t i = 0; i < clean_traj.size(); ++i)
    CHECK((smoothed_clean.samples()[i].pose.translation() -
           clean_traj.samples()[i].pose.translation()).norm() < 1e-12);

  const auto smoothed = sync::smooth_positions(noisy_traj, 10);
  double raw_err = 0, smooth_err = 0;
  for (std::size_t i = 0; i < clean_traj.size(); ++i) {
    raw_err += (noisy_traj.samples()[i].pose.translation() -
                clean_traj.samples()[i].pose.translation()).squaredNorm();
    smooth_err += (smoothed.samples()[i].pose.translation() -
                   clean_traj.samples()[i].pose.translation()).squaredNorm();
    CHECK(smoothed.samples()[i].t == noisy_traj.samples()[i].t);
  }
  CHECK(smooth_err < raw_err / 4);

  const auto identity = sync::smooth_positions(noisy_traj, 0);
  for (std::size_t i = 0; i < noisy_traj.size(); ++i)
    CHECK(identity.samples()[i].pose.translation() ==
          noisy_traj.samples()[i].pose.translation());

  CHECK_THROWS_AS(sync::smooth_positions(noisy_traj, -1), rigkit::OutOfRange);
}
