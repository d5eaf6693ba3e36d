#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <string>
#include <vector>

#include "rigkit/errors.hpp"
#include "rigkit/trajectory.hpp"
#include "rigkit/transform.hpp"

namespace rigkit::calib {

struct PivotResult {
  Eigen::Vector3d tip_offset = Eigen::Vector3d::Zero();   // marker frame, meters
  Eigen::Vector3d pivot_point = Eigen::Vector3d::Zero();  // base frame, meters
  double rmse = 0.0;                                      // meters
  geom::FrameId marker_frame;
  geom::FrameId base_frame;
};

// Tool-tip calibration from poses of a pivoting marker. Every pose maps the
// marker frame into the tracker base frame; the tip location (fixed in the
// marker frame) and the pivot point (fixed in the base frame) satisfy
// R_i * tip + t_i = pivot for all poses. Solved as the stacked linear system
// [R_i | -I] [tip; pivot] = -t_i in least squares via SVD.
inline PivotResult pivot_calibrate(const std::vector<geom::RigidTransform>& marker_poses) {
  if (marker_poses.size() < 3)
    throw TooFewPoses("pivot_calibrate: need at least 3 poses, got " +
                      std::to_string(marker_poses.size()));
  const geom::FrameId marker = marker_poses.front().from_frame();
  const geom::FrameId base = marker_poses.front().to_frame();
  for (const auto& pose : marker_poses)
    if (!(pose.from_frame() == marker) || !(pose.to_frame() == base))
      throw FrameMismatch("pivot_calibrate: pose maps " + pose.from_frame().name +
                          " to " + pose.to_frame().name + " but expected " +
                          marker.name + " to " + base.name);

  const auto n = static_cast<Eigen::Index>(marker_poses.size());
  Eigen::MatrixXd a(3 * n, 6);
  Eigen::VectorXd b(3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a.block<3, 3>(3 * i, 0) = marker_poses[static_cast<std::size_t>(i)].rotation_matrix();
    a.block<3, 3>(3 * i, 3) = -Eigen::Matrix3d::Identity();
    b.segment<3>(3 * i) = -marker_poses[static_cast<std::size_t>(i)].translation();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cond = sv(0) / sv(5);
  if (!(cond <= 1e8))
    throw DegenerateMotion(
        "pivot_calibrate: rotations do not span enough axes to determine the tip "
        "(condition number " + std::to_string(cond) + ")");

  const Eigen::Matrix<double, 6, 1> solution = svd.solve(b);
  PivotResult result;
  result.tip_offset = solution.head<3>();
  result.pivot_point = solution.tail<3>();
  result.marker_frame = marker;
  result.base_frame = base;

  double ss = 0;
  for (const auto& pose : marker_poses)
    ss += (pose.apply(result.tip_offset) - result.pivot_point).squaredNorm();
  result.rmse = std::sqrt(ss / static_cast<double>(marker_poses.size()));
  return result;
}

struct HandEyeObservation {
  geom::RigidTransform base_to_hand;    // maps base coordinates into the hand frame
  geom::RigidTransform hand_eye_chain;  // maps base coordinates into the camera frame
};

struct HandEyeResult {
  geom::RigidTransform x = geom::RigidTransform::identity({"unset"});
  double trans_residual_rmse = 0.0;  // meters
  double rot_residual_rmse = 0.0;    // degrees
  std::vector<geom::PoseError> per_frame_errors;
};

namespace detail {

inline void fill_residuals(HandEyeResult& result) {
  double ss_t = 0, ss_r = 0;
  for (const auto& e : result.per_frame_errors) {
    ss_t += e.translation_m * e.translation_m;
    ss_r += e.rotation_deg * e.rotation_deg;
  }
  const auto n = static_cast<double>(result.per_frame_errors.size());
  result.trans_residual_rmse = std::sqrt(ss_t / n);
  result.rot_residual_rmse = std::sqrt(ss_r / n);
}

}  // namespace detail

// Hand-eye calibration by direct frame-chain composition. Each observation
// yields its own estimate X_i = base_to_hand ∘ invert(hand_eye_chain), which
// maps the camera frame into the hand frame; estimates are fused by pose
// averaging and residuals report the per-frame spread around the average.
inline HandEyeResult handeye_closed_form(
    const std::vector<HandEyeObservation>& observations) {
  if (observations.empty()) throw EmptyInput("handeye_closed_form: no observations");

  std::vector<geom::RigidTransform> estimates;
  estimates.reserve(observations.size());
  for (const auto& obs : observations)
    estimates.push_back(geom::compose(obs.base_to_hand, geom::invert(obs.hand_eye_chain)));

  HandEyeResult result;
  result.x = geom::average_transforms(estimates);
  result.per_frame_errors.reserve(estimates.size());
  for (const auto& x_i : estimates)
    result.per_frame_errors.push_back(geom::pose_error(x_i, result.x));
  detail::fill_residuals(result);
  return result;
}

// Hand-eye calibration by trajectory alignment. Both trajectories must share
// the same parent (tracker base) frame and be time-synchronized beforehand.
// Camera timestamps are the master clock; marker poses are interpolated onto
// them. Per-sample X_i = invert(marker_pose_i) ∘ camera_pose_i are averaged,
// and residuals compare marker_pose_i ∘ X against the camera samples.
inline HandEyeResult handeye_trajectory(const geom::Trajectory& camera_traj,
                                        const geom::Trajectory& marker_traj) {
  if (!(camera_traj.parent_frame() == marker_traj.parent_frame()))
    throw FrameMismatch("handeye_trajectory: camera parent " +
                        camera_traj.parent_frame().name + " differs from marker parent " +
                        marker_traj.parent_frame().name);
  if (camera_traj.size() < 2 || marker_traj.size() < 2)
    throw TooFewPoses("handeye_trajectory: both trajectories need at least 2 samples");
  if (camera_traj.start_time() > marker_traj.end_time() ||
      camera_traj.end_time() < marker_traj.start_time())
    throw TimestampMismatch("handeye_trajectory: trajectories do not overlap in time");

  std::vector<geom::RigidTransform> markers, cameras, estimates;
  for (const auto& sample : camera_traj.samples()) {
    if (sample.t < marker_traj.start_time() || sample.t > marker_traj.end_time()) continue;
    const auto marker_pose = geom::interpolate_pose(marker_traj, sample.t);
    markers.push_back(marker_pose);
    cameras.push_back(sample.pose);
    estimates.push_back(geom::compose(geom::invert(marker_pose), sample.pose));
  }
  if (estimates.size() < 2)
    throw TooFewPoses("handeye_trajectory: only " + std::to_string(estimates.size()) +
                      " camera samples fall inside the marker time span");

  HandEyeResult result;
  result.x = geom::average_transforms(estimates);
  result.per_frame_errors.reserve(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i)
    result.per_frame_errors.push_back(
        geom::pose_error(geom::compose(markers[i], result.x), cameras[i]));
  detail::fill_residuals(result);
  return result;
}

}  // namespace rigkit::calib
