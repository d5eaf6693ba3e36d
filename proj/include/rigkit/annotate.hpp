#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "rigkit/errors.hpp"
#include "rigkit/mesh.hpp"
#include "rigkit/point_cloud.hpp"
#include "rigkit/registration.hpp"
#include "rigkit/trajectory.hpp"
#include "rigkit/transform.hpp"

namespace rigkit::annotate {

// Marker poses recorded while a calibrated pointer tip touches a surface,
// plus the tip offset in the marker frame from pivot calibration.
struct TipMeasurementSession {
  std::vector<geom::RigidTransform> marker_poses;  // marker frame -> base frame
  Eigen::Vector3d tip_offset = Eigen::Vector3d::Zero();
};

// Below this many touch points, annotations tend to be noticeably less
// stable; callers surface a warning but proceed.
inline constexpr std::size_t kRecommendedMinPoints = 10;

// One tip position in the base frame per marker pose.
inline registration::PointCloud tip_points(const TipMeasurementSession& session) {
  if (session.marker_poses.size() < 4)
    throw TooFewPoints("tip_points: need at least 4 marker poses, got " +
                       std::to_string(session.marker_poses.size()));
  const auto& first = session.marker_poses.front();
  registration::PointCloud cloud;
  cloud.frame = first.to_frame();
  cloud.points.reserve(session.marker_poses.size());
  for (const auto& pose : session.marker_poses) {
    if (!(pose.from_frame() == first.from_frame()) || !(pose.to_frame() == first.to_frame()))
      throw FrameMismatch("tip_points: mixed frames " + pose.from_frame().name + " -> " +
                          pose.to_frame().name + " vs " + first.from_frame().name + " -> " +
                          first.to_frame().name);
    cloud.points.push_back(pose.apply(session.tip_offset));
  }
  return cloud;
}

struct AnnotationParams {
  registration::IcpParams icp;
  std::string method = "tracker";
};

struct ObjectAnnotation {
  geom::RigidTransform pose = geom::RigidTransform::identity({"unset"});  // mesh -> base
  double correspondence_rmse = 0.0;  // meters, over the initial correspondence fit
  double icp_rmse = 0.0;             // meters, over the final icp inliers
  std::size_t point_count = 0;
  std::string method = "tracker";
};

// Pose of a mesh model in the measurement frame from touched points:
// a correspondence fit (touched point i <-> model point i) gives the initial
// pose, then trimmed icp against the full surface refines it.
inline ObjectAnnotation annotate_object(const registration::PointCloud& points,
                                        const registration::TriangleMesh& mesh,
                                        const registration::PointCloud& correspondences,
                                        const AnnotationParams& params = {}) {
  if (points.points.empty()) throw EmptyInput("annotate_object: no measured points");
  points.validate();
  correspondences.validate();
  mesh.validate();
  if (!(correspondences.frame == mesh.frame))
    throw FrameMismatch("annotate_object: correspondences are in '" +
                        correspondences.frame.name + "' but the mesh lives in '" +
                        mesh.frame.name + "'");
  if (points.size() != correspondences.size())
    throw Error("annotate_object: " + std::to_string(points.size()) + " points vs " +
                std::to_string(correspondences.size()) + " correspondences");

  const geom::RigidTransform initial = registration::kabsch_fit(correspondences, points);

  double sq_sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    sq_sum += (initial.apply(correspondences.points[i]) - points.points[i]).squaredNorm();
  const double correspondence_rmse = std::sqrt(sq_sum / static_cast<double>(points.size()));

  const auto result = registration::icp(points, mesh, geom::invert(initial), params.icp);

  ObjectAnnotation annotation;
  annotation.pose = geom::invert(result.transform);
  annotation.correspondence_rmse = correspondence_rmse;
  annotation.icp_rmse = result.rmse;
  annotation.point_count = points.size();
  annotation.method = params.method;
  return annotation;
}

// Pose of a large static mesh (table, wall, fixture) from a partial surface
// scan and a rough initial pose; pure icp, no correspondences.
inline ObjectAnnotation align_background(const registration::PointCloud& partial_scan,
                                         const registration::TriangleMesh& background_mesh,
                                         const geom::RigidTransform& init,
                                         const AnnotationParams& params = {}) {
  if (partial_scan.points.empty()) throw EmptyInput("align_background: empty scan");
  partial_scan.validate();
  background_mesh.validate();
  if (!(init.from_frame() == background_mesh.frame) ||
      !(init.to_frame() == partial_scan.frame))
    throw FrameMismatch("align_background: init maps " + init.from_frame().name + " -> " +
                        init.to_frame().name + " but mesh is in '" +
                        background_mesh.frame.name + "' and scan in '" +
                        partial_scan.frame.name + "'");

  const auto result =
      registration::icp(partial_scan, background_mesh, geom::invert(init), params.icp);

  ObjectAnnotation annotation;
  annotation.pose = geom::invert(result.transform);
  annotation.correspondence_rmse = 0.0;
  annotation.icp_rmse = result.rmse;
  annotation.point_count = partial_scan.size();
  annotation.method = params.method;
  return annotation;
}

// Camera trajectory implied by a tracked marker stream and the hand-eye
// transform: camera pose_i = marker pose_i composed with camera -> marker.
inline geom::Trajectory annotate_camera_trajectory(const geom::Trajectory& marker_traj,
                                                   const geom::RigidTransform& hand_eye) {
  if (!(marker_traj.child_frame() == hand_eye.to_frame()))
    throw FrameMismatch("annotate_camera_trajectory: trajectory tracks '" +
                        marker_traj.child_frame().name + "' but hand_eye maps " +
                        hand_eye.from_frame().name + " -> " + hand_eye.to_frame().name);
  std::vector<geom::TimedPose> samples;
  samples.reserve(marker_traj.samples().size());
  for (const auto& s : marker_traj.samples())
    samples.push_back({s.t, geom::compose(s.pose, hand_eye)});
  return geom::Trajectory(marker_traj.parent_frame(), hand_eye.from_frame(),
                          std::move(samples));
}

// When a stage's error applies. Tracker jitter differs between holding still
// and moving, so those stages only count toward one side of the budget.
enum class StageScope { kAlways, kStaticOnly, kDynamicOnly };

struct ErrorStage {
  std::string name;
  double trans_rmse = 0.0;    // meters
  double rot_rmse_deg = 0.0;  // degrees
  double lever_arm = 0.0;     // meters, moment arm turning rotation into offset
  StageScope scope = StageScope::kAlways;
};

struct ErrorBudget {
  std::vector<ErrorStage> stages;
  double lower_bound = 0.0;  // meters, all static-case stages
  double upper_bound = 0.0;  // meters, all dynamic-case stages
};

// Point-error magnitude contributed by one stage.
inline double stage_error(const ErrorStage& stage) {
  const double rot_offset = geom::deg_to_rad(stage.rot_rmse_deg) * stage.lever_arm;
  return std::sqrt(stage.trans_rmse * stage.trans_rmse + rot_offset * rot_offset);
}

// Root-sum-square combination of independent per-stage errors. The bounds
// swap static-case tracker stages for dynamic-case ones.
inline ErrorBudget error_budget(const std::vector<ErrorStage>& stages) {
  if (stages.empty()) throw EmptyInput("error_budget: no stages");
  double lower_sq = 0.0;
  double upper_sq = 0.0;
  for (const auto& stage : stages) {
    if (!std::isfinite(stage.trans_rmse) || !std::isfinite(stage.rot_rmse_deg) ||
        !std::isfinite(stage.lever_arm))
      throw Error("error_budget: non-finite value in stage '" + stage.name + "'");
    if (stage.trans_rmse < 0.0 || stage.rot_rmse_deg < 0.0 || stage.lever_arm < 0.0)
      throw NegativeError("error_budget: negative value in stage '" + stage.name + "'");
    const double e = stage_error(stage);
    if (stage.scope != StageScope::kDynamicOnly) lower_sq += e * e;
    if (stage.scope != StageScope::kStaticOnly) upper_sq += e * e;
  }
  ErrorBudget budget;
  budget.stages = stages;
  budget.lower_bound = std::sqrt(lower_sq);
  budget.upper_bound = std::sqrt(upper_sq);
  return budget;
}

}  // namespace rigkit::annotate
