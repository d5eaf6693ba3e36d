#pragma once

// End-to-end session verification: run the full annotation pipeline on the
// observed data of a recorded session and compare every recovered quantity
// against the session's ground truth. This is the closing loop of the
// simulator: a zero-noise session must verify to numerical precision, a noisy
// one to within the error budget.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rigkit/annotate.hpp"
#include "rigkit/calib.hpp"
#include "rigkit/errors.hpp"
#include "rigkit/sim.hpp"
#include "rigkit/sync.hpp"
#include "rigkit/trajectory.hpp"
#include "rigkit/transform.hpp"

namespace rigkit::verify {

struct ObjectReport {
  std::string object_id;
  double trans_error_mm = 0.0;  // annotated pose vs true pose
  double rot_error_deg = 0.0;
  double correspondence_rmse_mm = 0.0;
  double icp_rmse_mm = 0.0;
  std::size_t point_count = 0;
};

struct Report {
  std::string method;

  double tip_offset_error_mm = 0.0;
  double pivot_point_error_mm = 0.0;
  double pivot_rmse_mm = 0.0;

  bool has_sync = false;  // tracker sessions only
  double sync_offset_s = 0.0;
  double sync_offset_error_ms = 0.0;
  double sync_residual_mm = 0.0;
  bool sync_converged = false;

  double handeye_trans_error_mm = 0.0;
  double handeye_rot_error_deg = 0.0;
  double handeye_residual_mm = 0.0;

  double camera_traj_trans_rmse_mm = 0.0;
  double camera_traj_rot_rmse_deg = 0.0;
  std::size_t camera_traj_samples = 0;

  std::vector<ObjectReport> objects;
};

// Largest length-like entry of the report, the single number a zero-noise
// session drives to the floor.
inline double worst_translation_error_mm(const Report& r) {
  double worst = std::max({r.tip_offset_error_mm, r.pivot_point_error_mm, r.pivot_rmse_mm,
                           r.handeye_trans_error_mm, r.handeye_residual_mm,
                           r.camera_traj_trans_rmse_mm});
  for (const auto& o : r.objects)
    worst = std::max({worst, o.trans_error_mm, o.correspondence_rmse_mm, o.icp_rmse_mm});
  return worst;
}

inline double worst_rotation_error_deg(const Report& r) {
  double worst = std::max(r.handeye_rot_error_deg, r.camera_traj_rot_rmse_deg);
  for (const auto& o : r.objects) worst = std::max(worst, o.rot_error_deg);
  return worst;
}

namespace detail {

// The sync search window: the full configuration cap when the recording is
// long enough, otherwise shrunk so at least half the curves still overlap at
// the bound.
inline double sync_search_window(const geom::Trajectory& reference) {
  const double span = reference.end_time() - reference.start_time();
  return std::min(1.9, 0.45 * span);
}

inline const render::SceneObject& find_object(const render::Scene& scene,
                                              const std::string& object_id) {
  for (const auto& object : scene.objects)
    if (object.object_id == object_id) return object;
  throw UnknownObject("verify: tip session references unknown object '" + object_id + "'");
}

}  // namespace detail

// Recover the camera trajectory in the base frame from the carrier stream and
// a hand-eye transform, then compare it against the true camera trajectory at
// every truth timestamp covered by the annotated stream.
inline void compare_camera_trajectory(const geom::Trajectory& annotated,
                                      const geom::Trajectory& truth, Report& report) {
  double ss_t = 0.0;
  double ss_r = 0.0;
  std::size_t n = 0;
  for (const auto& sample : truth.samples()) {
    if (sample.t < annotated.start_time() || sample.t > annotated.end_time()) continue;
    const geom::RigidTransform recovered = geom::interpolate_pose(annotated, sample.t);
    const auto err = geom::pose_error(recovered, sample.pose);
    ss_t += err.translation_m * err.translation_m;
    ss_r += err.rotation_deg * err.rotation_deg;
    ++n;
  }
  if (n == 0) throw InsufficientOverlap("verify: annotated camera trajectory does not overlap truth");
  report.camera_traj_trans_rmse_mm = std::sqrt(ss_t / static_cast<double>(n)) * 1000.0;
  report.camera_traj_rot_rmse_deg = std::sqrt(ss_r / static_cast<double>(n));
  report.camera_traj_samples = n;
}

inline Report verify_session(const sim::SessionArtifacts& art) {
  art.config.validate();
  Report report;
  report.method = art.config.method;

  // Tool tip from the pivot sweep.
  const calib::PivotResult pivot = calib::pivot_calibrate(art.pivot_poses);
  report.tip_offset_error_mm = (pivot.tip_offset - art.truth.tip_offset).norm() * 1000.0;
  report.pivot_point_error_mm = (pivot.pivot_point - art.truth.pivot_point).norm() * 1000.0;
  report.pivot_rmse_mm = pivot.rmse * 1000.0;

  // Object poses from tip touches, using the recovered (not true) tip offset.
  annotate::AnnotationParams params;
  params.method = art.config.method;
  for (const auto& session : art.tip_sessions) {
    const auto& object = detail::find_object(art.truth.scene, session.object_id);
    const auto points = annotate::tip_points({session.carrier_poses, pivot.tip_offset});
    const auto annotation =
        annotate::annotate_object(points, object.mesh, session.correspondences, params);
    const auto err = geom::pose_error(annotation.pose, object.pose);
    report.objects.push_back({session.object_id, err.translation_m * 1000.0, err.rotation_deg,
                              annotation.correspondence_rmse * 1000.0,
                              annotation.icp_rmse * 1000.0, annotation.point_count});
  }

  // Hand-eye and the camera trajectory in the base frame.
  if (!art.truth.camera_traj)
    throw EmptyInput("verify: session has no ground-truth camera trajectory");
  calib::HandEyeResult hand_eye;
  const geom::Trajectory* carrier_stream = nullptr;

  if (art.config.method == "tracker") {
    if (!art.observed_carrier || !art.observed_camera)
      throw EmptyInput("verify: tracker session is missing a stream");
    carrier_stream = &*art.observed_carrier;

    // Both distance curves are built at the shared camera-rate grid from the
    // raw streams; with commensurate rates the grids coincide sample for
    // sample, which keeps a zero-noise session exact end to end.
    const double dt = 1.0 / art.config.camera_rate_hz;
    const auto curve_carrier = sync::distance_curve(*art.observed_carrier, dt);
    const auto curve_camera = sync::distance_curve(*art.observed_camera, dt);
    const double window = detail::sync_search_window(*art.observed_carrier);
    const auto offset = sync::estimate_offset_icp(curve_carrier, curve_camera, window);

    report.has_sync = true;
    report.sync_offset_s = offset.offset;
    report.sync_offset_error_ms = std::abs(offset.offset + art.config.time_offset_s) * 1000.0;
    report.sync_residual_mm = offset.residual * 1000.0;
    report.sync_converged = offset.converged;

    const auto aligned_camera = sync::apply_offset(*art.observed_camera, offset.offset);
    hand_eye = calib::handeye_trajectory(aligned_camera, *art.observed_carrier);
  } else {
    if (!art.observed_hand || art.handeye_observations.empty())
      throw EmptyInput("verify: robot session is missing hand-eye data");
    carrier_stream = &*art.observed_hand;
    hand_eye = calib::handeye_closed_form(art.handeye_observations);
  }

  const auto he_err = geom::pose_error(hand_eye.x, art.truth.hand_eye);
  report.handeye_trans_error_mm = he_err.translation_m * 1000.0;
  report.handeye_rot_error_deg = he_err.rotation_deg;
  report.handeye_residual_mm = hand_eye.trans_residual_rmse * 1000.0;

  const auto annotated_camera =
      annotate::annotate_camera_trajectory(*carrier_stream, hand_eye.x);
  compare_camera_trajectory(annotated_camera, *art.truth.camera_traj, report);
  return report;
}

}  // namespace rigkit::verify
