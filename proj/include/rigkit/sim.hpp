#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rigkit/calib.hpp"
#include "rigkit/errors.hpp"
#include "rigkit/point_cloud.hpp"
#include "rigkit/primitives.hpp"
#include "rigkit/render.hpp"
#include "rigkit/rng.hpp"
#include "rigkit/trajectory.hpp"
#include "rigkit/transform.hpp"

namespace rigkit::sim {

// Pose noise as deviation magnitudes: sigma_t_m is the RMS norm of the
// translation error (so each axis gets sigma_t_m / sqrt(3)), sigma_r_deg the
// RMS geodesic angle of the rotation error.
struct NoiseModel {
  double sigma_t_m = 0.0;
  double sigma_r_deg = 0.0;
};

inline NoiseModel static_tracker_noise() { return {0.67e-3, 0.12}; }
inline NoiseModel dynamic_tracker_noise() { return {0.92e-3, 0.16}; }
inline NoiseModel robot_arm_noise() { return {0.1e-3, 0.0}; }
inline NoiseModel board_detection_noise() { return {0.5e-3, 0.1}; }

inline geom::RigidTransform perturb_pose(Rng& rng, const geom::RigidTransform& pose,
                                         const NoiseModel& noise) {
  if (noise.sigma_t_m == 0.0 && noise.sigma_r_deg == 0.0) return pose;
  const Eigen::Vector3d axis = rng.unit_vector();
  const double angle = geom::deg_to_rad(noise.sigma_r_deg) * rng.normal(1.0);
  const Eigen::Quaterniond dq(Eigen::AngleAxisd(angle, axis));
  const Eigen::Vector3d dt = rng.normal_vector(noise.sigma_t_m / std::sqrt(3.0));
  return geom::RigidTransform(dq * pose.rotation(), pose.translation() + dt,
                              pose.from_frame(), pose.to_frame());
}

struct SessionConfig {
  std::uint64_t seed = 1;
  std::string method = "tracker";  // "tracker" or "robot"
  double duration_s = 20.0;
  double tracker_rate_hz = 60.0;
  double camera_rate_hz = 30.0;
  double time_offset_s = 0.0;  // added to the camera stream's timestamps
  int pivot_pose_count = 30;
  int tip_touch_count = 25;
  int object_count = 3;      // drawn in order from {box, sphere, cylinder}
  int robot_keyframes = 16;  // robot method only
  double noise_scale = 1.0;  // 0 gives a noise-free session

  NoiseModel stream_noise = dynamic_tracker_noise();   // continuous marker stream
  NoiseModel touch_noise = static_tracker_noise();     // pivot and tip touches (tracker)
  NoiseModel camera_noise = board_detection_noise();   // board detections
  NoiseModel robot_noise = robot_arm_noise();          // robot poses and touches

  void validate() const {
    if (method != "tracker" && method != "robot")
      throw InvalidConfig("SessionConfig: method must be 'tracker' or 'robot'");
    if (!(duration_s > 0.0)) throw InvalidConfig("SessionConfig: duration must be positive");
    if (!(tracker_rate_hz > 0.0) || !(camera_rate_hz > 0.0))
      throw InvalidConfig("SessionConfig: rates must be positive");
    if (std::abs(time_offset_s) > 1.8)
      throw InvalidConfig("SessionConfig: |time_offset_s| must be at most 1.8");
    if (pivot_pose_count < 3)
      throw InvalidConfig("SessionConfig: need at least 3 pivot poses");
    if (tip_touch_count < 4)
      throw InvalidConfig("SessionConfig: need at least 4 tip touches");
    if (object_count < 0 || object_count > 3)
      throw InvalidConfig("SessionConfig: object_count must be 0..3 (0 keeps only the table)");
    if (robot_keyframes < 3)
      throw InvalidConfig("SessionConfig: need at least 3 robot keyframes");
    if (!(noise_scale >= 0.0))
      throw InvalidConfig("SessionConfig: noise_scale must be non-negative");
  }

  geom::FrameId base_frame() const { return method == "robot" ? "RB" : "TB"; }
  geom::FrameId carrier_frame() const { return method == "robot" ? "EE" : "MB"; }

  NoiseModel scaled(const NoiseModel& m) const {
    return {m.sigma_t_m * noise_scale, m.sigma_r_deg * noise_scale};
  }
};

struct SessionGroundTruth {
  Eigen::Vector3d tip_offset = Eigen::Vector3d::Zero();   // carrier frame
  Eigen::Vector3d pivot_point = Eigen::Vector3d::Zero();  // base frame
  geom::RigidTransform hand_eye = geom::RigidTransform::identity({"unset"});  // CB -> carrier
  render::Scene scene;  // annotated objects plus the table plane, poses mesh -> base
  std::optional<geom::Trajectory> camera_traj;   // CB -> base, true clock
  std::optional<geom::Trajectory> carrier_traj;  // marker or hand in base, true clock
};

struct TipSession {
  std::string object_id;
  std::vector<geom::RigidTransform> carrier_poses;  // carrier -> base, one per touch
  registration::PointCloud correspondences;         // touched points, mesh frame
};

struct SessionArtifacts {
  SessionConfig config;
  SessionGroundTruth truth;
  std::vector<geom::RigidTransform> pivot_poses;  // noisy carrier -> base
  std::vector<TipSession> tip_sessions;           // one per annotated object
  std::optional<geom::Trajectory> observed_carrier;  // tracker: noisy marker stream
  std::optional<geom::Trajectory> observed_camera;   // tracker: noisy, clock-shifted
  std::optional<geom::Trajectory> observed_hand;     // robot: noisy keyframed hand poses
  std::vector<calib::HandEyeObservation> handeye_observations;  // robot method
};

namespace detail {

// The annotated objects sit on a table plane around the base origin; the
// recording orbit looks at this point.
inline Eigen::Vector3d scene_center() { return {0.0, 0.0, 0.15}; }

inline Eigen::Quaterniond yaw(double angle) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitZ()));
}

// Camera pose looking from `position` toward `target`, x right, y down,
// z forward, with an extra roll about the optical axis.
inline geom::RigidTransform look_at(const Eigen::Vector3d& position,
                                    const Eigen::Vector3d& target, double roll,
                                    const geom::FrameId& camera_frame,
                                    const geom::FrameId& base_frame) {
  const Eigen::Vector3d z = (target - position).normalized();
  Eigen::Vector3d x = z.cross(Eigen::Vector3d::UnitZ());
  if (x.norm() < 1e-9) x = Eigen::Vector3d::UnitX();
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  const Eigen::Quaterniond q =
      Eigen::Quaterniond(r) * Eigen::Quaterniond(Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()));
  return geom::RigidTransform(q, position, camera_frame, base_frame);
}

// Orbit with deliberate speed variation; a constant-rate orbit would make
// the distance curves of the two streams featureless for synchronization.
inline geom::RigidTransform orbit_camera_pose(double tau, const geom::FrameId& camera_frame,
                                              const geom::FrameId& base_frame) {
  const double theta = 0.55 * tau + 0.25 * std::sin(0.8 * tau);
  const double radius = 0.85 + 0.08 * std::sin(0.23 * tau);
  const double height = 0.55 + 0.12 * std::sin(0.37 * tau);
  const Eigen::Vector3d position(radius * std::cos(theta), radius * std::sin(theta), height);
  const double roll = 0.2 * std::sin(0.31 * tau);
  return look_at(position, scene_center(), roll, camera_frame, base_frame);
}

}  // namespace detail

// Ground-truth hand-eye transform. The tracker rig mounts the marker body
// concentric with the camera (pure rotation); the robot rig has the camera
// offset from the flange.
inline geom::RigidTransform ground_truth_hand_eye(const SessionConfig& config) {
  const Eigen::Quaterniond q(
      Eigen::AngleAxisd(geom::deg_to_rad(25.0), Eigen::Vector3d(1.0, 2.0, 3.0).normalized()));
  if (config.method == "robot")
    return geom::RigidTransform(q, {0.03, 0.08, 0.05}, "CB", config.carrier_frame());
  return geom::RigidTransform(q, Eigen::Vector3d::Zero(), "CB", config.carrier_frame());
}

inline Eigen::Vector3d ground_truth_tip_offset() { return {0.010, -0.005, 0.120}; }

// Table plane plus up to three annotated objects resting on it, with a small
// seeded jitter in placement so sessions do not all share one layout.
inline render::Scene generate_scene(Rng& rng, const SessionConfig& config) {
  config.validate();
  const geom::FrameId base = config.base_frame();
  render::Scene scene;

  const struct {
    const char* id;
    Eigen::Vector3d nominal;
    double rest_height;
  } slots[3] = {
      {"box", {0.16, 0.10, 0.0}, 0.025},
      {"sphere", {-0.20, 0.06, 0.0}, 0.04},
      {"cylinder", {0.02, -0.16, 0.0}, 0.04},
  };

  for (int i = 0; i < config.object_count; ++i) {
    const geom::FrameId mesh_frame{std::string(slots[i].id) + "_mesh"};
    registration::TriangleMesh mesh;
    if (i == 0) mesh = primitives::make_box({0.12, 0.08, 0.05}, mesh_frame);
    if (i == 1) mesh = primitives::make_icosphere(0.04, 3, mesh_frame);
    if (i == 2) mesh = primitives::make_cylinder(0.03, 0.08, 48, mesh_frame);

    const Eigen::Vector3d jitter(rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), 0.0);
    const Eigen::Vector3d position =
        slots[i].nominal + jitter + Eigen::Vector3d(0.0, 0.0, slots[i].rest_height);
    scene.objects.push_back({slots[i].id, mesh,
                             geom::RigidTransform(detail::yaw(rng.uniform(0.0, geom::kPi)),
                                                  position, mesh_frame, base)});
  }

  const geom::FrameId table_frame{"table_mesh"};
  scene.objects.push_back({"table", primitives::make_rectangle(1.2, 0.9, table_frame),
                           geom::RigidTransform::identity(table_frame, base)});
  scene.validate();
  return scene;
}

// Carrier poses pivoting about a fixed tip contact: orientations sweep a wide
// cone while the tip stays put, then pose noise is applied.
inline std::vector<geom::RigidTransform> simulate_pivot_session(Rng& rng,
                                                                const SessionConfig& config,
                                                                const Eigen::Vector3d& tip_offset,
                                                                const Eigen::Vector3d& pivot_point) {
  config.validate();
  const NoiseModel noise =
      config.scaled(config.method == "robot" ? config.robot_noise : config.touch_noise);
  std::vector<geom::RigidTransform> poses;
  poses.reserve(static_cast<std::size_t>(config.pivot_pose_count));
  for (int i = 0; i < config.pivot_pose_count; ++i) {
    const double swing = 0.9 * std::sin(2.39996 * i);  // golden-angle sweep
    const double tilt = 0.3 + 0.5 * (i % 5) / 4.0;
    const Eigen::Quaterniond q =
        Eigen::Quaterniond(Eigen::AngleAxisd(swing, Eigen::Vector3d::UnitZ())) *
        Eigen::Quaterniond(Eigen::AngleAxisd(tilt, Eigen::Vector3d::UnitX())) *
        Eigen::Quaterniond(Eigen::AngleAxisd(0.7 * std::cos(1.7 * i), Eigen::Vector3d::UnitY()));
    const geom::RigidTransform pose(q, pivot_point - q * tip_offset,
                                    config.carrier_frame(), config.base_frame());
    poses.push_back(perturb_pose(rng, pose, noise));
  }
  return poses;
}

// Touch points sampled on the object surface; each touch gets a fresh carrier
// orientation whose tip lands on the touched point, then pose noise.
inline TipSession simulate_tip_measurements(Rng& rng, const SessionConfig& config,
                                            const render::SceneObject& object,
                                            const Eigen::Vector3d& tip_offset) {
  config.validate();
  const NoiseModel noise =
      config.scaled(config.method == "robot" ? config.robot_noise : config.touch_noise);
  TipSession session;
  session.object_id = object.object_id;
  session.correspondences = registration::sample_surface(object.mesh, config.tip_touch_count,
                                                         rng.engine());
  session.carrier_poses.reserve(session.correspondences.size());
  for (const auto& local : session.correspondences.points) {
    const Eigen::Vector3d target = object.pose.apply(local);
    Eigen::Quaterniond q(Eigen::AngleAxisd(rng.uniform(0.0, 2.0 * geom::kPi),
                                           rng.unit_vector()));
    const geom::RigidTransform pose(q, target - q * tip_offset, config.carrier_frame(),
                                    config.base_frame());
    session.carrier_poses.push_back(perturb_pose(rng, pose, noise));
  }
  return session;
}

struct Recording {
  geom::Trajectory carrier_true;     // marker in base, true clock
  geom::Trajectory camera_true;      // camera in base, true clock
  geom::Trajectory carrier_observed; // noisy, true clock (tracker reference)
  geom::Trajectory camera_observed;  // noisy, timestamps shifted by time_offset_s
};

// Continuous orbit recording for the tracker method: the marker stream at the
// tracker rate and the board-detection stream at the camera rate, with the
// configured clock offset added to the camera timestamps.
inline Recording simulate_recording(Rng& rng, const SessionConfig& config,
                                    const geom::RigidTransform& hand_eye) {
  config.validate();
  if (!(hand_eye.from_frame() == geom::FrameId{"CB"}) ||
      !(hand_eye.to_frame() == config.carrier_frame()))
    throw FrameMismatch("simulate_recording: hand_eye must map CB -> " +
                        config.carrier_frame().name);
  const geom::FrameId base = config.base_frame();
  const geom::RigidTransform eye_hand = geom::invert(hand_eye);
  const NoiseModel stream_noise = config.scaled(config.stream_noise);
  const NoiseModel camera_noise = config.scaled(config.camera_noise);

  std::vector<geom::TimedPose> carrier_true, carrier_obs;
  const int n_marker =
      static_cast<int>(std::floor(config.duration_s * config.tracker_rate_hz + 1e-9)) + 1;
  for (int k = 0; k < n_marker; ++k) {
    const double tau = k / config.tracker_rate_hz;
    const geom::RigidTransform cam = detail::orbit_camera_pose(tau, "CB", base);
    const geom::RigidTransform marker = geom::compose(cam, eye_hand);
    carrier_true.push_back({tau, marker});
    carrier_obs.push_back({tau, perturb_pose(rng, marker, stream_noise)});
  }

  Rng camera_rng = rng.fork("camera_stream");
  std::vector<geom::TimedPose> camera_true, camera_obs;
  const int n_camera =
      static_cast<int>(std::floor(config.duration_s * config.camera_rate_hz + 1e-9)) + 1;
  for (int j = 0; j < n_camera; ++j) {
    const double tau = j / config.camera_rate_hz;
    const geom::RigidTransform cam = detail::orbit_camera_pose(tau, "CB", base);
    camera_true.push_back({tau, cam});
    camera_obs.push_back({tau + config.time_offset_s, perturb_pose(camera_rng, cam, camera_noise)});
  }

  return Recording{
      geom::Trajectory(base, config.carrier_frame(), std::move(carrier_true)),
      geom::Trajectory(base, "CB", std::move(camera_true)),
      geom::Trajectory(base, config.carrier_frame(), std::move(carrier_obs)),
      geom::Trajectory(base, "CB", std::move(camera_obs)),
  };
}

struct HandEyeSimulation {
  geom::Trajectory hand_true;    // hand in base at the keyframe times
  geom::Trajectory camera_true;  // camera in base at the keyframe times
  geom::Trajectory hand_observed;
  std::vector<calib::HandEyeObservation> observations;
};

// Stop-and-go keyframes for the robot method: at each station the robot pose
// and the camera's board detection are recorded; timestamps carry no jitter
// or offset because robot and camera share a clock.
inline HandEyeSimulation simulate_handeye_observations(Rng& rng, const SessionConfig& config,
                                                       const geom::RigidTransform& hand_eye) {
  config.validate();
  if (!(hand_eye.from_frame() == geom::FrameId{"CB"}) ||
      !(hand_eye.to_frame() == config.carrier_frame()))
    throw FrameMismatch("simulate_handeye_observations: hand_eye must map CB -> " +
                        config.carrier_frame().name);
  const geom::FrameId base = config.base_frame();
  const geom::RigidTransform eye_hand = geom::invert(hand_eye);
  const NoiseModel hand_noise = config.scaled(config.robot_noise);
  const NoiseModel camera_noise = config.scaled(config.camera_noise);

  std::vector<geom::TimedPose> hand_true, camera_true, hand_obs;
  std::vector<calib::HandEyeObservation> observations;
  const double step = config.duration_s / (config.robot_keyframes - 1);
  for (int k = 0; k < config.robot_keyframes; ++k) {
    const double t = k * step;
    const double azimuth = 2.39996 * k;
    const double elevation = geom::deg_to_rad(25.0 + 30.0 * (k % 4) / 3.0);
    const double distance = 0.65 + 0.2 * (k % 3) / 2.0;
    const Eigen::Vector3d position =
        detail::scene_center() + distance * Eigen::Vector3d(std::cos(azimuth) * std::cos(elevation),
                                                            std::sin(azimuth) * std::cos(elevation),
                                                            std::sin(elevation));
    const geom::RigidTransform cam =
        detail::look_at(position, detail::scene_center(), 0.4 * std::sin(2.1 * k), "CB", base);
    const geom::RigidTransform hand = geom::compose(cam, eye_hand);
    const geom::RigidTransform hand_noisy = perturb_pose(rng, hand, hand_noise);
    const geom::RigidTransform cam_noisy = perturb_pose(rng, cam, camera_noise);

    hand_true.push_back({t, hand});
    camera_true.push_back({t, cam});
    hand_obs.push_back({t, hand_noisy});
    observations.push_back({geom::invert(hand_noisy), geom::invert(cam_noisy)});
  }

  return HandEyeSimulation{
      geom::Trajectory(base, config.carrier_frame(), std::move(hand_true)),
      geom::Trajectory(base, "CB", std::move(camera_true)),
      geom::Trajectory(base, config.carrier_frame(), std::move(hand_obs)),
      std::move(observations)};
}

// Full synthetic acquisition: scene, pivot session, per-object tip sessions,
// and either the continuous two-stream recording (tracker) or the keyframed
// hand-eye stations (robot). Deterministic in the config, including the seed.
inline SessionArtifacts simulate_session(const SessionConfig& config) {
  config.validate();
  const Rng root(config.seed);
  SessionArtifacts art;
  art.config = config;

  art.truth.tip_offset = ground_truth_tip_offset();
  art.truth.pivot_point = Eigen::Vector3d(0.25, -0.30, 0.05);
  art.truth.hand_eye = ground_truth_hand_eye(config);

  Rng scene_rng = root.fork("scene");
  art.truth.scene = generate_scene(scene_rng, config);

  Rng pivot_rng = root.fork("pivot");
  art.pivot_poses = simulate_pivot_session(pivot_rng, config, art.truth.tip_offset,
                                           art.truth.pivot_point);

  for (const auto& object : art.truth.scene.objects) {
    if (object.object_id == "table") continue;
    Rng touch_rng = root.fork("touch:" + object.object_id);
    art.tip_sessions.push_back(
        simulate_tip_measurements(touch_rng, config, object, art.truth.tip_offset));
  }

  if (config.method == "tracker") {
    Rng rec_rng = root.fork("recording");
    Recording rec = simulate_recording(rec_rng, config, art.truth.hand_eye);
    art.truth.carrier_traj = std::move(rec.carrier_true);
    art.truth.camera_traj = std::move(rec.camera_true);
    art.observed_carrier = std::move(rec.carrier_observed);
    art.observed_camera = std::move(rec.camera_observed);
  } else {
    Rng he_rng = root.fork("handeye");
    HandEyeSimulation he = simulate_handeye_observations(he_rng, config, art.truth.hand_eye);
    art.truth.carrier_traj = std::move(he.hand_true);
    art.truth.camera_traj = std::move(he.camera_true);
    art.observed_hand = std::move(he.hand_observed);
    art.handeye_observations = std::move(he.observations);
  }
  return art;
}

}  // namespace rigkit::sim
