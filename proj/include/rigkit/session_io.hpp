#pragma once

// Scene files, simulator configs, and the on-disk session layout. A session
// directory is self-describing: session.json carries the config, the ground
// truth, and relative references to every stream and measurement file, so a
// session can be regenerated, inspected, or verified without other state.

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rigkit/io.hpp"
#include "rigkit/sim.hpp"
#include "rigkit/verify.hpp"

namespace rigkit::io {

// Resolve a reference relative to the file that contains it, failing with the
// referencing file and JSON path when the target is missing.
inline std::filesystem::path resolve_ref(const JsonCursor& ref,
                                         const std::filesystem::path& base_dir) {
  const std::filesystem::path target = base_dir / ref.string();
  if (!std::filesystem::exists(target))
    ref.fail("referenced file '" + ref.string() + "' does not exist");
  return target;
}

// ---------------------------------------------------------------------------
// Scenes. Meshes live in PLY files next to the scene file.

inline void write_scene(const std::filesystem::path& path, const render::Scene& scene) {
  scene.validate();
  const std::filesystem::path dir = path.parent_path();
  json objects = json::array();
  for (const auto& object : scene.objects) {
    const std::string mesh_ref = "meshes/" + object.object_id + ".ply";
    write_mesh(dir / mesh_ref, object.mesh);
    objects.push_back(json{{"object_id", object.object_id},
                           {"mesh_ref", mesh_ref},
                           {"pose", transform_to_json(object.pose)}});
  }
  const json doc{{"type", "scene"},
                 {"base_frame", scene.base_frame().name},
                 {"objects", objects}};
  write_text_file(path, dump_document(doc));
}

inline render::Scene read_scene(const std::filesystem::path& path) {
  const json doc = parse_json_file(path);
  const JsonCursor c(doc, path.string());
  c.expect_type("scene");
  const std::string base = c.key("base_frame").string();
  const std::filesystem::path dir = path.parent_path();
  render::Scene scene;
  const JsonCursor objects = c.key("objects");
  if (objects.array_size() == 0) objects.fail("expected at least one object");
  for (std::size_t i = 0; i < objects.array_size(); ++i) {
    const JsonCursor entry = objects.index(i);
    const geom::RigidTransform pose = transform_from_json(entry.key("pose"));
    if (!(pose.to_frame() == geom::FrameId{base}))
      entry.key("pose").fail("pose must map into the scene base frame '" + base + "'");
    scene.objects.push_back({entry.key("object_id").string(),
                             read_mesh(resolve_ref(entry.key("mesh_ref"), dir)), pose});
  }
  try {
    scene.validate();
  } catch (const Error& e) {
    c.fail(e.what());
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Simulator configs. Every field is optional and defaults to the stock
// session; unknown keys are rejected so typos cannot silently revert a field
// to its default. Noise overrides use millimeters and degrees.

inline json noise_to_json(const sim::NoiseModel& m) {
  return json{{"sigma_t_mm", m.sigma_t_m * 1000.0}, {"sigma_r_deg", m.sigma_r_deg}};
}

inline sim::NoiseModel noise_from_json(const JsonCursor& c) {
  sim::NoiseModel m;
  m.sigma_t_m = c.key("sigma_t_mm").finite_number() / 1000.0;
  m.sigma_r_deg = c.key("sigma_r_deg").finite_number();
  if (m.sigma_t_m < 0.0 || m.sigma_r_deg < 0.0) c.fail("noise sigmas must be non-negative");
  return m;
}

inline json session_config_to_json(const sim::SessionConfig& config) {
  return json{{"seed", config.seed},
              {"method", config.method},
              {"duration_s", config.duration_s},
              {"tracker_rate_hz", config.tracker_rate_hz},
              {"camera_rate_hz", config.camera_rate_hz},
              {"time_offset_s", config.time_offset_s},
              {"pivot_pose_count", config.pivot_pose_count},
              {"tip_touch_count", config.tip_touch_count},
              {"object_count", config.object_count},
              {"robot_keyframes", config.robot_keyframes},
              {"noise_scale", config.noise_scale},
              {"stream_noise", noise_to_json(config.stream_noise)},
              {"touch_noise", noise_to_json(config.touch_noise)},
              {"camera_noise", noise_to_json(config.camera_noise)},
              {"robot_noise", noise_to_json(config.robot_noise)}};
}

inline sim::SessionConfig session_config_from_json(const JsonCursor& c, bool expect_type_tag) {
  static const std::set<std::string> known{
      "type",          "seed",           "method",          "duration_s",
      "tracker_rate_hz", "camera_rate_hz", "time_offset_s", "pivot_pose_count",
      "tip_touch_count", "object_count",  "robot_keyframes", "noise_scale",
      "stream_noise",  "touch_noise",    "camera_noise",    "robot_noise"};
  if (!c.raw().is_object()) c.fail("expected an object");
  for (const auto& item : c.raw().items())
    if (known.find(item.key()) == known.end()) c.fail("unknown key '" + item.key() + "'");
  if (expect_type_tag) c.expect_type("session_config");

  sim::SessionConfig config;
  if (c.has("seed")) config.seed = c.key("seed").non_negative_integer();
  if (c.has("method")) config.method = c.key("method").string();
  if (c.has("duration_s")) config.duration_s = c.key("duration_s").finite_number();
  if (c.has("tracker_rate_hz")) config.tracker_rate_hz = c.key("tracker_rate_hz").finite_number();
  if (c.has("camera_rate_hz")) config.camera_rate_hz = c.key("camera_rate_hz").finite_number();
  if (c.has("time_offset_s")) config.time_offset_s = c.key("time_offset_s").finite_number();
  if (c.has("pivot_pose_count"))
    config.pivot_pose_count = static_cast<int>(c.key("pivot_pose_count").integer());
  if (c.has("tip_touch_count"))
    config.tip_touch_count = static_cast<int>(c.key("tip_touch_count").integer());
  if (c.has("object_count")) config.object_count = static_cast<int>(c.key("object_count").integer());
  if (c.has("robot_keyframes"))
    config.robot_keyframes = static_cast<int>(c.key("robot_keyframes").integer());
  if (c.has("noise_scale")) config.noise_scale = c.key("noise_scale").finite_number();
  if (c.has("stream_noise")) config.stream_noise = noise_from_json(c.key("stream_noise"));
  if (c.has("touch_noise")) config.touch_noise = noise_from_json(c.key("touch_noise"));
  if (c.has("camera_noise")) config.camera_noise = noise_from_json(c.key("camera_noise"));
  if (c.has("robot_noise")) config.robot_noise = noise_from_json(c.key("robot_noise"));
  try {
    config.validate();
  } catch (const Error& e) {
    c.fail(e.what());
  }
  return config;
}

inline void write_session_config(const std::filesystem::path& path,
                                 const sim::SessionConfig& config) {
  config.validate();
  json doc{{"type", "session_config"}};
  doc.update(session_config_to_json(config));
  write_text_file(path, dump_document(doc));
}

inline sim::SessionConfig read_session_config(const std::filesystem::path& path) {
  const json doc = parse_json_file(path);
  return session_config_from_json(JsonCursor(doc, path.string()), true);
}

// ---------------------------------------------------------------------------
// Session directories

inline void write_session(const std::filesystem::path& dir, const sim::SessionArtifacts& art) {
  std::filesystem::create_directories(dir);
  write_scene(dir / "scene.json", art.truth.scene);

  json truth{{"tip_offset",
              {art.truth.tip_offset.x(), art.truth.tip_offset.y(), art.truth.tip_offset.z()}},
             {"pivot_point",
              {art.truth.pivot_point.x(), art.truth.pivot_point.y(), art.truth.pivot_point.z()}},
             {"hand_eye", transform_to_json(art.truth.hand_eye)}};
  if (art.truth.camera_traj) {
    write_trajectory(dir / "truth/camera.json", *art.truth.camera_traj);
    truth["camera_trajectory_ref"] = "truth/camera.json";
  }
  if (art.truth.carrier_traj) {
    write_trajectory(dir / "truth/carrier.json", *art.truth.carrier_traj);
    truth["carrier_trajectory_ref"] = "truth/carrier.json";
  }

  json observed = json::object();
  write_pose_list(dir / "observed/pivot.json", art.pivot_poses);
  observed["pivot_ref"] = "observed/pivot.json";
  json touches = json::array();
  for (const auto& session : art.tip_sessions) {
    const std::string poses_ref = "observed/touch_" + session.object_id + ".json";
    const std::string corr_ref = "observed/corr_" + session.object_id + ".json";
    write_pose_list(dir / poses_ref, session.carrier_poses);
    write_point_cloud(dir / corr_ref, session.correspondences);
    touches.push_back(json{{"object_id", session.object_id},
                           {"poses_ref", poses_ref},
                           {"correspondences_ref", corr_ref}});
  }
  observed["touches"] = touches;
  if (art.observed_carrier) {
    write_trajectory(dir / "observed/marker.json", *art.observed_carrier);
    observed["carrier_stream_ref"] = "observed/marker.json";
  }
  if (art.observed_camera) {
    write_trajectory(dir / "observed/camera.json", *art.observed_camera);
    observed["camera_stream_ref"] = "observed/camera.json";
  }
  if (art.observed_hand) {
    write_trajectory(dir / "observed/hand.json", *art.observed_hand);
    observed["hand_stream_ref"] = "observed/hand.json";
  }
  if (!art.handeye_observations.empty()) {
    write_handeye_observations(dir / "observed/handeye.json", art.handeye_observations);
    observed["handeye_observations_ref"] = "observed/handeye.json";
  }

  const json doc{{"type", "session"},
                 {"config", session_config_to_json(art.config)},
                 {"scene_ref", "scene.json"},
                 {"truth", truth},
                 {"observed", observed}};
  write_text_file(dir / "session.json", dump_document(doc));
}

inline sim::SessionArtifacts read_session(const std::filesystem::path& dir) {
  const std::filesystem::path manifest = dir / "session.json";
  const json doc = parse_json_file(manifest);
  const JsonCursor c(doc, manifest.string());
  c.expect_type("session");

  sim::SessionArtifacts art;
  art.config = session_config_from_json(c.key("config"), false);
  art.truth.scene = read_scene(resolve_ref(c.key("scene_ref"), dir));

  const JsonCursor truth = c.key("truth");
  art.truth.tip_offset = truth.key("tip_offset").vec3();
  art.truth.pivot_point = truth.key("pivot_point").vec3();
  art.truth.hand_eye = transform_from_json(truth.key("hand_eye"));
  if (truth.has("camera_trajectory_ref"))
    art.truth.camera_traj = read_trajectory(resolve_ref(truth.key("camera_trajectory_ref"), dir));
  if (truth.has("carrier_trajectory_ref"))
    art.truth.carrier_traj =
        read_trajectory(resolve_ref(truth.key("carrier_trajectory_ref"), dir));

  const JsonCursor observed = c.key("observed");
  art.pivot_poses = read_pose_list(resolve_ref(observed.key("pivot_ref"), dir));
  const JsonCursor touches = observed.key("touches");
  for (std::size_t i = 0; i < touches.array_size(); ++i) {
    const JsonCursor entry = touches.index(i);
    sim::TipSession session;
    session.object_id = entry.key("object_id").string();
    session.carrier_poses = read_pose_list(resolve_ref(entry.key("poses_ref"), dir));
    session.correspondences =
        read_point_cloud(resolve_ref(entry.key("correspondences_ref"), dir));
    art.tip_sessions.push_back(std::move(session));
  }
  if (observed.has("carrier_stream_ref"))
    art.observed_carrier = read_trajectory(resolve_ref(observed.key("carrier_stream_ref"), dir));
  if (observed.has("camera_stream_ref"))
    art.observed_camera = read_trajectory(resolve_ref(observed.key("camera_stream_ref"), dir));
  if (observed.has("hand_stream_ref"))
    art.observed_hand = read_trajectory(resolve_ref(observed.key("hand_stream_ref"), dir));
  if (observed.has("handeye_observations_ref"))
    art.handeye_observations =
        read_handeye_observations(resolve_ref(observed.key("handeye_observations_ref"), dir));

  if (art.config.method == "tracker" && (!art.observed_carrier || !art.observed_camera))
    c.key("observed").fail("tracker sessions need carrier and camera streams");
  if (art.config.method == "robot" && (!art.observed_hand || art.handeye_observations.empty()))
    c.key("observed").fail("robot sessions need a hand stream and hand-eye observations");
  return art;
}

// ---------------------------------------------------------------------------
// Verification reports (output only)

inline json verify_report_to_json(const verify::Report& r) {
  json doc{{"type", "verify_report"},
           {"method", r.method},
           {"pivot",
            {{"tip_offset_error_mm", r.tip_offset_error_mm},
             {"pivot_point_error_mm", r.pivot_point_error_mm},
             {"rmse_mm", r.pivot_rmse_mm}}}};
  if (r.has_sync)
    doc["sync"] = {{"offset_s", r.sync_offset_s},
                   {"offset_error_ms", r.sync_offset_error_ms},
                   {"residual_mm", r.sync_residual_mm},
                   {"converged", r.sync_converged}};
  doc["hand_eye"] = {{"trans_error_mm", r.handeye_trans_error_mm},
                     {"rot_error_deg", r.handeye_rot_error_deg},
                     {"residual_mm", r.handeye_residual_mm}};
  doc["camera_trajectory"] = {{"trans_rmse_mm", r.camera_traj_trans_rmse_mm},
                              {"rot_rmse_deg", r.camera_traj_rot_rmse_deg},
                              {"compared_samples", r.camera_traj_samples}};
  json objects = json::array();
  for (const auto& o : r.objects)
    objects.push_back(json{{"object_id", o.object_id},
                           {"trans_error_mm", o.trans_error_mm},
                           {"rot_error_deg", o.rot_error_deg},
                           {"correspondence_rmse_mm", o.correspondence_rmse_mm},
                           {"icp_rmse_mm", o.icp_rmse_mm},
                           {"point_count", o.point_count}});
  doc["objects"] = objects;
  doc["worst"] = {{"translation_mm", verify::worst_translation_error_mm(r)},
                  {"rotation_deg", verify::worst_rotation_error_deg(r)}};
  return doc;
}

inline void write_verify_report(const std::filesystem::path& path, const verify::Report& r) {
  write_text_file(path, dump_document(verify_report_to_json(r)));
}

}  // namespace rigkit::io
