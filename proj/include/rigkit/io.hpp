#pragma once

// File formats. Everything structured is JSON with a "type" tag; meshes are
// ASCII PLY; depth and mask images are binary PGM. Writers are deterministic
// (fixed key order, shortest round-trip floats) so identical inputs produce
// identical bytes. Readers name the file and the JSON path or line in every
// diagnostic.
//
// Unit conventions: lengths are meters and time is seconds everywhere except
// fields suffixed _mm, which are human-facing report values in millimeters.

#include <json.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rigkit/annotate.hpp"
#include "rigkit/calib.hpp"
#include "rigkit/errors.hpp"
#include "rigkit/mesh.hpp"
#include "rigkit/point_cloud.hpp"
#include "rigkit/render.hpp"
#include "rigkit/sync.hpp"
#include "rigkit/trajectory.hpp"
#include "rigkit/transform.hpp"

namespace rigkit::io {

using json = nlohmann::ordered_json;

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return buffer.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

inline json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    long line = 1;
    const std::size_t until = std::min<std::size_t>(e.byte, text.size());
    for (std::size_t i = 0; i < until; ++i)
      if (text[i] == '\n') ++line;
    throw ParseError(path.string(), line, std::string("invalid JSON (") + e.what() + ")");
  }
}

// Read-side accessor that tracks the file and JSON path for diagnostics.
class JsonCursor {
 public:
  JsonCursor(const json& node, std::string file, std::string path = "$")
      : node_(&node), file_(std::move(file)), path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(file_, 0, path_ + ": " + what);
  }

  const std::string& file() const { return file_; }
  const json& raw() const { return *node_; }

  bool has(const std::string& key) const { return node_->is_object() && node_->contains(key); }

  JsonCursor key(const std::string& k) const {
    if (!node_->is_object()) fail("expected an object");
    const auto it = node_->find(k);
    if (it == node_->end()) fail("missing key '" + k + "'");
    return JsonCursor(*it, file_, path_ + "." + k);
  }

  std::size_t array_size() const {
    if (!node_->is_array()) fail("expected an array");
    return node_->size();
  }

  JsonCursor index(std::size_t i) const {
    if (!node_->is_array()) fail("expected an array");
    if (i >= node_->size()) fail("index " + std::to_string(i) + " out of range");
    return JsonCursor((*node_)[i], file_, path_ + "[" + std::to_string(i) + "]");
  }

  double number() const {
    if (!node_->is_number()) fail("expected a number");
    return node_->get<double>();
  }

  double finite_number() const {
    const double v = number();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }

  long integer() const {
    if (!node_->is_number_integer()) fail("expected an integer");
    return node_->get<long>();
  }

  std::uint64_t non_negative_integer() const {
    if (!node_->is_number_unsigned() && !(node_->is_number_integer() && node_->get<long>() >= 0))
      fail("expected a non-negative integer");
    return node_->get<std::uint64_t>();
  }

  std::string string() const {
    if (!node_->is_string()) fail("expected a string");
    return node_->get<std::string>();
  }

  bool boolean() const {
    if (!node_->is_boolean()) fail("expected a boolean");
    return node_->get<bool>();
  }

  Eigen::Vector3d vec3() const {
    if (!node_->is_array() || node_->size() != 3) fail("expected an array of 3 numbers");
    return {index(0).finite_number(), index(1).finite_number(), index(2).finite_number()};
  }

  Eigen::Vector4d vec4() const {
    if (!node_->is_array() || node_->size() != 4) fail("expected an array of 4 numbers");
    return {index(0).finite_number(), index(1).finite_number(), index(2).finite_number(),
            index(3).finite_number()};
  }

  void expect_type(const std::string& type) const {
    const std::string got = key("type").string();
    if (got != type) fail("expected type '" + type + "', found '" + got + "'");
  }

 private:
  const json* node_;
  std::string file_;
  std::string path_;
};

inline std::string dump_document(const json& doc) { return doc.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Rigid transforms

inline json transform_to_json(const geom::RigidTransform& t) {
  const auto& q = t.rotation();
  const auto& p = t.translation();
  return json{{"from_frame", t.from_frame().name},
              {"to_frame", t.to_frame().name},
              {"q", {q.w(), q.x(), q.y(), q.z()}},
              {"p", {p.x(), p.y(), p.z()}}};
}

inline geom::RigidTransform transform_from_json(const JsonCursor& c) {
  const std::string from = c.key("from_frame").string();
  const std::string to = c.key("to_frame").string();
  const Eigen::Vector4d q = c.key("q").vec4();
  const Eigen::Vector3d p = c.key("p").vec3();
  try {
    return geom::RigidTransform(Eigen::Quaterniond(q(0), q(1), q(2), q(3)), p, from, to);
  } catch (const Error& e) {
    c.fail(e.what());
  }
}

inline void write_transform(const std::filesystem::path& path, const geom::RigidTransform& t) {
  json doc{{"type", "rigid_transform"}};
  doc.update(transform_to_json(t));
  write_text_file(path, dump_document(doc));
}

inline geom::RigidTransform read_transform(const std::filesystem::path& path) {
  const json doc = parse_json_file(path);
  const JsonCursor c(doc, path.string());
  c.expect_type("rigid_transform");
  return transform_from_json(c);
}

// ---------------------------------------------------------------------------
// Point clouds

inline void write_point_cloud(const std::filesystem::path& path,
                              const registration::PointCloud& cloud) {
  cloud.validate();
  json points = json::array();
  for (const auto& p : cloud.points) points.push_back({p.x(), p.y(), p.z()});
  const json doc{{"type", "point_cloud"}, {"frame", cloud.frame.name}, {"points", points}};
  write_text_file(path, dump_document(doc));
}

inline registration::PointCloud read_point_cloud(const std::filesystem::path& path) {
  const json doc = parse_json_file(path);
  const JsonCursor c(doc, path.string());
  c.expect_type("point_cloud");
  registration::PointCloud cloud;
  cloud.frame = c.key("frame").string();
  if (cloud.frame.empty()) c.key("frame").fail("frame must not be empty");
  const JsonCursor points = c.key("points");
  cloud.points.reserve(points.array_size());
  for (std::size_t i = 0; i < points.array_size(); ++i)
    cloud.points.push_back(points.index(i).vec3());
  return cloud;
}

// ---------------------------------------------------------------------------
// Pose lists (unordered measurement poses, e.g. pivot sweeps or tip touches)

inline void write_pose_list(const std::filesystem::path& path,
                            const std::vector<geom::RigidTransform>& poses) {
  if (poses.empty()) throw EmptyInput("write_pose_list: no poses");
  json list = json::array();
  for (const auto& pose : poses) {
    const auto& q = pose.rotation();
    const auto& p = pose.translation();
    list.push_back(json{{"q", {q.w(), q.x(), q.y(), q.z()}}, {"p", {p.x(), p.y(), p.z()}}});
  }
  const json doc{{"type", "pose_list"},
                 {"from_frame", poses.front().from_frame().name},
                 {"to_frame", poses.front().to_frame().name},
                 {"poses", list}};
  write_text_file(path, dump_document(doc));
}

inline std::vector<geom::RigidTransform> read_pose_list(const std::filesystem::path& path) {
  const json doc = parse_json_file(path);
  const JsonCursor c(doc, path.string());
  c.expect_type("pose_list");
  const std::string from = c.key("from_frame").string();
  const std::string to = c.key("to_frame").string();
  const JsonCursor list = c.key("poses");
  if (list.array_size() == 0) list.fail("expected at least one pose");
  std::vector<geom::RigidTransform> poses;
  poses.reserve(list.array_size());
  for (std::size_t i = 0; i < list.array_size(); ++i) {
    const JsonCursor entry = list.index(i);
    const Eigen::Vector4d q = entry.key("q").vec4();
    const Eigen::Vector3d p = entry.key("p").vec3();
    try {
      poses.emplace_back(Eigen::Quaterniond(q(0), q(1), q(2), q(3)), p, from, to);
    } catch (const Error& e) {
      entry.fail(e.what());
    }
  }
  return poses;
}

// ---------------------------------------------------------------------------
// Trajectories

inline void write_trajectory(const std::filesystem::path& path, const geom::Trajectory& traj) {
  const auto& samples = traj.samples();
  double rate = 0.0;
  if (samples.size() >= 2) {
    const double span = samples.back().t - samples.front().t;
    if (span > 0.0) rate = static_cast<double>(samples.size() - 1) / span;
  }
  json sample_list = json::array();
  for (const auto& s : samples) {
    const auto& q = s.pose.rotation();
    const auto& p = s.pose.translation();
    sample_list.push_back(json{{"t", s.t},
                               {"q", {q.w(), q.x(), q.y(), q.z()}},
                               {"p", {p.x(), p.y(), p.z()}}});
  }
  const json doc{{"type", "trajectory"},
                 {"meta",
                  {{"parent_frame", traj.parent_frame().name},
                   {"child_frame", traj.child_frame().name},
                   {"rate_hz", rate},
                   {"units", "m,s"},
                   {"quat", "wxyz-hamilton"}}},
                 {"samples", sample_list}};
  write_text_file(path, dump_document(doc));
}

inline geom::Trajectory read_trajectory(const std::filesystem::path& path) {
  const json doc = parse_json_file(path);
  const JsonCursor c(doc, path.string());
  c.expect_type("trajectory");
  const JsonCursor meta = c.key("meta");
  const std::string parent = meta.key("parent_frame").string();
  const std::string child = meta.key("child_frame").string();
  if (meta.key("units").string() != "m,s")
    meta.key("units").fail("expected units 'm,s'");
  if (meta.key("quat").string() != "wxyz-hamilton")
    meta.key("quat").fail("expected quaternion convention 'wxyz-hamilton'");

  const JsonCursor list = c.key("samples");
  std::vector<geom::TimedPose> samples;
  samples.reserve(list.array_size());
  for (std::size_t i = 0; i < list.array_size(); ++i) {
    const JsonCursor entry = list.index(i);
    const double t = entry.key("t").finite_number();
    const Eigen::Vector4d q = entry.key("q").vec4();
    const Eigen::Vector3d p = entry.key("p").vec3();
    try {
      samples.push_back(
          {t, geom::RigidTransform(Eigen::Quaterniond(q(0), q(1), q(2), q(3)), p, child, parent)});
    } catch (const Error& e) {
      entry.fail(e.what());
    }
  }
  try {
    return geom::Trajectory(parent, child, std::move(samples));
  } catch (const Error& e) {
    c.key("samples").fail(e.what());
  }
}

// ---------------------------------------------------------------------------
// Calibration results

inline void write_pivot_result(const std::filesystem::path& path, const calib::PivotResult& r) {
  const json doc{{"type", "pivot_result"},
                 {"marker_frame", r.marker_frame.name},
                 {"base_frame", r.base_frame.name},
                 {"tip_offset", {r.tip_offset.x(), r.tip_offset.y(), r.tip_offset.z()}},
                 {"pivot_point", {r.pivot_point.x(), r.pivot_point.y(), r.pivot_point.z()}},
                 {"rmse_mm", r.rmse * 1000.0}};
  write_text_file(path, dump_document(doc));
}

inline calib::PivotResult read_pivot_result(const std::filesystem::path& path) {
  const json doc = parse_json_file(path);
  const JsonCursor c(doc, path.string());
  c.expect_type("pivot_result");
  calib::PivotResult r;
  r.marker_frame = c.key("marker_frame").string();
  r.base_frame = c.key("base_frame").string();
  r.tip_offset = c.key("tip_offset").vec3();
  r.pivot_point = c.key("pivot_point").vec3();
  r.rmse = c.key("rmse_mm").finite_number() / 1000.0;
  if (r.rmse < 0.0) c.key("rmse_mm").fail("rmse must be non-negative");
  return r;
}

inline void write_handeye_result(const std::filesystem::path& path,
                                 const calib::HandEyeResult& r) {
  json doc{{"type", "handeye_result"}};
  doc.update(transform_to_json(r.x));
  doc["trans_residual_rmse_mm"] = r.trans_residual_rmse * 1000.0;
  doc["rot_residual_rmse_deg"] = r.rot_residual_rmse;
  write_text_file(path, dump_document(doc));
}

inline calib::HandEyeResult read_handeye_result(const std::filesystem::path& path) {
  const json doc = parse_json_file(path);
  const JsonCursor c(doc, path.string());
  c.expect_type("handeye_result");
  calib::HandEyeResult r;
  r.x = transform_from_json(c);
  r.trans_residual_rmse = c.key("trans_residual_rmse_mm").finite_number() / 1000.0;
  r.rot_residual_rmse = c.key("rot_residual_rmse_deg").finite_number();
  return r;
}

inline void write_handeye_observations(const std::filesystem::path& path,
                                       const std::vector<calib::HandEyeObservation>& obs) {
  if (obs.empty()) throw EmptyInput("write_handeye_observations: no observations");
  json list = json::array();
  for (const auto& o : obs)
    list.push_back(json{{"base_to_hand", transform_to_json(o.base_to_hand)},
                        {"hand_eye_chain", transform_to_json(o.hand_eye_chain)}});
  const json doc{{"type", "handeye_observations"}, {"observations", list}};
  write_text_file(path, dump_document(doc));
}

inline std::vector<calib::HandEyeObservation> read_handeye_observations(
    const std::filesystem::path& path) {
  const json doc = parse_json_file(path);
  const JsonCursor c(doc, path.string());
  c.expect_type("handeye_observations");
  const JsonCursor list = c.key("observations");
  if (list.array_size() == 0) list.fail("expected at least one observation");
  std::vector<calib::HandEyeObservation> obs;
  obs.reserve(list.array_size());
  for (std::size_t i = 0; i < list.array_size(); ++i) {
    const JsonCursor entry = list.index(i);
    obs.push_back({transform_from_json(entry.key("base_to_hand")),
                   transform_from_json(entry.key("hand_eye_chain"))});
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Synchronization results

inline void write_sync_result(const std::filesystem::path& path, const sync::SyncResult& r,
                              const std::string& method) {
  const json doc{{"type", "sync_result"},
                 {"method", method},
                 {"offset_s", r.offset},
                 {"residual_mm", r.residual * 1000.0},
                 {"iterations", r.iterations},
                 {"converged", r.converged}};
  write_text_file(path, dump_document(doc));
}

inline sync::SyncResult read_sync_result(const std::filesystem::path& path) {
  const json doc = parse_json_file(path);
  const JsonCursor c(doc, path.string());
  c.expect_type("sync_result");
  sync::SyncResult r;
  r.offset = c.key("offset_s").finite_number();
  r.residual = c.key("residual_mm").finite_number() / 1000.0;
  r.iterations = static_cast<int>(c.key("iterations").integer());
  r.converged = c.key("converged").boolean();
  return r;
}

// ---------------------------------------------------------------------------
// Error budgets

inline std::string scope_to_string(annotate::StageScope scope) {
  switch (scope) {
    case annotate::StageScope::kStaticOnly: return "static";
    case annotate::StageScope::kDynamicOnly: return "dynamic";
    default: return "always";
  }
}

inline annotate::StageScope scope_from_string(const JsonCursor& c) {
  const std::string s = c.string();
  if (s == "always") return annotate::StageScope::kAlways;
  if (s == "static") return annotate::StageScope::kStaticOnly;
  if (s == "dynamic") return annotate::StageScope::kDynamicOnly;
  c.fail("expected 'always', 'static', or 'dynamic'");
}

inline json stages_to_json(const std::vector<annotate::ErrorStage>& stages) {
  json list = json::array();
  for (const auto& s : stages)
    list.push_back(json{{"name", s.name},
                        {"trans_rmse_mm", s.trans_rmse * 1000.0},
                        {"rot_rmse_deg", s.rot_rmse_deg},
                        {"lever_arm_m", s.lever_arm},
                        {"scope", scope_to_string(s.scope)}});
  return list;
}

inline std::vector<annotate::ErrorStage> stages_from_json(const JsonCursor& list) {
  std::vector<annotate::ErrorStage> stages;
  stages.reserve(list.array_size());
  for (std::size_t i = 0; i < list.array_size(); ++i) {
    const JsonCursor entry = list.index(i);
    annotate::ErrorStage stage;
    stage.name = entry.key("name").string();
    stage.trans_rmse = entry.key("trans_rmse_mm").finite_number() / 1000.0;
    stage.rot_rmse_deg = entry.key("rot_rmse_deg").finite_number();
    stage.lever_arm = entry.key("lever_arm_m").finite_number();
    stage.scope = scope_from_string(entry.key("scope"));
    stages.push_back(std::move(stage));
  }
  return stages;
}

inline void write_error_stages(const std::filesystem::path& path,
                               const std::vector<annotate::ErrorStage>& stages) {
  if (stages.empty()) throw EmptyInput("write_error_stages: no stages");
  const json doc{{"type", "error_stages"}, {"stages", stages_to_json(stages)}};
  write_text_file(path, dump_document(doc));
}

inline std::vector<annotate::ErrorStage> read_error_stages(const std::filesystem::path& path) {
  const json doc = parse_json_file(path);
  const JsonCursor c(doc, path.string());
  c.expect_type("error_stages");
  const JsonCursor list = c.key("stages");
  if (list.array_size() == 0) list.fail("expected at least one stage");
  return stages_from_json(list);
}

inline json budget_to_json(const annotate::ErrorBudget& budget) {
  return json{{"stages", stages_to_json(budget.stages)},
              {"lower_mm", budget.lower_bound * 1000.0},
              {"upper_mm", budget.upper_bound * 1000.0}};
}

inline annotate::ErrorBudget budget_from_json(const JsonCursor& c) {
  annotate::ErrorBudget budget;
  budget.stages = stages_from_json(c.key("stages"));
  budget.lower_bound = c.key("lower_mm").finite_number() / 1000.0;
  budget.upper_bound = c.key("upper_mm").finite_number() / 1000.0;
  return budget;
}

inline void write_error_budget(const std::filesystem::path& path,
                               const annotate::ErrorBudget& budget) {
  json doc{{"type", "error_budget"}};
  doc.update(budget_to_json(budget));
  write_text_file(path, dump_document(doc));
}

inline annotate::ErrorBudget read_error_budget(const std::filesystem::path& path) {
  const json doc = parse_json_file(path);
  const JsonCursor c(doc, path.string());
  c.expect_type("error_budget");
  return budget_from_json(c);
}

// ---------------------------------------------------------------------------
// Annotations

struct AnnotationFileObject {
  std::string object_id;
  std::string mesh_ref;  // relative to the annotation file
  geom::RigidTransform pose = geom::RigidTransform::identity({"unset"});
  double correspondence_rmse_mm = 0.0;
  double icp_rmse_mm = 0.0;
  std::uint64_t point_count = 0;
  std::string method;
};

struct AnnotationFile {
  std::vector<AnnotationFileObject> objects;
  std::string camera_trajectory_ref;  // empty when absent
  std::optional<annotate::ErrorBudget> error_budget;
};

inline void write_annotation_file(const std::filesystem::path& path, const AnnotationFile& a) {
  json objects = json::array();
  for (const auto& o : a.objects)
    objects.push_back(json{{"object_id", o.object_id},
                           {"mesh_ref", o.mesh_ref},
                           {"pose", transform_to_json(o.pose)},
                           {"correspondence_rmse_mm", o.correspondence_rmse_mm},
                           {"icp_rmse_mm", o.icp_rmse_mm},
                           {"point_count", o.point_count},
                           {"method", o.method}});
  json doc{{"type", "annotation"}, {"objects", objects}};
  if (!a.camera_trajectory_ref.empty()) doc["camera_trajectory_ref"] = a.camera_trajectory_ref;
  if (a.error_budget) doc["error_budget"] = budget_to_json(*a.error_budget);
  write_text_file(path, dump_document(doc));
}

inline AnnotationFile read_annotation_file(const std::filesystem::path& path) {
  const json doc = parse_json_file(path);
  const JsonCursor c(doc, path.string());
  c.expect_type("annotation");
  AnnotationFile a;
  const JsonCursor objects = c.key("objects");
  const std::filesystem::path dir = path.parent_path();
  for (std::size_t i = 0; i < objects.array_size(); ++i) {
    const JsonCursor entry = objects.index(i);
    AnnotationFileObject o;
    o.object_id = entry.key("object_id").string();
    o.mesh_ref = entry.key("mesh_ref").string();
    o.pose = transform_from_json(entry.key("pose"));
    o.correspondence_rmse_mm = entry.key("correspondence_rmse_mm").finite_number();
    o.icp_rmse_mm = entry.key("icp_rmse_mm").finite_number();
    o.point_count = entry.key("point_count").non_negative_integer();
    o.method = entry.key("method").string();
    if (!std::filesystem::exists(dir / o.mesh_ref))
      entry.key("mesh_ref").fail("referenced file '" + o.mesh_ref + "' does not exist");
    a.objects.push_back(std::move(o));
  }
  if (c.has("camera_trajectory_ref")) {
    a.camera_trajectory_ref = c.key("camera_trajectory_ref").string();
    if (!std::filesystem::exists(dir / a.camera_trajectory_ref))
      c.key("camera_trajectory_ref")
          .fail("referenced file '" + a.camera_trajectory_ref + "' does not exist");
  }
  if (c.has("error_budget")) a.error_budget = budget_from_json(c.key("error_budget"));
  return a;
}

// ---------------------------------------------------------------------------
// Cameras

inline void write_camera(const std::filesystem::path& path, const render::PinholeCamera& cam) {
  cam.validate();
  const json doc{{"type", "pinhole_camera"}, {"fx", cam.fx},         {"fy", cam.fy},
                 {"cx", cam.cx},             {"cy", cam.cy},         {"width", cam.width},
                 {"height", cam.height}};
  write_text_file(path, dump_document(doc));
}

inline render::PinholeCamera read_camera(const std::filesystem::path& path) {
  const json doc = parse_json_file(path);
  const JsonCursor c(doc, path.string());
  c.expect_type("pinhole_camera");
  render::PinholeCamera cam;
  cam.fx = c.key("fx").finite_number();
  cam.fy = c.key("fy").finite_number();
  cam.cx = c.key("cx").finite_number();
  cam.cy = c.key("cy").finite_number();
  cam.width = static_cast<int>(c.key("width").integer());
  cam.height = static_cast<int>(c.key("height").integer());
  try {
    cam.validate();
  } catch (const Error& e) {
    c.fail(e.what());
  }
  return cam;
}

// ---------------------------------------------------------------------------
// Meshes: ASCII PLY, triangles only

inline void write_mesh(const std::filesystem::path& path,
                       const registration::TriangleMesh& mesh) {
  mesh.validate();
  std::ostringstream out;
  out << std::setprecision(17);
  out << "ply\n"
      << "format ascii 1.0\n"
      << "comment frame " << mesh.frame.name << "\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\n"
      << "property double y\n"
      << "property double z\n"
      << "element face " << mesh.triangles.size() << "\n"
      << "property list uchar int vertex_indices\n"
      << "end_header\n";
  for (const auto& v : mesh.vertices) out << v.x() << " " << v.y() << " " << v.z() << "\n";
  for (const auto& t : mesh.triangles)
    out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  write_text_file(path, out.str());
}

namespace detail {

struct PlyLineReader {
  std::istringstream stream;
  std::string file;
  std::size_t line_no = 0;

  explicit PlyLineReader(const std::string& text, std::string file_name)
      : stream(text), file(std::move(file_name)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(file, static_cast<long>(line_no), what);
  }

  // Next line with the trailing \r stripped; false at end of input.
  bool next(std::string& out) {
    while (std::getline(stream, out)) {
      ++line_no;
      if (!out.empty() && out.back() == '\r') out.pop_back();
      return true;
    }
    return false;
  }
};

inline std::vector<std::string> split_tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> tokens;
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

inline double parse_double_token(PlyLineReader& r, const std::string& tok) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size() || !std::isfinite(v)) r.fail("invalid number '" + tok + "'");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (...) {
    r.fail("invalid number '" + tok + "'");
  }
}

inline long parse_int_token(PlyLineReader& r, const std::string& tok) {
  try {
    std::size_t used = 0;
    const long v = std::stol(tok, &used);
    if (used != tok.size()) r.fail("invalid integer '" + tok + "'");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (...) {
    r.fail("invalid integer '" + tok + "'");
  }
}

}  // namespace detail

inline registration::TriangleMesh read_mesh(const std::filesystem::path& path) {
  detail::PlyLineReader r(read_text_file(path), path.string());
  std::string line;

  if (!r.next(line) || line != "ply") r.fail("expected 'ply' magic");
  if (!r.next(line) || line != "format ascii 1.0") r.fail("expected 'format ascii 1.0'");

  registration::TriangleMesh mesh;
  mesh.frame = path.stem().string();
  long vertex_count = -1;
  long face_count = -1;
  int vertex_props = 0;
  bool face_list_prop = false;
  std::string current_element;

  const auto is_float_type = [](const std::string& t) {
    return t == "float" || t == "float32" || t == "double" || t == "float64";
  };

  while (true) {
    if (!r.next(line)) r.fail("unexpected end of header");
    const auto tokens = detail::split_tokens(line);
    if (tokens.empty()) r.fail("blank line inside header");
    if (tokens[0] == "comment") {
      if (tokens.size() == 3 && tokens[1] == "frame") mesh.frame = tokens[2];
      continue;
    }
    if (tokens[0] == "end_header") break;
    if (tokens[0] == "element") {
      if (tokens.size() != 3) r.fail("malformed element declaration");
      if (tokens[1] == "vertex") {
        if (vertex_count >= 0) r.fail("duplicate vertex element");
        if (face_count >= 0) r.fail("vertex element must precede face element");
        vertex_count = detail::parse_int_token(r, tokens[2]);
        if (vertex_count < 0) r.fail("negative vertex count");
        current_element = "vertex";
      } else if (tokens[1] == "face") {
        if (face_count >= 0) r.fail("duplicate face element");
        face_count = detail::parse_int_token(r, tokens[2]);
        if (face_count < 0) r.fail("negative face count");
        current_element = "face";
      } else {
        r.fail("unsupported element '" + tokens[1] + "'");
      }
      continue;
    }
    if (tokens[0] == "property") {
      if (current_element == "vertex") {
        if (tokens.size() != 3 || !is_float_type(tokens[1]))
          r.fail("unsupported vertex property");
        const char expected[3] = {'x', 'y', 'z'};
        if (vertex_props >= 3 || tokens[2].size() != 1 ||
            tokens[2][0] != expected[vertex_props])
          r.fail("only x, y, z vertex properties are supported");
        ++vertex_props;
      } else if (current_element == "face") {
        if (tokens.size() != 5 || tokens[1] != "list" ||
            !(tokens[2] == "uchar" || tokens[2] == "uint8") ||
            !(tokens[3] == "int" || tokens[3] == "int32" || tokens[3] == "uint" ||
              tokens[3] == "uint32") ||
            !(tokens[4] == "vertex_indices" || tokens[4] == "vertex_index"))
          r.fail("faces must be a single 'property list uchar int vertex_indices'");
        if (face_list_prop) r.fail("duplicate face property");
        face_list_prop = true;
      } else {
        r.fail("property outside an element");
      }
      continue;
    }
    r.fail("unexpected header line '" + tokens[0] + "'");
  }

  if (vertex_count < 0) r.fail("missing vertex element");
  if (vertex_props != 3) r.fail("vertex element must declare x, y, z");
  if (face_count < 0) r.fail("missing face element");
  if (!face_list_prop) r.fail("face element missing its list property");

  mesh.vertices.reserve(static_cast<std::size_t>(vertex_count));
  for (long i = 0; i < vertex_count; ++i) {
    if (!r.next(line)) r.fail("unexpected end of file in vertex data");
    const auto tokens = detail::split_tokens(line);
    if (tokens.size() != 3)
      r.fail("expected 3 coordinates, found " + std::to_string(tokens.size()));
    mesh.vertices.emplace_back(detail::parse_double_token(r, tokens[0]),
                               detail::parse_double_token(r, tokens[1]),
                               detail::parse_double_token(r, tokens[2]));
  }

  mesh.triangles.reserve(static_cast<std::size_t>(face_count));
  for (long i = 0; i < face_count; ++i) {
    if (!r.next(line)) r.fail("unexpected end of file in face data");
    const auto tokens = detail::split_tokens(line);
    if (tokens.empty()) r.fail("empty face line");
    const long n = detail::parse_int_token(r, tokens[0]);
    if (n != 3)
      r.fail("only triangles are supported, found a face with " + std::to_string(n) +
             " vertices");
    if (tokens.size() != 4) r.fail("face line has extra data");
    std::array<std::uint32_t, 3> tri{};
    for (int k = 0; k < 3; ++k) {
      const long idx = detail::parse_int_token(r, tokens[static_cast<std::size_t>(k) + 1]);
      if (idx < 0 || idx >= vertex_count)
        r.fail("vertex index " + std::to_string(idx) + " out of range");
      tri[static_cast<std::size_t>(k)] = static_cast<std::uint32_t>(idx);
    }
    mesh.triangles.push_back(tri);
  }

  while (r.next(line))
    if (!detail::split_tokens(line).empty()) r.fail("trailing data after face list");

  try {
    mesh.validate();
  } catch (const Error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  return mesh;
}

// ---------------------------------------------------------------------------
// Depth and mask images: binary PGM (P5)

// Depth is stored as 16-bit big-endian millimeters; 0 marks invalid pixels.
inline void write_depth_pgm(const std::filesystem::path& path, const render::DepthMap& depth) {
  if (depth.width <= 0 || depth.height <= 0 ||
      depth.values.size() != static_cast<std::size_t>(depth.width) * depth.height)
    throw Error("write_depth_pgm: inconsistent dimensions");
  std::string out;
  out += "P5\n# depth millimeters\n";
  out += std::to_string(depth.width) + " " + std::to_string(depth.height) + "\n65535\n";
  out.reserve(out.size() + depth.values.size() * 2);
  for (double d : depth.values) {
    std::uint16_t mm = 0;
    if (d > 0.0) {
      const double scaled = std::nearbyint(d * 1000.0);
      mm = static_cast<std::uint16_t>(std::clamp(scaled, 0.0, 65535.0));
    }
    out.push_back(static_cast<char>(mm >> 8));
    out.push_back(static_cast<char>(mm & 0xff));
  }
  write_text_file(path, out);
}

// Instance ids as 8-bit values with the legend in header comments.
inline void write_mask_pgm(const std::filesystem::path& path, const render::IdMap& mask) {
  if (mask.width <= 0 || mask.height <= 0 ||
      mask.values.size() != static_cast<std::size_t>(mask.width) * mask.height)
    throw Error("write_mask_pgm: inconsistent dimensions");
  std::string out;
  out += "P5\n# instance ids, 0 background\n";
  for (std::size_t i = 0; i < mask.legend.size(); ++i)
    out += "# id " + std::to_string(i + 1) + " " + mask.legend[i] + "\n";
  out += std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(mask.values.data()), mask.values.size());
  write_text_file(path, out);
}

namespace detail {

struct PgmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<std::string> comments;
  std::size_t data_offset = 0;
};

inline PgmHeader parse_pgm_header(const std::string& text, const std::string& file) {
  PgmHeader h;
  std::size_t pos = 0;
  const auto fail = [&](const std::string& what) -> void {
    throw ParseError(file, 0, what);
  };
  const auto next_token = [&]() -> std::string {
    while (pos < text.size()) {
      if (std::isspace(static_cast<unsigned char>(text[pos]))) {
        ++pos;
      } else if (text[pos] == '#') {
        const std::size_t eol = text.find('\n', pos);
        h.comments.push_back(text.substr(pos, eol == std::string::npos ? std::string::npos
                                                                       : eol - pos));
        if (eol == std::string::npos) fail("unterminated comment");
        pos = eol + 1;
      } else {
        const std::size_t start = pos;
        while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
               text[pos] != '#')
          ++pos;
        return text.substr(start, pos - start);
      }
    }
    fail("unexpected end of file in header");
    return "";
  };

  if (next_token() != "P5") fail("expected P5 magic");
  try {
    h.width = std::stoi(next_token());
    h.height = std::stoi(next_token());
    h.maxval = std::stoi(next_token());
  } catch (const ParseError&) {
    throw;
  } catch (...) {
    fail("malformed header number");
  }
  if (h.width <= 0 || h.height <= 0) fail("image dimensions must be positive");
  if (pos >= text.size() || !std::isspace(static_cast<unsigned char>(text[pos])))
    fail("missing whitespace after maxval");
  h.data_offset = pos + 1;
  return h;
}

}  // namespace detail

inline render::DepthMap read_depth_pgm(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  const auto h = detail::parse_pgm_header(text, path.string());
  if (h.maxval != 65535)
    throw ParseError(path.string(), 0, "depth images must have maxval 65535");
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  if (text.size() - h.data_offset != n * 2)
    throw ParseError(path.string(), 0,
                     "expected " + std::to_string(n * 2) + " data bytes, found " +
                         std::to_string(text.size() - h.data_offset));
  render::DepthMap depth;
  depth.width = h.width;
  depth.height = h.height;
  depth.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto hi = static_cast<unsigned char>(text[h.data_offset + 2 * i]);
    const auto lo = static_cast<unsigned char>(text[h.data_offset + 2 * i + 1]);
    depth.values[i] = static_cast<double>((hi << 8) | lo) / 1000.0;
  }
  return depth;
}

inline render::IdMap read_mask_pgm(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  const auto h = detail::parse_pgm_header(text, path.string());
  if (h.maxval != 255)
    throw ParseError(path.string(), 0, "mask images must have maxval 255");
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  if (text.size() - h.data_offset != n)
    throw ParseError(path.string(), 0,
                     "expected " + std::to_string(n) + " data bytes, found " +
                         std::to_string(text.size() - h.data_offset));
  render::IdMap mask;
  mask.width = h.width;
  mask.height = h.height;
  mask.values.assign(text.begin() + static_cast<std::ptrdiff_t>(h.data_offset), text.end());

  for (const auto& comment : h.comments) {
    std::istringstream in(comment);
    std::string hash, tag;
    std::size_t id = 0;
    std::string name;
    if (in >> hash >> tag && tag == "id" && in >> id >> name) {
      if (id != mask.legend.size() + 1)
        throw ParseError(path.string(), 0, "legend ids must be contiguous from 1");
      mask.legend.push_back(name);
    }
  }
  return mask;
}

}  // namespace rigkit::io
