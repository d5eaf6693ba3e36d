#pragma once

// Command-line surface. Every subcommand reads documents, runs one library
// operation, and writes documents; all computation lives in the other
// headers. Exit codes: 0 success, 1 domain error (bad data, bad files),
// 2 usage error (unknown flags, missing arguments).

#include <CLI11.hpp>

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "rigkit/annotate.hpp"
#include "rigkit/calib.hpp"
#include "rigkit/errors.hpp"
#include "rigkit/io.hpp"
#include "rigkit/render.hpp"
#include "rigkit/session_io.hpp"
#include "rigkit/sim.hpp"
#include "rigkit/sync.hpp"
#include "rigkit/verify.hpp"

namespace rigkit::cli {

namespace detail {

// Reference to `target` as stored in a document at `document_path`: relative
// to the document's directory when possible.
inline std::string ref_from(const std::filesystem::path& document_path,
                            const std::filesystem::path& target) {
  const auto base = std::filesystem::absolute(document_path).parent_path();
  return std::filesystem::proximate(std::filesystem::absolute(target), base).generic_string();
}

struct AnnotateArgs {
  std::string points, mesh, correspondences, out;
  registration::IcpParams icp;
  double gate_mm = 50.0;
};

inline void run_annotate(const AnnotateArgs& a) {
  annotate::AnnotationParams params;
  params.icp = a.icp;
  params.icp.max_corr_dist = a.gate_mm / 1000.0;
  const auto points = io::read_point_cloud(a.points);
  const auto mesh = io::read_mesh(a.mesh);
  const auto correspondences = io::read_point_cloud(a.correspondences);
  const auto annotation = annotate::annotate_object(points, mesh, correspondences, params);

  io::AnnotationFile file;
  file.objects.push_back({std::filesystem::path(a.mesh).stem().string(),
                          ref_from(a.out, a.mesh), annotation.pose,
                          annotation.correspondence_rmse * 1000.0, annotation.icp_rmse * 1000.0,
                          annotation.point_count, annotation.method});
  io::write_annotation_file(a.out, file);
}

struct BackgroundArgs {
  std::string scan, mesh, init, out;
};

inline void run_background(const BackgroundArgs& a) {
  const auto scan = io::read_point_cloud(a.scan);
  const auto mesh = io::read_mesh(a.mesh);
  const auto init = io::read_transform(a.init);
  const auto annotation = annotate::align_background(scan, mesh, init);

  io::AnnotationFile file;
  file.objects.push_back({std::filesystem::path(a.mesh).stem().string(),
                          ref_from(a.out, a.mesh), annotation.pose,
                          annotation.correspondence_rmse * 1000.0, annotation.icp_rmse * 1000.0,
                          annotation.point_count, annotation.method});
  io::write_annotation_file(a.out, file);
}

struct SyncArgs {
  std::string a, b, out;
  double dt = 0.0;
  double max_offset = 0.0;
  bool oracle = false;
};

inline void run_sync(const SyncArgs& args) {
  const auto traj_a = io::read_trajectory(args.a);
  const auto traj_b = io::read_trajectory(args.b);
  const auto curve_a = sync::distance_curve(traj_a, args.dt);
  const auto curve_b = sync::distance_curve(traj_b, args.dt);
  const auto result = args.oracle
                          ? sync::brute_force_offset(curve_a, curve_b, args.max_offset)
                          : sync::estimate_offset_icp(curve_a, curve_b, args.max_offset);
  io::write_sync_result(args.out, result, args.oracle ? "brute_force" : "icp");
}

struct RenderArgs {
  std::string scene, camera, pose, depth, mask;
};

inline void run_render(const RenderArgs& a) {
  const auto scene = io::read_scene(a.scene);
  const auto camera = io::read_camera(a.camera);
  const auto pose = io::read_transform(a.pose);
  const auto accel = render::build_bvh(scene);
  io::write_depth_pgm(a.depth, render::render_depth(accel, camera, pose));
  io::write_mask_pgm(a.mask, render::render_instance_mask(accel, camera, pose));
}

inline void run_verify(const std::string& session_dir, std::ostream& out) {
  const auto art = io::read_session(session_dir);
  const auto report = verify::verify_session(art);
  io::write_verify_report(std::filesystem::path(session_dir) / "verify_report.json", report);
  out << io::dump_document(io::verify_report_to_json(report));
}

}  // namespace detail

// Parse and execute `args` (program name excluded). Results go to files and
// `out`; diagnostics go to `err`.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dataset annotation toolkit: calibration, synchronization, object and "
               "camera-pose annotation, ground-truth rendering, and a session simulator"};
  app.name("rig-annotate");
  app.require_subcommand(1);

  struct {
    std::string poses, out;
  } pivot;
  auto* pivot_cmd = app.add_subcommand("pivot", "Tool-tip calibration from pivot poses");
  pivot_cmd->add_option("--poses", pivot.poses, "Pose list document")->required();
  pivot_cmd->add_option("--out", pivot.out, "Output pivot result document")->required();
  pivot_cmd->callback([&] {
    io::write_pivot_result(pivot.out, calib::pivot_calibrate(io::read_pose_list(pivot.poses)));
  });

  auto* handeye_cmd = app.add_subcommand("handeye", "Hand-eye calibration");
  handeye_cmd->require_subcommand(1);

  struct {
    std::string observations, out;
  } closed;
  auto* closed_cmd =
      handeye_cmd->add_subcommand("closed", "Closed-form solution from paired stations");
  closed_cmd->add_option("--observations", closed.observations, "Observation document")
      ->required();
  closed_cmd->add_option("--out", closed.out, "Output hand-eye document")->required();
  closed_cmd->callback([&] {
    io::write_handeye_result(
        closed.out, calib::handeye_closed_form(io::read_handeye_observations(closed.observations)));
  });

  struct {
    std::string camera, marker, out;
  } traj;
  auto* traj_cmd =
      handeye_cmd->add_subcommand("traj", "Trajectory alignment of synchronized streams");
  traj_cmd->add_option("--camera", traj.camera, "Camera trajectory document")->required();
  traj_cmd->add_option("--marker", traj.marker, "Marker trajectory document")->required();
  traj_cmd->add_option("--out", traj.out, "Output hand-eye document")->required();
  traj_cmd->callback([&] {
    io::write_handeye_result(traj.out,
                             calib::handeye_trajectory(io::read_trajectory(traj.camera),
                                                       io::read_trajectory(traj.marker)));
  });

  detail::AnnotateArgs annotate_args;
  auto* annotate_cmd =
      app.add_subcommand("annotate", "Object pose from touched points and a mesh");
  annotate_cmd->add_option("--points", annotate_args.points, "Touched points (measurement frame)")
      ->required();
  annotate_cmd->add_option("--mesh", annotate_args.mesh, "Object mesh (PLY)")->required();
  annotate_cmd
      ->add_option("--correspondences", annotate_args.correspondences,
                   "Model-frame contact points, one per touched point")
      ->required();
  annotate_cmd->add_option("--icp-max-iter", annotate_args.icp.max_iterations,
                           "Refinement iteration cap");
  annotate_cmd->add_option("--icp-tol", annotate_args.icp.rel_change_tol,
                           "Relative cost-change stop threshold");
  annotate_cmd->add_option("--gate", annotate_args.gate_mm,
                           "Correspondence distance gate in millimeters");
  annotate_cmd->add_option("--trim", annotate_args.icp.trim_fraction,
                           "Fraction of worst matches dropped per iteration");
  annotate_cmd->add_option("--out", annotate_args.out, "Output annotation document")->required();
  annotate_cmd->callback([&] { detail::run_annotate(annotate_args); });

  detail::BackgroundArgs background_args;
  auto* background_cmd =
      app.add_subcommand("background", "Align a background mesh to a partial scan");
  background_cmd->add_option("--scan", background_args.scan, "Partial scan point cloud")
      ->required();
  background_cmd->add_option("--mesh", background_args.mesh, "Background mesh (PLY)")->required();
  background_cmd->add_option("--init", background_args.init, "Initial mesh-to-scan transform")
      ->required();
  background_cmd->add_option("--out", background_args.out, "Output annotation document")
      ->required();
  background_cmd->callback([&] { detail::run_background(background_args); });

  detail::SyncArgs sync_args;
  auto* sync_cmd = app.add_subcommand("sync", "Clock offset between two trajectory streams");
  sync_cmd->add_option("--a", sync_args.a, "Reference trajectory document")->required();
  sync_cmd->add_option("--b", sync_args.b, "Trajectory whose clock is offset")->required();
  sync_cmd->add_option("--dt", sync_args.dt, "Distance-curve sampling step in seconds")
      ->required();
  sync_cmd->add_option("--max-offset", sync_args.max_offset, "Search bound in seconds")
      ->required();
  sync_cmd->add_flag("--oracle", sync_args.oracle,
                     "Exhaustive grid search instead of the iterative estimator");
  sync_cmd->add_option("--out", sync_args.out, "Output offset document")->required();
  sync_cmd->callback([&] { detail::run_sync(sync_args); });

  struct {
    std::string marker, handeye, out;
  } camtraj;
  auto* camtraj_cmd =
      app.add_subcommand("camtraj", "Camera trajectory from a marker stream and hand-eye");
  camtraj_cmd->add_option("--marker", camtraj.marker, "Marker trajectory document")->required();
  camtraj_cmd->add_option("--handeye", camtraj.handeye, "Hand-eye transform document")
      ->required();
  camtraj_cmd->add_option("--out", camtraj.out, "Output trajectory document")->required();
  camtraj_cmd->callback([&] {
    const auto he = io::read_transform(camtraj.handeye);
    io::write_trajectory(
        camtraj.out, annotate::annotate_camera_trajectory(io::read_trajectory(camtraj.marker), he));
  });

  detail::RenderArgs render_args;
  auto* render_cmd = app.add_subcommand("render", "Ground-truth depth and instance masks");
  render_cmd->add_option("--scene", render_args.scene, "Scene document")->required();
  render_cmd->add_option("--camera", render_args.camera, "Pinhole camera document")->required();
  render_cmd->add_option("--pose", render_args.pose, "Camera pose document")->required();
  render_cmd->add_option("--depth", render_args.depth, "Output depth image (PGM)")->required();
  render_cmd->add_option("--mask", render_args.mask, "Output instance mask (PGM)")->required();
  render_cmd->callback([&] { detail::run_render(render_args); });

  struct {
    std::string config, out;
  } sim_opts;
  auto* sim_cmd = app.add_subcommand("sim", "Generate a synthetic acquisition session");
  sim_cmd->add_option("--config", sim_opts.config, "Session config document")->required();
  sim_cmd->add_option("--out", sim_opts.out, "Output session directory")->required();
  sim_cmd->callback([&] {
    io::write_session(sim_opts.out,
                      sim::simulate_session(io::read_session_config(sim_opts.config)));
  });

  struct {
    std::string stages, out;
  } budget;
  auto* budget_cmd = app.add_subcommand("budget", "Accuracy bounds from per-stage errors");
  budget_cmd->add_option("--stages", budget.stages, "Error stage document")->required();
  budget_cmd->add_option("--out", budget.out, "Output budget document")->required();
  budget_cmd->callback([&] {
    io::write_error_budget(budget.out,
                           annotate::error_budget(io::read_error_stages(budget.stages)));
  });

  struct {
    std::string session;
  } verify_opts;
  auto* verify_cmd =
      app.add_subcommand("verify", "Run the full pipeline on a session, compare to truth");
  verify_cmd->add_option("--session", verify_opts.session, "Session directory")->required();
  verify_cmd->callback([&] { detail::run_verify(verify_opts.session, out); });

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace rigkit::cli
