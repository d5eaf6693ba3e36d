#pragma once

// Shared helpers for the test suites: seeded generators for random rigid
// transforms and point sets, plus small filesystem utilities.

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "rigkit/geom.hpp"

namespace test_support {

using rigkit::geom::FrameId;
using rigkit::geom::RigidTransform;

inline Eigen::Quaterniond random_unit_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q;
}

inline Eigen::Vector3d random_vector(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

inline RigidTransform random_transform(std::mt19937_64& rng,
                                       const FrameId& from = "A",
                                       const FrameId& to = "B",
                                       double trans_scale = 1.0) {
  return RigidTransform(random_unit_quaternion(rng),
                        random_vector(rng, trans_scale), from, to);
}

// Adds zero-mean Gaussian noise: per-axis translation sigma in meters plus a
// left-multiplied rotation about a random axis with the given angle sigma.
inline RigidTransform perturb(std::mt19937_64& rng, const RigidTransform& pose,
                              double sigma_t_axis_m, double sigma_rot_deg) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d axis(n(rng), n(rng), n(rng));
  if (axis.norm() < 1e-12) axis = Eigen::Vector3d::UnitX();
  axis.normalize();
  const double angle = rigkit::geom::deg_to_rad(sigma_rot_deg) * n(rng);
  const Eigen::Quaterniond dq(Eigen::AngleAxisd(angle, axis));
  const Eigen::Vector3d dt(sigma_t_axis_m * n(rng), sigma_t_axis_m * n(rng),
                           sigma_t_axis_m * n(rng));
  return RigidTransform(dq * pose.rotation(), pose.translation() + dt,
                        pose.from_frame(), pose.to_frame());
}

// Rotation of `deg` degrees about z, with optional translation.
inline RigidTransform rot_z(double deg, const Eigen::Vector3d& t,
                            const FrameId& from, const FrameId& to) {
  const Eigen::AngleAxisd aa(rigkit::geom::deg_to_rad(deg),
                             Eigen::Vector3d::UnitZ());
  return RigidTransform(Eigen::Quaterniond(aa), t, from, to);
}

// Unique scratch directory under the system temp dir, removed by the caller
// if desired (tests generally leave cleanup to the OS).
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto p = std::filesystem::temp_directory_path() /
           ("rigkit_test_" + tag + "_" + std::to_string(rng()));
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace test_support
