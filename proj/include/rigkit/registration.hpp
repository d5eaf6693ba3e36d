#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "rigkit/errors.hpp"
#include "rigkit/kdtree.hpp"
#include "rigkit/mesh.hpp"
#include "rigkit/point_cloud.hpp"
#include "rigkit/transform.hpp"

namespace rigkit::registration {

// Least-squares rigid fit between paired points (Kabsch). Returns the
// transform T with T.apply(source[i]) ~ destination[i], mapping the source
// frame into the destination frame. Reflections are corrected so the result
// is always a proper rotation.
//
// Throws TooFewPoints for fewer than 3 pairs, Error on length mismatch, and
// DegenerateConfiguration when the pairs do not determine a unique rotation
// (collinear or coincident points).
inline geom::RigidTransform kabsch_fit(const PointCloud& source,
                                       const PointCloud& destination) {
  if (source.size() != destination.size())
    throw Error("kabsch_fit: " + std::to_string(source.size()) + " source vs " +
                std::to_string(destination.size()) + " destination points");
  if (source.size() < 3)
    throw TooFewPoints("kabsch_fit: need at least 3 point pairs, got " +
                       std::to_string(source.size()));

  const auto n = static_cast<double>(source.size());
  Eigen::Vector3d src_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d dst_mean = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    src_mean += source.points[i];
    dst_mean += destination.points[i];
  }
  src_mean /= n;
  dst_mean /= n;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < source.size(); ++i)
    cov += (destination.points[i] - dst_mean) * (source.points[i] - src_mean).transpose();

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (sv(1) <= sv(0) * 1e-12)
    throw DegenerateConfiguration(
        "kabsch_fit: point pairs are collinear or coincident, rotation is not unique");

  Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) flip(2, 2) = -1.0;
  const Eigen::Matrix3d rot = svd.matrixU() * flip * svd.matrixV().transpose();

  return geom::RigidTransform(Eigen::Quaterniond(rot), dst_mean - rot * src_mean,
                              source.frame, destination.frame);
}

struct IcpParams {
  int max_iterations = 50;
  double rel_change_tol = 1e-8;
  double max_corr_dist = 0.05;  // meters, correspondence gate
  double trim_fraction = 0.1;   // fraction of worst matches dropped per iteration

  void validate() const {
    if (max_iterations < 1)
      throw InvalidConfig("IcpParams: max_iterations must be at least 1");
    if (!(rel_change_tol > 0.0))
      throw InvalidConfig("IcpParams: rel_change_tol must be positive");
    if (!(max_corr_dist > 0.0))
      throw InvalidConfig("IcpParams: max_corr_dist must be positive");
    if (!(trim_fraction >= 0.0) || trim_fraction >= 1.0)
      throw InvalidConfig("IcpParams: trim_fraction must be in [0, 1)");
  }
};

struct RegistrationResult {
  geom::RigidTransform transform = geom::RigidTransform::identity({"unset"});
  double rmse = 0.0;       // meters, over the inliers of the final iteration
  int iterations = 0;
  int inlier_count = 0;
  std::vector<double> cost_history;  // rmse after each iteration
};

namespace detail {

// Closest-point callback: fills the surface point for a query, returns the
// distance.
using ClosestFn = std::function<double(const Eigen::Vector3d&, Eigen::Vector3d&)>;

inline RegistrationResult icp_impl(const PointCloud& source,
                                   const ClosestFn& closest,
                                   const geom::FrameId& target_frame,
                                   const geom::RigidTransform& initial,
                                   const IcpParams& params) {
  params.validate();
  if (source.size() < 3)
    throw TooFewPoints("icp: need at least 3 source points, got " +
                       std::to_string(source.size()));
  if (!(initial.from_frame() == source.frame) || !(initial.to_frame() == target_frame))
    throw FrameMismatch("icp: initial transform maps " + initial.from_frame().name +
                        " to " + initial.to_frame().name + " but source is in " +
                        source.frame.name + " and target in " + target_frame.name);

  struct Corr {
    std::size_t src;
    Eigen::Vector3d target;
    double dist;
  };

  RegistrationResult result;
  result.transform = initial;
  double prev_cost = std::numeric_limits<double>::infinity();

  for (int iter = 1; iter <= params.max_iterations; ++iter) {
    std::vector<Corr> corr;
    corr.reserve(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) {
      const Eigen::Vector3d moved = result.transform.apply(source.points[i]);
      Eigen::Vector3d match;
      const double d = closest(moved, match);
      if (d <= params.max_corr_dist) corr.push_back({i, match, d});
    }
    if (corr.empty())
      throw NoCorrespondences("icp: every correspondence exceeds the " +
                              std::to_string(params.max_corr_dist) +
                              " m gate at iteration " + std::to_string(iter));

    const auto keep = corr.size() -
        static_cast<std::size_t>(std::floor(static_cast<double>(corr.size()) *
                                            params.trim_fraction));
    if (keep < 3)
      throw NoCorrespondences("icp: fewer than 3 correspondences left after "
                              "trimming at iteration " + std::to_string(iter));
    if (keep < corr.size()) {
      std::sort(corr.begin(), corr.end(), [](const Corr& a, const Corr& b) {
        return a.dist < b.dist || (a.dist == b.dist && a.src < b.src);
      });
      corr.resize(keep);
    }

    PointCloud src_kept, dst_kept;
    src_kept.frame = source.frame;
    dst_kept.frame = target_frame;
    src_kept.points.reserve(keep);
    dst_kept.points.reserve(keep);
    for (const auto& c : corr) {
      src_kept.points.push_back(source.points[c.src]);
      dst_kept.points.push_back(c.target);
    }
    result.transform = kabsch_fit(src_kept, dst_kept);

    double ss = 0;
    for (const auto& c : corr)
      ss += (result.transform.apply(source.points[c.src]) - c.target).squaredNorm();
    const double cost = std::sqrt(ss / static_cast<double>(keep));

    result.rmse = cost;
    result.iterations = iter;
    result.inlier_count = static_cast<int>(keep);
    result.cost_history.push_back(cost);

    if (cost <= 1e-15) break;
    if (std::isfinite(prev_cost) &&
        std::abs(prev_cost - cost) <= params.rel_change_tol * std::max(prev_cost, 1e-30))
      break;
    prev_cost = cost;
  }
  return result;
}

}  // namespace detail

// Trimmed point-to-point ICP of `source` onto a target cloud. `initial` must
// map the source frame to the target frame; the result stays in those frames.
inline RegistrationResult icp(const PointCloud& source, const PointCloud& target,
                              const geom::RigidTransform& initial,
                              const IcpParams& params = {}) {
  if (target.points.empty()) throw EmptyInput("icp: target cloud is empty");
  const KdTree<3> tree(target.points);
  const auto closest = [&](const Eigen::Vector3d& q, Eigen::Vector3d& match) {
    const auto r = tree.nearest(q);
    match = target.points[r.index];
    return r.distance;
  };
  return detail::icp_impl(source, closest, target.frame, initial, params);
}

// Trimmed point-to-point ICP of `source` onto a mesh surface. Correspondences
// are exact closest points on the surface, not just vertices.
inline RegistrationResult icp(const PointCloud& source, const TriangleMesh& target,
                              const geom::RigidTransform& initial,
                              const IcpParams& params = {}) {
  if (target.triangles.empty()) throw EmptyMesh("icp: target mesh has no triangles");
  const auto closest = [&](const Eigen::Vector3d& q, Eigen::Vector3d& match) {
    const SurfacePoint sp = closest_point_on_mesh(target, q);
    match = sp.point;
    return sp.distance;
  };
  return detail::icp_impl(source, closest, target.frame, initial, params);
}

}  // namespace rigkit::registration
