#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "rigkit/errors.hpp"
#include "rigkit/trajectory.hpp"

namespace rigkit::sync {

struct CurveSample {
  double t = 0.0;  // seconds
  double d = 0.0;  // meters
};

// Cumulative translational arc length of a trajectory on a uniform time grid.
// Plotting t against d gives the 2D distance graph the offset estimators
// operate on; d is monotone by construction.
struct DistanceCurve {
  std::vector<CurveSample> samples;
  double dt = 0.0;  // seconds, uniform spacing

  void validate() const {
    if (!(dt > 0.0)) throw NonPositiveStep("DistanceCurve: dt must be positive");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].d < 0.0)
        throw Error("DistanceCurve: negative distance at sample " + std::to_string(i));
      if (i > 0) {
        if (std::abs(samples[i].t - samples[i - 1].t - dt) > 1e-9)
          throw TimestampMismatch("DistanceCurve: non-uniform spacing at sample " +
                                  std::to_string(i));
        if (samples[i].d < samples[i - 1].d)
          throw Error("DistanceCurve: distance decreases at sample " + std::to_string(i));
      }
    }
  }
};

struct SyncResult {
  double offset = 0.0;    // seconds; add to stream B timestamps to align with A
  double residual = 0.0;  // meters, curve RMSE after alignment
  int iterations = 0;
  bool converged = true;
};

inline DistanceCurve distance_curve(const geom::Trajectory& traj, double dt) {
  if (traj.size() < 2)
    throw TooFewPoses("distance_curve: need at least 2 samples, have " +
                      std::to_string(traj.size()));
  if (!(dt > 0.0)) throw NonPositiveStep("distance_curve: dt must be positive");

  const double t0 = traj.start_time();
  const double span = traj.end_time() - t0;
  const auto count = static_cast<std::size_t>(std::floor(span / dt + 1e-9)) + 1;

  DistanceCurve curve;
  curve.dt = dt;
  curve.samples.reserve(count);
  Eigen::Vector3d prev = Eigen::Vector3d::Zero();
  double total = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double t = std::min(t0 + static_cast<double>(k) * dt, traj.end_time());
    const Eigen::Vector3d p = geom::interpolate_pose(traj, t).translation();
    if (k > 0) total += (p - prev).norm();
    curve.samples.push_back({t0 + static_cast<double>(k) * dt, total});
    prev = p;
  }
  return curve;
}

// Curve RMSE in d after shifting B's timestamps by `offset`, evaluated by
// linear interpolation of A at B's shifted timestamps. Returns infinity when
// fewer than 2 B samples land inside A's span.
inline double curve_rmse(const DistanceCurve& a, const DistanceCurve& b, double offset) {
  if (a.samples.size() < 2 || b.samples.empty())
    return std::numeric_limits<double>::infinity();
  const double a_start = a.samples.front().t;
  const double a_end = a.samples.back().t;
  double ss = 0.0;
  std::size_t n = 0;
  for (const auto& s : b.samples) {
    const double t = s.t + offset;
    if (t < a_start || t > a_end) continue;
    const auto idx = std::min(
        static_cast<std::size_t>(std::floor((t - a_start) / a.dt)), a.samples.size() - 2);
    const double u = (t - a.samples[idx].t) / a.dt;
    const double da = a.samples[idx].d + u * (a.samples[idx + 1].d - a.samples[idx].d);
    ss += (da - s.d) * (da - s.d);
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::infinity();
  return std::sqrt(ss / static_cast<double>(n));
}

namespace detail {

inline std::size_t overlap_count(const DistanceCurve& a, const DistanceCurve& b,
                                 double offset) {
  std::size_t n = 0;
  for (const auto& s : b.samples) {
    const double t = s.t + offset;
    if (t >= a.samples.front().t && t <= a.samples.back().t) ++n;
  }
  return n;
}

inline void check_pair(const DistanceCurve& a, const DistanceCurve& b, double max_offset) {
  a.validate();
  b.validate();
  if (a.samples.size() < 2 || b.samples.size() < 2)
    throw TooFewPoses("offset estimation: curves need at least 2 samples");
  if (std::abs(a.dt - b.dt) > 1e-9)
    throw TimestampMismatch("offset estimation: curves have different dt (" +
                            std::to_string(a.dt) + " vs " + std::to_string(b.dt) + ")");
  if (!(max_offset > 0.0)) throw OutOfRange("offset estimation: max_offset must be positive");
  const auto shorter = std::min(a.samples.size(), b.samples.size());
  const auto required = static_cast<std::size_t>(
      std::ceil(0.25 * static_cast<double>(shorter)));
  const auto worst = std::min(overlap_count(a, b, -max_offset),
                              overlap_count(a, b, max_offset));
  if (worst < std::max<std::size_t>(required, 2))
    throw InsufficientOverlap(
        "offset estimation: only " + std::to_string(worst) +
        " samples overlap at the search bound, need " +
        std::to_string(std::max<std::size_t>(required, 2)));
}

}  // namespace detail

namespace detail {

// Nearest point on the polyline through `pts` (ordered by x) to query `p`.
// Walks segments outward from the query's x position and prunes once the
// x-axis gap alone exceeds the best distance, which is exact because x is
// non-decreasing along the curve. `clamped` reports that the projection hit
// the very first or last vertex of the whole polyline.
inline double project_on_polyline(const std::vector<Eigen::Vector2d>& pts,
                                  const Eigen::Vector2d& p, double x0, double dx,
                                  bool& clamped) {
  const auto n_seg = static_cast<long>(pts.size()) - 1;
  const auto start = std::clamp<long>(
      static_cast<long>(std::floor((p.x() - x0) / dx)), 0, n_seg - 1);
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_x = pts.front().x();
  clamped = false;

  const auto consider = [&](long j) {
    const Eigen::Vector2d& a0 = pts[static_cast<std::size_t>(j)];
    const Eigen::Vector2d& a1 = pts[static_cast<std::size_t>(j + 1)];
    const Eigen::Vector2d e = a1 - a0;
    const double u = std::clamp(e.dot(p - a0) / e.squaredNorm(), 0.0, 1.0);
    const Eigen::Vector2d proj = a0 + u * e;
    const double d2 = (proj - p).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best_x = proj.x();
      clamped = (j == 0 && u == 0.0) || (j == n_seg - 1 && u == 1.0);
    }
  };

  for (long j = start; j < n_seg; ++j) {
    const double gap = pts[static_cast<std::size_t>(j)].x() - p.x();
    if (gap > 0.0 && gap * gap > best_d2) break;
    consider(j);
  }
  for (long j = start - 1; j >= 0; --j) {
    const double gap = p.x() - pts[static_cast<std::size_t>(j + 1)].x();
    if (gap > 0.0 && gap * gap > best_d2) break;
    consider(j);
  }
  return best_x;
}

}  // namespace detail

// Offset between two distance curves via ICP in the (t, d) plane with the
// translation constrained to the time axis. Each iteration matches every B
// sample to its nearest point on A's polyline and applies the least-squares
// time shift over the matched pairs; matches that clamp to A's first or last
// vertex are discarded so the curve ends do not drag the estimate. For the
// matching metric the d axis is rescaled so the overall curve slope is near
// one, keeping both axes commensurate regardless of units. The result is
// never worse (in residual) than leaving the streams unaligned; if the
// iteration cap is reached the best estimate is returned with
// converged = false.
inline SyncResult estimate_offset_icp(const DistanceCurve& a, const DistanceCurve& b,
                                      double max_offset) {
  detail::check_pair(a, b, max_offset);

  const double t_span = a.samples.back().t - a.samples.front().t;
  const double d_span = std::max(a.samples.back().d, b.samples.back().d);
  const double y_scale = d_span > 0.0 ? t_span / d_span : 1.0;

  std::vector<Eigen::Vector2d> a_points;
  a_points.reserve(a.samples.size());
  for (const auto& s : a.samples) a_points.emplace_back(s.t, s.d * y_scale);

  const double tol = a.dt * 1e-3;
  SyncResult result;
  double s = 0.0;
  bool converged = false;
  int iterations = 0;
  for (int iter = 1; iter <= 100; ++iter) {
    iterations = iter;
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& pb : b.samples) {
      bool clamped = false;
      const double t_match = detail::project_on_polyline(
          a_points, Eigen::Vector2d(pb.t + s, pb.d * y_scale),
          a.samples.front().t, a.dt, clamped);
      if (clamped) continue;
      sum += t_match - (pb.t + s);
      ++n;
    }
    if (n < 2) break;  // everything clamps to the curve ends
    const double delta = sum / static_cast<double>(n);
    s = std::clamp(s + delta, -max_offset, max_offset);
    if (std::abs(delta) < tol) {
      converged = true;
      break;
    }
  }

  result.offset = s;
  result.iterations = iterations;
  result.converged = converged;
  result.residual = curve_rmse(a, b, s);

  const double zero_residual = curve_rmse(a, b, 0.0);
  if (!(result.residual <= zero_residual)) {
    result.offset = 0.0;
    result.residual = zero_residual;
  }
  return result;
}

// Exhaustive search over integer multiples of dt in [-max_offset, max_offset].
// Independent oracle for estimate_offset_icp. Ties prefer the smaller |offset|
// and, between +k and -k, the positive one.
inline SyncResult brute_force_offset(const DistanceCurve& a, const DistanceCurve& b,
                                     double max_offset) {
  detail::check_pair(a, b, max_offset);

  const auto k_max = static_cast<int>(std::floor(max_offset / a.dt + 1e-9));
  SyncResult best;
  best.residual = std::numeric_limits<double>::infinity();
  int evaluated = 0;
  for (int k = 0; k <= k_max; ++k) {
    for (const int sign : {1, -1}) {
      if (k == 0 && sign < 0) continue;
      const double offset = sign * k * a.dt;
      const double r = curve_rmse(a, b, offset);
      ++evaluated;
      if (r < best.residual) {
        best.residual = r;
        best.offset = offset;
      }
    }
  }
  best.iterations = evaluated;
  best.converged = true;
  return best;
}

inline geom::Trajectory apply_offset(const geom::Trajectory& traj, double offset) {
  std::vector<geom::TimedPose> shifted;
  shifted.reserve(traj.size());
  for (const auto& s : traj.samples()) shifted.push_back({s.t + offset, s.pose});
  return {traj.parent_frame(), traj.child_frame(), std::move(shifted)};
}

// Zero-phase moving average over the translation component: sample i becomes
// the mean of positions in a symmetric window that shrinks near the ends, so
// linear motion passes through unchanged. Rotations and timestamps are kept.
// This is the standard pre-filter before distance_curve on noisy streams,
// where raw per-step arc length would inflate with the noise level.
inline geom::Trajectory smooth_positions(const geom::Trajectory& traj, int half_window) {
  if (half_window < 0) throw OutOfRange("smooth_positions: half_window must be >= 0");
  if (half_window == 0 || traj.size() < 3) return traj;
  const auto& s = traj.samples();
  const auto n = static_cast<int>(s.size());
  std::vector<geom::TimedPose> out;
  out.reserve(s.size());
  for (int i = 0; i < n; ++i) {
    const int w = std::min({half_window, i, n - 1 - i});
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (int j = i - w; j <= i + w; ++j)
      mean += s[static_cast<std::size_t>(j)].pose.translation();
    mean /= static_cast<double>(2 * w + 1);
    out.push_back({s[static_cast<std::size_t>(i)].t,
                   geom::RigidTransform(s[static_cast<std::size_t>(i)].pose.rotation(),
                                        mean, traj.child_frame(), traj.parent_frame())});
  }
  return {traj.parent_frame(), traj.child_frame(), std::move(out)};
}

}  // namespace rigkit::sync
