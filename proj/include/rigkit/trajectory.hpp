#pragma once

// Time-stamped pose sequences with fixed parent/child frames. Every sample
// stores the pose of the child in the parent, i.e. the child -> parent
// coordinate mapping (see transform.hpp).

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "rigkit/errors.hpp"
#include "rigkit/transform.hpp"

namespace rigkit::geom {

struct TimedPose {
  double t = 0.0;  // seconds
  RigidTransform pose;
};

class Trajectory {
 public:
  Trajectory(FrameId parent, FrameId child, std::vector<TimedPose> samples)
      : parent_(std::move(parent)), child_(std::move(child)),
        samples_(std::move(samples)) {
    if (parent_.empty() || child_.empty())
      throw Error("Trajectory: empty frame label");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const TimedPose& s = samples_[i];
      if (!std::isfinite(s.t))
        throw TimestampMismatch("Trajectory: non-finite timestamp at sample " +
                                std::to_string(i));
      if (i > 0 && !(samples_[i - 1].t < s.t))
        throw TimestampMismatch(
            "Trajectory: timestamps not strictly increasing at sample " +
            std::to_string(i));
      if (!(s.pose.from_frame() == child_) || !(s.pose.to_frame() == parent_))
        throw FrameMismatch("Trajectory: sample " + std::to_string(i) +
                            " has frames " + s.pose.from_frame().name + " -> " +
                            s.pose.to_frame().name + ", expected " +
                            child_.name + " -> " + parent_.name);
    }
  }

  const FrameId& parent_frame() const { return parent_; }
  const FrameId& child_frame() const { return child_; }
  const std::vector<TimedPose>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  double start_time() const { return samples_.front().t; }
  double end_time() const { return samples_.back().t; }

 private:
  FrameId parent_, child_;
  std::vector<TimedPose> samples_;
};

// Pose at time t: translation linearly interpolated, rotation slerped along
// the shortest arc between the bracketing samples. A query exactly on a
// sample timestamp returns that sample's pose unchanged.
inline RigidTransform interpolate_pose(const Trajectory& traj, double t) {
  if (traj.size() < 2)
    throw TooFewPoses("interpolate_pose: need at least 2 samples, have " +
                      std::to_string(traj.size()));
  const auto& s = traj.samples();
  if (t < s.front().t || t > s.back().t)
    throw OutOfRange("interpolate_pose: t=" + std::to_string(t) +
                     " outside [" + std::to_string(s.front().t) + ", " +
                     std::to_string(s.back().t) + "]");

  const auto it = std::lower_bound(
      s.begin(), s.end(), t,
      [](const TimedPose& a, double v) { return a.t < v; });
  if (it != s.end() && it->t == t) return it->pose;

  const TimedPose& hi = *it;        // it > begin since t >= front and t != hi.t
  const TimedPose& lo = *(it - 1);
  const double u = (t - lo.t) / (hi.t - lo.t);

  const Eigen::Quaterniond q = lo.pose.rotation().slerp(u, hi.pose.rotation());
  const Eigen::Vector3d p =
      (1.0 - u) * lo.pose.translation() + u * hi.pose.translation();
  return RigidTransform(q, p, traj.child_frame(), traj.parent_frame());
}

// Samples of `traj` interpolated at the given (sorted, in-span) times.
inline Trajectory resample(const Trajectory& traj, const std::vector<double>& times) {
  std::vector<TimedPose> out;
  out.reserve(times.size());
  for (double t : times) out.push_back({t, interpolate_pose(traj, t)});
  return Trajectory(traj.parent_frame(), traj.child_frame(), std::move(out));
}

}  // namespace rigkit::geom
