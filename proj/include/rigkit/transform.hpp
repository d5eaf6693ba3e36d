#pragma once

// Frame-labeled SE(3) transforms.
//
// Conventions used throughout the library and all file formats:
//  * Quaternions are Hamilton, scalar-first (w, x, y, z), active rotations,
//    kept unit-norm and canonicalized to w >= 0 after every operation.
//  * A RigidTransform with frames A -> B maps point coordinates expressed in
//    frame A into frame B:  p_B = R * p_A + t.
//  * Tracked poses ("pose of X in Y") are therefore stored with
//    from_frame = X and to_frame = Y, e.g. a marker pose streamed by a
//    tracker is MB -> TB.
// Common frame labels: RB (robot base), EE (end-effector), CB (camera),
// BB (calibration board), TB (tracker base), MB (tracker marker body).

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "rigkit/errors.hpp"

namespace rigkit::geom {

// Coordinate frame label. Frames are data (they come from files), compared by
// exact string equality.
struct FrameId {
  std::string name;

  FrameId() = default;
  FrameId(const char* n) : name(n) {}
  FrameId(std::string n) : name(std::move(n)) {}

  bool operator==(const FrameId&) const = default;
  bool empty() const { return name.empty(); }
};

inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg_to_rad(double deg) {
  return deg * std::numbers::pi / 180.0;
}
inline constexpr double rad_to_deg(double rad) {
  return rad * 180.0 / std::numbers::pi;
}

class RigidTransform {
 public:
  RigidTransform(const Eigen::Quaterniond& rotation,
                 const Eigen::Vector3d& translation, FrameId from, FrameId to)
      : q_(rotation), t_(translation), from_(std::move(from)), to_(std::move(to)) {
    if (from_.empty() || to_.empty())
      throw Error("RigidTransform: empty frame label");
    if (!t_.allFinite() || !q_.coeffs().allFinite())
      throw Error("RigidTransform: non-finite coefficients (" + from_.name +
                  " -> " + to_.name + ")");
    const double n = q_.norm();
    if (n < 1e-12)
      throw Error("RigidTransform: zero quaternion");
    q_.coeffs() /= n;
    canonicalize();
  }

  static RigidTransform identity(const FrameId& frame) {
    return identity(frame, frame);
  }
  static RigidTransform identity(FrameId from, FrameId to) {
    return RigidTransform(Eigen::Quaterniond::Identity(),
                          Eigen::Vector3d::Zero(), std::move(from), std::move(to));
  }
  static RigidTransform from_matrix(const Eigen::Matrix4d& m, FrameId from,
                                    FrameId to) {
    return RigidTransform(Eigen::Quaterniond(Eigen::Matrix3d(m.topLeftCorner<3, 3>())),
                          m.topRightCorner<3, 1>(), std::move(from), std::move(to));
  }

  const Eigen::Quaterniond& rotation() const { return q_; }
  const Eigen::Vector3d& translation() const { return t_; }
  const FrameId& from_frame() const { return from_; }
  const FrameId& to_frame() const { return to_; }

  Eigen::Matrix3d rotation_matrix() const { return q_.toRotationMatrix(); }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation_matrix();
    m.topRightCorner<3, 1>() = t_;
    return m;
  }

  // p_to = R * p_from + t
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return q_ * p + t_; }

 private:
  void canonicalize() {
    if (q_.w() < 0.0) q_.coeffs() = -q_.coeffs();
  }

  Eigen::Quaterniond q_;
  Eigen::Vector3d t_;
  FrameId from_, to_;
};

// compose(a, b): apply b first, then a. Requires a.from_frame == b.to_frame;
// the result maps b.from_frame -> a.to_frame.
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  if (!(a.from_frame() == b.to_frame()))
    throw FrameMismatch("compose: a is " + a.from_frame().name + " -> " +
                        a.to_frame().name + " but b is " + b.from_frame().name +
                        " -> " + b.to_frame().name);
  return RigidTransform(a.rotation() * b.rotation(),
                        a.rotation() * b.translation() + a.translation(),
                        b.from_frame(), a.to_frame());
}

inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return compose(a, b);
}

inline RigidTransform invert(const RigidTransform& t) {
  const Eigen::Quaterniond qi = t.rotation().conjugate();
  return RigidTransform(qi, -(qi * t.translation()), t.to_frame(), t.from_frame());
}

struct PoseError {
  double translation_m = 0.0;
  double rotation_deg = 0.0;
};

// Translation distance and geodesic rotation angle (degrees, in [0, 180])
// between two transforms with identical frame labels.
inline PoseError pose_error(const RigidTransform& a, const RigidTransform& b) {
  if (!(a.from_frame() == b.from_frame()) || !(a.to_frame() == b.to_frame()))
    throw FrameMismatch("pose_error: frames " + a.from_frame().name + " -> " +
                        a.to_frame().name + " vs " + b.from_frame().name +
                        " -> " + b.to_frame().name);
  const Eigen::Quaterniond rel = a.rotation() * b.rotation().conjugate();
  const double angle =
      2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
  return PoseError{(a.translation() - b.translation()).norm(), rad_to_deg(angle)};
}

// Mean translation plus sign-invariant quaternion averaging: the rotation is
// the principal eigenvector of sum_i q_i q_i^T, which is unaffected by the
// q / -q ambiguity of individual inputs.
inline RigidTransform average_transforms(const std::vector<RigidTransform>& ts) {
  if (ts.empty()) throw EmptyInput("average_transforms: no transforms");
  const FrameId& from = ts.front().from_frame();
  const FrameId& to = ts.front().to_frame();

  Eigen::Vector3d t_sum = Eigen::Vector3d::Zero();
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  for (const RigidTransform& t : ts) {
    if (!(t.from_frame() == from) || !(t.to_frame() == to))
      throw FrameMismatch("average_transforms: mixed frames " + from.name +
                          " -> " + to.name + " vs " + t.from_frame().name +
                          " -> " + t.to_frame().name);
    t_sum += t.translation();
    Eigen::Vector4d q(t.rotation().w(), t.rotation().x(), t.rotation().y(),
                      t.rotation().z());
    m += q * q.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(m);
  const Eigen::Vector4d q = eig.eigenvectors().col(3);  // largest eigenvalue
  return RigidTransform(Eigen::Quaterniond(q(0), q(1), q(2), q(3)),
                        t_sum / static_cast<double>(ts.size()), from, to);
}

}  // namespace rigkit::geom
