#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "rigkit/errors.hpp"
#include "rigkit/mesh.hpp"
#include "rigkit/threads.hpp"
#include "rigkit/transform.hpp"

namespace rigkit::render {

struct PinholeCamera {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy))
      throw InvalidConfig("camera focal lengths must be positive and finite");
    if (!std::isfinite(cx) || !std::isfinite(cy))
      throw InvalidConfig("camera principal point must be finite");
    if (width <= 0 || height <= 0)
      throw InvalidConfig("camera resolution must be positive");
  }
};

struct SceneObject {
  std::string object_id;
  registration::TriangleMesh mesh;
  geom::RigidTransform pose;  // mesh frame -> scene base frame
};

struct Scene {
  std::vector<SceneObject> objects;

  void validate() const {
    if (objects.empty()) throw EmptyScene("scene has no objects");
    for (const auto& obj : objects) {
      if (obj.object_id.empty()) throw Error("scene object has empty id");
      obj.mesh.validate();
      if (!(obj.pose.from_frame() == obj.mesh.frame))
        throw FrameMismatch("object pose maps from '" + obj.pose.from_frame().name +
                            "' but mesh lives in '" + obj.mesh.frame.name + "'");
      if (!(obj.pose.to_frame() == objects.front().pose.to_frame()))
        throw FrameMismatch("scene objects disagree on base frame");
    }
    for (std::size_t i = 0; i < objects.size(); ++i)
      for (std::size_t j = i + 1; j < objects.size(); ++j)
        if (objects[i].object_id == objects[j].object_id)
          throw Error("duplicate object id '" + objects[i].object_id + "'");
  }

  const geom::FrameId& base_frame() const { return objects.front().pose.to_frame(); }
};

// Depth in meters along the camera z axis; 0.0 marks pixels with no surface.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u]; }
  double& at(int u, int v) { return values[static_cast<std::size_t>(v) * width + u]; }
};

// Instance ids per pixel; 0 is background, i+1 is legend[i].
struct IdMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> values;
  std::vector<std::string> legend;

  std::uint8_t at(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u]; }
  std::uint8_t& at(int u, int v) { return values[static_cast<std::size_t>(v) * width + u]; }
};

namespace detail {

// Moller-Trumbore with inclusive edge acceptance so rays on shared edges hit
// both triangles; the (t, index) tie-break below then picks one consistently.
inline bool intersect_triangle(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                               const Eigen::Vector3d& v0, const Eigen::Vector3d& e1,
                               const Eigen::Vector3d& e2, double& t_out) {
  const Eigen::Vector3d pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < 1e-14) return false;
  const double inv_det = 1.0 / det;
  const Eigen::Vector3d tvec = origin - v0;
  const double u = tvec.dot(pvec) * inv_det;
  if (u < 0.0 || u > 1.0) return false;
  const Eigen::Vector3d qvec = tvec.cross(e1);
  const double v = dir.dot(qvec) * inv_det;
  if (v < 0.0 || u + v > 1.0) return false;
  const double t = e2.dot(qvec) * inv_det;
  if (!(t > 0.0)) return false;
  t_out = t;
  return true;
}

struct RayHit {
  bool hit = false;
  double t = std::numeric_limits<double>::infinity();
  std::uint32_t triangle = 0;
};

// Entry distance of a ray into an axis-aligned box, or +inf on a miss.
// Rays starting inside report 0.
inline double aabb_entry(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
                         const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) {
  double t_near = 0.0;
  double t_far = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    const double o = origin[axis];
    const double d = dir[axis];
    if (d == 0.0) {
      if (o < lo[axis] || o > hi[axis]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double t0 = (lo[axis] - o) / d;
    double t1 = (hi[axis] - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return std::numeric_limits<double>::infinity();
  }
  return t_near;
}

}  // namespace detail

// Bounding volume hierarchy over the scene's triangles in the base frame.
// Triangles keep a global index in scene order so hit results are stable.
struct AccelStructure {
  struct Node {
    Eigen::Vector3d lo = Eigen::Vector3d::Zero();
    Eigen::Vector3d hi = Eigen::Vector3d::Zero();
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;

    bool leaf() const { return left < 0; }
  };

  std::vector<Eigen::Vector3d> v0;
  std::vector<Eigen::Vector3d> e1;
  std::vector<Eigen::Vector3d> e2;
  std::vector<std::uint32_t> object_of_triangle;
  std::vector<std::uint32_t> leaf_triangles;
  std::vector<Node> nodes;
  std::vector<std::string> object_ids;
  geom::FrameId base_frame;

  std::size_t triangle_count() const { return v0.size(); }
};

namespace detail {

inline std::int32_t build_bvh_node(AccelStructure& accel, std::vector<std::uint32_t>& order,
                                   const std::vector<Eigen::Vector3d>& centroids,
                                   std::uint32_t begin, std::uint32_t end) {
  constexpr std::uint32_t kLeafSize = 4;
  AccelStructure::Node node;
  node.lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  node.hi = Eigen::Vector3d::Constant(-std::numeric_limits<double>::infinity());
  Eigen::Vector3d c_lo = node.lo;
  Eigen::Vector3d c_hi = node.hi;
  for (std::uint32_t i = begin; i < end; ++i) {
    const std::uint32_t tri = order[i];
    const Eigen::Vector3d& a = accel.v0[tri];
    const Eigen::Vector3d b = a + accel.e1[tri];
    const Eigen::Vector3d c = a + accel.e2[tri];
    node.lo = node.lo.cwiseMin(a).cwiseMin(b).cwiseMin(c);
    node.hi = node.hi.cwiseMax(a).cwiseMax(b).cwiseMax(c);
    c_lo = c_lo.cwiseMin(centroids[tri]);
    c_hi = c_hi.cwiseMax(centroids[tri]);
  }

  const Eigen::Vector3d extent = c_hi - c_lo;
  int axis = 0;
  extent.maxCoeff(&axis);
  if (end - begin <= kLeafSize || extent[axis] <= 0.0) {
    node.begin = static_cast<std::uint32_t>(accel.leaf_triangles.size());
    for (std::uint32_t i = begin; i < end; ++i) accel.leaf_triangles.push_back(order[i]);
    node.end = static_cast<std::uint32_t>(accel.leaf_triangles.size());
    accel.nodes.push_back(node);
    return static_cast<std::int32_t>(accel.nodes.size() - 1);
  }

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = centroids[a][axis];
                     const double cb = centroids[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });

  const std::int32_t self = static_cast<std::int32_t>(accel.nodes.size());
  accel.nodes.push_back(node);
  const std::int32_t left = build_bvh_node(accel, order, centroids, begin, mid);
  const std::int32_t right = build_bvh_node(accel, order, centroids, mid, end);
  accel.nodes[self].left = left;
  accel.nodes[self].right = right;
  return self;
}

}  // namespace detail

inline AccelStructure build_bvh(const Scene& scene) {
  scene.validate();
  AccelStructure accel;
  accel.base_frame = scene.base_frame();
  for (const auto& obj : scene.objects) {
    const std::uint32_t object_index = static_cast<std::uint32_t>(accel.object_ids.size());
    accel.object_ids.push_back(obj.object_id);
    for (const auto& tri : obj.mesh.triangles) {
      const Eigen::Vector3d a = obj.pose.apply(obj.mesh.vertices[tri[0]]);
      const Eigen::Vector3d b = obj.pose.apply(obj.mesh.vertices[tri[1]]);
      const Eigen::Vector3d c = obj.pose.apply(obj.mesh.vertices[tri[2]]);
      accel.v0.push_back(a);
      accel.e1.push_back(b - a);
      accel.e2.push_back(c - a);
      accel.object_of_triangle.push_back(object_index);
    }
  }
  if (accel.v0.empty()) throw EmptyScene("scene has no triangles");

  const std::uint32_t n = static_cast<std::uint32_t>(accel.v0.size());
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::vector<Eigen::Vector3d> centroids(n);
  for (std::uint32_t i = 0; i < n; ++i)
    centroids[i] = accel.v0[i] + (accel.e1[i] + accel.e2[i]) / 3.0;
  accel.nodes.reserve(2 * static_cast<std::size_t>(n));
  accel.leaf_triangles.reserve(n);
  detail::build_bvh_node(accel, order, centroids, 0, n);
  return accel;
}

namespace detail {

// Closest hit with ties broken toward the lowest global triangle index, which
// makes the result independent of traversal order and equal to a linear scan.
inline RayHit cast_ray(const AccelStructure& accel, const Eigen::Vector3d& origin,
                       const Eigen::Vector3d& dir) {
  RayHit best;
  std::array<std::int32_t, 64> stack;
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const auto& node = accel.nodes[static_cast<std::size_t>(stack[--top])];
    const double entry = aabb_entry(node.lo, node.hi, origin, dir);
    if (entry == std::numeric_limits<double>::infinity() || entry > best.t) continue;
    if (node.leaf()) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t tri = accel.leaf_triangles[i];
        double t = 0.0;
        if (!intersect_triangle(origin, dir, accel.v0[tri], accel.e1[tri], accel.e2[tri], t))
          continue;
        if (t < best.t || (t == best.t && tri < best.triangle)) {
          best.hit = true;
          best.t = t;
          best.triangle = tri;
        }
      }
    } else {
      stack[top++] = node.right;
      stack[top++] = node.left;
    }
  }
  return best;
}

// Reference hit used by tests: same acceptance rule, no acceleration.
inline RayHit cast_ray_exhaustive(const AccelStructure& accel, const Eigen::Vector3d& origin,
                                  const Eigen::Vector3d& dir) {
  RayHit best;
  for (std::uint32_t tri = 0; tri < accel.triangle_count(); ++tri) {
    double t = 0.0;
    if (!intersect_triangle(origin, dir, accel.v0[tri], accel.e1[tri], accel.e2[tri], t)) continue;
    if (t < best.t || (t == best.t && tri < best.triangle)) {
      best.hit = true;
      best.t = t;
      best.triangle = tri;
    }
  }
  return best;
}

struct RenderSetup {
  Eigen::Vector3d origin;
  Eigen::Matrix3d rotation;
};

inline RenderSetup render_setup(const AccelStructure& accel, const PinholeCamera& camera,
                                const geom::RigidTransform& camera_pose) {
  camera.validate();
  if (!(camera_pose.to_frame() == accel.base_frame))
    throw FrameMismatch("camera pose maps to '" + camera_pose.to_frame().name +
                        "' but scene base frame is '" + accel.base_frame.name + "'");
  return {camera_pose.translation(), camera_pose.rotation_matrix()};
}

}  // namespace detail

// Pixel (u, v) looks along ((u + 0.5 - cx) / fx, (v + 0.5 - cy) / fy, 1) in the
// camera frame (x right, y down, z forward). The direction's z component is 1,
// so the ray parameter of a hit is its z depth.
inline DepthMap render_depth(const AccelStructure& accel, const PinholeCamera& camera,
                             const geom::RigidTransform& camera_pose) {
  const auto setup = detail::render_setup(accel, camera, camera_pose);
  DepthMap depth;
  depth.width = camera.width;
  depth.height = camera.height;
  depth.values.assign(static_cast<std::size_t>(camera.width) * camera.height, 0.0);
  threads::parallel_rows(camera.height, [&](int v) {
    for (int u = 0; u < camera.width; ++u) {
      const Eigen::Vector3d dir_cam((u + 0.5 - camera.cx) / camera.fx,
                                    (v + 0.5 - camera.cy) / camera.fy, 1.0);
      const auto hit = detail::cast_ray(accel, setup.origin, setup.rotation * dir_cam);
      if (hit.hit) depth.at(u, v) = hit.t;
    }
  });
  return depth;
}

inline IdMap render_instance_mask(const AccelStructure& accel, const PinholeCamera& camera,
                                  const geom::RigidTransform& camera_pose) {
  if (accel.object_ids.size() > 255)
    throw OutOfRange("instance mask supports at most 255 objects");
  const auto setup = detail::render_setup(accel, camera, camera_pose);
  IdMap mask;
  mask.width = camera.width;
  mask.height = camera.height;
  mask.values.assign(static_cast<std::size_t>(camera.width) * camera.height, 0);
  mask.legend = accel.object_ids;
  threads::parallel_rows(camera.height, [&](int v) {
    for (int u = 0; u < camera.width; ++u) {
      const Eigen::Vector3d dir_cam((u + 0.5 - camera.cx) / camera.fx,
                                    (v + 0.5 - camera.cy) / camera.fy, 1.0);
      const auto hit = detail::cast_ray(accel, setup.origin, setup.rotation * dir_cam);
      if (hit.hit)
        mask.at(u, v) = static_cast<std::uint8_t>(accel.object_of_triangle[hit.triangle] + 1);
    }
  });
  return mask;
}

inline DepthMap render_depth(const Scene& scene, const PinholeCamera& camera,
                             const geom::RigidTransform& camera_pose) {
  return render_depth(build_bvh(scene), camera, camera_pose);
}

inline IdMap render_instance_mask(const Scene& scene, const PinholeCamera& camera,
                                  const geom::RigidTransform& camera_pose) {
  return render_instance_mask(build_bvh(scene), camera, camera_pose);
}

}  // namespace rigkit::render
