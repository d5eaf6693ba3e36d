#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "rigkit/errors.hpp"
#include "rigkit/point_cloud.hpp"
#include "rigkit/transform.hpp"

namespace rigkit::registration {

// Indexed triangle mesh. Vertex positions are in meters, expressed in `frame`.
// Triangles are triples of vertex indices with counter-clockwise winding for
// outward-facing normals; nothing here depends on winding except normal().
struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  geom::FrameId frame;

  static constexpr double kMinTriangleArea = 1e-12;  // square meters

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t triangle_count() const { return triangles.size(); }

  double triangle_area(std::size_t t) const {
    const auto& tri = triangles[t];
    const Eigen::Vector3d ab = vertices[tri[1]] - vertices[tri[0]];
    const Eigen::Vector3d ac = vertices[tri[2]] - vertices[tri[0]];
    return 0.5 * ab.cross(ac).norm();
  }

  Eigen::Vector3d normal(std::size_t t) const {
    const auto& tri = triangles[t];
    const Eigen::Vector3d ab = vertices[tri[1]] - vertices[tri[0]];
    const Eigen::Vector3d ac = vertices[tri[2]] - vertices[tri[0]];
    return ab.cross(ac).normalized();
  }

  double surface_area() const {
    double a = 0;
    for (std::size_t t = 0; t < triangles.size(); ++t) a += triangle_area(t);
    return a;
  }

  // Throws EmptyMesh if there are no triangles, Error on out-of-range indices,
  // non-finite vertices, or triangles degenerate below kMinTriangleArea.
  void validate() const {
    if (triangles.empty()) throw EmptyMesh("TriangleMesh: no triangles");
    for (std::size_t i = 0; i < vertices.size(); ++i)
      if (!vertices[i].allFinite())
        throw Error("TriangleMesh: non-finite vertex at index " + std::to_string(i));
    for (std::size_t t = 0; t < triangles.size(); ++t) {
      for (int k = 0; k < 3; ++k)
        if (triangles[t][k] >= vertices.size())
          throw Error("TriangleMesh: triangle " + std::to_string(t) +
                      " references vertex " + std::to_string(triangles[t][k]) +
                      " but mesh has " + std::to_string(vertices.size()) +
                      " vertices");
      if (triangle_area(t) <= kMinTriangleArea)
        throw Error("TriangleMesh: triangle " + std::to_string(t) +
                    " is degenerate (area below tolerance)");
    }
  }
};

// Returns the mesh with T applied to every vertex; the mesh frame becomes T's
// target frame.
inline TriangleMesh transform_mesh(const TriangleMesh& mesh,
                                   const geom::RigidTransform& t) {
  if (!(t.from_frame() == mesh.frame))
    throw FrameMismatch("transform_mesh: mesh is in " + mesh.frame.name +
                        " but transform maps from " + t.from_frame().name);
  TriangleMesh out;
  out.frame = t.to_frame();
  out.triangles = mesh.triangles;
  out.vertices.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) out.vertices.push_back(t.apply(v));
  return out;
}

// Closest point on triangle (a, b, c) to p, via the Voronoi-region walk from
// Ericson, Real-Time Collision Detection, section 5.1.5.
inline Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p,
                                                 const Eigen::Vector3d& a,
                                                 const Eigen::Vector3d& b,
                                                 const Eigen::Vector3d& c) {
  const Eigen::Vector3d ab = b - a;
  const Eigen::Vector3d ac = c - a;
  const Eigen::Vector3d ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

  const double denom = 1.0 / (va + vb + vc);
  return a + (vb * denom) * ab + (vc * denom) * ac;
}

struct SurfacePoint {
  Eigen::Vector3d point;
  double distance = 0.0;
  std::size_t triangle = 0;
};

// Exhaustive closest-point query over all triangles. Ties in distance resolve
// to the lowest triangle index.
inline SurfacePoint closest_point_on_mesh(const TriangleMesh& mesh,
                                          const Eigen::Vector3d& query) {
  if (mesh.triangles.empty()) throw EmptyMesh("closest_point_on_mesh: no triangles");
  SurfacePoint best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Eigen::Vector3d cand = closest_point_on_triangle(
        query, mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
    const double d = (cand - query).norm();
    if (d < best.distance) {
      best.point = cand;
      best.distance = d;
      best.triangle = t;
    }
  }
  return best;
}

// Area-weighted uniform sampling of the mesh surface. Returns n points in the
// mesh frame. Deterministic for a given engine state.
template <typename Urbg>
PointCloud sample_surface(const TriangleMesh& mesh, int n, Urbg& rng) {
  if (mesh.triangles.empty()) throw EmptyMesh("sample_surface: no triangles");
  if (n <= 0) throw OutOfRange("sample_surface: n must be positive");
  std::vector<double> cumulative(mesh.triangles.size());
  double total = 0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    total += mesh.triangle_area(t);
    cumulative[t] = total;
  }
  if (total <= 0) throw EmptyMesh("sample_surface: zero surface area");

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PointCloud cloud;
  cloud.frame = mesh.frame;
  cloud.points.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double pick = unit(rng) * total;
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), pick);
    const std::size_t t = std::min<std::size_t>(
        static_cast<std::size_t>(it - cumulative.begin()), mesh.triangles.size() - 1);
    const auto& tri = mesh.triangles[t];
    double u = unit(rng);
    double v = unit(rng);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    cloud.points.push_back(mesh.vertices[tri[0]] +
                           u * (mesh.vertices[tri[1]] - mesh.vertices[tri[0]]) +
                           v * (mesh.vertices[tri[2]] - mesh.vertices[tri[0]]));
  }
  return cloud;
}

}  // namespace rigkit::registration
