#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "rigkit/errors.hpp"
#include "rigkit/mesh.hpp"

namespace rigkit::primitives {

using registration::TriangleMesh;

// Axis-aligned box centered at the origin. `extents` are full side lengths.
inline TriangleMesh make_box(const Eigen::Vector3d& extents, geom::FrameId frame) {
  if (!(extents.minCoeff() > 0.0)) throw OutOfRange("make_box: extents must be positive");
  const double x = 0.5 * extents.x();
  const double y = 0.5 * extents.y();
  const double z = 0.5 * extents.z();
  TriangleMesh mesh;
  mesh.frame = std::move(frame);
  mesh.vertices = {{-x, -y, -z}, {x, -y, -z}, {x, y, -z}, {-x, y, -z},
                   {-x, -y, z},  {x, -y, z},  {x, y, z},  {-x, y, z}};
  mesh.triangles = {{0, 3, 2}, {0, 2, 1},   // bottom
                    {4, 5, 6}, {4, 6, 7},   // top
                    {0, 1, 5}, {0, 5, 4},   // front
                    {2, 3, 7}, {2, 7, 6},   // back
                    {0, 4, 7}, {0, 7, 3},   // left
                    {1, 2, 6}, {1, 6, 5}};  // right
  mesh.validate();
  return mesh;
}

// Rectangle in the z = 0 plane, centered at the origin, normal along +z.
inline TriangleMesh make_rectangle(double size_x, double size_y, geom::FrameId frame) {
  if (!(size_x > 0.0) || !(size_y > 0.0))
    throw OutOfRange("make_rectangle: sizes must be positive");
  const double x = 0.5 * size_x;
  const double y = 0.5 * size_y;
  TriangleMesh mesh;
  mesh.frame = std::move(frame);
  mesh.vertices = {{-x, -y, 0}, {x, -y, 0}, {x, y, 0}, {-x, y, 0}};
  mesh.triangles = {{0, 1, 2}, {0, 2, 3}};
  mesh.validate();
  return mesh;
}

// Icosphere: subdivided icosahedron with vertices projected onto the sphere.
// subdivisions = 0 gives the raw icosahedron (20 triangles); each level
// quadruples the triangle count.
inline TriangleMesh make_icosphere(double radius, int subdivisions, geom::FrameId frame) {
  if (!(radius > 0.0)) throw OutOfRange("make_icosphere: radius must be positive");
  if (subdivisions < 0 || subdivisions > 7)
    throw OutOfRange("make_icosphere: subdivisions must be in [0, 7]");

  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {
      {-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v = v.normalized() * radius;
  std::vector<std::array<std::uint32_t, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
    const auto mid = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      const auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const auto idx = static_cast<std::uint32_t>(verts.size());
      verts.push_back((verts[a] + verts[b]).normalized() * radius);
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<std::uint32_t, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const std::uint32_t ab = mid(f[0], f[1]);
      const std::uint32_t bc = mid(f[1], f[2]);
      const std::uint32_t ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  TriangleMesh mesh;
  mesh.frame = std::move(frame);
  mesh.vertices = std::move(verts);
  mesh.triangles = std::move(faces);
  mesh.validate();
  return mesh;
}

// Closed cylinder along z, centered at the origin, with flat n-gon caps.
inline TriangleMesh make_cylinder(double radius, double height, int segments,
                                  geom::FrameId frame) {
  if (!(radius > 0.0) || !(height > 0.0))
    throw OutOfRange("make_cylinder: radius and height must be positive");
  if (segments < 3) throw OutOfRange("make_cylinder: segments must be at least 3");

  TriangleMesh mesh;
  mesh.frame = std::move(frame);
  const double hz = 0.5 * height;
  const auto n = static_cast<std::uint32_t>(segments);
  for (std::uint32_t i = 0; i < n; ++i) {
    const double a = 2.0 * geom::kPi * static_cast<double>(i) / static_cast<double>(n);
    mesh.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), -hz);
  }
  for (std::uint32_t i = 0; i < n; ++i)
    mesh.vertices.emplace_back(mesh.vertices[i].x(), mesh.vertices[i].y(), hz);
  const std::uint32_t bottom_center = 2 * n;
  const std::uint32_t top_center = 2 * n + 1;
  mesh.vertices.emplace_back(0, 0, -hz);
  mesh.vertices.emplace_back(0, 0, hz);

  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t j = (i + 1) % n;
    mesh.triangles.push_back({i, j, n + j});
    mesh.triangles.push_back({i, n + j, n + i});
    mesh.triangles.push_back({bottom_center, j, i});
    mesh.triangles.push_back({top_center, n + i, n + j});
  }
  mesh.validate();
  return mesh;
}

// Concatenates meshes that share a frame into one mesh.
inline TriangleMesh merge_meshes(const std::vector<TriangleMesh>& parts) {
  if (parts.empty()) throw EmptyInput("merge_meshes: no meshes");
  TriangleMesh out;
  out.frame = parts.front().frame;
  for (const auto& part : parts) {
    if (!(part.frame == out.frame))
      throw FrameMismatch("merge_meshes: mesh in frame " + part.frame.name +
                          " cannot merge into frame " + out.frame.name);
    const auto offset = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), part.vertices.begin(), part.vertices.end());
    for (const auto& tri : part.triangles)
      out.triangles.push_back({tri[0] + offset, tri[1] + offset, tri[2] + offset});
  }
  out.validate();
  return out;
}

}  // namespace rigkit::primitives
