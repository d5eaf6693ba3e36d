#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rigkit/errors.hpp"
#include "rigkit/transform.hpp"

namespace rigkit::registration {

struct PointCloud {
  std::vector<Eigen::Vector3d> points;  // meters
  geom::FrameId frame;

  std::size_t size() const { return points.size(); }

  void validate() const {
    for (std::size_t i = 0; i < points.size(); ++i)
      if (!points[i].allFinite())
        throw Error("PointCloud: non-finite point at index " + std::to_string(i));
  }
};

// Returns the cloud with T applied to every point; the cloud frame becomes
// T's target frame. T must map from the cloud's frame.
inline PointCloud transform_cloud(const PointCloud& cloud,
                                  const geom::RigidTransform& t) {
  if (!(t.from_frame() == cloud.frame))
    throw FrameMismatch("transform_cloud: cloud is in " + cloud.frame.name +
                        " but transform maps from " + t.from_frame().name);
  PointCloud out;
  out.frame = t.to_frame();
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.points.push_back(t.apply(p));
  return out;
}

}  // namespace rigkit::registration
