#include "straw3d/camera.hpp"

#include <cmath>
#include <stdexcept>

namespace straw3d::geom {

CameraIntrinsics make_intrinsics(int width, int height, double hfov_deg, double depth_min,
                                 double depth_max) {
  CameraIntrinsics k;
  k.width = width;
  k.height = height;
  k.fx = (width / 2.0) / std::tan(hfov_deg * M_PI / 180.0 / 2.0);
  k.fy = k.fx;  // square pixels
  k.cx = width / 2.0;
  k.cy = height / 2.0;
  k.depth_min = depth_min;
  k.depth_max = depth_max;
  return k;
}

OrganizedCloud deproject(const DepthImage& depth, const CameraIntrinsics& k) {
  if (depth.width != k.width || depth.height != k.height)
    throw std::invalid_argument("deproject: depth image does not match camera size");
  OrganizedCloud cloud(depth.width, depth.height);
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const size_t i = cloud.idx(u, v);
      const double z = depth.values[i];
      if (z <= 0) continue;
      cloud.points[i] = Eigen::Vector3f(static_cast<float>((u - k.cx) * z / k.fx),
                                        static_cast<float>((v - k.cy) * z / k.fy),
                                        static_cast<float>(z));
      cloud.valid[i] = 1;
    }
  }
  return cloud;
}

}  // namespace straw3d::geom
