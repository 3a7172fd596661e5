#include "straw3d/sim/sensor.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace straw3d::sim {

namespace {

using Eigen::Matrix3d;
using Eigen::Vector3d;

struct Hit {
  double t = std::numeric_limits<double>::infinity();  // ray parameter
  Vector3d normal = Vector3d::Zero();                  // world, unnormalized ok
  bool ok = false;
};

constexpr double kTMin = 1e-9;

// Ray r(t) = o + t*d in the primitive's local frame; d need not be unit.
Hit hit_ellipsoid(const Vector3d& o, const Vector3d& d, const Vector3d& radii) {
  const Vector3d q = o.cwiseQuotient(radii);
  const Vector3d w = d.cwiseQuotient(radii);
  const double a = w.squaredNorm();
  const double b = q.dot(w);
  const double c = q.squaredNorm() - 1.0;
  const double disc = b * b - a * c;
  if (disc < 0 || a == 0) return {};
  const double root = std::sqrt(disc);
  double t = (-b - root) / a;
  if (t < kTMin) t = (-b + root) / a;
  if (t < kTMin) return {};
  Hit h;
  h.t = t;
  h.normal = (o + t * d).cwiseQuotient(radii.cwiseProduct(radii));
  h.ok = true;
  return h;
}

Hit hit_plane(const Vector3d& o, const Vector3d& d) {
  if (std::abs(d.z()) < 1e-12) return {};
  const double t = -o.z() / d.z();
  if (t < kTMin) return {};
  return {t, Vector3d::UnitZ(), true};
}

Hit hit_box(const Vector3d& o, const Vector3d& d, const Vector3d& half) {
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  int axis = -1;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-12) {
      if (std::abs(o[a]) > half[a]) return {};
      continue;
    }
    double lo = (-half[a] - o[a]) / d[a];
    double hi = (half[a] - o[a]) / d[a];
    if (lo > hi) std::swap(lo, hi);
    if (lo > t_enter) {
      t_enter = lo;
      axis = a;
    }
    t_exit = std::min(t_exit, hi);
    if (t_enter > t_exit) return {};
  }
  if (axis < 0 || t_enter < kTMin) return {};
  Vector3d n = Vector3d::Zero();
  n[axis] = o[axis] + t_enter * d[axis] > 0 ? 1.0 : -1.0;
  return {t_enter, n, true};
}

Hit hit_cylinder(const Vector3d& o, const Vector3d& d, double radius, double half_len) {
  Hit best;
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a > 1e-18) {
    const double b = o.x() * d.x() + o.y() * d.y();
    const double c = o.x() * o.x() + o.y() * o.y() - radius * radius;
    const double disc = b * b - a * c;
    if (disc >= 0) {
      const double root = std::sqrt(disc);
      for (double t : {(-b - root) / a, (-b + root) / a}) {
        if (t < kTMin || t >= best.t) continue;
        const Vector3d p = o + t * d;
        if (std::abs(p.z()) > half_len) continue;
        best = {t, Vector3d(p.x(), p.y(), 0), true};
        break;
      }
    }
  }
  for (double zcap : {-half_len, half_len}) {  // end disks
    if (std::abs(d.z()) < 1e-12) continue;
    const double t = (zcap - o.z()) / d.z();
    if (t < kTMin || t >= best.t) continue;
    const Vector3d p = o + t * d;
    if (p.x() * p.x() + p.y() * p.y() > radius * radius) continue;
    best = {t, Vector3d(0, 0, zcap > 0 ? 1.0 : -1.0), true};
  }
  return best;
}

Hit intersect(const ScenePrimitive& prim, const Vector3d& o_world,
              const Vector3d& d_world) {
  const Vector3d o = prim.rot.transpose() * (o_world - prim.pos);
  const Vector3d d = prim.rot.transpose() * d_world;
  Hit h;
  switch (prim.kind) {
    case PrimKind::kEllipsoid:
      h = hit_ellipsoid(o, d, prim.size);
      break;
    case PrimKind::kPlane:
      h = hit_plane(o, d);
      break;
    case PrimKind::kBox:
      h = hit_box(o, d, prim.size);
      break;
    case PrimKind::kCylinder:
      h = hit_cylinder(o, d, prim.size[0], prim.size[1]);
      break;
  }
  if (h.ok) h.normal = prim.rot * h.normal;
  return h;
}

}  // namespace

CameraPose row_pose(const Scene& scene, const SceneConfig& config, int frame_index) {
  CameraPose pose;
  // camera x = world x (image right along the row), camera y = -world z
  // (image down), camera z = world y (forward, into the berry curtain)
  pose.rot.col(0) = Vector3d::UnitX();
  pose.rot.col(1) = -Vector3d::UnitZ();
  pose.rot.col(2) = Vector3d::UnitY();
  pose.pos = Vector3d(kRowMargin + 0.2 * frame_index,
                      kBerryFrontY - config.camera_standoff, kCameraHeightZ);
  (void)scene;
  return pose;
}

RenderResult raycast(const Scene& scene, const geom::CameraIntrinsics& k,
                     const CameraPose& pose) {
  if (!k.valid()) throw std::invalid_argument("raycast: invalid camera intrinsics");
  RenderResult out;
  out.depth = geom::DepthImage(k.width, k.height);
  out.labels = LabelImage(k.width, k.height, LabelImage::kInvalid);
  out.normals = geom::NormalMap(k.width, k.height);
  out.color = ColorImage(k.width, k.height);
  out.instance.assign(size_t(k.width) * k.height, -1);

  const Vector3d light = Vector3d(-0.3, -0.5, 0.8).normalized();

  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      // unnormalized direction with unit z: the ray parameter equals the
      // camera-frame z depth, matching deproject() exactly
      const Vector3d dir_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      const Vector3d dir = pose.rot * dir_cam;

      Hit best;
      int best_prim = -1;
      for (size_t i = 0; i < scene.primitives.size(); ++i) {
        const Hit h = intersect(scene.primitives[i], pose.pos, dir);
        if (h.ok && h.t < best.t) {
          best = h;
          best_prim = int(i);
        }
      }
      if (best_prim < 0 || best.t < k.depth_min || best.t > k.depth_max) continue;

      const size_t idx = size_t(v) * k.width + u;
      const auto& prim = scene.primitives[best_prim];
      out.depth.values[idx] = float(best.t);
      out.labels.labels[idx] = prim.label;
      out.instance[idx] = best_prim;

      Vector3d n = best.normal.normalized();
      if (n.dot(dir) > 0) n = -n;  // orient toward the camera
      out.normals.normals[idx] = pose.rot.transpose() * n;
      out.normals.valid[idx] = 1;

      const double shade = 0.25 + 0.75 * std::max(0.0, n.dot(light));
      for (int ch = 0; ch < 3; ++ch)
        out.color.rgb[idx * 3 + ch] =
            uint8_t(std::lround(std::clamp(prim.albedo[ch] * shade, 0.0, 255.0)));
    }
  }
  return out;
}

double reflectance_displacement(double theta, double d, const ReflectanceParams& p) {
  const double angular = 1.0 - (theta + M_PI / 2) / M_PI;
  const double falloff = std::max(0.0, (p.d_max - d) / (p.d_max - p.d_min));
  return p.scale_c * p.delta_v * angular * falloff;
}

geom::DepthImage apply_reflectance(const geom::DepthImage& depth,
                                   const geom::NormalMap& normals,
                                   const geom::CameraIntrinsics& k,
                                   const ReflectanceParams& p) {
  if (depth.width != normals.width || depth.height != normals.height ||
      depth.width != k.width || depth.height != k.height)
    throw std::invalid_argument("apply_reflectance: misaligned inputs");
  if (p.delta_v < 0 || p.scale_c <= 0 || p.d_min >= p.d_max)
    throw std::invalid_argument("apply_reflectance: invalid params");

  geom::DepthImage out = depth;
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const size_t idx = size_t(v) * depth.width + u;
      const double z = depth.values[idx];
      if (z <= 0 || !normals.valid[idx]) continue;
      const Vector3d pt((u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z);
      const double d = pt.norm();
      const double cos_theta =
          std::clamp(normals.normals[idx].dot(-pt / d), 0.0, 1.0);
      const double dp = reflectance_displacement(std::acos(cos_theta), d, p);
      // pull the point toward the camera along its viewing ray
      out.values[idx] = float(std::max(z * (1.0 - dp / d), k.depth_min));
    }
  }
  return out;
}

geom::DepthImage apply_noise(const geom::DepthImage& depth, const NoiseParams& p) {
  if (p.sigma < 0) throw std::invalid_argument("apply_noise: sigma must be >= 0");
  if (p.sigma == 0) return depth;
  geom::DepthImage out = depth;
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> gauss(0.0, p.sigma);
  for (auto& z : out.values) {
    if (z <= 0) continue;
    z = float(std::max(double(z) + gauss(rng), 1e-4));
  }
  return out;
}

}  // namespace straw3d::sim
