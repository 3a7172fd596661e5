#pragma once

#include "straw3d/camera.hpp"
#include "straw3d/image.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace straw3d::io {

// Raw sensor-grid formats, all little-endian, all bit-exact round trips.
//   depth:   magic "ODPC", u32 width, u32 height, u32 reserved=0, f32 per pixel (meters)
//   labels:  magic "OLBL", same header, u8 per pixel (0 background, 1 fruit, 255 invalid)
//   normals: magic "ONRM", same header, 3x f32 per pixel; all-zero = invalid pixel
//   color:   binary PPM (P6), maxval 255
// Parse failures throw std::runtime_error naming the file, the byte offset,
// and expected vs actual sizes.
void write_depth(const std::filesystem::path& path, const geom::DepthImage& depth);
geom::DepthImage read_depth(const std::filesystem::path& path);

void write_labels(const std::filesystem::path& path, const LabelImage& labels);
LabelImage read_labels(const std::filesystem::path& path);

void write_normals(const std::filesystem::path& path, const geom::NormalMap& normals);
geom::NormalMap read_normals(const std::filesystem::path& path);

void write_ppm(const std::filesystem::path& path, const ColorImage& image);
ColorImage read_ppm(const std::filesystem::path& path);

// Corruption settings a frame was rendered with; recorded in the manifest.
struct CorruptionSettings {
  bool reflectance = false;
  double noise_sigma = 0.0;          // meters, 0 = no noise
  double reflectance_scale = 0.07;   // meters, peak displacement scale
  double reflectance_delta_v = 0.2;  // brightness step driving the distortion
};

struct FrameRecord {
  std::string id;
  std::string depth_file;
  std::string label_file;
  std::string color_file;
  std::string normals_file;  // empty until a normals pass has run
  Eigen::Vector3d camera_position = Eigen::Vector3d::Zero();
  Eigen::Matrix3d camera_rotation = Eigen::Matrix3d::Identity();  // camera-to-world
  CorruptionSettings corruption;
};

struct DatasetManifest {
  int version = 1;
  geom::CameraIntrinsics camera;
  std::vector<FrameRecord> frames;
  uint64_t seed = 0;
  double fruit_fraction = 0.0;  // fruit pixels / valid pixels, across all frames

  std::size_t frame_count() const { return frames.size(); }
};

// manifest.json in the dataset directory; written after all frame files.
void save_manifest(const std::filesystem::path& dir, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& dir);

// ASCII point cloud interchange: one vertex per valid pixel with properties
// x y z nx ny nz red green blue label. Pixels that are invalid in the cloud
// (or carry the invalid label when labels are given) are omitted; missing
// normals/color inputs write zeros.
void export_ply(const geom::OrganizedCloud& cloud, const geom::NormalMap* normals,
                const ColorImage* color, const LabelImage* labels,
                const std::filesystem::path& path);

struct PlyCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> normals;           // zero where absent
  std::vector<std::array<uint8_t, 3>> colors;     // zero where absent
  std::vector<uint8_t> labels;                    // zero where absent
};

PlyCloud read_ply(const std::filesystem::path& path);

}  // namespace straw3d::io
