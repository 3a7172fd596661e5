#pragma once

#include "straw3d/formats.hpp"
#include "straw3d/sim/sensor.hpp"

#include <filesystem>

namespace straw3d::sim {

struct DatasetParams {
  int frames = 1;
  bool reflectance = false;
  ReflectanceParams reflectance_params;
  double noise_sigma = 0.005;  // meters; 0 disables noise
  uint64_t seed = 0;
};

// Renders `frames` poses stepping 20 cm along the row and writes per-frame
// depth/labels/color/normals files plus manifest.json. The normals files
// hold window-5 integral-image estimates from the corrupted cloud — what a
// real pipeline would compute from the delivered depth. A zero
// config.row_length is derived from the frame count; an explicit one that
// is too short for the path is rejected. config.berry_count 0 scales with
// the row. The whole run is deterministic in `params.seed`.
io::DatasetManifest generate_dataset(const SceneConfig& config,
                                     const geom::CameraIntrinsics& k,
                                     const DatasetParams& params,
                                     const std::filesystem::path& out_dir);

}  // namespace straw3d::sim
