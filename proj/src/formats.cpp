#include "straw3d/formats.hpp"

#include <json.hpp>

#include <bit>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace straw3d::io {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in.good() && !in.eof())
    throw std::runtime_error(path.string() + ": read failed");
  return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

void put_u32le(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t get_u32le(const std::string& data, size_t offset) {
  const auto* p = reinterpret_cast<const unsigned char*>(data.data() + offset);
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

void put_f32le(std::string& out, float v) { put_u32le(out, std::bit_cast<uint32_t>(v)); }

float get_f32le(const std::string& data, size_t offset) {
  return std::bit_cast<float>(get_u32le(data, offset));
}

// Shared "magic + w + h + reserved" header. Returns (width, height) and
// checks the payload length against bytes_per_pixel.
std::pair<int, int> parse_raw_header(const std::string& data, const char* magic,
                                     size_t bytes_per_pixel, const std::filesystem::path& path) {
  if (data.size() < 16)
    throw std::runtime_error(path.string() + ": truncated header: expected at least 16 bytes, got " +
                             std::to_string(data.size()));
  if (std::memcmp(data.data(), magic, 4) != 0)
    throw std::runtime_error(path.string() + ": bad magic at byte 0: expected \"" +
                             std::string(magic) + "\"");
  const uint32_t w = get_u32le(data, 4);
  const uint32_t h = get_u32le(data, 8);
  if (get_u32le(data, 12) != 0)
    throw std::runtime_error(path.string() + ": reserved field at byte 12 must be 0");
  if (w == 0 || h == 0 || w > 100000 || h > 100000 ||
      static_cast<uint64_t>(w) * h > 100000000ull)
    throw std::runtime_error(path.string() + ": implausible dimensions " + std::to_string(w) +
                             "x" + std::to_string(h) + " at byte 4");
  const uint64_t expected = 16 + static_cast<uint64_t>(w) * h * bytes_per_pixel;
  if (data.size() != expected)
    throw std::runtime_error(path.string() + ": truncated payload: expected " +
                             std::to_string(expected) + " bytes, got " +
                             std::to_string(data.size()));
  return {static_cast<int>(w), static_cast<int>(h)};
}

std::string raw_header(const char* magic, int width, int height) {
  std::string out(magic, 4);
  put_u32le(out, static_cast<uint32_t>(width));
  put_u32le(out, static_cast<uint32_t>(height));
  put_u32le(out, 0);
  return out;
}

json pose_to_json(const FrameRecord& f) {
  json rot = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(f.camera_rotation(r, c));
  return {{"position", {f.camera_position.x(), f.camera_position.y(), f.camera_position.z()}},
          {"rotation", rot}};
}

void pose_from_json(const json& j, FrameRecord& f) {
  const auto& pos = j.at("position");
  const auto& rot = j.at("rotation");
  if (pos.size() != 3 || rot.size() != 9)
    throw std::runtime_error("pose: expected 3 position and 9 rotation entries");
  for (int i = 0; i < 3; ++i) f.camera_position[i] = pos.at(i).get<double>();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) f.camera_rotation(r, c) = rot.at(r * 3 + c).get<double>();
}

}  // namespace

void write_depth(const std::filesystem::path& path, const geom::DepthImage& depth) {
  std::string out = raw_header("ODPC", depth.width, depth.height);
  out.reserve(out.size() + depth.values.size() * 4);
  for (float v : depth.values) put_f32le(out, v);
  write_file(path, out);
}

geom::DepthImage read_depth(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  const auto [w, h] = parse_raw_header(data, "ODPC", 4, path);
  geom::DepthImage depth(w, h);
  for (size_t i = 0; i < depth.values.size(); ++i) depth.values[i] = get_f32le(data, 16 + 4 * i);
  return depth;
}

void write_labels(const std::filesystem::path& path, const LabelImage& labels) {
  std::string out = raw_header("OLBL", labels.width, labels.height);
  out.append(reinterpret_cast<const char*>(labels.labels.data()), labels.labels.size());
  write_file(path, out);
}

LabelImage read_labels(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  const auto [w, h] = parse_raw_header(data, "OLBL", 1, path);
  LabelImage labels(w, h);
  std::memcpy(labels.labels.data(), data.data() + 16, labels.labels.size());
  return labels;
}

void write_normals(const std::filesystem::path& path, const geom::NormalMap& normals) {
  std::string out = raw_header("ONRM", normals.width, normals.height);
  out.reserve(out.size() + normals.normals.size() * 12);
  for (size_t i = 0; i < normals.normals.size(); ++i) {
    const Eigen::Vector3d n = normals.valid[i] ? normals.normals[i] : Eigen::Vector3d::Zero();
    put_f32le(out, static_cast<float>(n.x()));
    put_f32le(out, static_cast<float>(n.y()));
    put_f32le(out, static_cast<float>(n.z()));
  }
  write_file(path, out);
}

geom::NormalMap read_normals(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  const auto [w, h] = parse_raw_header(data, "ONRM", 12, path);
  geom::NormalMap normals(w, h);
  for (size_t i = 0; i < normals.normals.size(); ++i) {
    const Eigen::Vector3d n(get_f32le(data, 16 + 12 * i), get_f32le(data, 16 + 12 * i + 4),
                            get_f32le(data, 16 + 12 * i + 8));
    normals.normals[i] = n;
    normals.valid[i] = n.isZero() ? 0 : 1;
  }
  return normals;
}

void write_ppm(const std::filesystem::path& path, const ColorImage& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(image.rgb.data()), image.rgb.size());
  write_file(path, out);
}

ColorImage read_ppm(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < data.size()) {
      if (data[pos] == '#') {  // comment to end of line
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    if (start == pos)
      throw std::runtime_error(path.string() + ": truncated header at byte " +
                               std::to_string(start));
    return data.substr(start, pos - start);
  };

  if (next_token() != "P6")
    throw std::runtime_error(path.string() + ": bad magic at byte 0: expected \"P6\"");
  long w = 0, h = 0, maxval = 0;
  try {
    w = std::stol(next_token());
    h = std::stol(next_token());
    maxval = std::stol(next_token());
  } catch (const std::logic_error&) {
    throw std::runtime_error(path.string() + ": malformed header near byte " +
                             std::to_string(pos));
  }
  if (w <= 0 || h <= 0 || w > 100000 || h > 100000)
    throw std::runtime_error(path.string() + ": implausible dimensions " + std::to_string(w) +
                             "x" + std::to_string(h));
  if (maxval != 255)
    throw std::runtime_error(path.string() + ": unsupported maxval " + std::to_string(maxval) +
                             " (only 255)");
  ++pos;  // single whitespace after maxval
  const uint64_t expected = static_cast<uint64_t>(w) * h * 3;
  if (data.size() - pos != expected)
    throw std::runtime_error(path.string() + ": truncated payload: expected " +
                             std::to_string(pos + expected) + " bytes, got " +
                             std::to_string(data.size()));
  ColorImage image(static_cast<int>(w), static_cast<int>(h));
  std::memcpy(image.rgb.data(), data.data() + pos, image.rgb.size());
  return image;
}

void save_manifest(const std::filesystem::path& dir, const DatasetManifest& manifest) {
  json frames = json::array();
  for (const auto& f : manifest.frames) {
    frames.push_back({{"id", f.id},
                      {"depth", f.depth_file},
                      {"labels", f.label_file},
                      {"color", f.color_file},
                      {"normals", f.normals_file},
                      {"pose", pose_to_json(f)},
                      {"corruption",
                       {{"reflectance", f.corruption.reflectance},
                        {"noise_sigma", f.corruption.noise_sigma},
                        {"reflectance_scale", f.corruption.reflectance_scale},
                        {"reflectance_delta_v", f.corruption.reflectance_delta_v}}}});
  }
  const auto& k = manifest.camera;
  json j = {{"version", manifest.version},
            {"seed", manifest.seed},
            {"camera",
             {{"fx", k.fx},
              {"fy", k.fy},
              {"cx", k.cx},
              {"cy", k.cy},
              {"width", k.width},
              {"height", k.height},
              {"depth_min", k.depth_min},
              {"depth_max", k.depth_max}}},
            {"stats", {{"frame_count", manifest.frames.size()}, {"fruit_fraction", manifest.fruit_fraction}}},
            {"frames", frames}};
  write_file(dir / "manifest.json", j.dump(2) + "\n");
}

DatasetManifest load_manifest(const std::filesystem::path& dir) {
  const auto path = std::filesystem::is_directory(dir) ? dir / "manifest.json" : dir;
  const std::string data = read_file(path);
  try {
    const json j = json::parse(data);
    DatasetManifest m;
    m.version = j.at("version").get<int>();
    if (m.version != 1)
      throw std::runtime_error("unsupported manifest version " + std::to_string(m.version));
    m.seed = j.at("seed").get<uint64_t>();
    const auto& k = j.at("camera");
    m.camera.fx = k.at("fx").get<double>();
    m.camera.fy = k.at("fy").get<double>();
    m.camera.cx = k.at("cx").get<double>();
    m.camera.cy = k.at("cy").get<double>();
    m.camera.width = k.at("width").get<int>();
    m.camera.height = k.at("height").get<int>();
    m.camera.depth_min = k.at("depth_min").get<double>();
    m.camera.depth_max = k.at("depth_max").get<double>();
    m.fruit_fraction = j.at("stats").at("fruit_fraction").get<double>();
    for (const auto& jf : j.at("frames")) {
      FrameRecord f;
      f.id = jf.at("id").get<std::string>();
      f.depth_file = jf.at("depth").get<std::string>();
      f.label_file = jf.at("labels").get<std::string>();
      f.color_file = jf.at("color").get<std::string>();
      f.normals_file = jf.at("normals").get<std::string>();
      pose_from_json(jf.at("pose"), f);
      const auto& jc = jf.at("corruption");
      f.corruption.reflectance = jc.at("reflectance").get<bool>();
      f.corruption.noise_sigma = jc.at("noise_sigma").get<double>();
      f.corruption.reflectance_scale = jc.at("reflectance_scale").get<double>();
      f.corruption.reflectance_delta_v = jc.at("reflectance_delta_v").get<double>();
      m.frames.push_back(std::move(f));
    }
    if (j.at("stats").at("frame_count").get<size_t>() != m.frames.size())
      throw std::runtime_error("frame_count does not match the frames array");
    return m;
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void export_ply(const geom::OrganizedCloud& cloud, const geom::NormalMap* normals,
                const ColorImage* color, const LabelImage* labels,
                const std::filesystem::path& path) {
  const size_t n = static_cast<size_t>(cloud.width) * cloud.height;
  if (normals && (normals->width != cloud.width || normals->height != cloud.height))
    throw std::invalid_argument("export_ply: normals dimensions do not match the cloud");
  if (color && (color->width != cloud.width || color->height != cloud.height))
    throw std::invalid_argument("export_ply: color dimensions do not match the cloud");
  if (labels && (labels->width != cloud.width || labels->height != cloud.height))
    throw std::invalid_argument("export_ply: label dimensions do not match the cloud");

  auto emit = [&](size_t i) {
    return cloud.valid[i] && (!labels || labels->labels[i] != LabelImage::kInvalid);
  };
  size_t count = 0;
  for (size_t i = 0; i < n; ++i)
    if (emit(i)) ++count;

  std::string out;
  out.reserve(count * 64 + 512);
  out += "ply\nformat ascii 1.0\nelement vertex " + std::to_string(count) + "\n";
  out += "property float x\nproperty float y\nproperty float z\n";
  out += "property float nx\nproperty float ny\nproperty float nz\n";
  out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out += "property uchar label\nend_header\n";

  char line[256];
  for (size_t i = 0; i < n; ++i) {
    if (!emit(i)) continue;
    const Eigen::Vector3f& p = cloud.points[i];
    Eigen::Vector3d nrm = Eigen::Vector3d::Zero();
    if (normals && normals->valid[i]) nrm = normals->normals[i];
    unsigned r = 0, g = 0, b = 0;
    if (color) {
      r = color->rgb[i * 3];
      g = color->rgb[i * 3 + 1];
      b = color->rgb[i * 3 + 2];
    }
    const unsigned label = labels ? labels->labels[i] : 0;
    // %.9g round-trips float exactly in text
    std::snprintf(line, sizeof(line), "%.9g %.9g %.9g %.9g %.9g %.9g %u %u %u %u\n", p.x(), p.y(),
                  p.z(), nrm.x(), nrm.y(), nrm.z(), r, g, b, label);
    out += line;
  }
  write_file(path, out);
}

PlyCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open for reading");
  std::string lin;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error(path.string() + ": " + msg);
  };

  if (!std::getline(in, lin) || lin != "ply") fail("not a PLY file (missing \"ply\" line)");
  if (!std::getline(in, lin) || lin.rfind("format ascii 1.0", 0) != 0)
    fail("only \"format ascii 1.0\" is supported");

  long vertex_count = -1;
  std::vector<std::string> props;
  std::vector<bool> single_precision;
  bool in_vertex = false;
  while (std::getline(in, lin)) {
    std::istringstream ls(lin);
    std::string word;
    ls >> word;
    if (word == "comment" || word.empty()) continue;
    if (word == "end_header") break;
    if (word == "element") {
      std::string name;
      long count = 0;
      ls >> name >> count;
      if (name == "vertex") {
        vertex_count = count;
        in_vertex = true;
      } else {
        if (count > 0) fail("unsupported element \"" + name + "\"");
        in_vertex = false;
      }
    } else if (word == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      if (type == "list") fail("list properties are not supported");
      props.push_back(name);
      single_precision.push_back(type == "float" || type == "float32");
    } else if (word != "property") {
      fail("unexpected header line: " + lin);
    }
  }
  if (vertex_count < 0) fail("missing \"element vertex\"");

  auto index_of = [&](const char* name) {
    for (size_t i = 0; i < props.size(); ++i)
      if (props[i] == name) return static_cast<long>(i);
    return -1L;
  };
  const long ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
  if (ix < 0 || iy < 0 || iz < 0) fail("vertex element lacks x/y/z properties");
  const long inx = index_of("nx"), iny = index_of("ny"), inz = index_of("nz");
  const long ir = index_of("red"), ig = index_of("green"), ib = index_of("blue");
  const long il = index_of("label");

  PlyCloud out;
  out.points.reserve(vertex_count);
  std::vector<double> row(props.size());
  for (long v = 0; v < vertex_count; ++v) {
    if (!std::getline(in, lin)) fail("vertex " + std::to_string(v) + ": unexpected end of file");
    std::istringstream ls(lin);
    for (size_t c = 0; c < props.size(); ++c) {
      if (!(ls >> row[c]))
        fail("vertex " + std::to_string(v) + ": expected " + std::to_string(props.size()) +
             " values, got " + std::to_string(c));
      // the text identifies a value of the declared width; narrow before use
      if (single_precision[c]) row[c] = static_cast<double>(static_cast<float>(row[c]));
    }
    out.points.emplace_back(row[ix], row[iy], row[iz]);
    out.normals.emplace_back(inx >= 0 ? row[inx] : 0.0, iny >= 0 ? row[iny] : 0.0,
                             inz >= 0 ? row[inz] : 0.0);
    auto byte_at = [&](long idx) -> uint8_t {
      if (idx < 0) return 0;
      const double val = row[idx];
      if (val < 0.0 || val > 255.0 || val != std::floor(val))
        fail("vertex " + std::to_string(v) + ": value " + std::to_string(val) +
             " is not an 8-bit integer");
      return static_cast<uint8_t>(val);
    };
    out.colors.push_back({byte_at(ir), byte_at(ig), byte_at(ib)});
    out.labels.push_back(byte_at(il));
  }
  return out;
}

}  // namespace straw3d::io
