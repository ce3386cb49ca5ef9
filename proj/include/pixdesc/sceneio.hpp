#pragma once

#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pixdesc/geometry.hpp"
#include "pixdesc/scenegen.hpp"

namespace pixdesc {

// Scene directory layout (all rasters binary, all text whitespace-separated):
//   manifest            scene id, plane, object specs, frame list
//   intrinsics.txt      fx fy cx cy width height
//   rgb_XXXX.ppm        binary P6, 8-bit
//   depth_XXXX.raw      little-endian float32, row-major
//   id_XXXX.pgm         binary P5
//   pose_XXXX.txt       row-major 3x3 rotation then translation (12 reals)

namespace sceneio {

inline std::string frame_tag(int index) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%04d", index);
  return buf;
}

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  os << content;
  if (!os) throw DataError("write failed: " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// -- PPM / PGM --------------------------------------------------------------

inline void write_ppm(const std::string& path, const ImageU8& img) {
  if (img.channels != 3) throw DataError("write_ppm: 3-channel image expected");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  os << "P6\n" << img.width << " " << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.data.data()), long(img.data.size()));
  if (!os) throw DataError("write failed: " + path);
}

inline void write_pgm(const std::string& path, const IdMask& mask) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  os << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(mask.data.data()), long(mask.data.size()));
  if (!os) throw DataError("write failed: " + path);
}

namespace detail {

// Reads one whitespace-delimited token, skipping '#' comments, and tracks
// the byte offset for error messages.
inline std::string next_token(const std::string& buf, std::size_t& pos,
                              const std::string& path) {
  while (pos < buf.size()) {
    if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
      ++pos;
    } else if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  if (pos >= buf.size())
    throw ParseError(path + ": unexpected end of header at byte " +
                     std::to_string(pos));
  std::size_t start = pos;
  while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
  return buf.substr(start, pos - start);
}

inline int parse_int(const std::string& tok, const std::string& path, std::size_t pos) {
  int v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw ParseError(path + ": bad integer '" + tok + "' near byte " +
                     std::to_string(pos));
  return v;
}

struct PnmHeader {
  int width = 0, height = 0;
  std::size_t data_offset = 0;
};

inline PnmHeader parse_pnm_header(const std::string& buf, const std::string& magic,
                                  const std::string& path) {
  std::size_t pos = 0;
  std::string tok = next_token(buf, pos, path);
  if (tok != magic)
    throw ParseError(path + ": expected " + magic + " at byte 0, got '" + tok + "'");
  PnmHeader h;
  h.width = parse_int(next_token(buf, pos, path), path, pos);
  h.height = parse_int(next_token(buf, pos, path), path, pos);
  int maxval = parse_int(next_token(buf, pos, path), path, pos);
  if (maxval != 255)
    throw ParseError(path + ": unsupported maxval " + std::to_string(maxval));
  h.data_offset = pos + 1;  // single whitespace after maxval
  return h;
}

}  // namespace detail

inline ImageU8 read_ppm(const std::string& path) {
  std::string buf = read_text(path);
  auto h = detail::parse_pnm_header(buf, "P6", path);
  ImageU8 img(h.width, h.height, 3);
  if (buf.size() - h.data_offset < img.data.size())
    throw ChecksumMismatch(path + ": raster truncated at byte " +
                           std::to_string(buf.size()) + ", expected " +
                           std::to_string(h.data_offset + img.data.size()));
  std::memcpy(img.data.data(), buf.data() + h.data_offset, img.data.size());
  return img;
}

inline IdMask read_pgm(const std::string& path) {
  std::string buf = read_text(path);
  auto h = detail::parse_pnm_header(buf, "P5", path);
  IdMask mask(h.width, h.height);
  if (buf.size() - h.data_offset < mask.data.size())
    throw ChecksumMismatch(path + ": raster truncated at byte " +
                           std::to_string(buf.size()) + ", expected " +
                           std::to_string(h.data_offset + mask.data.size()));
  std::memcpy(mask.data.data(), buf.data() + h.data_offset, mask.data.size());
  return mask;
}

// -- raw depth ----------------------------------------------------------------

inline void write_depth_raw(const std::string& path, const DepthMap& d) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  static_assert(sizeof(float) == 4);
  os.write(reinterpret_cast<const char*>(d.data.data()), long(d.data.size() * 4));
  if (!os) throw DataError("write failed: " + path);
}

inline DepthMap read_depth_raw(const std::string& path, int width, int height) {
  std::string buf = read_text(path);
  DepthMap d(width, height);
  const std::size_t expect = d.data.size() * 4;
  if (buf.size() != expect)
    throw ChecksumMismatch(path + ": expected " + std::to_string(expect) +
                           " bytes, found " + std::to_string(buf.size()));
  std::memcpy(d.data.data(), buf.data(), expect);
  return d;
}

// -- pose / intrinsics --------------------------------------------------------

inline void write_pose(const std::string& path, const Pose& pose) {
  std::ostringstream os;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) os << fmt(pose.rotation(r, c)) << (c < 2 ? " " : "\n");
  os << fmt(pose.translation.x()) << " " << fmt(pose.translation.y()) << " "
     << fmt(pose.translation.z()) << "\n";
  write_text(path, os.str());
}

inline std::vector<double> parse_reals(const std::string& path, std::size_t count) {
  std::string buf = read_text(path);
  std::vector<double> vals;
  std::istringstream is(buf);
  double v;
  while (is >> v) vals.push_back(v);
  if (vals.size() != count)
    throw ParseError(path + ": expected " + std::to_string(count) + " reals, found " +
                     std::to_string(vals.size()));
  return vals;
}

inline Pose read_pose(const std::string& path) {
  auto v = parse_reals(path, 12);
  Pose p;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) p.rotation(r, c) = v[std::size_t(r * 3 + c)];
  p.translation = Vec3(v[9], v[10], v[11]);
  p.validate(1e-9);
  return p;
}

inline void write_intrinsics(const std::string& path, const CameraIntrinsics& k) {
  write_text(path, fmt(k.fx) + " " + fmt(k.fy) + " " + fmt(k.cx) + " " + fmt(k.cy) +
                       " " + std::to_string(k.width) + " " +
                       std::to_string(k.height) + "\n");
}

inline CameraIntrinsics read_intrinsics(const std::string& path) {
  auto v = parse_reals(path, 6);
  CameraIntrinsics k{v[0], v[1], v[2], v[3], int(v[4]), int(v[5])};
  k.validate();
  return k;
}

// -- manifest -----------------------------------------------------------------

inline const char* texture_name(TextureKind k) {
  switch (k) {
    case TextureKind::Checker: return "checker";
    case TextureKind::Stripes: return "stripes";
    case TextureKind::Solid: return "solid";
    case TextureKind::Noise: return "noise";
  }
  return "?";
}

inline TextureKind parse_texture_kind(const std::string& s, const std::string& path) {
  if (s == "checker") return TextureKind::Checker;
  if (s == "stripes") return TextureKind::Stripes;
  if (s == "solid") return TextureKind::Solid;
  if (s == "noise") return TextureKind::Noise;
  throw ParseError(path + ": unknown texture kind '" + s + "'");
}

inline std::string texture_str(const TextureSpec& t) {
  std::ostringstream os;
  os << texture_name(t.kind) << " " << fmt(t.scale) << " " << int(t.c0.r) << " "
     << int(t.c0.g) << " " << int(t.c0.b) << " " << int(t.c1.r) << " " << int(t.c1.g)
     << " " << int(t.c1.b);
  return os.str();
}

}  // namespace sceneio

// Writes one scene as a directory in the documented format.
inline void save_dataset(const Scene& scene, const std::string& path) {
  namespace fs = std::filesystem;
  namespace io = sceneio;
  fs::create_directories(path);
  if (scene.frames.empty()) throw DataError("save_dataset: scene has no frames");

  std::ostringstream m;
  m << "pixdesc-scene 1\n";
  m << "id " << scene.scene_id << "\n";
  m << "plane " << io::fmt(scene.plane.extent) << " "
    << io::texture_str(scene.plane.texture) << "\n";
  m << "objects " << scene.objects.size() << "\n";
  for (const auto& o : scene.objects) {
    m << "object " << o.object_id << " "
      << (o.shape == ShapeKind::Box ? "box" : "sphere") << " " << io::fmt(o.size.x())
      << " " << io::fmt(o.size.y()) << " " << io::fmt(o.size.z()) << " "
      << io::fmt(o.x) << " " << io::fmt(o.y) << " " << io::fmt(o.yaw) << " "
      << io::texture_str(o.texture) << "\n";
  }
  m << "frames " << scene.frames.size() << "\n";
  for (std::size_t i = 0; i < scene.frames.size(); ++i)
    m << "frame " << io::frame_tag(int(i)) << "\n";
  io::write_text(path + "/manifest", m.str());

  io::write_intrinsics(path + "/intrinsics.txt", scene.frames[0].intrinsics);
  for (std::size_t i = 0; i < scene.frames.size(); ++i) {
    const std::string tag = io::frame_tag(int(i));
    io::write_ppm(path + "/rgb_" + tag + ".ppm", scene.frames[i].rgb);
    io::write_depth_raw(path + "/depth_" + tag + ".raw", scene.frames[i].depth);
    io::write_pgm(path + "/id_" + tag + ".pgm", scene.id_masks[i]);
    io::write_pose(path + "/pose_" + tag + ".txt", scene.frames[i].pose);
  }
}

namespace sceneio::detail {

struct ManifestReader {
  std::string path;
  std::string buf;
  std::size_t pos = 0;

  std::string tok() { return next_token(buf, pos, path); }
  int num() { return parse_int(tok(), path, pos); }
  double real() {
    std::string t = tok();
    try {
      return std::stod(t);
    } catch (const std::exception&) {
      throw ParseError(path + ": bad real '" + t + "' near byte " +
                       std::to_string(pos));
    }
  }
  void expect(const std::string& kw) {
    std::size_t at = pos;
    std::string t = tok();
    if (t != kw)
      throw ParseError(path + ": expected '" + kw + "' near byte " +
                       std::to_string(at) + ", got '" + t + "'");
  }
  TextureSpec texture() {
    TextureSpec t;
    t.kind = parse_texture_kind(tok(), path);
    t.scale = real();
    auto u8 = [this] { return std::uint8_t(num()); };
    t.c0 = {u8(), u8(), u8()};
    t.c1 = {u8(), u8(), u8()};
    return t;
  }
};

}  // namespace sceneio::detail

// Loads one scene directory written by save_dataset.
inline Scene load_scene_dir(const std::string& path) {
  namespace fs = std::filesystem;
  namespace io = sceneio;
  io::detail::ManifestReader r{path + "/manifest", io::read_text(path + "/manifest")};

  r.expect("pixdesc-scene");
  int version = r.num();
  if (version != 1)
    throw ParseError(r.path + ": unsupported version " + std::to_string(version));
  Scene scene;
  r.expect("id");
  scene.scene_id = r.num();
  r.expect("plane");
  scene.plane.extent = r.real();
  scene.plane.texture = r.texture();
  r.expect("objects");
  int n_objects = r.num();
  for (int i = 0; i < n_objects; ++i) {
    r.expect("object");
    ObjectSpec o;
    o.object_id = r.num();
    std::string shape = r.tok();
    if (shape == "box")
      o.shape = ShapeKind::Box;
    else if (shape == "sphere")
      o.shape = ShapeKind::Sphere;
    else
      throw ParseError(r.path + ": unknown shape '" + shape + "'");
    double sx = r.real(), sy = r.real(), sz = r.real();
    o.size = Vec3(sx, sy, sz);
    o.x = r.real();
    o.y = r.real();
    o.yaw = r.real();
    o.texture = r.texture();
    scene.objects.push_back(o);
  }
  r.expect("frames");
  int n_frames = r.num();
  std::vector<std::string> tags;
  for (int i = 0; i < n_frames; ++i) {
    r.expect("frame");
    tags.push_back(r.tok());
  }

  CameraIntrinsics k = io::read_intrinsics(path + "/intrinsics.txt");
  for (const std::string& tag : tags) {
    for (const char* kind : {"rgb_", "depth_", "id_", "pose_"}) {
      std::string f = path + "/" + kind + tag +
                      (std::strcmp(kind, "rgb_") == 0    ? ".ppm"
                       : std::strcmp(kind, "depth_") == 0 ? ".raw"
                       : std::strcmp(kind, "id_") == 0    ? ".pgm"
                                                          : ".txt");
      if (!fs::exists(f))
        throw ParseError(r.path + ": frame " + tag + " missing file " + f);
    }
    RgbdFrame frame;
    frame.rgb = io::read_ppm(path + "/rgb_" + tag + ".ppm");
    frame.depth = io::read_depth_raw(path + "/depth_" + tag + ".raw", k.width, k.height);
    frame.pose = io::read_pose(path + "/pose_" + tag + ".txt");
    frame.intrinsics = k;
    if (frame.rgb.width != k.width || frame.rgb.height != k.height)
      throw ParseError(path + "/rgb_" + tag + ".ppm: size differs from intrinsics");
    scene.frames.push_back(std::move(frame));
    scene.id_masks.push_back(io::read_pgm(path + "/id_" + tag + ".pgm"));
  }
  return scene;
}

// Accepts either a single scene directory or a root containing scene_* dirs.
inline std::vector<Scene> load_dataset(const std::string& path) {
  namespace fs = std::filesystem;
  if (fs::exists(path + "/manifest")) return {load_scene_dir(path)};
  std::vector<std::string> dirs;
  if (!fs::is_directory(path)) throw ParseError("no such dataset directory: " + path);
  for (const auto& e : fs::directory_iterator(path))
    if (e.is_directory() && fs::exists(e.path() / "manifest"))
      dirs.push_back(e.path().string());
  if (dirs.empty()) throw ParseError("no scene directories under " + path);
  std::sort(dirs.begin(), dirs.end());
  std::vector<Scene> scenes;
  scenes.reserve(dirs.size());
  for (const auto& d : dirs) scenes.push_back(load_scene_dir(d));
  return scenes;
}

inline void save_scenes(const std::vector<Scene>& scenes, const std::string& root) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "scene_%03d", int(i));
    save_dataset(scenes[i], root + "/" + buf);
  }
}

}  // namespace pixdesc
