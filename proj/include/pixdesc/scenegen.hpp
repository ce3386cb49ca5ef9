#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "pixdesc/common.hpp"
#include "pixdesc/geometry.hpp"

namespace pixdesc {

// ---------------------------------------------------------------------------
// Object / scene specification
// ---------------------------------------------------------------------------

enum class ShapeKind { Box, Sphere };
enum class TextureKind { Checker, Stripes, Solid, Noise };

struct Color3 {
  std::uint8_t r = 0, g = 0, b = 0;
  Vec3 to_vec() const { return {r / 255.0, g / 255.0, b / 255.0}; }
  bool operator==(const Color3&) const = default;
};

struct TextureSpec {
  TextureKind kind = TextureKind::Solid;
  double scale = 0.02;  // meters per cell/stripe
  Color3 c0{200, 60, 60};
  Color3 c1{240, 220, 80};
  bool operator==(const TextureSpec&) const = default;
};

// A rigid primitive resting on the ground plane. Boxes sit with their base
// at z=0; spheres touch the plane. yaw rotates about +z.
struct ObjectSpec {
  ShapeKind shape = ShapeKind::Box;
  Vec3 size{0.06, 0.06, 0.06};  // box: sx,sy,sz; sphere: size.x() = radius
  double x = 0, y = 0, yaw = 0;
  TextureSpec texture;
  int object_id = 0;

  double bounding_radius() const {
    if (shape == ShapeKind::Sphere) return size.x();
    return 0.5 * std::hypot(size.x(), size.y());
  }
  bool operator==(const ObjectSpec& o) const {
    return shape == o.shape && size == o.size && x == o.x && y == o.y &&
           yaw == o.yaw && texture == o.texture && object_id == o.object_id;
  }
};

struct PlaneSpec {
  double extent = 0.28;  // square half-extent in meters
  TextureSpec texture{TextureKind::Noise, 0.015, {112, 112, 116}, {134, 132, 128}};
  bool operator==(const PlaneSpec&) const = default;
};

struct Scene {
  int scene_id = 0;
  std::vector<ObjectSpec> objects;
  PlaneSpec plane;
  std::vector<RgbdFrame> frames;
  std::vector<IdMask> id_masks;

  std::vector<int> known_object_ids() const {
    std::vector<int> ids;
    for (const auto& o : objects)
      if (o.object_id != kDistractorId) ids.push_back(o.object_id);
    return ids;
  }
};

struct TrajectorySpec {
  double radius_min = 0.40, radius_max = 0.55;  // hemisphere radius, meters
  Vec3 look_at{0, 0, 0};
  int frame_count = 40;
  double min_rot_deg = 5.0;    // subsampling thresholds between kept frames
  double min_trans_m = 0.02;
  double elevation_min_deg = 50.0, elevation_max_deg = 72.0;
  double azimuth_span_deg = 360.0;  // narrow arcs keep keypoints observable

  void validate() const {
    if (min_rot_deg < 0 || min_trans_m < 0)
      throw ConfigError("trajectory: thresholds must be >= 0");
    if (frame_count < 1) throw ConfigError("trajectory: frame_count must be >= 1");
    if (radius_min <= 0 || radius_max < radius_min)
      throw ConfigError("trajectory: bad radius range");
  }
};

struct PairConstraint {
  double min_translation = 0.20;       // meters
  double min_angle = M_PI / 12.0;      // radians

  void validate() const {
    if (min_translation < 0 || min_angle < 0)
      throw ConfigError("pair constraint: thresholds must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// Ray casting
// ---------------------------------------------------------------------------

struct RayHit {
  double t = 0;            // camera-frame depth (rays use dir with z_cam = 1)
  Vec3 point;              // world hit point
  Vec3 normal;             // world normal
  int object_index = -1;   // -1 = ground plane
};

namespace raycast {

inline Eigen::Matrix2d yaw_rot(double yaw) {
  Eigen::Matrix2d r;
  r << std::cos(yaw), -std::sin(yaw), std::sin(yaw), std::cos(yaw);
  return r;
}

inline std::optional<double> intersect_sphere(const Vec3& o, const Vec3& d,
                                              const Vec3& center, double radius) {
  Vec3 oc = o - center;
  double a = d.squaredNorm();
  double b = 2.0 * d.dot(oc);
  double c = oc.squaredNorm() - radius * radius;
  double disc = b * b - 4 * a * c;
  if (disc < 0) return std::nullopt;
  double sq = std::sqrt(disc);
  double t0 = (-b - sq) / (2 * a);
  double t1 = (-b + sq) / (2 * a);
  if (t0 > 1e-9) return t0;
  if (t1 > 1e-9) return t1;
  return std::nullopt;
}

struct SlabHit {
  double t;
  int axis;   // 0,1,2: which slab was entered last
  int sign;   // -1 low face, +1 high face
};

inline std::optional<SlabHit> intersect_aabb(const Vec3& o, const Vec3& d,
                                             const Vec3& lo, const Vec3& hi) {
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  int axis = -1, sign = 0;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-15) {
      if (o[i] < lo[i] || o[i] > hi[i]) return std::nullopt;
      continue;
    }
    double inv = 1.0 / d[i];
    double t0 = (lo[i] - o[i]) * inv;
    double t1 = (hi[i] - o[i]) * inv;
    int s = -1;
    if (t0 > t1) {
      std::swap(t0, t1);
      s = 1;
    }
    if (t0 > t_enter) {
      t_enter = t0;
      axis = i;
      sign = s;
    }
    t_exit = std::min(t_exit, t1);
    if (t_enter > t_exit) return std::nullopt;
  }
  if (t_enter <= 1e-9 || axis < 0) return std::nullopt;  // inside or behind
  return SlabHit{t_enter, axis, sign};
}

inline std::optional<RayHit> intersect_object(const Vec3& o, const Vec3& d,
                                              const ObjectSpec& obj, int index) {
  if (obj.shape == ShapeKind::Sphere) {
    const double r = obj.size.x();
    Vec3 center(obj.x, obj.y, r);
    auto t = intersect_sphere(o, d, center, r);
    if (!t) return std::nullopt;
    Vec3 p = o + *t * d;
    return RayHit{*t, p, (p - center).normalized(), index};
  }
  // Box: transform the ray into the object frame (yaw about z at (x,y)).
  Eigen::Matrix2d rot = yaw_rot(-obj.yaw);
  Eigen::Vector2d o2 = rot * Eigen::Vector2d(o.x() - obj.x, o.y() - obj.y);
  Eigen::Vector2d d2 = rot * Eigen::Vector2d(d.x(), d.y());
  Vec3 ol(o2.x(), o2.y(), o.z());
  Vec3 dl(d2.x(), d2.y(), d.z());
  Vec3 half(obj.size.x() / 2, obj.size.y() / 2, 0);
  auto hit = intersect_aabb(ol, dl, {-half.x(), -half.y(), 0},
                            {half.x(), half.y(), obj.size.z()});
  if (!hit) return std::nullopt;
  Vec3 nl = Vec3::Zero();
  nl[hit->axis] = double(hit->sign);
  Eigen::Matrix2d back = yaw_rot(obj.yaw);
  Eigen::Vector2d n2 = back * Eigen::Vector2d(nl.x(), nl.y());
  return RayHit{hit->t, o + hit->t * d, Vec3(n2.x(), n2.y(), nl.z()), index};
}

}  // namespace raycast

// Nearest hit among all objects and the finite ground plane. dir need not be
// normalized; t is in units of |dir| (the renderer uses z_cam = 1 rays so t
// equals camera depth).
inline std::optional<RayHit> intersect_scene(const Vec3& origin, const Vec3& dir,
                                             const std::vector<ObjectSpec>& objects,
                                             const PlaneSpec& plane) {
  std::optional<RayHit> best;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    auto hit = raycast::intersect_object(origin, dir, objects[i], int(i));
    if (hit && (!best || hit->t < best->t)) best = hit;
  }
  if (std::abs(dir.z()) > 1e-15) {
    double t = -origin.z() / dir.z();
    if (t > 1e-9 && (!best || t < best->t)) {
      Vec3 p = origin + t * dir;
      if (std::abs(p.x()) <= plane.extent && std::abs(p.y()) <= plane.extent)
        best = RayHit{t, p, Vec3(0, 0, 1), -1};
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Shading
// ---------------------------------------------------------------------------

namespace shading {

inline constexpr double kAmbient = 0.35;
inline const Vec3 kLightDir = Vec3(0.35, -0.45, -0.82).normalized();
inline constexpr Color3 kBackground{24, 26, 30};

inline double cell_hash(int x, int y, int z) {
  std::uint64_t h = splitmix64(std::uint64_t(std::uint32_t(x)) |
                               (std::uint64_t(std::uint32_t(y)) << 21) |
                               (std::uint64_t(std::uint32_t(z)) << 42));
  return double(h >> 11) * 0x1.0p-53;
}

inline Vec3 sample_texture(const TextureSpec& tex, const Vec3& local) {
  auto cell = [&](double v) { return int(std::floor(v / tex.scale)); };
  switch (tex.kind) {
    case TextureKind::Solid:
      return tex.c0.to_vec();
    case TextureKind::Checker: {
      int parity = (cell(local.x()) + cell(local.y()) + cell(local.z())) & 1;
      return parity ? tex.c1.to_vec() : tex.c0.to_vec();
    }
    case TextureKind::Stripes: {
      int parity = cell(local.x()) & 1;
      return parity ? tex.c1.to_vec() : tex.c0.to_vec();
    }
    case TextureKind::Noise: {
      double t = cell_hash(cell(local.x()), cell(local.y()), cell(local.z()));
      return tex.c0.to_vec() + t * (tex.c1.to_vec() - tex.c0.to_vec());
    }
  }
  return tex.c0.to_vec();
}

inline Color3 shade(const TextureSpec& tex, const Vec3& local, const Vec3& normal) {
  Vec3 albedo = sample_texture(tex, local);
  double diffuse = std::max(0.0, normal.dot(-kLightDir));
  Vec3 c = albedo * (kAmbient + (1.0 - kAmbient) * diffuse);
  auto q = [](double v) {
    return std::uint8_t(std::clamp(int(std::lround(v * 255.0)), 0, 255));
  };
  return {q(c.x()), q(c.y()), q(c.z())};
}

}  // namespace shading

// Local texture coordinates so patterns stick to the object across views.
inline Vec3 object_local_point(const ObjectSpec& obj, const Vec3& world) {
  Eigen::Matrix2d rot = raycast::yaw_rot(-obj.yaw);
  Eigen::Vector2d xy = rot * Eigen::Vector2d(world.x() - obj.x, world.y() - obj.y);
  return {xy.x(), xy.y(), world.z()};
}

struct RenderedFrame {
  RgbdFrame frame;
  IdMask id_mask;
};

// Per-pixel ray cast through integer pixel coordinates; depth stores the
// camera-frame z of the hit, so backproject() reconstructs hit points
// exactly. Misses (sky or beyond the plane) get the background color and
// invalid depth 0.
inline RenderedFrame render_frame(const std::vector<ObjectSpec>& objects,
                                  const PlaneSpec& plane, const Pose& pose,
                                  const CameraIntrinsics& k) {
  RenderedFrame out;
  out.frame.rgb = ImageU8(k.width, k.height, 3);
  out.frame.depth = DepthMap(k.width, k.height, 0.f);
  out.frame.pose = pose;
  out.frame.intrinsics = k;
  out.id_mask = IdMask(k.width, k.height, 0);
  const Vec3 origin = pose.camera_center();
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      Vec3 dir_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      Vec3 dir = pose.rotation * dir_cam;
      auto hit = intersect_scene(origin, dir, objects, plane);
      Color3 color = shading::kBackground;
      if (hit) {
        out.frame.depth.at(u, v) = float(hit->t);
        if (hit->object_index >= 0) {
          const ObjectSpec& obj = objects[std::size_t(hit->object_index)];
          color = shading::shade(obj.texture, object_local_point(obj, hit->point),
                                 hit->normal);
          out.id_mask.at(u, v) = std::uint8_t(obj.object_id);
        } else {
          color = shading::shade(plane.texture, hit->point, hit->normal);
        }
      }
      out.frame.rgb.at(u, v, 0) = color.r;
      out.frame.rgb.at(u, v, 1) = color.g;
      out.frame.rgb.at(u, v, 2) = color.b;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

// Camera pose looking from eye toward target, CV convention (+z forward,
// +y down in the image).
inline Pose look_at_pose(const Vec3& eye, const Vec3& target) {
  Vec3 forward = (target - eye).normalized();
  Vec3 up(0, 0, 1);
  if (std::abs(forward.dot(up)) > 1.0 - 1e-9)
    up = Vec3(0, 1, 0);  // straight-down view: pick another roll reference
  Vec3 right = forward.cross(up).normalized();
  Vec3 down = forward.cross(right);
  Pose p;
  p.rotation.col(0) = right;
  p.rotation.col(1) = down;
  p.rotation.col(2) = forward;
  p.translation = eye;
  return p;
}

// Poses on a hemisphere sweep around look_at: azimuth advances around the
// full circle with jitter while elevation oscillates inside its band.
inline std::vector<Pose> generate_trajectory(const TrajectorySpec& spec, Rng& rng) {
  spec.validate();
  std::vector<Pose> poses;
  poses.reserve(std::size_t(spec.frame_count));
  const double span = spec.azimuth_span_deg * M_PI / 180.0;
  const double az_step = span / spec.frame_count;
  double az = rng.uniform(0, 2.0 * M_PI);
  for (int i = 0; i < spec.frame_count; ++i) {
    az += az_step * rng.uniform(0.7, 1.3);
    double phase = double(i) / std::max(1, spec.frame_count - 1);
    double osc = 0.5 - 0.5 * std::cos(2.0 * M_PI * phase * 2.0);
    double el_deg = spec.elevation_min_deg +
                    (spec.elevation_max_deg - spec.elevation_min_deg) *
                        std::clamp(osc + rng.uniform(-0.1, 0.1), 0.0, 1.0);
    double el = el_deg * M_PI / 180.0;
    double r = rng.uniform(spec.radius_min, spec.radius_max);
    Vec3 eye = spec.look_at + r * Vec3(std::cos(az) * std::cos(el),
                                       std::sin(az) * std::cos(el), std::sin(el));
    poses.push_back(look_at_pose(eye, spec.look_at));
  }
  return poses;
}

// Greedy filter: keep frame i only if it moved at least (min_rot, min_trans)
// since the last kept frame. The first frame is always kept.
inline std::vector<int> subsample_trajectory_indices(const std::vector<Pose>& poses,
                                                     double min_rot_deg,
                                                     double min_trans_m) {
  if (poses.empty()) throw EmptySet("subsample_trajectory: no frames");
  std::vector<int> kept{0};
  const double min_rot = min_rot_deg * M_PI / 180.0;
  for (std::size_t i = 1; i < poses.size(); ++i) {
    PoseDelta d = pose_delta(poses[std::size_t(kept.back())], poses[i]);
    if (d.angle_rad >= min_rot && d.translation_m >= min_trans_m)
      kept.push_back(int(i));
  }
  return kept;
}

inline std::vector<RgbdFrame> subsample_trajectory(const std::vector<RgbdFrame>& frames,
                                                   double min_rot_deg,
                                                   double min_trans_m) {
  std::vector<Pose> poses;
  poses.reserve(frames.size());
  for (const auto& f : frames) poses.push_back(f.pose);
  std::vector<RgbdFrame> out;
  for (int i : subsample_trajectory_indices(poses, min_rot_deg, min_trans_m))
    out.push_back(frames[std::size_t(i)]);
  return out;
}

// ---------------------------------------------------------------------------
// Scene generation
// ---------------------------------------------------------------------------

struct GenSpec {
  int n_scenes = 6;
  int library_size = 4;        // distinct known objects across the dataset
  int objects_per_scene = 4;   // multi-object scenes place this many
  int distractors_per_scene = 0;
  bool single_object = false;  // one known object per scene (round-robin)
  int image_width = 64, image_height = 64;
  double focal = 160.0;        // fx = fy; principal point at image center
  double workspace_radius = 0.16;  // placement disc for object centers
  double placement_margin = 0.01;
  double box_size_min = 0.05, box_size_max = 0.09;
  double sphere_radius_min = 0.035, sphere_radius_max = 0.055;
  TrajectorySpec trajectory;
  PlaneSpec plane;
  int max_placement_attempts = 200;

  CameraIntrinsics intrinsics() const {
    return {focal, focal, image_width / 2.0, image_height / 2.0, image_width,
            image_height};
  }
  void validate() const {
    if (n_scenes < 1 || library_size < 1 || objects_per_scene < 1)
      throw ConfigError("scenegen: counts must be >= 1");
    if (image_width < 8 || image_height < 8)
      throw ConfigError("scenegen: image too small");
    trajectory.validate();
  }
};

namespace detail {

inline Color3 hsv_color(double h, double s, double v) {
  double c = v * s;
  double hp = h * 6.0;
  double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (int(hp) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  double m = v - c;
  auto q = [m](double t) { return std::uint8_t(std::clamp(int((t + m) * 255), 0, 255)); };
  return {q(r), q(g), q(b)};
}

inline TextureSpec random_texture(Rng& rng) {
  TextureSpec t;
  double pick = rng.uniform();
  t.kind = pick < 0.3   ? TextureKind::Checker
           : pick < 0.55 ? TextureKind::Stripes
           : pick < 0.8  ? TextureKind::Solid
                         : TextureKind::Noise;
  double h = rng.uniform();
  t.c0 = hsv_color(h, rng.uniform(0.55, 0.95), rng.uniform(0.65, 1.0));
  t.c1 = hsv_color(std::fmod(h + rng.uniform(0.25, 0.6), 1.0),
                   rng.uniform(0.55, 0.95), rng.uniform(0.65, 1.0));
  t.scale = rng.uniform(0.012, 0.03);
  return t;
}

inline ObjectSpec random_object_shape(Rng& rng, const GenSpec& spec, int id) {
  ObjectSpec o;
  o.object_id = id;
  o.texture = random_texture(rng);
  if (rng.bernoulli(0.5)) {
    o.shape = ShapeKind::Box;
    o.size = {rng.uniform(spec.box_size_min, spec.box_size_max),
              rng.uniform(spec.box_size_min, spec.box_size_max),
              rng.uniform(spec.box_size_min, spec.box_size_max)};
  } else {
    o.shape = ShapeKind::Sphere;
    double r = rng.uniform(spec.sphere_radius_min, spec.sphere_radius_max);
    o.size = {r, r, r};
  }
  return o;
}

}  // namespace detail

// The fixed set of known objects shared by every scene of a dataset
// (shape/size/texture frozen, poses re-sampled per scene).
inline std::vector<ObjectSpec> make_object_library(const GenSpec& spec, Rng& rng) {
  std::vector<ObjectSpec> lib;
  lib.reserve(std::size_t(spec.library_size));
  for (int i = 0; i < spec.library_size; ++i)
    lib.push_back(detail::random_object_shape(rng, spec, i + 1));
  return lib;
}

// Rejection-samples non-interpenetrating poses for the given objects, then
// renders frames along a generated-and-subsampled trajectory.
inline Scene generate_scene(const GenSpec& spec, std::vector<ObjectSpec> objects,
                            Rng& rng, int scene_id = 0) {
  spec.validate();
  if (objects.empty()) throw ConfigError("generate_scene: need at least one object");
  Scene scene;
  scene.scene_id = scene_id;
  scene.plane = spec.plane;

  std::vector<ObjectSpec> placed;
  for (ObjectSpec obj : objects) {
    bool ok = false;
    for (int attempt = 0; attempt < spec.max_placement_attempts; ++attempt) {
      double ang = rng.uniform(0, 2 * M_PI);
      double rad = spec.workspace_radius * std::sqrt(rng.uniform());
      obj.x = rad * std::cos(ang);
      obj.y = rad * std::sin(ang);
      obj.yaw = rng.uniform(0, 2 * M_PI);
      ok = true;
      for (const auto& other : placed) {
        double min_sep =
            obj.bounding_radius() + other.bounding_radius() + spec.placement_margin;
        if (std::hypot(obj.x - other.x, obj.y - other.y) < min_sep) {
          ok = false;
          break;
        }
      }
      if (ok) break;
    }
    if (!ok)
      throw PlacementFailure("generate_scene: cannot place object id " +
                             std::to_string(obj.object_id));
    placed.push_back(obj);
  }
  scene.objects = std::move(placed);

  std::vector<Pose> poses = generate_trajectory(spec.trajectory, rng);
  std::vector<int> kept = subsample_trajectory_indices(
      poses, spec.trajectory.min_rot_deg, spec.trajectory.min_trans_m);
  const CameraIntrinsics k = spec.intrinsics();
  for (int i : kept) {
    RenderedFrame rf = render_frame(scene.objects, scene.plane, poses[std::size_t(i)], k);
    scene.frames.push_back(std::move(rf.frame));
    scene.id_masks.push_back(std::move(rf.id_mask));
  }
  return scene;
}

// Whole dataset: a shared object library, then one scene per entry. In
// single-object mode scenes cycle through the library; otherwise each scene
// gets a random subset of objects_per_scene known objects plus distractors.
inline std::vector<Scene> generate_dataset(const GenSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng lib_rng(mix_seed(seed, 0x6c696272ull));
  std::vector<ObjectSpec> library = make_object_library(spec, lib_rng);
  std::vector<Scene> scenes;
  for (int s = 0; s < spec.n_scenes; ++s) {
    Rng rng(mix_seed(seed, 0x7363656eull, std::uint64_t(s)));
    std::vector<ObjectSpec> chosen;
    if (spec.single_object) {
      chosen.push_back(library[std::size_t(s % spec.library_size)]);
    } else {
      std::vector<int> order(library.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
      for (std::size_t i = 0; i + 1 < order.size(); ++i)
        std::swap(order[i], order[i + rng.uniform_index(order.size() - i)]);
      int take = std::min<int>(spec.objects_per_scene, int(library.size()));
      for (int i = 0; i < take; ++i) chosen.push_back(library[std::size_t(order[i])]);
    }
    for (int d = 0; d < spec.distractors_per_scene; ++d) {
      ObjectSpec dist = detail::random_object_shape(rng, spec, kDistractorId);
      chosen.push_back(dist);
    }
    scenes.push_back(generate_scene(spec, std::move(chosen), rng, s));
  }
  return scenes;
}

// ---------------------------------------------------------------------------
// Image-pair sampling
// ---------------------------------------------------------------------------

struct SampledPair {
  int scene = 0;
  int frame_a = 0;
  int frame_b = 0;
};

// Admissible (scene, frame, frame) pairs under a constraint, precomputed so
// the training loop can sample in O(1).
class PairIndex {
 public:
  PairIndex() = default;
  PairIndex(const std::vector<Scene>& dataset, const PairConstraint& constraint) {
    constraint.validate();
    for (std::size_t s = 0; s < dataset.size(); ++s) {
      const auto& frames = dataset[s].frames;
      for (std::size_t i = 0; i < frames.size(); ++i) {
        for (std::size_t j = i + 1; j < frames.size(); ++j) {
          PoseDelta d = pose_delta(frames[i].pose, frames[j].pose);
          if (d.translation_m >= constraint.min_translation &&
              d.angle_rad >= constraint.min_angle)
            pairs_.push_back({int(s), int(i), int(j)});
        }
      }
    }
  }

  bool empty() const { return pairs_.empty(); }
  std::size_t size() const { return pairs_.size(); }

  SampledPair sample(Rng& rng) const {
    if (pairs_.empty())
      throw NoAdmissiblePair("sample_image_pair: no pair satisfies the constraint");
    SampledPair p = pairs_[rng.uniform_index(pairs_.size())];
    if (rng.bernoulli(0.5)) std::swap(p.frame_a, p.frame_b);  // A/B role flip
    return p;
  }

 private:
  std::vector<SampledPair> pairs_;
};

inline SampledPair sample_image_pair(const std::vector<Scene>& dataset,
                                     const PairConstraint& constraint, Rng& rng) {
  if (dataset.empty()) throw NoAdmissiblePair("sample_image_pair: empty dataset");
  return PairIndex(dataset, constraint).sample(rng);
}

}  // namespace pixdesc
