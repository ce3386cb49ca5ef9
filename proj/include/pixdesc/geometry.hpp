#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "pixdesc/common.hpp"

namespace pixdesc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// ---------------------------------------------------------------------------
// Camera model
// ---------------------------------------------------------------------------

struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const {
    if (fx <= 0 || fy <= 0) throw ConfigError("intrinsics: focal lengths must be positive");
    if (cx < 0 || cx >= width || cy < 0 || cy >= height)
      throw ConfigError("intrinsics: principal point outside image");
  }
};

// world-from-camera transform
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }

  Vec3 apply(const Vec3& p_cam) const { return rotation * p_cam + translation; }
  Vec3 apply_inverse(const Vec3& p_world) const {
    return rotation.transpose() * (p_world - translation);
  }
  Pose inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }
  Pose compose(const Pose& rhs) const {  // this ∘ rhs
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
  Vec3 camera_center() const { return translation; }

  bool orthonormal(double tol = 1e-9) const {
    Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
    return err.cwiseAbs().maxCoeff() <= tol && rotation.determinant() > 0;
  }
  void validate(double tol = 1e-9) const {
    if (!orthonormal(tol)) throw DataError("pose: rotation not orthonormal (det +1)");
  }
};

// Relative motion between two camera poses.
struct PoseDelta {
  double angle_rad = 0;
  double translation_m = 0;
};

inline PoseDelta pose_delta(const Pose& a, const Pose& b) {
  Mat3 r = a.rotation.transpose() * b.rotation;
  double c = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  return {std::acos(c), (a.translation - b.translation).norm()};
}

struct RgbdFrame {
  ImageU8 rgb;
  DepthMap depth;
  Pose pose;
  CameraIntrinsics intrinsics;

  int width() const { return depth.width; }
  int height() const { return depth.height; }

  void validate() const {
    if (rgb.width != depth.width || rgb.height != depth.height)
      throw DimensionMismatch("frame: rgb and depth dimensions differ");
    if (rgb.channels != 3) throw DimensionMismatch("frame: rgb must have 3 channels");
    for (float d : depth.data)
      if (std::isfinite(d) && d < 0.f) throw DataError("frame: negative depth");
    pose.validate();
    intrinsics.validate();
  }
};

// ---------------------------------------------------------------------------
// Projection
// ---------------------------------------------------------------------------

inline Vec2 project(const Vec3& point_cam, const CameraIntrinsics& k) {
  if (point_cam.z() <= 1e-9) throw NonPositiveDepth("project: z <= 0");
  return {k.fx * point_cam.x() / point_cam.z() + k.cx,
          k.fy * point_cam.y() / point_cam.z() + k.cy};
}

inline Vec3 backproject(double u, double v, double depth, const CameraIntrinsics& k) {
  if (!std::isfinite(depth) || depth <= 0) throw InvalidDepth("backproject: invalid depth");
  return {(u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth};
}

inline Vec3 backproject(Pixel p, double depth, const CameraIntrinsics& k) {
  return backproject(double(p.u), double(p.v), depth, k);
}

struct Reprojection {
  Vec2 pixel;      // real-valued target pixel in B
  double depth;    // z the world point has in B's camera frame
};

namespace detail {

// Non-throwing reprojection core shared by the per-pixel mask sweep.
inline std::optional<Reprojection> reproject_point(const Vec3& world,
                                                   const RgbdFrame& frame_b) {
  Vec3 cam_b = frame_b.pose.apply_inverse(world);
  if (cam_b.z() <= 1e-9) return std::nullopt;
  const auto& k = frame_b.intrinsics;
  return Reprojection{{k.fx * cam_b.x() / cam_b.z() + k.cx,
                       k.fy * cam_b.y() / cam_b.z() + k.cy},
                      cam_b.z()};
}

}  // namespace detail

inline Reprojection reproject_pixel(Pixel p, const RgbdFrame& frame_a,
                                    const RgbdFrame& frame_b) {
  if (!frame_a.depth.inside(p.u, p.v) || !frame_a.depth.valid_at(p.u, p.v))
    throw InvalidDepth("reproject_pixel: no valid depth at source pixel");
  Vec3 world = frame_a.pose.apply(
      backproject(p, double(frame_a.depth.at(p.u, p.v)), frame_a.intrinsics));
  auto r = detail::reproject_point(world, frame_b);
  if (!r) throw BehindCamera("reproject_pixel: world point behind target camera");
  return *r;
}

// ---------------------------------------------------------------------------
// Validity mask
// ---------------------------------------------------------------------------

// Boolean raster over image A plus, where true, the real-valued target pixel
// in image B that the same world point projects to.
struct ValidityMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> mask;
  std::vector<Eigen::Vector2f> mapping;

  ValidityMask() = default;
  ValidityMask(int w, int h)
      : width(w), height(h), mask(std::size_t(w) * h, 0),
        mapping(std::size_t(w) * h, Eigen::Vector2f::Zero()) {}

  bool at(int u, int v) const { return mask[std::size_t(v) * width + u] != 0; }
  Eigen::Vector2f map_at(int u, int v) const { return mapping[std::size_t(v) * width + u]; }

  std::size_t count_valid() const {
    std::size_t n = 0;
    for (auto m : mask) n += m != 0;
    return n;
  }
};

inline constexpr double kDefaultOcclusionTol = 0.005;  // meters

// Mask true iff depth at pA is valid, the reprojection lands inside B, and
// B's stored depth matches the expected depth within occlusion_tol. The
// primary lookup is the nearest pixel; when that fails, the bilinearly
// interpolated depth gets a second chance. The nearest-pixel check keeps
// silhouettes from blending; the interpolated check absorbs the slope error
// on surfaces seen at grazing angles, which otherwise rejects whole faces.
inline ValidityMask compute_validity_mask(const RgbdFrame& frame_a,
                                          const RgbdFrame& frame_b,
                                          double occlusion_tol = kDefaultOcclusionTol) {
  if (frame_a.width() != frame_b.width() || frame_a.height() != frame_b.height())
    throw DimensionMismatch("compute_validity_mask: frame sizes differ");
  const int w = frame_a.width(), h = frame_a.height();
  ValidityMask vm(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (!frame_a.depth.valid_at(u, v)) continue;
      Vec3 world = frame_a.pose.apply(
          backproject(u, v, double(frame_a.depth.at(u, v)), frame_a.intrinsics));
      auto r = detail::reproject_point(world, frame_b);
      if (!r) continue;
      // epsilon pad, then clamp: exact-border reprojections jitter by ~1e-14
      constexpr double eps = 1e-9;
      double ub = r->pixel.x(), vb = r->pixel.y();
      if (ub < -eps || ub > w - 1 + eps || vb < -eps || vb > h - 1 + eps) continue;
      ub = std::clamp(ub, 0.0, double(w - 1));
      vb = std::clamp(vb, 0.0, double(h - 1));
      int ui = iround(ub), vi = iround(vb);
      if (!frame_b.depth.valid_at(ui, vi)) continue;
      bool visible =
          std::abs(double(frame_b.depth.at(ui, vi)) - r->depth) <= occlusion_tol;
      if (!visible) {
        const int x0 = int(ub), y0 = int(vb);
        const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
        if (frame_b.depth.valid_at(x0, y0) && frame_b.depth.valid_at(x1, y0) &&
            frame_b.depth.valid_at(x0, y1) && frame_b.depth.valid_at(x1, y1)) {
          const double tx = ub - x0, ty = vb - y0;
          const double interp =
              (1 - ty) * ((1 - tx) * frame_b.depth.at(x0, y0) +
                          tx * frame_b.depth.at(x1, y0)) +
              ty * ((1 - tx) * frame_b.depth.at(x0, y1) +
                    tx * frame_b.depth.at(x1, y1));
          visible = std::abs(interp - r->depth) <= occlusion_tol;
        }
      }
      if (!visible) continue;
      std::size_t idx = std::size_t(v) * w + u;
      vm.mask[idx] = 1;
      vm.mapping[idx] = Eigen::Vector2f(float(ub), float(vb));
    }
  }
  return vm;
}

// Uniform sample of min(n, #valid) correspondences without replacement.
// Mapping values are rounded to the nearest integer pixel.
inline std::vector<PixelPair> sample_correspondences(const ValidityMask& vm, int n,
                                                     Rng& rng) {
  if (n < 1) throw ConfigError("sample_correspondences: n must be >= 1");
  std::vector<std::int32_t> valid;
  valid.reserve(vm.mask.size() / 4);
  for (std::size_t i = 0; i < vm.mask.size(); ++i)
    if (vm.mask[i]) valid.push_back(std::int32_t(i));
  if (valid.empty())
    throw NoValidCorrespondences("sample_correspondences: mask is all false");

  const std::size_t take = std::min<std::size_t>(std::size_t(n), valid.size());
  // Partial Fisher-Yates; prefix of `valid` becomes the sample.
  for (std::size_t i = 0; i < take; ++i) {
    std::size_t j = i + rng.uniform_index(valid.size() - i);
    std::swap(valid[i], valid[j]);
  }
  std::vector<PixelPair> pairs;
  pairs.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    int idx = valid[i];
    Pixel pa{idx % vm.width, idx / vm.width};
    Eigen::Vector2f m = vm.mapping[std::size_t(idx)];
    pairs.push_back({pa, Pixel{iround(m.x()), iround(m.y())}});
  }
  return pairs;
}

}  // namespace pixdesc
