#pragma once

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "pixdesc/geometry.hpp"

namespace testutil {

using namespace pixdesc;

inline std::string golden_dir() {
  const char* env = std::getenv("PIXDESC_GOLDEN_DIR");
  return env ? env : "tests/golden";
}

// Compares `actual` against tests/golden/<name>; UPDATE_GOLDEN=1 rewrites
// the file instead.
inline bool check_golden(const std::string& name, const std::string& actual,
                         std::string* expected_out = nullptr) {
  const std::string path = golden_dir() + "/" + name;
  if (std::getenv("UPDATE_GOLDEN")) {
    std::ofstream os(path, std::ios::binary);
    os << actual;
    return true;
  }
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    if (expected_out) *expected_out = "<missing golden file " + path + ">";
    return false;
  }
  std::stringstream ss;
  ss << is.rdbuf();
  if (expected_out) *expected_out = ss.str();
  return ss.str() == actual;
}

// Analytic RGBD frame of the infinite ground plane z=0: depth is the exact
// ray-plane distance in camera z, no renderer involved.
inline RgbdFrame make_plane_frame(const Pose& pose, const CameraIntrinsics& k) {
  RgbdFrame f;
  f.rgb = ImageU8(k.width, k.height, 3, 128);
  f.depth = DepthMap(k.width, k.height, 0.f);
  f.pose = pose;
  f.intrinsics = k;
  const Vec3 origin = pose.camera_center();
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      Vec3 dir = pose.rotation * Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      if (dir.z() > -1e-12) continue;
      double t = -origin.z() / dir.z();
      if (t > 1e-9) f.depth.at(u, v) = float(t);
    }
  }
  return f;
}

// Frame whose depth raster is a constant fronto-parallel wall at z = depth.
inline RgbdFrame make_wall_frame(const Pose& pose, const CameraIntrinsics& k,
                                 float depth) {
  RgbdFrame f;
  f.rgb = ImageU8(k.width, k.height, 3, 100);
  f.depth = DepthMap(k.width, k.height, depth);
  f.pose = pose;
  f.intrinsics = k;
  return f;
}

}  // namespace testutil

#include "pixdesc/scenegen.hpp"

namespace testutil {

// ---------------------------------------------------------------------------
// Analytic visibility oracle: instead of the raster depth-lookup route, a
// world point is declared visible in B by re-casting a ray from B's camera
// center and checking nothing is hit in front of it.
// ---------------------------------------------------------------------------

inline bool oracle_visible(const Vec3& world, const RgbdFrame& frame_b,
                           const std::vector<ObjectSpec>& objects,
                           const PlaneSpec& plane) {
  Vec3 cam = frame_b.pose.apply_inverse(world);
  if (cam.z() <= 1e-9) return false;
  const auto& k = frame_b.intrinsics;
  double u = k.fx * cam.x() / cam.z() + k.cx;
  double v = k.fy * cam.y() / cam.z() + k.cy;
  if (u < 0 || u > k.width - 1 || v < 0 || v > k.height - 1) return false;
  Vec3 dir = world - frame_b.pose.camera_center();  // t = 1 at the point itself
  auto hit = intersect_scene(frame_b.pose.camera_center(), dir, objects, plane);
  return hit && hit->t > 1.0 - 1e-7;
}

// Oracle counterpart of compute_validity_mask (no rasterization anywhere).
inline std::vector<std::uint8_t> oracle_visibility_mask(
    const RgbdFrame& frame_a, const RgbdFrame& frame_b,
    const std::vector<ObjectSpec>& objects, const PlaneSpec& plane) {
  const int w = frame_a.width(), h = frame_a.height();
  std::vector<std::uint8_t> mask(std::size_t(w) * h, 0);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      if (!frame_a.depth.valid_at(u, v)) continue;
      Vec3 world = frame_a.pose.apply(
          backproject(u, v, double(frame_a.depth.at(u, v)), frame_a.intrinsics));
      if (oracle_visible(world, frame_b, objects, plane))
        mask[std::size_t(v) * w + u] = 1;
    }
  return mask;
}

// Pixels within `dilate` of an id change, a validity change, or a depth jump
// (silhouettes). Used to excuse rounding disagreements near boundaries.
inline std::vector<std::uint8_t> silhouette_band(const RgbdFrame& frame,
                                                 const IdMask& ids,
                                                 double depth_jump = 0.012,
                                                 int dilate = 1) {
  const int w = frame.width(), h = frame.height();
  std::vector<std::uint8_t> edge(std::size_t(w) * h, 0);
  auto mark = [&](int u, int v) { edge[std::size_t(v) * w + u] = 1; };
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const int du[2] = {1, 0}, dv[2] = {0, 1};
      for (int n = 0; n < 2; ++n) {
        int u2 = u + du[n], v2 = v + dv[n];
        if (u2 >= w || v2 >= h) continue;
        bool diff = ids.at(u, v) != ids.at(u2, v2) ||
                    frame.depth.valid_at(u, v) != frame.depth.valid_at(u2, v2) ||
                    std::abs(frame.depth.at(u, v) - frame.depth.at(u2, v2)) >
                        depth_jump;
        if (diff) {
          mark(u, v);
          mark(u2, v2);
        }
      }
    }
  std::vector<std::uint8_t> out = edge;
  for (int r = 0; r < dilate; ++r) {
    std::vector<std::uint8_t> next = out;
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        if (out[std::size_t(v) * w + u]) continue;
        for (int dy = -1; dy <= 1 && !next[std::size_t(v) * w + u]; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int u2 = u + dx, v2 = v + dy;
            if (u2 < 0 || u2 >= w || v2 < 0 || v2 >= h) continue;
            if (out[std::size_t(v2) * w + u2]) {
              next[std::size_t(v) * w + u] = 1;
              break;
            }
          }
      }
    out.swap(next);
  }
  return out;
}

struct MaskAgreement {
  std::size_t total = 0;
  std::size_t agree = 0;
  std::size_t unexcused = 0;  // disagreements outside both silhouette bands
};

inline MaskAgreement compare_mask_to_oracle(const RgbdFrame& frame_a,
                                            const RgbdFrame& frame_b,
                                            const IdMask& ids_a, const IdMask& ids_b,
                                            const std::vector<ObjectSpec>& objects,
                                            const PlaneSpec& plane,
                                            double occlusion_tol = kDefaultOcclusionTol) {
  ValidityMask vm = compute_validity_mask(frame_a, frame_b, occlusion_tol);
  std::vector<std::uint8_t> oracle =
      oracle_visibility_mask(frame_a, frame_b, objects, plane);
  std::vector<std::uint8_t> band_a = silhouette_band(frame_a, ids_a);
  std::vector<std::uint8_t> band_b = silhouette_band(frame_b, ids_b);
  const int w = frame_a.width(), h = frame_a.height();
  MaskAgreement r;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      ++r.total;
      bool got = vm.at(u, v);
      bool want = oracle[std::size_t(v) * w + u] != 0;
      if (got == want) {
        ++r.agree;
        continue;
      }
      bool excused = band_a[std::size_t(v) * w + u] != 0;
      if (!excused && frame_a.depth.valid_at(u, v)) {
        // check the B-side band at the mapped location
        Vec3 world = frame_a.pose.apply(backproject(
            u, v, double(frame_a.depth.at(u, v)), frame_a.intrinsics));
        Vec3 cam = frame_b.pose.apply_inverse(world);
        if (cam.z() > 1e-9) {
          const auto& k = frame_b.intrinsics;
          int ub = iround(k.fx * cam.x() / cam.z() + k.cx);
          int vb = iround(k.fy * cam.y() / cam.z() + k.cy);
          if (ub >= 0 && ub < w && vb >= 0 && vb < h)
            excused = band_b[std::size_t(vb) * w + ub] != 0;
        }
      }
      if (!excused) ++r.unexcused;
    }
  return r;
}

}  // namespace testutil
