#pragma once

#include <Eigen/Dense>
#include <sstream>
#include <variant>
#include <vector>

#include "pixdesc/common.hpp"

namespace pixdesc {

// ---------------------------------------------------------------------------
// Augmentation steps. Geometric steps carry an exact pixel-coordinate
// homography; photometric steps contribute identity to the coordinate map.
// Canonical application order: resize_crop, perspective, affine, hflip,
// vflip, rotation, then blur, color_jitter, grayscale.
// ---------------------------------------------------------------------------

struct ResizeCropParams {
  double ox = 0, oy = 0;  // crop origin, pixels
  double cw = 0, ch = 0;  // crop size, pixels
};
struct PerspectiveParams {
  // displaced positions of the 4 corners: tl, tr, br, bl
  double corners[8] = {0};
};
struct AffineParams {
  double angle_rad = 0;
  double tx = 0, ty = 0;  // pixels
  double shear_rad = 0;   // x shear
};
struct HFlipParams {};
struct VFlipParams {};
struct RotationParams {
  double angle_rad = 0;
};
struct BlurParams {
  int ksize = 5;
  double sigma = 1.0;
};
struct ColorJitterParams {
  double brightness = 1, contrast = 1, saturation = 1;
  double hue = 0;  // fraction of the color wheel
};
struct GrayscaleParams {};

using AugStep =
    std::variant<ResizeCropParams, PerspectiveParams, AffineParams, HFlipParams,
                 VFlipParams, RotationParams, BlurParams, ColorJitterParams,
                 GrayscaleParams>;

inline bool is_geometric(const AugStep& s) {
  return s.index() <= 5;  // everything up to RotationParams
}

namespace hom {

// Homography mapping 4 source points to 4 destination points.
inline Eigen::Matrix3d from_corners(const double src[8], const double dst[8]) {
  Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    double x = src[2 * i], y = src[2 * i + 1];
    double u = dst[2 * i], v = dst[2 * i + 1];
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  Eigen::Matrix<double, 8, 1> h = a.fullPivLu().solve(b);
  Eigen::Matrix3d m;
  m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  return m;
}

inline Eigen::Vector2d apply(const Eigen::Matrix3d& h, double x, double y) {
  Eigen::Vector3d p = h * Eigen::Vector3d(x, y, 1.0);
  return {p.x() / p.z(), p.y() / p.z()};
}

}  // namespace hom

// Forward pixel map of one step on a WxH image.
inline Eigen::Matrix3d step_coordinate_map(const AugStep& step, int w, int h) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  if (auto* rc = std::get_if<ResizeCropParams>(&step)) {
    // crop then scale back to full size, pixel-center convention
    const double sx = w / rc->cw, sy = h / rc->ch;
    m(0, 0) = sx;
    m(1, 1) = sy;
    m(0, 2) = sx * (0.5 - rc->ox) - 0.5;
    m(1, 2) = sy * (0.5 - rc->oy) - 0.5;
  } else if (auto* pp = std::get_if<PerspectiveParams>(&step)) {
    const double src[8] = {0, 0, double(w - 1), 0, double(w - 1), double(h - 1),
                           0,  double(h - 1)};
    m = hom::from_corners(src, pp->corners);
  } else if (auto* af = std::get_if<AffineParams>(&step)) {
    Eigen::Matrix2d rot;
    rot << std::cos(af->angle_rad), -std::sin(af->angle_rad), std::sin(af->angle_rad),
        std::cos(af->angle_rad);
    Eigen::Matrix2d shear = Eigen::Matrix2d::Identity();
    shear(0, 1) = std::tan(af->shear_rad);
    Eigen::Matrix2d lin = rot * shear;
    m.block<2, 2>(0, 0) = lin;
    Eigen::Vector2d c(cx, cy);
    Eigen::Vector2d t = c - lin * c + Eigen::Vector2d(af->tx, af->ty);
    m(0, 2) = t.x();
    m(1, 2) = t.y();
  } else if (std::get_if<HFlipParams>(&step)) {
    m(0, 0) = -1;
    m(0, 2) = w - 1;
  } else if (std::get_if<VFlipParams>(&step)) {
    m(1, 1) = -1;
    m(1, 2) = h - 1;
  } else if (auto* ro = std::get_if<RotationParams>(&step)) {
    Eigen::Matrix2d rot;
    rot << std::cos(ro->angle_rad), -std::sin(ro->angle_rad), std::sin(ro->angle_rad),
        std::cos(ro->angle_rad);
    m.block<2, 2>(0, 0) = rot;
    Eigen::Vector2d c(cx, cy);
    Eigen::Vector2d t = c - rot * c;
    m(0, 2) = t.x();
    m(1, 2) = t.y();
  }
  return m;
}

struct AugmentationSpec {
  int width = 0, height = 0;
  std::vector<AugStep> steps;
  Eigen::Matrix3d forward_map = Eigen::Matrix3d::Identity();

  bool has_geometric() const {
    for (const auto& s : steps)
      if (is_geometric(s)) return true;
    return false;
  }

  static AugmentationSpec identity(int w, int h) {
    AugmentationSpec s;
    s.width = w;
    s.height = h;
    return s;
  }

  void rebuild_map() {
    forward_map = Eigen::Matrix3d::Identity();
    for (const auto& s : steps)
      if (is_geometric(s))
        forward_map = step_coordinate_map(s, width, height) * forward_map;
  }

  std::string to_string() const;
};

// ---------------------------------------------------------------------------
// Configuration and sampling
// ---------------------------------------------------------------------------

enum class ApplyTo { AOnly, Both };

struct AugmentConfig {
  bool enabled = true;
  ApplyTo apply_to = ApplyTo::AOnly;

  bool resize_crop = true;
  double resize_crop_prob = 0.5;
  double resize_crop_scale_min = 0.6, resize_crop_scale_max = 1.0;

  bool perspective = true;
  double perspective_prob = 0.5;
  double perspective_distortion = 0.5;

  bool affine = true;
  double affine_prob = 0.5;
  double affine_rot_deg = 15.0;
  double affine_translate = 0.1;   // fraction of image size
  double affine_shear_deg = 10.0;

  bool hflip = true;
  double hflip_prob = 0.5;
  bool vflip = true;
  double vflip_prob = 0.5;

  bool rotation = true;
  double rotation_prob = 0.5;
  double rotation_deg = 180.0;

  bool blur = true;
  double blur_prob = 0.5;
  int blur_kernel = 5;
  double blur_sigma_min = 0.1, blur_sigma_max = 2.0;

  bool color_jitter = true;
  double color_jitter_prob = 0.8;
  double cj_brightness = 0.4, cj_contrast = 0.4, cj_saturation = 0.4;
  double cj_hue = 0.1;

  bool grayscale = true;
  double grayscale_prob = 0.1;

  void validate() const {
    for (double p : {resize_crop_prob, perspective_prob, affine_prob, hflip_prob,
                     vflip_prob, rotation_prob, blur_prob, color_jitter_prob,
                     grayscale_prob})
      if (p < 0 || p > 1) throw ConfigError("augment: probability outside [0,1]");
  }
};

inline AugmentationSpec sample_augmentation_sequence(const AugmentConfig& cfg, int w,
                                                     int h, Rng& rng) {
  cfg.validate();
  AugmentationSpec spec = AugmentationSpec::identity(w, h);
  if (!cfg.enabled) return spec;

  if (cfg.resize_crop && rng.bernoulli(cfg.resize_crop_prob)) {
    ResizeCropParams p;
    double s = rng.uniform(cfg.resize_crop_scale_min, cfg.resize_crop_scale_max);
    p.cw = std::max(2.0, std::floor(w * s));
    p.ch = std::max(2.0, std::floor(h * s));
    p.ox = rng.uniform(0.0, w - p.cw);
    p.oy = rng.uniform(0.0, h - p.ch);
    spec.steps.emplace_back(p);
  }
  if (cfg.perspective && rng.bernoulli(cfg.perspective_prob)) {
    PerspectiveParams p;
    const double hw = cfg.perspective_distortion * w / 2.0;
    const double hh = cfg.perspective_distortion * h / 2.0;
    const double cornersx[4] = {0, double(w - 1), double(w - 1), 0};
    const double cornersy[4] = {0, 0, double(h - 1), double(h - 1)};
    const double sx[4] = {1, -1, -1, 1};  // displacement pushes corners inward
    const double sy[4] = {1, 1, -1, -1};
    for (int i = 0; i < 4; ++i) {
      p.corners[2 * i] = cornersx[i] + sx[i] * rng.uniform(0.0, hw);
      p.corners[2 * i + 1] = cornersy[i] + sy[i] * rng.uniform(0.0, hh);
    }
    spec.steps.emplace_back(p);
  }
  if (cfg.affine && rng.bernoulli(cfg.affine_prob)) {
    AffineParams p;
    p.angle_rad = rng.uniform(-cfg.affine_rot_deg, cfg.affine_rot_deg) * M_PI / 180.0;
    p.tx = rng.uniform(-cfg.affine_translate, cfg.affine_translate) * w;
    p.ty = rng.uniform(-cfg.affine_translate, cfg.affine_translate) * h;
    p.shear_rad = rng.uniform(-cfg.affine_shear_deg, cfg.affine_shear_deg) * M_PI / 180.0;
    spec.steps.emplace_back(p);
  }
  if (cfg.hflip && rng.bernoulli(cfg.hflip_prob)) spec.steps.emplace_back(HFlipParams{});
  if (cfg.vflip && rng.bernoulli(cfg.vflip_prob)) spec.steps.emplace_back(VFlipParams{});
  if (cfg.rotation && rng.bernoulli(cfg.rotation_prob)) {
    RotationParams p;
    p.angle_rad = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg) * M_PI / 180.0;
    spec.steps.emplace_back(p);
  }
  if (cfg.blur && rng.bernoulli(cfg.blur_prob)) {
    BlurParams p;
    p.ksize = cfg.blur_kernel;
    p.sigma = rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max);
    spec.steps.emplace_back(p);
  }
  if (cfg.color_jitter && rng.bernoulli(cfg.color_jitter_prob)) {
    ColorJitterParams p;
    p.brightness = rng.uniform(std::max(0.0, 1 - cfg.cj_brightness), 1 + cfg.cj_brightness);
    p.contrast = rng.uniform(std::max(0.0, 1 - cfg.cj_contrast), 1 + cfg.cj_contrast);
    p.saturation = rng.uniform(std::max(0.0, 1 - cfg.cj_saturation), 1 + cfg.cj_saturation);
    p.hue = rng.uniform(-cfg.cj_hue, cfg.cj_hue);
    spec.steps.emplace_back(p);
  }
  if (cfg.grayscale && rng.bernoulli(cfg.grayscale_prob))
    spec.steps.emplace_back(GrayscaleParams{});

  spec.rebuild_map();
  return spec;
}

// ---------------------------------------------------------------------------
// Application
// ---------------------------------------------------------------------------

namespace detail {

inline void bilinear_fetch(const std::vector<float>& src, int w, int h, int c,
                           double x, double y, float* out) {
  const int x0 = int(std::floor(x)), y0 = int(std::floor(y));
  const double tx = x - x0, ty = y - y0;
  for (int k = 0; k < c; ++k) out[k] = 0.f;
  const double wgt[4] = {(1 - ty) * (1 - tx), (1 - ty) * tx, ty * (1 - tx), ty * tx};
  const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
  for (int i = 0; i < 4; ++i) {
    if (xs[i] < 0 || xs[i] >= w || ys[i] < 0 || ys[i] >= h) continue;  // black fill
    const float* p = &src[(std::size_t(ys[i]) * w + xs[i]) * c];
    for (int k = 0; k < c; ++k) out[k] += float(wgt[i]) * p[k];
  }
}

inline void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
  float mx = std::max({r, g, b}), mn = std::min({r, g, b});
  v = mx;
  float d = mx - mn;
  s = mx <= 0.f ? 0.f : d / mx;
  if (d <= 0.f) {
    h = 0.f;
    return;
  }
  if (mx == r)
    h = std::fmod((g - b) / d, 6.f);
  else if (mx == g)
    h = (b - r) / d + 2.f;
  else
    h = (r - g) / d + 4.f;
  h /= 6.f;
  if (h < 0.f) h += 1.f;
}

inline void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
  float hp = h * 6.f;
  int i = int(hp) % 6;
  float f = hp - std::floor(hp);
  float p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

inline float luma(const float* px) {
  return 0.299f * px[0] + 0.587f * px[1] + 0.114f * px[2];
}

}  // namespace detail

// Steps run in order; the geometric block resamples exactly once through the
// composed map (their product), photometric steps then operate in place.
inline ImageU8 apply_augmentation(const ImageU8& image, const AugmentationSpec& spec) {
  if (image.width == 0 || image.height == 0)
    throw DimensionMismatch("apply_augmentation: empty image");
  if (image.width != spec.width || image.height != spec.height)
    throw DimensionMismatch("apply_augmentation: spec built for another size");
  const int w = image.width, h = image.height, c = image.channels;

  std::vector<float> buf(image.data.begin(), image.data.end());
  if (spec.has_geometric()) {
    Eigen::Matrix3d inv = spec.forward_map.inverse();
    std::vector<float> warped(buf.size(), 0.f);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        Eigen::Vector2d srcp = hom::apply(inv, double(x), double(y));
        detail::bilinear_fetch(buf, w, h, c, srcp.x(), srcp.y(),
                               &warped[(std::size_t(y) * w + x) * c]);
      }
    }
    buf.swap(warped);
  }

  for (const auto& step : spec.steps) {
    if (auto* bl = std::get_if<BlurParams>(&step)) {
      const int half = bl->ksize / 2;
      std::vector<float> kernel(std::size_t(bl->ksize));
      float sum = 0;
      for (int i = 0; i < bl->ksize; ++i) {
        double d = i - half;
        kernel[std::size_t(i)] = float(std::exp(-d * d / (2 * bl->sigma * bl->sigma)));
        sum += kernel[std::size_t(i)];
      }
      for (auto& kv : kernel) kv /= sum;
      std::vector<float> tmp(buf.size());
      for (int y = 0; y < h; ++y)  // horizontal pass, replicate borders
        for (int x = 0; x < w; ++x)
          for (int k = 0; k < c; ++k) {
            float acc = 0;
            for (int i = -half; i <= half; ++i) {
              int xi = std::clamp(x + i, 0, w - 1);
              acc += kernel[std::size_t(i + half)] *
                     buf[(std::size_t(y) * w + xi) * c + k];
            }
            tmp[(std::size_t(y) * w + x) * c + k] = acc;
          }
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          for (int k = 0; k < c; ++k) {
            float acc = 0;
            for (int i = -half; i <= half; ++i) {
              int yi = std::clamp(y + i, 0, h - 1);
              acc += kernel[std::size_t(i + half)] *
                     tmp[(std::size_t(yi) * w + x) * c + k];
            }
            buf[(std::size_t(y) * w + x) * c + k] = acc;
          }
    } else if (auto* cj = std::get_if<ColorJitterParams>(&step)) {
      const std::size_t n = std::size_t(w) * h;
      for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < c; ++k)
          buf[i * c + k] = std::clamp(buf[i * c + k] * float(cj->brightness), 0.f, 255.f);
      double mean = 0;
      for (std::size_t i = 0; i < n; ++i) mean += detail::luma(&buf[i * c]);
      mean /= double(n);
      for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < c; ++k)
          buf[i * c + k] = std::clamp(
              float(mean + cj->contrast * (buf[i * c + k] - mean)), 0.f, 255.f);
      for (std::size_t i = 0; i < n; ++i) {
        float l = detail::luma(&buf[i * c]);
        for (int k = 0; k < c; ++k)
          buf[i * c + k] =
              std::clamp(float(l + cj->saturation * (buf[i * c + k] - l)), 0.f, 255.f);
      }
      if (cj->hue != 0) {
        for (std::size_t i = 0; i < n; ++i) {
          float hh, ss, vv;
          detail::rgb_to_hsv(buf[i * c] / 255.f, buf[i * c + 1] / 255.f,
                             buf[i * c + 2] / 255.f, hh, ss, vv);
          hh = std::fmod(hh + float(cj->hue) + 1.f, 1.f);
          float r, g, b;
          detail::hsv_to_rgb(hh, ss, vv, r, g, b);
          buf[i * c] = r * 255.f;
          buf[i * c + 1] = g * 255.f;
          buf[i * c + 2] = b * 255.f;
        }
      }
    } else if (std::get_if<GrayscaleParams>(&step)) {
      const std::size_t n = std::size_t(w) * h;
      for (std::size_t i = 0; i < n; ++i) {
        float l = detail::luma(&buf[i * c]);
        for (int k = 0; k < c; ++k) buf[i * c + k] = l;
      }
    }
  }

  ImageU8 out(w, h, c);
  for (std::size_t i = 0; i < buf.size(); ++i)
    out.data[i] = std::uint8_t(std::clamp(int(std::lround(buf[i])), 0, 255));
  return out;
}

struct RemappedPairs {
  std::vector<PixelPair> pairs;       // same length as input
  std::vector<std::uint8_t> valid;    // 1 where both endpoints stayed in bounds
};

// Pushes pA through specA's coordinate map and pB through specB's.
// Out-of-bounds endpoints invalidate the pair; coordinates round to the
// nearest pixel.
inline RemappedPairs remap_correspondences(const std::vector<PixelPair>& pairs,
                                           const AugmentationSpec& spec_a,
                                           const AugmentationSpec& spec_b) {
  RemappedPairs out;
  out.pairs.reserve(pairs.size());
  out.valid.reserve(pairs.size());
  for (const PixelPair& pr : pairs) {
    Eigen::Vector2d a = hom::apply(spec_a.forward_map, pr.a.u, pr.a.v);
    Eigen::Vector2d b = hom::apply(spec_b.forward_map, pr.b.u, pr.b.v);
    Pixel pa{iround(a.x()), iround(a.y())};
    Pixel pb{iround(b.x()), iround(b.y())};
    bool ok = a.x() >= 0 && a.x() <= spec_a.width - 1 && a.y() >= 0 &&
              a.y() <= spec_a.height - 1 && b.x() >= 0 && b.x() <= spec_b.width - 1 &&
              b.y() >= 0 && b.y() <= spec_b.height - 1;
    out.pairs.push_back({pa, pb});
    out.valid.push_back(ok ? 1 : 0);
  }
  return out;
}

// ---------------------------------------------------------------------------

inline std::string AugmentationSpec::to_string() const {
  std::ostringstream os;
  os.precision(17);
  os << "size " << width << "x" << height << "\n";
  for (const auto& s : steps) {
    if (auto* rc = std::get_if<ResizeCropParams>(&s))
      os << "resize_crop ox=" << rc->ox << " oy=" << rc->oy << " cw=" << rc->cw
         << " ch=" << rc->ch << "\n";
    else if (auto* pp = std::get_if<PerspectiveParams>(&s)) {
      os << "perspective";
      for (double v : pp->corners) os << " " << v;
      os << "\n";
    } else if (auto* af = std::get_if<AffineParams>(&s))
      os << "affine angle=" << af->angle_rad << " tx=" << af->tx << " ty=" << af->ty
         << " shear=" << af->shear_rad << "\n";
    else if (std::get_if<HFlipParams>(&s))
      os << "hflip\n";
    else if (std::get_if<VFlipParams>(&s))
      os << "vflip\n";
    else if (auto* ro = std::get_if<RotationParams>(&s))
      os << "rotation angle=" << ro->angle_rad << "\n";
    else if (auto* bl = std::get_if<BlurParams>(&s))
      os << "blur k=" << bl->ksize << " sigma=" << bl->sigma << "\n";
    else if (auto* cj = std::get_if<ColorJitterParams>(&s))
      os << "color_jitter b=" << cj->brightness << " c=" << cj->contrast
         << " s=" << cj->saturation << " h=" << cj->hue << "\n";
    else if (std::get_if<GrayscaleParams>(&s))
      os << "grayscale\n";
  }
  return os.str();
}

}  // namespace pixdesc
