#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pixdesc {

// ---------------------------------------------------------------------------
// Errors. Everything derives from Error so callers can catch coarsely; the
// CLI maps ConfigError -> exit 2 and DataError -> exit 3.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };

struct NonPositiveDepth : Error { using Error::Error; };
struct InvalidDepth : Error { using Error::Error; };
struct BehindCamera : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct NoValidCorrespondences : DataError { using DataError::DataError; };
struct PlacementFailure : ConfigError { using ConfigError::ConfigError; };
struct NoAdmissiblePair : DataError { using DataError::DataError; };
struct ShapeMismatch : Error { using Error::Error; };
struct GraphConsumed : Error { using Error::Error; };
struct DegenerateVector : Error { using Error::Error; };
struct OutOfBounds : Error { using Error::Error; };
struct EmptySet : Error { using Error::Error; };
struct DegenerateAxis : Error { using Error::Error; };
struct ParseError : DataError { using DataError::DataError; };
struct ChecksumMismatch : DataError { using DataError::DataError; };

// ---------------------------------------------------------------------------
// Deterministic random numbers. mt19937_64 is bit-stable by the standard;
// we derive uniforms/normals ourselves instead of going through the
// implementation-defined std distributions, so golden files survive
// libstdc++ upgrades.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Stable substream seed from (root seed, stream tag, index).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t index = 0) {
  return splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ index);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(splitmix64(seed ^ 0xda3e39cb94b95bdbull)) {}

  std::uint64_t next_u64() {
    // xorshift* keeps the generator tiny and header-only.
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545f4914f6cdd1dull;
  }

  // Uniform in [0,1) with 53-bit resolution.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be >= 1.
  std::uint64_t uniform_index(std::uint64_t n) {
    // Modulo bias is < 2^-53 of the range for any n we ever use.
    return std::uint64_t(uniform() * double(n)) % n;
  }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + int(uniform_index(std::uint64_t(hi - lo + 1)));
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    // Box-Muller, one value per call (cached pair dropped for determinism
    // under interleaved substream use).
    double u1 = std::max(uniform(), 0x1.0p-60);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Rng fork(std::uint64_t stream, std::uint64_t index = 0) {
    return Rng(mix_seed(next_u64(), stream, index));
  }

 private:
  std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Raster types. Pixels are (u, v) with u the column and v the row; rasters
// are row-major with interleaved channels.
// ---------------------------------------------------------------------------

struct Pixel {
  int u = 0;
  int v = 0;
  bool operator==(const Pixel&) const = default;
};

struct PixelPair {
  Pixel a;
  Pixel b;
  bool operator==(const PixelPair&) const = default;
};

struct ImageU8 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  ImageU8() = default;
  ImageU8(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), data(std::size_t(w) * h * c, fill) {}

  std::uint8_t& at(int u, int v, int c) {
    return data[(std::size_t(v) * width + u) * channels + c];
  }
  std::uint8_t at(int u, int v, int c) const {
    return data[(std::size_t(v) * width + u) * channels + c];
  }
  bool inside(int u, int v) const {
    return u >= 0 && u < width && v >= 0 && v < height;
  }
  bool operator==(const ImageU8&) const = default;
};

// Depth in meters; 0 (or any non-finite value) marks an invalid sample.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  DepthMap() = default;
  DepthMap(int w, int h, float fill = 0.f)
      : width(w), height(h), data(std::size_t(w) * h, fill) {}

  float& at(int u, int v) { return data[std::size_t(v) * width + u]; }
  float at(int u, int v) const { return data[std::size_t(v) * width + u]; }
  bool inside(int u, int v) const {
    return u >= 0 && u < width && v >= 0 && v < height;
  }
  bool valid_at(int u, int v) const {
    float d = at(u, v);
    return std::isfinite(d) && d > 0.f;
  }
  bool operator==(const DepthMap&) const = default;
};

// Per-pixel object ids, 0 = background (the ground plane included).
struct IdMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  IdMask() = default;
  IdMask(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(std::size_t(w) * h, fill) {}

  std::uint8_t& at(int u, int v) { return data[std::size_t(v) * width + u]; }
  std::uint8_t at(int u, int v) const { return data[std::size_t(v) * width + u]; }
  bool operator==(const IdMask&) const = default;
};

// Id value given to distractor objects; evaluation never samples queries on it.
inline constexpr int kDistractorId = 255;

inline int iround(double x) { return int(std::lround(x)); }

}  // namespace pixdesc
