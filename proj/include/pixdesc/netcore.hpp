#pragma once

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pixdesc/common.hpp"
#include "pixdesc/tape.hpp"
#include "pixdesc/tensor.hpp"

namespace pixdesc {

// ---------------------------------------------------------------------------
// Descriptor network: a compact fully-convolutional encoder with total
// stride 8 followed by a bilinear upsample back to the input resolution.
// ---------------------------------------------------------------------------

struct LayerSpec {
  enum class Kind { Conv, Relu, Upsample };
  Kind kind = Kind::Conv;
  int in_ch = 0, out_ch = 0;
  int ksize = 0, stride = 1, pad = 0;
  int factor = 1;  // upsample only

  static LayerSpec conv(int in, int out, int k, int s) {
    return {Kind::Conv, in, out, k, s, k / 2, 1};
  }
  static LayerSpec relu() { return {Kind::Relu, 0, 0, 0, 1, 0, 1}; }
  static LayerSpec upsample(int f) { return {Kind::Upsample, 0, 0, 0, 1, 0, f}; }
};

struct Architecture {
  std::vector<LayerSpec> layers;
  int descriptor_dim = 16;

  // conv3x3 s2 (3->16) / s2 (16->32) / s2 (32->32), two 1x1 heads, x8 bilinear.
  static Architecture compact(int d) {
    Architecture a;
    a.descriptor_dim = d;
    a.layers = {LayerSpec::conv(3, 16, 3, 2),  LayerSpec::relu(),
                LayerSpec::conv(16, 32, 3, 2), LayerSpec::relu(),
                LayerSpec::conv(32, 32, 3, 2), LayerSpec::relu(),
                LayerSpec::conv(32, 32, 1, 1), LayerSpec::relu(),
                LayerSpec::conv(32, d, 1, 1),  LayerSpec::upsample(8)};
    return a;
  }

  int total_stride() const {
    int s = 1;
    for (const auto& l : layers)
      if (l.kind == LayerSpec::Kind::Conv) s *= l.stride;
    return s;
  }

  std::string to_string() const {
    std::ostringstream os;
    os << "D=" << descriptor_dim << ";";
    for (const auto& l : layers) {
      switch (l.kind) {
        case LayerSpec::Kind::Conv:
          os << "conv" << l.ksize << "x" << l.ksize << ",s" << l.stride << ","
             << l.in_ch << "->" << l.out_ch << ";";
          break;
        case LayerSpec::Kind::Relu:
          os << "relu;";
          break;
        case LayerSpec::Kind::Upsample:
          os << "up" << l.factor << ";";
          break;
      }
    }
    return os.str();
  }

  static Architecture parse(const std::string& s) {
    Architecture a;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ';')) {
      if (tok.empty()) continue;
      if (tok.rfind("D=", 0) == 0) {
        a.descriptor_dim = std::stoi(tok.substr(2));
      } else if (tok == "relu") {
        a.layers.push_back(LayerSpec::relu());
      } else if (tok.rfind("up", 0) == 0) {
        a.layers.push_back(LayerSpec::upsample(std::stoi(tok.substr(2))));
      } else if (tok.rfind("conv", 0) == 0) {
        int k = 0, k2 = 0, s_ = 0, in = 0, out = 0;
        if (std::sscanf(tok.c_str(), "conv%dx%d,s%d,%d->%d", &k, &k2, &s_, &in,
                        &out) != 5)
          throw ParseError("architecture: bad conv token '" + tok + "'");
        a.layers.push_back(LayerSpec::conv(in, out, k, s_));
      } else {
        throw ParseError("architecture: unknown token '" + tok + "'");
      }
    }
    if (a.layers.empty()) throw ParseError("architecture: empty layer list");
    return a;
  }
};

struct NamedTensor {
  std::string name;
  TensorF tensor;
};

struct ModelParams {
  Architecture arch;
  std::vector<NamedTensor> tensors;  // conv weights/biases, forward order

  static ModelParams init(const Architecture& arch, std::uint64_t seed) {
    ModelParams p;
    p.arch = arch;
    Rng rng(mix_seed(seed, 0x6e657477ull));  // param-init stream
    int conv_idx = 0;
    for (const auto& l : arch.layers) {
      if (l.kind != LayerSpec::Kind::Conv) continue;
      ++conv_idx;
      TensorF w({l.ksize, l.ksize, l.in_ch, l.out_ch});
      const double std_dev = std::sqrt(2.0 / (l.ksize * l.ksize * l.in_ch));
      for (auto& e : w.data) e = float(rng.normal() * std_dev);
      TensorF b({l.out_ch});
      p.tensors.push_back({"conv" + std::to_string(conv_idx) + ".weight", std::move(w)});
      p.tensors.push_back({"conv" + std::to_string(conv_idx) + ".bias", std::move(b)});
    }
    return p;
  }

  const TensorF& find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t.tensor;
    throw Error("model: no tensor named " + name);
  }
};

// Image -> network input tensor, scaled to [-0.5, 0.5].
template <class S>
TensorT<S> image_to_input(const ImageU8& img) {
  if (img.channels != 3) throw ShapeMismatch("image_to_input: 3-channel image expected");
  TensorT<S> t({img.height, img.width, 3});
  for (std::size_t i = 0; i < img.data.size(); ++i)
    t.data[i] = S(img.data[i]) / S(255) - S(0.5);
  return t;
}

// Builds the forward graph on an existing tape. param_ids must hold one leaf
// per ModelParams tensor, in order. Returns the descriptor-image node.
template <class S>
int build_forward(TapeT<S>& tape, const Architecture& arch,
                  const std::vector<int>& param_ids, int input_id) {
  const TensorT<S>& in = tape.value(input_id);
  if (in.rank() != 3 || in.dim(2) != 3)
    throw ShapeMismatch("forward: (H,W,3) input expected");
  const int stride = arch.total_stride();
  if (in.dim(0) % stride != 0 || in.dim(1) % stride != 0)
    throw ShapeMismatch("forward: image dims must be divisible by total stride " +
                        std::to_string(stride));
  int cur = input_id;
  std::size_t pi = 0;
  for (const auto& l : arch.layers) {
    switch (l.kind) {
      case LayerSpec::Kind::Conv: {
        if (pi + 1 >= param_ids.size())
          throw ShapeMismatch("forward: parameter list too short");
        int w = param_ids[pi++];
        int b = param_ids[pi++];
        cur = tape.conv2d(cur, w, b, l.stride, l.pad);
        break;
      }
      case LayerSpec::Kind::Relu:
        cur = tape.relu(cur);
        break;
      case LayerSpec::Kind::Upsample:
        cur = tape.bilinear_upsample(cur, l.factor);
        break;
    }
  }
  return cur;
}

// Descriptor image for a single RGB image with frozen parameters.
inline TensorF forward(const ModelParams& params, const ImageU8& image) {
  Tape tape;
  std::vector<int> ids;
  ids.reserve(params.tensors.size());
  for (const auto& t : params.tensors) ids.push_back(tape.leaf(t.tensor));
  int in = tape.leaf(image_to_input<float>(image));
  int out = build_forward(tape, params.arch, ids, in);
  return tape.value(out);
}

// ---------------------------------------------------------------------------
// Adam with decoupled weight decay (theta -= lr*wd*theta before the update).
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-4;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  std::vector<TensorF> m;  // first moments, parameter order
  std::vector<TensorF> v;  // second moments
  std::int64_t step = 0;

  static AdamState init(const ModelParams& params, const AdamConfig& cfg) {
    AdamState s;
    s.cfg = cfg;
    for (const auto& t : params.tensors) {
      s.m.push_back(TensorF::zeros(t.tensor.shape));
      s.v.push_back(TensorF::zeros(t.tensor.shape));
    }
    return s;
  }
};

// One Adam update over a flat parameter block, any scalar width.
template <class S>
void adam_update(S* theta, const S* g, S* m, S* v, std::size_t n,
                 const AdamConfig& cfg, std::int64_t step) {
  const S lr = S(cfg.lr), b1 = S(cfg.beta1), b2 = S(cfg.beta2);
  const S wd = S(cfg.weight_decay), eps = S(cfg.eps);
  const S bc1 = S(1) - std::pow(b1, S(step));
  const S bc2 = S(1) - std::pow(b2, S(step));
  for (std::size_t i = 0; i < n; ++i) {
    theta[i] -= lr * wd * theta[i];
    m[i] = b1 * m[i] + (S(1) - b1) * g[i];
    v[i] = b2 * v[i] + (S(1) - b2) * g[i] * g[i];
    theta[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

inline void adam_step(ModelParams& params, const std::vector<TensorF>& grads,
                      AdamState& state) {
  if (grads.size() != params.tensors.size() || state.m.size() != grads.size())
    throw ShapeMismatch("adam_step: parameter/gradient count mismatch");
  state.step += 1;
  for (std::size_t p = 0; p < grads.size(); ++p) {
    TensorF& theta = params.tensors[p].tensor;
    if (!theta.same_shape(grads[p]))
      throw ShapeMismatch("adam_step: gradient shape mismatch");
    adam_update(theta.ptr(), grads[p].ptr(), state.m[p].ptr(), state.v[p].ptr(),
                theta.size(), state.cfg, state.step);
  }
}

// ---------------------------------------------------------------------------
// Checkpoints: magic, architecture string, step count, then named float32
// tensors, everything little-endian. Round-trips bit-exactly.
// ---------------------------------------------------------------------------

namespace ckpt {
inline constexpr char kMagic[8] = {'P', 'X', 'D', 'C', 'K', 'P', 'T', '1'};

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {(unsigned char)(v), (unsigned char)(v >> 8),
                        (unsigned char)(v >> 16), (unsigned char)(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline std::uint32_t read_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw ChecksumMismatch("checkpoint truncated: " + path);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}
inline void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, std::uint32_t(s.size()));
  os.write(s.data(), long(s.size()));
}
inline std::string read_str(std::istream& is, const std::string& path) {
  std::uint32_t n = read_u32(is, path);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw ChecksumMismatch("checkpoint truncated: " + path);
  return s;
}
}  // namespace ckpt

inline void save_checkpoint(const std::string& path, const ModelParams& params,
                            std::int64_t step) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint: " + path);
  os.write(ckpt::kMagic, 8);
  ckpt::write_str(os, params.arch.to_string());
  ckpt::write_u32(os, std::uint32_t(params.arch.descriptor_dim));
  ckpt::write_u32(os, std::uint32_t(step));
  ckpt::write_u32(os, std::uint32_t(params.tensors.size()));
  for (const auto& t : params.tensors) {
    ckpt::write_str(os, t.name);
    ckpt::write_u32(os, std::uint32_t(t.tensor.shape.size()));
    for (int d : t.tensor.shape) ckpt::write_u32(os, std::uint32_t(d));
    static_assert(sizeof(float) == 4);
    // float32 payload; this code targets little-endian hosts.
    os.write(reinterpret_cast<const char*>(t.tensor.data.data()),
             long(t.tensor.size() * 4));
  }
  if (!os) throw DataError("checkpoint write failed: " + path);
}

struct Checkpoint {
  ModelParams params;
  std::int64_t step = 0;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, ckpt::kMagic, 8) != 0)
    throw ParseError("not a checkpoint file: " + path);
  Checkpoint out;
  out.params.arch = Architecture::parse(ckpt::read_str(is, path));
  out.params.arch.descriptor_dim = int(ckpt::read_u32(is, path));
  out.step = ckpt::read_u32(is, path);
  const std::uint32_t count = ckpt::read_u32(is, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = ckpt::read_str(is, path);
    std::uint32_t rank = ckpt::read_u32(is, path);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = int(ckpt::read_u32(is, path));
    t.tensor = TensorF(shape);
    if (!is.read(reinterpret_cast<char*>(t.tensor.data.data()),
                 long(t.tensor.size() * 4)))
      throw ChecksumMismatch("checkpoint tensor truncated: " + path);
    out.params.tensors.push_back(std::move(t));
  }
  return out;
}

}  // namespace pixdesc
