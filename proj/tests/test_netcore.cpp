#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "pixdesc/netcore.hpp"
#include "test_util.hpp"

using namespace pixdesc;

namespace {

std::uint64_t fnv1a(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

ImageU8 noise_image(int w, int h, std::uint64_t seed) {
  ImageU8 img(w, h, 3);
  Rng rng(seed);
  for (auto& e : img.data) e = std::uint8_t(rng.uniform_index(256));
  return img;
}

}  // namespace

TEST_CASE("architecture: compact stride and round-trip") {
  Architecture a = Architecture::compact(8);
  CHECK(a.total_stride() == 8);
  Architecture b = Architecture::parse(a.to_string());
  CHECK(b.descriptor_dim == 8);
  CHECK(b.to_string() == a.to_string());
  CHECK_THROWS_AS(Architecture::parse("conv_bogus"), ParseError);
}

TEST_CASE("forward: shape contract and stride check") {
  ModelParams p = ModelParams::init(Architecture::compact(8), 1);
  TensorF out = forward(p, noise_image(64, 64, 2));
  REQUIRE(out.shape == std::vector<int>{64, 64, 8});

  CHECK_THROWS_AS(forward(p, noise_image(60, 64, 2)), ShapeMismatch);
}

TEST_CASE("forward: all-zero parameters give all-zero descriptors") {
  ModelParams p = ModelParams::init(Architecture::compact(4), 1);
  for (auto& t : p.tensors)
    for (auto& e : t.tensor.data) e = 0.f;
  TensorF out = forward(p, noise_image(32, 32, 3));
  for (float v : out.data) CHECK(v == 0.f);
}

TEST_CASE("forward: deterministic and matches golden checksum") {
  ModelParams p = ModelParams::init(Architecture::compact(8), 77);
  ImageU8 img = noise_image(64, 64, 99);
  TensorF out1 = forward(p, img);
  TensorF out2 = forward(p, img);
  CHECK(out1.data == out2.data);

  std::ostringstream os;
  os << "fnv1a " << std::hex << fnv1a(out1.data.data(), out1.data.size() * 4) << "\n";
  os.precision(9);
  os << std::dec << std::scientific;
  for (int i = 0; i < 8; ++i) os << out1.data[std::size_t(i)] << "\n";
  CHECK(testutil::check_golden("forward_seed77.txt", os.str()));
}

TEST_CASE("adam: zero gradient with zero weight decay is identity") {
  ModelParams p = ModelParams::init(Architecture::compact(4), 5);
  ModelParams orig = p;
  AdamConfig cfg;
  cfg.weight_decay = 0;
  AdamState st = AdamState::init(p, cfg);
  std::vector<TensorF> grads;
  for (auto& t : p.tensors) grads.push_back(TensorF::zeros(t.tensor.shape));
  adam_step(p, grads, st);
  for (std::size_t i = 0; i < p.tensors.size(); ++i)
    CHECK(p.tensors[i].tensor.data == orig.tensors[i].tensor.data);
}

TEST_CASE("adam: lr = 0 is identity on params") {
  ModelParams p = ModelParams::init(Architecture::compact(4), 6);
  ModelParams orig = p;
  AdamConfig cfg;
  cfg.lr = 0;
  AdamState st = AdamState::init(p, cfg);
  std::vector<TensorF> grads;
  for (auto& t : p.tensors) {
    grads.push_back(TensorF(t.tensor.shape));
    for (auto& e : grads.back().data) e = 0.37f;
  }
  adam_step(p, grads, st);
  adam_step(p, grads, st);
  for (std::size_t i = 0; i < p.tensors.size(); ++i)
    CHECK(p.tensors[i].tensor.data == orig.tensors[i].tensor.data);
}

TEST_CASE("adam: closed-form first step from zero params") {
  // theta0 = 0, g = 1 everywhere: mhat = 1, vhat = 1, update = -lr/(1+eps)
  const std::size_t n = 16;
  std::vector<double> theta(n, 0.0), g(n, 1.0), m(n, 0.0), v(n, 0.0);
  AdamConfig cfg;  // defaults: lr 3e-5, wd 1e-4 (no-op at theta 0)
  adam_update(theta.data(), g.data(), m.data(), v.data(), n, cfg, 1);
  for (double t : theta) CHECK(std::abs(t + cfg.lr) < 1e-9);
}

TEST_CASE("adam: two steps match scripted oracle in 64-bit") {
  Rng rng(21);
  const std::size_t n = 64;
  std::vector<double> theta(n), g1(n), g2(n);
  for (auto& e : theta) e = rng.normal();
  for (auto& e : g1) e = rng.normal();
  for (auto& e : g2) e = rng.normal();
  AdamConfig cfg;
  cfg.lr = 1e-3;

  std::vector<double> t_impl = theta, m(n, 0.0), v(n, 0.0);
  adam_update(t_impl.data(), g1.data(), m.data(), v.data(), n, cfg, 1);
  adam_update(t_impl.data(), g2.data(), m.data(), v.data(), n, cfg, 2);

  // scripted reference, written out step by step
  std::vector<double> t_ref = theta, mr(n, 0.0), vr(n, 0.0);
  for (int step = 1; step <= 2; ++step) {
    const std::vector<double>& g = step == 1 ? g1 : g2;
    for (std::size_t i = 0; i < n; ++i) {
      t_ref[i] = t_ref[i] - cfg.lr * cfg.weight_decay * t_ref[i];
      mr[i] = cfg.beta1 * mr[i] + (1 - cfg.beta1) * g[i];
      vr[i] = cfg.beta2 * vr[i] + (1 - cfg.beta2) * g[i] * g[i];
      double mhat = mr[i] / (1 - std::pow(cfg.beta1, step));
      double vhat = vr[i] / (1 - std::pow(cfg.beta2, step));
      t_ref[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(t_impl[i] - t_ref[i]) < 1e-10);
}

TEST_CASE("end-to-end gradient: ntxent through a 2-layer net vs finite differences") {
  for (std::uint64_t seed : {11ull, 12ull}) {
    Rng rng(seed);
    Architecture arch;
    arch.descriptor_dim = 5;
    arch.layers = {LayerSpec::conv(3, 4, 3, 2), LayerSpec::relu(),
                   LayerSpec::conv(4, 5, 1, 1), LayerSpec::upsample(2)};

    // double-precision parameter tensors
    std::vector<TensorD> params;
    params.push_back(TensorD({3, 3, 3, 4}));
    params.push_back(TensorD({4}));
    params.push_back(TensorD({1, 1, 4, 5}));
    params.push_back(TensorD({5}));
    for (auto& t : params)
      for (auto& e : t.data) e = rng.normal() * 0.3;

    TensorD input({8, 8, 3});
    for (auto& e : input.data) e = rng.uniform(-0.5, 0.5);

    std::vector<Pixel> pix_a = {{0, 0}, {3, 2}, {7, 5}};
    std::vector<Pixel> pix_b = {{1, 1}, {4, 2}, {6, 7}};

    auto build = [&](TapeD& tape, const std::vector<int>& ids) {
      int in = tape.leaf(input);
      int desc = build_forward(tape, arch, ids, in);
      int da = tape.gather_pixels(desc, pix_a);
      int db = tape.gather_pixels(desc, pix_b);
      int stacked = tape.concat_rows({da, db});
      int normed = tape.normalize_rows(stacked);
      return tape.ntxent_from_sim(tape.matmul_nt(normed, normed), 0.1, true);
    };

    auto eval = [&](const std::vector<TensorD>& ps) {
      TapeD tape;
      std::vector<int> ids;
      for (const auto& t : ps) ids.push_back(tape.leaf(t));
      return tape.value(build(tape, ids)).data[0];
    };

    TapeD tape;
    std::vector<int> ids;
    for (const auto& t : params) ids.push_back(tape.leaf(t));
    int root = build(tape, ids);
    tape.backward(root);

    const double h = 1e-5;
    double worst = 0;
    for (std::size_t p = 0; p < params.size(); ++p) {
      for (std::size_t j = 0; j < params[p].size(); ++j) {
        double orig = params[p].data[j];
        params[p].data[j] = orig + h;
        double fp = eval(params);
        params[p].data[j] = orig - h;
        double fm = eval(params);
        params[p].data[j] = orig;
        double fd = (fp - fm) / (2 * h);
        double an = tape.grad(ids[p]).data[j];
        double denom = std::max({std::abs(an), std::abs(fd), 1e-6});
        worst = std::max(worst, std::abs(an - fd) / denom);
      }
    }
    INFO("seed " << seed << " worst rel err " << worst);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("checkpoint: bit-exact round trip") {
  ModelParams p = ModelParams::init(Architecture::compact(8), 3);
  const std::string path = "/tmp/pixdesc_test_ckpt.bin";
  save_checkpoint(path, p, 1234);
  Checkpoint c = load_checkpoint(path);
  CHECK(c.step == 1234);
  CHECK(c.params.arch.to_string() == p.arch.to_string());
  REQUIRE(c.params.tensors.size() == p.tensors.size());
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    CHECK(c.params.tensors[i].name == p.tensors[i].name);
    CHECK(c.params.tensors[i].tensor.data == p.tensors[i].tensor.data);
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint: truncation and bad magic are detected") {
  ModelParams p = ModelParams::init(Architecture::compact(4), 3);
  const std::string path = "/tmp/pixdesc_test_ckpt2.bin";
  save_checkpoint(path, p, 1);
  auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 17);
  CHECK_THROWS_AS(load_checkpoint(path), ChecksumMismatch);

  {
    std::ofstream os(path, std::ios::binary);
    os << "garbagegarbagegarbage";
  }
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);
  std::filesystem::remove(path);
}
