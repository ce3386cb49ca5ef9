#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <map>
#include <vector>

#include "pixdesc/geometry.hpp"
#include "pixdesc/losses.hpp"
#include "pixdesc/netcore.hpp"
#include "pixdesc/scenegen.hpp"
#include "pixdesc/tensor.hpp"

namespace pixdesc {

enum class Measure { Cosine, L2 };

inline Measure measure_for(LossKind kind) {
  return kind == LossKind::Ntxent ? Measure::Cosine : Measure::L2;
}

// ---------------------------------------------------------------------------
// Nearest-descriptor matching
// ---------------------------------------------------------------------------

// Exhaustive scan over the descriptor image. Cosine ranks by similarity
// (argmax), L2 by distance (argmin); ties resolve to the smallest row-major
// index because the scan only replaces on strict improvement.
inline Pixel nearest_match(const TensorF& desc_image, const Eigen::VectorXd& query,
                           Measure measure) {
  if (desc_image.rank() != 3 || desc_image.size() == 0)
    throw ShapeMismatch("nearest_match: non-empty (H,W,D) image expected");
  const int h = desc_image.dim(0), w = desc_image.dim(1), d = desc_image.dim(2);
  if (int(query.size()) != d)
    throw ShapeMismatch("nearest_match: query dimension mismatch");

  Eigen::VectorXf q = query.cast<float>();
  if (measure == Measure::Cosine) {
    double qn = query.norm();
    if (qn <= 1e-12) throw DegenerateVector("nearest_match: zero-norm query");
    q /= float(qn);
  }

  Pixel best{0, 0};
  float best_score = measure == Measure::Cosine ? -std::numeric_limits<float>::infinity()
                                                : std::numeric_limits<float>::infinity();
  const float* p = desc_image.ptr();
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u, p += d) {
      float score;
      if (measure == Measure::Cosine) {
        float dot = 0, sq = 0;
        for (int k = 0; k < d; ++k) {
          dot += p[k] * q[k];
          sq += p[k] * p[k];
        }
        score = dot / std::max(std::sqrt(sq), 1e-12f);
        if (score > best_score) {
          best_score = score;
          best = {u, v};
        }
      } else {
        float sq = 0;
        for (int k = 0; k < d; ++k) {
          float diff = p[k] - q[k];
          sq += diff * diff;
        }
        score = sq;
        if (score < best_score) {
          best_score = score;
          best = {u, v};
        }
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// PCK metrics
// ---------------------------------------------------------------------------

struct EvalPair {
  Eigen::Vector2d predicted;
  Eigen::Vector2d truth;
  double distance() const { return (predicted - truth).norm(); }
};

inline double pck(const std::vector<EvalPair>& pairs, double k) {
  if (pairs.empty()) throw EmptySet("pck: empty pair set");
  std::size_t hits = 0;
  for (const auto& p : pairs) hits += p.distance() <= k;
  return double(hits) / double(pairs.size());
}

inline double pck_from_distances(const std::vector<double>& distances, double k) {
  if (distances.empty()) throw EmptySet("pck: empty distance set");
  std::size_t hits = 0;
  for (double d : distances) hits += d <= k;
  return double(hits) / double(distances.size());
}

struct PckCurve {
  std::vector<double> values;  // values[i] = PCK@(i+1)
  int k_max = 100;

  double at(int k) const { return values[std::size_t(k - 1)]; }
  double auc() const {
    double s = 0;
    for (double v : values) s += v;
    return s / double(values.size());
  }
  static PckCurve from_distances(const std::vector<double>& distances, int k_max = 100) {
    if (distances.empty()) throw EmptySet("pck curve: empty distance set");
    PckCurve c;
    c.k_max = k_max;
    c.values.resize(std::size_t(k_max));
    for (int k = 1; k <= k_max; ++k)
      c.values[std::size_t(k - 1)] = pck_from_distances(distances, double(k));
    return c;
  }
};

// Mean of pck over integer k = 1..k_max; 1.0 for a perfect matcher.
inline double pck_auc(const std::vector<EvalPair>& pairs, int k_max = 100) {
  if (pairs.empty()) throw EmptySet("pck_auc: empty pair set");
  std::vector<double> d;
  d.reserve(pairs.size());
  for (const auto& p : pairs) d.push_back(p.distance());
  return PckCurve::from_distances(d, k_max).auc();
}

// ---------------------------------------------------------------------------
// Descriptor providers
// ---------------------------------------------------------------------------

using DescriptorFn = std::function<TensorF(const RgbdFrame&)>;

inline DescriptorFn model_descriptor_fn(const ModelParams& params) {
  return [params](const RgbdFrame& f) { return forward(params, f.rgb); };
}

// Ground-truth descriptors: the pixel's world coordinate. Invalid-depth
// pixels get a far-away sentinel so they never win a match.
inline DescriptorFn world_coordinate_oracle_fn() {
  return [](const RgbdFrame& f) {
    TensorF out({f.height(), f.width(), 3});
    for (int v = 0; v < f.height(); ++v)
      for (int u = 0; u < f.width(); ++u) {
        if (f.depth.valid_at(u, v)) {
          Vec3 w = f.pose.apply(
              backproject(u, v, double(f.depth.at(u, v)), f.intrinsics));
          for (int k = 0; k < 3; ++k) out.at3(v, u, k) = float(w[k]);
        } else {
          for (int k = 0; k < 3; ++k) out.at3(v, u, k) = 1e6f;
        }
      }
    return out;
  };
}

// Per-frame cache so repeated pairs reuse forward passes.
class DescriptorCache {
 public:
  explicit DescriptorCache(DescriptorFn fn) : fn_(std::move(fn)) {}
  const TensorF& get(int scene, int frame, const RgbdFrame& f) {
    auto key = std::make_pair(scene, frame);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, fn_(f)).first;
    return it->second;
  }

 private:
  DescriptorFn fn_;
  std::map<std::pair<int, int>, TensorF> cache_;
};

// ---------------------------------------------------------------------------
// Correspondence accuracy (PCK over sampled pairs and object queries)
// ---------------------------------------------------------------------------

struct CorrespondenceEvalConfig {
  PairConstraint constraint{};
  int n_pairs = 100;
  int n_queries = 100;  // per image pair, on the target object
  int k_max = 100;
  double occlusion_tol = kDefaultOcclusionTol;
  int min_object_pixels = 8;
  int max_pair_retries = 8;
};

struct CorrespondenceEvalResult {
  PckCurve curve;
  double auc = 0;
  std::vector<double> distances;
  int pairs_evaluated = 0;
  int pairs_skipped = 0;
};

// Samples constrained image pairs, picks a known object visible in both
// views, queries mask-valid pixels on its id mask in A, and scores
// nearest-descriptor predictions in B against the geometric ground truth.
inline CorrespondenceEvalResult correspondence_accuracy_eval(
    DescriptorFn desc_fn, const std::vector<Scene>& scenes,
    const CorrespondenceEvalConfig& cfg, Measure measure, std::uint64_t seed) {
  if (scenes.empty()) throw NoAdmissiblePair("correspondence eval: empty dataset");
  PairIndex index(scenes, cfg.constraint);
  DescriptorCache cache(std::move(desc_fn));
  Rng rng(mix_seed(seed, 0x6576616cull));

  CorrespondenceEvalResult out;
  for (int pair_i = 0; pair_i < cfg.n_pairs; ++pair_i) {
    bool done = false;
    for (int attempt = 0; attempt < cfg.max_pair_retries && !done; ++attempt) {
      SampledPair sp = index.sample(rng);
      const Scene& sc = scenes[std::size_t(sp.scene)];
      const RgbdFrame& fa = sc.frames[std::size_t(sp.frame_a)];
      const RgbdFrame& fb = sc.frames[std::size_t(sp.frame_b)];
      const IdMask& ida = sc.id_masks[std::size_t(sp.frame_a)];
      ValidityMask vm = compute_validity_mask(fa, fb, cfg.occlusion_tol);

      // candidate query pixels per known object: mask-true on the id mask
      std::map<int, std::vector<int>> per_object;
      for (int v = 0; v < fa.height(); ++v)
        for (int u = 0; u < fa.width(); ++u) {
          if (!vm.at(u, v)) continue;
          int id = ida.at(u, v);
          if (id == 0 || id == kDistractorId) continue;
          per_object[id].push_back(v * fa.width() + u);
        }
      std::vector<int> eligible;
      for (const auto& [id, px] : per_object)
        if (int(px.size()) >= cfg.min_object_pixels) eligible.push_back(id);
      if (eligible.empty()) continue;
      int target = eligible[rng.uniform_index(eligible.size())];
      std::vector<int>& candidates = per_object[target];

      const std::size_t take =
          std::min<std::size_t>(std::size_t(cfg.n_queries), candidates.size());
      for (std::size_t i = 0; i < take; ++i) {
        std::size_t j = i + rng.uniform_index(candidates.size() - i);
        std::swap(candidates[i], candidates[j]);
      }

      const TensorF& da = cache.get(sp.scene, sp.frame_a, fa);
      const TensorF& db = cache.get(sp.scene, sp.frame_b, fb);
      const int d = da.dim(2);
      for (std::size_t i = 0; i < take; ++i) {
        int u = candidates[i] % fa.width(), v = candidates[i] / fa.width();
        Eigen::VectorXd q(d);
        for (int k = 0; k < d; ++k) q(k) = da.at3(v, u, k);
        Pixel pred = nearest_match(db, q, measure);
        Eigen::Vector2f truth = vm.map_at(u, v);
        out.distances.push_back(std::hypot(pred.u - double(truth.x()),
                                           pred.v - double(truth.y())));
      }
      done = true;
    }
    if (done)
      ++out.pairs_evaluated;
    else
      ++out.pairs_skipped;
  }
  if (out.distances.empty())
    throw NoValidCorrespondences("correspondence eval: no queries evaluated");
  out.curve = PckCurve::from_distances(out.distances, cfg.k_max);
  out.auc = out.curve.auc();
  return out;
}

// ---------------------------------------------------------------------------
// Keypoint tracking in world coordinates
// ---------------------------------------------------------------------------

struct KeypointQuery {
  int frame = 0;
  Pixel pixel;
  int object_id = 0;
};

struct TrackingReport {
  std::vector<std::vector<double>> per_query_errors_mm;  // over the M-1 frames
  std::vector<double> all_errors_mm;
  int misses = 0;  // predictions landing on invalid depth
  double median_mm = 0, p75_mm = 0, p90_mm = 0, mean_mm = 0;
};

namespace detail {
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  double idx = q * double(v.size() - 1);
  std::size_t lo = std::size_t(idx);
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  double t = idx - double(lo);
  return v[lo] * (1 - t) + v[hi] * t;
}
}  // namespace detail

// Detects each query in every other frame via nearest_match, lifts the
// prediction to world coordinates through the frame's depth, and reports
// Euclidean errors in millimeters.
inline TrackingReport keypoint_tracking_eval(DescriptorFn desc_fn, const Scene& scene,
                                             const std::vector<KeypointQuery>& queries,
                                             Measure measure) {
  if (scene.frames.size() < 2)
    throw EmptySet("tracking eval: scene needs at least 2 frames");
  if (queries.empty()) throw EmptySet("tracking eval: no queries");
  DescriptorCache cache(std::move(desc_fn));

  TrackingReport report;
  report.per_query_errors_mm.resize(queries.size());
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const KeypointQuery& q = queries[qi];
    const RgbdFrame& ref = scene.frames[std::size_t(q.frame)];
    if (!ref.depth.inside(q.pixel.u, q.pixel.v) ||
        !ref.depth.valid_at(q.pixel.u, q.pixel.v))
      throw InvalidDepth("tracking eval: query pixel has no depth");
    Vec3 truth_world = ref.pose.apply(backproject(
        q.pixel, double(ref.depth.at(q.pixel.u, q.pixel.v)), ref.intrinsics));

    const TensorF& ref_desc = cache.get(scene.scene_id, q.frame, ref);
    const int d = ref_desc.dim(2);
    Eigen::VectorXd qd(d);
    for (int k = 0; k < d; ++k) qd(k) = ref_desc.at3(q.pixel.v, q.pixel.u, k);

    for (std::size_t fi = 0; fi < scene.frames.size(); ++fi) {
      if (int(fi) == q.frame) continue;
      const RgbdFrame& f = scene.frames[fi];
      const TensorF& fd = cache.get(scene.scene_id, int(fi), f);
      Pixel pred = nearest_match(fd, qd, measure);
      if (!f.depth.valid_at(pred.u, pred.v)) {
        ++report.misses;
        continue;
      }
      Vec3 pred_world = f.pose.apply(
          backproject(pred, double(f.depth.at(pred.u, pred.v)), f.intrinsics));
      double err_mm = (pred_world - truth_world).norm() * 1000.0;
      report.per_query_errors_mm[qi].push_back(err_mm);
      report.all_errors_mm.push_back(err_mm);
    }
  }
  if (!report.all_errors_mm.empty()) {
    report.median_mm = detail::quantile(report.all_errors_mm, 0.5);
    report.p75_mm = detail::quantile(report.all_errors_mm, 0.75);
    report.p90_mm = detail::quantile(report.all_errors_mm, 0.9);
    double s = 0;
    for (double e : report.all_errors_mm) s += e;
    report.mean_mm = s / double(report.all_errors_mm.size());
  }
  return report;
}

// Keeps only queries whose world point is unoccluded in every frame of the
// scene, mirroring how hand-picked tracking keypoints stay observable over
// the recording.
inline std::vector<KeypointQuery> filter_queries_visible(
    const Scene& scene, const std::vector<KeypointQuery>& queries,
    double occlusion_tol = kDefaultOcclusionTol) {
  std::vector<KeypointQuery> out;
  std::map<int, std::vector<ValidityMask>> masks_by_frame;
  for (const KeypointQuery& q : queries) {
    auto& masks = masks_by_frame[q.frame];
    if (masks.empty())
      for (std::size_t fi = 0; fi < scene.frames.size(); ++fi)
        masks.push_back(int(fi) == q.frame
                            ? ValidityMask(scene.frames[fi].width(),
                                           scene.frames[fi].height())
                            : compute_validity_mask(scene.frames[std::size_t(q.frame)],
                                                    scene.frames[fi], occlusion_tol));
    bool everywhere = true;
    for (std::size_t fi = 0; fi < scene.frames.size() && everywhere; ++fi)
      if (int(fi) != q.frame) everywhere = masks[fi].at(q.pixel.u, q.pixel.v);
    if (everywhere) out.push_back(q);
  }
  return out;
}

// Deterministic per-object queries from the id masks of one frame.
inline std::vector<KeypointQuery> sample_object_queries(const Scene& scene, int frame,
                                                        int per_object,
                                                        std::uint64_t seed) {
  const IdMask& ids = scene.id_masks[std::size_t(frame)];
  const RgbdFrame& f = scene.frames[std::size_t(frame)];
  std::map<int, std::vector<Pixel>> px;
  for (int v = 0; v < ids.height; ++v)
    for (int u = 0; u < ids.width; ++u) {
      int id = ids.at(u, v);
      if (id == 0 || id == kDistractorId) continue;
      if (!f.depth.valid_at(u, v)) continue;
      px[id].push_back({u, v});
    }
  Rng rng(mix_seed(seed, 0x71756572ull));
  std::vector<KeypointQuery> out;
  for (auto& [id, pixels] : px) {
    const std::size_t take = std::min<std::size_t>(std::size_t(per_object), pixels.size());
    for (std::size_t i = 0; i < take; ++i) {
      std::size_t j = i + rng.uniform_index(pixels.size() - i);
      std::swap(pixels[i], pixels[j]);
      out.push_back({frame, pixels[i], id});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grasp axis from two keypoints
// ---------------------------------------------------------------------------

struct GraspEstimate {
  Vec3 position;
  Vec3 axis;      // unit, p1 -> p2
  Vec3 approach;  // unit, gravity-aligned, orthogonal to axis
};

inline GraspEstimate grasp_axis_estimate(const Vec3& p1_world, const Vec3& p2_world) {
  Vec3 diff = p2_world - p1_world;
  if (diff.norm() <= 0.005)
    throw DegenerateAxis("grasp_axis_estimate: keypoints closer than 5 mm");
  GraspEstimate g;
  g.position = 0.5 * (p1_world + p2_world);
  g.axis = diff.normalized();
  Vec3 down(0, 0, -1);
  Vec3 approach = down - g.axis.dot(down) * g.axis;
  if (approach.norm() < 1e-6)
    throw DegenerateAxis("grasp_axis_estimate: axis parallel to gravity");
  g.approach = approach.normalized();
  return g;
}

// ---------------------------------------------------------------------------
// PCA visualization
// ---------------------------------------------------------------------------

// Per-image PCA of all pixel descriptors, top-3 components stretched to
// [0,255] per channel; zero-variance channels render mid-gray.
inline ImageU8 pca_visualize(const TensorF& desc_image) {
  if (desc_image.rank() != 3 || desc_image.dim(2) < 3)
    throw ShapeMismatch("pca_visualize: (H,W,D>=3) image expected");
  const int h = desc_image.dim(0), w = desc_image.dim(1), d = desc_image.dim(2);
  const std::size_t n = std::size_t(h) * w;

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  const float* p = desc_image.ptr();
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) mean(k) += p[i * d + k];
  mean /= double(n);

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd row(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) row(k) = p[i * d + k] - mean(k);
    cov.noalias() += row * row.transpose();
  }
  cov /= double(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw Error("pca_visualize: eigendecomposition failed");
  // eigenvalues ascend; take the top three columns
  Eigen::MatrixXd basis(d, 3);
  Eigen::Vector3d lambda;
  for (int c = 0; c < 3; ++c) {
    basis.col(c) = solver.eigenvectors().col(d - 1 - c);
    lambda(c) = std::max(0.0, solver.eigenvalues()(d - 1 - c));
  }

  Eigen::MatrixXd proj(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) row(k) = p[i * d + k] - mean(k);
    proj.row(long(i)) = (basis.transpose() * row).transpose();
  }

  ImageU8 out(w, h, 3);
  for (int c = 0; c < 3; ++c) {
    double lo = proj.col(c).minCoeff(), hi = proj.col(c).maxCoeff();
    // a component carrying ~none of the leading variance is float
    // quantization noise, not signal
    const bool degenerate =
        hi - lo < 1e-9 || lambda(c) <= 1e-9 * std::max(lambda(0), 1e-12);
    if (degenerate) {
      for (std::size_t i = 0; i < n; ++i) out.data[i * 3 + std::size_t(c)] = 128;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i)
      out.data[i * 3 + std::size_t(c)] = std::uint8_t(
          std::clamp(int(std::lround((proj(long(i), c) - lo) / (hi - lo) * 255.0)), 0, 255));
  }
  return out;
}

}  // namespace pixdesc
