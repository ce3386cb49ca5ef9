#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "pixdesc/common.hpp"
#include "pixdesc/tape.hpp"
#include "pixdesc/tensor.hpp"

namespace pixdesc {

// Rows of dA and dB are descriptors at corresponding pixels; row i of dA
// matches row i of dB, possibly coalesced across several image pairs.
struct DescriptorBatch {
  Eigen::MatrixXd a;  // N x D
  Eigen::MatrixXd b;  // N x D

  int count() const { return int(a.rows()); }
  int dim() const { return int(a.cols()); }
  void validate() const {
    if (a.rows() != b.rows() || a.cols() != b.cols())
      throw ShapeMismatch("descriptor batch: dA/dB shapes differ");
  }
};

enum class LossKind { Ntxent, Pixelwise, PixelwiseCrossObject };

inline std::string loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::Ntxent: return "ntxent";
    case LossKind::Pixelwise: return "pixelwise";
    case LossKind::PixelwiseCrossObject: return "pixelwise_cross_object";
  }
  return "?";
}

inline LossKind parse_loss_kind(const std::string& s) {
  if (s == "ntxent") return LossKind::Ntxent;
  if (s == "pixelwise") return LossKind::Pixelwise;
  if (s == "pixelwise_cross_object") return LossKind::PixelwiseCrossObject;
  throw ConfigError("unknown loss kind: " + s);
}

struct LossConfig {
  LossKind kind = LossKind::Ntxent;
  double tau = 0.1;
  double margin = 0.5;
  int n_correspondences = 2048;
  int n_noncorrespondences_per_match = 150;
  int n_cross_object_samples = 150;
  int exclusion_radius = 3;  // px around the true match when sampling negatives
  bool sum_mode = false;     // raw sum over the 2N NT-Xent terms instead of mean

  void validate() const {
    if (tau <= 0) throw ConfigError("loss: tau must be positive");
    if (margin < 0) throw ConfigError("loss: margin must be >= 0");
    if (n_correspondences < 1) throw ConfigError("loss: n_correspondences must be >= 1");
  }
};

inline double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double na = a.norm(), nb = b.norm();
  if (na <= 1e-12 || nb <= 1e-12)
    throw DegenerateVector("cosine_similarity: vector norm underflow");
  return a.dot(b) / (na * nb);
}

// ---------------------------------------------------------------------------
// Graph builders (shared by training and the scalar wrappers below).
// ---------------------------------------------------------------------------

// dA/dB are (N,D) tape nodes. Cosine similarities of the stacked 2N
// descriptors feed the temperature-scaled softmax.
template <class S>
int build_ntxent(TapeT<S>& tape, int d_a, int d_b, S tau, bool mean_reduce = true) {
  if (tape.value(d_a).dim(0) < 1) throw EmptySet("ntxent: at least one pair required");
  int stacked = tape.concat_rows({d_a, d_b});
  int normed = tape.normalize_rows(stacked);
  int sim = tape.matmul_nt(normed, normed);
  return tape.ntxent_from_sim(sim, tau, mean_reduce);
}

// Match term plus non-match hinge, each averaged over its own count.
// nm_a/nm_b pair each non-match descriptor row with its counterpart.
template <class S>
int build_pixelwise(TapeT<S>& tape, int match_a, int match_b, int nm_a, int nm_b,
                    S margin) {
  int match_term = tape.mean_row_sqdist(match_a, match_b);
  if (nm_a < 0) return match_term;
  int nonmatch_term = tape.mean_hinge_dist(nm_a, nm_b, margin);
  return tape.add(match_term, nonmatch_term);
}

template <class S>
int build_cross_object_term(TapeT<S>& tape, int desc_a, int desc_c, S margin) {
  return tape.mean_hinge_cross(desc_a, desc_c, margin);
}

// ---------------------------------------------------------------------------
// Scalar entry points. These run the same graph code in double precision;
// tests compare them against brute-force oracles.
// ---------------------------------------------------------------------------

namespace detail {
inline int matrix_leaf(TapeD& tape, const Eigen::MatrixXd& m) {
  TensorD t({int(m.rows()), int(m.cols())});
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) t.at2(i, j) = m(i, j);
  return tape.leaf(std::move(t));
}
}  // namespace detail

inline double ntxent_loss(const DescriptorBatch& batch, double tau,
                          bool mean_reduce = true) {
  batch.validate();
  if (batch.count() < 1) throw EmptySet("ntxent_loss: empty batch");
  TapeD tape;
  int a = detail::matrix_leaf(tape, batch.a);
  int b = detail::matrix_leaf(tape, batch.b);
  return tape.value(build_ntxent(tape, a, b, tau, mean_reduce)).data[0];
}

inline double pixelwise_contrastive_loss(
    const DescriptorBatch& matches,
    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& nonmatches,
    double margin) {
  matches.validate();
  if (matches.count() < 1) throw EmptySet("pixelwise loss: at least one match required");
  TapeD tape;
  int ma = detail::matrix_leaf(tape, matches.a);
  int mb = detail::matrix_leaf(tape, matches.b);
  int na = -1, nb = -1;
  if (!nonmatches.empty()) {
    Eigen::MatrixXd nma(nonmatches.size(), nonmatches[0].first.size());
    Eigen::MatrixXd nmb(nonmatches.size(), nonmatches[0].first.size());
    for (std::size_t i = 0; i < nonmatches.size(); ++i) {
      nma.row(long(i)) = nonmatches[i].first.transpose();
      nmb.row(long(i)) = nonmatches[i].second.transpose();
    }
    na = detail::matrix_leaf(tape, nma);
    nb = detail::matrix_leaf(tape, nmb);
  }
  return tape.value(build_pixelwise(tape, ma, mb, na, nb, margin)).data[0];
}

inline double cross_object_nonmatch_loss(const Eigen::MatrixXd& desc_a,
                                         const Eigen::MatrixXd& desc_c,
                                         double margin) {
  if (desc_a.rows() == 0 || desc_c.rows() == 0)
    throw EmptySet("cross_object loss: empty descriptor set");
  TapeD tape;
  int a = detail::matrix_leaf(tape, desc_a);
  int c = detail::matrix_leaf(tape, desc_c);
  return tape.value(build_cross_object_term(tape, a, c, margin)).data[0];
}

// Descriptor rows at the paired pixels of two (H,W,D) descriptor images.
inline DescriptorBatch extract_descriptors(const TensorF& desc_a, const TensorF& desc_b,
                                           const std::vector<PixelPair>& pairs) {
  if (desc_a.rank() != 3 || desc_b.rank() != 3 || desc_a.dim(2) != desc_b.dim(2))
    throw ShapeMismatch("extract_descriptors: (H,W,D) images expected");
  const int d = desc_a.dim(2);
  DescriptorBatch batch;
  batch.a.resize(long(pairs.size()), d);
  batch.b.resize(long(pairs.size()), d);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Pixel& pa = pairs[i].a;
    const Pixel& pb = pairs[i].b;
    if (pa.u < 0 || pa.u >= desc_a.dim(1) || pa.v < 0 || pa.v >= desc_a.dim(0) ||
        pb.u < 0 || pb.u >= desc_b.dim(1) || pb.v < 0 || pb.v >= desc_b.dim(0))
      throw OutOfBounds("extract_descriptors: pixel outside image");
    for (int k = 0; k < d; ++k) {
      batch.a(long(i), k) = desc_a.at3(pa.v, pa.u, k);
      batch.b(long(i), k) = desc_b.at3(pb.v, pb.u, k);
    }
  }
  return batch;
}

}  // namespace pixdesc
