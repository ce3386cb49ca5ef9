#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <functional>
#include <vector>

#include "pixdesc/common.hpp"
#include "pixdesc/tensor.hpp"

namespace pixdesc {

// ---------------------------------------------------------------------------
// Reverse-mode tape. Ops append nodes; backward() replays the tape in
// reverse. Instantiated with float for training and double for gradient
// checks. A tape is single-use: backward() frees the closures and a second
// call throws GraphConsumed.
// ---------------------------------------------------------------------------

template <class S>
class TapeT {
 public:
  using Tensor = TensorT<S>;

  TapeT() = default;
  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;

  int size() const { return int(nodes_.size()); }
  const Tensor& value(int id) const { return nodes_[std::size_t(id)].value; }
  const Tensor& grad(int id) const { return nodes_[std::size_t(id)].grad; }
  Tensor& mutable_value(int id) { return nodes_[std::size_t(id)].value; }

  int leaf(Tensor v) { return push(std::move(v), {}); }

  // -- elementwise ----------------------------------------------------------

  int relu(int a) {
    const Tensor& x = value(a);
    Tensor y = x;
    for (auto& e : y.data) e = e > S(0) ? e : S(0);
    return push(std::move(y), [this, a](int self) {
      const Tensor& x = value(a);
      const Tensor& g = grad(self);
      Tensor& gx = grad_ref(a);
      for (std::size_t i = 0; i < x.size(); ++i)
        if (x.data[i] > S(0)) gx.data[i] += g.data[i];
    });
  }

  int add(int a, int b) {
    const Tensor& xa = value(a);
    const Tensor& xb = value(b);
    if (!xa.same_shape(xb)) throw ShapeMismatch("tape.add: shapes differ");
    Tensor y = xa;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += xb.data[i];
    return push(std::move(y), [this, a, b](int self) {
      const Tensor& g = grad(self);
      Tensor& ga = grad_ref(a);
      Tensor& gb = grad_ref(b);
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga.data[i] += g.data[i];
        gb.data[i] += g.data[i];
      }
    });
  }

  int scale(int a, S c) {
    Tensor y = value(a);
    for (auto& e : y.data) e *= c;
    return push(std::move(y), [this, a, c](int self) {
      const Tensor& g = grad(self);
      Tensor& ga = grad_ref(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += c * g.data[i];
    });
  }

  int sum_all(int a) {
    S s = 0;
    for (auto e : value(a).data) s += e;
    Tensor y({1});
    y.data[0] = s;
    return push(std::move(y), [this, a](int self) {
      S g = grad(self).data[0];
      Tensor& ga = grad_ref(a);
      for (auto& e : ga.data) e += g;
    });
  }

  // -- conv / upsample ------------------------------------------------------

  // input (H,W,Cin), weight (kh,kw,Cin,Cout), bias (Cout).
  int conv2d(int input, int weight, int bias, int stride, int pad) {
    const Tensor& x = value(input);
    const Tensor& w = value(weight);
    const Tensor& b = value(bias);
    if (x.rank() != 3 || w.rank() != 4 || b.rank() != 1)
      throw ShapeMismatch("conv2d: bad ranks");
    const int h = x.dim(0), wd = x.dim(1), cin = x.dim(2);
    const int kh = w.dim(0), kw = w.dim(1), cout = w.dim(3);
    if (w.dim(2) != cin || b.dim(0) != cout)
      throw ShapeMismatch("conv2d: channel mismatch");
    const int ho = (h + 2 * pad - kh) / stride + 1;
    const int wo = (wd + 2 * pad - kw) / stride + 1;
    if (ho <= 0 || wo <= 0) throw ShapeMismatch("conv2d: empty output");

    Tensor y({ho, wo, cout});
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        S* acc = &y.data[(std::size_t(oy) * wo + ox) * cout];
        for (int c = 0; c < cout; ++c) acc[c] = b.data[std::size_t(c)];
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= wd) continue;
            const S* xin = &x.data[(std::size_t(iy) * wd + ix) * cin];
            const S* wk = &w.data[((std::size_t(ky) * kw + kx) * cin) * cout];
            for (int ci = 0; ci < cin; ++ci) {
              const S xv = xin[ci];
              const S* wrow = wk + std::size_t(ci) * cout;
              for (int c = 0; c < cout; ++c) acc[c] += xv * wrow[c];
            }
          }
        }
      }
    }
    return push(std::move(y), [this, input, weight, bias, stride, pad](int self) {
      const Tensor& x = value(input);
      const Tensor& w = value(weight);
      const Tensor& g = grad(self);
      Tensor& gx = grad_ref(input);
      Tensor& gw = grad_ref(weight);
      Tensor& gb = grad_ref(bias);
      const int h = x.dim(0), wd = x.dim(1), cin = x.dim(2);
      const int kh = w.dim(0), kw = w.dim(1), cout = w.dim(3);
      const int ho = g.dim(0), wo = g.dim(1);
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          const S* go = &g.data[(std::size_t(oy) * wo + ox) * cout];
          for (int c = 0; c < cout; ++c) gb.data[std::size_t(c)] += go[c];
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= wd) continue;
              const S* xin = &x.data[(std::size_t(iy) * wd + ix) * cin];
              S* gxin = &gx.data[(std::size_t(iy) * wd + ix) * cin];
              const std::size_t wbase = (std::size_t(ky) * kw + kx) * cin;
              for (int ci = 0; ci < cin; ++ci) {
                const S* wrow = &w.data[(wbase + ci) * cout];
                S* gwrow = &gw.data[(wbase + ci) * cout];
                const S xv = xin[ci];
                S acc = 0;
                for (int c = 0; c < cout; ++c) {
                  acc += wrow[c] * go[c];
                  gwrow[c] += xv * go[c];
                }
                gxin[ci] += acc;
              }
            }
          }
        }
      }
    });
  }

  // align-corners-false bilinear upsample, integer factor >= 1.
  int bilinear_upsample(int a, int factor) {
    if (factor < 1) throw ShapeMismatch("bilinear_upsample: factor must be >= 1");
    const Tensor& x = value(a);
    if (x.rank() != 3) throw ShapeMismatch("bilinear_upsample: rank-3 input expected");
    const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
    const int ho = h * factor, wo = w * factor;
    Tensor y({ho, wo, c});
    auto coords = [factor](int o, int limit, int& i0, int& i1, S& t) {
      double src = (o + 0.5) / factor - 0.5;
      src = std::max(0.0, std::min(src, double(limit - 1)));
      i0 = int(src);
      i1 = std::min(i0 + 1, limit - 1);
      t = S(src - i0);
    };
    for (int oy = 0; oy < ho; ++oy) {
      int y0, y1;
      S ty;
      coords(oy, h, y0, y1, ty);
      for (int ox = 0; ox < wo; ++ox) {
        int x0, x1;
        S tx;
        coords(ox, w, x0, x1, tx);
        const S w00 = (1 - ty) * (1 - tx), w01 = (1 - ty) * tx;
        const S w10 = ty * (1 - tx), w11 = ty * tx;
        S* out = &y.data[(std::size_t(oy) * wo + ox) * c];
        const S* p00 = &x.data[(std::size_t(y0) * w + x0) * c];
        const S* p01 = &x.data[(std::size_t(y0) * w + x1) * c];
        const S* p10 = &x.data[(std::size_t(y1) * w + x0) * c];
        const S* p11 = &x.data[(std::size_t(y1) * w + x1) * c];
        for (int k = 0; k < c; ++k)
          out[k] = w00 * p00[k] + w01 * p01[k] + w10 * p10[k] + w11 * p11[k];
      }
    }
    return push(std::move(y), [this, a, factor](int self) {
      const Tensor& x = value(a);
      const Tensor& g = grad(self);
      Tensor& gx = grad_ref(a);
      const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
      const int ho = h * factor, wo = w * factor;
      auto coords = [factor](int o, int limit, int& i0, int& i1, S& t) {
        double src = (o + 0.5) / factor - 0.5;
        src = std::max(0.0, std::min(src, double(limit - 1)));
        i0 = int(src);
        i1 = std::min(i0 + 1, limit - 1);
        t = S(src - i0);
      };
      for (int oy = 0; oy < ho; ++oy) {
        int y0, y1;
        S ty;
        coords(oy, h, y0, y1, ty);
        for (int ox = 0; ox < wo; ++ox) {
          int x0, x1;
          S tx;
          coords(ox, w, x0, x1, tx);
          const S w00 = (1 - ty) * (1 - tx), w01 = (1 - ty) * tx;
          const S w10 = ty * (1 - tx), w11 = ty * tx;
          const S* go = &g.data[(std::size_t(oy) * wo + ox) * c];
          S* p00 = &gx.data[(std::size_t(y0) * w + x0) * c];
          S* p01 = &gx.data[(std::size_t(y0) * w + x1) * c];
          S* p10 = &gx.data[(std::size_t(y1) * w + x0) * c];
          S* p11 = &gx.data[(std::size_t(y1) * w + x1) * c];
          for (int k = 0; k < c; ++k) {
            p00[k] += w00 * go[k];
            p01[k] += w01 * go[k];
            p10[k] += w10 * go[k];
            p11[k] += w11 * go[k];
          }
        }
      }
    });
  }

  // -- descriptor-batch ops -------------------------------------------------

  // Rows extracted from an (H,W,D) map at the given pixels -> (N,D).
  int gather_pixels(int src, std::vector<Pixel> pixels) {
    const Tensor& x = value(src);
    if (x.rank() != 3) throw ShapeMismatch("gather_pixels: rank-3 source expected");
    const int h = x.dim(0), w = x.dim(1), d = x.dim(2);
    for (const Pixel& p : pixels)
      if (p.u < 0 || p.u >= w || p.v < 0 || p.v >= h)
        throw OutOfBounds("gather_pixels: pixel outside descriptor image");
    Tensor y({int(pixels.size()), d});
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      const S* row = &x.data[(std::size_t(pixels[i].v) * w + pixels[i].u) * d];
      std::copy(row, row + d, &y.data[i * std::size_t(d)]);
    }
    return push(std::move(y),
                [this, src, pixels = std::move(pixels)](int self) {
                  const Tensor& g = grad(self);
                  Tensor& gx = grad_ref(src);
                  const int w = value(src).dim(1), d = value(src).dim(2);
                  for (std::size_t i = 0; i < pixels.size(); ++i) {
                    S* row = &gx.data[(std::size_t(pixels[i].v) * w + pixels[i].u) * d];
                    const S* go = &g.data[i * std::size_t(d)];
                    for (int k = 0; k < d; ++k) row[k] += go[k];
                  }
                });
  }

  int concat_rows(const std::vector<int>& ids) {
    if (ids.empty()) throw ShapeMismatch("concat_rows: empty list");
    const int d = value(ids[0]).dim(1);
    int rows = 0;
    for (int id : ids) {
      if (value(id).rank() != 2 || value(id).dim(1) != d)
        throw ShapeMismatch("concat_rows: column counts differ");
      rows += value(id).dim(0);
    }
    Tensor y({rows, d});
    std::size_t off = 0;
    for (int id : ids) {
      const Tensor& x = value(id);
      std::copy(x.data.begin(), x.data.end(), y.data.begin() + long(off));
      off += x.size();
    }
    return push(std::move(y), [this, ids](int self) {
      const Tensor& g = grad(self);
      std::size_t off = 0;
      for (int id : ids) {
        Tensor& gx = grad_ref(id);
        for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] += g.data[off + i];
        off += gx.size();
      }
    });
  }

  // Row-wise L2 normalization with an underflow guard: rows shorter than eps
  // are scaled by 1/eps instead of throwing, so training never aborts on a
  // transiently tiny descriptor.
  int normalize_rows(int a, S eps = S(1e-12)) {
    const Tensor& x = value(a);
    if (x.rank() != 2) throw ShapeMismatch("normalize_rows: rank-2 input expected");
    const int n = x.dim(0), d = x.dim(1);
    Tensor y({n, d});
    for (int i = 0; i < n; ++i) {
      const S* xr = &x.data[std::size_t(i) * d];
      S* yr = &y.data[std::size_t(i) * d];
      S sq = 0;
      for (int k = 0; k < d; ++k) sq += xr[k] * xr[k];
      S norm = std::sqrt(sq);
      S inv = S(1) / std::max(norm, eps);
      for (int k = 0; k < d; ++k) yr[k] = xr[k] * inv;
    }
    return push(std::move(y), [this, a, eps](int self) {
      const Tensor& x = value(a);
      const Tensor& y = value(self);
      const Tensor& g = grad(self);
      Tensor& gx = grad_ref(a);
      const int n = x.dim(0), d = x.dim(1);
      for (int i = 0; i < n; ++i) {
        const S* xr = &x.data[std::size_t(i) * d];
        const S* yr = &y.data[std::size_t(i) * d];
        const S* gr = &g.data[std::size_t(i) * d];
        S* gxr = &gx.data[std::size_t(i) * d];
        S sq = 0;
        for (int k = 0; k < d; ++k) sq += xr[k] * xr[k];
        S norm = std::sqrt(sq);
        if (norm <= eps) {
          for (int k = 0; k < d; ++k) gxr[k] += gr[k] / eps;
          continue;
        }
        S dot = 0;
        for (int k = 0; k < d; ++k) dot += yr[k] * gr[k];
        S inv = S(1) / norm;
        for (int k = 0; k < d; ++k) gxr[k] += (gr[k] - yr[k] * dot) * inv;
      }
    });
  }

  // C = A * B^T for (N,D) x (M,D) -> (N,M). a == b is allowed (Gram matrix);
  // gradients accumulate through both uses.
  int matmul_nt(int a, int b) {
    const Tensor& xa = value(a);
    const Tensor& xb = value(b);
    if (xa.rank() != 2 || xb.rank() != 2 || xa.dim(1) != xb.dim(1))
      throw ShapeMismatch("matmul_nt: inner dimensions differ");
    const int n = xa.dim(0), m = xb.dim(0), d = xa.dim(1);
    Tensor y({n, m});
    for (int i = 0; i < n; ++i) {
      const S* ar = &xa.data[std::size_t(i) * d];
      for (int j = 0; j < m; ++j) {
        const S* br = &xb.data[std::size_t(j) * d];
        S acc = 0;
        for (int k = 0; k < d; ++k) acc += ar[k] * br[k];
        y.data[std::size_t(i) * m + j] = acc;
      }
    }
    return push(std::move(y), [this, a, b](int self) {
      const Tensor& xa = value(a);
      const Tensor& xb = value(b);
      const Tensor& g = grad(self);
      const int n = xa.dim(0), m = xb.dim(0), d = xa.dim(1);
      Tensor& ga = grad_ref(a);
      Tensor& gb = grad_ref(b);
      // single fused sweep; when a == b both accumulations hit the same grad
      for (int i = 0; i < n; ++i) {
        const S* ar = &xa.data[std::size_t(i) * d];
        S* gar = &ga.data[std::size_t(i) * d];
        const S* gr = &g.data[std::size_t(i) * m];
        for (int j = 0; j < m; ++j) {
          const S gv = gr[j];
          if (gv == S(0)) continue;
          const S* br = &xb.data[std::size_t(j) * d];
          S* gbr = &gb.data[std::size_t(j) * d];
          for (int k = 0; k < d; ++k) {
            gar[k] += gv * br[k];
            gbr[k] += gv * ar[k];
          }
        }
      }
    });
  }

  // Temperature-scaled softmax cross-entropy over a similarity matrix.
  // sim is (2N,2N) ordered [A;B]; the positive of row i is (i+N) mod 2N and
  // the denominator runs over all k != i. Stable via max-subtraction.
  // mean_reduce averages the 2N directed terms, otherwise they are summed.
  int ntxent_from_sim(int sim, S tau, bool mean_reduce = true) {
    const Tensor& s = value(sim);
    if (s.rank() != 2 || s.dim(0) != s.dim(1) || s.dim(0) % 2 != 0)
      throw ShapeMismatch("ntxent_from_sim: (2N,2N) matrix expected");
    if (!(tau > S(0))) throw ConfigError("ntxent_from_sim: tau must be positive");
    const int m = s.dim(0), half = m / 2;
    // softmax rows live until backward; exp() runs once per entry
    auto probs = std::make_shared<std::vector<S>>(std::size_t(m) * m);
    S total = 0;
    for (int i = 0; i < m; ++i) {
      const S* row = &s.data[std::size_t(i) * m];
      S* prow = probs->data() + std::size_t(i) * m;
      S mx = -std::numeric_limits<S>::infinity();
      for (int k = 0; k < m; ++k)
        if (k != i) mx = std::max(mx, row[k] / tau);
      S sum = 0;
      for (int k = 0; k < m; ++k) {
        prow[k] = k == i ? S(0) : std::exp(row[k] / tau - mx);
        sum += prow[k];
      }
      const S inv = S(1) / sum;
      for (int k = 0; k < m; ++k) prow[k] *= inv;
      const int pos = (i + half) % m;
      total += (std::log(sum) + mx) - row[pos] / tau;
    }
    if (mean_reduce) total /= S(m);
    Tensor y({1});
    y.data[0] = total;
    return push(std::move(y),
                [this, sim, tau, mean_reduce, probs = std::move(probs)](int self) {
                  Tensor& gs = grad_ref(sim);
                  const S g = grad(self).data[0];
                  const int m = value(sim).dim(0), half = m / 2;
                  const S w = (mean_reduce ? g / S(m) : g) / tau;
                  for (int i = 0; i < m; ++i) {
                    const S* prow = probs->data() + std::size_t(i) * m;
                    S* grow = &gs.data[std::size_t(i) * m];
                    for (int k = 0; k < m; ++k) grow[k] += w * prow[k];
                    grow[(i + half) % m] -= w;
                  }
                });
  }

  // mean_i ||a_i - b_i||^2 over paired rows.
  int mean_row_sqdist(int a, int b) {
    const Tensor& xa = value(a);
    const Tensor& xb = value(b);
    if (!xa.same_shape(xb) || xa.rank() != 2)
      throw ShapeMismatch("mean_row_sqdist: paired (N,D) inputs expected");
    const int n = xa.dim(0), d = xa.dim(1);
    if (n == 0) throw EmptySet("mean_row_sqdist: empty batch");
    S total = 0;
    for (std::size_t i = 0; i < xa.size(); ++i) {
      S diff = xa.data[i] - xb.data[i];
      total += diff * diff;
    }
    Tensor y({1});
    y.data[0] = total / S(n);
    return push(std::move(y), [this, a, b](int self) {
      const Tensor& xa = value(a);
      const Tensor& xb = value(b);
      Tensor& ga = grad_ref(a);
      Tensor& gb = grad_ref(b);
      const S g = grad(self).data[0] * S(2) / S(xa.dim(0));
      for (std::size_t i = 0; i < xa.size(); ++i) {
        S diff = g * (xa.data[i] - xb.data[i]);
        ga.data[i] += diff;
        gb.data[i] -= diff;
      }
    });
  }

  // mean_i max(0, margin - ||a_i - b_i||)^2 over paired rows.
  int mean_hinge_dist(int a, int b, S margin) {
    const Tensor& xa = value(a);
    const Tensor& xb = value(b);
    if (!xa.same_shape(xb) || xa.rank() != 2)
      throw ShapeMismatch("mean_hinge_dist: paired (N,D) inputs expected");
    const int n = xa.dim(0), d = xa.dim(1);
    if (n == 0) throw EmptySet("mean_hinge_dist: empty batch");
    S total = 0;
    for (int i = 0; i < n; ++i) {
      S dist = row_dist(xa, xb, i, d);
      S viol = margin - dist;
      if (viol > S(0)) total += viol * viol;
    }
    Tensor y({1});
    y.data[0] = total / S(n);
    return push(std::move(y), [this, a, b, margin](int self) {
      const Tensor& xa = value(a);
      const Tensor& xb = value(b);
      Tensor& ga = grad_ref(a);
      Tensor& gb = grad_ref(b);
      const int n = xa.dim(0), d = xa.dim(1);
      const S g = grad(self).data[0] / S(n);
      for (int i = 0; i < n; ++i) {
        S dist = row_dist(xa, xb, i, d);
        S viol = margin - dist;
        if (viol <= S(0) || dist < S(1e-12)) continue;
        const S coef = S(-2) * viol / dist * g;
        const S* ar = &xa.data[std::size_t(i) * d];
        const S* br = &xb.data[std::size_t(i) * d];
        S* gar = &ga.data[std::size_t(i) * d];
        S* gbr = &gb.data[std::size_t(i) * d];
        for (int k = 0; k < d; ++k) {
          S e = coef * (ar[k] - br[k]);
          gar[k] += e;
          gbr[k] -= e;
        }
      }
    });
  }

  // mean over all (i,j) of max(0, margin - ||a_i - b_j||)^2; the cross
  // product is looped, never materialized.
  int mean_hinge_cross(int a, int b, S margin) {
    const Tensor& xa = value(a);
    const Tensor& xb = value(b);
    if (xa.rank() != 2 || xb.rank() != 2 || xa.dim(1) != xb.dim(1))
      throw ShapeMismatch("mean_hinge_cross: (N,D)/(M,D) inputs expected");
    const int na = xa.dim(0), nb = xb.dim(0), d = xa.dim(1);
    if (na == 0 || nb == 0) throw EmptySet("mean_hinge_cross: empty set");
    S total = 0;
    for (int i = 0; i < na; ++i) {
      const S* ar = &xa.data[std::size_t(i) * d];
      for (int j = 0; j < nb; ++j) {
        const S* br = &xb.data[std::size_t(j) * d];
        S sq = 0;
        for (int k = 0; k < d; ++k) {
          S diff = ar[k] - br[k];
          sq += diff * diff;
        }
        S viol = margin - std::sqrt(sq);
        if (viol > S(0)) total += viol * viol;
      }
    }
    Tensor y({1});
    y.data[0] = total / (S(na) * S(nb));
    return push(std::move(y), [this, a, b, margin](int self) {
      const Tensor& xa = value(a);
      const Tensor& xb = value(b);
      Tensor& ga = grad_ref(a);
      Tensor& gb = grad_ref(b);
      const int na = xa.dim(0), nb = xb.dim(0), d = xa.dim(1);
      const S g = grad(self).data[0] / (S(na) * S(nb));
      for (int i = 0; i < na; ++i) {
        const S* ar = &xa.data[std::size_t(i) * d];
        S* gar = &ga.data[std::size_t(i) * d];
        for (int j = 0; j < nb; ++j) {
          const S* br = &xb.data[std::size_t(j) * d];
          S sq = 0;
          for (int k = 0; k < d; ++k) {
            S diff = ar[k] - br[k];
            sq += diff * diff;
          }
          S dist = std::sqrt(sq);
          S viol = margin - dist;
          if (viol <= S(0) || dist < S(1e-12)) continue;
          const S coef = S(-2) * viol / dist * g;
          S* gbr = &gb.data[std::size_t(j) * d];
          for (int k = 0; k < d; ++k) {
            S e = coef * (ar[k] - br[k]);
            gar[k] += e;
            gbr[k] -= e;
          }
        }
      }
    });
  }

  // -- backward -------------------------------------------------------------

  void backward(int root) {
    if (consumed_) throw GraphConsumed("tape.backward: graph already consumed");
    consumed_ = true;
    Node& r = nodes_[std::size_t(root)];
    if (r.value.size() != 1)
      throw ShapeMismatch("tape.backward: root must be a scalar");
    r.grad.data[0] = S(1);
    for (int i = root; i >= 0; --i) {
      if (nodes_[std::size_t(i)].backprop) {
        nodes_[std::size_t(i)].backprop(i);
        nodes_[std::size_t(i)].backprop = nullptr;  // free closures as we go
      }
    }
  }

  bool consumed() const { return consumed_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(int)> backprop;
  };

  static S row_dist(const Tensor& a, const Tensor& b, int i, int d) {
    S sq = 0;
    const S* ar = &a.data[std::size_t(i) * d];
    const S* br = &b.data[std::size_t(i) * d];
    for (int k = 0; k < d; ++k) {
      S diff = ar[k] - br[k];
      sq += diff * diff;
    }
    return std::sqrt(sq);
  }

  Tensor& grad_ref(int id) { return nodes_[std::size_t(id)].grad; }

  int push(Tensor v, std::function<void(int)> back) {
#ifndef NDEBUG
    for (S e : v.data) assert(std::isfinite(double(e)) && "non-finite tensor value");
#endif
    Node n;
    n.grad = Tensor::zeros(v.shape);
    n.value = std::move(v);
    n.backprop = std::move(back);
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
  }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

using Tape = TapeT<float>;
using TapeD = TapeT<double>;

}  // namespace pixdesc
