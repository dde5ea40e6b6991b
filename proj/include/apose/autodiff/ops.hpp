/*
Copyright 2026 The apose Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "apose/autodiff/tape.hpp"

// Differentiable kernels. Each op computes its forward value eagerly and records a
// closure that adds (+=) input gradients from the output gradient.

namespace apose::ad {

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

inline Index last_dim(const Shape& s) { return s.empty() ? 1 : s.back(); }

inline Shape drop_last(Shape s) {
  if (!s.empty()) s.pop_back();
  return s;
}

// Unfolds one C x H x W image into (C kh kw) x (Ho Wo) columns.
template <typename Scalar>
void im2col(const Scalar* x, Index C, Index H, Index W, Index kh, Index kw, Index sh, Index sw, Index ph, Index pw,
            Index Ho, Index Wo, Scalar* cols) {
  for (Index c = 0; c < C; ++c) {
    for (Index i = 0; i < kh; ++i) {
      for (Index j = 0; j < kw; ++j) {
        Scalar* row = cols + ((c * kh + i) * kw + j) * Ho * Wo;
        for (Index oy = 0; oy < Ho; ++oy) {
          const Index iy = oy * sh - ph + i;
          Scalar* dst = row + oy * Wo;
          if (iy < 0 || iy >= H) {
            std::fill(dst, dst + Wo, Scalar(0));
            continue;
          }
          const Scalar* src = x + (c * H + iy) * W;
          for (Index ox = 0; ox < Wo; ++ox) {
            const Index ix = ox * sw - pw + j;
            dst[ox] = (ix >= 0 && ix < W) ? src[ix] : Scalar(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters column gradients back into the image gradient.
template <typename Scalar>
void col2im_add(const Scalar* cols, Index C, Index H, Index W, Index kh, Index kw, Index sh, Index sw, Index ph,
                Index pw, Index Ho, Index Wo, Scalar* gx) {
  for (Index c = 0; c < C; ++c) {
    for (Index i = 0; i < kh; ++i) {
      for (Index j = 0; j < kw; ++j) {
        const Scalar* row = cols + ((c * kh + i) * kw + j) * Ho * Wo;
        for (Index oy = 0; oy < Ho; ++oy) {
          const Index iy = oy * sh - ph + i;
          if (iy < 0 || iy >= H) continue;
          Scalar* dst = gx + (c * H + iy) * W;
          for (Index ox = 0; ox < Wo; ++ox) {
            const Index ix = ox * sw - pw + j;
            if (ix >= 0 && ix < W) dst[ix] += row[oy * Wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename Scalar>
Var add(Tape<Scalar>& t, Var a, Var b) {
  detail::require(t.shape(a) == t.shape(b), "add: shape mismatch");
  Tensor<Scalar> out(t.shape(a), t.value(a).data + t.value(b).data);
  return t.record(std::move(out), {a, b}, [a, b](Tape<Scalar>& tp, Var o) {
    const Vec<Scalar>& g = tp.grad(o);
    if (tp.tracks(a)) tp.grad(a) += g;
    if (tp.tracks(b)) tp.grad(b) += g;
  });
}

template <typename Scalar>
Var sub(Tape<Scalar>& t, Var a, Var b) {
  detail::require(t.shape(a) == t.shape(b), "sub: shape mismatch");
  Tensor<Scalar> out(t.shape(a), t.value(a).data - t.value(b).data);
  return t.record(std::move(out), {a, b}, [a, b](Tape<Scalar>& tp, Var o) {
    const Vec<Scalar>& g = tp.grad(o);
    if (tp.tracks(a)) tp.grad(a) += g;
    if (tp.tracks(b)) tp.grad(b) -= g;
  });
}

template <typename Scalar>
Var scale(Tape<Scalar>& t, Var a, Scalar k) {
  Tensor<Scalar> out(t.shape(a), t.value(a).data * k);
  return t.record(std::move(out), {a}, [a, k](Tape<Scalar>& tp, Var o) { tp.grad(a) += k * tp.grad(o); });
}

template <typename Scalar>
Var square(Tape<Scalar>& t, Var a) {
  Tensor<Scalar> out(t.shape(a), t.value(a).data.array().square().matrix());
  return t.record(std::move(out), {a}, [a](Tape<Scalar>& tp, Var o) {
    tp.grad(a) += (Scalar(2) * tp.value(a).data.array() * tp.grad(o).array()).matrix();
  });
}

template <typename Scalar>
Var reshape(Tape<Scalar>& t, Var a, Shape shape) {
  detail::require(numel(shape) == t.value(a).size(), "reshape: element count changes");
  Tensor<Scalar> out(std::move(shape), t.value(a).data);
  return t.record(std::move(out), {a}, [a](Tape<Scalar>& tp, Var o) { tp.grad(a) += tp.grad(o); });
}

/// Sum of every element, as a scalar.
template <typename Scalar>
Var sum(Tape<Scalar>& t, Var a) {
  Tensor<Scalar> out(Shape{}, Vec<Scalar>::Constant(1, t.value(a).data.sum()));
  return t.record(std::move(out), {a}, [a](Tape<Scalar>& tp, Var o) {
    tp.grad(a).array() += tp.grad(o)[0];
  });
}

/// Mean of every element, as a scalar.
template <typename Scalar>
Var mean(Tape<Scalar>& t, Var a) {
  const auto n = static_cast<Scalar>(t.value(a).size());
  detail::require(n > 0, "mean: empty tensor");
  Tensor<Scalar> out(Shape{}, Vec<Scalar>::Constant(1, t.value(a).data.sum() / n));
  return t.record(std::move(out), {a}, [a, n](Tape<Scalar>& tp, Var o) {
    tp.grad(a).array() += tp.grad(o)[0] / n;
  });
}

template <typename Scalar>
Var leaky_relu(Tape<Scalar>& t, Var a, Scalar slope) {
  const auto& x = t.value(a).data.array();
  Tensor<Scalar> out(t.shape(a), (x > Scalar(0)).select(x, slope * x).matrix());
  return t.record(std::move(out), {a}, [a, slope](Tape<Scalar>& tp, Var o) {
    const auto& x = tp.value(a).data.array();
    tp.grad(a).array() += (x > Scalar(0)).select(tp.grad(o).array(), slope * tp.grad(o).array());
  });
}

template <typename Scalar>
Var relu(Tape<Scalar>& t, Var a) {
  return leaky_relu(t, a, Scalar(0));
}

/// Softmax over the last axis.
template <typename Scalar>
Var softmax(Tape<Scalar>& t, Var a) {
  const Index d = detail::last_dim(t.shape(a));
  const Index rows = t.value(a).size() / d;
  Tensor<Scalar> out(t.shape(a));
  for (Index r = 0; r < rows; ++r) {
    const auto x = t.value(a).data.segment(r * d, d).array();
    const auto e = (x - x.maxCoeff()).exp().eval();
    out.data.segment(r * d, d) = (e / e.sum()).matrix();
  }
  return t.record(std::move(out), {a}, [a, d, rows](Tape<Scalar>& tp, Var o) {
    const Vec<Scalar>& y = tp.value(o).data;
    const Vec<Scalar>& g = tp.grad(o);
    Vec<Scalar>& ga = tp.grad(a);
    for (Index r = 0; r < rows; ++r) {
      const auto yr = y.segment(r * d, d).array();
      const auto gr = g.segment(r * d, d).array();
      ga.segment(r * d, d).array() += yr * (gr - (gr * yr).sum());
    }
  });
}

/// Population standard deviation over the last axis. The gradient at zero variance is taken as zero.
template <typename Scalar>
Var std_reduce(Tape<Scalar>& t, Var a) {
  const Index d = detail::last_dim(t.shape(a));
  const Index rows = t.value(a).size() / d;
  Tensor<Scalar> out(detail::drop_last(t.shape(a)));
  for (Index r = 0; r < rows; ++r) {
    const auto x = t.value(a).data.segment(r * d, d).array();
    out.data[r] = std::sqrt((x - x.mean()).square().mean());
  }
  return t.record(std::move(out), {a}, [a, d, rows](Tape<Scalar>& tp, Var o) {
    const Vec<Scalar>& x = tp.value(a).data;
    const Vec<Scalar>& s = tp.value(o).data;
    const Vec<Scalar>& g = tp.grad(o);
    Vec<Scalar>& ga = tp.grad(a);
    for (Index r = 0; r < rows; ++r) {
      if (s[r] <= Scalar(0)) continue;
      const auto xr = x.segment(r * d, d).array();
      ga.segment(r * d, d).array() += g[r] * (xr - xr.mean()) / (static_cast<Scalar>(d) * s[r]);
    }
  });
}

/// Euclidean norm over the last axis. The gradient at the origin is taken as zero.
template <typename Scalar>
Var row_norm(Tape<Scalar>& t, Var a) {
  const Index d = detail::last_dim(t.shape(a));
  const Index rows = t.value(a).size() / d;
  Tensor<Scalar> out(detail::drop_last(t.shape(a)));
  for (Index r = 0; r < rows; ++r) out.data[r] = t.value(a).data.segment(r * d, d).norm();
  return t.record(std::move(out), {a}, [a, d, rows](Tape<Scalar>& tp, Var o) {
    const Vec<Scalar>& x = tp.value(a).data;
    const Vec<Scalar>& n = tp.value(o).data;
    const Vec<Scalar>& g = tp.grad(o);
    Vec<Scalar>& ga = tp.grad(a);
    for (Index r = 0; r < rows; ++r) {
      if (n[r] > Scalar(0)) ga.segment(r * d, d) += (g[r] / n[r]) * x.segment(r * d, d);
    }
  });
}

/// Mean over the last axis.
template <typename Scalar>
Var mean_last(Tape<Scalar>& t, Var a) {
  const Index d = detail::last_dim(t.shape(a));
  const Index rows = t.value(a).size() / d;
  Tensor<Scalar> out(detail::drop_last(t.shape(a)));
  out.data = Eigen::Map<const RowMatrix<Scalar>>(t.value(a).data.data(), rows, d).rowwise().mean();
  return t.record(std::move(out), {a}, [a, d, rows](Tape<Scalar>& tp, Var o) {
    Eigen::Map<RowMatrix<Scalar>> ga(tp.grad(a).data(), rows, d);
    ga.colwise() += tp.grad(o) / static_cast<Scalar>(d);
  });
}

/// Non-overlapping average pooling of the last axis by `factor`.
template <typename Scalar>
Var avg_pool_last(Tape<Scalar>& t, Var a, Index factor) {
  const Index d = detail::last_dim(t.shape(a));
  detail::require(factor > 0 && d % factor == 0, "avg_pool_last: last axis not divisible by factor");
  Shape shape = t.shape(a);
  shape.back() = d / factor;
  const Index groups = t.value(a).size() / factor;
  Tensor<Scalar> out(shape);
  out.data = Eigen::Map<const RowMatrix<Scalar>>(t.value(a).data.data(), groups, factor).rowwise().mean();
  return t.record(std::move(out), {a}, [a, factor, groups](Tape<Scalar>& tp, Var o) {
    Eigen::Map<RowMatrix<Scalar>> ga(tp.grad(a).data(), groups, factor);
    ga.colwise() += tp.grad(o) / static_cast<Scalar>(factor);
  });
}

/// N x A x B -> N x B x A.
template <typename Scalar>
Var transpose12(Tape<Scalar>& t, Var a) {
  const Shape& s = t.shape(a);
  detail::require(s.size() == 3, "transpose12: expected a rank-3 tensor");
  const Index N = s[0], A = s[1], B = s[2];
  Tensor<Scalar> out(Shape{N, B, A});
  for (Index n = 0; n < N; ++n) {
    Eigen::Map<const RowMatrix<Scalar>> src(t.value(a).data.data() + n * A * B, A, B);
    Eigen::Map<RowMatrix<Scalar>>(out.data.data() + n * A * B, B, A) = src.transpose();
  }
  return t.record(std::move(out), {a}, [a, N, A, B](Tape<Scalar>& tp, Var o) {
    for (Index n = 0; n < N; ++n) {
      Eigen::Map<const RowMatrix<Scalar>> g(tp.grad(o).data() + n * A * B, B, A);
      Eigen::Map<RowMatrix<Scalar>>(tp.grad(a).data() + n * A * B, A, B) += g.transpose();
    }
  });
}

/// Forward differences along axis 1 of an N x T x D tensor: out[:, i] = x[:, i + 1] - x[:, i].
template <typename Scalar>
Var time_diff(Tape<Scalar>& t, Var a) {
  const Shape& s = t.shape(a);
  detail::require(s.size() == 3 && s[1] >= 2, "time_diff: expected N x T x D with T >= 2");
  const Index N = s[0], T = s[1], D = s[2];
  Tensor<Scalar> out(Shape{N, T - 1, D});
  for (Index n = 0; n < N; ++n)
    for (Index i = 0; i + 1 < T; ++i)
      out.data.segment((n * (T - 1) + i) * D, D) =
          t.value(a).data.segment((n * T + i + 1) * D, D) - t.value(a).data.segment((n * T + i) * D, D);
  return t.record(std::move(out), {a}, [a, N, T, D](Tape<Scalar>& tp, Var o) {
    const Vec<Scalar>& g = tp.grad(o);
    Vec<Scalar>& ga = tp.grad(a);
    for (Index n = 0; n < N; ++n)
      for (Index i = 0; i + 1 < T; ++i) {
        const auto gi = g.segment((n * (T - 1) + i) * D, D);
        ga.segment((n * T + i + 1) * D, D) += gi;
        ga.segment((n * T + i) * D, D) -= gi;
      }
  });
}

/// x (N x D) * w (D x E) + b (E).
template <typename Scalar>
Var linear(Tape<Scalar>& t, Var x, Var w, Var b) {
  const Shape &xs = t.shape(x), &ws = t.shape(w), &bs = t.shape(b);
  detail::require(xs.size() == 2 && ws.size() == 2 && xs[1] == ws[0], "linear: expected N x D input and D x E weight");
  detail::require(bs.size() == 1 && bs[0] == ws[1], "linear: bias must have E entries");
  const Index N = xs[0], D = xs[1], E = ws[1];
  Tensor<Scalar> out(Shape{N, E});
  using CMap = Eigen::Map<const RowMatrix<Scalar>>;
  Eigen::Map<RowMatrix<Scalar>> y(out.data.data(), N, E);
  y.noalias() = CMap(t.value(x).data.data(), N, D) * CMap(t.value(w).data.data(), D, E);
  y.rowwise() += t.value(b).data.transpose();
  return t.record(std::move(out), {x, w, b}, [x, w, b, N, D, E](Tape<Scalar>& tp, Var o) {
    CMap gy(tp.grad(o).data(), N, E);
    if (tp.tracks(x))
      Eigen::Map<RowMatrix<Scalar>>(tp.grad(x).data(), N, D).noalias() +=
          gy * CMap(tp.value(w).data.data(), D, E).transpose();
    if (tp.tracks(w))
      Eigen::Map<RowMatrix<Scalar>>(tp.grad(w).data(), D, E).noalias() +=
          CMap(tp.value(x).data.data(), N, D).transpose() * gy;
    if (tp.tracks(b)) tp.grad(b) += gy.colwise().sum().transpose();
  });
}

struct Conv2dOptions {
  Index stride_h = 1;
  Index stride_w = 1;
  Index pad_h = 0;
  Index pad_w = 0;
};

/// Cross-correlation of x (N x C x H x W) with w (K x C x kh x kw) plus bias b (K).
template <typename Scalar>
Var conv2d(Tape<Scalar>& t, Var x, Var w, Var b, Conv2dOptions opt = {}) {
  const Shape &xs = t.shape(x), &ws = t.shape(w), &bs = t.shape(b);
  detail::require(xs.size() == 4 && ws.size() == 4, "conv2d: expected rank-4 input and kernel");
  detail::require(xs[1] == ws[1], "conv2d: channel mismatch " + to_string(xs) + " vs " + to_string(ws));
  detail::require(bs.size() == 1 && bs[0] == ws[0], "conv2d: bias must have K entries");
  detail::require(opt.stride_h > 0 && opt.stride_w > 0 && opt.pad_h >= 0 && opt.pad_w >= 0, "conv2d: bad stride/pad");
  const Index N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const Index K = ws[0], kh = ws[2], kw = ws[3];
  const Index span_h = H + 2 * opt.pad_h - kh, span_w = W + 2 * opt.pad_w - kw;
  detail::require(span_h >= 0 && span_w >= 0, "conv2d: kernel larger than padded input");
  detail::require(span_h % opt.stride_h == 0 && span_w % opt.stride_w == 0, "conv2d: non-integral output size");
  const Index Ho = span_h / opt.stride_h + 1, Wo = span_w / opt.stride_w + 1;
  const Index P = C * kh * kw, Q = Ho * Wo;

  using CMap = Eigen::Map<const RowMatrix<Scalar>>;
  Tensor<Scalar> out(Shape{N, K, Ho, Wo});
  RowMatrix<Scalar> cols(P, Q);
  CMap wm(t.value(w).data.data(), K, P);
  for (Index n = 0; n < N; ++n) {
    detail::im2col(t.value(x).data.data() + n * C * H * W, C, H, W, kh, kw, opt.stride_h, opt.stride_w, opt.pad_h,
                   opt.pad_w, Ho, Wo, cols.data());
    Eigen::Map<RowMatrix<Scalar>> y(out.data.data() + n * K * Q, K, Q);
    y.noalias() = wm * cols;
    y.colwise() += t.value(b).data;
  }
  return t.record(std::move(out), {x, w, b}, [=](Tape<Scalar>& tp, Var o) {
    RowMatrix<Scalar> cols(P, Q);
    CMap wm(tp.value(w).data.data(), K, P);
    const bool gx = tp.tracks(x), gw = tp.tracks(w), gb = tp.tracks(b);
    for (Index n = 0; n < N; ++n) {
      CMap gy(tp.grad(o).data() + n * K * Q, K, Q);
      if (gb) tp.grad(b) += gy.rowwise().sum();
      if (gw) {
        detail::im2col(tp.value(x).data.data() + n * C * H * W, C, H, W, kh, kw, opt.stride_h, opt.stride_w,
                       opt.pad_h, opt.pad_w, Ho, Wo, cols.data());
        Eigen::Map<RowMatrix<Scalar>>(tp.grad(w).data(), K, P).noalias() += gy * cols.transpose();
      }
      if (gx) {
        cols.noalias() = wm.transpose() * gy;
        detail::col2im_add(cols.data(), C, H, W, kh, kw, opt.stride_h, opt.stride_w, opt.pad_h, opt.pad_w, Ho, Wo,
                           tp.grad(x).data() + n * C * H * W);
      }
    }
  });
}

/// 1-D analogue of conv2d: x (N x C x L), w (K x C x kl), b (K).
template <typename Scalar>
Var conv1d(Tape<Scalar>& t, Var x, Var w, Var b, Index stride = 1, Index pad = 0) {
  const Shape &xs = t.shape(x), &ws = t.shape(w);
  detail::require(xs.size() == 3 && ws.size() == 3, "conv1d: expected rank-3 input and kernel");
  const Var x4 = reshape(t, x, Shape{xs[0], xs[1], 1, xs[2]});
  const Var w4 = reshape(t, w, Shape{ws[0], ws[1], 1, ws[2]});
  const Var y = conv2d(t, x4, w4, b, Conv2dOptions{1, stride, 0, pad});
  const Shape& ys = t.shape(y);
  return reshape(t, y, Shape{ys[0], ys[1], ys[3]});
}

/// Mean over rows of -sum(target * log(max(p, 1e-12))); `target` is a constant of the same shape.
template <typename Scalar>
Var soft_cross_entropy(Tape<Scalar>& t, Var probs, const Tensor<Scalar>& target) {
  detail::require(t.shape(probs) == target.shape, "soft_cross_entropy: shape mismatch");
  const Index d = detail::last_dim(target.shape);
  const auto rows = static_cast<Scalar>(target.size() / d);
  const auto p = t.value(probs).data.array().max(Scalar(1e-12));
  Tensor<Scalar> out(Shape{}, Vec<Scalar>::Constant(1, -(target.data.array() * p.log()).sum() / rows));
  return t.record(std::move(out), {probs}, [probs, target, rows](Tape<Scalar>& tp, Var o) {
    const auto p = tp.value(probs).data.array();
    const Scalar g = tp.grad(o)[0];
    tp.grad(probs).array() += (p > Scalar(1e-12)).select(-g * target.data.array() / (p * rows), Scalar(0));
  });
}

}  // namespace apose::ad
