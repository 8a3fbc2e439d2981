#include "pnidiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pnidiff {

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value()))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_to_string(a.value().shape) + " vs " +
                                shape_to_string(b.value().shape));
}

void check_rank(const Var& x, int rank, const char* op) {
  if (x.value().ndim() != rank)
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                ", got shape " + shape_to_string(x.value().shape));
}

const char* axis_name(int i) {
  static const char* names[] = {"channel", "depth", "height", "width"};
  return names[i];
}

}  // namespace

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Grid out = a.value();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
  auto an = a.node(), bn = b.node();
  return Var(detail::make_node(std::move(out), {an, bn}, [an, bn](Node& self) {
    if (an->needs_grad) axpy(1.0, self.grad, an->ensure_grad());
    if (bn->needs_grad) axpy(1.0, self.grad, bn->ensure_grad());
  }));
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Grid out = a.value();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  auto an = a.node(), bn = b.node();
  return Var(detail::make_node(std::move(out), {an, bn}, [an, bn](Node& self) {
    if (an->needs_grad) axpy(1.0, self.grad, an->ensure_grad());
    if (bn->needs_grad) axpy(-1.0, self.grad, bn->ensure_grad());
  }));
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Grid out = a.value();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  auto an = a.node(), bn = b.node();
  return Var(detail::make_node(std::move(out), {an, bn}, [an, bn](Node& self) {
    if (an->needs_grad) {
      Grid& ga = an->ensure_grad();
      for (int64_t i = 0; i < self.grad.numel(); ++i) ga[i] += self.grad[i] * bn->value[i];
    }
    if (bn->needs_grad) {
      Grid& gb = bn->ensure_grad();
      for (int64_t i = 0; i < self.grad.numel(); ++i) gb[i] += self.grad[i] * an->value[i];
    }
  }));
}

Var scale(const Var& a, double k) {
  Grid out = a.value();
  for (auto& v : out.data) v *= k;
  auto an = a.node();
  return Var(detail::make_node(std::move(out), {an}, [an, k](Node& self) {
    if (an->needs_grad) axpy(k, self.grad, an->ensure_grad());
  }));
}

Var sum(const Var& a) {
  Grid out({1});
  out[0] = sum_value(a.value());
  auto an = a.node();
  return Var(detail::make_node(std::move(out), {an}, [an](Node& self) {
    if (!an->needs_grad) return;
    Grid& ga = an->ensure_grad();
    const double g = self.grad[0];
    for (auto& v : ga.data) v += g;
  }));
}

Var mean(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a.value().numel());
  Grid out({1});
  out[0] = sum_value(a.value()) * inv;
  auto an = a.node();
  return Var(detail::make_node(std::move(out), {an}, [an, inv](Node& self) {
    if (!an->needs_grad) return;
    Grid& ga = an->ensure_grad();
    const double g = self.grad[0] * inv;
    for (auto& v : ga.data) v += g;
  }));
}

Var relu(const Var& x) {
  Grid out = x.value();
  for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
  auto xn = x.node();
  return Var(detail::make_node(std::move(out), {xn}, [xn](Node& self) {
    if (!xn->needs_grad) return;
    Grid& gx = xn->ensure_grad();
    for (int64_t i = 0; i < self.grad.numel(); ++i)
      if (xn->value[i] > 0.0) gx[i] += self.grad[i];
  }));
}

Var sigmoid(const Var& x) {
  Grid out = x.value();
  for (auto& v : out.data) v = sigmoid_scalar(v);
  auto xn = x.node();
  return Var(detail::make_node(std::move(out), {xn}, [xn](Node& self) {
    if (!xn->needs_grad) return;
    Grid& gx = xn->ensure_grad();
    for (int64_t i = 0; i < self.grad.numel(); ++i) {
      const double s = self.value[i];
      gx[i] += self.grad[i] * s * (1.0 - s);
    }
  }));
}

Var vexp(const Var& x) {
  Grid out = x.value();
  for (auto& v : out.data) v = std::exp(v);
  auto xn = x.node();
  return Var(detail::make_node(std::move(out), {xn}, [xn](Node& self) {
    if (!xn->needs_grad) return;
    Grid& gx = xn->ensure_grad();
    for (int64_t i = 0; i < self.grad.numel(); ++i) gx[i] += self.grad[i] * self.value[i];
  }));
}

// ---------------------------------------------------------------------------
// conv3d

namespace kernels {

static void conv3d_check(const Grid& x, const Grid& w, const Grid* bias, Dims3 pad,
                         Dims3 stride) {
  if (x.ndim() != 4)
    throw std::invalid_argument("conv3d: input must be rank 4 [C,D,H,W], got " +
                                shape_to_string(x.shape));
  if (w.ndim() != 5)
    throw std::invalid_argument("conv3d: kernel must be rank 5 [Cout,Cin,kd,kh,kw], got " +
                                shape_to_string(w.shape));
  if (w.shape[1] != x.shape[0])
    throw std::invalid_argument(
        "conv3d: channel axis mismatch: kernel expects " + std::to_string(w.shape[1]) +
        " input channels, input has " + std::to_string(x.shape[0]));
  for (int i = 0; i < 3; ++i) {
    if (stride[static_cast<size_t>(i)] < 1)
      throw std::invalid_argument("conv3d: stride along " + std::string(axis_name(i + 1)) +
                                  " axis must be >= 1");
    const int64_t padded = x.shape[static_cast<size_t>(i + 1)] + 2 * pad[static_cast<size_t>(i)];
    if (w.shape[static_cast<size_t>(i + 2)] > padded)
      throw std::invalid_argument("conv3d: kernel extent " +
                                  std::to_string(w.shape[static_cast<size_t>(i + 2)]) +
                                  " exceeds padded input extent " + std::to_string(padded) +
                                  " along " + axis_name(i + 1) + " axis");
  }
  if (bias) {
    if (bias->ndim() != 1 || bias->shape[0] != w.shape[0])
      throw std::invalid_argument("conv3d: bias must have shape [" + std::to_string(w.shape[0]) +
                                  "], got " + shape_to_string(bias->shape));
  }
}

Grid conv3d_forward(const Grid& x, const Grid& w, const Grid* bias, Dims3 pad, Dims3 stride) {
  conv3d_check(x, w, bias, pad, stride);
  const int64_t Cin = x.shape[0], D = x.shape[1], H = x.shape[2], W = x.shape[3];
  const int64_t Cout = w.shape[0], kd = w.shape[2], kh = w.shape[3], kw = w.shape[4];
  const int64_t OD = (D + 2 * pad[0] - kd) / stride[0] + 1;
  const int64_t OH = (H + 2 * pad[1] - kh) / stride[1] + 1;
  const int64_t OW = (W + 2 * pad[2] - kw) / stride[2] + 1;

  Grid out({Cout, OD, OH, OW});
  const double* xd = x.data.data();
  const double* wd = w.data.data();
  double* od = out.data.data();

  for (int64_t co = 0; co < Cout; ++co) {
    const double b = bias ? (*bias)[co] : 0.0;
    for (int64_t oz = 0; oz < OD; ++oz) {
      const int64_t iz0 = oz * stride[0] - pad[0];
      const int64_t kz_lo = std::max<int64_t>(0, -iz0);
      const int64_t kz_hi = std::min(kd, D - iz0);
      for (int64_t oy = 0; oy < OH; ++oy) {
        const int64_t iy0 = oy * stride[1] - pad[1];
        const int64_t ky_lo = std::max<int64_t>(0, -iy0);
        const int64_t ky_hi = std::min(kh, H - iy0);
        for (int64_t ox = 0; ox < OW; ++ox) {
          const int64_t ix0 = ox * stride[2] - pad[2];
          const int64_t kx_lo = std::max<int64_t>(0, -ix0);
          const int64_t kx_hi = std::min(kw, W - ix0);
          double acc = b;
          for (int64_t ci = 0; ci < Cin; ++ci) {
            for (int64_t kz = kz_lo; kz < kz_hi; ++kz) {
              const int64_t iz = iz0 + kz;
              for (int64_t ky = ky_lo; ky < ky_hi; ++ky) {
                const int64_t iy = iy0 + ky;
                const double* xrow = xd + ((ci * D + iz) * H + iy) * W + ix0;
                const double* wrow = wd + (((co * Cin + ci) * kd + kz) * kh + ky) * kw;
                for (int64_t kx = kx_lo; kx < kx_hi; ++kx) acc += xrow[kx] * wrow[kx];
              }
            }
          }
          od[((co * OD + oz) * OH + oy) * OW + ox] = acc;
        }
      }
    }
  }
  return out;
}

void conv3d_backward(const Grid& gout, const Grid& x, const Grid& w, Dims3 pad, Dims3 stride,
                     Grid* gx, Grid* gw, Grid* gb) {
  const int64_t Cin = x.shape[0], D = x.shape[1], H = x.shape[2], W = x.shape[3];
  const int64_t Cout = w.shape[0], kd = w.shape[2], kh = w.shape[3], kw = w.shape[4];
  const int64_t OD = gout.shape[1], OH = gout.shape[2], OW = gout.shape[3];

  const double* xd = x.data.data();
  const double* wd = w.data.data();
  const double* gd = gout.data.data();

  if (gb) {
    for (int64_t co = 0; co < Cout; ++co) {
      double s = 0.0;
      const double* gc = gd + co * OD * OH * OW;
      for (int64_t i = 0; i < OD * OH * OW; ++i) s += gc[i];
      (*gb)[co] += s;
    }
  }
  if (!gx && !gw) return;

  double* gxd = gx ? gx->data.data() : nullptr;
  double* gwd = gw ? gw->data.data() : nullptr;

  for (int64_t co = 0; co < Cout; ++co) {
    for (int64_t oz = 0; oz < OD; ++oz) {
      const int64_t iz0 = oz * stride[0] - pad[0];
      const int64_t kz_lo = std::max<int64_t>(0, -iz0);
      const int64_t kz_hi = std::min(kd, D - iz0);
      for (int64_t oy = 0; oy < OH; ++oy) {
        const int64_t iy0 = oy * stride[1] - pad[1];
        const int64_t ky_lo = std::max<int64_t>(0, -iy0);
        const int64_t ky_hi = std::min(kh, H - iy0);
        for (int64_t ox = 0; ox < OW; ++ox) {
          const int64_t ix0 = ox * stride[2] - pad[2];
          const int64_t kx_lo = std::max<int64_t>(0, -ix0);
          const int64_t kx_hi = std::min(kw, W - ix0);
          const double g = gd[((co * OD + oz) * OH + oy) * OW + ox];
          if (g == 0.0) continue;
          for (int64_t ci = 0; ci < Cin; ++ci) {
            for (int64_t kz = kz_lo; kz < kz_hi; ++kz) {
              const int64_t iz = iz0 + kz;
              for (int64_t ky = ky_lo; ky < ky_hi; ++ky) {
                const int64_t iy = iy0 + ky;
                const int64_t xoff = ((ci * D + iz) * H + iy) * W + ix0;
                const int64_t woff = (((co * Cin + ci) * kd + kz) * kh + ky) * kw;
                if (gxd) {
                  for (int64_t kx = kx_lo; kx < kx_hi; ++kx) gxd[xoff + kx] += g * wd[woff + kx];
                }
                if (gwd) {
                  for (int64_t kx = kx_lo; kx < kx_hi; ++kx) gwd[woff + kx] += g * xd[xoff + kx];
                }
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace kernels

Var conv3d(const Var& x, const Var& w, const Var& b, Dims3 pad, Dims3 stride) {
  Grid out = kernels::conv3d_forward(x.value(), w.value(), &b.value(), pad, stride);
  auto xn = x.node(), wn = w.node(), bn = b.node();
  return Var(detail::make_node(std::move(out), {xn, wn, bn}, [xn, wn, bn, pad, stride](Node& self) {
    Grid* gx = xn->needs_grad ? &xn->ensure_grad() : nullptr;
    Grid* gw = wn->needs_grad ? &wn->ensure_grad() : nullptr;
    Grid* gb = bn->needs_grad ? &bn->ensure_grad() : nullptr;
    kernels::conv3d_backward(self.grad, xn->value, wn->value, pad, stride, gx, gw, gb);
  }));
}

// ---------------------------------------------------------------------------
// pooling

Var global_pool(const Var& x, PoolMode mode) {
  check_rank(x, 4, "global_pool");
  const Grid& in = x.value();
  const int64_t C = in.shape[0];
  const int64_t S = in.shape[1] * in.shape[2] * in.shape[3];
  Grid out({C});
  std::vector<int64_t> argmax;
  if (mode == PoolMode::Avg) {
    for (int64_t c = 0; c < C; ++c) {
      double s = 0.0;
      const double* p = in.data.data() + c * S;
      for (int64_t i = 0; i < S; ++i) s += p[i];
      out[c] = s / static_cast<double>(S);
    }
  } else {
    argmax.resize(static_cast<size_t>(C));
    for (int64_t c = 0; c < C; ++c) {
      const double* p = in.data.data() + c * S;
      int64_t best = 0;
      for (int64_t i = 1; i < S; ++i)
        if (p[i] > p[best]) best = i;  // ties keep first occurrence
      out[c] = p[best];
      argmax[static_cast<size_t>(c)] = best;
    }
  }
  auto xn = x.node();
  return Var(detail::make_node(
      std::move(out), {xn}, [xn, mode, S, argmax = std::move(argmax)](Node& self) {
        if (!xn->needs_grad) return;
        Grid& gx = xn->ensure_grad();
        const int64_t C = self.value.shape[0];
        if (mode == PoolMode::Avg) {
          const double inv = 1.0 / static_cast<double>(S);
          for (int64_t c = 0; c < C; ++c) {
            const double g = self.grad[c] * inv;
            double* p = gx.data.data() + c * S;
            for (int64_t i = 0; i < S; ++i) p[i] += g;
          }
        } else {
          for (int64_t c = 0; c < C; ++c)
            gx.data[static_cast<size_t>(c * S + argmax[static_cast<size_t>(c)])] += self.grad[c];
        }
      }));
}

Var channel_pool(const Var& x, PoolMode mode) {
  check_rank(x, 4, "channel_pool");
  const Grid& in = x.value();
  const int64_t C = in.shape[0];
  const int64_t S = in.shape[1] * in.shape[2] * in.shape[3];
  Grid out({1, in.shape[1], in.shape[2], in.shape[3]});
  std::vector<int64_t> argmax;
  if (mode == PoolMode::Avg) {
    for (int64_t i = 0; i < S; ++i) {
      double s = 0.0;
      for (int64_t c = 0; c < C; ++c) s += in.data[static_cast<size_t>(c * S + i)];
      out[i] = s / static_cast<double>(C);
    }
  } else {
    argmax.resize(static_cast<size_t>(S));
    for (int64_t i = 0; i < S; ++i) {
      int64_t best = 0;
      for (int64_t c = 1; c < C; ++c)
        if (in.data[static_cast<size_t>(c * S + i)] > in.data[static_cast<size_t>(best * S + i)])
          best = c;
      out[i] = in.data[static_cast<size_t>(best * S + i)];
      argmax[static_cast<size_t>(i)] = best;
    }
  }
  auto xn = x.node();
  return Var(detail::make_node(
      std::move(out), {xn}, [xn, mode, C, S, argmax = std::move(argmax)](Node& self) {
        if (!xn->needs_grad) return;
        Grid& gx = xn->ensure_grad();
        if (mode == PoolMode::Avg) {
          const double inv = 1.0 / static_cast<double>(C);
          for (int64_t i = 0; i < S; ++i) {
            const double g = self.grad[i] * inv;
            for (int64_t c = 0; c < C; ++c) gx.data[static_cast<size_t>(c * S + i)] += g;
          }
        } else {
          for (int64_t i = 0; i < S; ++i)
            gx.data[static_cast<size_t>(argmax[static_cast<size_t>(i)] * S + i)] += self.grad[i];
        }
      }));
}

Var affine(const Var& x, const Var& w, const Var& b) {
  check_rank(x, 1, "affine");
  check_rank(w, 2, "affine weights");
  check_rank(b, 1, "affine bias");
  const int64_t n = x.value().shape[0];
  const int64_t m = w.value().shape[0];
  if (w.value().shape[1] != n)
    throw std::invalid_argument("affine: weight columns " + std::to_string(w.value().shape[1]) +
                                " do not match input length " + std::to_string(n));
  if (b.value().shape[0] != m)
    throw std::invalid_argument("affine: bias length " + std::to_string(b.value().shape[0]) +
                                " does not match weight rows " + std::to_string(m));
  Grid out({m});
  for (int64_t i = 0; i < m; ++i) {
    double acc = b.value()[i];
    const double* wrow = w.value().data.data() + i * n;
    for (int64_t j = 0; j < n; ++j) acc += wrow[j] * x.value()[j];
    out[i] = acc;
  }
  auto xn = x.node(), wn = w.node(), bn = b.node();
  return Var(detail::make_node(std::move(out), {xn, wn, bn}, [xn, wn, bn, m, n](Node& self) {
    if (xn->needs_grad) {
      Grid& gx = xn->ensure_grad();
      for (int64_t i = 0; i < m; ++i) {
        const double g = self.grad[i];
        const double* wrow = wn->value.data.data() + i * n;
        for (int64_t j = 0; j < n; ++j) gx[j] += g * wrow[j];
      }
    }
    if (wn->needs_grad) {
      Grid& gw = wn->ensure_grad();
      for (int64_t i = 0; i < m; ++i) {
        const double g = self.grad[i];
        double* grow = gw.data.data() + i * n;
        for (int64_t j = 0; j < n; ++j) grow[j] += g * xn->value[j];
      }
    }
    if (bn->needs_grad) axpy(1.0, self.grad, bn->ensure_grad());
  }));
}

Var upsample_nearest(const Var& x, Dims3 target) {
  check_rank(x, 4, "upsample_nearest");
  const Grid& in = x.value();
  const int64_t C = in.shape[0], D = in.shape[1], H = in.shape[2], W = in.shape[3];
  const int64_t TD = target[0], TH = target[1], TW = target[2];
  if (TD < 1 || TH < 1 || TW < 1)
    throw std::invalid_argument("upsample_nearest: target extents must be >= 1");
  Grid out({C, TD, TH, TW});
  for (int64_t c = 0; c < C; ++c)
    for (int64_t d = 0; d < TD; ++d) {
      const int64_t sd = d * D / TD;
      for (int64_t h = 0; h < TH; ++h) {
        const int64_t sh = h * H / TH;
        for (int64_t w = 0; w < TW; ++w) out.at(c, d, h, w) = in.at(c, sd, sh, w * W / TW);
      }
    }
  auto xn = x.node();
  return Var(detail::make_node(std::move(out), {xn}, [xn, D, H, W, TD, TH, TW](Node& self) {
    if (!xn->needs_grad) return;
    Grid& gx = xn->ensure_grad();
    const int64_t C = gx.shape[0];
    for (int64_t c = 0; c < C; ++c)
      for (int64_t d = 0; d < TD; ++d) {
        const int64_t sd = d * D / TD;
        for (int64_t h = 0; h < TH; ++h) {
          const int64_t sh = h * H / TH;
          for (int64_t w = 0; w < TW; ++w) gx.at(c, sd, sh, w * W / TW) += self.grad.at(c, d, h, w);
        }
      }
  }));
}

Var concat_channels(const Var& a, const Var& b) {
  check_rank(a, 4, "concat_channels");
  check_rank(b, 4, "concat_channels");
  const Grid& ga = a.value();
  const Grid& gb = b.value();
  for (int i = 1; i < 4; ++i)
    if (ga.shape[static_cast<size_t>(i)] != gb.shape[static_cast<size_t>(i)])
      throw std::invalid_argument(std::string("concat_channels: ") + axis_name(i) +
                                  " extents differ: " + shape_to_string(ga.shape) + " vs " +
                                  shape_to_string(gb.shape));
  const int64_t Ca = ga.shape[0], Cb = gb.shape[0];
  Grid out({Ca + Cb, ga.shape[1], ga.shape[2], ga.shape[3]});
  std::copy(ga.data.begin(), ga.data.end(), out.data.begin());
  std::copy(gb.data.begin(), gb.data.end(), out.data.begin() + ga.data.size());
  auto an = a.node(), bn = b.node();
  const size_t na = ga.data.size();
  return Var(detail::make_node(std::move(out), {an, bn}, [an, bn, na](Node& self) {
    if (an->needs_grad) {
      Grid& g = an->ensure_grad();
      for (size_t i = 0; i < na; ++i) g.data[i] += self.grad.data[i];
    }
    if (bn->needs_grad) {
      Grid& g = bn->ensure_grad();
      for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[na + i];
    }
  }));
}

namespace {

void check_channel_vector(const Var& x, const Var& v, const char* op) {
  check_rank(x, 4, op);
  check_rank(v, 1, op);
  if (v.value().shape[0] != x.value().shape[0])
    throw std::invalid_argument(std::string(op) + ": vector length " +
                                std::to_string(v.value().shape[0]) +
                                " does not match channel extent " +
                                std::to_string(x.value().shape[0]));
}

}  // namespace

Var mul_channel_vector(const Var& x, const Var& v) {
  check_channel_vector(x, v, "mul_channel_vector");
  const Grid& in = x.value();
  const int64_t C = in.shape[0];
  const int64_t S = in.shape[1] * in.shape[2] * in.shape[3];
  Grid out = in;
  for (int64_t c = 0; c < C; ++c) {
    const double k = v.value()[c];
    double* p = out.data.data() + c * S;
    for (int64_t i = 0; i < S; ++i) p[i] *= k;
  }
  auto xn = x.node(), vn = v.node();
  return Var(detail::make_node(std::move(out), {xn, vn}, [xn, vn, C, S](Node& self) {
    if (xn->needs_grad) {
      Grid& gx = xn->ensure_grad();
      for (int64_t c = 0; c < C; ++c) {
        const double k = vn->value[c];
        const double* g = self.grad.data.data() + c * S;
        double* p = gx.data.data() + c * S;
        for (int64_t i = 0; i < S; ++i) p[i] += g[i] * k;
      }
    }
    if (vn->needs_grad) {
      Grid& gv = vn->ensure_grad();
      for (int64_t c = 0; c < C; ++c) {
        const double* g = self.grad.data.data() + c * S;
        const double* xp = xn->value.data.data() + c * S;
        double s = 0.0;
        for (int64_t i = 0; i < S; ++i) s += g[i] * xp[i];
        gv[c] += s;
      }
    }
  }));
}

Var add_channel_vector(const Var& x, const Var& v) {
  check_channel_vector(x, v, "add_channel_vector");
  const Grid& in = x.value();
  const int64_t C = in.shape[0];
  const int64_t S = in.shape[1] * in.shape[2] * in.shape[3];
  Grid out = in;
  for (int64_t c = 0; c < C; ++c) {
    const double k = v.value()[c];
    double* p = out.data.data() + c * S;
    for (int64_t i = 0; i < S; ++i) p[i] += k;
  }
  auto xn = x.node(), vn = v.node();
  return Var(detail::make_node(std::move(out), {xn, vn}, [xn, vn, C, S](Node& self) {
    if (xn->needs_grad) axpy(1.0, self.grad, xn->ensure_grad());
    if (vn->needs_grad) {
      Grid& gv = vn->ensure_grad();
      for (int64_t c = 0; c < C; ++c) {
        const double* g = self.grad.data.data() + c * S;
        double s = 0.0;
        for (int64_t i = 0; i < S; ++i) s += g[i];
        gv[c] += s;
      }
    }
  }));
}

Var mul_spatial_map(const Var& x, const Var& m) {
  check_rank(x, 4, "mul_spatial_map");
  check_rank(m, 4, "mul_spatial_map");
  const Grid& in = x.value();
  const Grid& mp = m.value();
  if (mp.shape[0] != 1)
    throw std::invalid_argument("mul_spatial_map: map must have a single channel, got " +
                                shape_to_string(mp.shape));
  for (int i = 1; i < 4; ++i)
    if (mp.shape[static_cast<size_t>(i)] != in.shape[static_cast<size_t>(i)])
      throw std::invalid_argument(std::string("mul_spatial_map: ") + axis_name(i) +
                                  " extents differ: " + shape_to_string(in.shape) + " vs " +
                                  shape_to_string(mp.shape));
  const int64_t C = in.shape[0];
  const int64_t S = in.shape[1] * in.shape[2] * in.shape[3];
  Grid out = in;
  for (int64_t c = 0; c < C; ++c) {
    double* p = out.data.data() + c * S;
    for (int64_t i = 0; i < S; ++i) p[i] *= mp.data[static_cast<size_t>(i)];
  }
  auto xn = x.node(), mn = m.node();
  return Var(detail::make_node(std::move(out), {xn, mn}, [xn, mn, C, S](Node& self) {
    if (xn->needs_grad) {
      Grid& gx = xn->ensure_grad();
      for (int64_t c = 0; c < C; ++c) {
        const double* g = self.grad.data.data() + c * S;
        double* p = gx.data.data() + c * S;
        for (int64_t i = 0; i < S; ++i) p[i] += g[i] * mn->value.data[static_cast<size_t>(i)];
      }
    }
    if (mn->needs_grad) {
      Grid& gm = mn->ensure_grad();
      for (int64_t i = 0; i < S; ++i) {
        double s = 0.0;
        for (int64_t c = 0; c < C; ++c)
          s += self.grad.data[static_cast<size_t>(c * S + i)] *
               xn->value.data[static_cast<size_t>(c * S + i)];
        gm.data[static_cast<size_t>(i)] += s;
      }
    }
  }));
}

Var mse_loss(const Var& pred, const Var& target) {
  check_same_shape(pred, target, "mse_loss");
  const int64_t N = pred.value().numel();
  double acc = 0.0;
  for (int64_t i = 0; i < N; ++i) {
    const double d = pred.value()[i] - target.value()[i];
    acc += d * d;
  }
  Grid out({1});
  out[0] = acc / static_cast<double>(N);
  auto pn = pred.node(), tn = target.node();
  return Var(detail::make_node(std::move(out), {pn, tn}, [pn, tn, N](Node& self) {
    const double g = self.grad[0] * 2.0 / static_cast<double>(N);
    if (pn->needs_grad) {
      Grid& gp = pn->ensure_grad();
      for (int64_t i = 0; i < N; ++i) gp[i] += g * (pn->value[i] - tn->value[i]);
    }
    if (tn->needs_grad) {
      Grid& gt = tn->ensure_grad();
      for (int64_t i = 0; i < N; ++i) gt[i] -= g * (pn->value[i] - tn->value[i]);
    }
  }));
}

Var l1_loss(const Var& pred, const Var& target) {
  check_same_shape(pred, target, "l1_loss");
  const int64_t N = pred.value().numel();
  double acc = 0.0;
  for (int64_t i = 0; i < N; ++i) acc += std::abs(pred.value()[i] - target.value()[i]);
  Grid out({1});
  out[0] = acc / static_cast<double>(N);
  auto pn = pred.node(), tn = target.node();
  return Var(detail::make_node(std::move(out), {pn, tn}, [pn, tn, N](Node& self) {
    const double g = self.grad[0] / static_cast<double>(N);
    if (pn->needs_grad) {
      Grid& gp = pn->ensure_grad();
      for (int64_t i = 0; i < N; ++i) {
        const double d = pn->value[i] - tn->value[i];
        gp[i] += d > 0.0 ? g : (d < 0.0 ? -g : 0.0);
      }
    }
    if (tn->needs_grad) {
      Grid& gt = tn->ensure_grad();
      for (int64_t i = 0; i < N; ++i) {
        const double d = pn->value[i] - tn->value[i];
        gt[i] -= d > 0.0 ? g : (d < 0.0 ? -g : 0.0);
      }
    }
  }));
}

Var kl_standard_normal(const Var& mu, const Var& logvar) {
  check_same_shape(mu, logvar, "kl_standard_normal");
  const int64_t N = mu.value().numel();
  double acc = 0.0;
  for (int64_t i = 0; i < N; ++i) {
    const double m = mu.value()[i];
    const double lv = logvar.value()[i];
    acc += 0.5 * (m * m + std::exp(lv) - 1.0 - lv);
  }
  Grid out({1});
  out[0] = acc / static_cast<double>(N);
  auto mn = mu.node(), ln = logvar.node();
  return Var(detail::make_node(std::move(out), {mn, ln}, [mn, ln, N](Node& self) {
    const double g = self.grad[0] / static_cast<double>(N);
    if (mn->needs_grad) {
      Grid& gm = mn->ensure_grad();
      for (int64_t i = 0; i < N; ++i) gm[i] += g * mn->value[i];
    }
    if (ln->needs_grad) {
      Grid& gl = ln->ensure_grad();
      for (int64_t i = 0; i < N; ++i) gl[i] += g * 0.5 * (std::exp(ln->value[i]) - 1.0);
    }
  }));
}

Var bce_with_logits(const Var& logit, double label) {
  if (logit.value().numel() != 1)
    throw std::invalid_argument("bce_with_logits: logit must be scalar, got " +
                                shape_to_string(logit.value().shape));
  const double l = logit.value()[0];
  Grid out({1});
  out[0] = std::max(l, 0.0) - label * l + std::log1p(std::exp(-std::abs(l)));
  auto ln = logit.node();
  return Var(detail::make_node(std::move(out), {ln}, [ln, label](Node& self) {
    if (!ln->needs_grad) return;
    ln->ensure_grad()[0] += self.grad[0] * (sigmoid_scalar(ln->value[0]) - label);
  }));
}

}  // namespace pnidiff
