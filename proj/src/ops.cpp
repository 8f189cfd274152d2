#include "crackgan/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "crackgan/error.hpp"

namespace crackgan::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using MapRowVec = Eigen::Map<Eigen::RowVectorXd>;
using CMapRowVec = Eigen::Map<const Eigen::RowVectorXd>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using CMapVec = Eigen::Map<const Eigen::VectorXd>;

struct Dims {
  int n, c, h, w;
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t item() const { return static_cast<std::size_t>(c) * h * w; }
};

Dims dims4(const Tensor& t, const char* what) {
  require_rank(t, 4, what);
  return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

void im2col(const double* x, int channels, int h, int w, int k, int pad, int out_h, int out_w, double* col) {
  const std::size_t cols = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    const double* plane = x + static_cast<std::size_t>(c) * h * w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        double* row = col + ((static_cast<std::size_t>(c) * k + ki) * k + kj) * cols;
        const int ow_lo = std::max(0, pad - kj);
        const int ow_hi = std::min(out_w, w + pad - kj);
        for (int oh = 0; oh < out_h; ++oh) {
          double* dst = row + static_cast<std::size_t>(oh) * out_w;
          const int ih = oh + ki - pad;
          if (ih < 0 || ih >= h || ow_lo >= ow_hi) {
            std::fill(dst, dst + out_w, 0.0);
            continue;
          }
          std::fill(dst, dst + ow_lo, 0.0);
          const double* src = plane + static_cast<std::size_t>(ih) * w + (kj - pad);
          std::copy(src + ow_lo, src + ow_hi, dst + ow_lo);
          std::fill(dst + ow_hi, dst + out_w, 0.0);
        }
      }
    }
  }
}

void col2im_add(const double* col, int channels, int h, int w, int k, int pad, int out_h, int out_w, double* x) {
  const std::size_t cols = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    double* plane = x + static_cast<std::size_t>(c) * h * w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const double* row = col + ((static_cast<std::size_t>(c) * k + ki) * k + kj) * cols;
        const int ow_lo = std::max(0, pad - kj);
        const int ow_hi = std::min(out_w, w + pad - kj);
        for (int oh = 0; oh < out_h; ++oh) {
          const int ih = oh + ki - pad;
          if (ih < 0 || ih >= h) continue;
          const double* src = row + static_cast<std::size_t>(oh) * out_w;
          double* dst = plane + static_cast<std::size_t>(ih) * w + (kj - pad);
          for (int ow = ow_lo; ow < ow_hi; ++ow) dst[ow] += src[ow];
        }
      }
    }
  }
}

double stable_sigmoid(double x) {
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  double y;
  if (x >= 0) {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    y = e / (1.0 + e);
  }
  return std::clamp(y, lo, hi);
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int padding) {
  const Dims d = dims4(x.value(), "conv2d input");
  const Tensor& wv = weight.value();
  require_rank(wv, 4, "conv2d weight");
  const int cout = wv.dim(0);
  const int k = wv.dim(2);
  if (wv.dim(1) != d.c || wv.dim(3) != k) {
    throw ShapeError("conv2d: weight " + to_string(wv.shape()) + " does not accept input " +
                     to_string(x.shape()));
  }
  if (bias.value().size() != static_cast<std::size_t>(cout)) {
    throw ShapeError("conv2d: bias has " + std::to_string(bias.value().size()) + " entries, expected " +
                     std::to_string(cout));
  }
  const int out_h = d.h + 2 * padding - k + 1;
  const int out_w = d.w + 2 * padding - k + 1;
  if (out_h <= 0 || out_w <= 0) {
    throw ShapeError("conv2d: input " + to_string(x.shape()) + " too small for kernel " + std::to_string(k));
  }
  const int rows = d.c * k * k;
  const int cols = out_h * out_w;
  const bool direct = (k == 1 && padding == 0);

  Tensor out({d.n, cout, out_h, out_w});
  CMapMat wm(wv.data(), cout, rows);
  CMapVec bv(bias.value().data(), cout);
  RowMat col(direct ? 0 : rows, direct ? 0 : cols);
  for (int b = 0; b < d.n; ++b) {
    const double* xb = x.value().data() + b * d.item();
    MapMat ob(out.data() + static_cast<std::size_t>(b) * cout * cols, cout, cols);
    if (direct) {
      ob.noalias() = wm * CMapMat(xb, rows, cols);
    } else {
      im2col(xb, d.c, d.h, d.w, k, padding, out_h, out_w, col.data());
      ob.noalias() = wm * col;
    }
    ob.colwise() += bv;
  }

  return make_result(std::move(out), {x, weight, bias}, [d, cout, k, padding, out_h, out_w](Node& self) {
    Node& xn = *self.parents[0];
    Node& wn = *self.parents[1];
    Node& bn = *self.parents[2];
    const int rows = d.c * k * k;
    const int cols = out_h * out_w;
    const bool direct = (k == 1 && padding == 0);
    CMapMat wm(wn.value.data(), cout, rows);
    RowMat col(direct ? 0 : rows, direct ? 0 : cols);
    RowMat dcol(xn.requires_grad && !direct ? rows : 0, cols);
    // Parameter gradients are summed over the batch locally and added to the
    // buffer once, so contributions from separate graphs combine in one
    // rounding step.
    RowMat dw = RowMat::Zero(wn.requires_grad ? cout : 0, wn.requires_grad ? rows : 0);
    Eigen::VectorXd db = Eigen::VectorXd::Zero(bn.requires_grad ? cout : 0);
    for (int b = 0; b < d.n; ++b) {
      CMapMat gb(self.grad.data() + static_cast<std::size_t>(b) * cout * cols, cout, cols);
      const double* xb = xn.value.data() + b * d.item();
      if (wn.requires_grad) {
        if (direct) {
          dw.noalias() += gb * CMapMat(xb, rows, cols).transpose();
        } else {
          im2col(xb, d.c, d.h, d.w, k, padding, out_h, out_w, col.data());
          dw.noalias() += gb * col.transpose();
        }
      }
      if (bn.requires_grad) db += gb.rowwise().sum();
      if (xn.requires_grad) {
        double* gx = xn.grad_buffer().data() + b * d.item();
        if (direct) {
          MapMat(gx, rows, cols).noalias() += wm.transpose() * gb;
        } else {
          dcol.noalias() = wm.transpose() * gb;
          col2im_add(dcol.data(), d.c, d.h, d.w, k, padding, out_h, out_w, gx);
        }
      }
    }
    if (wn.requires_grad) MapMat(wn.grad_buffer().data(), cout, rows) += dw;
    if (bn.requires_grad) MapVec(bn.grad_buffer().data(), cout) += db;
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var,
               const BatchNormOptions& options) {
  const Dims d = dims4(x.value(), "batch_norm input");
  const std::size_t c = static_cast<std::size_t>(d.c);
  if (gamma.value().size() != c || beta.value().size() != c || running_mean.size() != c ||
      running_var.size() != c) {
    throw ShapeError("batch_norm: parameters do not match " + std::to_string(d.c) + " channels");
  }
  const std::size_t plane = d.plane();
  const double count = static_cast<double>(d.n) * plane;
  std::vector<double> mean(c, 0.0), invstd(c, 0.0);
  const Tensor& xv = x.value();

  if (options.training) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (int b = 0; b < d.n; ++b) {
        const double* p = xv.data() + b * d.item() + ch * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      const double m = s / count;
      double sq = 0.0;
      for (int b = 0; b < d.n; ++b) {
        const double* p = xv.data() + b * d.item() + ch * plane;
        for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - m) * (p[i] - m);
      }
      const double var = sq / count;
      mean[ch] = m;
      invstd[ch] = 1.0 / std::sqrt(var + options.eps);
      const double unbiased = count > 1 ? var * count / (count - 1) : var;
      running_mean[ch] = (1 - options.momentum) * running_mean[ch] + options.momentum * m;
      running_var[ch] = (1 - options.momentum) * running_var[ch] + options.momentum * unbiased;
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = running_mean[ch];
      invstd[ch] = 1.0 / std::sqrt(running_var[ch] + options.eps);
    }
  }

  Tensor xhat(xv.shape());
  Tensor out(xv.shape());
  for (int b = 0; b < d.n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = b * d.item() + ch * plane;
      const double g = gamma.value()[ch];
      const double be = beta.value()[ch];
      for (std::size_t i = 0; i < plane; ++i) {
        const double h = (xv[off + i] - mean[ch]) * invstd[ch];
        xhat[off + i] = h;
        out[off + i] = g * h + be;
      }
    }
  }

  return make_result(std::move(out), {x, gamma, beta},
                     [d, c, plane, count, training = options.training, xhat = std::move(xhat),
                      invstd = std::move(invstd)](Node& self) {
                       Node& xn = *self.parents[0];
                       Node& gn = *self.parents[1];
                       Node& bn = *self.parents[2];
                       const Tensor& g = self.grad;
                       for (std::size_t ch = 0; ch < c; ++ch) {
                         double sum_g = 0.0, sum_gh = 0.0;
                         for (int b = 0; b < d.n; ++b) {
                           const std::size_t off = b * d.item() + ch * plane;
                           for (std::size_t i = 0; i < plane; ++i) {
                             sum_g += g[off + i];
                             sum_gh += g[off + i] * xhat[off + i];
                           }
                         }
                         if (gn.requires_grad) gn.grad_buffer()[ch] += sum_gh;
                         if (bn.requires_grad) bn.grad_buffer()[ch] += sum_g;
                         if (!xn.requires_grad) continue;
                         Tensor& gx = xn.grad_buffer();
                         const double scale = gn.value[ch] * invstd[ch];
                         for (int b = 0; b < d.n; ++b) {
                           const std::size_t off = b * d.item() + ch * plane;
                           for (std::size_t i = 0; i < plane; ++i) {
                             if (training) {
                               gx[off + i] += scale * (g[off + i] - sum_g / count - xhat[off + i] * sum_gh / count);
                             } else {
                               gx[off + i] += scale * g[off + i];
                             }
                           }
                         }
                       }
                     });
}

Var relu(const Var& x) { return leaky_relu(x, 0.0); }

Var leaky_relu(const Var& x, double slope) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0 ? xv[i] : slope * xv[i];
  return make_result(std::move(out), {x}, [slope](Node& self) {
    Node& xn = *self.parents[0];
    Tensor& gx = xn.grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += xn.value[i] > 0 ? self.grad[i] : slope * self.grad[i];
  });
}

Var sigmoid(const Var& x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = stable_sigmoid(xv[i]);
  return make_result(std::move(out), {x}, [](Node& self) {
    Tensor& gx = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double y = self.value[i];
      gx[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Var max_pool2(const Var& x) {
  const Dims d = dims4(x.value(), "max_pool2 input");
  const int out_h = d.h / 2;
  const int out_w = d.w / 2;
  if (out_h == 0 || out_w == 0) {
    throw ShapeError("max_pool2: input " + to_string(x.shape()) + " is smaller than the 2x2 window");
  }
  Tensor out({d.n, d.c, out_h, out_w});
  std::vector<std::uint32_t> arg(out.size());
  const Tensor& xv = x.value();
  std::size_t o = 0;
  for (int nc = 0; nc < d.n * d.c; ++nc) {
    const std::size_t base = static_cast<std::size_t>(nc) * d.plane();
    for (int oh = 0; oh < out_h; ++oh) {
      for (int ow = 0; ow < out_w; ++ow, ++o) {
        std::size_t best = base + static_cast<std::size_t>(2 * oh) * d.w + 2 * ow;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + static_cast<std::size_t>(2 * oh + dy) * d.w + 2 * ow + dx;
            if (xv[idx] > xv[best]) best = idx;
          }
        }
        out[o] = xv[best];
        arg[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return make_result(std::move(out), {x}, [arg = std::move(arg)](Node& self) {
    Tensor& gx = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += self.grad[i];
  });
}

Var global_avg_pool(const Var& x) {
  const Dims d = dims4(x.value(), "global_avg_pool input");
  Tensor out({d.n, d.c, 1, 1});
  const std::size_t plane = d.plane();
  for (int nc = 0; nc < d.n * d.c; ++nc) {
    const double* p = x.value().data() + nc * plane;
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += p[i];
    out[nc] = s / static_cast<double>(plane);
  }
  return make_result(std::move(out), {x}, [d, plane](Node& self) {
    Tensor& gx = self.parents[0]->grad_buffer();
    for (int nc = 0; nc < d.n * d.c; ++nc) {
      const double g = self.grad[nc] / static_cast<double>(plane);
      double* p = gx.data() + nc * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += g;
    }
  });
}

Var global_max_pool(const Var& x) {
  const Dims d = dims4(x.value(), "global_max_pool input");
  Tensor out({d.n, d.c, 1, 1});
  std::vector<std::size_t> arg(out.size());
  const std::size_t plane = d.plane();
  for (int nc = 0; nc < d.n * d.c; ++nc) {
    const std::size_t base = nc * plane;
    std::size_t best = base;
    for (std::size_t i = 1; i < plane; ++i) {
      if (x.value()[base + i] > x.value()[best]) best = base + i;
    }
    out[nc] = x.value()[best];
    arg[nc] = best;
  }
  return make_result(std::move(out), {x}, [arg = std::move(arg)](Node& self) {
    Tensor& gx = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += self.grad[i];
  });
}

Var channel_mean(const Var& x) {
  const Dims d = dims4(x.value(), "channel_mean input");
  Tensor out({d.n, 1, d.h, d.w});
  const std::size_t plane = d.plane();
  for (int b = 0; b < d.n; ++b) {
    double* o = out.data() + b * plane;
    for (int c = 0; c < d.c; ++c) {
      const double* p = x.value().data() + b * d.item() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) o[i] += p[i];
    }
    for (std::size_t i = 0; i < plane; ++i) o[i] /= d.c;
  }
  return make_result(std::move(out), {x}, [d, plane](Node& self) {
    Tensor& gx = self.parents[0]->grad_buffer();
    for (int b = 0; b < d.n; ++b) {
      const double* g = self.grad.data() + b * plane;
      for (int c = 0; c < d.c; ++c) {
        double* p = gx.data() + b * d.item() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] += g[i] / d.c;
      }
    }
  });
}

Var channel_max(const Var& x) {
  const Dims d = dims4(x.value(), "channel_max input");
  Tensor out({d.n, 1, d.h, d.w});
  std::vector<std::size_t> arg(out.size());
  const std::size_t plane = d.plane();
  for (int b = 0; b < d.n; ++b) {
    for (std::size_t i = 0; i < plane; ++i) {
      std::size_t best = b * d.item() + i;
      for (int c = 1; c < d.c; ++c) {
        const std::size_t idx = b * d.item() + c * plane + i;
        if (x.value()[idx] > x.value()[best]) best = idx;
      }
      out[b * plane + i] = x.value()[best];
      arg[b * plane + i] = best;
    }
  }
  return make_result(std::move(out), {x}, [arg = std::move(arg)](Node& self) {
    Tensor& gx = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += self.grad[i];
  });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Dims first = dims4(parts.front().value(), "concat_channels input");
  int total = 0;
  for (const Var& p : parts) {
    const Dims d = dims4(p.value(), "concat_channels input");
    if (d.n != first.n || d.h != first.h || d.w != first.w) {
      throw ShapeError("concat_channels: cannot join " + to_string(p.shape()) + " with " +
                       to_string(parts.front().shape()));
    }
    total += d.c;
  }
  Tensor out({first.n, total, first.h, first.w});
  const std::size_t plane = first.plane();
  std::vector<int> offsets;
  for (int b = 0; b < first.n; ++b) {
    int c0 = 0;
    for (const Var& p : parts) {
      const int c = p.dim(1);
      const double* src = p.value().data() + static_cast<std::size_t>(b) * c * plane;
      std::copy(src, src + c * plane, out.data() + (static_cast<std::size_t>(b) * total + c0) * plane);
      c0 += c;
    }
  }
  return make_result(std::move(out), parts, [first, total, plane](Node& self) {
    for (int b = 0; b < first.n; ++b) {
      int c0 = 0;
      for (auto& pn : self.parents) {
        const int c = pn->value.dim(1);
        if (pn->requires_grad) {
          const double* src = self.grad.data() + (static_cast<std::size_t>(b) * total + c0) * plane;
          double* dst = pn->grad_buffer().data() + static_cast<std::size_t>(b) * c * plane;
          for (std::size_t i = 0; i < c * plane; ++i) dst[i] += src[i];
        }
        c0 += c;
      }
    }
  });
}

Var mul(const Var& a, const Var& b) {
  const Dims da = dims4(a.value(), "mul lhs");
  const Dims db = dims4(b.value(), "mul rhs");
  enum class Mode { same, per_channel, per_pixel };
  Mode mode;
  if (a.shape() == b.shape()) {
    mode = Mode::same;
  } else if (db.n == da.n && db.c == da.c && db.h == 1 && db.w == 1) {
    mode = Mode::per_channel;
  } else if (db.n == da.n && db.c == 1 && db.h == da.h && db.w == da.w) {
    mode = Mode::per_pixel;
  } else {
    throw ShapeError("mul: cannot broadcast " + to_string(b.shape()) + " onto " + to_string(a.shape()));
  }
  const std::size_t plane = da.plane();
  auto b_index = [mode, da, plane](std::size_t i) -> std::size_t {
    switch (mode) {
      case Mode::same:
        return i;
      case Mode::per_channel:
        return i / plane;
      case Mode::per_pixel:
        return (i / da.item()) * plane + i % plane;
    }
    return i;
  };
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[b_index(i)];
  return make_result(std::move(out), {a, b}, [b_index](Node& self) {
    Node& an = *self.parents[0];
    Node& bn = *self.parents[1];
    if (an.requires_grad) {
      Tensor& ga = an.grad_buffer();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * bn.value[b_index(i)];
    }
    if (bn.requires_grad) {
      Tensor& gb = bn.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[b_index(i)] += self.grad[i] * an.value[i];
    }
  });
}

Var add(const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ");
  }
  Tensor out = a.value();
  out += b.value();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (auto& pn : self.parents) {
      if (pn->requires_grad) pn->grad_buffer() += self.grad;
    }
  });
}

Var one_minus(const Var& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 - x.value()[i];
  return make_result(std::move(out), {x}, [](Node& self) {
    Tensor& gx = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] -= self.grad[i];
  });
}

Var upsample_nearest2(const Var& x) {
  const Dims d = dims4(x.value(), "upsample_nearest2 input");
  const int oh = 2 * d.h;
  const int ow = 2 * d.w;
  Tensor out({d.n, d.c, oh, ow});
  for (int nc = 0; nc < d.n * d.c; ++nc) {
    const double* src = x.value().data() + nc * d.plane();
    double* dst = out.data() + static_cast<std::size_t>(nc) * oh * ow;
    for (int h = 0; h < oh; ++h) {
      for (int w = 0; w < ow; ++w) dst[h * ow + w] = src[(h / 2) * d.w + w / 2];
    }
  }
  return make_result(std::move(out), {x}, [d, oh, ow](Node& self) {
    Tensor& gx = self.parents[0]->grad_buffer();
    for (int nc = 0; nc < d.n * d.c; ++nc) {
      const double* g = self.grad.data() + static_cast<std::size_t>(nc) * oh * ow;
      double* dst = gx.data() + nc * d.plane();
      for (int h = 0; h < oh; ++h) {
        for (int w = 0; w < ow; ++w) dst[(h / 2) * d.w + w / 2] += g[h * ow + w];
      }
    }
  });
}

namespace {

struct Lerp {
  int i0, i1;
  double t;
};

std::vector<Lerp> lerp_table(int in, int out) {
  std::vector<Lerp> table(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    table[o] = {i0, i1, src - i0};
  }
  return table;
}

}  // namespace

Var resize_bilinear(const Var& x, int out_h, int out_w) {
  const Dims d = dims4(x.value(), "resize_bilinear input");
  if (out_h <= 0 || out_w <= 0) throw ShapeError("resize_bilinear: non-positive target size");
  if (out_h == d.h && out_w == d.w) return x;
  auto rows = lerp_table(d.h, out_h);
  auto cols = lerp_table(d.w, out_w);
  Tensor out({d.n, d.c, out_h, out_w});
  for (int nc = 0; nc < d.n * d.c; ++nc) {
    const double* src = x.value().data() + nc * d.plane();
    double* dst = out.data() + static_cast<std::size_t>(nc) * out_h * out_w;
    for (int h = 0; h < out_h; ++h) {
      const Lerp& r = rows[h];
      for (int w = 0; w < out_w; ++w) {
        const Lerp& c = cols[w];
        const double top = (1 - c.t) * src[r.i0 * d.w + c.i0] + c.t * src[r.i0 * d.w + c.i1];
        const double bot = (1 - c.t) * src[r.i1 * d.w + c.i0] + c.t * src[r.i1 * d.w + c.i1];
        dst[h * out_w + w] = (1 - r.t) * top + r.t * bot;
      }
    }
  }
  return make_result(std::move(out), {x},
                     [d, out_h, out_w, rows = std::move(rows), cols = std::move(cols)](Node& self) {
                       Tensor& gx = self.parents[0]->grad_buffer();
                       for (int nc = 0; nc < d.n * d.c; ++nc) {
                         const double* g = self.grad.data() + static_cast<std::size_t>(nc) * out_h * out_w;
                         double* dst = gx.data() + nc * d.plane();
                         for (int h = 0; h < out_h; ++h) {
                           const Lerp& r = rows[h];
                           for (int w = 0; w < out_w; ++w) {
                             const Lerp& c = cols[w];
                             const double v = g[h * out_w + w];
                             dst[r.i0 * d.w + c.i0] += (1 - r.t) * (1 - c.t) * v;
                             dst[r.i0 * d.w + c.i1] += (1 - r.t) * c.t * v;
                             dst[r.i1 * d.w + c.i0] += r.t * (1 - c.t) * v;
                             dst[r.i1 * d.w + c.i1] += r.t * c.t * v;
                           }
                         }
                       }
                     });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank(x.value(), 2, "linear input");
  require_rank(weight.value(), 2, "linear weight");
  const int batch = x.dim(0);
  const int fan_in = x.dim(1);
  const int fan_out = weight.dim(0);
  if (weight.dim(1) != fan_in || bias.value().size() != static_cast<std::size_t>(fan_out)) {
    throw ShapeError("linear: weight " + to_string(weight.shape()) + " does not accept input " +
                     to_string(x.shape()));
  }
  Tensor out({batch, fan_out});
  CMapMat xm(x.value().data(), batch, fan_in);
  CMapMat wm(weight.value().data(), fan_out, fan_in);
  MapMat om(out.data(), batch, fan_out);
  om.noalias() = xm * wm.transpose();
  om.rowwise() += CMapRowVec(bias.value().data(), fan_out);
  return make_result(std::move(out), {x, weight, bias}, [batch, fan_in, fan_out](Node& self) {
    Node& xn = *self.parents[0];
    Node& wn = *self.parents[1];
    Node& bn = *self.parents[2];
    CMapMat g(self.grad.data(), batch, fan_out);
    if (xn.requires_grad) {
      MapMat(xn.grad_buffer().data(), batch, fan_in).noalias() += g * CMapMat(wn.value.data(), fan_out, fan_in);
    }
    if (wn.requires_grad) {
      const RowMat dw = g.transpose() * CMapMat(xn.value.data(), batch, fan_in);
      MapMat(wn.grad_buffer().data(), fan_out, fan_in) += dw;
    }
    if (bn.requires_grad) {
      const Eigen::RowVectorXd db = g.colwise().sum();
      MapRowVec(bn.grad_buffer().data(), fan_out) += db;
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_result(std::move(out), {x}, [](Node& self) {
    Tensor& gx = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
  });
}

Var pad2d(const Var& x, int top, int bottom, int left, int right) {
  const Dims d = dims4(x.value(), "pad2d input");
  if (top < 0 || bottom < 0 || left < 0 || right < 0) throw ShapeError("pad2d: negative padding");
  const int oh = d.h + top + bottom;
  const int ow = d.w + left + right;
  Tensor out({d.n, d.c, oh, ow});
  for (int nc = 0; nc < d.n * d.c; ++nc) {
    for (int h = 0; h < d.h; ++h) {
      const double* src = x.value().data() + nc * d.plane() + static_cast<std::size_t>(h) * d.w;
      std::copy(src, src + d.w, out.data() + (static_cast<std::size_t>(nc) * oh + h + top) * ow + left);
    }
  }
  return make_result(std::move(out), {x}, [d, oh, ow, top, left](Node& self) {
    Tensor& gx = self.parents[0]->grad_buffer();
    for (int nc = 0; nc < d.n * d.c; ++nc) {
      for (int h = 0; h < d.h; ++h) {
        const double* src = self.grad.data() + (static_cast<std::size_t>(nc) * oh + h + top) * ow + left;
        double* dst = gx.data() + nc * d.plane() + static_cast<std::size_t>(h) * d.w;
        for (int w = 0; w < d.w; ++w) dst[w] += src[w];
      }
    }
  });
}

Var crop2d(const Var& x, int top, int left, int height, int width) {
  const Dims d = dims4(x.value(), "crop2d input");
  if (top < 0 || left < 0 || height <= 0 || width <= 0 || top + height > d.h || left + width > d.w) {
    throw ShapeError("crop2d: window exceeds input " + to_string(x.shape()));
  }
  Tensor out({d.n, d.c, height, width});
  for (int nc = 0; nc < d.n * d.c; ++nc) {
    for (int h = 0; h < height; ++h) {
      const double* src = x.value().data() + nc * d.plane() + static_cast<std::size_t>(h + top) * d.w + left;
      std::copy(src, src + width, out.data() + (static_cast<std::size_t>(nc) * height + h) * width);
    }
  }
  return make_result(std::move(out), {x}, [d, top, left, height, width](Node& self) {
    Tensor& gx = self.parents[0]->grad_buffer();
    for (int nc = 0; nc < d.n * d.c; ++nc) {
      for (int h = 0; h < height; ++h) {
        const double* src = self.grad.data() + (static_cast<std::size_t>(nc) * height + h) * width;
        double* dst = gx.data() + nc * d.plane() + static_cast<std::size_t>(h + top) * d.w + left;
        for (int w = 0; w < width; ++w) dst[w] += src[w];
      }
    }
  });
}

namespace {

// Copies one window×window block of sample `b` into a T×C token matrix.
void gather_block(const Tensor& t, const Dims& d, int b, int by, int bx, int window, RowMat& tokens) {
  for (int c = 0; c < d.c; ++c) {
    const double* plane = t.data() + b * d.item() + c * d.plane();
    for (int i = 0; i < window; ++i) {
      for (int j = 0; j < window; ++j) {
        tokens(i * window + j, c) = plane[static_cast<std::size_t>(by * window + i) * d.w + bx * window + j];
      }
    }
  }
}

void scatter_block_add(Tensor& t, const Dims& d, int b, int by, int bx, int window, const RowMat& tokens) {
  for (int c = 0; c < d.c; ++c) {
    double* plane = t.data() + b * d.item() + c * d.plane();
    for (int i = 0; i < window; ++i) {
      for (int j = 0; j < window; ++j) {
        plane[static_cast<std::size_t>(by * window + i) * d.w + bx * window + j] += tokens(i * window + j, c);
      }
    }
  }
}

void softmax_rows(RowMat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
}

}  // namespace

Var window_attention(const Var& x, const AttentionWeights& wts, int window, std::vector<Tensor>* attention_maps) {
  const Dims d = dims4(x.value(), "window_attention input");
  if (window <= 0 || d.h % window != 0 || d.w % window != 0) {
    throw ShapeError("window_attention: window " + std::to_string(window) + " does not tile input " +
                     to_string(x.shape()));
  }
  for (const Var* w : {&wts.wq, &wts.wk, &wts.wv, &wts.wo}) {
    if (w->shape() != Shape{d.c, d.c}) {
      throw ShapeError("window_attention: projection " + to_string(w->shape()) + " does not match " +
                       std::to_string(d.c) + " channels");
    }
  }
  const int tokens = window * window;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d.c));
  const int blocks_y = d.h / window;
  const int blocks_x = d.w / window;

  auto weight = [&](const Var& v) { return CMapMat(v.value().data(), d.c, d.c); };
  auto bias = [&](const Var& v) { return CMapRowVec(v.value().data(), d.c); };

  Tensor out(x.shape());
  RowMat xt(tokens, d.c), q, k, v, a, o, y;
  for (int b = 0; b < d.n; ++b) {
    for (int by = 0; by < blocks_y; ++by) {
      for (int bx = 0; bx < blocks_x; ++bx) {
        gather_block(x.value(), d, b, by, bx, window, xt);
        q = (xt * weight(wts.wq)).rowwise() + bias(wts.bq);
        k = (xt * weight(wts.wk)).rowwise() + bias(wts.bk);
        v = (xt * weight(wts.wv)).rowwise() + bias(wts.bv);
        a.noalias() = q * k.transpose() * scale;
        softmax_rows(a);
        o.noalias() = a * v;
        y = (o * weight(wts.wo)).rowwise() + bias(wts.bo);
        scatter_block_add(out, d, b, by, bx, window, y);
        if (attention_maps) {
          Tensor map({tokens, tokens});
          MapMat(map.data(), tokens, tokens) = a;
          attention_maps->push_back(std::move(map));
        }
      }
    }
  }

  return make_result(
      std::move(out), {x, wts.wq, wts.bq, wts.wk, wts.bk, wts.wv, wts.bv, wts.wo, wts.bo},
      [d, window, tokens, scale, blocks_y, blocks_x](Node& self) {
        Node& xn = *self.parents[0];
        auto w = [&](int i) { return CMapMat(self.parents[i]->value.data(), d.c, d.c); };
        auto bvec = [&](int i) { return CMapRowVec(self.parents[i]->value.data(), d.c); };
        auto gw = [&](int i) { return MapMat(self.parents[i]->grad_buffer().data(), d.c, d.c); };
        auto gb = [&](int i) { return MapRowVec(self.parents[i]->grad_buffer().data(), d.c); };
        auto needs = [&](int i) { return self.parents[i]->requires_grad; };

        RowMat xt(tokens, d.c), gy(tokens, d.c), q, k, v, a, o, go, ga, gv, gs, gq, gk, gx;
        for (int b = 0; b < d.n; ++b) {
          for (int by = 0; by < blocks_y; ++by) {
            for (int bx = 0; bx < blocks_x; ++bx) {
              gather_block(xn.value, d, b, by, bx, window, xt);
              gather_block(self.grad, d, b, by, bx, window, gy);
              q = (xt * w(1)).rowwise() + bvec(2);
              k = (xt * w(3)).rowwise() + bvec(4);
              v = (xt * w(5)).rowwise() + bvec(6);
              a.noalias() = q * k.transpose() * scale;
              softmax_rows(a);
              o.noalias() = a * v;

              if (needs(7)) gw(7).noalias() += o.transpose() * gy;
              if (needs(8)) gb(8) += gy.colwise().sum();
              go.noalias() = gy * w(7).transpose();
              ga.noalias() = go * v.transpose();
              gv.noalias() = a.transpose() * go;
              const Eigen::VectorXd row_dot = (ga.array() * a.array()).rowwise().sum();
              gs = (a.array() * (ga.colwise() - row_dot).array()) * scale;
              gq.noalias() = gs * k;
              gk.noalias() = gs.transpose() * q;

              if (needs(1)) gw(1).noalias() += xt.transpose() * gq;
              if (needs(2)) gb(2) += gq.colwise().sum();
              if (needs(3)) gw(3).noalias() += xt.transpose() * gk;
              if (needs(4)) gb(4) += gk.colwise().sum();
              if (needs(5)) gw(5).noalias() += xt.transpose() * gv;
              if (needs(6)) gb(6) += gv.colwise().sum();
              if (xn.requires_grad) {
                gx.noalias() = gq * w(1).transpose();
                gx.noalias() += gk * w(3).transpose();
                gx.noalias() += gv * w(5).transpose();
                scatter_block_add(xn.grad_buffer(), d, b, by, bx, window, gx);
              }
            }
          }
        }
      });
}

}  // namespace crackgan::ops
