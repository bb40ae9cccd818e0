#include "vtp/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace vtp {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void require_same_shape(Tensor a, Tensor b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                      shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
}

int last_dim(Tensor a) { return a.shape().back(); }

std::int64_t row_count(Tensor a) { return a.numel() / last_dim(a); }

}  // namespace

Tensor add(Tape& tape, Tensor a, Tensor b) {
  require_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i)
    out.values()[i] = a.values()[i] + b.values()[i];
  if (tape.recording()) tape.record([a, b, out]() mutable {
    auto& g = out.grad();
    auto& ga = a.grad();
    auto& gb = b.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  });
  return out;
}

Tensor sub(Tape& tape, Tensor a, Tensor b) {
  require_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i)
    out.values()[i] = a.values()[i] - b.values()[i];
  if (tape.recording()) tape.record([a, b, out]() mutable {
    auto& g = out.grad();
    auto& ga = a.grad();
    auto& gb = b.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  });
  return out;
}

Tensor mul(Tape& tape, Tensor a, Tensor b) {
  require_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i)
    out.values()[i] = a.values()[i] * b.values()[i];
  if (tape.recording()) tape.record([a, b, out]() mutable {
    auto& g = out.grad();
    auto& ga = a.grad();
    auto& gb = b.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * b.values()[i];
      gb[i] += g[i] * a.values()[i];
    }
  });
  return out;
}

Tensor scale(Tape& tape, Tensor a, double c) {
  Tensor out = Tensor::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i)
    out.values()[i] = c * a.values()[i];
  if (tape.recording()) tape.record([a, out, c]() mutable {
    auto& g = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  });
  return out;
}

Tensor broadcast(Tape& tape, Tensor a, const Shape& shape) {
  const Shape& in = a.shape();
  require(in.size() <= shape.size(), "broadcast: rank would shrink");
  // right-aligned dim mapping; each input dim must equal the target or be 1
  const std::size_t off = shape.size() - in.size();
  for (std::size_t d = 0; d < in.size(); ++d)
    require(in[d] == shape[off + d] || in[d] == 1,
            "broadcast: incompatible " + shape_str(in) + " -> " +
                shape_str(shape));
  // per-output-element input index
  const std::int64_t out_n = shape_numel(shape);
  std::vector<std::int64_t> src(static_cast<std::size_t>(out_n));
  std::vector<std::int64_t> in_strides(in.size());
  std::int64_t s = 1;
  for (int d = static_cast<int>(in.size()) - 1; d >= 0; --d) {
    in_strides[d] = (in[d] == 1) ? 0 : s;
    s *= in[d];
  }
  for (std::int64_t idx = 0; idx < out_n; ++idx) {
    std::int64_t rem = idx, pos = 0;
    for (int d = static_cast<int>(shape.size()) - 1; d >= 0; --d) {
      const std::int64_t coord = rem % shape[d];
      rem /= shape[d];
      const int in_d = d - static_cast<int>(off);
      if (in_d >= 0) pos += coord * in_strides[in_d];
    }
    src[static_cast<std::size_t>(idx)] = pos;
  }
  Tensor out = Tensor::zeros(shape);
  for (std::int64_t i = 0; i < out_n; ++i)
    out.values()[i] = a.values()[static_cast<std::size_t>(src[i])];
  if (tape.recording()) tape.record([a, out, src]() mutable {
    auto& g = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[src[i]] += g[i];
  });
  return out;
}

Tensor matmul(Tape& tape, Tensor a, Tensor b) {
  require(a.shape().size() == 2 && b.shape().size() == 2,
          "matmul: both operands must be 2D");
  require(a.shape()[1] == b.shape()[0],
          "matmul: inner dims differ, " + shape_str(a.shape()) + " x " +
              shape_str(b.shape()));
  const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor out = Tensor::zeros({m, n});
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      for (int j = 0; j < n; ++j) ov[i * n + j] += aip * bv[p * n + j];
    }
  if (tape.recording()) tape.record([a, b, out, m, k, n]() mutable {
    const auto& g = out.grad();
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ga = a.grad();
    auto& gb = b.grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        const double gij = g[i * n + j];
        if (gij == 0.0) continue;
        for (int p = 0; p < k; ++p) {
          ga[i * k + p] += gij * bv[p * n + j];
          gb[p * n + j] += av[i * k + p] * gij;
        }
      }
  });
  return out;
}

Tensor transpose(Tape& tape, Tensor a) {
  require(a.shape().size() == 2, "transpose: 2D only");
  const int m = a.shape()[0], n = a.shape()[1];
  Tensor out = Tensor::zeros({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.values()[j * m + i] = a.values()[i * n + j];
  if (tape.recording()) tape.record([a, out, m, n]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
  return out;
}

Tensor concat(Tape& tape, std::vector<Tensor> parts, int axis) {
  require(!parts.empty(), "concat: no parts");
  const std::size_t rank = parts[0].shape().size();
  require(rank == 1 || rank == 2, "concat: 1D or 2D only");
  require(axis >= 0 && axis < static_cast<int>(rank), "concat: bad axis");
  if (rank == 1) {
    std::int64_t total = 0;
    for (const auto& p : parts) {
      require(p.shape().size() == 1, "concat: rank mismatch");
      total += p.numel();
    }
    Tensor out = Tensor::zeros({static_cast<int>(total)});
    std::int64_t off = 0;
    for (const auto& p : parts) {
      for (std::int64_t i = 0; i < p.numel(); ++i)
        out.values()[off + i] = p.values()[i];
      off += p.numel();
    }
    if (tape.recording()) tape.record([parts, out]() mutable {
      const auto& g = out.grad();
      std::int64_t off = 0;
      for (auto& p : parts) {
        auto& gp = p.grad();
        for (std::int64_t i = 0; i < p.numel(); ++i) gp[i] += g[off + i];
        off += p.numel();
      }
    });
    return out;
  }
  // 2D
  const int other = 1 - axis;
  int fixed = parts[0].shape()[other];
  int total = 0;
  for (const auto& p : parts) {
    require(p.shape().size() == 2 && p.shape()[other] == fixed,
            "concat: shapes incompatible along axis " + std::to_string(axis));
    total += p.shape()[axis];
  }
  Shape out_shape = parts[0].shape();
  out_shape[axis] = total;
  Tensor out = Tensor::zeros(out_shape);
  const int on = out_shape[1];
  int off = 0;
  for (const auto& p : parts) {
    const int pm = p.shape()[0], pn = p.shape()[1];
    for (int i = 0; i < pm; ++i)
      for (int j = 0; j < pn; ++j) {
        const int oi = axis == 0 ? off + i : i;
        const int oj = axis == 1 ? off + j : j;
        out.values()[oi * on + oj] = p.values()[i * pn + j];
      }
    off += p.shape()[axis];
  }
  if (tape.recording()) tape.record([parts, out, axis, on]() mutable {
    const auto& g = out.grad();
    int off = 0;
    for (auto& p : parts) {
      auto& gp = p.grad();
      const int pm = p.shape()[0], pn = p.shape()[1];
      for (int i = 0; i < pm; ++i)
        for (int j = 0; j < pn; ++j) {
          const int oi = axis == 0 ? off + i : i;
          const int oj = axis == 1 ? off + j : j;
          gp[i * pn + j] += g[oi * on + oj];
        }
      off += p.shape()[axis];
    }
  });
  return out;
}

Tensor sum_axis(Tape& tape, Tensor a, int axis) {
  require(a.shape().size() == 2, "sum_axis: 2D only");
  require(axis == 0 || axis == 1, "sum_axis: bad axis");
  const int m = a.shape()[0], n = a.shape()[1];
  const int out_len = axis == 0 ? n : m;
  Tensor out = Tensor::zeros({out_len});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out.values()[axis == 0 ? j : i] += a.values()[i * n + j];
  if (tape.recording()) tape.record([a, out, m, n, axis]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) ga[i * n + j] += g[axis == 0 ? j : i];
  });
  return out;
}

Tensor mean_axis(Tape& tape, Tensor a, int axis) {
  const int count = a.shape()[axis];
  return scale(tape, sum_axis(tape, a, axis), 1.0 / count);
}

Tensor sum_all(Tape& tape, Tensor a) {
  Tensor out = Tensor::zeros({1});
  double s = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) s += a.values()[i];
  out.values()[0] = s;
  if (tape.recording()) tape.record([a, out]() mutable {
    const double g = out.grad()[0];
    auto& ga = a.grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
  return out;
}

Tensor mean_all(Tape& tape, Tensor a) {
  return scale(tape, sum_all(tape, a), 1.0 / static_cast<double>(a.numel()));
}

Tensor softmax(Tape& tape, Tensor a) {
  const int n = last_dim(a);
  const std::int64_t rows = row_count(a);
  Tensor out = Tensor::zeros(a.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* x = a.values().data() + r * n;
    double* y = out.values().data() + r * n;
    double mx = x[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (int j = 0; j < n; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (int j = 0; j < n; ++j) y[j] /= z;
  }
  if (tape.recording()) tape.record([a, out, rows, n]() mutable {
    const auto& g = out.grad();
    const auto& y = out.values();
    auto& ga = a.grad();
    for (std::int64_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
      for (int j = 0; j < n; ++j)
        ga[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
    }
  });
  return out;
}

Tensor log_softmax(Tape& tape, Tensor a) {
  const int n = last_dim(a);
  const std::int64_t rows = row_count(a);
  Tensor out = Tensor::zeros(a.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* x = a.values().data() + r * n;
    double* y = out.values().data() + r * n;
    double mx = x[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += std::exp(x[j] - mx);
    const double lse = mx + std::log(z);
    for (int j = 0; j < n; ++j) y[j] = x[j] - lse;
  }
  if (tape.recording()) tape.record([a, out, rows, n]() mutable {
    const auto& g = out.grad();
    const auto& y = out.values();
    auto& ga = a.grad();
    for (std::int64_t r = 0; r < rows; ++r) {
      double gsum = 0.0;
      for (int j = 0; j < n; ++j) gsum += g[r * n + j];
      for (int j = 0; j < n; ++j)
        ga[r * n + j] += g[r * n + j] - std::exp(y[r * n + j]) * gsum;
    }
  });
  return out;
}

Tensor nll_loss(Tape& tape, Tensor log_probs,
                const std::vector<int>& targets) {
  require(log_probs.shape().size() == 2, "nll_loss: expects 2D log-probs");
  const int m = log_probs.shape()[0], n = log_probs.shape()[1];
  require(static_cast<int>(targets.size()) == m,
          "nll_loss: target count != row count");
  for (int t : targets)
    require(t >= 0 && t < n, "nll_loss: target id out of range");
  Tensor out = Tensor::zeros({1});
  double s = 0.0;
  for (int i = 0; i < m; ++i) s -= log_probs.values()[i * n + targets[i]];
  out.values()[0] = s / m;
  if (tape.recording()) tape.record([log_probs, out, targets, m, n]() mutable {
    const double g = out.grad()[0];
    auto& gl = log_probs.grad();
    for (int i = 0; i < m; ++i) gl[i * n + targets[i]] -= g / m;
  });
  return out;
}

Tensor layer_norm(Tape& tape, Tensor a, Tensor gain,
                  Tensor bias, double eps) {
  const int n = last_dim(a);
  require(gain.shape() == Shape{n} && bias.shape() == Shape{n},
          "layer_norm: gain/bias must have shape (" + std::to_string(n) + ")");
  const std::int64_t rows = row_count(a);
  Tensor out = Tensor::zeros(a.shape());
  Tensor xhat = Tensor::zeros(a.shape());   // saved for backward
  std::vector<double> inv_std(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* x = a.values().data() + r * n;
    double mu = 0.0;
    for (int j = 0; j < n; ++j) mu += x[j];
    mu /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= n;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(r)] = is;
    for (int j = 0; j < n; ++j) {
      const double xh = (x[j] - mu) * is;
      xhat.values()[r * n + j] = xh;
      out.values()[r * n + j] = gain.values()[j] * xh + bias.values()[j];
    }
  }
  if (tape.recording()) tape.record([a, gain, bias, out, xhat, inv_std, rows, n]() mutable {
    const auto& g = out.grad();
    const auto& xh = xhat.values();
    auto& ga = a.grad();
    auto& gg = gain.grad();
    auto& gb = bias.grad();
    for (std::int64_t r = 0; r < rows; ++r) {
      double mean_dxh = 0.0, mean_dxh_xh = 0.0;
      for (int j = 0; j < n; ++j) {
        const double dxh = g[r * n + j] * gain.values()[j];
        mean_dxh += dxh;
        mean_dxh_xh += dxh * xh[r * n + j];
        gg[j] += g[r * n + j] * xh[r * n + j];
        gb[j] += g[r * n + j];
      }
      mean_dxh /= n;
      mean_dxh_xh /= n;
      const double is = inv_std[static_cast<std::size_t>(r)];
      for (int j = 0; j < n; ++j) {
        const double dxh = g[r * n + j] * gain.values()[j];
        ga[r * n + j] += is * (dxh - mean_dxh - xh[r * n + j] * mean_dxh_xh);
      }
    }
  });
  return out;
}

Tensor batch_norm(Tape& tape, Tensor a, Tensor gain,
                  Tensor bias, Tensor& running_mean,
                  Tensor& running_var, bool training, double momentum,
                  double eps) {
  require(a.shape().size() == 2, "batch_norm: expects (N x C)");
  const int N = a.shape()[0], C = a.shape()[1];
  require(gain.shape() == Shape{C} && bias.shape() == Shape{C} &&
              running_mean.shape() == Shape{C} &&
              running_var.shape() == Shape{C},
          "batch_norm: per-channel params must have shape (" +
              std::to_string(C) + ")");
  Tensor out = Tensor::zeros(a.shape());
  if (!training) {
    // frozen affine map through the running statistics
    std::vector<double> is(C);
    for (int c = 0; c < C; ++c)
      is[c] = 1.0 / std::sqrt(running_var.values()[c] + eps);
    for (int i = 0; i < N; ++i)
      for (int c = 0; c < C; ++c)
        out.values()[i * C + c] =
            gain.values()[c] * (a.values()[i * C + c] -
                                running_mean.values()[c]) * is[c] +
            bias.values()[c];
    Tensor rm = running_mean;
    if (tape.recording()) tape.record([a, gain, bias, out, rm, is, N, C]() mutable {
      const auto& g = out.grad();
      auto& ga = a.grad();
      auto& gg = gain.grad();
      auto& gb = bias.grad();
      for (int i = 0; i < N; ++i)
        for (int c = 0; c < C; ++c) {
          const double go = g[i * C + c];
          ga[i * C + c] += go * gain.values()[c] * is[c];
          gg[c] += go * (a.values()[i * C + c] - rm.values()[c]) * is[c];
          gb[c] += go;
        }
    });
    return out;
  }
  // training: batch statistics
  Tensor xhat = Tensor::zeros(a.shape());
  std::vector<double> inv_std(C);
  for (int c = 0; c < C; ++c) {
    double mu = 0.0;
    for (int i = 0; i < N; ++i) mu += a.values()[i * C + c];
    mu /= N;
    double var = 0.0;
    for (int i = 0; i < N; ++i) {
      const double d = a.values()[i * C + c] - mu;
      var += d * d;
    }
    var /= N;  // biased, used for normalization
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[c] = is;
    for (int i = 0; i < N; ++i) {
      const double xh = (a.values()[i * C + c] - mu) * is;
      xhat.values()[i * C + c] = xh;
      out.values()[i * C + c] = gain.values()[c] * xh + bias.values()[c];
    }
    const double unbiased = N > 1 ? var * N / (N - 1) : var;
    running_mean.values()[c] = (1.0 - momentum) * running_mean.values()[c] +
                               momentum * mu;
    running_var.values()[c] = (1.0 - momentum) * running_var.values()[c] +
                              momentum * unbiased;
  }
  if (tape.recording()) tape.record([a, gain, bias, out, xhat, inv_std, N, C]() mutable {
    const auto& g = out.grad();
    const auto& xh = xhat.values();
    auto& ga = a.grad();
    auto& gg = gain.grad();
    auto& gb = bias.grad();
    for (int c = 0; c < C; ++c) {
      double mean_dxh = 0.0, mean_dxh_xh = 0.0;
      for (int i = 0; i < N; ++i) {
        const double dxh = g[i * C + c] * gain.values()[c];
        mean_dxh += dxh;
        mean_dxh_xh += dxh * xh[i * C + c];
        gg[c] += g[i * C + c] * xh[i * C + c];
        gb[c] += g[i * C + c];
      }
      mean_dxh /= N;
      mean_dxh_xh /= N;
      for (int i = 0; i < N; ++i) {
        const double dxh = g[i * C + c] * gain.values()[c];
        ga[i * C + c] +=
            inv_std[c] * (dxh - mean_dxh - xh[i * C + c] * mean_dxh_xh);
      }
    }
  });
  return out;
}

Tensor gelu(Tape& tape, Tensor a) {
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  Tensor out = Tensor::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    const double x = a.values()[i];
    out.values()[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  }
  if (tape.recording()) tape.record([a, out]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = a.values()[i];
      const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      ga[i] += g[i] * (cdf + x * pdf);
    }
  });
  return out;
}

Tensor gather_rows(Tape& tape, Tensor table,
                   const std::vector<int>& ids) {
  require(table.shape().size() == 2, "gather_rows: table must be 2D");
  const int rows = table.shape()[0], d = table.shape()[1];
  for (int id : ids)
    require(id >= 0 && id < rows,
            "gather_rows: row " + std::to_string(id) + " out of range (" +
                std::to_string(rows) + " rows)");
  const int m = static_cast<int>(ids.size());
  Tensor out = Tensor::zeros({m, d});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < d; ++j)
      out.values()[i * d + j] = table.values()[ids[i] * d + j];
  if (tape.recording()) tape.record([table, out, ids, m, d]() mutable {
    const auto& g = out.grad();
    auto& gt = table.grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < d; ++j) gt[ids[i] * d + j] += g[i * d + j];
  });
  return out;
}

Tensor reshape(Tape& tape, Tensor a, Shape shape) {
  require(shape_numel(shape) == a.numel(),
          "reshape: element count differs, " + shape_str(a.shape()) + " -> " +
              shape_str(shape));
  Tensor out = Tensor::zeros(shape);
  out.values() = a.values();
  if (tape.recording()) tape.record([a, out]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
  return out;
}

Tensor l2_normalize_rows(Tape& tape, Tensor a) {
  const int n = last_dim(a);
  const std::int64_t rows = row_count(a);
  Tensor out = Tensor::zeros(a.shape());
  std::vector<double> inv_norm(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (int j = 0; j < n; ++j) sq += a.values()[r * n + j] * a.values()[r * n + j];
    const double inv = 1.0 / std::sqrt(sq > 0.0 ? sq : 1e-300);
    inv_norm[static_cast<std::size_t>(r)] = inv;
    for (int j = 0; j < n; ++j) out.values()[r * n + j] = a.values()[r * n + j] * inv;
  }
  if (tape.recording()) tape.record([a, out, inv_norm, rows, n]() mutable {
    const auto& g = out.grad();
    const auto& y = out.values();
    auto& ga = a.grad();
    for (std::int64_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
      for (int j = 0; j < n; ++j)
        ga[r * n + j] += inv_norm[static_cast<std::size_t>(r)] *
                         (g[r * n + j] - y[r * n + j] * dot);
    }
  });
  return out;
}

Tensor dropout(Tape& tape, Tensor a, double rate, bool training,
               Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
  if (!training || rate == 0.0) return a;
  const double keep = 1.0 - rate;
  std::vector<double> m(static_cast<std::size_t>(a.numel()));
  for (auto& mi : m) mi = rng.uniform01() < rate ? 0.0 : 1.0 / keep;
  Tensor out = Tensor::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i)
    out.values()[i] = a.values()[i] * m[static_cast<std::size_t>(i)];
  if (tape.recording()) tape.record([a, out, m]() mutable {
    const auto& g = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * m[i];
  });
  return out;
}

}  // namespace vtp
