#include "canopyscan/tensor/ops.hpp"

#include <cmath>
#include <string>

#include "canopyscan/common/errors.hpp"
#include "canopyscan/tensor/kernels.hpp"

namespace canopyscan::tensor {

namespace {

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
}

void require_rank(const char* op, const char* what, Var v, int rank) {
  if (v.value().rank() != rank)
    throw DimensionError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) + ", got " +
                         to_string(v.shape()));
}

template <class F, class D>
Var unary(OpKind kind, Var x, F forward, D derivative) {
  const Tensor& in = x.value();
  Tensor out(in.shape);
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  const int xid = x.id;
  const int self = static_cast<int>(x.graph->size());
  return x.graph->record(kind, {x}, std::move(out), [xid, self, derivative](Graph& g, std::span<const double> go) {
    auto* gx = g.grad_sink(xid);
    if (!gx) return;
    const Tensor& in = g.value(xid);
    const Tensor& out = g.value(self);
    for (std::size_t i = 0; i < go.size(); ++i) (*gx)[i] += go[i] * derivative(in[i], out[i]);
  });
}

void add_bias(Tensor& out, const Tensor& bias, int channels) {
  const std::size_t plane = out.size() / (static_cast<std::size_t>(out.dim(0)) * channels);
  for (int n = 0; n < out.dim(0); ++n)
    for (int k = 0; k < channels; ++k) {
      double* p = out.data.data() + (static_cast<std::size_t>(n) * channels + k) * plane;
      const double b = bias[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < plane; ++i) p[i] += b;
    }
}

void accumulate_bias_grad(std::vector<double>& gb, std::span<const double> go, int batch, int channels) {
  const std::size_t plane = go.size() / (static_cast<std::size_t>(batch) * channels);
  for (int n = 0; n < batch; ++n)
    for (int k = 0; k < channels; ++k) {
      const double* p = go.data() + (static_cast<std::size_t>(n) * channels + k) * plane;
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      gb[static_cast<std::size_t>(k)] += s;
    }
}

void check_bias(const char* op, const std::optional<Var>& bias, int channels) {
  if (bias && (bias->value().rank() != 1 || bias->dim(0) != channels))
    throw DimensionError(std::string(op) + ": bias shape " + to_string(bias->shape()) + " does not match " +
                         std::to_string(channels) + " output channels");
}

}  // namespace

Var conv2d(Var x, Var weight, std::optional<Var> bias, int stride, int padding) {
  require_rank("conv2d", "input", x, 4);
  require_rank("conv2d", "kernel", weight, 4);
  if (weight.dim(1) != x.dim(1))
    throw DimensionError("conv2d: kernel channel axis (" + std::to_string(weight.dim(1)) +
                         ") != input channel axis (" + std::to_string(x.dim(1)) + ")");
  const auto geo = kernels::make_conv_geometry(x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(0),
                                               weight.dim(2), weight.dim(3), stride, padding);
  check_bias("conv2d", bias, geo.out_channels);

  Tensor out({geo.batch, geo.out_channels, geo.out_h, geo.out_w});
  kernels::conv2d_forward(geo, x.value().data, weight.value().data, out.data);
  if (bias) add_bias(out, bias->value(), geo.out_channels);

  std::vector<Var> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  const int xid = x.id, wid = weight.id, bid = bias ? bias->id : -1;
  return x.graph->record(OpKind::Conv2d, std::move(inputs), std::move(out),
                         [geo, xid, wid, bid](Graph& g, std::span<const double> go) {
                           if (auto* gx = g.grad_sink(xid)) {
                             std::vector<double> tmp(geo.input_size());
                             kernels::conv2d_input_grad(geo, go, g.value(wid).data, tmp);
                             for (std::size_t i = 0; i < tmp.size(); ++i) (*gx)[i] += tmp[i];
                           }
                           if (auto* gw = g.grad_sink(wid)) {
                             std::vector<double> tmp(geo.weight_size());
                             kernels::conv2d_weight_grad(geo, g.value(xid).data, go, tmp);
                             for (std::size_t i = 0; i < tmp.size(); ++i) (*gw)[i] += tmp[i];
                           }
                           if (bid >= 0)
                             if (auto* gb = g.grad_sink(bid)) accumulate_bias_grad(*gb, go, geo.batch, geo.out_channels);
                         });
}

Var conv_transpose2d(Var x, Var weight, std::optional<Var> bias, int stride, int padding) {
  require_rank("conv_transpose2d", "input", x, 4);
  require_rank("conv_transpose2d", "kernel", weight, 4);
  if (weight.dim(0) != x.dim(1))
    throw DimensionError("conv_transpose2d: kernel input-channel axis (" + std::to_string(weight.dim(0)) +
                         ") != input channel axis (" + std::to_string(x.dim(1)) + ")");
  if (stride < 1 || stride > 8 || padding < 0) throw DimensionError("conv_transpose2d: invalid stride/padding");
  const int out_h = (x.dim(2) - 1) * stride - 2 * padding + weight.dim(2);
  const int out_w = (x.dim(3) - 1) * stride - 2 * padding + weight.dim(3);
  if (out_h < 1 || out_w < 1)
    throw DimensionError("conv_transpose2d: non-positive output extent on axes H,W");

  // Described from the conv2d side: the transposed output is the conv2d input.
  kernels::ConvGeometry geo;
  geo.batch = x.dim(0);
  geo.in_channels = weight.dim(1);
  geo.in_h = out_h;
  geo.in_w = out_w;
  geo.out_channels = x.dim(1);
  geo.kernel_h = weight.dim(2);
  geo.kernel_w = weight.dim(3);
  geo.stride = stride;
  geo.pad = padding;
  geo.out_h = x.dim(2);
  geo.out_w = x.dim(3);
  if ((out_h + 2 * padding - geo.kernel_h) / stride + 1 != geo.out_h ||
      (out_w + 2 * padding - geo.kernel_w) / stride + 1 != geo.out_w)
    throw DimensionError("conv_transpose2d: inconsistent geometry on axes H,W");
  check_bias("conv_transpose2d", bias, geo.in_channels);

  Tensor out({geo.batch, geo.in_channels, out_h, out_w});
  kernels::conv2d_input_grad(geo, x.value().data, weight.value().data, out.data);
  if (bias) add_bias(out, bias->value(), geo.in_channels);

  std::vector<Var> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  const int xid = x.id, wid = weight.id, bid = bias ? bias->id : -1;
  return x.graph->record(OpKind::ConvTranspose2d, std::move(inputs), std::move(out),
                         [geo, xid, wid, bid](Graph& g, std::span<const double> go) {
                           if (auto* gx = g.grad_sink(xid)) {
                             std::vector<double> tmp(geo.output_size());
                             kernels::conv2d_forward(geo, go, g.value(wid).data, tmp);
                             for (std::size_t i = 0; i < tmp.size(); ++i) (*gx)[i] += tmp[i];
                           }
                           if (auto* gw = g.grad_sink(wid)) {
                             std::vector<double> tmp(geo.weight_size());
                             kernels::conv2d_weight_grad(geo, go, g.value(xid).data, tmp);
                             for (std::size_t i = 0; i < tmp.size(); ++i) (*gw)[i] += tmp[i];
                           }
                           if (bid >= 0)
                             if (auto* gb = g.grad_sink(bid)) accumulate_bias_grad(*gb, go, geo.batch, geo.in_channels);
                         });
}

Var leaky_relu(Var x, double slope) {
  return unary(
      OpKind::LeakyRelu, x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double in, double) { return in > 0.0 ? 1.0 : slope; });
}

Var relu(Var x) {
  return unary(
      OpKind::Relu, x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var x) {
  return unary(
      OpKind::Tanh, x, [](double v) { return std::tanh(v); },
      [](double, double out) { return 1.0 - out * out; });
}

Var sigmoid(Var x) {
  return unary(
      OpKind::Sigmoid, x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double out) { return out * (1.0 - out); });
}

Var instance_norm(Var x, double eps) {
  require_rank("instance_norm", "input", x, 4);
  if (!(eps > 0.0)) throw ContractError("instance_norm: eps must be positive");
  const Tensor& in = x.value();
  const int planes = x.dim(0) * x.dim(1);
  const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor out(in.shape);
  std::vector<double> inv_std(static_cast<std::size_t>(planes));
  for (int p = 0; p < planes; ++p) {
    const double* src = in.data.data() + p * hw;
    double mu = 0.0;
    for (std::size_t i = 0; i < hw; ++i) mu += src[i];
    mu /= static_cast<double>(hw);
    double var = 0.0;
    for (std::size_t i = 0; i < hw; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= static_cast<double>(hw);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(p)] = is;
    double* dst = out.data.data() + p * hw;
    for (std::size_t i = 0; i < hw; ++i) dst[i] = (src[i] - mu) * is;
  }
  const int xid = x.id;
  const int self = static_cast<int>(x.graph->size());
  return x.graph->record(OpKind::InstanceNorm, {x}, std::move(out),
                         [xid, self, planes, hw, inv_std](Graph& g, std::span<const double> go) {
                           auto* gx = g.grad_sink(xid);
                           if (!gx) return;
                           const Tensor& y = g.value(self);
                           const double n = static_cast<double>(hw);
                           for (int p = 0; p < planes; ++p) {
                             const double* gy = go.data() + p * hw;
                             const double* yp = y.data.data() + p * hw;
                             double mean_g = 0.0, mean_gy = 0.0;
                             for (std::size_t i = 0; i < hw; ++i) {
                               mean_g += gy[i];
                               mean_gy += gy[i] * yp[i];
                             }
                             mean_g /= n;
                             mean_gy /= n;
                             const double is = inv_std[static_cast<std::size_t>(p)];
                             double* dst = gx->data() + p * hw;
                             for (std::size_t i = 0; i < hw; ++i) dst[i] += is * (gy[i] - mean_g - yp[i] * mean_gy);
                           }
                         });
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& first = parts.front().shape();
  const int rank = static_cast<int>(first.size());
  if (axis < 0 || axis >= rank) throw DimensionError("concat: axis " + std::to_string(axis) + " out of range");
  Shape out_shape = first;
  out_shape[static_cast<std::size_t>(axis)] = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (static_cast<int>(s.size()) != rank) throw DimensionError("concat: rank mismatch");
    for (int a = 0; a < rank; ++a)
      if (a != axis && s[static_cast<std::size_t>(a)] != first[static_cast<std::size_t>(a)])
        throw DimensionError("concat: axis " + std::to_string(a) + " mismatch " + to_string(s) + " vs " +
                             to_string(first));
    out_shape[static_cast<std::size_t>(axis)] += s[static_cast<std::size_t>(axis)];
  }
  std::size_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= static_cast<std::size_t>(first[static_cast<std::size_t>(a)]);
  for (int a = axis + 1; a < rank; ++a) inner *= static_cast<std::size_t>(first[static_cast<std::size_t>(a)]);

  Tensor out(out_shape);
  const std::size_t out_row = static_cast<std::size_t>(out_shape[static_cast<std::size_t>(axis)]) * inner;
  std::vector<std::size_t> widths, offsets;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const std::size_t w = static_cast<std::size_t>(p.shape()[static_cast<std::size_t>(axis)]) * inner;
    const Tensor& v = p.value();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(v.data.data() + o * w, w, out.data.data() + o * out_row + offset);
    widths.push_back(w);
    offsets.push_back(offset);
    offset += w;
  }
  std::vector<int> ids;
  for (const Var& p : parts) ids.push_back(p.id);
  return parts.front().graph->record(
      OpKind::Concat, parts, std::move(out),
      [ids, widths, offsets, outer, out_row](Graph& g, std::span<const double> go) {
        for (std::size_t k = 0; k < ids.size(); ++k) {
          auto* gx = g.grad_sink(ids[k]);
          if (!gx) continue;
          for (std::size_t o = 0; o < outer; ++o) {
            const double* src = go.data() + o * out_row + offsets[k];
            double* dst = gx->data() + o * widths[k];
            for (std::size_t i = 0; i < widths[k]; ++i) dst[i] += src[i];
          }
        }
      });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  const int aid = a.id, bid = b.id;
  return a.graph->record(OpKind::Add, {a, b}, std::move(out), [aid, bid](Graph& g, std::span<const double> go) {
    if (auto* ga = g.grad_sink(aid))
      for (std::size_t i = 0; i < go.size(); ++i) (*ga)[i] += go[i];
    if (auto* gb = g.grad_sink(bid))
      for (std::size_t i = 0; i < go.size(); ++i) (*gb)[i] += go[i];
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  const int aid = a.id, bid = b.id;
  return a.graph->record(OpKind::Sub, {a, b}, std::move(out), [aid, bid](Graph& g, std::span<const double> go) {
    if (auto* ga = g.grad_sink(aid))
      for (std::size_t i = 0; i < go.size(); ++i) (*ga)[i] += go[i];
    if (auto* gb = g.grad_sink(bid))
      for (std::size_t i = 0; i < go.size(); ++i) (*gb)[i] -= go[i];
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  const int aid = a.id, bid = b.id;
  return a.graph->record(OpKind::Mul, {a, b}, std::move(out), [aid, bid](Graph& g, std::span<const double> go) {
    if (auto* ga = g.grad_sink(aid)) {
      const Tensor& bv = g.value(bid);
      for (std::size_t i = 0; i < go.size(); ++i) (*ga)[i] += go[i] * bv[i];
    }
    if (auto* gb = g.grad_sink(bid)) {
      const Tensor& av = g.value(aid);
      for (std::size_t i = 0; i < go.size(); ++i) (*gb)[i] += go[i] * av[i];
    }
  });
}

Var scale(Var x, double factor) {
  return unary(
      OpKind::Scale, x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data) s += v;
  const int xid = x.id;
  return x.graph->record(OpKind::Sum, {x}, Tensor::scalar(s), [xid](Graph& g, std::span<const double> go) {
    if (auto* gx = g.grad_sink(xid))
      for (double& v : *gx) v += go[0];
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  double s = 0.0;
  for (double v : x.value().data) s += v;
  const int xid = x.id;
  return x.graph->record(OpKind::Mean, {x}, Tensor::scalar(s / n), [xid, n](Graph& g, std::span<const double> go) {
    if (auto* gx = g.grad_sink(xid))
      for (double& v : *gx) v += go[0] / n;
  });
}

Var l1_loss(Var pred, Var target) {
  require_same_shape("l1_loss", pred, target);
  const Tensor& p = pred.value();
  const Tensor& t = target.value();
  const double n = static_cast<double>(p.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - t[i]);
  const int pid = pred.id, tid = target.id;
  return pred.graph->record(OpKind::L1Loss, {pred, target}, Tensor::scalar(s / n),
                            [pid, tid, n](Graph& g, std::span<const double> go) {
                              const Tensor& p = g.value(pid);
                              const Tensor& t = g.value(tid);
                              auto sign = [](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); };
                              if (auto* gp = g.grad_sink(pid))
                                for (std::size_t i = 0; i < p.size(); ++i) (*gp)[i] += go[0] * sign(p[i] - t[i]) / n;
                              if (auto* gt = g.grad_sink(tid))
                                for (std::size_t i = 0; i < p.size(); ++i) (*gt)[i] -= go[0] * sign(p[i] - t[i]) / n;
                            });
}

Var bce_with_logits(Var logits, Var labels) {
  require_same_shape("bce_with_logits", logits, labels);
  const Tensor& z = logits.value();
  const Tensor& y = labels.value();
  const double n = static_cast<double>(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i)
    s += std::max(z[i], 0.0) - z[i] * y[i] + std::log1p(std::exp(-std::abs(z[i])));
  const int zid = logits.id, yid = labels.id;
  return logits.graph->record(
      OpKind::BceWithLogits, {logits, labels}, Tensor::scalar(s / n),
      [zid, yid, n](Graph& g, std::span<const double> go) {
        const Tensor& z = g.value(zid);
        const Tensor& y = g.value(yid);
        auto sig = [](double v) {
          if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
          const double e = std::exp(v);
          return e / (1.0 + e);
        };
        if (auto* gz = g.grad_sink(zid))
          for (std::size_t i = 0; i < z.size(); ++i) (*gz)[i] += go[0] * (sig(z[i]) - y[i]) / n;
        if (auto* gy = g.grad_sink(yid))
          for (std::size_t i = 0; i < z.size(); ++i) (*gy)[i] -= go[0] * z[i] / n;
      });
}

Var bce_with_logits(Var logits, double label) {
  Var labels = logits.graph->constant(Tensor(logits.shape(), label));
  return bce_with_logits(logits, labels);
}

Var linear(Var x, Var weight, std::optional<Var> bias) {
  require_rank("linear", "input", x, 2);
  require_rank("linear", "weight", weight, 2);
  const int N = x.dim(0), I = x.dim(1), O = weight.dim(0);
  if (weight.dim(1) != I)
    throw DimensionError("linear: weight input axis (" + std::to_string(weight.dim(1)) + ") != input features (" +
                         std::to_string(I) + ")");
  if (bias && (bias->value().rank() != 1 || bias->dim(0) != O))
    throw DimensionError("linear: bias shape " + to_string(bias->shape()));
  Tensor out({N, O});
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < O; ++o) {
      double s = 0.0;
      for (int i = 0; i < I; ++i) s += wv[static_cast<std::size_t>(o * I + i)] * xv[static_cast<std::size_t>(n * I + i)];
      if (bias) s += bias->value()[static_cast<std::size_t>(o)];
      out[static_cast<std::size_t>(n * O + o)] = s;
    }
  std::vector<Var> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  const int xid = x.id, wid = weight.id, bid = bias ? bias->id : -1;
  return x.graph->record(OpKind::Linear, std::move(inputs), std::move(out),
                         [xid, wid, bid, N, I, O](Graph& g, std::span<const double> go) {
                           const Tensor& xv = g.value(xid);
                           const Tensor& wv = g.value(wid);
                           if (auto* gx = g.grad_sink(xid))
                             for (int n = 0; n < N; ++n)
                               for (int o = 0; o < O; ++o) {
                                 const double gv = go[static_cast<std::size_t>(n * O + o)];
                                 for (int i = 0; i < I; ++i)
                                   (*gx)[static_cast<std::size_t>(n * I + i)] += gv * wv[static_cast<std::size_t>(o * I + i)];
                               }
                           if (auto* gw = g.grad_sink(wid))
                             for (int n = 0; n < N; ++n)
                               for (int o = 0; o < O; ++o) {
                                 const double gv = go[static_cast<std::size_t>(n * O + o)];
                                 for (int i = 0; i < I; ++i)
                                   (*gw)[static_cast<std::size_t>(o * I + i)] += gv * xv[static_cast<std::size_t>(n * I + i)];
                               }
                           if (bid >= 0)
                             if (auto* gb = g.grad_sink(bid))
                               for (int n = 0; n < N; ++n)
                                 for (int o = 0; o < O; ++o)
                                   (*gb)[static_cast<std::size_t>(o)] += go[static_cast<std::size_t>(n * O + o)];
                         });
}

Var embedding(Var table, std::span<const int> ids) {
  require_rank("embedding", "table", table, 2);
  const int V = table.dim(0), E = table.dim(1);
  const int N = static_cast<int>(ids.size());
  if (N == 0) throw ContractError("embedding: empty id list");
  for (int id : ids)
    if (id < 0 || id >= V)
      throw VocabularyError("species id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(V));
  Tensor out({N, E});
  for (int n = 0; n < N; ++n)
    std::copy_n(table.value().data.data() + static_cast<std::size_t>(ids[static_cast<std::size_t>(n)]) * E, E,
                out.data.data() + static_cast<std::size_t>(n) * E);
  std::vector<int> rows(ids.begin(), ids.end());
  const int tid = table.id;
  return table.graph->record(OpKind::Embedding, {table}, std::move(out),
                             [tid, rows, E](Graph& g, std::span<const double> go) {
                               auto* gt = g.grad_sink(tid);
                               if (!gt) return;
                               for (std::size_t n = 0; n < rows.size(); ++n)
                                 for (int e = 0; e < E; ++e)
                                   (*gt)[static_cast<std::size_t>(rows[n]) * E + e] += go[n * E + e];
                             });
}

Var broadcast_spatial(Var v, int height, int width) {
  require_rank("broadcast_spatial", "input", v, 2);
  if (height < 1 || width < 1) throw DimensionError("broadcast_spatial: non-positive extent");
  const int N = v.dim(0), E = v.dim(1);
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  Tensor out({N, E, height, width});
  for (std::size_t i = 0; i < static_cast<std::size_t>(N) * E; ++i)
    std::fill_n(out.data.data() + i * hw, hw, v.value()[i]);
  const int vid = v.id;
  return v.graph->record(OpKind::BroadcastSpatial, {v}, std::move(out), [vid, hw](Graph& g, std::span<const double> go) {
    auto* gv = g.grad_sink(vid);
    if (!gv) return;
    for (std::size_t i = 0; i < gv->size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < hw; ++j) s += go[i * hw + j];
      (*gv)[i] += s;
    }
  });
}

Var film(Var x, Var gamma, Var beta) {
  require_rank("film", "input", x, 4);
  require_rank("film", "gamma", gamma, 2);
  require_same_shape("film", gamma, beta);
  const int N = x.dim(0), C = x.dim(1);
  if (gamma.dim(0) != N || gamma.dim(1) != C)
    throw DimensionError("film: modulation shape " + to_string(gamma.shape()) + " does not match input " +
                         to_string(x.shape()) + " on axes N,C");
  const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor out(x.shape());
  for (std::size_t p = 0; p < static_cast<std::size_t>(N) * C; ++p) {
    const double a = 1.0 + gamma.value()[p], b = beta.value()[p];
    for (std::size_t i = 0; i < hw; ++i) out[p * hw + i] = x.value()[p * hw + i] * a + b;
  }
  const int xid = x.id, gid = gamma.id, bid = beta.id;
  const std::size_t planes = static_cast<std::size_t>(N) * C;
  return x.graph->record(OpKind::Film, {x, gamma, beta}, std::move(out),
                         [xid, gid, bid, hw, planes](Graph& g, std::span<const double> go) {
                           const Tensor& xv = g.value(xid);
                           const Tensor& gv = g.value(gid);
                           auto* gx = g.grad_sink(xid);
                           auto* gg = g.grad_sink(gid);
                           auto* gb = g.grad_sink(bid);
                           for (std::size_t p = 0; p < planes; ++p) {
                             double sg = 0.0, sb = 0.0;
                             const double a = 1.0 + gv[p];
                             for (std::size_t i = 0; i < hw; ++i) {
                               const double d = go[p * hw + i];
                               if (gx) (*gx)[p * hw + i] += d * a;
                               sg += d * xv[p * hw + i];
                               sb += d;
                             }
                             if (gg) (*gg)[p] += sg;
                             if (gb) (*gb)[p] += sb;
                           }
                         });
}

}  // namespace canopyscan::tensor
