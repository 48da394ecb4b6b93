#include "itformer/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "itformer/errors.hpp"
#include "itformer/kernels.hpp"

namespace itf {

const Array& Var::value() const { return graph_->value(id_); }
bool Var::requires_grad() const { return graph_->needs_grad(id_); }

Var Graph::constant(Array value) {
  Node n;
  n.value = std::move(value);
  n.op = "constant";
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::parameter(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.value = p.value;
  n.param = &p;
  n.op = "parameter";
  n.requires_grad = grad_enabled_ && p.trainable;
  nodes_.push_back(std::move(n));
  param_nodes_[&p] = nodes_.size() - 1;
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Array value, std::vector<std::size_t> inputs, Backward backward, const char* op) {
  bool rg = false;
  if (grad_enabled_)
    for (auto i : inputs) rg = rg || nodes_[i].requires_grad;
  Node n;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  n.op = op;
  n.requires_grad = rg;
  if (rg) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Graph::accumulate(std::size_t id, Array&& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    n.grad = std::move(g);
    return;
  }
  auto dst = n.grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Array& Graph::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Array(n.value.shape());
  return n.grad;
}

std::vector<TraceEntry> Graph::trace() const {
  std::vector<TraceEntry> out;
  out.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) out.push_back({nodes_[i].op, nodes_[i].inputs, i});
  return out;
}

GradientMap Graph::backward(Var loss) {
  if (loss.graph_ != this) throw InvariantError("backward: loss belongs to another graph");
  if (value(loss.id()).size() != 1)
    throw DimensionError("backward: loss must be a scalar, got shape " + to_string(value(loss.id()).shape()));
  GradientMap grads;
  if (!nodes_[loss.id()].requires_grad) return grads;
  nodes_[loss.id()].grad = Array(value(loss.id()).shape(), 1.0);
  for (std::size_t k = loss.id() + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, k);
    if (n.param) {
      grads[n.param->name] = std::move(n.grad);
    }
    n.grad = Array();
  }
  return grads;
}

namespace ops {
namespace {

Graph& same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw InvariantError("operands belong to different graphs");
  return a.graph();
}

void require_rank(Var a, std::size_t rank, const char* op) {
  if (a.rank() != rank)
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         to_string(a.shape()));
}

void require_same_shape(Var a, Var b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                         " differ");
}

struct Split {
  std::size_t outer, extent, inner;
};

Split split_at(const Shape& shape, std::size_t axis) {
  Split s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  if (b.dim(0) != k)
    throw DimensionError("matmul: inner dimensions of " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                         " disagree");
  Array out({m, p});
  kernels::gemm(a.value().data(), b.value().data(), out.data(), m, k, p);
  return g.record(
      std::move(out), {a.id(), b.id()},
      [ai = a.id(), bi = b.id(), m, k, p](Graph& g, std::size_t self) {
        const Array& go = g.grad(self);
        if (g.needs_grad(ai)) {
          Array da({m, k});
          kernels::gemm_bt(go.data(), g.value(bi).data(), da.data(), m, p, k);
          g.accumulate(ai, std::move(da));
        }
        if (g.needs_grad(bi)) {
          Array db({k, p});
          kernels::gemm_at(g.value(ai).data(), go.data(), db.data(), m, k, p);
          g.accumulate(bi, std::move(db));
        }
      },
      "matmul");
}

Var matmul_bt(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_rank(a, 2, "matmul_bt");
  require_rank(b, 2, "matmul_bt");
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(0);
  if (b.dim(1) != k)
    throw DimensionError("matmul_bt: inner dimensions of " + to_string(a.shape()) + " and " +
                         to_string(b.shape()) + "ᵀ disagree");
  Array out({m, p});
  kernels::gemm_bt(a.value().data(), b.value().data(), out.data(), m, k, p);
  return g.record(
      std::move(out), {a.id(), b.id()},
      [ai = a.id(), bi = b.id(), m, k, p](Graph& g, std::size_t self) {
        const Array& go = g.grad(self);
        if (g.needs_grad(ai)) {
          Array da({m, k});
          kernels::gemm(go.data(), g.value(bi).data(), da.data(), m, p, k);
          g.accumulate(ai, std::move(da));
        }
        if (g.needs_grad(bi)) {
          Array db({p, k});
          kernels::gemm_at(go.data(), g.value(ai).data(), db.data(), m, p, k);
          g.accumulate(bi, std::move(db));
        }
      },
      "matmul_bt");
}

Var transpose(Var a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  const Array& x = a.value();
  Array out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  return a.graph().record(
      std::move(out), {a.id()},
      [ai = a.id(), m, n](Graph& g, std::size_t self) {
        const Array& go = g.grad(self);
        Array da({m, n});
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) da[i * n + j] = go[j * m + i];
        g.accumulate(ai, std::move(da));
      },
      "transpose");
}

Var add(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_same_shape(a, b, "add");
  Array out = a.value();
  const Array& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  return g.record(
      std::move(out), {a.id(), b.id()},
      [ai = a.id(), bi = b.id()](Graph& g, std::size_t self) {
        if (g.needs_grad(ai)) g.accumulate(ai, Array(g.grad(self)));
        if (g.needs_grad(bi)) g.accumulate(bi, Array(g.grad(self)));
      },
      "add");
}

Var sub(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_same_shape(a, b, "sub");
  Array out = a.value();
  const Array& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return g.record(
      std::move(out), {a.id(), b.id()},
      [ai = a.id(), bi = b.id()](Graph& g, std::size_t self) {
        if (g.needs_grad(ai)) g.accumulate(ai, Array(g.grad(self)));
        if (g.needs_grad(bi)) {
          Array d = g.grad(self);
          for (auto& v : d.data()) v = -v;
          g.accumulate(bi, std::move(d));
        }
      },
      "sub");
}

Var mul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_same_shape(a, b, "mul");
  Array out = a.value();
  const Array& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return g.record(
      std::move(out), {a.id(), b.id()},
      [ai = a.id(), bi = b.id()](Graph& g, std::size_t self) {
        const Array& go = g.grad(self);
        if (g.needs_grad(ai)) {
          Array d = go;
          const Array& y = g.value(bi);
          for (std::size_t i = 0; i < d.size(); ++i) d[i] *= y[i];
          g.accumulate(ai, std::move(d));
        }
        if (g.needs_grad(bi)) {
          Array d = go;
          const Array& x = g.value(ai);
          for (std::size_t i = 0; i < d.size(); ++i) d[i] *= x[i];
          g.accumulate(bi, std::move(d));
        }
      },
      "mul");
}

Var scale(Var a, double s) {
  Array out = a.value();
  for (auto& v : out.data()) v *= s;
  return a.graph().record(
      std::move(out), {a.id()},
      [ai = a.id(), s](Graph& g, std::size_t self) {
        Array d = g.grad(self);
        for (auto& v : d.data()) v *= s;
        g.accumulate(ai, std::move(d));
      },
      "scale");
}

Var add_row(Var a, Var row) {
  Graph& g = same_graph(a, row);
  require_rank(row, 1, "add_row");
  const std::size_t k = row.dim(0);
  if (a.shape().back() != k)
    throw DimensionError("add_row: last axis of " + to_string(a.shape()) + " does not match " +
                         to_string(row.shape()));
  Array out = a.value();
  const Array& r = row.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += r[i % k];
  return g.record(
      std::move(out), {a.id(), row.id()},
      [ai = a.id(), ri = row.id(), k](Graph& g, std::size_t self) {
        const Array& go = g.grad(self);
        if (g.needs_grad(ai)) g.accumulate(ai, Array(go));
        if (g.needs_grad(ri)) {
          Array d({k});
          for (std::size_t i = 0; i < go.size(); ++i) d[i % k] += go[i];
          g.accumulate(ri, std::move(d));
        }
      },
      "add_row");
}

Var mul_row(Var a, Var row) {
  Graph& g = same_graph(a, row);
  require_rank(row, 1, "mul_row");
  const std::size_t k = row.dim(0);
  if (a.shape().back() != k)
    throw DimensionError("mul_row: last axis of " + to_string(a.shape()) + " does not match " +
                         to_string(row.shape()));
  Array out = a.value();
  const Array& r = row.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= r[i % k];
  return g.record(
      std::move(out), {a.id(), row.id()},
      [ai = a.id(), ri = row.id(), k](Graph& g, std::size_t self) {
        const Array& go = g.grad(self);
        if (g.needs_grad(ai)) {
          Array d = go;
          const Array& r = g.value(ri);
          for (std::size_t i = 0; i < d.size(); ++i) d[i] *= r[i % k];
          g.accumulate(ai, std::move(d));
        }
        if (g.needs_grad(ri)) {
          Array d({k});
          const Array& x = g.value(ai);
          for (std::size_t i = 0; i < go.size(); ++i) d[i % k] += go[i] * x[i];
          g.accumulate(ri, std::move(d));
        }
      },
      "mul_row");
}

Var layer_norm(Var x, double eps) {
  const std::size_t k = x.shape().back();
  const std::size_t rows = x.value().size() / k;
  const Array& in = x.value();
  Array out(x.shape());
  std::vector<double> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = in.data().data() + r * k;
    double mu = 0.0;
    for (std::size_t j = 0; j < k; ++j) mu += xr[j];
    mu /= static_cast<double>(k);
    double var = 0.0;
    for (std::size_t j = 0; j < k; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(k);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < k; ++j) out[r * k + j] = (xr[j] - mu) * rstd[r];
  }
  return x.graph().record(
      std::move(out), {x.id()},
      [xi = x.id(), rows, k, rstd = std::move(rstd)](Graph& g, std::size_t self) {
        const Array& go = g.grad(self);
        const Array& y = g.value(self);
        Array d({rows * k});
        for (std::size_t r = 0; r < rows; ++r) {
          double mg = 0.0, mgy = 0.0;
          for (std::size_t j = 0; j < k; ++j) {
            mg += go[r * k + j];
            mgy += go[r * k + j] * y[r * k + j];
          }
          mg /= static_cast<double>(k);
          mgy /= static_cast<double>(k);
          for (std::size_t j = 0; j < k; ++j)
            d[r * k + j] = rstd[r] * (go[r * k + j] - mg - y[r * k + j] * mgy);
        }
        g.accumulate(xi, std::move(d).reshaped(g.value(xi).shape()));
      },
      "layer_norm");
}

Var gelu(Var x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  Array out = x.value();
  for (auto& v : out.data()) v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  return x.graph().record(
      std::move(out), {x.id()},
      [xi = x.id()](Graph& g, std::size_t self) {
        Array d = g.grad(self);
        const Array& in = g.value(xi);
        for (std::size_t i = 0; i < d.size(); ++i) {
          const double v = in[i];
          d[i] *= 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
        }
        g.accumulate(xi, std::move(d));
      },
      "gelu");
}

Var relu(Var x) {
  Array out = x.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return x.graph().record(
      std::move(out), {x.id()},
      [xi = x.id()](Graph& g, std::size_t self) {
        Array d = g.grad(self);
        const Array& in = g.value(xi);
        for (std::size_t i = 0; i < d.size(); ++i)
          if (!(in[i] > 0.0)) d[i] = 0.0;
        g.accumulate(xi, std::move(d));
      },
      "relu");
}

Var softmax(Var x, std::size_t axis) {
  if (axis >= x.rank())
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for shape " + to_string(x.shape()));
  const Split s = split_at(x.shape(), axis);
  const Array& in = x.value();
  Array out(x.shape());
  if (s.inner == 1) {
    kernels::softmax_rows(in.data(), out.data(), s.outer, s.extent);
  } else {
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.extent * s.inner + i;
        double mx = in[base];
        for (std::size_t j = 1; j < s.extent; ++j) mx = std::max(mx, in[base + j * s.inner]);
        double total = 0.0;
        for (std::size_t j = 0; j < s.extent; ++j) {
          out[base + j * s.inner] = std::exp(in[base + j * s.inner] - mx);
          total += out[base + j * s.inner];
        }
        for (std::size_t j = 0; j < s.extent; ++j) out[base + j * s.inner] /= total;
      }
  }
  return x.graph().record(
      std::move(out), {x.id()},
      [xi = x.id(), s](Graph& g, std::size_t self) {
        const Array& go = g.grad(self);
        const Array& y = g.value(self);
        Array d(y.shape());
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t base = o * s.extent * s.inner + i;
            double dot = 0.0;
            for (std::size_t j = 0; j < s.extent; ++j) dot += go[base + j * s.inner] * y[base + j * s.inner];
            for (std::size_t j = 0; j < s.extent; ++j) {
              const std::size_t at = base + j * s.inner;
              d[at] = y[at] * (go[at] - dot);
            }
          }
        g.accumulate(xi, std::move(d));
      },
      "softmax");
}

Var cross_entropy(Var logits, std::span<const int> targets, const std::vector<bool>& mask) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  if (targets.size() != rows || mask.size() != rows)
    throw DimensionError("cross_entropy: " + std::to_string(rows) + " logit rows but " +
                         std::to_string(targets.size()) + " targets and " + std::to_string(mask.size()) +
                         " mask entries");
  const auto count = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (count == 0) throw std::invalid_argument("cross_entropy: mask selects no supervised positions");
  const Array& x = logits.value();
  Array probs({rows, classes});
  kernels::softmax_rows(x.data(), probs.data(), rows, classes);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!mask[r]) continue;
    const int t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= classes)
      throw DimensionError("cross_entropy: target " + std::to_string(t) + " outside [0, " +
                           std::to_string(classes) + ")");
    const double* xr = x.data().data() + r * classes;
    const double mx = *std::max_element(xr, xr + classes);
    double z = 0.0;
    for (std::size_t j = 0; j < classes; ++j) z += std::exp(xr[j] - mx);
    total += mx + std::log(z) - xr[t];
  }
  const double inv = 1.0 / static_cast<double>(count);
  return logits.graph().record(
      Array::scalar(total * inv), {logits.id()},
      [li = logits.id(), probs = std::move(probs), tgt = std::vector<int>(targets.begin(), targets.end()), mask,
       inv, rows, classes](Graph& g, std::size_t self) {
        const double up = g.grad(self)[0] * inv;
        Array d({rows, classes});
        for (std::size_t r = 0; r < rows; ++r) {
          if (!mask[r]) continue;
          for (std::size_t j = 0; j < classes; ++j) d[r * classes + j] = up * probs[r * classes + j];
          d[r * classes + static_cast<std::size_t>(tgt[r])] -= up;
        }
        g.accumulate(li, std::move(d));
      },
      "cross_entropy");
}

Var embedding(Var table, std::span<const int> ids) {
  require_rank(table, 2, "embedding");
  const std::size_t vocab = table.dim(0), width = table.dim(1);
  if (ids.empty()) throw DimensionError("embedding: empty id list");
  const Array& t = table.value();
  Array out({ids.size(), width});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab)
      throw DimensionError("embedding: id " + std::to_string(ids[r]) + " outside table of " +
                           std::to_string(vocab) + " rows");
    std::copy_n(t.data().begin() + static_cast<std::ptrdiff_t>(ids[r] * width), width,
                out.data().begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  return table.graph().record(
      std::move(out), {table.id()},
      [ti = table.id(), idv = std::vector<int>(ids.begin(), ids.end()), width](Graph& g, std::size_t self) {
        const Array& go = g.grad(self);
        Array& d = g.grad_buffer(ti);
        for (std::size_t r = 0; r < idv.size(); ++r)
          for (std::size_t j = 0; j < width; ++j)
            d[static_cast<std::size_t>(idv[r]) * width + j] += go[r * width + j];
      },
      "embedding");
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  Graph& g = parts.front().graph();
  const Shape& ref = parts.front().shape();
  if (axis >= ref.size())
    throw DimensionError("concat: axis " + std::to_string(axis) + " invalid for shape " + to_string(ref));
  Shape shape = ref;
  shape[axis] = 0;
  std::vector<std::size_t> ids, extents;
  for (const auto& p : parts) {
    if (&p.graph() != &g) throw InvariantError("concat: inputs belong to different graphs");
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == ref[i];
    if (!ok) throw DimensionError("concat: shape " + to_string(s) + " incompatible with " + to_string(ref));
    shape[axis] += s[axis];
    ids.push_back(p.id());
    extents.push_back(s[axis]);
  }
  const Split so = split_at(shape, axis);
  Array out(shape);
  std::size_t offset = 0;
  for (std::size_t n = 0; n < parts.size(); ++n) {
    const Array& in = parts[n].value();
    const std::size_t block = extents[n] * so.inner;
    for (std::size_t o = 0; o < so.outer; ++o)
      std::copy_n(in.data().begin() + static_cast<std::ptrdiff_t>(o * block), block,
                  out.data().begin() + static_cast<std::ptrdiff_t>(o * so.extent * so.inner + offset * so.inner));
    offset += extents[n];
  }
  return g.record(
      std::move(out), ids,
      [ids, extents, so](Graph& g, std::size_t self) {
        const Array& go = g.grad(self);
        std::size_t offset = 0;
        for (std::size_t n = 0; n < ids.size(); ++n) {
          const std::size_t block = extents[n] * so.inner;
          if (g.needs_grad(ids[n])) {
            Array d(g.value(ids[n]).shape());
            for (std::size_t o = 0; o < so.outer; ++o)
              std::copy_n(go.data().begin() +
                              static_cast<std::ptrdiff_t>(o * so.extent * so.inner + offset * so.inner),
                          block, d.data().begin() + static_cast<std::ptrdiff_t>(o * block));
            g.accumulate(ids[n], std::move(d));
          }
          offset += extents[n];
        }
      },
      "concat");
}

Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length) {
  if (axis >= x.rank())
    throw DimensionError("slice: axis " + std::to_string(axis) + " invalid for shape " + to_string(x.shape()));
  if (length == 0 || start + length > x.dim(axis))
    throw DimensionError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") outside axis " + std::to_string(axis) + " of shape " + to_string(x.shape()));
  const Split s = split_at(x.shape(), axis);
  Shape shape = x.shape();
  shape[axis] = length;
  const Array& in = x.value();
  Array out(shape);
  const std::size_t block = length * s.inner;
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(in.data().begin() + static_cast<std::ptrdiff_t>(o * s.extent * s.inner + start * s.inner), block,
                out.data().begin() + static_cast<std::ptrdiff_t>(o * block));
  return x.graph().record(
      std::move(out), {x.id()},
      [xi = x.id(), s, start, block](Graph& g, std::size_t self) {
        const Array& go = g.grad(self);
        Array& d = g.grad_buffer(xi);
        for (std::size_t o = 0; o < s.outer; ++o) {
          double* dst = d.data().data() + o * s.extent * s.inner + start * s.inner;
          const double* src = go.data().data() + o * block;
          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      },
      "slice");
}

Var mean(Var x, std::size_t axis) {
  if (axis >= x.rank())
    throw DimensionError("mean: axis " + std::to_string(axis) + " invalid for shape " + to_string(x.shape()));
  const Split s = split_at(x.shape(), axis);
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (shape.empty()) shape = {1};
  const Array& in = x.value();
  Array out(shape);
  const double inv = 1.0 / static_cast<double>(s.extent);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t j = 0; j < s.extent; ++j)
      for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += in[(o * s.extent + j) * s.inner + i];
  for (auto& v : out.data()) v *= inv;
  return x.graph().record(
      std::move(out), {x.id()},
      [xi = x.id(), s, inv](Graph& g, std::size_t self) {
        const Array& go = g.grad(self);
        Array d(g.value(xi).shape());
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t j = 0; j < s.extent; ++j)
            for (std::size_t i = 0; i < s.inner; ++i) d[(o * s.extent + j) * s.inner + i] = go[o * s.inner + i] * inv;
        g.accumulate(xi, std::move(d));
      },
      "mean");
}

Var sum(Var x) {
  const Array& in = x.value();
  const double total = std::accumulate(in.data().begin(), in.data().end(), 0.0);
  return x.graph().record(
      Array::scalar(total), {x.id()},
      [xi = x.id()](Graph& g, std::size_t self) {
        g.accumulate(xi, Array(g.value(xi).shape(), g.grad(self)[0]));
      },
      "sum");
}

Var reshape(Var x, Shape shape) {
  if (element_count(shape) != x.value().size())
    throw DimensionError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  return x.graph().record(
      x.value().reshaped(std::move(shape)), {x.id()},
      [xi = x.id()](Graph& g, std::size_t self) {
        g.accumulate(xi, g.grad(self).reshaped(g.value(xi).shape()));
      },
      "reshape");
}

Var transpose01(Var x) {
  require_rank(x, 3, "transpose01");
  const std::size_t a = x.dim(0), b = x.dim(1), c = x.dim(2);
  const Array& in = x.value();
  Array out({b, a, c});
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < b; ++j)
      std::copy_n(in.data().begin() + static_cast<std::ptrdiff_t>((i * b + j) * c), c,
                  out.data().begin() + static_cast<std::ptrdiff_t>((j * a + i) * c));
  return x.graph().record(
      std::move(out), {x.id()},
      [xi = x.id(), a, b, c](Graph& g, std::size_t self) {
        const Array& go = g.grad(self);
        Array d({a, b, c});
        for (std::size_t i = 0; i < a; ++i)
          for (std::size_t j = 0; j < b; ++j)
            std::copy_n(go.data().begin() + static_cast<std::ptrdiff_t>((j * a + i) * c), c,
                        d.data().begin() + static_cast<std::ptrdiff_t>((i * b + j) * c));
        g.accumulate(xi, std::move(d));
      },
      "transpose01");
}

Var rotary(Var x, double position, double base) {
  const std::size_t d = x.shape().back();
  if (d % 2 != 0) throw DimensionError("rotary: feature width " + std::to_string(d) + " must be even");
  std::vector<double> cosv(d / 2), sinv(d / 2);
  for (std::size_t j = 0; j < d / 2; ++j) {
    const double theta = std::pow(base, -2.0 * static_cast<double>(j) / static_cast<double>(d));
    cosv[j] = std::cos(position * theta);
    sinv[j] = std::sin(position * theta);
  }
  const Array& in = x.value();
  Array out(x.shape());
  const std::size_t rows = in.size() / d;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d / 2; ++j) {
      const double x0 = in[r * d + 2 * j], x1 = in[r * d + 2 * j + 1];
      out[r * d + 2 * j] = x0 * cosv[j] - x1 * sinv[j];
      out[r * d + 2 * j + 1] = x0 * sinv[j] + x1 * cosv[j];
    }
  return x.graph().record(
      std::move(out), {x.id()},
      [xi = x.id(), d, rows, cosv = std::move(cosv), sinv = std::move(sinv)](Graph& g, std::size_t self) {
        const Array& go = g.grad(self);
        Array dx(go.shape());
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d / 2; ++j) {
            const double g0 = go[r * d + 2 * j], g1 = go[r * d + 2 * j + 1];
            dx[r * d + 2 * j] = g0 * cosv[j] + g1 * sinv[j];
            dx[r * d + 2 * j + 1] = -g0 * sinv[j] + g1 * cosv[j];
          }
        g.accumulate(xi, std::move(dx));
      },
      "rotary");
}

Var causal_mask(Var scores) {
  require_rank(scores, 2, "causal_mask");
  const std::size_t n = scores.dim(0);
  if (scores.dim(1) != n) throw DimensionError("causal_mask: scores must be square, got " + to_string(scores.shape()));
  constexpr double kMasked = -1e30;
  Array out = scores.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out[i * n + j] = kMasked;
  return scores.graph().record(
      std::move(out), {scores.id()},
      [si = scores.id(), n](Graph& g, std::size_t self) {
        Array d = g.grad(self);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i + 1; j < n; ++j) d[i * n + j] = 0.0;
        g.accumulate(si, std::move(d));
      },
      "causal_mask");
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
  require_rank(x, 2, "gather_rows");
  const std::size_t n = x.dim(0), w = x.dim(1);
  if (rows.empty()) throw DimensionError("gather_rows: empty row list");
  const Array& in = x.value();
  Array out({rows.size(), w});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n)
      throw DimensionError("gather_rows: row " + std::to_string(rows[r]) + " outside " + to_string(x.shape()));
    std::copy_n(in.data().begin() + static_cast<std::ptrdiff_t>(rows[r] * w), w,
                out.data().begin() + static_cast<std::ptrdiff_t>(r * w));
  }
  return x.graph().record(
      std::move(out), {x.id()},
      [xi = x.id(), idx = std::vector<std::size_t>(rows.begin(), rows.end()), w](Graph& g, std::size_t self) {
        const Array& go = g.grad(self);
        Array& d = g.grad_buffer(xi);
        for (std::size_t r = 0; r < idx.size(); ++r)
          for (std::size_t j = 0; j < w; ++j) d[idx[r] * w + j] += go[r * w + j];
      },
      "gather_rows");
}

Var scatter_rows(Var base, Var rows, std::span<const std::size_t> positions) {
  Graph& g = same_graph(base, rows);
  require_rank(base, 2, "scatter_rows");
  require_rank(rows, 2, "scatter_rows");
  const std::size_t n = base.dim(0), w = base.dim(1);
  if (rows.dim(1) != w)
    throw DimensionError("scatter_rows: row width " + to_string(rows.shape()) + " vs base " + to_string(base.shape()));
  if (rows.dim(0) != positions.size())
    throw DimensionError("scatter_rows: " + std::to_string(positions.size()) + " positions for " +
                         std::to_string(rows.dim(0)) + " rows");
  Array out = base.value();
  const Array& src = rows.value();
  for (std::size_t r = 0; r < positions.size(); ++r) {
    if (positions[r] >= n)
      throw DimensionError("scatter_rows: position " + std::to_string(positions[r]) + " outside " +
                           to_string(base.shape()));
    std::copy_n(src.data().begin() + static_cast<std::ptrdiff_t>(r * w), w,
                out.data().begin() + static_cast<std::ptrdiff_t>(positions[r] * w));
  }
  return g.record(
      std::move(out), {base.id(), rows.id()},
      [bi = base.id(), ri = rows.id(), pos = std::vector<std::size_t>(positions.begin(), positions.end()), w](
          Graph& g, std::size_t self) {
        const Array& go = g.grad(self);
        if (g.needs_grad(bi)) {
          Array d = go;
          for (auto p : pos) std::fill_n(d.data().begin() + static_cast<std::ptrdiff_t>(p * w), w, 0.0);
          g.accumulate(bi, std::move(d));
        }
        if (g.needs_grad(ri)) {
          Array d({pos.size(), w});
          for (std::size_t r = 0; r < pos.size(); ++r)
            std::copy_n(go.data().begin() + static_cast<std::ptrdiff_t>(pos[r] * w), w,
                        d.data().begin() + static_cast<std::ptrdiff_t>(r * w));
          g.accumulate(ri, std::move(d));
        }
      },
      "scatter_rows");
}

}  // namespace ops
}  // namespace itf
