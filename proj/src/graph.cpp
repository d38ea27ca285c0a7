#include "mvtpp/graph.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

namespace mvtpp {
namespace {

std::atomic<std::uint64_t> g_next_id{1};

NodePtr make_node(Tensor value, std::string op) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = std::move(op);
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return n;
}

// Wires an op node: parents and the backward rule are only kept when some
// parent needs gradients.
Var make_op(std::string op, Tensor value, std::vector<Var> parents, std::function<void(Node&)> bw) {
  NodePtr n = make_node(std::move(value), std::move(op));
  bool needs = false;
  for (const Var& p : parents) needs = needs || p.requires_grad();
  if (needs) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (const Var& p : parents) n->parents.push_back(p.node());
    n->backward_fn = std::move(bw);
  }
  return Var(n);
}

[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
  throw GraphError("op '" + op + "': incompatible shapes [" + a.shape_str() + "] and [" + b.shape_str() + "]");
}

bool dim_ok(std::int64_t x, std::int64_t out) { return x == out || x == 1; }

// Sums grad over the axes that were broadcast to reach (rows, cols).
void reduce_into(const Tensor& g, Tensor& dst) {
  if (g.rows == dst.rows && g.cols == dst.cols) {
    for (std::size_t i = 0; i < g.data.size(); ++i) dst.data[i] += g.data[i];
    return;
  }
  for (std::int64_t i = 0; i < g.rows; ++i) {
    const std::int64_t di = dst.rows == 1 ? 0 : i;
    for (std::int64_t j = 0; j < g.cols; ++j) {
      const std::int64_t dj = dst.cols == 1 ? 0 : j;
      dst.at(di, dj) += g.at(i, j);
    }
  }
}

template <typename Fwd, typename Bwd>
Var broadcast_binary(const char* name, const Var& a, const Var& b, Fwd fwd, Bwd bwd) {
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  const std::int64_t r = std::max(va.rows, vb.rows);
  const std::int64_t c = std::max(va.cols, vb.cols);
  if (!dim_ok(va.rows, r) || !dim_ok(vb.rows, r) || !dim_ok(va.cols, c) || !dim_ok(vb.cols, c))
    shape_error(name, va, vb);
  Tensor out(r, c);
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < c; ++j)
      out.at(i, j) = fwd(va.at(va.rows == 1 ? 0 : i, va.cols == 1 ? 0 : j),
                         vb.at(vb.rows == 1 ? 0 : i, vb.cols == 1 ? 0 : j));
  return make_op(name, std::move(out), {a, b}, [an = a.node(), bn = b.node(), bwd](Node& self) {
    const Tensor& va = an->value;
    const Tensor& vb = bn->value;
    Tensor ga(self.grad.rows, self.grad.cols);
    Tensor gb(self.grad.rows, self.grad.cols);
    for (std::int64_t i = 0; i < self.grad.rows; ++i)
      for (std::int64_t j = 0; j < self.grad.cols; ++j) {
        const double x = va.at(va.rows == 1 ? 0 : i, va.cols == 1 ? 0 : j);
        const double y = vb.at(vb.rows == 1 ? 0 : i, vb.cols == 1 ? 0 : j);
        const double g = self.grad.at(i, j);
        auto [dx, dy] = bwd(x, y);
        ga.at(i, j) = g * dx;
        gb.at(i, j) = g * dy;
      }
    if (an->requires_grad) reduce_into(ga, an->grad);
    if (bn->requires_grad) reduce_into(gb, bn->grad);
  });
}

template <typename Fwd, typename Deriv>
Var elementwise(const char* name, const Var& a, Fwd fwd, Deriv deriv) {
  const Tensor& va = a.value();
  Tensor out(va.rows, va.cols);
  for (std::size_t i = 0; i < va.data.size(); ++i) out.data[i] = fwd(va.data[i]);
  return make_op(name, std::move(out), {a}, [an = a.node(), deriv](Node& self) {
    if (!an->requires_grad) return;
    for (std::size_t i = 0; i < self.grad.data.size(); ++i)
      an->grad.data[i] += self.grad.data[i] * deriv(an->value.data[i], self.value.data[i]);
  });
}

}  // namespace

Var Var::constant(Tensor t) { return Var(make_node(std::move(t), "const")); }

Var Var::leaf(Tensor t, bool trainable) {
  NodePtr n = make_node(std::move(t), "leaf");
  n->requires_grad = trainable;
  n->trainable = trainable;
  n->grad = Tensor(n->value.rows, n->value.cols);
  return Var(n);
}

Var add(const Var& a, const Var& b) {
  return broadcast_binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return std::pair<double, double>{1.0, 1.0}; });
}

Var sub(const Var& a, const Var& b) {
  return broadcast_binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return std::pair<double, double>{1.0, -1.0}; });
}

Var mul(const Var& a, const Var& b) {
  return broadcast_binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y) { return std::pair<double, double>{y, x}; });
}

Var div(const Var& a, const Var& b) {
  auto clamp_den = [](double y) {
    const double m = std::abs(y) < kLogEps ? (y < 0.0 ? -kLogEps : kLogEps) : y;
    return m;
  };
  return broadcast_binary(
      "div", a, b, [clamp_den](double x, double y) { return x / clamp_den(y); },
      [clamp_den](double x, double y) {
        const double d = clamp_den(y);
        const double dy = std::abs(y) < kLogEps ? 0.0 : -x / (d * d);
        return std::pair<double, double>{1.0 / d, dy};
      });
}

Var neg(const Var& a) {
  return elementwise(
      "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var add(const Var& a, double b) { return add(a, Var::scalar(b)); }
Var mul(const Var& a, double b) { return mul(a, Var::scalar(b)); }

Var matmul(const Var& a, const Var& b) {
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  if (va.cols != vb.rows) shape_error("matmul", va, vb);
  Tensor out(va.rows, vb.cols);
  gemm_nn(va, vb, out, false);
  return make_op("matmul", std::move(out), {a, b}, [an = a.node(), bn = b.node()](Node& self) {
    if (an->requires_grad) gemm_nt(self.grad, bn->value, an->grad, true);
    if (bn->requires_grad) gemm_tn(an->value, self.grad, bn->grad, true);
  });
}

Var exp(const Var& a) {
  return elementwise(
      "exp", a, [](double x) { return std::exp(std::min(x, kExpMax)); },
      [](double x, double y) { return x < kExpMax ? y : 0.0; });
}

Var log(const Var& a) {
  return elementwise(
      "log", a, [](double x) { return std::log(std::max(x, kLogEps)); },
      [](double x, double) { return x > kLogEps ? 1.0 / x : 0.0; });
}

Var tanh(const Var& a) {
  return elementwise(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return elementwise(
      "sigmoid", a, [](double x) { return stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Var softplus(const Var& a) {
  return elementwise(
      "softplus", a, [](double x) { return stable_softplus(x); },
      [](double x, double) { return stable_sigmoid(x); });
}

Var normal_log_sf(const Var& a) {
  return elementwise(
      "normal_log_sf", a, [](double z) { return normal_log_sf_scalar(z); },
      [](double z, double) { return normal_log_sf_deriv(z); });
}

Var softmax_rows(const Var& a) {
  const Tensor& va = a.value();
  Tensor out(va.rows, va.cols);
  for (std::int64_t i = 0; i < va.rows; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::int64_t j = 0; j < va.cols; ++j) m = std::max(m, va.at(i, j));
    double s = 0.0;
    for (std::int64_t j = 0; j < va.cols; ++j) s += out.at(i, j) = std::exp(va.at(i, j) - m);
    for (std::int64_t j = 0; j < va.cols; ++j) out.at(i, j) /= s;
  }
  return make_op("softmax", std::move(out), {a}, [an = a.node()](Node& self) {
    if (!an->requires_grad) return;
    for (std::int64_t i = 0; i < self.value.rows; ++i) {
      double dot = 0.0;
      for (std::int64_t j = 0; j < self.value.cols; ++j) dot += self.grad.at(i, j) * self.value.at(i, j);
      for (std::int64_t j = 0; j < self.value.cols; ++j)
        an->grad.at(i, j) += self.value.at(i, j) * (self.grad.at(i, j) - dot);
    }
  });
}

Var logsumexp_rows(const Var& a) {
  const Tensor& va = a.value();
  Tensor out(va.rows, 1);
  for (std::int64_t i = 0; i < va.rows; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::int64_t j = 0; j < va.cols; ++j) m = std::max(m, va.at(i, j));
    double s = 0.0;
    for (std::int64_t j = 0; j < va.cols; ++j) s += std::exp(va.at(i, j) - m);
    out.at(i, 0) = m + std::log(s);
  }
  return make_op("logsumexp", std::move(out), {a}, [an = a.node()](Node& self) {
    if (!an->requires_grad) return;
    for (std::int64_t i = 0; i < an->value.rows; ++i) {
      const double g = self.grad.at(i, 0);
      const double lse = self.value.at(i, 0);
      for (std::int64_t j = 0; j < an->value.cols; ++j)
        an->grad.at(i, j) += g * std::exp(an->value.at(i, j) - lse);
    }
  });
}

Var sum_rows(const Var& a) {
  const Tensor& va = a.value();
  Tensor out(va.rows, 1);
  for (std::int64_t i = 0; i < va.rows; ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < va.cols; ++j) s += va.at(i, j);
    out.at(i, 0) = s;
  }
  return make_op("sum_rows", std::move(out), {a}, [an = a.node()](Node& self) {
    if (!an->requires_grad) return;
    for (std::int64_t i = 0; i < an->value.rows; ++i)
      for (std::int64_t j = 0; j < an->value.cols; ++j) an->grad.at(i, j) += self.grad.at(i, 0);
  });
}

Var sum_cols(const Var& a) {
  const Tensor& va = a.value();
  Tensor out(1, va.cols);
  for (std::int64_t i = 0; i < va.rows; ++i)
    for (std::int64_t j = 0; j < va.cols; ++j) out.at(0, j) += va.at(i, j);
  return make_op("sum_cols", std::move(out), {a}, [an = a.node()](Node& self) {
    if (!an->requires_grad) return;
    for (std::int64_t i = 0; i < an->value.rows; ++i)
      for (std::int64_t j = 0; j < an->value.cols; ++j) an->grad.at(i, j) += self.grad.at(0, j);
  });
}

Var sum_all(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data) s += v;
  return make_op("sum_all", Tensor::scalar(s), {a}, [an = a.node()](Node& self) {
    if (!an->requires_grad) return;
    const double g = self.grad.data[0];
    for (double& d : an->grad.data) d += g;
  });
}

Var mean_all(const Var& a) { return mul(sum_all(a), 1.0 / static_cast<double>(a.value().numel())); }

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw GraphError("concat_rows: no inputs");
  const std::int64_t c = parts[0].cols();
  std::int64_t r = 0;
  for (const Var& p : parts) {
    if (p.cols() != c) shape_error("concat_rows", parts[0].value(), p.value());
    r += p.rows();
  }
  Tensor out(r, c);
  std::int64_t off = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data.begin(), p.value().data.end(), out.data.begin() + off);
    off += p.value().numel();
  }
  std::vector<NodePtr> nodes;
  for (const Var& p : parts) nodes.push_back(p.node());
  return make_op("concat_rows", std::move(out), parts, [nodes](Node& self) {
    std::int64_t off = 0;
    for (const NodePtr& p : nodes) {
      const std::int64_t n = p->value.numel();
      if (p->requires_grad)
        for (std::int64_t i = 0; i < n; ++i) p->grad.data[i] += self.grad.data[off + i];
      off += n;
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw GraphError("concat_cols: no inputs");
  const std::int64_t r = parts[0].rows();
  std::int64_t c = 0;
  for (const Var& p : parts) {
    if (p.rows() != r) shape_error("concat_cols", parts[0].value(), p.value());
    c += p.cols();
  }
  Tensor out(r, c);
  std::int64_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::int64_t i = 0; i < r; ++i)
      std::copy(v.data.begin() + i * v.cols, v.data.begin() + (i + 1) * v.cols,
                out.data.begin() + i * c + off);
    off += v.cols;
  }
  std::vector<NodePtr> nodes;
  for (const Var& p : parts) nodes.push_back(p.node());
  return make_op("concat_cols", std::move(out), parts, [nodes, c](Node& self) {
    std::int64_t off = 0;
    for (const NodePtr& p : nodes) {
      if (p->requires_grad)
        for (std::int64_t i = 0; i < p->value.rows; ++i)
          for (std::int64_t j = 0; j < p->value.cols; ++j)
            p->grad.at(i, j) += self.grad.data[i * c + off + j];
      off += p->value.cols;
    }
  });
}

Var slice_cols(const Var& a, std::int64_t lo, std::int64_t hi) {
  const Tensor& va = a.value();
  if (lo < 0 || hi > va.cols || lo >= hi)
    throw GraphError("slice_cols: range [" + std::to_string(lo) + "," + std::to_string(hi) +
                     ") invalid for shape [" + va.shape_str() + "]");
  Tensor out(va.rows, hi - lo);
  for (std::int64_t i = 0; i < va.rows; ++i)
    for (std::int64_t j = lo; j < hi; ++j) out.at(i, j - lo) = va.at(i, j);
  return make_op("slice_cols", std::move(out), {a}, [an = a.node(), lo](Node& self) {
    if (!an->requires_grad) return;
    for (std::int64_t i = 0; i < self.value.rows; ++i)
      for (std::int64_t j = 0; j < self.value.cols; ++j) an->grad.at(i, lo + j) += self.grad.at(i, j);
  });
}

Var reshape(const Var& a, std::int64_t rows, std::int64_t cols) {
  const Tensor& va = a.value();
  if (rows * cols != va.numel())
    throw GraphError("reshape: cannot view [" + va.shape_str() + "] as [" + std::to_string(rows) + "x" +
                     std::to_string(cols) + "]");
  Tensor out = Tensor::from_rows(rows, cols, va.data);
  return make_op("reshape", std::move(out), {a}, [an = a.node()](Node& self) {
    if (!an->requires_grad) return;
    for (std::size_t i = 0; i < self.grad.data.size(); ++i) an->grad.data[i] += self.grad.data[i];
  });
}

Var broadcast_to(const Var& a, std::int64_t rows, std::int64_t cols) {
  const Tensor& va = a.value();
  if (!dim_ok(va.rows, rows) || !dim_ok(va.cols, cols))
    throw GraphError("broadcast_to: cannot expand [" + va.shape_str() + "] to [" + std::to_string(rows) +
                     "x" + std::to_string(cols) + "]");
  Tensor out(rows, cols);
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j)
      out.at(i, j) = va.at(va.rows == 1 ? 0 : i, va.cols == 1 ? 0 : j);
  return make_op("broadcast_to", std::move(out), {a}, [an = a.node()](Node& self) {
    if (!an->requires_grad) return;
    reduce_into(self.grad, an->grad);
  });
}

Var gather_rows(const Var& table, const std::vector<int>& index) {
  const Tensor& vt = table.value();
  Tensor out(static_cast<std::int64_t>(index.size()), vt.cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    const int r = index[i];
    if (r < 0 || r >= vt.rows)
      throw GraphError("gather_rows: index " + std::to_string(r) + " out of range for [" + vt.shape_str() + "]");
    for (std::int64_t j = 0; j < vt.cols; ++j) out.at(static_cast<std::int64_t>(i), j) = vt.at(r, j);
  }
  return make_op("gather_rows", std::move(out), {table}, [tn = table.node(), index](Node& self) {
    if (!tn->requires_grad) return;
    for (std::size_t i = 0; i < index.size(); ++i)
      for (std::int64_t j = 0; j < tn->value.cols; ++j)
        tn->grad.at(index[i], j) += self.grad.at(static_cast<std::int64_t>(i), j);
  });
}

Var take_columns(const Var& a, const std::vector<int>& index) {
  const Tensor& va = a.value();
  if (static_cast<std::int64_t>(index.size()) != va.rows)
    throw GraphError("take_columns: need one index per row of [" + va.shape_str() + "]");
  Tensor out(va.rows, 1);
  for (std::int64_t i = 0; i < va.rows; ++i) {
    const int c = index[static_cast<std::size_t>(i)];
    if (c < 0 || c >= va.cols)
      throw GraphError("take_columns: index " + std::to_string(c) + " out of range for [" + va.shape_str() + "]");
    out.at(i, 0) = va.at(i, c);
  }
  return make_op("take_columns", std::move(out), {a}, [an = a.node(), index](Node& self) {
    if (!an->requires_grad) return;
    for (std::int64_t i = 0; i < an->value.rows; ++i)
      an->grad.at(i, index[static_cast<std::size_t>(i)]) += self.grad.at(i, 0);
  });
}

Var make_custom_op(std::string op, Tensor value, std::vector<Var> parents,
                   std::function<void(Node&)> backward_fn) {
  return make_op(std::move(op), std::move(value), std::move(parents), std::move(backward_fn));
}

void backward(const Var& loss) {
  if (!loss.defined()) throw GraphError("backward: undefined loss");
  Node* root = loss.node().get();
  if (root->value.numel() != 1)
    throw GraphError("backward: loss must be scalar, got shape [" + root->value.shape_str() + "]");
  if (!root->requires_grad) return;

  std::vector<Node*> topo;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    topo.push_back(n);
    for (const NodePtr& p : n->parents)
      if (p->requires_grad) stack.push_back(p.get());
  }
  std::sort(topo.begin(), topo.end(), [](const Node* a, const Node* b) { return a->id > b->id; });

  for (Node* n : topo) n->grad = Tensor(n->value.rows, n->value.cols);
  root->grad.data[0] = 1.0;
  for (Node* n : topo)
    if (n->backward_fn) n->backward_fn(*n);
}

double guarded_log(double x) { return std::log(std::max(x, kLogEps)); }

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

namespace {
constexpr double kHalfLog2Pi = 0.9189385332046727;  // log(2*pi)/2
}

double normal_log_sf_scalar(double z) {
  if (z <= 8.0) return std::log(0.5 * std::erfc(z * 0.7071067811865475244));
  // Upper-tail asymptotic expansion; erfc underflows past z ~ 37.
  const double z2 = z * z;
  const double corr = std::log1p(-1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2));
  return -0.5 * z2 - kHalfLog2Pi - std::log(z) + corr;
}

double normal_log_sf_deriv(double z) {
  const double log_pdf = -0.5 * z * z - kHalfLog2Pi;
  return -std::exp(log_pdf - normal_log_sf_scalar(z));
}

Var ParamStore::add(const std::string& name, Tensor init) {
  if (params_.count(name)) throw GraphError("ParamStore: duplicate parameter '" + name + "'");
  Var v = Var::leaf(std::move(init), true);
  order_.push_back(name);
  params_.emplace(name, v);
  return v;
}

Var ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw GraphError("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [name, v] : params_) {
    Tensor& g = v.mutable_grad();
    std::fill(g.data.begin(), g.data.end(), 0.0);
  }
}

std::int64_t ParamStore::num_scalars() const {
  std::int64_t n = 0;
  for (const auto& name : order_) n += params_.at(name).value().numel();
  return n;
}

}  // namespace mvtpp
