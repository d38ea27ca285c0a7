#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mvtpp/tensor.hpp"

namespace mvtpp {

class GraphError : public std::runtime_error {
 public:
  explicit GraphError(const std::string& msg) : std::runtime_error(msg) {}
};

// One vertex of the dynamic computation graph. Nodes that do not require
// gradients drop their parent links, so inference graphs stay flat.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool trainable = false;
  std::uint64_t id = 0;
  std::string op;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
};

using NodePtr = std::shared_ptr<Node>;

// Value-semantic handle to a graph node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  static Var constant(Tensor t);
  static Var scalar(double v) { return constant(Tensor::scalar(v)); }
  static Var leaf(Tensor t, bool trainable = true);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  std::int64_t rows() const { return node_->value.rows; }
  std::int64_t cols() const { return node_->value.cols; }
  double item() const { return node_->value.item(); }
  NodePtr node() const { return node_; }

 private:
  NodePtr node_;
};

// Numerical hygiene constants. log and division clamp their argument at
// kLogEps; exp saturates at kExpMax so extreme inputs stay finite. The
// backward rules differentiate the clamped function itself, so finite
// differences agree with the analytic gradients everywhere.
inline constexpr double kLogEps = 1e-10;
inline constexpr double kExpMax = 700.0;

// Elementwise with broadcasting over [M,N]/[1,N]/[M,1]/[1,1] operands.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var add(const Var& a, double b);
Var mul(const Var& a, double b);

Var matmul(const Var& a, const Var& b);

Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);
// log of the standard normal upper tail, elementwise.
Var normal_log_sf(const Var& a);

// Row-wise reductions / normalizations (axis = columns within each row).
Var softmax_rows(const Var& a);
Var logsumexp_rows(const Var& a);  // [M,N] -> [M,1]
Var sum_rows(const Var& a);        // [M,N] -> [M,1]
Var sum_cols(const Var& a);        // [M,N] -> [1,N]
Var sum_all(const Var& a);         // [M,N] -> [1,1]
Var mean_all(const Var& a);

Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& a, std::int64_t lo, std::int64_t hi);
Var reshape(const Var& a, std::int64_t rows, std::int64_t cols);
Var broadcast_to(const Var& a, std::int64_t rows, std::int64_t cols);

// out[i,:] = table[index[i],:]; gradient scatters back into the table.
Var gather_rows(const Var& table, const std::vector<int>& index);
// out[i,0] = a[i, index[i]].
Var take_columns(const Var& a, const std::vector<int>& index);

// Builds an op node with a caller-supplied backward rule; the rule reads
// self.grad/self.value and accumulates into the parents' grads.
Var make_custom_op(std::string op, Tensor value, std::vector<Var> parents,
                   std::function<void(Node&)> backward_fn);

// Reverse pass from a scalar loss. Fills grad on every reachable node that
// requires gradients; grads are reset at the start of each call.
void backward(const Var& loss);

// Scalar versions of the engine's guarded functions, shared with the
// closed-form (non-graph) evaluation paths.
double guarded_log(double x);
double stable_sigmoid(double x);
double stable_softplus(double x);
double normal_log_sf_scalar(double z);
double normal_log_sf_deriv(double z);

// Named trainable leaves with persistent value/grad slots.
class ParamStore {
 public:
  Var add(const std::string& name, Tensor init);
  Var get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }
  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }

  void zero_grad();
  std::int64_t num_scalars() const;

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Var> params_;
};

}  // namespace mvtpp
