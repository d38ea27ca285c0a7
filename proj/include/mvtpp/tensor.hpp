#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvtpp {

// Dense row-major matrix of doubles. Every tensor in the engine is 2-D;
// scalars are [1,1] and row vectors [1,n].
struct Tensor {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::int64_t r, std::int64_t c) : rows(r), cols(c), data(static_cast<std::size_t>(r * c), 0.0) {
    if (r < 0 || c < 0) throw std::invalid_argument("Tensor: negative shape");
  }

  static Tensor zeros(std::int64_t r, std::int64_t c) { return Tensor(r, c); }

  static Tensor full(std::int64_t r, std::int64_t c, double v) {
    Tensor t(r, c);
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  static Tensor scalar(double v) { return full(1, 1, v); }

  static Tensor row(const std::vector<double>& v) {
    Tensor t(1, static_cast<std::int64_t>(v.size()));
    t.data = v;
    return t;
  }

  static Tensor from_rows(std::int64_t r, std::int64_t c, std::vector<double> d) {
    if (static_cast<std::int64_t>(d.size()) != r * c)
      throw std::invalid_argument("Tensor::from_rows: data length does not match shape");
    Tensor t;
    t.rows = r;
    t.cols = c;
    t.data = std::move(d);
    return t;
  }

  std::int64_t numel() const { return rows * cols; }

  double& at(std::int64_t i, std::int64_t j) { return data[static_cast<std::size_t>(i * cols + j)]; }
  double at(std::int64_t i, std::int64_t j) const { return data[static_cast<std::size_t>(i * cols + j)]; }

  double item() const {
    if (numel() != 1) throw std::logic_error("Tensor::item: not a scalar, shape [" + shape_str() + "]");
    return data[0];
  }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  std::string shape_str() const { return std::to_string(rows) + "x" + std::to_string(cols); }
};

// C += (or =) op(A) * op(B) kernels used by matmul forward/backward.
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate);
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate);  // a * b^T
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate);  // a^T * b

}  // namespace mvtpp
