#include "mvtpp/tensor.hpp"

namespace mvtpp {

void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  const std::int64_t m = a.rows, k = a.cols, n = b.cols;
  if (!accumulate) std::fill(c.data.begin(), c.data.end(), 0.0);
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double* pc = c.data.data();
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t l = 0; l < k; ++l) {
      const double av = pa[i * k + l];
      if (av == 0.0) continue;
      const double* brow = pb + l * n;
      double* crow = pc + i * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  const std::int64_t m = a.rows, k = a.cols, n = b.rows;
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double* pc = c.data.data();
  for (std::int64_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    for (std::int64_t j = 0; j < n; ++j) {
      const double* brow = pb + j * k;
      double acc = 0.0;
      for (std::int64_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
      if (accumulate)
        pc[i * n + j] += acc;
      else
        pc[i * n + j] = acc;
    }
  }
}

void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  const std::int64_t k = a.rows, m = a.cols, n = b.cols;
  if (!accumulate) std::fill(c.data.begin(), c.data.end(), 0.0);
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double* pc = c.data.data();
  for (std::int64_t l = 0; l < k; ++l) {
    const double* arow = pa + l * m;
    const double* brow = pb + l * n;
    for (std::int64_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = pc + i * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace mvtpp
