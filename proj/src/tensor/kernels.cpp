#include "nmt/tensor/kernels.hpp"

#include <atomic>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nmt::tensor::kernels {

namespace {

std::atomic<Backend> g_backend{
#ifdef _OPENMP
    Backend::openmp
#else
    Backend::serial
#endif
};

}  // namespace

Backend backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }

bool openmp_available() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

// One output element: fixed-order dot product over k.
inline double dot_element(const double* a, const double* b, std::size_t m,
                          std::size_t k, std::size_t n, std::size_t i,
                          std::size_t j, bool ta, bool tb) {
  double acc = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = ta ? a[p * m + i] : a[i * k + p];
    const double bv = tb ? b[j * k + p] : b[p * n + j];
    acc += av * bv;
  }
  return acc;
}

void matmul_serial(std::size_t batch, std::size_t m, std::size_t k,
                   std::size_t n, const double* a, bool ta, const double* b,
                   bool tb, double* c, bool accumulate) {
  for (std::size_t g = 0; g < batch; ++g) {
    const double* ag = a + g * m * k;
    const double* bg = b + g * k * n;
    double* cg = c + g * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double v = dot_element(ag, bg, m, k, n, i, j, ta, tb);
        cg[i * n + j] = accumulate ? cg[i * n + j] + v : v;
      }
    }
  }
}

#ifdef _OPENMP
void matmul_openmp(std::size_t batch, std::size_t m, std::size_t k,
                   std::size_t n, const double* a, bool ta, const double* b,
                   bool tb, double* c, bool accumulate) {
  const long long rows = static_cast<long long>(batch * m);
#pragma omp parallel for schedule(static)
  for (long long r = 0; r < rows; ++r) {
    const std::size_t g = static_cast<std::size_t>(r) / m;
    const std::size_t i = static_cast<std::size_t>(r) % m;
    const double* ag = a + g * m * k;
    const double* bg = b + g * k * n;
    double* cg = c + g * m * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = dot_element(ag, bg, m, k, n, i, j, ta, tb);
      cg[i * n + j] = accumulate ? cg[i * n + j] + v : v;
    }
  }
}
#endif

inline void softmax_one_row(const double* xr, double* yr, std::size_t cols) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < cols; ++j) mx = std::max(mx, xr[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    yr[j] = std::exp(xr[j] - mx);
    sum += yr[j];
  }
  const double inv = 1.0 / sum;
  for (std::size_t j = 0; j < cols; ++j) yr[j] *= inv;
}

inline void layer_norm_one_row(const double* xr, const double* gain,
                               const double* bias, double eps, double* yr,
                               std::size_t cols, double* mean_out,
                               double* rstd_out) {
  double mean = 0.0;
  for (std::size_t j = 0; j < cols; ++j) mean += xr[j];
  mean /= static_cast<double>(cols);
  double var = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    const double d = xr[j] - mean;
    var += d * d;
  }
  var /= static_cast<double>(cols);
  const double rstd = 1.0 / std::sqrt(var + eps);
  for (std::size_t j = 0; j < cols; ++j) {
    yr[j] = (xr[j] - mean) * rstd * gain[j] + bias[j];
  }
  *mean_out = mean;
  *rstd_out = rstd;
}

}  // namespace

namespace {

// Below this many independent output rows the fork/join cost outweighs the
// parallel work; both backends then take the serial path (which is
// bit-identical anyway).
constexpr std::size_t kMinParallelRows = 64;

}  // namespace

void matmul(std::size_t batch, std::size_t m, std::size_t k, std::size_t n,
            const double* a, bool trans_a, const double* b, bool trans_b,
            double* c, bool accumulate) {
#ifdef _OPENMP
  if (backend() == Backend::openmp && batch * m >= kMinParallelRows) {
    matmul_openmp(batch, m, k, n, a, trans_a, b, trans_b, c, accumulate);
    return;
  }
#endif
  matmul_serial(batch, m, k, n, a, trans_a, b, trans_b, c, accumulate);
}

std::ptrdiff_t softmax_rows(std::size_t rows, std::size_t cols,
                            const double* x, double* y) {
  // A row with no finite entry has no valid distribution; detect first so
  // the parallel section stays branch-free.
  for (std::size_t r = 0; r < rows; ++r) {
    bool any_finite = false;
    for (std::size_t j = 0; j < cols && !any_finite; ++j) {
      any_finite = x[r * cols + j] != -std::numeric_limits<double>::infinity();
    }
    if (!any_finite) return static_cast<std::ptrdiff_t>(r);
  }
#ifdef _OPENMP
  if (backend() == Backend::openmp && rows >= kMinParallelRows) {
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < static_cast<long long>(rows); ++r) {
      softmax_one_row(x + r * cols, y + r * cols, cols);
    }
    return -1;
  }
#endif
  for (std::size_t r = 0; r < rows; ++r) {
    softmax_one_row(x + r * cols, y + r * cols, cols);
  }
  return -1;
}

void layer_norm_rows(std::size_t rows, std::size_t cols, const double* x,
                     const double* gain, const double* bias, double eps,
                     double* y, double* mean, double* rstd) {
#ifdef _OPENMP
  if (backend() == Backend::openmp && rows >= kMinParallelRows) {
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < static_cast<long long>(rows); ++r) {
      layer_norm_one_row(x + r * cols, gain, bias, eps, y + r * cols, cols,
                         mean + r, rstd + r);
    }
    return;
  }
#endif
  for (std::size_t r = 0; r < rows; ++r) {
    layer_norm_one_row(x + r * cols, gain, bias, eps, y + r * cols, cols,
                       mean + r, rstd + r);
  }
}

}  // namespace nmt::tensor::kernels
