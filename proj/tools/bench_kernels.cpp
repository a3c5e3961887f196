// Times the serial reference kernels against the OpenMP ones.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "nmt/rng.hpp"
#include "nmt/tensor/kernels.hpp"

using namespace nmt::tensor;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_for(kernels::Backend backend, int reps,
                   const std::function<void()>& body) {
  kernels::set_backend(backend);
  body();  // warm-up
  const auto start = Clock::now();
  for (int i = 0; i < reps; ++i) body();
  const std::chrono::duration<double> dt = Clock::now() - start;
  return dt.count() / reps;
}

std::vector<double> random_values(std::size_t n, nmt::Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void bench_matmul(std::size_t m, std::size_t k, std::size_t n, int reps,
                  nmt::Rng& rng) {
  const auto a = random_values(m * k, rng);
  const auto b = random_values(k * n, rng);
  std::vector<double> c(m * n);
  auto body = [&] {
    kernels::matmul(1, m, k, n, a.data(), false, b.data(), false, c.data(),
                    false);
  };
  const double serial = seconds_for(kernels::Backend::serial, reps, body);
  const double openmp = seconds_for(kernels::Backend::openmp, reps, body);
  std::printf("matmul %4zux%4zux%4zu  serial %9.3f ms  openmp %9.3f ms  speedup %.2fx\n",
              m, k, n, serial * 1e3, openmp * 1e3, serial / openmp);
}

void bench_softmax(std::size_t rows, std::size_t cols, int reps, nmt::Rng& rng) {
  const auto x = random_values(rows * cols, rng);
  std::vector<double> y(rows * cols);
  auto body = [&] { kernels::softmax_rows(rows, cols, x.data(), y.data()); };
  const double serial = seconds_for(kernels::Backend::serial, reps, body);
  const double openmp = seconds_for(kernels::Backend::openmp, reps, body);
  std::printf("softmax %5zux%4zu     serial %9.3f ms  openmp %9.3f ms  speedup %.2fx\n",
              rows, cols, serial * 1e3, openmp * 1e3, serial / openmp);
}

void bench_layer_norm(std::size_t rows, std::size_t cols, int reps,
                      nmt::Rng& rng) {
  const auto x = random_values(rows * cols, rng);
  const std::vector<double> gain(cols, 1.0), bias(cols, 0.0);
  std::vector<double> y(rows * cols), mean(rows), rstd(rows);
  auto body = [&] {
    kernels::layer_norm_rows(rows, cols, x.data(), gain.data(), bias.data(),
                             1e-6, y.data(), mean.data(), rstd.data());
  };
  const double serial = seconds_for(kernels::Backend::serial, reps, body);
  const double openmp = seconds_for(kernels::Backend::openmp, reps, body);
  std::printf("layernorm %5zux%4zu   serial %9.3f ms  openmp %9.3f ms  speedup %.2fx\n",
              rows, cols, serial * 1e3, openmp * 1e3, serial / openmp);
}

}  // namespace

int main() {
  std::printf("OpenMP %s, %d threads\n",
              kernels::openmp_available() ? "available" : "not compiled in",
              kernels::thread_count());
  nmt::Rng rng(7);
  bench_matmul(128, 128, 128, 20, rng);
  bench_matmul(256, 256, 256, 10, rng);
  bench_matmul(512, 512, 512, 3, rng);
  bench_softmax(4096, 512, 20, rng);
  bench_softmax(16384, 512, 10, rng);
  bench_layer_norm(4096, 512, 20, rng);
  bench_layer_norm(16384, 512, 10, rng);
  kernels::set_backend(kernels::openmp_available() ? kernels::Backend::openmp
                                                   : kernels::Backend::serial);
  return 0;
}
