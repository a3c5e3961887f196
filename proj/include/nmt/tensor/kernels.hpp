#pragma once

#include <cstddef>

namespace nmt::tensor::kernels {

// Every kernel has a serial reference implementation and an OpenMP one.
// The two are bit-identical by construction: parallelism is only ever over
// independent output elements, each of which keeps a fixed reduction order.
// The serial path is the reference the tests compare against; the OpenMP
// path is the default when compiled with OpenMP support.
enum class Backend { serial, openmp };

Backend backend();
void set_backend(Backend b);
bool openmp_available();
int thread_count();

// Row-major batched matrix product:
//   c[g] (+)= op_a(a[g]) * op_b(b[g])   for g in [0, batch)
// where op_x transposes when the flag is set. Per-batch strides are m*k,
// k*n and m*n (logical [m,k] x [k,n] -> [m,n] after transposition).
void matmul(std::size_t batch, std::size_t m, std::size_t k, std::size_t n,
            const double* a, bool trans_a, const double* b, bool trans_b,
            double* c, bool accumulate);

// Row-wise softmax with max-subtraction. -inf entries map to exactly 0.
// Returns the index of the first all--inf row, or -1 when every row held a
// valid distribution.
std::ptrdiff_t softmax_rows(std::size_t rows, std::size_t cols,
                            const double* x, double* y);

// Row-wise standardization followed by the affine gain/bias. Writes the
// per-row mean and reciprocal standard deviation for the backward pass.
void layer_norm_rows(std::size_t rows, std::size_t cols, const double* x,
                     const double* gain, const double* bias, double eps,
                     double* y, double* mean, double* rstd);

}  // namespace nmt::tensor::kernels
