#pragma once

// Data-parallel inner loops. Every entry point has a scalar reference
// implementation; an AVX2+FMA variant is selected at runtime when the CPU
// supports it. Arrays are plain double buffers in split real/imag layout.

#include <cstddef>
#include <string_view>

namespace pertasym::kernels {

struct Table {
  std::string_view name;

  // For each of `lines` contiguous complex input lines x (length n), computes
  // y[j] = sum_m wt[m*n + j] * x[m] and stores y[j] at out[j*lines + line].
  // wt is the transposed transform matrix.
  void (*dft_lines)(const double* wt_re, const double* wt_im, std::size_t n,
                    const double* x_re, const double* x_im, std::size_t lines,
                    double* out_re, double* out_im);

  // out[i] = s[i] * x[i]
  void (*scale_by)(std::size_t n, const double* s, const double* x, double* out);

  // y[i] += a * x[i]
  void (*axpy)(std::size_t n, double a, const double* x, double* y);

  // (p, q) <- (m00 p + m01 q, m10 p + m11 q) per element
  void (*transfer_apply)(std::size_t n, const double* m00, const double* m01,
                         const double* m10, const double* m11, double* p, double* q);

  // sum_i w[i] * (re[i]^2 + im[i]^2); w may be null for unit weights
  double (*weighted_norm2)(std::size_t n, const double* w, const double* re,
                           const double* im);
};

const Table& scalar();
// Null when the AVX2 variant is not compiled in or not supported by the CPU.
const Table* avx2();

// Active table: AVX2 when available unless PERTASYM_FORCE_SCALAR is set in
// the environment or force_scalar(true) was called.
const Table& active();
void force_scalar(bool on);

}  // namespace pertasym::kernels
