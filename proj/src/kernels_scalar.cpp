#include "pertasym/kernels.hpp"

namespace pertasym::kernels {
namespace {

void dft_lines(const double* wt_re, const double* wt_im, std::size_t n, const double* x_re,
               const double* x_im, std::size_t lines, double* out_re, double* out_im) {
  for (std::size_t l = 0; l < lines; ++l) {
    const double* xr = x_re + l * n;
    const double* xi = x_im + l * n;
    for (std::size_t j = 0; j < n; ++j) {
      double yr = 0.0, yi = 0.0;
      for (std::size_t m = 0; m < n; ++m) {
        const double wr = wt_re[m * n + j];
        const double wi = wt_im[m * n + j];
        yr += wr * xr[m] - wi * xi[m];
        yi += wr * xi[m] + wi * xr[m];
      }
      out_re[j * lines + l] = yr;
      out_im[j * lines + l] = yi;
    }
  }
}

void scale_by(std::size_t n, const double* s, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = s[i] * x[i];
}

void axpy(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void transfer_apply(std::size_t n, const double* m00, const double* m01, const double* m10,
                    const double* m11, double* p, double* q) {
  for (std::size_t i = 0; i < n; ++i) {
    const double a = p[i], b = q[i];
    p[i] = m00[i] * a + m01[i] * b;
    q[i] = m10[i] * a + m11[i] * b;
  }
}

double weighted_norm2(std::size_t n, const double* w, const double* re, const double* im) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = re[i] * re[i] + im[i] * im[i];
    s += w ? w[i] * v : v;
  }
  return s;
}

}  // namespace

const Table& scalar() {
  static const Table t{"scalar", dft_lines, scale_by, axpy, transfer_apply, weighted_norm2};
  return t;
}

}  // namespace pertasym::kernels
