#include "pertasym/kernels.hpp"

#if defined(__x86_64__) && defined(PERTASYM_HAVE_AVX2)
#include <immintrin.h>

namespace pertasym::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void dft_lines(const double* wt_re, const double* wt_im, std::size_t n, const double* x_re,
               const double* x_im, std::size_t lines, double* out_re, double* out_im) {
  const std::size_t nv = n - n % 4;
  alignas(32) double yr[4], yi[4];
  for (std::size_t l = 0; l < lines; ++l) {
    const double* xr = x_re + l * n;
    const double* xi = x_im + l * n;
    for (std::size_t j = 0; j < nv; j += 4) {
      __m256d ar = _mm256_setzero_pd();
      __m256d ai = _mm256_setzero_pd();
      for (std::size_t m = 0; m < n; ++m) {
        const __m256d wr = _mm256_loadu_pd(wt_re + m * n + j);
        const __m256d wi = _mm256_loadu_pd(wt_im + m * n + j);
        const __m256d br = _mm256_set1_pd(xr[m]);
        const __m256d bi = _mm256_set1_pd(xi[m]);
        ar = _mm256_fmadd_pd(wr, br, ar);
        ar = _mm256_fnmadd_pd(wi, bi, ar);
        ai = _mm256_fmadd_pd(wr, bi, ai);
        ai = _mm256_fmadd_pd(wi, br, ai);
      }
      _mm256_store_pd(yr, ar);
      _mm256_store_pd(yi, ai);
      for (std::size_t q = 0; q < 4; ++q) {
        out_re[(j + q) * lines + l] = yr[q];
        out_im[(j + q) * lines + l] = yi[q];
      }
    }
    for (std::size_t j = nv; j < n; ++j) {
      double sr = 0.0, si = 0.0;
      for (std::size_t m = 0; m < n; ++m) {
        const double wr = wt_re[m * n + j];
        const double wi = wt_im[m * n + j];
        sr += wr * xr[m] - wi * xi[m];
        si += wr * xi[m] + wi * xr[m];
      }
      out_re[j * lines + l] = sr;
      out_im[j * lines + l] = si;
    }
  }
}

void scale_by(std::size_t n, const double* s, const double* x, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(s + i), _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = s[i] * x[i];
}

void axpy(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i,
                     _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

void transfer_apply(std::size_t n, const double* m00, const double* m01, const double* m10,
                    const double* m11, double* p, double* q) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(p + i);
    const __m256d b = _mm256_loadu_pd(q + i);
    const __m256d np =
        _mm256_fmadd_pd(_mm256_loadu_pd(m01 + i), b, _mm256_mul_pd(_mm256_loadu_pd(m00 + i), a));
    const __m256d nq =
        _mm256_fmadd_pd(_mm256_loadu_pd(m11 + i), b, _mm256_mul_pd(_mm256_loadu_pd(m10 + i), a));
    _mm256_storeu_pd(p + i, np);
    _mm256_storeu_pd(q + i, nq);
  }
  for (; i < n; ++i) {
    const double a = p[i], b = q[i];
    p[i] = m00[i] * a + m01[i] * b;
    q[i] = m10[i] * a + m11[i] * b;
  }
}

double weighted_norm2(std::size_t n, const double* w, const double* re, const double* im) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r = _mm256_loadu_pd(re + i);
    const __m256d m = _mm256_loadu_pd(im + i);
    __m256d v = _mm256_fmadd_pd(m, m, _mm256_mul_pd(r, r));
    if (w) v = _mm256_mul_pd(_mm256_loadu_pd(w + i), v);
    acc = _mm256_add_pd(acc, v);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double v = re[i] * re[i] + im[i] * im[i];
    s += w ? w[i] * v : v;
  }
  return s;
}

}  // namespace

const Table* avx2_table() {
  static const Table t{"avx2", dft_lines, scale_by, axpy, transfer_apply, weighted_norm2};
  return &t;
}

}  // namespace pertasym::kernels

#else

namespace pertasym::kernels {
const Table* avx2_table() { return nullptr; }
}  // namespace pertasym::kernels

#endif
