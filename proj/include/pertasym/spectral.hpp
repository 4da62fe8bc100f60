#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace pertasym {

struct TorusGeometry {
  double L = 2.0 * std::numbers::pi;
  int N = 17;

  // Throws a domain error unless L > 0 and N is odd and >= 3.
  void validate() const;

  int half() const { return (N - 1) / 2; }
  std::size_t size() const { return static_cast<std::size_t>(N) * N * N; }
  double volume() const { return L * L * L; }
  double kscale() const { return 2.0 * std::numbers::pi / L; }

  // Wave numbers in [-half, half]; index of (0,0,0) is size()/2.
  std::size_t index(int nx, int ny, int nz) const;
  std::array<int, 3> wavenumber(std::size_t i) const;
  int n2(std::size_t i) const;
  double k2(std::size_t i) const { return kscale() * kscale() * n2(i); }
  std::size_t mirror(std::size_t i) const { return size() - 1 - i; }
  std::size_t center() const { return size() / 2; }

  bool operator==(const TorusGeometry&) const = default;
};

// Fourier coefficients of a real field, stored for the whole cube in split
// real/imag arrays. Coefficient (0,0,0) is the spatial mean.
class SpectralField {
 public:
  SpectralField() = default;
  explicit SpectralField(const TorusGeometry& g);

  const TorusGeometry& geometry() const { return geom_; }
  std::size_t size() const { return re_.size(); }

  std::complex<double> at(std::size_t i) const { return {re_[i], im_[i]}; }
  std::complex<double> at(int nx, int ny, int nz) const { return at(geom_.index(nx, ny, nz)); }

  // Sets coefficient i and its conjugate partner. The mean is forced real.
  void set_mode(std::size_t i, std::complex<double> c);
  void set_mode(int nx, int ny, int nz, std::complex<double> c) {
    set_mode(geom_.index(nx, ny, nz), c);
  }

  std::vector<double>& re() { return re_; }
  std::vector<double>& im() { return im_; }
  const std::vector<double>& re() const { return re_; }
  const std::vector<double>& im() const { return im_; }

  double mean() const { return re_[geom_.center()]; }

  // max_k |c(-k) - conj c(k)|
  double hermitian_defect() const;

  // sum_k |c_k|^2, which equals the grid mean square.
  double norm2() const;

  SpectralField& operator+=(const SpectralField& o);
  SpectralField& operator-=(const SpectralField& o);
  SpectralField& operator*=(double s);
  // this += a * x
  void axpy(double a, const SpectralField& x);

 private:
  TorusGeometry geom_;
  std::vector<double> re_, im_;
};

SpectralField operator+(SpectralField a, const SpectralField& b);
SpectralField operator-(SpectralField a, const SpectralField& b);
SpectralField operator*(double s, SpectralField a);

struct GridField {
  TorusGeometry geometry;
  std::vector<double> values;  // row-major (x, y, z), z fastest
};

// Separable DFT on odd lengths. Lines are transformed with the active kernel.
class Dft {
 public:
  explicit Dft(int n);
  int n() const { return n_; }
  // Transforms `lines` contiguous lines; output is written transposed
  // (out[j*lines + line]).
  void forward_lines(const double* re, const double* im, std::size_t lines, double* out_re,
                     double* out_im) const;
  void inverse_lines(const double* re, const double* im, std::size_t lines, double* out_re,
                     double* out_im) const;

 private:
  int n_;
  std::vector<double> fwd_re_, fwd_im_, inv_re_, inv_im_;
};

// Throws a data error on non-finite samples.
SpectralField forward_transform(const GridField& grid);
GridField inverse_transform(const SpectralField& field);
SpectralField laplacian(const SpectralField& field);
std::pair<double, SpectralField> zero_mean_split(const SpectralField& field);

// Distinct |n|^2 values of the cube and the shell of every coefficient.
struct Shells {
  std::vector<int> n2;
  std::vector<std::uint32_t> of;
};
Shells make_shells(const TorusGeometry& g);

// Band-limited random real field: independent standard normal real and
// imaginary parts for every mode with max_i |n_i| <= kmax_inf, scaled by
// amplitude; the mean gets a real normal draw.
SpectralField random_field(const TorusGeometry& g, std::mt19937_64& rng, int kmax_inf = 4,
                           double amplitude = 1.0, bool zero_mean = false);

}  // namespace pertasym
