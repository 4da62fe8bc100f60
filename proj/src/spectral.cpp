#include "pertasym/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "pertasym/error.hpp"
#include "pertasym/kernels.hpp"

namespace pertasym {

void TorusGeometry::validate() const {
  if (!(L > 0.0) || !std::isfinite(L)) fail(ErrorKind::Domain, "torus side length must be > 0");
  if (N < 3 || N % 2 == 0) fail(ErrorKind::Domain, "mode count N must be odd and >= 3");
}

std::size_t TorusGeometry::index(int nx, int ny, int nz) const {
  const int h = half();
  if (std::abs(nx) > h || std::abs(ny) > h || std::abs(nz) > h)
    fail(ErrorKind::Domain, "wave number outside truncated cube");
  return (static_cast<std::size_t>(nx + h) * N + static_cast<std::size_t>(ny + h)) * N +
         static_cast<std::size_t>(nz + h);
}

std::array<int, 3> TorusGeometry::wavenumber(std::size_t i) const {
  const int h = half();
  const int iz = static_cast<int>(i % N);
  const int iy = static_cast<int>((i / N) % N);
  const int ix = static_cast<int>(i / (static_cast<std::size_t>(N) * N));
  return {ix - h, iy - h, iz - h};
}

int TorusGeometry::n2(std::size_t i) const {
  const auto k = wavenumber(i);
  return k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
}

SpectralField::SpectralField(const TorusGeometry& g) : geom_(g) {
  g.validate();
  re_.assign(g.size(), 0.0);
  im_.assign(g.size(), 0.0);
}

void SpectralField::set_mode(std::size_t i, std::complex<double> c) {
  const std::size_t j = geom_.mirror(i);
  if (i == j) {
    re_[i] = c.real();
    im_[i] = 0.0;
    return;
  }
  re_[i] = c.real();
  im_[i] = c.imag();
  re_[j] = c.real();
  im_[j] = -c.imag();
}

double SpectralField::hermitian_defect() const {
  double d = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    const std::size_t j = geom_.mirror(i);
    d = std::max(d, std::hypot(re_[j] - re_[i], im_[j] + im_[i]));
  }
  return d;
}

double SpectralField::norm2() const {
  return kernels::active().weighted_norm2(size(), nullptr, re_.data(), im_.data());
}

SpectralField& SpectralField::operator+=(const SpectralField& o) {
  axpy(1.0, o);
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
  axpy(-1.0, o);
  return *this;
}

SpectralField& SpectralField::operator*=(double s) {
  for (auto& v : re_) v *= s;
  for (auto& v : im_) v *= s;
  return *this;
}

void SpectralField::axpy(double a, const SpectralField& x) {
  if (!(x.geom_ == geom_)) fail(ErrorKind::Domain, "geometry mismatch");
  const auto& k = kernels::active();
  k.axpy(size(), a, x.re_.data(), re_.data());
  k.axpy(size(), a, x.im_.data(), im_.data());
}

SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
SpectralField operator*(double s, SpectralField a) { return a *= s; }

Dft::Dft(int n) : n_(n) {
  if (n < 1 || n % 2 == 0) fail(ErrorKind::Domain, "DFT length must be odd");
  const int h = (n - 1) / 2;
  // cos/sin of 2 pi r / n with r and n - r sharing one evaluation, so rows for
  // -k are exact conjugates of rows for k
  std::vector<double> c(n), s(n);
  for (int r = 0; r < n; ++r) {
    const int q = std::min(r, n - r);
    const double ang = 2.0 * std::numbers::pi * q / n;
    c[r] = std::cos(ang);
    s[r] = r <= n - r ? std::sin(ang) : -std::sin(ang);
  }
  const std::size_t nn = static_cast<std::size_t>(n) * n;
  fwd_re_.resize(nn);
  fwd_im_.resize(nn);
  inv_re_.resize(nn);
  inv_im_.resize(nn);
  for (int j = 0; j < n; ++j) {
    const int k = j - h;
    for (int m = 0; m < n; ++m) {
      const int r = ((k * m) % n + n) % n;
      // forward: out[j] = (1/n) sum_m e^{-2 pi i k m / n} x[m]
      fwd_re_[static_cast<std::size_t>(m) * n + j] = c[r] / n;
      fwd_im_[static_cast<std::size_t>(m) * n + j] = -s[r] / n;
      // inverse: out[m] = sum_j e^{+2 pi i k m / n} c[j]
      inv_re_[static_cast<std::size_t>(j) * n + m] = c[r];
      inv_im_[static_cast<std::size_t>(j) * n + m] = s[r];
    }
  }
}

void Dft::forward_lines(const double* re, const double* im, std::size_t lines, double* out_re,
                        double* out_im) const {
  kernels::active().dft_lines(fwd_re_.data(), fwd_im_.data(), n_, re, im, lines, out_re, out_im);
}

void Dft::inverse_lines(const double* re, const double* im, std::size_t lines, double* out_re,
                        double* out_im) const {
  kernels::active().dft_lines(inv_re_.data(), inv_im_.data(), n_, re, im, lines, out_re, out_im);
}

namespace {

// Three passes over the last axis with cyclic axis rotation return the data
// to its original layout.
void transform3(const Dft& dft, bool forward, std::vector<double>& re, std::vector<double>& im) {
  const std::size_t n = dft.n();
  const std::size_t lines = n * n;
  std::vector<double> tr(re.size()), ti(im.size());
  for (int pass = 0; pass < 3; ++pass) {
    if (forward)
      dft.forward_lines(re.data(), im.data(), lines, tr.data(), ti.data());
    else
      dft.inverse_lines(re.data(), im.data(), lines, tr.data(), ti.data());
    re.swap(tr);
    im.swap(ti);
  }
}

}  // namespace

SpectralField forward_transform(const GridField& grid) {
  grid.geometry.validate();
  if (grid.values.size() != grid.geometry.size())
    fail(ErrorKind::Data, "grid sample count does not match N^3");
  for (double v : grid.values)
    if (!std::isfinite(v)) fail(ErrorKind::Data, "non-finite grid sample");
  SpectralField out(grid.geometry);
  out.re() = grid.values;
  std::fill(out.im().begin(), out.im().end(), 0.0);
  transform3(Dft(grid.geometry.N), true, out.re(), out.im());
  return out;
}

GridField inverse_transform(const SpectralField& field) {
  std::vector<double> re = field.re(), im = field.im();
  transform3(Dft(field.geometry().N), false, re, im);
  return GridField{field.geometry(), std::move(re)};
}

SpectralField laplacian(const SpectralField& field) {
  const auto& g = field.geometry();
  std::vector<double> eig(field.size());
  for (std::size_t i = 0; i < eig.size(); ++i) eig[i] = -g.k2(i);
  SpectralField out(g);
  const auto& k = kernels::active();
  k.scale_by(eig.size(), eig.data(), field.re().data(), out.re().data());
  k.scale_by(eig.size(), eig.data(), field.im().data(), out.im().data());
  return out;
}

std::pair<double, SpectralField> zero_mean_split(const SpectralField& field) {
  SpectralField residual = field;
  const std::size_t c = field.geometry().center();
  const double mean = field.re()[c];
  residual.re()[c] = 0.0;
  residual.im()[c] = 0.0;
  return {mean, std::move(residual)};
}

Shells make_shells(const TorusGeometry& g) {
  Shells s;
  std::map<int, std::uint32_t> ids;
  for (std::size_t i = 0; i < g.size(); ++i) ids.emplace(g.n2(i), 0);
  std::uint32_t next = 0;
  for (auto& [n2, id] : ids) {
    id = next++;
    s.n2.push_back(n2);
  }
  s.of.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) s.of[i] = ids.at(g.n2(i));
  return s;
}

SpectralField random_field(const TorusGeometry& g, std::mt19937_64& rng, int kmax_inf,
                           double amplitude, bool zero_mean) {
  SpectralField f(g);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int kmax = std::min(kmax_inf, g.half());
  for (std::size_t i = g.center(); i < g.size(); ++i) {
    const auto k = g.wavenumber(i);
    if (std::max({std::abs(k[0]), std::abs(k[1]), std::abs(k[2])}) > kmax) continue;
    if (i == g.center()) {
      const double m = normal(rng);
      if (!zero_mean) f.set_mode(i, amplitude * m);
      continue;
    }
    const double a = normal(rng);
    const double b = normal(rng);
    f.set_mode(i, {amplitude * a, amplitude * b});
  }
  return f;
}

}  // namespace pertasym
