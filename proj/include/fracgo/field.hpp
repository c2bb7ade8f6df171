#pragma once

#include <complex>
#include <cstdint>
#include <fstream>
#include <functional>

#include "fracgo/grid.hpp"

namespace fracgo {

// Complex scalar samples over a Grid, row-major. Immutable by convention:
// operations return fresh fields.
template <typename Real>
struct Field {
  using Cplx = std::complex<Real>;
  using Values = Eigen::Array<Cplx, Eigen::Dynamic, 1>;

  Grid<Real> grid;
  Values values;

  Field() = default;
  explicit Field(const Grid<Real>& g) : grid(g), values(Values::Zero(g.points())) {}
  Field(const Grid<Real>& g, Values v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.points()) throw DomainError("field size mismatch with grid");
  }

  Cplx& at(Eigen::Index i0, Eigen::Index i1 = 0) { return values[grid.flat(i0, i1)]; }
  Cplx at(Eigen::Index i0, Eigen::Index i1 = 0) const { return values[grid.flat(i0, i1)]; }
};

using FieldD = Field<double>;

template <typename Real>
void require_finite(const Field<Real>& u, const char* what) {
  if (!u.values.isFinite().all()) throw DomainError(std::string(what) + ": non-finite samples");
}

template <typename Real>
Field<Real> sample(const Grid<Real>& g, const std::function<std::complex<Real>(const Vec2<Real>&)>& f) {
  Field<Real> out(g);
  for (Eigen::Index i0 = 0; i0 < g.sizes[0]; ++i0)
    for (Eigen::Index i1 = 0; i1 < g.sizes[1]; ++i1)
      out.values[g.flat(i0, i1)] = f(g.point(i0, i1));
  return out;
}

template <typename Real>
Field<Real> sample_real(const Grid<Real>& g, const std::function<Real(const Vec2<Real>&)>& f) {
  Field<Real> out(g);
  for (Eigen::Index i0 = 0; i0 < g.sizes[0]; ++i0)
    for (Eigen::Index i1 = 0; i1 < g.sizes[1]; ++i1)
      out.values[g.flat(i0, i1)] = f(g.point(i0, i1));
  return out;
}

// L2 norm with the grid quadrature weight h^n.
template <typename Real>
Real l2_norm(const Field<Real>& u) {
  return std::sqrt(u.values.abs2().sum() * u.grid.cell());
}

// L2 norm restricted by a 0/1 (or smooth) weight of the same shape.
template <typename Real>
Real l2_norm_weighted(const Field<Real>& u, const Eigen::Array<Real, Eigen::Dynamic, 1>& w) {
  if (w.size() != u.values.size()) throw DomainError("weight size mismatch");
  return std::sqrt((u.values.abs2() * w).sum() * u.grid.cell());
}

template <typename Real>
std::complex<Real> inner_product(const Field<Real>& u, const Field<Real>& v) {
  return (u.values * v.values.conjugate()).sum() * u.grid.cell();
}

// Bilinear interpolation with periodic wrap.
template <typename Real>
std::complex<Real> interp_bilinear(const Field<Real>& u, const Vec2<Real>& x) {
  const auto& g = u.grid;
  Real f0 = (x[0] - g.origin[0]) / g.spacing(0);
  Eigen::Index i0 = static_cast<Eigen::Index>(std::floor(f0));
  Real t0 = f0 - Real(i0);
  auto wrap = [](Eigen::Index i, Eigen::Index n) { return ((i % n) + n) % n; };
  if (g.dim == 1) {
    auto a = u.values[wrap(i0, g.sizes[0])], b = u.values[wrap(i0 + 1, g.sizes[0])];
    return a * (Real(1) - t0) + b * t0;
  }
  Real f1 = (x[1] - g.origin[1]) / g.spacing(1);
  Eigen::Index i1 = static_cast<Eigen::Index>(std::floor(f1));
  Real t1 = f1 - Real(i1);
  Eigen::Index j0 = wrap(i0, g.sizes[0]), j0p = wrap(i0 + 1, g.sizes[0]);
  Eigen::Index j1 = wrap(i1, g.sizes[1]), j1p = wrap(i1 + 1, g.sizes[1]);
  return u.values[g.flat(j0, j1)] * (1 - t0) * (1 - t1) +
         u.values[g.flat(j0p, j1)] * t0 * (1 - t1) +
         u.values[g.flat(j0, j1p)] * (1 - t0) * t1 +
         u.values[g.flat(j0p, j1p)] * t0 * t1;
}

// Cubic convolution interpolation (Keys kernel, a = -1/2), periodic wrap.
template <typename Real>
std::complex<Real> interp_bicubic(const Field<Real>& u, const Vec2<Real>& x) {
  const auto& g = u.grid;
  auto wrap = [](Eigen::Index i, Eigen::Index n) { return ((i % n) + n) % n; };
  auto kern = [](Real t) {
    t = std::abs(t);
    if (t < Real(1)) return ((Real(1.5) * t - Real(2.5)) * t) * t + Real(1);
    if (t < Real(2)) return ((Real(-0.5) * t + Real(2.5)) * t - Real(4)) * t + Real(2);
    return Real(0);
  };
  Real f0 = (x[0] - g.origin[0]) / g.spacing(0);
  Eigen::Index i0 = static_cast<Eigen::Index>(std::floor(f0));
  Real t0 = f0 - Real(i0);
  if (g.dim == 1) {
    std::complex<Real> acc = 0;
    for (int a = -1; a <= 2; ++a)
      acc += kern(Real(a) - t0) * u.values[wrap(i0 + a, g.sizes[0])];
    return acc;
  }
  Real f1 = (x[1] - g.origin[1]) / g.spacing(1);
  Eigen::Index i1 = static_cast<Eigen::Index>(std::floor(f1));
  Real t1 = f1 - Real(i1);
  std::complex<Real> acc = 0;
  for (int a = -1; a <= 2; ++a) {
    const Real wa = kern(Real(a) - t0);
    if (wa == Real(0)) continue;
    const Eigen::Index ja = wrap(i0 + a, g.sizes[0]);
    for (int b = -1; b <= 2; ++b) {
      const Real wb = kern(Real(b) - t1);
      if (wb == Real(0)) continue;
      acc += wa * wb * u.values[g.flat(ja, wrap(i1 + b, g.sizes[1]))];
    }
  }
  return acc;
}

// --- serialization -----------------------------------------------------------
// Binary container: magic, version, dim, sizes, periods, origin, dtype flag
// (1 = complex128, 0 = complex64), then raw row-major samples.

inline constexpr uint32_t kFieldMagic = 0x46524746u;  // "FRGF"

template <typename Real>
void write_binary(const Field<Real>& u, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  uint32_t magic = kFieldMagic, version = 1, dim = uint32_t(u.grid.dim);
  uint32_t dtype = sizeof(Real) == 8 ? 1 : 0;
  os.write(reinterpret_cast<const char*>(&magic), 4);
  os.write(reinterpret_cast<const char*>(&version), 4);
  os.write(reinterpret_cast<const char*>(&dim), 4);
  os.write(reinterpret_cast<const char*>(&dtype), 4);
  for (int a = 0; a < 2; ++a) {
    int64_t n = u.grid.sizes[a];
    os.write(reinterpret_cast<const char*>(&n), 8);
  }
  for (int a = 0; a < 2; ++a) {
    double L = double(u.grid.periods[a]), o = double(u.grid.origin[a]);
    os.write(reinterpret_cast<const char*>(&L), 8);
    os.write(reinterpret_cast<const char*>(&o), 8);
  }
  os.write(reinterpret_cast<const char*>(u.values.data()),
           std::streamsize(sizeof(std::complex<Real>)) * u.values.size());
}

template <typename Real>
Field<Real> read_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  uint32_t magic = 0, version = 0, dim = 0, dtype = 0;
  is.read(reinterpret_cast<char*>(&magic), 4);
  is.read(reinterpret_cast<char*>(&version), 4);
  is.read(reinterpret_cast<char*>(&dim), 4);
  is.read(reinterpret_cast<char*>(&dtype), 4);
  if (magic != kFieldMagic || version != 1) throw std::runtime_error("bad field container: " + path);
  if (dtype != (sizeof(Real) == 8 ? 1u : 0u)) throw std::runtime_error("dtype mismatch: " + path);
  std::array<Eigen::Index, 2> sizes;
  for (int a = 0; a < 2; ++a) {
    int64_t n;
    is.read(reinterpret_cast<char*>(&n), 8);
    sizes[a] = n;
  }
  std::array<Real, 2> periods, origin;
  for (int a = 0; a < 2; ++a) {
    double L, o;
    is.read(reinterpret_cast<char*>(&L), 8);
    is.read(reinterpret_cast<char*>(&o), 8);
    periods[a] = Real(L);
    origin[a] = Real(o);
  }
  Grid<Real> g(int(dim), sizes, periods);
  g.origin = origin;
  Field<Real> u(g);
  is.read(reinterpret_cast<char*>(u.values.data()),
          std::streamsize(sizeof(std::complex<Real>)) * u.values.size());
  if (!is) throw std::runtime_error("truncated field container: " + path);
  return u;
}

template <typename Real>
void write_csv(const Field<Real>& u, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.precision(17);
  os << (u.grid.dim == 2 ? "x0,x1,re,im\n" : "x0,re,im\n");
  for (Eigen::Index i0 = 0; i0 < u.grid.sizes[0]; ++i0)
    for (Eigen::Index i1 = 0; i1 < u.grid.sizes[1]; ++i1) {
      auto x = u.grid.point(i0, i1);
      auto v = u.values[u.grid.flat(i0, i1)];
      if (u.grid.dim == 2) os << x[0] << ',' << x[1] << ',' << v.real() << ',' << v.imag() << '\n';
      else os << x[0] << ',' << v.real() << ',' << v.imag() << '\n';
    }
}

}  // namespace fracgo
