#pragma once

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <numbers>

#include "fracgo/errors.hpp"

namespace fracgo {

template <typename Real>
using Vec2 = Eigen::Matrix<Real, 2, 1>;

inline bool is_pow2(long n) { return n >= 1 && (n & (n - 1)) == 0; }

// Periodic rectangular grid on [origin, origin + period) per axis, row-major
// (axis 0 slowest). dim == 1 stores sizes[1] = 1.
template <typename Real>
struct Grid {
  int dim = 1;
  std::array<Eigen::Index, 2> sizes{8, 1};
  std::array<Real, 2> periods{Real(1), Real(1)};
  std::array<Real, 2> origin{Real(0), Real(0)};

  Grid() = default;
  Grid(int dim_, std::array<Eigen::Index, 2> sizes_, std::array<Real, 2> periods_)
      : dim(dim_), sizes(sizes_), periods(periods_) {
    if (dim == 1) {
      sizes[1] = 1;
      periods[1] = Real(1);
    }
    for (int a = 0; a < dim; ++a) {
      if (!is_pow2(sizes[a]) || sizes[a] < 8)
        throw DomainError("grid sizes must be powers of two >= 8");
      if (!(periods[a] > Real(0))) throw DomainError("grid periods must be positive");
      origin[a] = -periods[a] / Real(2);
    }
    if (dim < 1 || dim > 2) throw DomainError("grid dimension must be 1 or 2");
  }

  static Grid centered_square(int dim_, Eigen::Index n, Real period) {
    return Grid(dim_, {n, dim_ == 2 ? n : 1}, {period, period});
  }

  Eigen::Index points() const { return sizes[0] * sizes[1]; }
  Real spacing(int axis) const { return periods[axis] / Real(sizes[axis]); }
  Real cell() const {
    Real c = spacing(0);
    if (dim == 2) c *= spacing(1);
    return c;
  }
  Real coord(int axis, Eigen::Index i) const { return origin[axis] + Real(i) * spacing(axis); }

  // Frequency 2*pi*m/L with m in [-N/2, N/2), FFT index order.
  Real freq(int axis, Eigen::Index i) const {
    const Eigen::Index n = sizes[axis];
    const Eigen::Index m = (i < n / 2) ? i : i - n;
    return Real(2) * std::numbers::pi_v<Real> * Real(m) / periods[axis];
  }

  Eigen::Index flat(Eigen::Index i0, Eigen::Index i1 = 0) const { return i0 * sizes[1] + i1; }

  Vec2<Real> point(Eigen::Index i0, Eigen::Index i1 = 0) const {
    return Vec2<Real>(coord(0, i0), dim == 2 ? coord(1, i1) : Real(0));
  }

  Vec2<Real> wavevector(Eigen::Index i0, Eigen::Index i1 = 0) const {
    return Vec2<Real>(freq(0, i0), dim == 2 ? freq(1, i1) : Real(0));
  }

  // Index of the cell whose node is nearest to x (clamped into the box).
  std::array<Eigen::Index, 2> nearest(const Vec2<Real>& x) const {
    std::array<Eigen::Index, 2> idx{0, 0};
    for (int a = 0; a < dim; ++a) {
      auto i = static_cast<Eigen::Index>(std::llround((x[a] - origin[a]) / spacing(a)));
      idx[a] = std::min(std::max(i, Eigen::Index(0)), sizes[a] - 1);
    }
    return idx;
  }

  bool same_as(const Grid& o) const {
    return dim == o.dim && sizes == o.sizes && periods == o.periods && origin == o.origin;
  }
};

using GridD = Grid<double>;

}  // namespace fracgo
