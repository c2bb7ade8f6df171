#pragma once

#include <Eigen/Dense>

#include <variant>

#include "fracgo/multiplier.hpp"

namespace fracgo {

using Mat2 = Eigen::Matrix2d;
using Vec2d = Eigen::Vector2d;

// --- domain descriptor ----------------------------------------------------

struct Omega {
  enum class Kind { Disk, Rect };
  Kind kind = Kind::Disk;
  Vec2d center{0.0, 0.0};
  double radius = 1.0;
  Vec2d lo{-1.0, -1.0}, hi{1.0, 1.0};

  static Omega disk(const Vec2d& c, double R) {
    Omega o;
    o.kind = Kind::Disk;
    o.center = c;
    o.radius = R;
    return o;
  }
  static Omega rect(const Vec2d& lo, const Vec2d& hi) {
    Omega o;
    o.kind = Kind::Rect;
    o.lo = lo;
    o.hi = hi;
    return o;
  }

  // Negative inside, zero on the boundary. 1-D grids use axis 0 only.
  double signed_dist(const Vec2d& x, int dim = 2) const {
    if (kind == Kind::Disk) {
      if (dim == 1) return std::abs(x[0] - center[0]) - radius;
      return (x - center).norm() - radius;
    }
    double d = std::max(lo[0] - x[0], x[0] - hi[0]);
    if (dim == 2) d = std::max(d, std::max(lo[1] - x[1], x[1] - hi[1]));
    return d;
  }

  bool contains(const Vec2d& x, int dim = 2) const { return signed_dist(x, dim) < 0.0; }

  Omega dilated(double margin) const {
    Omega o = *this;
    if (kind == Kind::Disk) o.radius += margin;
    else {
      o.lo.array() -= margin;
      o.hi.array() += margin;
    }
    return o;
  }

  Eigen::ArrayXd mask(const GridD& g) const {
    Eigen::ArrayXd m = Eigen::ArrayXd::Zero(g.points());
    for (Eigen::Index i0 = 0; i0 < g.sizes[0]; ++i0)
      for (Eigen::Index i1 = 0; i1 < g.sizes[1]; ++i1)
        if (contains(g.point(i0, i1), g.dim)) m[g.flat(i0, i1)] = 1.0;
    return m;
  }
};

// --- refraction-index descriptors ------------------------------------------

struct ConstantIndex {
  double r0 = 1.0;
};

// r = exp(x_0); analytic phase e^{x_0} solves the eikonal along axis 0.
struct ExpSlabIndex {};

// r = 1 + beta * exp(-|x|^2/sigma^2) * rolloff(|x|), with a C^2 quintic
// rolloff that reaches exactly 1 outside radius t1 (so r == 1 outside Omega).
struct RadialBumpIndex {
  double beta = 0.1;
  double sigma = 0.45;
  double t0 = 0.6;
  double t1 = 0.95;
};

struct SampledIndex {
  Field<double> r;
};

using IndexKind = std::variant<ConstantIndex, ExpSlabIndex, RadialBumpIndex, SampledIndex>;

// --- potential descriptors --------------------------------------------------

struct PotentialZero {};
struct PotentialConst {
  double q0 = 0.0;
};
struct PotentialGaussian {
  double amp = 1.0;
  Vec2d center{0.0, 0.0};
  double sigma = 0.4;
};
struct PotentialSampled {
  Field<double> q;
};

using PotentialKind = std::variant<PotentialZero, PotentialConst, PotentialGaussian, PotentialSampled>;

namespace detail {

// Quintic smoothstep-down: 1 at w<=0, 0 at w>=1, C^2 at both ends.
inline void rolloff(double w, double& psi, double& dpsi, double& ddpsi) {
  if (w <= 0.0) {
    psi = 1.0;
    dpsi = ddpsi = 0.0;
  } else if (w >= 1.0) {
    psi = dpsi = ddpsi = 0.0;
  } else {
    psi = 1.0 - ((6.0 * w - 15.0) * w + 10.0) * w * w * w;
    dpsi = -30.0 * w * w * (1.0 - w) * (1.0 - w);
    ddpsi = -60.0 * w * (1.0 - w) * (1.0 - 2.0 * w);
  }
}

// Radial profile G(t) with first two derivatives.
inline void radial_profile(const RadialBumpIndex& rb, double t, double& G, double& dG, double& ddG) {
  const double e = std::exp(-t * t / (rb.sigma * rb.sigma));
  const double de = -2.0 * t / (rb.sigma * rb.sigma) * e;
  const double dde = (4.0 * t * t / std::pow(rb.sigma, 4) - 2.0 / (rb.sigma * rb.sigma)) * e;
  const double wp = 1.0 / (rb.t1 - rb.t0);
  double psi, dpsi, ddpsi;
  rolloff((t - rb.t0) * wp, psi, dpsi, ddpsi);
  G = e * psi;
  dG = de * psi + e * dpsi * wp;
  ddG = dde * psi + 2.0 * de * dpsi * wp + e * ddpsi * wp * wp;
}

}  // namespace detail

// --- medium -------------------------------------------------------------------

struct Medium {
  IndexKind index;
  PotentialKind potential;
  double s = 0.75;
  Omega omega = Omega::disk({0.0, 0.0}, 1.0);
  double q_exterior = 0.0;
  int dim = 2;

  Medium() = default;
  Medium(IndexKind idx, PotentialKind pot, double s_, Omega om, int dim_ = 2)
      : index(std::move(idx)), potential(std::move(pot)), s(s_), omega(om), dim(dim_) {
    if (!(s > 0.0) || s >= 1.0) throw DomainError("medium order s must lie in (0,1)");
    if (c0() <= 0.0) throw DomainError("refraction index must be bounded below by a positive c0");
  }

  bool index_analytic() const { return !std::holds_alternative<SampledIndex>(index); }

  double r(const Vec2d& x) const {
    if (auto* c = std::get_if<ConstantIndex>(&index)) return c->r0;
    if (std::holds_alternative<ExpSlabIndex>(index)) return std::exp(x[0]);
    if (auto* rb = std::get_if<RadialBumpIndex>(&index)) {
      double G, dG, ddG;
      detail::radial_profile(*rb, xnorm(x), G, dG, ddG);
      return 1.0 + rb->beta * G;
    }
    const auto& f = std::get<SampledIndex>(index).r;
    return interp_bilinear(f, Vec2<double>(x)).real();
  }

  Vec2d grad_r(const Vec2d& x) const {
    if (std::holds_alternative<ConstantIndex>(index)) return Vec2d::Zero();
    if (std::holds_alternative<ExpSlabIndex>(index)) return {std::exp(x[0]), 0.0};
    if (auto* rb = std::get_if<RadialBumpIndex>(&index)) {
      const double t = xnorm(x);
      double G, dG, ddG;
      detail::radial_profile(*rb, t, G, dG, ddG);
      if (t < 1e-12) return Vec2d::Zero();
      Vec2d hat = unit(x);
      return rb->beta * dG * hat;
    }
    throw DomainError("sampled media have no analytic gradient");
  }

  Mat2 hess_r(const Vec2d& x) const {
    if (std::holds_alternative<ConstantIndex>(index)) return Mat2::Zero();
    if (std::holds_alternative<ExpSlabIndex>(index)) {
      Mat2 h = Mat2::Zero();
      h(0, 0) = std::exp(x[0]);
      return h;
    }
    if (auto* rb = std::get_if<RadialBumpIndex>(&index)) {
      const double t = xnorm(x);
      double G, dG, ddG;
      detail::radial_profile(*rb, t, G, dG, ddG);
      if (t < 1e-12) return rb->beta * ddG * Mat2::Identity();
      Vec2d hat = unit(x);
      Mat2 pp = hat * hat.transpose();
      Mat2 h = rb->beta * (ddG * pp + dG / t * (Mat2::Identity() - pp));
      if (dim == 1) {
        h(0, 1) = h(1, 0) = h(1, 1) = 0.0;
      }
      return h;
    }
    throw DomainError("sampled media have no analytic hessian");
  }

  double q(const Vec2d& x) const {
    if (std::holds_alternative<PotentialZero>(potential)) return 0.0;
    if (auto* c = std::get_if<PotentialConst>(&potential)) return c->q0;
    if (auto* gsn = std::get_if<PotentialGaussian>(&potential)) {
      const Vec2d d = dim == 2 ? Vec2d(x - gsn->center) : Vec2d(x[0] - gsn->center[0], 0.0);
      return gsn->amp * std::exp(-d.squaredNorm() / (gsn->sigma * gsn->sigma));
    }
    return interp_bilinear(std::get<PotentialSampled>(potential).q, Vec2<double>(x)).real();
  }

  double c0() const {
    if (auto* c = std::get_if<ConstantIndex>(&index)) return c->r0;
    if (std::holds_alternative<ExpSlabIndex>(index)) return 1e-3;  // on bounded windows only
    if (auto* rb = std::get_if<RadialBumpIndex>(&index)) return std::min(1.0, 1.0 + rb->beta);
    return std::get<SampledIndex>(index).r.values.real().minCoeff();
  }

  Field<double> r_field(const GridD& g) const {
    return sample_real<double>(g, [this](const Vec2<double>& x) { return r(x); });
  }
  Field<double> q_field(const GridD& g) const {
    return sample_real<double>(g, [this](const Vec2<double>& x) { return q(x); });
  }

 private:
  double xnorm(const Vec2d& x) const { return dim == 2 ? x.norm() : std::abs(x[0]); }
  Vec2d unit(const Vec2d& x) const {
    if (dim == 1) return {x[0] >= 0 ? 1.0 : -1.0, 0.0};
    return x / x.norm();
  }
};

// Fractional reduction of a conductivity to (r, q): r = gamma^{-1/(2s)},
// q = -gamma^{-1/2} (-Delta)^s gamma^{1/2}.
inline Medium medium_from_conductivity(const Field<double>& gamma, double s, const Omega& omega) {
  require_finite(gamma, "conductivity");
  if (gamma.values.real().minCoeff() <= 0.0 || gamma.values.imag().abs().maxCoeff() > 0.0)
    throw DomainError("conductivity must be real and strictly positive");
  Field<double> sqrt_g(gamma.grid);
  sqrt_g.values = gamma.values.sqrt();
  Field<double> frac = frac_laplacian(sqrt_g, s);
  Field<double> r(gamma.grid), q(gamma.grid);
  r.values = gamma.values.pow(-1.0 / (2.0 * s));
  q.values = -frac.values / sqrt_g.values;
  Medium m(SampledIndex{std::move(r)}, PotentialSampled{std::move(q)}, s, omega, gamma.grid.dim);
  return m;
}

}  // namespace fracgo
