#pragma once

#include <optional>
#include <sstream>
#include <variant>

#include "fracgo/fft.hpp"

namespace fracgo {

// --- symbol descriptors -------------------------------------------------------

struct FracLaplacianSym {
  double s;  // (0, 1]; the multiplier |k|^{2s}, exactly 0 at k = 0
};

struct BracketPowerSym {
  double alpha;
  double h;  // (1 + h^2 |k|^2)^{alpha/2}
};

struct HelmholtzConstSym {
  double tau;
  double s;  // |k|^{2s} - tau^{2s}
};

// Polynomial in (|k|^2, dir·k): sum of coef * |k|^{2 p} (dir·k)^q.
struct SymbolPolynomial {
  Eigen::Vector2d dir{1.0, 0.0};
  struct Term {
    std::complex<double> coef;
    int abs2_pow = 0;
    int dir_pow = 0;
  };
  std::vector<Term> terms;
};

using MultiplierSpec = std::variant<FracLaplacianSym, BracketPowerSym, HelmholtzConstSym, SymbolPolynomial>;

inline void validate(const MultiplierSpec& m) {
  if (auto* f = std::get_if<FracLaplacianSym>(&m)) {
    if (!(f->s > 0.0) || f->s > 1.0) throw DomainError("fractional order s must lie in (0,1]");
  } else if (auto* b = std::get_if<BracketPowerSym>(&m)) {
    if (!(b->h > 0.0)) throw DomainError("semiclassical h must be positive");
    if (!std::isfinite(b->alpha)) throw DomainError("bracket power must be finite");
  } else if (auto* hc = std::get_if<HelmholtzConstSym>(&m)) {
    if (!(hc->s > 0.0) || hc->s > 1.0) throw DomainError("fractional order s must lie in (0,1]");
    if (!(hc->tau > 0.0)) throw DomainError("tau must be positive");
  } else if (auto* p = std::get_if<SymbolPolynomial>(&m)) {
    for (const auto& t : p->terms)
      if (!std::isfinite(t.coef.real()) || !std::isfinite(t.coef.imag()))
        throw DomainError("polynomial symbol coefficients must be finite");
  }
}

inline std::complex<double> eval_symbol(const MultiplierSpec& m, const Eigen::Vector2d& k) {
  const double k2 = k.squaredNorm();
  if (auto* f = std::get_if<FracLaplacianSym>(&m)) {
    return k2 == 0.0 ? 0.0 : std::pow(k2, f->s);
  }
  if (auto* b = std::get_if<BracketPowerSym>(&m)) {
    return std::pow(1.0 + b->h * b->h * k2, 0.5 * b->alpha);
  }
  if (auto* hc = std::get_if<HelmholtzConstSym>(&m)) {
    return (k2 == 0.0 ? 0.0 : std::pow(k2, hc->s)) - std::pow(hc->tau, 2.0 * hc->s);
  }
  const auto& p = std::get<SymbolPolynomial>(m);
  const double a = p.dir.dot(k);
  std::complex<double> acc = 0.0;
  for (const auto& t : p.terms)
    acc += t.coef * std::pow(k2, t.abs2_pow) * std::pow(a, t.dir_pow);
  return acc;
}

// --- operations ---------------------------------------------------------------

inline Field<double> apply_multiplier(const Field<double>& u, const MultiplierSpec& m) {
  require_finite(u, "apply_multiplier input");
  validate(m);
  const auto& g = u.grid;
  Field<double> spec = fft_forward(u);
  for (Eigen::Index i0 = 0; i0 < g.sizes[0]; ++i0)
    for (Eigen::Index i1 = 0; i1 < g.sizes[1]; ++i1) {
      const auto k = g.wavevector(i0, i1);
      const auto sigma = eval_symbol(m, k);
      if (!std::isfinite(sigma.real()) || !std::isfinite(sigma.imag())) {
        std::ostringstream msg;
        msg << "symbol evaluates to NaN at retained frequency (" << k[0];
        if (g.dim == 2) msg << ", " << k[1];
        msg << ")";
        throw SymbolError(msg.str());
      }
      spec.values[g.flat(i0, i1)] *= sigma;
    }
  return fft_inverse(spec);
}

inline Field<double> frac_laplacian(const Field<double>& u, double s) {
  if (!(s > 0.0) || s > 1.0) throw DomainError("fractional order s must lie in (0,1]");
  return apply_multiplier(u, FracLaplacianSym{s});
}

// Spectral partial derivative along one axis.
inline Field<double> deriv(const Field<double>& u, int axis) {
  const auto& g = u.grid;
  Field<double> spec = fft_forward(u);
  const std::complex<double> I(0.0, 1.0);
  for (Eigen::Index i0 = 0; i0 < g.sizes[0]; ++i0)
    for (Eigen::Index i1 = 0; i1 < g.sizes[1]; ++i1) {
      const auto k = g.wavevector(i0, i1);
      spec.values[g.flat(i0, i1)] *= I * k[axis];
    }
  return fft_inverse(spec);
}

// ||<hD>^alpha u||_{L2}; with a mask, the bracket-power field is restricted
// before the quadrature (restriction-norm convention).
inline double sobolev_norm_scl(const Field<double>& u, double alpha, double h,
                               const Eigen::ArrayXd* mask = nullptr) {
  if (!(h > 0.0)) throw DomainError("semiclassical h must be positive");
  Field<double> v = apply_multiplier(u, BracketPowerSym{alpha, h});
  if (mask) return l2_norm_weighted(v, *mask);
  return l2_norm(v);
}

// Exact Fourier inverse of (-Delta)^s - tau^{2s} on the torus, guarded against
// near-resonant frequencies.
inline Field<double> solve_const_helmholtz(const Field<double>& f, double tau, double s,
                                           std::optional<double> guard = std::nullopt) {
  if (!(s > 0.0) || s > 1.0) throw DomainError("fractional order s must lie in (0,1]");
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  const double tau2s = std::pow(tau, 2.0 * s);
  const double eps = guard.value_or(1e-6 * tau2s);
  const auto& g = f.grid;

  std::vector<std::array<double, 2>> offenders;
  for (Eigen::Index i0 = 0; i0 < g.sizes[0]; ++i0)
    for (Eigen::Index i1 = 0; i1 < g.sizes[1]; ++i1) {
      const auto k = g.wavevector(i0, i1);
      const double k2 = k.squaredNorm();
      const double denom = (k2 == 0.0 ? 0.0 : std::pow(k2, s)) - tau2s;
      if (std::abs(denom) < eps) offenders.push_back({k[0], k[1]});
    }
  if (!offenders.empty()) {
    std::ostringstream msg;
    msg << "resonance guard tripped for tau = " << tau << " at " << offenders.size()
        << " frequencies, first k = (" << offenders[0][0] << ", " << offenders[0][1] << ")";
    throw ResonanceError(msg.str(), std::move(offenders));
  }

  Field<double> spec = fft_forward(f);
  for (Eigen::Index i0 = 0; i0 < g.sizes[0]; ++i0)
    for (Eigen::Index i1 = 0; i1 < g.sizes[1]; ++i1) {
      const auto k = g.wavevector(i0, i1);
      const double k2 = k.squaredNorm();
      spec.values[g.flat(i0, i1)] /= (k2 == 0.0 ? 0.0 : std::pow(k2, s)) - tau2s;
    }
  return fft_inverse(spec);
}

}  // namespace fracgo
