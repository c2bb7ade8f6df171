#pragma once

#include <fstream>

#include "fracgo/multiplier.hpp"

namespace fracgo {

// Extended binomial binom(s, j) by the product recurrence (no Gamma-function
// cancellation).
inline double binom_real(double s, int j) {
  double b = 1.0;
  for (int i = 1; i <= j; ++i) b *= (s - i + 1) / double(i);
  return b;
}

inline double binom_int(int n, int k) {
  double b = 1.0;
  for (int i = 1; i <= k; ++i) b = b * double(n - k + i) / double(i);
  return b;
}

// Coefficients c'_{s,j,k} = binom(s,j) binom(j,k) 2^{j-k} of the expansion of
// |xi + tau alpha|^{2s} in powers tau^{2s-j-k} |xi|^{2k} (alpha.xi)^{j-k}.
struct ConstCoefSymbolTable {
  double s = 0.5;
  Eigen::Vector2d alpha{1.0, 0.0};
  int nu_max = 12;
  std::vector<std::vector<double>> cprime;  // cprime[j][k], 1 <= j <= nu_max

  static ConstCoefSymbolTable build(double s, const Eigen::Vector2d& alpha, int nu_max = 12) {
    if (!(s > 0.0) || s > 1.0) throw DomainError("symbol table order s must lie in (0,1]");
    if (std::abs(alpha.norm() - 1.0) > 1e-12) throw DomainError("alpha must be a unit vector");
    ConstCoefSymbolTable t;
    t.s = s;
    t.alpha = alpha;
    t.nu_max = nu_max;
    t.cprime.assign(size_t(nu_max) + 1, {});
    for (int j = 1; j <= nu_max; ++j) {
      t.cprime[size_t(j)].resize(size_t(j) + 1);
      for (int k = 0; k <= j; ++k)
        t.cprime[size_t(j)][size_t(k)] = binom_real(s, j) * binom_int(j, k) * std::pow(2.0, j - k);
    }
    return t;
  }

  double c(int j, int k) const { return cprime[size_t(j)][size_t(k)]; }

  void dump_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.precision(17);
    os << "nu,l,j,k,cprime\n";
    for (int nu = 1; nu <= nu_max; ++nu)
      for (int l = 0; l <= nu - 1; ++l)
        for (int j = 1; j <= nu - l; ++j) {
          const int k = nu - l - j;
          if (k < 0 || k > j) continue;
          os << nu << ',' << l << ',' << j << ',' << k << ',' << c(j, k) << '\n';
        }
  }
};

// psi_{nu,l}(xi) = sum over j >= 1, 0 <= k <= j with j + k = nu - l of
// c'_{s,j,k} |xi|^{2k} (alpha.xi)^{j-k}.
inline SymbolPolynomial const_coef_symbol(const ConstCoefSymbolTable& t, int nu, int l) {
  if (nu < 1 || nu > t.nu_max || l < 0 || l > nu - 1)
    throw DomainError("symbol indices must satisfy 1 <= nu <= nu_max, 0 <= l <= nu-1");
  SymbolPolynomial p;
  p.dir = t.alpha;
  const int m = nu - l;
  for (int j = 1; j <= m; ++j) {
    const int k = m - j;
    if (k > j) continue;
    p.terms.push_back({t.c(j, k), k, j - k});
  }
  return p;
}

inline int symbol_term_count(int nu, int l) {
  // pairs (j,k): j >= 1, 0 <= k <= j, j + k = nu - l
  const int m = nu - l;
  return m / 2 + 1 - (m == 0 ? 1 : 0);
}

// Exact antiderivative along a grid axis, vanishing at the plane i_up: the
// per-line means integrate to a linear ramp handled in closed form, the rest
// spectrally. `periodic` and `linebar` expose the split (the derivative of the
// total is deriv(periodic) + linebar, with no seam artifacts).
struct AxisAntiderivative {
  Field<double> total;
  Field<double> periodic;
  Field<double> linebar;
};

inline AxisAntiderivative axis_antiderivative(const Field<double>& src, int axis,
                                              Eigen::Index i_up) {
  const auto& g = src.grid;
  Field<double> spec = fft_forward(src);
  Field<double> periodic(g);
  Field<double> linebar(g);  // per-line mean replicated along the axis
  {
    Field<double> pspec(g), mspec(g);
    const std::complex<double> I(0.0, 1.0);
    for (Eigen::Index i0 = 0; i0 < g.sizes[0]; ++i0)
      for (Eigen::Index i1 = 0; i1 < g.sizes[1]; ++i1) {
        const auto k = g.wavevector(i0, i1);
        const Eigen::Index f = g.flat(i0, i1);
        if (std::abs(k[axis]) < 1e-14) {
          mspec.values[f] = spec.values[f];
        } else {
          pspec.values[f] = spec.values[f] / (I * k[axis]);
        }
      }
    periodic = fft_inverse(pspec);
    linebar = fft_inverse(mspec);
  }
  Field<double> out(g);
  const double x_up = g.coord(axis, i_up);
  for (Eigen::Index i0 = 0; i0 < g.sizes[0]; ++i0)
    for (Eigen::Index i1 = 0; i1 < g.sizes[1]; ++i1) {
      const Eigen::Index f = g.flat(i0, i1);
      const Eigen::Index f_up = axis == 0 ? g.flat(i_up, i1) : g.flat(i0, i_up);
      const double x = g.coord(axis, axis == 0 ? i0 : i1);
      out.values[f] = periodic.values[f] - periodic.values[f_up] + linebar.values[f] * (x - x_up);
    }
  return {std::move(out), std::move(periodic), std::move(linebar)};
}

// Applies a polynomial symbol with a round-off guard: the symbol is zeroed on
// shells where the input spectrum has dropped to its floating-point floor.
// Degree-3 and -4 symbols otherwise amplify that floor by k_Nyquist^4, which
// grows with resolution and would swamp deep recursion stages.
inline Field<double> apply_symbol_guarded(const Field<double>& u, const SymbolPolynomial& p) {
  const auto& g = u.grid;
  Field<double> spec = fft_forward(u);
  const double dk = 2.0 * std::numbers::pi / std::min(g.periods[0], g.dim == 2 ? g.periods[1] : g.periods[0]);
  const int n_shell = 1 + int(std::ceil(std::sqrt(2.0) * std::numbers::pi *
                                        std::max(g.sizes[0] / g.periods[0],
                                                 double(g.sizes[1]) / g.periods[1])) / dk);
  std::vector<double> shell_max(size_t(n_shell), 0.0);
  for (Eigen::Index i0 = 0; i0 < g.sizes[0]; ++i0)
    for (Eigen::Index i1 = 0; i1 < g.sizes[1]; ++i1) {
      const double k = g.wavevector(i0, i1).norm();
      const size_t sh = std::min(size_t(n_shell - 1), size_t(k / dk));
      shell_max[sh] = std::max(shell_max[sh], std::abs(spec.values[g.flat(i0, i1)]));
    }
  const double peak = *std::max_element(shell_max.begin(), shell_max.end());
  // knee: first shell past which the envelope stays at the round-off floor
  int knee = n_shell - 1;
  for (int sh = 0; sh + 2 < n_shell; ++sh) {
    if (shell_max[size_t(sh)] < 1e-13 * peak && shell_max[size_t(sh) + 1] < 1e-13 * peak &&
        shell_max[size_t(sh) + 2] < 1e-13 * peak) {
      knee = sh;
      break;
    }
  }
  const double k_cut = (knee + 1) * dk;
  for (Eigen::Index i0 = 0; i0 < g.sizes[0]; ++i0)
    for (Eigen::Index i1 = 0; i1 < g.sizes[1]; ++i1) {
      const auto k = g.wavevector(i0, i1);
      const Eigen::Index f = g.flat(i0, i1);
      spec.values[f] = k.norm() <= k_cut ? spec.values[f] * eval_symbol(p, k) : 0.0;
    }
  return fft_inverse(spec);
}

struct AmplitudeRecursion {
  std::vector<Field<double>> amps;
  // worst |alpha.grad a_{l+1} - source| / max|source| over stages, evaluated on
  // the unclipped primitive (audits the antiderivative bookkeeping)
  double max_defect = 0.0;
};

// Recursive amplitudes of the constant-coefficient expansion:
// alpha.grad a_{nu+1} = -(i/2s) sum_{l<=nu} Psi_{nu+2,l} a_l, integrated from
// an upstream hyperplane; every stage is clipped by the cutoff before use.
inline AmplitudeRecursion const_coef_amplitudes(const ConstCoefSymbolTable& t,
                                                const Field<double>& a0, int M,
                                                const Field<double>& cutoff) {
  const auto& g = a0.grid;
  int axis = -1;
  double sign = 1.0;
  for (int a = 0; a < 2; ++a) {
    if (std::abs(std::abs(t.alpha[a]) - 1.0) < 1e-14) {
      axis = a;
      sign = t.alpha[a];
    }
  }
  if (axis < 0 || axis >= g.dim)
    throw DomainError("const-coefficient amplitudes require an axis-aligned direction");
  if (M + 2 > t.nu_max) throw DomainError("symbol table truncation nu_max too small for M");

  // transport precondition: a0 constant along alpha
  {
    Field<double> d = deriv(a0, axis);
    const double scale = std::max(1e-300, a0.values.abs().maxCoeff());
    if (d.values.abs().maxCoeff() > 1e-10 * scale)
      throw DomainError("principal amplitude must satisfy alpha.grad a0 = 0");
  }

  const Eigen::Index i_up = sign > 0 ? 1 : g.sizes[axis] - 2;
  // the upstream hyperplane must lie outside the cutoff support
  {
    const Eigen::Index n_cross = g.dim == 2 ? g.sizes[1 - axis] : 1;
    for (Eigen::Index j = 0; j < n_cross; ++j) {
      const Eigen::Index f = g.dim == 1 ? i_up : (axis == 0 ? g.flat(i_up, j) : g.flat(j, i_up));
      if (std::abs(cutoff.values[f]) > 1e-12)
        throw SupportError("cutoff support reaches the upstream hyperplane");
    }
  }
  AmplitudeRecursion out;
  out.amps.reserve(size_t(M) + 1);
  Field<double> A0(g);
  A0.values = a0.values * cutoff.values;
  out.amps.push_back(std::move(A0));

  const std::complex<double> I(0.0, 1.0);
  for (int nu = 0; nu < M; ++nu) {
    Field<double> source(g);
    for (int l = 0; l <= nu; ++l) {
      auto psi = const_coef_symbol(t, nu + 2, l);
      source.values += apply_symbol_guarded(out.amps[size_t(l)], psi).values;
    }
    source.values *= -I / (2.0 * t.s);
    // upstream hyperplane must be quiet
    double up_mag = 0.0;
    const double scale = std::max(1e-300, source.values.abs().maxCoeff());
    const Eigen::Index n_cross = g.dim == 2 ? g.sizes[1 - axis] : 1;
    for (Eigen::Index j = 0; j < n_cross; ++j) {
      const Eigen::Index f = g.dim == 1 ? i_up : (axis == 0 ? g.flat(i_up, j) : g.flat(j, i_up));
      up_mag = std::max(up_mag, std::abs(source.values[f]));
    }
    // gross-violation guard; the threshold leaves room for the spectral
    // ringing of clipped fields, which grows with recursion depth
    if (up_mag > 1e-2 * scale)
      throw SupportError("transport source has not decayed at the upstream hyperplane");

    // alpha.grad a = sign * d_axis a = source
    AxisAntiderivative anti = axis_antiderivative(source, axis, i_up);
    {
      Field<double> d = deriv(anti.periodic, axis);
      d.values += anti.linebar.values;
      out.max_defect =
          std::max(out.max_defect, (d.values - source.values).abs().maxCoeff() / scale);
    }
    Field<double> prim = std::move(anti.total);
    prim.values *= sign;
    prim.values *= cutoff.values;
    out.amps.push_back(std::move(prim));
  }
  return out;
}

}  // namespace fracgo
