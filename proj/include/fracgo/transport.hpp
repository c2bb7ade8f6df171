#pragma once

#include "fracgo/chart.hpp"
#include "fracgo/symbols.hpp"

namespace fracgo {

// b_s = Lap(phi) + (2s-2) (Hess(phi) grad phi . grad phi)/|grad phi|^2, the
// zero-order transport coefficient. Computed from analytic phase closures.
struct TransportCoefficients {
  Field<double> b_s;
  Field<double> grad_phi_0, grad_phi_1;
  Field<double> norm_grad_phi;
  Field<double> hessian_term;
};

inline TransportCoefficients transport_coefficients(const Phase& phi, const Medium& med,
                                                    const GridD& g) {
  if (!phi.grad || !phi.hess)
    throw DomainError("transport coefficients need a phase with analytic derivatives");
  TransportCoefficients out{Field<double>(g), Field<double>(g), Field<double>(g), Field<double>(g),
                            Field<double>(g)};
  const double s = med.s;
  const double c0 = med.c0();
  const auto mask = med.omega.mask(g);
  for (Eigen::Index i0 = 0; i0 < g.sizes[0]; ++i0)
    for (Eigen::Index i1 = 0; i1 < g.sizes[1]; ++i1) {
      const Vec2d x = g.point(i0, i1);
      const Vec2d gp = phi.grad(x);
      const Mat2 H = phi.hess(x);
      const double ng = g.dim == 2 ? gp.norm() : std::abs(gp[0]);
      const Eigen::Index f = g.flat(i0, i1);
      if (mask[f] > 0.0 && ng < 0.5 * c0)
        throw DegeneratePhaseError("phase gradient degenerates inside the domain");
      const double lap = g.dim == 2 ? H.trace() : H(0, 0);
      const double hterm = ng > 0 ? (H * gp).dot(gp) / (ng * ng) : 0.0;
      out.b_s.values[f] = lap + (2.0 * s - 2.0) * hterm;
      out.grad_phi_0.values[f] = gp[0];
      out.grad_phi_1.values[f] = gp[1];
      out.norm_grad_phi.values[f] = ng;
      out.hessian_term.values[f] = hterm;
    }
  return out;
}

// First-order coefficient of the outgoing-phase expansion of (-Delta)^s:
// L a = -i s |grad phi|^{2s-2} (2 grad phi . grad a + b_s a). Its kernel is
// exactly the set of transport solutions, and at a plane phase it reduces to
// the constant-coefficient multiplier 2 s (alpha . xi).
inline Field<double> apply_L10(const Phase& phi, double s, const Field<double>& a,
                               const Medium& med) {
  const auto& g = a.grid;
  TransportCoefficients tc = transport_coefficients(phi, med, g);
  Field<double> da0 = deriv(a, 0);
  Field<double> da1 = g.dim == 2 ? deriv(a, 1) : Field<double>(g);
  Field<double> out(g);
  const std::complex<double> I(0.0, 1.0);
  for (Eigen::Index f = 0; f < g.points(); ++f) {
    const double ng = tc.norm_grad_phi.values[f].real();
    const std::complex<double> adv =
        2.0 * (tc.grad_phi_0.values[f].real() * da0.values[f] +
               (g.dim == 2 ? tc.grad_phi_1.values[f].real() * da1.values[f] : 0.0));
    out.values[f] = -I * s * std::pow(ng, 2.0 * s - 2.0) *
                    (adv + tc.b_s.values[f].real() * a.values[f]);
  }
  return out;
}

// Polar form of the same operator on a chart ray:
// -2 i s r^{2s} (d/drho + r^{-2} Lap(phi)/2 - (1-s) r^{-1} dr/drho) a.
// Provided as the independent second route for the two-path identity.
inline std::complex<double> apply_L10_polar_along(const Phase& phi, double s, const Medium& med,
                                                  const Vec2d& x, const Vec2d& xhat_ray,
                                                  std::complex<double> a,
                                                  std::complex<double> da_drho) {
  const double r = med.r(x);
  const Mat2 H = phi.hess(x);
  const double lap = med.dim == 2 ? H.trace() : H(0, 0);
  const double dr_drho = med.grad_r(x).dot(xhat_ray) / r;  // d rho = r ds
  const std::complex<double> I(0.0, 1.0);
  return -2.0 * I * s * std::pow(r, 2.0 * s) *
         (da_drho + 0.5 * lap / (r * r) * a - (1.0 - s) * dr_drho / r * a);
}

// --- boundary amplitude -------------------------------------------------------

struct BoundaryAmplitude {
  double theta0 = 0.0;
  double width = 0.3;
  double height = 1.0;

  // Smooth bump on the theta-circle, compactly supported in (-2w, 2w) mod 2pi.
  double operator()(double theta) const {
    double d = std::remainder(theta - theta0, 2.0 * std::numbers::pi) / (2.0 * width);
    if (std::abs(d) >= 1.0) return 0.0;
    return height * std::exp(1.0 - 1.0 / (1.0 - d * d));
  }
};

// --- transport along plane-type rays -------------------------------------------
// Phase of the form phi(x) = f(x_0): rays are grid rows along axis 0. Solves
// 2 grad phi . grad a + (b_s + zero_order) a = rhs by row marching (RK4 on the
// grid spacing), with a = boundary(x_perp) at the left box edge.

struct PlaneTransportOptions {
  int substeps = 4;
  std::function<std::complex<double>(const Vec2d&)> zero_order;  // optional
  std::function<std::complex<double>(const Vec2d&)> rhs;         // optional
};

inline Field<double> solve_transport_plane(const Phase& phi, const Medium& med,
                                           const std::function<double(double)>& boundary,
                                           const GridD& g, const PlaneTransportOptions& opt = {}) {
  if (!phi.grad || !phi.hess) throw DomainError("plane transport needs an analytic phase");
  const double s = med.s;
  Field<double> out(g);
  const double h = g.spacing(0);
  for (Eigen::Index i1 = 0; i1 < g.sizes[1]; ++i1) {
    const double xp = g.dim == 2 ? g.coord(1, i1) : 0.0;
    std::complex<double> a = boundary(xp);
    out.values[g.flat(0, i1)] = a;
    for (Eigen::Index i0 = 0; i0 + 1 < g.sizes[0]; ++i0) {
      const double x_here = g.coord(0, i0);
      auto slope = [&](double x1, std::complex<double> av) {
        const Vec2d x(x1, xp);
        const Vec2d gp = phi.grad(x);
        const Mat2 H = phi.hess(x);
        const double ng = g.dim == 2 ? gp.norm() : std::abs(gp[0]);
        const double lap = g.dim == 2 ? H.trace() : H(0, 0);
        const double hterm = (H * gp).dot(gp) / (ng * ng);
        const double bs = lap + (2.0 * s - 2.0) * hterm;
        std::complex<double> extra = opt.zero_order ? opt.zero_order(x) : 0.0;
        std::complex<double> src = opt.rhs ? opt.rhs(x) : 0.0;
        // 2 phi' da/dx1 = -(b_s + extra) a + src
        return (-(bs + extra) * av + src) / (2.0 * gp[0]);
      };
      const double hs = h / opt.substeps;
      for (int q = 0; q < opt.substeps; ++q) {
        const double x1 = x_here + q * hs;
        const auto k1 = slope(x1, a);
        const auto k2 = slope(x1 + 0.5 * hs, a + 0.5 * hs * k1);
        const auto k3 = slope(x1 + 0.5 * hs, a + 0.5 * hs * k2);
        const auto k4 = slope(x1 + hs, a + hs * k3);
        a += hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
      out.values[g.flat(i0 + 1, i1)] = a;
    }
  }
  return out;
}

// --- transport along chart rays -------------------------------------------------
// d a / d rho = [-(b_s + zero_order) a + rhs] / (2 r^2) with the near-field
// initialization a(rho_1) = b(theta) e^{n/8} rho_1^{-(n-1)/2} (exact while the
// ray is still in the exterior r = 1 region).

struct RayTransportOptions {
  std::function<std::complex<double>(const Vec2d&)> zero_order;
  std::function<std::complex<double>(const Vec2d&)> rhs;
  int substeps = 1;
};

namespace detail {

inline double bs_at(const Medium& med, const TransportSample& smp, double s) {
  const double H = med.grad_r(smp.x).dot(smp.xi) / smp.r;  // (grad phi . grad r)/r
  return smp.trP + (2.0 * s - 2.0) * H;
}

}  // namespace detail

// Integrates the transport ODE along every tabulated chart ray; returns per
// (ray, shell) amplitudes aligned with chart.table.
inline std::vector<std::vector<std::complex<double>>> ray_transport_table(
    const PolarChart& chart, const Medium& med, const std::function<double(double)>& boundary,
    const RayTransportOptions& opt = {}) {
  if (chart.euclidean) throw DomainError("ray transport table needs a traced chart");
  const double s = med.s;
  const int n = med.dim;
  std::vector<std::vector<std::complex<double>>> out(chart.table.size());
  for (size_t j = 0; j < chart.table.size(); ++j) {
    const auto& row = chart.table[j];
    auto& arow = out[j];
    arow.resize(row.size());
    if (row.empty()) continue;
    const double theta = chart.theta_of_index(int(j));
    const double rho1 = row[0].rho;
    std::complex<double> a = boundary(theta) * std::exp(n / 8.0) * std::pow(rho1, -0.5 * (n - 1));
    arow[0] = a;
    for (size_t k = 0; k + 1 < row.size(); ++k) {
      const double drho = row[k + 1].rho - row[k].rho;
      auto lerp = [&](double t, const TransportSample& A, const TransportSample& B) {
        TransportSample mix = A;
        mix.x = (1 - t) * A.x + t * B.x;
        mix.xi = (1 - t) * A.xi + t * B.xi;
        mix.r = (1 - t) * A.r + t * B.r;
        mix.rho = (1 - t) * A.rho + t * B.rho;
        mix.trP = ((1 - t) * A.trP * A.rho + t * B.trP * B.rho) / mix.rho;
        return mix;
      };
      auto slope = [&](double t, std::complex<double> av) {
        const TransportSample smp = lerp(t, row[k], row[k + 1]);
        const double bs = detail::bs_at(med, smp, s);
        const std::complex<double> extra = opt.zero_order ? opt.zero_order(smp.x) : 0.0;
        const std::complex<double> src = opt.rhs ? opt.rhs(smp.x) : 0.0;
        return (-(bs + extra) * av + src) / (2.0 * smp.r * smp.r);
      };
      const auto k1 = slope(0.0, a);
      const auto k2 = slope(0.5, a + 0.5 * drho * k1);
      const auto k3 = slope(0.5, a + 0.5 * drho * k2);
      const auto k4 = slope(1.0, a + drho * k3);
      a += drho / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      arow[k + 1] = a;
    }
  }
  return out;
}

// Resample a per-(ray, shell) table onto the grid over the covered region,
// with the same Catmull-Rom stencil the chart uses for its own quantities.
inline Field<double> resample_ray_table(const PolarChart& chart,
                                        const std::vector<std::vector<std::complex<double>>>& tab,
                                        const Omega& target, int dim) {
  const auto& g = chart.grid;
  Field<double> out(g);
  const double dtheta = (chart.theta_hi - chart.theta_lo) / (chart.n_theta - 1);
  auto wgt = [](double t, int a) {
    switch (a) {
      case -1: return ((-0.5 * t + 1.0) * t - 0.5) * t;
      case 0: return (1.5 * t - 2.5) * t * t + 1.0;
      case 1: return ((-1.5 * t + 2.0) * t + 0.5) * t;
      default: return (0.5 * t - 0.5) * t * t;
    }
  };
  auto pick = [&](int j, int k) {
    j = std::clamp(j, 0, chart.n_theta - 1);
    int jj = j;
    while (tab[size_t(jj)].empty() && jj + 1 < chart.n_theta) ++jj;
    while (tab[size_t(jj)].empty() && jj > 0) --jj;
    const auto& arow = tab[size_t(jj)];
    return arow[size_t(std::clamp(k, 0, int(arow.size()) - 1))];
  };
  for (Eigen::Index f = 0; f < g.points(); ++f) {
    if (!chart.covered[f]) continue;
    const Vec2d x = g.point(f / g.sizes[1], f % g.sizes[1]);
    if (target.signed_dist(x, dim) > 0.0) continue;
    const double fj = (chart.theta_of[f] - chart.theta_lo) / dtheta;
    const double fk = chart.rho_of[f] / chart.drho - chart.shell0;
    const int j0 = int(std::floor(fj)), k0 = int(std::floor(fk));
    const double tj = fj - j0, tk = fk - k0;
    std::complex<double> acc = 0.0;
    for (int a = -1; a <= 2; ++a)
      for (int b = -1; b <= 2; ++b) acc += wgt(tj, a) * wgt(tk, b) * pick(j0 + a, k0 + b);
    out.values[f] = acc;
  }
  return out;
}

// Transport solution on the grid through a chart (or a plane phase, in which
// case boundary takes the cross coordinate).
inline Field<double> solve_transport_along_rays(const Medium& med, const PolarChart& chart,
                                                const std::function<double(double)>& boundary,
                                                const Omega& target,
                                                const RayTransportOptions& opt = {}) {
  if (chart.euclidean) {
    // analytic rays: integrate the ODE radially per grid point direction
    const auto& g = chart.grid;
    Field<double> out(g);
    const int n = med.dim;
    for (Eigen::Index f = 0; f < g.points(); ++f) {
      const Vec2d x = g.point(f / g.sizes[1], f % g.sizes[1]);
      if (target.signed_dist(x, n) > 0.0) continue;
      const Vec2d d = x - chart.center;
      const double rho_end = chart.r_const * d.norm();
      const double theta = std::atan2(d[1], d[0]);
      const Vec2d w = d.normalized();
      const double rho1 = std::min(0.05, 0.5 * rho_end);
      std::complex<double> a = boundary(theta) * std::exp(n / 8.0) *
                               std::pow(rho1, -0.5 * (n - 1)) *
                               std::pow(chart.r_const, 0.5 * n - med.s);
      // log-spaced RK4: the 1/rho coefficient is smooth in log rho
      const int steps = std::max(64, int(std::ceil(std::log(rho_end / rho1) / 5e-3)));
      const double du = std::log(rho_end / rho1) / steps;
      const double r0 = chart.r_const;
      auto slope_u = [&](double u, std::complex<double> av) {
        const double rr = rho1 * std::exp(u);
        const Vec2d pos = chart.center + (rr / r0) * w;
        const double bs = r0 * r0 * double(n - 1) / rr;  // trP with |grad phi| = r0
        const std::complex<double> extra = opt.zero_order ? opt.zero_order(pos) : 0.0;
        const std::complex<double> src = opt.rhs ? opt.rhs(pos) : 0.0;
        return rr * (-(bs + extra) * av + src) / (2.0 * r0 * r0);
      };
      double u = 0.0;
      for (int k = 0; k < steps; ++k) {
        const auto k1 = slope_u(u, a);
        const auto k2 = slope_u(u + 0.5 * du, a + 0.5 * du * k1);
        const auto k3 = slope_u(u + 0.5 * du, a + 0.5 * du * k2);
        const auto k4 = slope_u(u + du, a + du * k3);
        a += du / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        u += du;
      }
      out.values[f] = a;
    }
    return out;
  }
  return resample_ray_table(chart, ray_transport_table(chart, med, boundary, opt), target, med.dim);
}

// --- closed-form polar amplitude -------------------------------------------------
// a0(rho, theta) = b(theta) e^{n/8} S^{-1/2} r^{n/2 - s} e^{iJ}, the closed-form
// solution of the transport equation in polar normal coordinates; J is the
// s = 1/2 potential phase -int q/r d rho on the outgoing branch, zero otherwise.

inline Field<double> polar_amplitude_closed_form(const PolarChart& chart, const Medium& med,
                                                 const std::function<double(double)>& boundary,
                                                 const Omega& target) {
  const double s = med.s;
  if (s < 0.5) throw RegimeError("closed-form polar amplitude applies for s in [1/2, 1)");
  const int n = med.dim;
  const auto& g = chart.grid;
  Field<double> out(g);
  const std::complex<double> I(0.0, 1.0);

  if (chart.euclidean) {
    for (Eigen::Index f = 0; f < g.points(); ++f) {
      const Vec2d x = g.point(f / g.sizes[1], f % g.sizes[1]);
      if (target.signed_dist(x, n) > 0.0) continue;
      const Vec2d d = x - chart.center;
      const double rho = chart.r_const * d.norm();
      const double theta = std::atan2(d[1], d[0]);
      const double S = n == 2 ? rho : 1.0;  // polar area factor at constant index
      double J = 0.0;
      if (s == 0.5) {
        const int m = 400;
        for (int k = 0; k < m; ++k) {
          const Vec2d pos = chart.center + d * (k + 0.5) / m;
          J -= med.q(pos) / chart.r_const * (rho / m);
        }
      }
      out.values[f] = boundary(theta) * std::exp(n / 8.0) * std::pow(S, -0.5) *
                      std::pow(chart.r_const, 0.5 * n - s) * std::exp(I * J);
    }
    return out;
  }

  // traced chart: per-ray cumulative J tables, S from the Jacobi field
  std::vector<std::vector<double>> Jtab(chart.table.size());
  for (size_t j = 0; j < chart.table.size(); ++j) {
    const auto& row = chart.table[j];
    auto& Jrow = Jtab[j];
    Jrow.resize(row.size(), 0.0);
    if (row.empty() || s != 0.5) continue;
    double acc = -row[0].q / row[0].r * row[0].rho;  // from the base, q = 0 outside anyway
    Jrow[0] = acc;
    for (size_t k = 0; k + 1 < row.size(); ++k) {
      const double drho = row[k + 1].rho - row[k].rho;
      acc -= 0.5 * (row[k].q / row[k].r + row[k + 1].q / row[k + 1].r) * drho;
      Jrow[k + 1] = acc;
    }
  }
  const double dtheta = (chart.theta_hi - chart.theta_lo) / (chart.n_theta - 1);
  for (Eigen::Index f = 0; f < g.points(); ++f) {
    if (!chart.covered[f]) continue;
    const Vec2d x = g.point(f / g.sizes[1], f % g.sizes[1]);
    if (target.signed_dist(x, n) > 0.0) continue;
    const double rho = chart.rho_of[f], theta = chart.theta_of[f];
    const auto smp = chart.interp_sample(rho, theta);
    double J = 0.0;
    if (s == 0.5) {
      const double fj = (theta - chart.theta_lo) / dtheta;
      const double fk = rho / chart.drho - chart.shell0;
      const int j0 = std::clamp(int(std::floor(fj)), 0, chart.n_theta - 2);
      const double tj = fj - j0;
      double acc = 0.0, wsum = 0.0;
      for (int a = 0; a <= 1; ++a) {
        const auto& Jrow = Jtab[size_t(j0 + a)];
        if (Jrow.size() < 2) continue;
        const int k0 = std::clamp(int(std::floor(fk)), 0, int(Jrow.size()) - 2);
        const double tk = std::clamp(fk - k0, 0.0, 1.0);
        const double w = a == 0 ? 1.0 - tj : tj;
        acc += w * ((1.0 - tk) * Jrow[size_t(k0)] + tk * Jrow[size_t(k0) + 1]);
        wsum += w;
      }
      J = wsum > 0 ? acc / wsum : 0.0;
    }
    out.values[f] = boundary(theta) * std::exp(n / 8.0) * std::pow(smp.spreading, -0.5) *
                    std::pow(med.r(x), 0.5 * n - s) * std::exp(I * J);
  }
  return out;
}

// --- low-s phase correction -------------------------------------------------------
// Solves 2 s |grad phi0|^{2s-2} grad phi0 . grad phi1 = -q along rays (the sign
// that cancels the tau^0 potential term for the outgoing exponential
// convention; flipping the branch flips it): d phi1/d rho = -q/(2 s r^{2s}),
// phi1 = 0 at ray entry.

inline Field<double> phase_correction_phi1_plane(const Phase& phi, const Medium& med,
                                                 const GridD& g) {
  if (!(med.s < 0.5) || !(med.s > 0.0)) throw RegimeError("phase correction applies for s in (0,1/2)");
  if (!phi.grad) throw DomainError("phase correction needs an analytic phase");
  const double s = med.s;
  Field<double> out(g);
  const double h = g.spacing(0);
  for (Eigen::Index i1 = 0; i1 < g.sizes[1]; ++i1) {
    const double xp = g.dim == 2 ? g.coord(1, i1) : 0.0;
    double phi1 = 0.0;
    out.values[g.flat(0, i1)] = 0.0;
    for (Eigen::Index i0 = 0; i0 + 1 < g.sizes[0]; ++i0) {
      // d phi1/dx1 = -q / (2 s |grad phi|^{2s-2} phi')
      auto slope = [&](double x1) {
        const Vec2d x(x1, xp);
        const Vec2d gp = phi.grad(x);
        const double ng = g.dim == 2 ? gp.norm() : std::abs(gp[0]);
        return -med.q(x) / (2.0 * s * std::pow(ng, 2.0 * s - 2.0) * gp[0]);
      };
      const double x1 = g.coord(0, i0);
      const double k1 = slope(x1);
      const double k2 = slope(x1 + 0.5 * h);
      const double k4 = slope(x1 + h);
      phi1 += h / 6.0 * (k1 + 4.0 * k2 + k4);
      out.values[g.flat(i0 + 1, i1)] = phi1;
    }
  }
  return out;
}

}  // namespace fracgo
