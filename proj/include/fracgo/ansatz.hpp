#pragma once

#include "fracgo/manifest.hpp"
#include "fracgo/transport.hpp"

namespace fracgo {

// --- amplitude exponent lattice ---------------------------------------------
// A = N + (2s - floor(2s)) N, sorted and deduplicated up to the cutoff.

struct ExponentLattice {
  double s = 0.5;
  std::vector<double> entries;

  static ExponentLattice build(double s, double cutoff, double tol = 1e-9) {
    if (!(s > 0.0) || s >= 1.0) throw DomainError("lattice order s must lie in (0,1)");
    if (!(cutoff > 0.0)) throw DomainError("lattice cutoff must be positive");
    const double gen = 2.0 * s - std::floor(2.0 * s);
    std::vector<double> raw;
    for (int a = 0; a <= int(cutoff) + 1; ++a) {
      if (gen < tol) {
        if (a <= cutoff + tol) raw.push_back(a);
        continue;
      }
      for (int b = 0;; ++b) {
        const double v = a + gen * b;
        if (v > cutoff + tol) break;
        raw.push_back(v);
      }
    }
    std::sort(raw.begin(), raw.end());
    ExponentLattice out;
    out.s = s;
    for (double v : raw)
      if (out.entries.empty() || v - out.entries.back() > tol) out.entries.push_back(v);
    return out;
  }

  double alpha1() const { return entries.at(1); }

  bool contains(double v, double tol = 1e-9) const {
    for (double e : entries)
      if (std::abs(e - v) < tol) return true;
    return false;
  }

  // Absorption closure up to the cutoff: shifting by (2s-1) for s > 1/2, or by
  // 2s and 1 for s < 1/2, stays inside the lattice.
  bool closed_under_absorption(double tol = 1e-9) const {
    const double top = entries.back();
    std::vector<double> shifts;
    if (s > 0.5) shifts = {2.0 * s - 1.0, 1.0};
    else if (s == 0.5) shifts = {1.0};
    else shifts = {2.0 * s, 1.0};
    for (double a : entries)
      for (double sh : shifts)
        if (a + sh <= top + tol && !contains(a + sh, tol)) return false;
    return true;
  }
};

// --- cutoff -------------------------------------------------------------------
// chi = 1 on Omega dilated by margin, 0 outside Omega dilated by 2*margin,
// bump-profile ramp in between.

inline Field<double> bump_cutoff(const GridD& g, const Omega& omega, double margin) {
  if (!(margin > 0.0)) throw DomainError("cutoff margin must be positive");
  // the doubled dilation must fit in the box with a gap
  const Omega outer = omega.dilated(2.0 * margin);
  for (int a = 0; a < g.dim; ++a) {
    const double lo = g.origin[a], hi = g.origin[a] + g.periods[a];
    const double span = outer.kind == Omega::Kind::Disk
                            ? outer.radius
                            : 0.5 * (outer.hi[a] - outer.lo[a]);
    const double c = outer.kind == Omega::Kind::Disk ? outer.center[a]
                                                     : 0.5 * (outer.hi[a] + outer.lo[a]);
    if (c - span < lo + g.spacing(a) || c + span > hi - g.spacing(a))
      throw DomainError("cutoff margin too large for the box");
  }
  // quotient transition: smooth to all orders at both ends of the ramp (a
  // one-sided bump profile is only C^1 where it meets the plateau, and the
  // amplitude recursion differentiates that curvature jump into grid-scale
  // spikes)
  auto f = [](double u) { return u > 0.0 ? std::exp(-1.0 / (u * u)) : 0.0; };
  Field<double> chi(g);
  for (Eigen::Index i0 = 0; i0 < g.sizes[0]; ++i0)
    for (Eigen::Index i1 = 0; i1 < g.sizes[1]; ++i1) {
      const double d = omega.signed_dist(g.point(i0, i1), g.dim);
      double v;
      if (d <= margin) v = 1.0;
      else if (d >= 2.0 * margin) v = 0.0;
      else {
        const double t = (d - margin) / margin;  // in (0,1)
        v = f(1.0 - t) / (f(t) + f(1.0 - t));
      }
      chi.values[g.flat(i0, i1)] = v;
    }
  return chi;
}

// --- assembled ansatz -----------------------------------------------------------

enum class Regime { high_s, low_s, const_coef };

struct GOAnsatz {
  Regime regime = Regime::const_coef;
  double s = 0.5;
  Medium medium;
  GridD grid;
  // phase stack: entries (j, phi_j), assembled as exp(i sum_j tau^{1-2sj} phi_j)
  std::vector<std::pair<int, Field<double>>> phases;
  // amplitude stack: entries (alpha_l, a_l)
  std::vector<std::pair<double, Field<double>>> amplitudes;
  Field<double> cutoff;
  bool plane_type = false;   // oscillation only along plane_dir
  Vec2d plane_dir{1.0, 0.0};
  json manifest;
};

struct ResolutionPolicy {
  double points_per_wavelength = 8.0;
  double cross_floor = 0.125;  // fraction of the along-axis requirement
};

inline std::array<long, 2> required_sizes(const GOAnsatz& an, double tau,
                                          const ResolutionPolicy& pol = {}) {
  // max index over the window
  double r_max = 1.0;
  const auto& g = an.grid;
  for (int a = 0; a < 16; ++a)
    for (int b = 0; b < 16; ++b) {
      Vec2d x(g.origin[0] + g.periods[0] * (a + 0.5) / 16.0,
              g.dim == 2 ? g.origin[1] + g.periods[1] * (b + 0.5) / 16.0 : 0.0);
      r_max = std::max(r_max, an.medium.r(x));
    }
  std::array<long, 2> req{8, an.grid.dim == 2 ? 8l : 1l};
  for (int a = 0; a < g.dim; ++a) {
    const double dir = an.plane_type ? std::max(std::abs(an.plane_dir[a]), pol.cross_floor) : 1.0;
    req[size_t(a)] = std::max<long>(
        8, long(std::ceil(g.periods[a] / (2.0 * std::numbers::pi) * tau * r_max *
                          pol.points_per_wavelength * dir)));
  }
  return req;
}

inline void check_resolution(const GOAnsatz& an, double tau, const ResolutionPolicy& pol = {}) {
  if (!(tau >= 1.0)) throw DomainError("evaluation requires tau >= 1");
  const auto req = required_sizes(an, tau, pol);
  for (int a = 0; a < an.grid.dim; ++a)
    if (an.grid.sizes[size_t(a)] < req[size_t(a)])
      throw ResolutionError("grid too coarse for tau: axis " + std::to_string(a) + " needs " +
                                std::to_string(req[size_t(a)]) + " points",
                            {req[0], req[1]});
}

// u_M(x) = chi(x) exp(i tau sum_j tau^{-2sj} phi_j(x)) sum_l tau^{-alpha_l} a_l(x),
// with the tau powers taken in log space.
inline Field<double> evaluate(const GOAnsatz& an, double tau, const ResolutionPolicy& pol = {}) {
  check_resolution(an, tau, pol);
  const auto& g = an.grid;
  const double log_tau = std::log(tau);
  Field<double> phase(g);
  for (const auto& [j, phi] : an.phases)
    phase.values += std::exp((1.0 - 2.0 * an.s * j) * log_tau) * phi.values;
  Field<double> amp(g);
  for (const auto& [alpha_l, a_l] : an.amplitudes)
    amp.values += std::exp(-alpha_l * log_tau) * a_l.values;
  Field<double> u(g);
  const std::complex<double> I(0.0, 1.0);
  u.values = an.cutoff.values * (I * phase.values).exp() * amp.values;
  require_finite(u, "evaluated ansatz");
  return u;
}

// --- builders -------------------------------------------------------------------

// Constant-coefficient ansatz of Prop-2.1 type: plane phase alpha.x along a
// grid axis, amplitudes a_0 ... a_M from the structured symbol recursion
// (integer lattice), clipped once by the evaluation cutoff.
inline GOAnsatz build_const_coef(const GridD& g, double s, const Eigen::Vector2d& alpha,
                                 const std::function<double(double)>& cross_profile, int M,
                                 const Omega& omega, double margin, int nu_max = 14) {
  if (g.dim != 2) throw DomainError("constant-coefficient builder needs a 2-D grid");
  int axis = -1;
  for (int a = 0; a < 2; ++a)
    if (std::abs(std::abs(alpha[a]) - 1.0) < 1e-14) axis = a;
  if (axis < 0) throw DomainError("constant-coefficient builder needs an axis-aligned direction");

  GOAnsatz an;
  an.regime = Regime::const_coef;
  an.s = s;
  an.grid = g;
  an.medium = Medium(ConstantIndex{1.0}, PotentialZero{}, s == 1.0 ? 0.999 : s, omega, g.dim);
  an.medium.s = s;  // allow the s = 1 classical limit in const-coefficient work
  an.plane_type = true;
  an.plane_dir = alpha;
  an.cutoff = bump_cutoff(g, omega, margin);
  auto phi = eikonal_plane(g, alpha, 1.0);
  an.phases.push_back({0, phi.values});

  const int cross = 1 - axis;
  Field<double> a0(g);
  for (Eigen::Index i0 = 0; i0 < g.sizes[0]; ++i0)
    for (Eigen::Index i1 = 0; i1 < g.sizes[1]; ++i1)
      a0.values[g.flat(i0, i1)] = cross_profile(g.coord(cross, axis == 0 ? i1 : i0));

  auto table = ConstCoefSymbolTable::build(s, alpha, nu_max);
  auto rec = const_coef_amplitudes(table, a0, M, an.cutoff);
  for (int l = 0; l <= M; ++l)
    an.amplitudes.push_back({double(l), rec.amps[size_t(l)]});
  an.manifest = {{"regime", "const_coef"},
                 {"s", s},
                 {"M", M},
                 {"alpha", {alpha[0], alpha[1]}},
                 {"grid", to_json(g)},
                 {"omega", to_json(omega)},
                 {"margin", margin}};
  an.manifest["hash"] = manifest_hash(an.manifest);
  return an;
}

// High-s ansatz on a chart: a_0 from the closed-form polar amplitude; with
// M = 2 a correction a_1 at alpha_1 = 2s-1 absorbing the tau^0 potential term
// (for s = 1/2 the potential already sits in a_0's phase factor and a_1 = 0).
inline GOAnsatz build_high_s(const Medium& med, const PolarChart& chart,
                             const BoundaryAmplitude& boundary, int M, double margin) {
  if (med.s < 0.5 || med.s >= 1.0)
    throw RegimeError("single-phase construction applies for s in [1/2,1)");
  if (M < 1 || M > 2) throw DomainError("high-s builder supports M in {1,2}");
  const GridD& g = chart.grid;
  GOAnsatz an;
  an.regime = Regime::high_s;
  an.s = med.s;
  an.medium = med;
  an.grid = g;
  an.cutoff = bump_cutoff(g, med.omega, margin);
  const Omega target = med.omega.dilated(2.0 * margin + 2.0 * g.spacing(0));

  // phase phi0 = rho through the chart
  Field<double> phi0(g);
  if (chart.euclidean) {
    for (Eigen::Index f = 0; f < g.points(); ++f) {
      const Vec2d x = g.point(f / g.sizes[1], f % g.sizes[1]);
      phi0.values[f] = chart.r_const * (x - chart.center).norm();
    }
  } else {
    for (Eigen::Index f = 0; f < g.points(); ++f)
      phi0.values[f] = chart.covered[f] ? chart.rho_of[f] : 0.0;
  }
  an.phases.push_back({0, phi0});

  auto bfun = [boundary](double th) { return boundary(th); };
  const double s = med.s;
  Field<double> a0 = polar_amplitude_closed_form(chart, med, bfun, target);
  an.amplitudes.push_back({0.0, a0});

  auto lattice = ExponentLattice::build(s, 2.0);
  const double alpha1 = lattice.alpha1();
  if (M == 2) {
    Field<double> a1(g);
    if (s > 0.5) {
      // order match tau^{2s-1-alpha_1} = tau^0 : L_{1;0} a_1 + q a_0 = 0, i.e.
      // 2 grad phi . grad a_1 + b_s a_1 = -(i/s) r^{2-2s} q a_0
      const Field<double>* a0p = &an.amplitudes[0].second;
      const Medium* mp = &an.medium;
      RayTransportOptions tr1;
      tr1.rhs = [a0p, mp, s](const Vec2d& x) {
        const std::complex<double> I(0.0, 1.0);
        return -I / s * std::pow(mp->r(x), 2.0 - 2.0 * s) * mp->q(x) *
               interp_bilinear(*a0p, Vec2<double>(x));
      };
      auto zerob = [](double) { return 0.0; };
      a1 = solve_transport_along_rays(an.medium, chart, zerob, target, tr1);
    }
    an.amplitudes.push_back({alpha1, a1});
  }
  an.manifest = {{"regime", "high_s"},
                 {"s", s},
                 {"M", M},
                 {"alpha1", alpha1},
                 {"lattice", lattice.entries},
                 {"medium", to_json(med)},
                 {"grid", to_json(g)},
                 {"margin", margin},
                 {"boundary", {{"theta0", boundary.theta0}, {"width", boundary.width}, {"height", boundary.height}}}};
  an.manifest["hash"] = manifest_hash(an.manifest);
  return an;
}

// Plane-phase high-s variant (constant or slab index): boundary is the cross
// profile A(x_perp) imposed at the left box edge.
inline GOAnsatz build_high_s_plane(const Medium& med, const Phase& phi,
                                   const std::function<double(double)>& cross_profile,
                                   const GridD& g, int M, double margin) {
  if (med.s < 0.5 || med.s >= 1.0)
    throw RegimeError("single-phase construction applies for s in [1/2,1)");
  if (M < 1 || M > 2) throw DomainError("high-s builder supports M in {1,2}");
  GOAnsatz an;
  an.regime = Regime::high_s;
  an.s = med.s;
  an.medium = med;
  an.grid = g;
  an.plane_type = true;
  an.plane_dir = phi.grad(Vec2d(0, 0)).normalized();
  an.cutoff = bump_cutoff(g, med.omega, margin);
  an.phases.push_back({0, phi.values});

  const double s = med.s;
  PlaneTransportOptions t0;
  const Medium* mp = &an.medium;
  if (s == 0.5)
    t0.zero_order = [mp](const Vec2d& x) {
      return std::complex<double>(0.0, 2.0 * mp->q(x) * mp->r(x));
    };
  Field<double> a0 = solve_transport_plane(phi, med, cross_profile, g, t0);
  an.amplitudes.push_back({0.0, a0});

  auto lattice = ExponentLattice::build(s, 2.0);
  const double alpha1 = lattice.alpha1();
  if (M == 2) {
    Field<double> a1(g);
    if (s > 0.5) {
      const Field<double>* a0p = &an.amplitudes[0].second;
      PlaneTransportOptions t1;
      t1.rhs = [a0p, mp, s](const Vec2d& x) {
        const std::complex<double> I(0.0, 1.0);
        return -I / s * std::pow(mp->r(x), 2.0 - 2.0 * s) * mp->q(x) *
               interp_bilinear(*a0p, Vec2<double>(x));
      };
      a1 = solve_transport_plane(phi, med, [](double) { return 0.0; }, g, t1);
    }
    an.amplitudes.push_back({alpha1, a1});
  }
  an.manifest = {{"regime", "high_s_plane"}, {"s", s}, {"M", M}, {"medium", to_json(med)},
                 {"grid", to_json(g)},       {"margin", margin}};
  an.manifest["hash"] = manifest_hash(an.manifest);
  return an;
}

// Low-s ansatz: phases {phi_0, phi_1} with the potential absorbed into phi_1
// (weight tau^{1-2s}); truncation F_M = 1, A_M = 0.
inline GOAnsatz build_low_s(const Medium& med, const Phase& phi,
                            const std::function<double(double)>& cross_profile, const GridD& g,
                            bool with_phi1, double margin) {
  if (!(med.s < 0.5))
    throw RegimeError("multi-phase construction applies for s in (0,1/2); use the single-phase builder");
  GOAnsatz an;
  an.regime = Regime::low_s;
  an.s = med.s;
  an.medium = med;
  an.grid = g;
  an.plane_type = true;
  an.plane_dir = phi.grad(Vec2d(0, 0)).normalized();
  an.cutoff = bump_cutoff(g, med.omega, margin);
  an.phases.push_back({0, phi.values});
  if (with_phi1) an.phases.push_back({1, phase_correction_phi1_plane(phi, med, g)});

  // Thm-1.2 transport: potential-free, the q-effect lives in phi_1
  Field<double> a0 = solve_transport_plane(phi, med, cross_profile, g, {});
  an.amplitudes.push_back({0.0, a0});
  an.manifest = {{"regime", "low_s"}, {"s", med.s}, {"with_phi1", with_phi1},
                 {"medium", to_json(med)}, {"grid", to_json(g)}, {"margin", margin}};
  an.manifest["hash"] = manifest_hash(an.manifest);
  return an;
}

}  // namespace fracgo
