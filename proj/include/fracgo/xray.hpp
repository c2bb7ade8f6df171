#pragma once

#include <future>
#include <random>

#include "fracgo/residual.hpp"

namespace fracgo {

// --- fan geometry over the exit circle -------------------------------------

struct XRayGeometry {
  struct Beam {
    Vec2d p;        // base point on the exit circle
    double theta;   // absolute direction angle
    Vec2d w;        // unit direction
    double t_exit;  // chord parameter length through the exit disk (r = 1)
  };
  std::vector<Beam> beams;
  int n_base = 0, n_dir = 0;
  double exit_radius = 1.25;

  // Uniform base points x uniform inward directions; beams that miss the exit
  // disk keep t_exit = 0 and contribute zero data.
  static XRayGeometry fan_disk(int n_base, int n_dir, double R = 1.25,
                               double aperture = 0.45 * std::numbers::pi) {
    if (n_base < 2 || n_dir < 2) throw DomainError("fan geometry needs >= 2 x 2 rays");
    XRayGeometry geo;
    geo.n_base = n_base;
    geo.n_dir = n_dir;
    geo.exit_radius = R;
    geo.beams.reserve(size_t(n_base) * size_t(n_dir));
    for (int i = 0; i < n_base; ++i) {
      const double phi = 2.0 * std::numbers::pi * i / n_base;
      const Vec2d p(R * std::cos(phi), R * std::sin(phi));
      const Vec2d inward = -p.normalized();
      const double base_angle = std::atan2(inward[1], inward[0]);
      for (int j = 0; j < n_dir; ++j) {
        const double psi = -aperture + 2.0 * aperture * (j + 0.5) / n_dir;
        Beam b;
        b.p = p;
        b.theta = base_angle + psi;
        b.w = Vec2d(std::cos(b.theta), std::sin(b.theta));
        const double pw = b.p.dot(b.w);
        b.t_exit = pw < 0.0 ? -2.0 * pw : 0.0;
        geo.beams.push_back(b);
      }
    }
    return geo;
  }
};

struct XRayData {
  XRayGeometry geom;
  Eigen::VectorXcd values;
  double noise_level = 0.0;
  unsigned seed = 0;

  void write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.precision(12);
    os << "p_x,p_y,theta,value_re,value_im\n";
    for (size_t i = 0; i < geom.beams.size(); ++i) {
      const auto& b = geom.beams[i];
      os << b.p[0] << ',' << b.p[1] << ',' << b.theta << ',' << values[Eigen::Index(i)].real()
         << ',' << values[Eigen::Index(i)].imag() << '\n';
    }
  }
};

// --- forward transform ----------------------------------------------------------

struct RayTransformOptions {
  double node_spacing = 0.02;  // arclength between quadrature nodes
  double h_ode = 2e-3;         // for traced (variable-index) rays
  double t_budget = 50.0;
};

// Geodesic ray transform of an analytic integrand (exact sampling; the
// production oracle path for data synthesis and forward audits).
inline XRayData ray_transform(const Medium& med,
                              const std::function<std::complex<double>(const Vec2d&)>& Q,
                              const XRayGeometry& geo, const RayTransformOptions& opt = {}) {
  XRayData out;
  out.geom = geo;
  out.values.setZero(Eigen::Index(geo.beams.size()));
  const bool straight = std::holds_alternative<ConstantIndex>(med.index) &&
                        std::get<ConstantIndex>(med.index).r0 == 1.0;
  for (size_t i = 0; i < geo.beams.size(); ++i) {
    const auto& b = geo.beams[i];
    if (straight) {
      if (b.t_exit <= 0.0) continue;
      const int n = std::max(8, int(std::ceil(b.t_exit / opt.node_spacing)));
      const double dt = b.t_exit / n;
      std::complex<double> acc = 0.0;
      for (int k = 0; k < n; ++k) acc += Q(b.p + (k + 0.5) * dt * b.w);
      out.values[Eigen::Index(i)] = acc * dt;
    } else {
      RayTraceOptions ropt;
      ropt.h_ode = opt.h_ode;
      ropt.stop_radius = geo.exit_radius;
      ropt.t_budget = opt.t_budget;
      ropt.stop_on_exit = true;
      Ray ray = trace_ray(med, b.p, med.r(b.p) * b.w, ropt);
      std::complex<double> acc = 0.0;
      for (size_t k = 0; k + 1 < ray.samples.size(); ++k) {
        const auto& a = ray.samples[k];
        const auto& c = ray.samples[k + 1];
        acc += 0.5 * (Q(a.x) + Q(c.x)) * (c.rho - a.rho);  // d rho quadrature
      }
      out.values[Eigen::Index(i)] = acc;
    }
  }
  return out;
}

inline XRayData ray_transform(const Medium& med, const Field<double>& Q, const XRayGeometry& geo,
                              const RayTransformOptions& opt = {}) {
  auto fn = [&Q](const Vec2d& x) { return interp_bilinear(Q, Vec2<double>(x)); };
  return ray_transform(med, fn, geo, opt);
}

// --- discrete forward/adjoint pair for inversion ----------------------------------
// Straight-ray (r = 1) system: per beam, midpoint nodes with bilinear stencils
// on the grid; the adjoint is the exact transpose, which is what conjugate
// gradients requires.

struct XRaySystem {
  GridD grid;
  XRayGeometry geo;
  Eigen::ArrayXd mask;  // unknowns live on these cells
  double node_spacing = 0.02;

  Eigen::VectorXcd forward(const Eigen::VectorXcd& qvals) const {
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(Eigen::Index(geo.beams.size()));
    for_each_weight([&](size_t beam, Eigen::Index cell, double w) {
      out[Eigen::Index(beam)] += w * qvals[cell];
    });
    return out;
  }

  Eigen::VectorXcd adjoint(const Eigen::VectorXcd& data) const {
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(grid.points());
    for_each_weight([&](size_t beam, Eigen::Index cell, double w) {
      out[cell] += w * data[Eigen::Index(beam)];
    });
    for (Eigen::Index f = 0; f < grid.points(); ++f)
      if (mask[f] == 0.0) out[f] = 0.0;
    return out;
  }

  template <typename F>
  void for_each_weight(F&& f) const {
    const auto& g = grid;
    for (size_t i = 0; i < geo.beams.size(); ++i) {
      const auto& b = geo.beams[i];
      if (b.t_exit <= 0.0) continue;
      const int n = std::max(8, int(std::ceil(b.t_exit / node_spacing)));
      const double dt = b.t_exit / n;
      for (int k = 0; k < n; ++k) {
        const Vec2d x = b.p + (k + 0.5) * dt * b.w;
        const double f0 = (x[0] - g.origin[0]) / g.spacing(0);
        const double f1 = (x[1] - g.origin[1]) / g.spacing(1);
        const Eigen::Index i0 = Eigen::Index(std::floor(f0));
        const Eigen::Index i1 = Eigen::Index(std::floor(f1));
        if (i0 < 0 || i1 < 0 || i0 + 1 >= g.sizes[0] || i1 + 1 >= g.sizes[1]) continue;
        const double t0 = f0 - double(i0), t1 = f1 - double(i1);
        const double w00 = (1 - t0) * (1 - t1), w10 = t0 * (1 - t1), w01 = (1 - t0) * t1,
                     w11 = t0 * t1;
        f(i, g.flat(i0, i1), dt * w00);
        f(i, g.flat(i0 + 1, i1), dt * w10);
        f(i, g.flat(i0, i1 + 1), dt * w01);
        f(i, g.flat(i0 + 1, i1 + 1), dt * w11);
      }
    }
  }
};

// Regularized normal-equation least squares by conjugate gradients:
// (A* A + lambda I) q = A* d, unknowns restricted to the mask.
inline Field<double> invert_cg(const XRayData& data, const GridD& grid, const Omega& omega,
                               int iterations, double lambda, double node_spacing = 0.02) {
  XRaySystem sys{grid, data.geom, omega.mask(grid), node_spacing};
  auto apply = [&](const Eigen::VectorXcd& x) {
    Eigen::VectorXcd y = sys.adjoint(sys.forward(x));
    y += lambda * x;
    for (Eigen::Index f = 0; f < grid.points(); ++f)
      if (sys.mask[f] == 0.0) y[f] = 0.0;
    return y;
  };
  Eigen::VectorXcd b = sys.adjoint(data.values);
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(grid.points());
  Eigen::VectorXcd r = b, p = b;
  double rs = r.squaredNorm();
  const double rs0 = rs;
  for (int it = 0; it < iterations && rs > 1e-28 * rs0; ++it) {
    Eigen::VectorXcd ap = apply(p);
    const double pap = p.dot(ap).real();
    if (!(pap > 0.0)) throw CgBreakdownError("conjugate gradients lost positivity");
    const double alpha = rs / pap;
    x += alpha * p;
    r -= alpha * ap;
    const double rs_new = r.squaredNorm();
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  Field<double> out(grid);
  out.values = x.array();
  return out;
}

// --- weighted potential -----------------------------------------------------------
// Q = (q1 - q2) e^{n/4} r^{-2s} e^{i J(q1-q2)}; the weight induced by the polar
// GO amplitudes in the pairing (J = 0 for s > 1/2, the potential phase for
// s = 1/2 along rays from the chart base).

struct WeightedPotential {
  Field<double> Q;
  Field<double> weight;  // Q = (q1 - q2) * weight
};

inline WeightedPotential weighted_potential(const Medium& med, const Field<double>& q1,
                                            const Field<double>& q2, const PolarChart& chart) {
  const auto& g = q1.grid;
  if (!q2.grid.same_as(g)) throw DomainError("potential grids must match");
  const int n = med.dim;
  const double s = med.s;
  // hypothesis: q1 = q2 outside Omega
  double outside = 0.0, scale = 0.0;
  for (Eigen::Index f = 0; f < g.points(); ++f) {
    const double d = std::abs(q1.values[f] - q2.values[f]);
    scale = std::max(scale, d);
    if (!med.omega.contains(g.point(f / g.sizes[1], f % g.sizes[1]), n))
      outside = std::max(outside, d);
  }
  if (scale > 0 && outside > 1e-10 * scale)
    throw DomainError("potentials must agree outside the domain");

  WeightedPotential out{Field<double>(g), Field<double>(g)};
  const std::complex<double> I(0.0, 1.0);
  for (Eigen::Index f = 0; f < g.points(); ++f) {
    const Vec2d x = g.point(f / g.sizes[1], f % g.sizes[1]);
    if (!med.omega.contains(x, n)) continue;
    double J = 0.0;
    if (s == 0.5) {
      // J(q1 - q2) = -int (q1 - q2)/r d rho along the chart ray to x
      if (chart.euclidean) {
        const Vec2d d = x - chart.center;
        const int m = 200;
        for (int k = 0; k < m; ++k) {
          const Vec2d pos = chart.center + d * (k + 0.5) / m;
          J -= (interp_bilinear(q1, Vec2<double>(pos)) - interp_bilinear(q2, Vec2<double>(pos)))
                   .real() /
               med.r(pos) * (chart.r_const * d.norm() / m);
        }
      } else {
        throw DomainError("s = 1/2 weighted potential needs the euclidean chart fast path");
      }
    }
    const std::complex<double> w =
        std::exp(0.25 * n) * std::pow(med.r(x), -2.0 * s) * std::exp(I * J);
    out.weight.values[f] = w;
    out.Q.values[f] = (q1.values[f] - q2.values[f]) * w;
  }
  return out;
}

inline Field<double> unweight_potential(const WeightedPotential& wp, const Field<double>& Qhat) {
  Field<double> out(Qhat.grid);
  for (Eigen::Index f = 0; f < Qhat.grid.points(); ++f) {
    const auto w = wp.weight.values[f];
    out.values[f] = std::abs(w) > 1e-14 ? Qhat.values[f] / w : 0.0;
  }
  return out;
}

// --- pairing ---------------------------------------------------------------------

inline std::complex<double> alessandrini_pairing(const Medium& med, const Field<double>& q1,
                                                 const Field<double>& q2, const Field<double>& u1,
                                                 const Field<double>& u2) {
  const auto& g = u1.grid;
  require_finite(u1, "pairing u1");
  require_finite(u2, "pairing u2");
  const auto mask = med.omega.mask(g);
  std::complex<double> acc = 0.0;
  for (Eigen::Index f = 0; f < g.points(); ++f)
    if (mask[f] > 0.0)
      acc += (q1.values[f] - q2.values[f]).real() * u1.values[f] * std::conj(u2.values[f]);
  return acc * g.cell();
}

// --- stability-theory formulas ----------------------------------------------------

inline double alpha1_exponent(double s) {
  if (s < 0.5 || s >= 1.0)
    throw RegimeError(
        "the ray-transform reduction requires s in [1/2,1): below 1/2 the construction carries "
        "extra phase functions that do not follow the geodesics (see README, regime restrictions)");
  return s == 0.5 ? 1.0 : 2.0 * s - 1.0;
}

inline double optimal_tau(double delta, double s) {
  if (!(delta > 0.0) || !(delta < 1.0)) throw DomainError("noise level must lie in (0,1)");
  return std::pow(delta, -1.0 / (2.0 * s + alpha1_exponent(s)));
}

inline double predicted_gamma(double s, double t_M) {
  if (!(t_M >= 1.0)) throw DomainError("Sobolev order t_M must be >= 1");
  const double a1 = alpha1_exponent(s);
  return a1 / (4.0 * s + 2.0 * a1) * (t_M / (t_M + 1.0));
}

// --- stability experiment -----------------------------------------------------------

struct StabilityConfig {
  double s = 0.75;
  std::vector<double> deltas{1e-2, 3.16e-3, 1e-3, 3.16e-4, 1e-4, 3.16e-5, 1e-5};
  int seeds = 3;
  int n_base = 48, n_dir = 96;
  int grid_n = 64;
  double grid_period = 2.5;
  int cg_iterations = 20;
  double lambda = 0.15;
  double t_M = 4.0;
  double phantom_amp = 1.0;
  double phantom_sigma = 0.4;
  Vec2d phantom_center{0.15, -0.1};
  unsigned base_seed = 1789;
  bool synth_by_pairing = false;
  int jobs = 1;  // delta cells run concurrently
};

struct StabilityCell {
  double delta = 0, tau = 0, noise_std = 0;
  std::vector<double> errors;  // one per seed
  double median_error = 0;
};

struct StabilityReport {
  StabilityConfig config;
  std::vector<StabilityCell> cells;
  double fitted_exponent = 0;
  double gamma_pred = 0;
  double noiseless_floor = 0;
  json to_json() const {
    json cs = json::array();
    for (const auto& c : cells)
      cs.push_back({{"delta", c.delta},
                    {"tau", c.tau},
                    {"noise_std", c.noise_std},
                    {"errors", c.errors},
                    {"median_error", c.median_error}});
    return json{{"s", config.s},
                {"t_M", config.t_M},
                {"cells", cs},
                {"fitted_exponent", fitted_exponent},
                {"gamma_pred", gamma_pred},
                {"noiseless_floor", noiseless_floor},
                {"lambda", config.lambda},
                {"cg_iterations", config.cg_iterations},
                {"seeds", config.seeds},
                {"base_seed", config.base_seed},
                {"note",
                 "delta enters through a calibrated noise injection at level delta tau^{2s}; the "
                 "Cauchy-data distance itself is not computable at desk scale"}};
  }
};

// Smooth phantom supported strictly inside the unit disk.
inline double stability_phantom(const StabilityConfig& cfg, const Vec2d& x) {
  double psi, dpsi, ddpsi;
  detail::rolloff((x.norm() - 0.7) / 0.25, psi, dpsi, ddpsi);
  return cfg.phantom_amp * std::exp(-(x - cfg.phantom_center).squaredNorm() /
                                    (cfg.phantom_sigma * cfg.phantom_sigma)) *
         psi;
}

inline StabilityReport stability_experiment(const StabilityConfig& cfg) {
  const double s = cfg.s;
  alpha1_exponent(s);  // regime gate
  Medium med(ConstantIndex{1.0}, PotentialZero{}, s, Omega::disk({0, 0}, 1.0));
  GridD grid = GridD::centered_square(2, cfg.grid_n, cfg.grid_period);
  auto geo = XRayGeometry::fan_disk(cfg.n_base, cfg.n_dir, 1.25);

  // the constant weight at r = 1, n = 2 (J = 0 for s > 1/2)
  const double weight = std::exp(0.5);
  auto Qfun = [&](const Vec2d& x) {
    return std::complex<double>(weight * stability_phantom(cfg, x), 0.0);
  };
  XRayData clean = ray_transform(med, Qfun, geo);
  const double rms = std::sqrt(clean.values.squaredNorm() / double(clean.values.size()));

  Field<double> truth(grid);
  for (Eigen::Index f = 0; f < grid.points(); ++f)
    truth.values[f] = stability_phantom(cfg, grid.point(f / grid.sizes[1], f % grid.sizes[1]));
  const auto mask = med.omega.mask(grid);
  const double truth_norm = l2_norm_weighted(truth, mask);

  auto recover_error = [&](const Eigen::VectorXcd& data_values) {
    XRayData d;
    d.geom = geo;
    d.values = data_values;
    Field<double> Qhat = invert_cg(d, grid, med.omega, cfg.cg_iterations, cfg.lambda);
    Field<double> qhat(grid);
    qhat.values = Qhat.values / weight;
    Field<double> err(grid);
    err.values = qhat.values - truth.values;
    return l2_norm_weighted(err, mask) / truth_norm;
  };

  StabilityReport rep;
  rep.config = cfg;
  rep.gamma_pred = predicted_gamma(s, cfg.t_M);
  rep.noiseless_floor = recover_error(clean.values);

  auto run_cell = [&](double delta) {
    StabilityCell cell;
    cell.delta = delta;
    cell.tau = optimal_tau(delta, s);
    cell.noise_std = delta * std::pow(cell.tau, 2.0 * s) * rms;
    for (int seed = 0; seed < cfg.seeds; ++seed) {
      std::mt19937 rng(cfg.base_seed + 7919 * seed + unsigned(1e4 * -std::log10(delta)));
      std::normal_distribution<double> gauss(0.0, cell.noise_std / std::sqrt(2.0));
      Eigen::VectorXcd noisy = clean.values;
      for (Eigen::Index i = 0; i < noisy.size(); ++i)
        noisy[i] += std::complex<double>(gauss(rng), gauss(rng));
      cell.errors.push_back(recover_error(noisy));
    }
    std::vector<double> sorted = cell.errors;
    std::sort(sorted.begin(), sorted.end());
    cell.median_error = sorted[sorted.size() / 2];
    return cell;
  };
  std::vector<double> ds, errs;
  if (cfg.jobs > 1) {
    std::vector<std::future<StabilityCell>> futs;
    for (double delta : cfg.deltas)
      futs.push_back(std::async(std::launch::async, run_cell, delta));
    for (auto& f : futs) rep.cells.push_back(f.get());
  } else {
    for (double delta : cfg.deltas) rep.cells.push_back(run_cell(delta));
  }
  for (const auto& c : rep.cells) {
    ds.push_back(c.delta);
    errs.push_back(c.median_error);
  }
  rep.fitted_exponent = fit_loglog(ds, errs).slope;
  return rep;
}

}  // namespace fracgo
