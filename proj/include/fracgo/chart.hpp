#pragma once

#include "fracgo/rays.hpp"

namespace fracgo {

// Polar normal chart (rho, theta) around a base point p outside the closed
// domain: forward map by the traced fan, inverse by a per-cell lookup table
// with parabolic refinement across neighbor rays. For a constant index the
// chart is exact and closed-form.
struct PolarChart {
  Vec2d center = Vec2d::Zero();
  bool euclidean = false;  // r == 1: rho = |x - p|, theta = atan2
  double r_const = 1.0;

  // fan geometry (generic path)
  double theta_lo = 0.0, theta_hi = 0.0;
  int n_theta = 0;
  double drho = 0.0;
  int shell0 = 1;  // first tabulated shell sits at rho = shell0 * drho
  // per ray j, per shell k at rho = (k+1)*drho: position / spreading / trP / r / q
  std::vector<std::vector<TransportSample>> table;
  std::vector<TransportRay> fan;

  // inverse table on the grid
  GridD grid;
  Eigen::ArrayXd rho_of;
  Eigen::ArrayXd theta_of;
  Eigen::Array<bool, Eigen::Dynamic, 1> covered;

  double theta_of_index(int j) const {
    return theta_lo + (theta_hi - theta_lo) * j / std::max(1, n_theta - 1);
  }

  Vec2d forward(double rho, double theta) const {
    if (euclidean) return center + rho / r_const * Vec2d(std::cos(theta), std::sin(theta));
    return interp_sample(rho, theta).x;
  }

  std::pair<double, double> inverse(const Vec2d& x) const {
    if (euclidean) {
      const Vec2d d = x - center;
      return {r_const * d.norm(), std::atan2(d[1], d[0])};
    }
    const auto idx = grid.nearest(Vec2<double>(x));
    const Eigen::Index f = grid.flat(idx[0], idx[1]);
    if (!covered[f]) throw CoverageError("polar chart does not cover the queried point");
    return {rho_of[f], theta_of[f]};
  }

  // Catmull-Rom across rays and shells for any tabulated quantity.
  TransportSample interp_sample(double rho, double theta) const {
    auto pick = [&](int j, int k) -> const TransportSample& {
      j = std::clamp(j, 0, n_theta - 1);
      while (table[size_t(j)].empty() && j + 1 < n_theta) ++j;
      while (table[size_t(j)].empty() && j > 0) --j;
      const auto& row = table[size_t(j)];
      k = std::clamp(k, 0, int(row.size()) - 1);
      return row[size_t(k)];
    };
    const double fj = (theta - theta_lo) / (theta_hi - theta_lo) * (n_theta - 1);
    const double fk = rho / drho - shell0;
    const int j0 = int(std::floor(fj)), k0 = int(std::floor(fk));
    const double tj = fj - j0, tk = fk - k0;
    auto w = [](double t, int a) {
      switch (a) {
        case -1: return ((-0.5 * t + 1.0) * t - 0.5) * t;
        case 0: return (1.5 * t - 2.5) * t * t + 1.0;
        case 1: return ((-1.5 * t + 2.0) * t + 0.5) * t;
        default: return (0.5 * t - 0.5) * t * t;
      }
    };
    TransportSample out;
    out.x.setZero();
    out.xi.setZero();
    double sp = 0, trp = 0, rr = 0, qq = 0, rho_acc = 0;
    for (int a = -1; a <= 2; ++a)
      for (int b = -1; b <= 2; ++b) {
        const double ww = w(tj, a) * w(tk, b);
        const auto& smp = pick(j0 + a, k0 + b);
        out.x += ww * smp.x;
        out.xi += ww * smp.xi;
        sp += ww * smp.spreading;
        trp += ww * smp.trP;
        rr += ww * smp.r;
        qq += ww * smp.q;
        rho_acc += ww * smp.rho;
      }
    out.spreading = sp;
    out.trP = trp;
    out.r = rr;
    out.q = qq;
    out.rho = rho_acc;
    return out;
  }
};

struct ChartOptions {
  int n_theta = 257;
  double h_ode = 2e-3;
  double rho_start = 0.02;
  double stop_radius = 1.25;
  double t_budget = 50.0;
};

inline PolarChart chart_euclidean(const Vec2d& p, const GridD& g, double r_const = 1.0) {
  PolarChart c;
  c.center = p;
  c.euclidean = true;
  c.r_const = r_const;
  c.grid = g;
  return c;
}

inline PolarChart build_polar_chart(const Medium& med, const Vec2d& p, const GridD& g,
                                    const Omega& cover, const ChartOptions& opt = {}) {
  if (med.omega.contains(p, med.dim)) throw DomainError("chart base point must lie outside the domain");
  if (auto* c = std::get_if<ConstantIndex>(&med.index)) return chart_euclidean(p, g, c->r0);

  PolarChart chart;
  chart.center = p;
  chart.grid = g;
  chart.n_theta = opt.n_theta;

  // angular window: directions from p toward the cover region, padded
  const Vec2d to_center = (cover.kind == Omega::Kind::Disk ? cover.center : Vec2d(0.5 * (cover.lo + cover.hi))) - p;
  const double dist = to_center.norm();
  const double span = cover.kind == Omega::Kind::Disk ? cover.radius : 0.5 * (cover.hi - cover.lo).norm();
  const double half = std::asin(std::min(0.95, span / dist)) * 1.25;
  const double theta_c = std::atan2(to_center[1], to_center[0]);
  chart.theta_lo = theta_c - half;
  chart.theta_hi = theta_c + half;

  RayTraceOptions ropt;
  ropt.h_ode = opt.h_ode;
  ropt.stop_radius = opt.stop_radius;
  ropt.t_budget = opt.t_budget;

  chart.fan.reserve(size_t(opt.n_theta));
  double rho_max = 0.0;
  for (int j = 0; j < opt.n_theta; ++j) {
    chart.fan.push_back(
        trace_transport_ray(med, p, chart.theta_lo + (chart.theta_hi - chart.theta_lo) * j / (opt.n_theta - 1), ropt, opt.rho_start));
    rho_max = std::max(rho_max, chart.fan.back().samples.back().rho);
  }

  // resample every ray at uniform rho shells starting past the analytic
  // near-field segment
  chart.drho = opt.h_ode;  // rho step close to t step (r near 1)
  chart.shell0 = int(std::ceil(opt.rho_start / chart.drho)) + 1;
  const int n_shell = int(rho_max / chart.drho) + 1;
  chart.table.assign(size_t(opt.n_theta), {});
  for (int j = 0; j < opt.n_theta; ++j) {
    const auto& smp = chart.fan[size_t(j)].samples;
    auto& row = chart.table[size_t(j)];
    size_t cursor = 0;
    for (int k = 0; k < n_shell; ++k) {
      const double rho = (k + chart.shell0) * chart.drho;
      if (rho > smp.back().rho) break;
      while (cursor + 1 < smp.size() && smp[cursor + 1].rho < rho) ++cursor;
      if (cursor + 1 >= smp.size()) break;
      const auto& a = smp[cursor];
      const auto& b = smp[cursor + 1];
      const double t = (rho - a.rho) / (b.rho - a.rho);
      TransportSample mix;
      mix.t = (1 - t) * a.t + t * b.t;
      mix.x = (1 - t) * a.x + t * b.x;
      mix.xi = (1 - t) * a.xi + t * b.xi;
      mix.rho = rho;
      mix.r = (1 - t) * a.r + t * b.r;
      mix.q = (1 - t) * a.q + t * b.q;
      // trP behaves like 1/rho near the base; interpolate trP * rho instead
      mix.trP = ((1 - t) * a.trP * a.rho + t * b.trP * b.rho) / rho;
      mix.spreading = (1 - t) * a.spreading + t * b.spreading;
      row.push_back(mix);
    }
  }

  // inverse lookup: nearest-sample seeding, then parabolic theta refinement
  chart.rho_of = Eigen::ArrayXd::Zero(g.points());
  chart.theta_of = Eigen::ArrayXd::Zero(g.points());
  chart.covered = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(g.points(), false);
  Eigen::ArrayXd best = Eigen::ArrayXd::Constant(g.points(), std::numeric_limits<double>::infinity());
  Eigen::ArrayXi ray_of = Eigen::ArrayXi::Constant(g.points(), -1);

  const Omega target = cover;
  for (int j = 0; j < opt.n_theta; ++j)
    for (const auto& smp : chart.table[size_t(j)]) {
      if (target.signed_dist(smp.x, med.dim) > 4.0 * g.spacing(0)) continue;
      const auto idx = g.nearest(Vec2<double>(smp.x));
      for (Eigen::Index a = std::max<Eigen::Index>(0, idx[0] - 1); a <= std::min(g.sizes[0] - 1, idx[0] + 1); ++a)
        for (Eigen::Index b = std::max<Eigen::Index>(0, idx[1] - 1); b <= std::min(g.sizes[1] - 1, idx[1] + 1); ++b) {
          const Eigen::Index f = g.flat(a, b);
          const double d = (Vec2d(g.point(a, b)) - smp.x).norm();
          if (d < best[f]) {
            best[f] = d;
            chart.rho_of[f] = smp.rho;
            chart.theta_of[f] = chart.theta_of_index(j);
            ray_of[f] = j;
          }
        }
    }

  // refine: distance to ray(theta) is locally quadratic in theta; fit through
  // the best ray and its neighbors, then recompute rho by projection
  auto project_on_ray = [&](int j, const Vec2d& x, double rho_seed) {
    const auto& row = chart.table[size_t(j)];
    if (row.empty()) return std::pair<double, double>(1e300, rho_seed);
    int k = std::clamp(int(rho_seed / chart.drho) - 1, 0, int(row.size()) - 1);
    // walk to the locally closest shell
    auto d2 = [&](int kk) { return (row[size_t(kk)].x - x).squaredNorm(); };
    while (k + 1 < int(row.size()) && d2(k + 1) < d2(k)) ++k;
    while (k > 0 && d2(k - 1) < d2(k)) --k;
    // project onto the segment through neighbors
    const Vec2d xa = row[size_t(k)].x;
    const Vec2d tau = row[size_t(k)].xi / row[size_t(k)].xi.norm();
    const double along = (x - xa).dot(tau);
    const double rho = row[size_t(k)].rho + along * row[size_t(k)].r;  // d rho = r ds
    const double dist2 = (x - (xa + along * tau)).squaredNorm();
    return std::pair<double, double>(dist2, rho);
  };

  const double dtheta = (chart.theta_hi - chart.theta_lo) / (opt.n_theta - 1);
  for (Eigen::Index f = 0; f < g.points(); ++f) {
    if (ray_of[f] < 0) {
      if (target.signed_dist(g.point(f / g.sizes[1], f % g.sizes[1]), med.dim) < 0)
        throw CoverageError("polar chart fan leaves a domain cell uncovered; refine theta sampling");
      continue;
    }
    const Vec2d x = g.point(f / g.sizes[1], f % g.sizes[1]);
    const int j = ray_of[f];
    const int jm = std::max(0, j - 1), jp = std::min(opt.n_theta - 1, j + 1);
    auto [d0, rho0] = project_on_ray(j, x, chart.rho_of[f]);
    auto [dm, rhom] = project_on_ray(jm, x, chart.rho_of[f]);
    auto [dp, rhop] = project_on_ray(jp, x, chart.rho_of[f]);
    double theta = chart.theta_of_index(j), rho = rho0;
    if (jm < j && jp > j && std::isfinite(dm) && std::isfinite(dp)) {
      const double denom = dm - 2.0 * d0 + dp;
      if (denom > 1e-30) {
        const double shift = 0.5 * (dm - dp) / denom;  // in units of dtheta
        const double cl = std::clamp(shift, -1.0, 1.0);
        theta += cl * dtheta;
        // quadratic interp of rho across the three rays
        rho = rho0 + cl * 0.5 * (rhop - rhom) + cl * cl * 0.5 * (rhop - 2 * rho0 + rhom);
      }
    }
    chart.rho_of[f] = rho;
    chart.theta_of[f] = theta;
    chart.covered[f] = true;
  }
  return chart;
}

// Round-trip diagnostic: max |x - forward(inverse(x))| over covered cells of
// the target region.
inline double chart_round_trip_error(const PolarChart& chart, const Omega& target, int dim = 2) {
  const auto& g = chart.grid;
  double worst = 0.0;
  for (Eigen::Index i0 = 0; i0 < g.sizes[0]; ++i0)
    for (Eigen::Index i1 = 0; i1 < g.sizes[1]; ++i1) {
      const Vec2d x = g.point(i0, i1);
      if (!target.contains(x, dim)) continue;
      auto [rho, theta] = chart.inverse(x);
      worst = std::max(worst, (chart.forward(rho, theta) - x).norm());
    }
  return worst;
}

}  // namespace fracgo
