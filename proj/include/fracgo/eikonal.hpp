#pragma once

#include <queue>

#include "fracgo/medium.hpp"

namespace fracgo {

// Phase function with optional analytic derivatives. Sampled values always
// live on a grid; grad/hess closures are set for analytic families and null
// for fast-marched output (use mollified spectral derivatives there).
struct Phase {
  Field<double> values;
  std::function<double(const Vec2d&)> value;
  std::function<Vec2d(const Vec2d&)> grad;
  std::function<Mat2(const Vec2d&)> hess;
  bool analytic = false;

  double operator()(const Vec2d& x) const {
    if (value) return value(x);
    return interp_bicubic(values, Vec2<double>(x)).real();
  }
};

// phi = c * (alpha . x): |grad phi| = c exactly.
inline Phase eikonal_plane(const GridD& g, const Vec2d& alpha, double c) {
  if (std::abs(alpha.norm() - 1.0) > 1e-12) throw DomainError("plane phase direction must be unit");
  Phase p;
  p.analytic = true;
  p.value = [alpha, c](const Vec2d& x) { return c * alpha.dot(x); };
  p.grad = [alpha, c](const Vec2d&) { return Vec2d(c * alpha); };
  p.hess = [](const Vec2d&) { return Mat2::Zero(); };
  p.values = sample_real<double>(g, [&](const Vec2<double>& x) { return c * alpha.dot(x); });
  return p;
}

// phi = c |x - x0| for a constant index r = c.
inline Phase phase_point_source_const(const GridD& g, const Vec2d& x0, double c) {
  Phase p;
  p.analytic = true;
  p.value = [x0, c](const Vec2d& x) { return c * (x - x0).norm(); };
  p.grad = [x0, c](const Vec2d& x) { return Vec2d(c * (x - x0).normalized()); };
  p.hess = [x0, c](const Vec2d& x) {
    const Vec2d d = x - x0;
    const double rho = d.norm();
    const Vec2d h = d / rho;
    return Mat2(c / rho * (Mat2::Identity() - h * h.transpose()));
  };
  p.values = sample_real<double>(g, [&](const Vec2<double>& x) { return p.value(x); });
  return p;
}

// phi = exp(x_0), the plane-type eikonal solution of the exponential slab.
inline Phase phase_exp_slab(const GridD& g) {
  Phase p;
  p.analytic = true;
  p.value = [](const Vec2d& x) { return std::exp(x[0]); };
  p.grad = [](const Vec2d& x) { return Vec2d(std::exp(x[0]), 0.0); };
  p.hess = [](const Vec2d& x) {
    Mat2 h = Mat2::Zero();
    h(0, 0) = std::exp(x[0]);
    return h;
  };
  p.values = sample_real<double>(g, [](const Vec2<double>& x) { return std::exp(x[0]); });
  return p;
}

// --- fast marching -------------------------------------------------------------
// First-order upwind solver for |grad T| = r on the box grid (non-periodic
// stencils; the front never needs to wrap for our window sizes).

inline Phase eikonal_distance(const Medium& med, const Vec2d& x0, const GridD& g) {
  if (med.omega.contains(x0, g.dim)) throw DomainError("eikonal source must lie outside the closed domain");
  const Eigen::Index n0 = g.sizes[0], n1 = g.sizes[1];
  const double INF = std::numeric_limits<double>::infinity();
  Eigen::ArrayXd T = Eigen::ArrayXd::Constant(g.points(), INF);
  enum : uint8_t { kUnknown = 0, kTrial = 1, kKnown = 2 };
  std::vector<uint8_t> state(size_t(g.points()), kUnknown);

  using Entry = std::pair<double, Eigen::Index>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;

  // Exact initialization on the ball around the source where the index is
  // still the exterior constant; this factors out the source singularity that
  // otherwise caps upwind convergence below first order.
  const double r_src = med.r(x0);
  const double h_max = std::max(g.spacing(0), g.dim == 2 ? g.spacing(1) : 0.0);
  double init_radius = std::max(0.8 * med.omega.signed_dist(x0, g.dim), 5.0 * h_max);
  for (int a = 0; a < g.dim; ++a) {
    init_radius = std::min(init_radius, 0.9 * (x0[a] - g.origin[a]));
    init_radius = std::min(init_radius, 0.9 * (g.origin[a] + g.periods[a] - x0[a]));
  }
  // shrink until the index is constant to 5% across the ball (media like the
  // exponential slab vary outside Omega as well)
  while (init_radius > 5.0 * h_max) {
    double vmax = 0.0;
    for (int a = 0; a < 8; ++a) {
      const double ang = 2.0 * std::numbers::pi * a / 8.0;
      const Vec2d probe = g.dim == 2 ? Vec2d(x0 + init_radius * Vec2d(std::cos(ang), std::sin(ang)))
                                     : Vec2d(x0[0] + init_radius * (a % 2 ? 1.0 : -1.0), 0.0);
      vmax = std::max(vmax, std::abs(med.r(probe) - r_src) / r_src);
    }
    if (vmax <= 0.05) break;
    init_radius *= 0.5;
  }
  init_radius = std::max(init_radius, 5.0 * h_max);
  for (Eigen::Index i0 = 0; i0 < n0; ++i0)
    for (Eigen::Index i1 = 0; i1 < n1; ++i1) {
      const Vec2d x = g.point(i0, i1);
      const double d = g.dim == 2 ? (x - x0).norm() : std::abs(x[0] - x0[0]);
      if (d <= init_radius) {
        const Eigen::Index f = g.flat(i0, i1);
        T[f] = r_src * d;
        state[f] = kTrial;
        heap.push({T[f], f});
      }
    }
  if (heap.empty()) throw DomainError("eikonal source lies outside the grid");

  auto update = [&](Eigen::Index i0, Eigen::Index i1) {
    const Eigen::Index f = g.flat(i0, i1);
    const double rr = med.r(g.point(i0, i1));
    const double hx = g.spacing(0), hy = g.dim == 2 ? g.spacing(1) : hx;
    double a = INF, b = INF;
    if (i0 > 0 && state[g.flat(i0 - 1, i1)] == kKnown) a = std::min(a, T[g.flat(i0 - 1, i1)]);
    if (i0 + 1 < n0 && state[g.flat(i0 + 1, i1)] == kKnown) a = std::min(a, T[g.flat(i0 + 1, i1)]);
    if (g.dim == 2) {
      if (i1 > 0 && state[g.flat(i0, i1 - 1)] == kKnown) b = std::min(b, T[g.flat(i0, i1 - 1)]);
      if (i1 + 1 < n1 && state[g.flat(i0, i1 + 1)] == kKnown) b = std::min(b, T[g.flat(i0, i1 + 1)]);
    }
    double cand;
    if (a == INF && b == INF) return;
    if (b == INF) cand = a + rr * hx;
    else if (a == INF) cand = b + rr * hy;
    else {
      // two-sided upwind quadratic (square cells in practice)
      const double h = hx;
      if (std::abs(a - b) >= rr * h) cand = std::min(a, b) + rr * h;
      else cand = 0.5 * (a + b + std::sqrt(2.0 * rr * rr * h * h - (a - b) * (a - b)));
    }
    if (cand < T[f]) {
      T[f] = cand;
      state[f] = kTrial;
      heap.push({cand, f});
    }
  };

  double last = -INF;
  while (!heap.empty()) {
    auto [val, f] = heap.top();
    heap.pop();
    if (state[f] == kKnown) continue;
    if (val > T[f] + 1e-14) continue;  // stale entry
    if (val < last - 1e-9 * (1.0 + std::abs(last)))
      throw FrontError("fast marching produced a non-monotone front");
    last = val;
    state[f] = kKnown;
    const Eigen::Index i0 = f / n1, i1 = f % n1;
    if (i0 > 0) update(i0 - 1, i1);
    if (i0 + 1 < n0) update(i0 + 1, i1);
    if (g.dim == 2) {
      if (i1 > 0) update(i0, i1 - 1);
      if (i1 + 1 < n1) update(i0, i1 + 1);
    }
  }

  Phase p;
  p.analytic = false;
  p.values = Field<double>(g);
  for (Eigen::Index f = 0; f < g.points(); ++f) p.values.values[f] = T[f];
  return p;
}

}  // namespace fracgo
