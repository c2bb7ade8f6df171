#pragma once

#include <fstream>

#include "fracgo/eikonal.hpp"

namespace fracgo {

// Characteristics of |grad phi|^2 = r^2: xd = xi, xid = r grad r, with the
// phase accumulating at rate r^2 (the travel-metric arclength rho).
struct RaySample {
  double t = 0.0;
  Vec2d x = Vec2d::Zero();
  Vec2d xi = Vec2d::Zero();
  double rho = 0.0;
};

struct Ray {
  std::vector<RaySample> samples;
  bool exited = false;
  double t_exit = 0.0;
  double rho_exit = 0.0;
  double hamiltonian_drift = 0.0;  // max |(|xi|^2 - r^2)| / r^2 along the ray
};

struct RayTraceOptions {
  double h_ode = 1e-3;
  double t_budget = 50.0;
  double stop_radius = 1.25;        // exit circle (Omega' boundary), centered at origin
  bool stop_on_exit = true;
};

namespace detail {

struct RayState {
  Vec2d x, xi;
  double rho;
};

inline RayState ray_rhs(const Medium& med, const RayState& s) {
  RayState d;
  d.x = s.xi;
  const double r = med.r(s.x);
  d.xi = r * med.grad_r(s.x);
  d.rho = r * r;
  return d;
}

inline RayState ray_axpy(const RayState& a, double h, const RayState& b) {
  return {a.x + h * b.x, a.xi + h * b.xi, a.rho + h * b.rho};
}

inline RayState rk4_step(const Medium& med, const RayState& s, double h) {
  const RayState k1 = ray_rhs(med, s);
  const RayState k2 = ray_rhs(med, ray_axpy(s, 0.5 * h, k1));
  const RayState k3 = ray_rhs(med, ray_axpy(s, 0.5 * h, k2));
  const RayState k4 = ray_rhs(med, ray_axpy(s, h, k3));
  RayState out = s;
  out.x += h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
  out.xi += h / 6.0 * (k1.xi + 2.0 * k2.xi + 2.0 * k3.xi + k4.xi);
  out.rho += h / 6.0 * (k1.rho + 2.0 * k2.rho + 2.0 * k3.rho + k4.rho);
  return out;
}

}  // namespace detail

inline Ray trace_ray(const Medium& med, const Vec2d& x0, const Vec2d& xi0,
                     const RayTraceOptions& opt = {}) {
  const double r0 = med.r(x0);
  if (std::abs(xi0.norm() - r0) > 1e-10 * std::max(1.0, r0))
    throw DomainError("ray covector must satisfy |xi0| = r(x0)");

  Ray ray;
  detail::RayState s{x0, xi0, 0.0};
  double t = 0.0;
  ray.samples.push_back({t, s.x, s.xi, s.rho});

  auto radius = [&](const Vec2d& x) { return med.dim == 2 ? x.norm() : std::abs(x[0]); };
  const bool started_inside = radius(x0) < opt.stop_radius;

  while (t < opt.t_budget) {
    detail::RayState next = detail::rk4_step(med, s, opt.h_ode);
    const double tn = t + opt.h_ode;
    const double r_here = med.r(next.x);
    ray.hamiltonian_drift = std::max(
        ray.hamiltonian_drift, std::abs(next.xi.squaredNorm() - r_here * r_here) / (r_here * r_here));
    if (opt.stop_on_exit && started_inside && radius(next.x) >= opt.stop_radius) {
      // bisect the last step onto the exit circle
      double lo = 0.0, hi = opt.h_ode;
      detail::RayState probe = next;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        probe = detail::rk4_step(med, s, mid);
        (radius(probe.x) >= opt.stop_radius ? hi : lo) = mid;
      }
      ray.samples.push_back({t + hi, probe.x, probe.xi, probe.rho});
      ray.exited = true;
      ray.t_exit = t + hi;
      ray.rho_exit = probe.rho;
      return ray;
    }
    s = next;
    t = tn;
    ray.samples.push_back({t, s.x, s.xi, s.rho});
  }
  if (opt.stop_on_exit && started_inside)
    throw TrappedRayError("ray exceeded its parameter budget before exiting");
  ray.exited = false;
  ray.t_exit = t;
  ray.rho_exit = s.rho;
  return ray;
}

// --- variational trace -----------------------------------------------------
// Adds the direction-derivative Jacobi pair (dx, dxi) and recovers the phase
// Hessian along the ray from P [xi, dx] = [r grad r, dxi]; used by transport.

struct TransportSample {
  double t = 0.0;
  Vec2d x = Vec2d::Zero(), xi = Vec2d::Zero();
  double rho = 0.0;
  Vec2d dx = Vec2d::Zero(), dxi = Vec2d::Zero();
  double r = 1.0;
  double q = 0.0;
  double trP = 0.0;        // Laplacian of the phase
  double spreading = 1.0;  // polar area factor S = r |t_hat wedge dx|
};

struct TransportRay {
  std::vector<TransportSample> samples;
  bool exited = false;
  double rho_exit = 0.0;
  double theta = 0.0;
  double min_spreading = 1.0;  // positivity = no conjugate points (simplicity)
};

namespace detail {

struct VarState {
  Vec2d x, xi, dx, dxi;
  double rho;
};

inline VarState var_rhs(const Medium& med, const VarState& s) {
  VarState d;
  d.x = s.xi;
  const double r = med.r(s.x);
  const Vec2d gr = med.grad_r(s.x);
  const Mat2 hr = med.hess_r(s.x);
  d.xi = r * gr;
  // d/dt dxi = Hess(r^2/2) dx = (grad r grad r^T + r Hess r) dx
  d.dxi = (gr * gr.transpose() + r * hr) * s.dx;
  d.dx = s.dxi;
  d.rho = r * r;
  return d;
}

inline VarState var_axpy(const VarState& a, double h, const VarState& b) {
  return {a.x + h * b.x, a.xi + h * b.xi, a.dx + h * b.dx, a.dxi + h * b.dxi, a.rho + h * b.rho};
}

inline VarState var_rk4(const Medium& med, const VarState& s, double h) {
  const VarState k1 = var_rhs(med, s);
  const VarState k2 = var_rhs(med, var_axpy(s, 0.5 * h, k1));
  const VarState k3 = var_rhs(med, var_axpy(s, 0.5 * h, k2));
  const VarState k4 = var_rhs(med, var_axpy(s, h, k3));
  VarState o = s;
  o.x += h / 6.0 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
  o.xi += h / 6.0 * (k1.xi + 2 * k2.xi + 2 * k3.xi + k4.xi);
  o.dx += h / 6.0 * (k1.dx + 2 * k2.dx + 2 * k3.dx + k4.dx);
  o.dxi += h / 6.0 * (k1.dxi + 2 * k2.dxi + 2 * k3.dxi + k4.dxi);
  o.rho += h / 6.0 * (k1.rho + 2 * k2.rho + 2 * k3.rho + k4.rho);
  return o;
}

inline TransportSample make_sample(const Medium& med, const VarState& s, double t) {
  TransportSample out;
  out.t = t;
  out.x = s.x;
  out.xi = s.xi;
  out.rho = s.rho;
  out.dx = s.dx;
  out.dxi = s.dxi;
  out.r = med.r(s.x);
  out.q = med.q(s.x);
  // P [xi dx] = [r grad r, dxi]
  Mat2 M, B;
  M.col(0) = s.xi;
  M.col(1) = s.dx;
  B.col(0) = out.r * med.grad_r(s.x);
  B.col(1) = s.dxi;
  const double det = M.determinant();
  if (std::abs(det) > 1e-12) {
    Mat2 P = B * M.inverse();
    out.trP = P.trace();
  } else {
    out.trP = std::numeric_limits<double>::quiet_NaN();
  }
  const Vec2d that = s.xi / s.xi.norm();
  out.spreading = out.r * std::abs(that[0] * s.dx[1] - that[1] * s.dx[0]);
  return out;
}

}  // namespace detail

// Trace one ray of the fan from base point p in direction theta, carrying the
// Jacobi pair. The initial segment (where r == 1 by hypothesis) is exact:
// x = p + rho w, dx = rho w_perp, trP = (n-1)/rho.
inline TransportRay trace_transport_ray(const Medium& med, const Vec2d& p, double theta,
                                        const RayTraceOptions& opt = {}, double rho_start = 0.02) {
  const Vec2d w(std::cos(theta), std::sin(theta));
  const Vec2d wp(-std::sin(theta), std::cos(theta));
  if (std::abs(med.r(p) - 1.0) > 1e-12)
    throw DomainError("fan base point must lie in the exterior region where r = 1");

  TransportRay out;
  out.theta = theta;
  detail::VarState s{p + rho_start * w, w, rho_start * wp, wp, rho_start};
  double t = rho_start;  // with r = 1 on the initial segment, t = rho there
  out.samples.push_back(detail::make_sample(med, s, t));
  out.min_spreading = out.samples.back().spreading;

  const double R = opt.stop_radius;
  auto rad = [&](const Vec2d& x) { return med.dim == 2 ? x.norm() : std::abs(x[0]); };
  bool was_inside = rad(s.x) < R - 1e-9;
  while (t < opt.t_budget) {
    detail::VarState next = detail::var_rk4(med, s, opt.h_ode);
    const double tn = t + opt.h_ode;
    const bool leaving = (was_inside && rad(next.x) >= R) || rad(next.x) >= 1.2 * R;
    if (leaving) {
      double lo = 0.0, hi = opt.h_ode;
      detail::VarState probe = next;
      const double edge = was_inside ? R : 1.2 * R;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        probe = detail::var_rk4(med, s, mid);
        (rad(probe.x) >= edge ? hi : lo) = mid;
      }
      out.samples.push_back(detail::make_sample(med, probe, t + hi));
      out.exited = true;
      out.rho_exit = probe.rho;
      out.min_spreading = std::min(out.min_spreading, out.samples.back().spreading);
      return out;
    }
    was_inside = was_inside || rad(next.x) < R - 1e-9;
    s = next;
    t = tn;
    out.samples.push_back(detail::make_sample(med, s, t));
    out.min_spreading = std::min(out.min_spreading, out.samples.back().spreading);
  }
  throw TrappedRayError("transport ray exceeded its parameter budget");
}

inline void write_rayfan_csv(const std::vector<TransportRay>& fan, const Vec2d& p,
                             const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.precision(12);
  os << "p_x,p_y,theta,t,x0,x1,xi0,xi1\n";
  for (const auto& ray : fan)
    for (const auto& smp : ray.samples)
      os << p[0] << ',' << p[1] << ',' << ray.theta << ',' << smp.t << ',' << smp.x[0] << ','
         << smp.x[1] << ',' << smp.xi[0] << ',' << smp.xi[1] << '\n';
}

}  // namespace fracgo
