#pragma once

#include "fracgo/multiplier.hpp"

namespace fracgo {

// Normalization constant of the singular-integral form of (-Delta)^s.
inline double frac_constant(int n, double s) {
  if (!(s > 0.0) || s >= 1.0) throw DomainError("singular-integral constant needs s in (0,1)");
  return std::pow(4.0, s) * std::tgamma(0.5 * n + s) /
         (std::pow(std::numbers::pi, 0.5 * n) * std::abs(std::tgamma(-s)));
}

struct PointOracleConfig {
  double ball_cells = 2.0;     // Taylor ball radius, in grid spacings
  double annulus_cells = 16.0; // polar quadrature out to this radius
  int shells = 48;             // radial Gauss points across the annulus
  int half_angles = 64;        // antipodal angle pairs (2-D)
  double refine_rtol = 2e-2;   // coarse/fine estimates must agree this well
};

namespace detail {

// 16-point Gauss-Legendre nodes/weights on [-1,1].
inline const std::array<double, 16>& gauss16_x() {
  static const std::array<double, 16> x = {
      -0.9894009349916499, -0.9445750230732326, -0.8656312023878318, -0.7554044083550030,
      -0.6178762444026438, -0.4580167776572274, -0.2816035507792589, -0.0950125098376374,
      0.0950125098376374,  0.2816035507792589,  0.4580167776572274,  0.6178762444026438,
      0.7554044083550030,  0.8656312023878318,  0.9445750230732326,  0.9894009349916499};
  return x;
}
inline const std::array<double, 16>& gauss16_w() {
  static const std::array<double, 16> w = {
      0.0271524594117541, 0.0622535239386479, 0.0951585116824928, 0.1246289712555339,
      0.1495959888165767, 0.1691565193950025, 0.1826034150449236, 0.1894506104550685,
      0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
      0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};
  return w;
}

struct OracleWorkspace {
  const Field<double>* u;
  double s;
  Field<double> lap;    // -|k|^2 symbol applied: Laplacian of u
  Field<double> bilap;  // |k|^4: biharmonic
  OracleWorkspace(const Field<double>& u_, double s_) : u(&u_), s(s_) {
    SymbolPolynomial neg_lap;
    neg_lap.terms.push_back({std::complex<double>(-1.0, 0.0), 1, 0});
    lap = apply_multiplier(u_, neg_lap);
    SymbolPolynomial bi;
    bi.terms.push_back({std::complex<double>(1.0, 0.0), 2, 0});
    bilap = apply_multiplier(u_, bi);
  }
};

// Distance from x to the box boundary along direction w (2-D).
inline double ray_box_exit(const GridD& g, const Eigen::Vector2d& x, const Eigen::Vector2d& w) {
  double t = std::numeric_limits<double>::infinity();
  for (int a = 0; a < g.dim; ++a) {
    if (w[a] > 1e-15) t = std::min(t, (g.origin[a] + g.periods[a] - x[a]) / w[a]);
    else if (w[a] < -1e-15) t = std::min(t, (g.origin[a] - x[a]) / w[a]);
  }
  return t;
}

inline std::complex<double> oracle_pass(const OracleWorkspace& ws, const Eigen::Vector2d& x,
                                        const PointOracleConfig& cfg) {
  const auto& u = *ws.u;
  const auto& g = u.grid;
  const int n = g.dim;
  const double s = ws.s;
  const double h = std::max(g.spacing(0), n == 2 ? g.spacing(1) : 0.0);
  const double r0 = cfg.ball_cells * h;
  const double r1 = cfg.annulus_cells * h;
  const double surf = (n == 1) ? 2.0 : 2.0 * std::numbers::pi;

  const std::complex<double> ux = interp_bicubic(u, Vec2<double>(x));
  const std::complex<double> lap_x = interp_bicubic(ws.lap, Vec2<double>(x));
  const std::complex<double> bilap_x = interp_bicubic(ws.bilap, Vec2<double>(x));

  // Ball |z| < r0: PV kills odd Taylor orders; second and fourth survive.
  std::complex<double> acc = -0.5 * lap_x * (surf / n) * std::pow(r0, 2.0 - 2.0 * s) / (2.0 - 2.0 * s);
  acc -= bilap_x / 8.0 * surf / (n * (n + 2.0)) * std::pow(r0, 4.0 - 2.0 * s) / (4.0 - 2.0 * s);

  // Annulus r0 <= |z| < r1: polar Gauss quadrature with antipodal pairing, so
  // the gradient part cancels exactly instead of numerically.
  const auto& gx = gauss16_x();
  const auto& gw = gauss16_w();
  const int seg = (cfg.shells + 15) / 16;
  const double lr0 = std::log(r0), lr1 = std::log(r1);
  for (int sg = 0; sg < seg; ++sg) {
    const double la = lr0 + (lr1 - lr0) * sg / seg;
    const double lb = lr0 + (lr1 - lr0) * (sg + 1) / seg;
    for (int q = 0; q < 16; ++q) {
      const double lr = 0.5 * (la + lb) + 0.5 * (lb - la) * gx[q];
      const double rho = std::exp(lr);
      const double wr = 0.5 * (lb - la) * gw[q] * rho;  // d rho = rho d(log rho)
      if (n == 1) {
        const std::complex<double> pair =
            2.0 * ux - interp_bicubic(u, Vec2<double>(x[0] + rho, 0.0)) -
            interp_bicubic(u, Vec2<double>(x[0] - rho, 0.0));
        acc += pair * std::pow(rho, -1.0 - 2.0 * s) * wr;
      } else {
        for (int a = 0; a < cfg.half_angles; ++a) {
          const double phi = std::numbers::pi * (a + 0.5) / cfg.half_angles;
          const Eigen::Vector2d w(std::cos(phi), std::sin(phi));
          const std::complex<double> pair =
              2.0 * ux - interp_bicubic(u, Vec2<double>(x + rho * w)) -
              interp_bicubic(u, Vec2<double>(x - rho * w));
          acc += pair * std::pow(rho, -2.0 - 2.0 * s) * rho * wr *
                 (std::numbers::pi / cfg.half_angles);
        }
      }
    }
  }

  // Outer region |z| >= r1, per direction: the u(x)-part integrates to the
  // closed form u(x) r1^{-2s}/(2s) (u vanishes beyond the box), the -u(y)
  // part is a smooth polar quadrature out to the box exit.
  auto outer_ray = [&](const Eigen::Vector2d& w, double weight) {
    const double exit = ray_box_exit(g, x, w);
    std::complex<double> ray_acc = ux * std::pow(r1, -2.0 * s) / (2.0 * s);
    const int nseg = std::max(2, int(std::ceil(std::log2(exit / r1))) + 1);
    const double la = std::log(r1), lb = std::log(exit);
    for (int sg = 0; sg < nseg; ++sg) {
      const double sa = la + (lb - la) * sg / nseg;
      const double sb = la + (lb - la) * (sg + 1) / nseg;
      for (int q = 0; q < 16; ++q) {
        const double rho = std::exp(0.5 * (sa + sb) + 0.5 * (sb - sa) * gx[q]);
        const double wr = 0.5 * (sb - sa) * gw[q] * rho;
        ray_acc -= interp_bicubic(u, Vec2<double>(x + rho * w)) *
                   std::pow(rho, -double(n) - 2.0 * s) * std::pow(rho, n - 1.0) * wr;
      }
    }
    acc += ray_acc * weight;
  };
  if (n == 1) {
    outer_ray({1.0, 0.0}, 1.0);
    outer_ray({-1.0, 0.0}, 1.0);
  } else {
    const int nd = 2 * cfg.half_angles;
    for (int a = 0; a < nd; ++a) {
      const double phi = 2.0 * std::numbers::pi * (a + 0.5) / nd;
      outer_ray({std::cos(phi), std::sin(phi)}, 2.0 * std::numbers::pi / nd);
    }
  }

  return frac_constant(n, s) * acc;
}

}  // namespace detail

// Principal-value quadrature of the singular-integral form of (-Delta)^s at a
// point. Used only as a cross-check oracle for the spectral path; never on the
// solve path.
inline std::complex<double> frac_lap_point_oracle(const Field<double>& u, const Eigen::Vector2d& x,
                                                  double s, const PointOracleConfig& cfg = {}) {
  if (!(s > 0.0) || s >= 1.0) throw DomainError("point oracle needs s in (0,1)");
  const auto& g = u.grid;
  for (int a = 0; a < g.dim; ++a)
    if (!(x[a] > g.origin[a] + 2 * g.spacing(a) && x[a] < g.origin[a] + g.periods[a] - 2 * g.spacing(a)))
      throw DomainError("oracle point must lie strictly inside the box");
  // Decay precondition: boundary samples must be negligible.
  double edge = 0.0, peak = 0.0;
  for (Eigen::Index i0 = 0; i0 < g.sizes[0]; ++i0)
    for (Eigen::Index i1 = 0; i1 < g.sizes[1]; ++i1) {
      const double v = std::abs(u.values[g.flat(i0, i1)]);
      peak = std::max(peak, v);
      if (i0 == 0 || i0 == g.sizes[0] - 1 || (g.dim == 2 && (i1 == 0 || i1 == g.sizes[1] - 1)))
        edge = std::max(edge, v);
    }
  if (peak > 0 && edge > 1e-10 * peak)
    throw DomainError("oracle input does not decay before the box boundary");

  detail::OracleWorkspace ws(u, s);
  const std::complex<double> coarse = detail::oracle_pass(ws, x, cfg);
  PointOracleConfig fine = cfg;
  fine.ball_cells = 0.5 * cfg.ball_cells;
  fine.shells = 2 * cfg.shells;
  fine.half_angles = 2 * cfg.half_angles;
  const std::complex<double> refined = detail::oracle_pass(ws, x, fine);
  const double scale = std::max({std::abs(coarse), std::abs(refined), 1e-12});
  if (std::abs(coarse - refined) > cfg.refine_rtol * scale)
    throw QuadratureError("point oracle refinement did not converge", std::abs(coarse),
                          std::abs(refined));
  return refined;
}

}  // namespace fracgo
