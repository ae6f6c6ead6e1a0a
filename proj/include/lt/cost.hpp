#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "lt/errors.hpp"
#include "lt/grid.hpp"
#include "lt/linalg.hpp"
#include "lt/util.hpp"

namespace lt {

// Admissible displacement window, kept strictly inside the half-period cut
// locus of the periodic quadratic cost.
struct TwistWindow {
  double max_disp = 0.4;
  double margin = 0.05;

  void validate() const {
    if (!(max_disp > 0.0 && max_disp < 0.5) || !(margin > 0.0) ||
        max_disp + margin > 0.5 + 1e-15)
      throw ConfigError("twist window requires 0 < max_disp and max_disp + margin <= 1/2");
  }
};

// Costs on T^n x T^n with closed-form derivative jets through third order.
//
//   quadratic-periodic:  c = |u|^2/2,  u = minimal representative of x - xbar
//   perturbed-quadratic: adds  eps * prod_a cos(2 pi k_a u_a)
//                        and optionally  eps_sep * cos(2 pi k.x) cos(2 pi k.xbar)
//
// The difference kernel exercises every third-derivative entry the quadratic
// cost annihilates; the separable term makes b depend on x and xbar
// individually.
class CostModel {
 public:
  enum class Kind { QuadraticPeriodic, PerturbedQuadratic };

  static CostModel quadratic(TwistWindow w = {}) {
    CostModel m;
    m.kind_ = Kind::QuadraticPeriodic;
    m.window_ = w;
    w.validate();
    return m;
  }

  static CostModel perturbed(double eps, std::array<int, 3> freq,
                             double eps_sep = 0.0, TwistWindow w = {}) {
    if (eps < 0.0 || eps_sep < 0.0) throw ConfigError("perturbation amplitude must be >= 0");
    w.validate();
    CostModel m;
    m.kind_ = Kind::PerturbedQuadratic;
    m.eps_ = eps;
    m.eps_sep_ = eps_sep;
    m.freq_ = freq;
    m.window_ = w;
    return m;
  }

  Kind kind() const { return kind_; }
  double epsilon() const { return eps_; }
  double separable_epsilon() const { return eps_sep_; }
  const std::array<int, 3>& freq() const { return freq_; }
  const TwistWindow& window() const { return window_; }
  bool is_quadratic() const { return kind_ == Kind::QuadraticPeriodic; }

 private:
  Kind kind_ = Kind::QuadraticPeriodic;
  double eps_ = 0.0;
  double eps_sep_ = 0.0;
  std::array<int, 3> freq_{1, 1, 0};
  TwistWindow window_{};
};

// All cost derivatives at a point pair. b = -c_{i sbar} with inverse b_inv;
// b_x(i,s,j) = d/dx_j b_{i sbar}, b_xbar(i,s,p) = d/dxbar_p b_{i sbar}.
struct CostJet {
  double c = 0.0;
  Vec c_x;      // dc/dx_i
  Vec c_xbar;   // dc/dxbar_s
  Mat c_xx;     // d2c/dx_i dx_j
  Mat b;
  Mat b_inv;
  double det_b = 1.0;
  Ten3 b_x;
  Ten3 b_xbar;
};

namespace cost_detail {

inline void check_window(const CostModel& m, const Vec& disp, int dim) {
  const double lim = 0.5 - m.window().margin;
  for (int a = 0; a < dim; ++a)
    if (std::abs(disp[a]) >= lim)
      throw CutLocusError("displacement " + format_double(disp[a]) + " on axis " +
                          std::to_string(a + 1) + " leaves the admissible window");
}

}  // namespace cost_detail

inline double cost_value(const CostModel& m, const Vec& x, const Vec& xbar, int dim) {
  const Vec d = torus_displacement(x, xbar, dim);
  cost_detail::check_window(m, d, dim);
  double c = 0.0;
  for (int a = 0; a < dim; ++a) c += 0.5 * d[a] * d[a];
  if (!m.is_quadratic()) {
    if (m.epsilon() != 0.0) {
      double prod = m.epsilon();
      for (int a = 0; a < dim; ++a) prod *= std::cos(kTwoPi * m.freq()[static_cast<size_t>(a)] * d[a]);
      c += prod;  // cos is even: the sign of u vs d does not matter here
    }
    if (m.separable_epsilon() != 0.0) {
      double kx = 0.0, kxb = 0.0;
      for (int a = 0; a < dim; ++a) {
        kx += m.freq()[static_cast<size_t>(a)] * x[a];
        kxb += m.freq()[static_cast<size_t>(a)] * xbar[a];
      }
      c += m.separable_epsilon() * std::cos(kTwoPi * kx) * std::cos(kTwoPi * kxb);
    }
  }
  return c;
}

inline CostJet cost_jet(const CostModel& m, const Vec& x, const Vec& xbar, int dim) {
  const Vec disp = torus_displacement(x, xbar, dim);
  cost_detail::check_window(m, disp, dim);
  Vec u;  // minimal representative of x - xbar
  for (int a = 0; a < dim; ++a) u[a] = -disp[a];

  CostJet jet;
  // F(u) = |u|^2/2 + eps * prod_a cos(w_a u_a); derivatives w.r.t. u.
  Vec F1;
  Mat F2;
  Ten3 F3;
  for (int a = 0; a < dim; ++a) {
    F1[a] = u[a];
    F2(a, a) = 1.0;
    jet.c += 0.5 * u[a] * u[a];
  }
  if (!m.is_quadratic() && m.epsilon() != 0.0) {
    const double eps = m.epsilon();
    double w[3], C[3], S[3];
    double prod = 1.0;
    for (int a = 0; a < dim; ++a) {
      w[a] = kTwoPi * m.freq()[static_cast<size_t>(a)];
      C[a] = std::cos(w[a] * u[a]);
      S[a] = std::sin(w[a] * u[a]);
      prod *= C[a];
    }
    auto rest = [&](int skip1, int skip2, int skip3) {
      double r = eps;
      for (int a = 0; a < dim; ++a)
        if (a != skip1 && a != skip2 && a != skip3) r *= C[a];
      return r;
    };
    jet.c += eps * prod;
    for (int i = 0; i < dim; ++i) F1[i] += -w[i] * S[i] * rest(i, -1, -1);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        F2(i, j) += (i == j) ? -w[i] * w[i] * C[i] * rest(i, -1, -1)
                             : w[i] * w[j] * S[i] * S[j] * rest(i, j, -1);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        for (int k = 0; k < dim; ++k) {
          double v;
          if (i == j && j == k) {
            v = w[i] * w[i] * w[i] * S[i] * rest(i, -1, -1);
          } else if (i == j) {
            v = w[i] * w[i] * w[k] * C[i] * S[k] * rest(i, k, -1);
          } else if (i == k) {
            v = w[i] * w[i] * w[j] * C[i] * S[j] * rest(i, j, -1);
          } else if (j == k) {
            v = w[j] * w[j] * w[i] * C[j] * S[i] * rest(i, j, -1);
          } else {
            v = -w[i] * w[j] * w[k] * S[i] * S[j] * S[k] * rest(i, j, k);
          }
          F3(i, j, k) = v;
        }
  }

  // Chain rule: du/dx = +I, du/dxbar = -I.
  for (int i = 0; i < dim; ++i) jet.c_x[i] = F1[i];
  for (int s = 0; s < dim; ++s) jet.c_xbar[s] = -F1[s];
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) jet.c_xx(i, j) = F2(i, j);
  for (int i = 0; i < dim; ++i)
    for (int s = 0; s < dim; ++s) jet.b(i, s) = F2(i, s);  // b = -c_{i sbar} = +F_is
  for (int i = 0; i < dim; ++i)
    for (int s = 0; s < dim; ++s)
      for (int j = 0; j < dim; ++j) jet.b_x(i, s, j) = F3(i, s, j);
  for (int i = 0; i < dim; ++i)
    for (int s = 0; s < dim; ++s)
      for (int p = 0; p < dim; ++p) jet.b_xbar(i, s, p) = -F3(i, s, p);

  // Separable term eps_sep * cos(2 pi k.x) cos(2 pi k.xbar).
  if (!m.is_quadratic() && m.separable_epsilon() != 0.0) {
    const double e2 = m.separable_epsilon();
    double kx = 0.0, kxb = 0.0;
    double kap[3];
    for (int a = 0; a < dim; ++a) {
      kap[a] = kTwoPi * m.freq()[static_cast<size_t>(a)];
      kx += m.freq()[static_cast<size_t>(a)] * x[a];
      kxb += m.freq()[static_cast<size_t>(a)] * xbar[a];
    }
    const double CA = std::cos(kTwoPi * kx), SA = std::sin(kTwoPi * kx);
    const double CB = std::cos(kTwoPi * kxb), SB = std::sin(kTwoPi * kxb);
    jet.c += e2 * CA * CB;
    for (int i = 0; i < dim; ++i) jet.c_x[i] += -e2 * kap[i] * SA * CB;
    for (int s = 0; s < dim; ++s) jet.c_xbar[s] += -e2 * kap[s] * CA * SB;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) jet.c_xx(i, j) += -e2 * kap[i] * kap[j] * CA * CB;
    // c_{i sbar} = +e2 kap_i kap_s SA SB, so b -= that
    for (int i = 0; i < dim; ++i)
      for (int s = 0; s < dim; ++s) jet.b(i, s) -= e2 * kap[i] * kap[s] * SA * SB;
    for (int i = 0; i < dim; ++i)
      for (int s = 0; s < dim; ++s)
        for (int j = 0; j < dim; ++j)
          jet.b_x(i, s, j) -= e2 * kap[i] * kap[s] * kap[j] * CA * SB;
    for (int i = 0; i < dim; ++i)
      for (int s = 0; s < dim; ++s)
        for (int p = 0; p < dim; ++p)
          jet.b_xbar(i, s, p) -= e2 * kap[i] * kap[s] * kap[p] * SA * CB;
  }

  jet.det_b = det(jet.b, dim);
  if (jet.det_b <= 1e-10)
    throw SingularJetError("det b = " + format_double(jet.det_b) + " at displacement " +
                           format_double(disp[0]) + "," + format_double(disp[1]));
  jet.b_inv = inverse(jet.b, dim, jet.det_b);
  return jet;
}

// Cost exponential: the unique xbar with eta + c_i(x, xbar) = 0.
// Newton on xbar with Jacobian c_{i sbar} = -b; quadratic predictor x + eta.
inline Vec cexp(const CostModel& m, const Vec& x, const Vec& eta, int dim) {
  const double lim = 0.5 - m.window().margin;
  for (int a = 0; a < dim; ++a)
    if (std::abs(eta[a]) >= lim)
      throw CutLocusError("cexp: form component leaves the admissible window");
  Vec xbar;
  for (int a = 0; a < dim; ++a) xbar[a] = wrap_unit(x[a] + eta[a]);
  if (m.is_quadratic()) return xbar;  // closed form

  for (int it = 0; it < 50; ++it) {
    const CostJet jet = cost_jet(m, x, xbar, dim);
    Vec r;
    double rn = 0.0;
    for (int a = 0; a < dim; ++a) {
      r[a] = eta[a] + jet.c_x[a];
      rn = std::max(rn, std::abs(r[a]));
    }
    if (rn <= 1e-13) return xbar;
    const Vec step = matvec(jet.b_inv, r, dim);
    for (int a = 0; a < dim; ++a) xbar[a] = wrap_unit(xbar[a] + step[a]);
  }
  throw NoConvergenceError("cexp: Newton did not reach 1e-13 in 50 iterations");
}

struct TwistReport {
  double min_det_b = 0.0;
  double min_eigenvalue = 0.0;
  int samples = 0;
  bool pass = false;
};

// Deterministic low-discrepancy scan of (x, xbar) pairs with displacement
// inside the window; passes iff the symmetrized b stays uniformly positive.
inline TwistReport check_twist_window(const CostModel& m, const TwistWindow& w, int samples,
                                      int dim = 2) {
  if (samples < 1) throw ConfigError("check_twist_window: samples must be >= 1");
  w.validate();
  TwistReport rep;
  rep.samples = samples;
  rep.min_det_b = std::numeric_limits<double>::infinity();
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    Vec x, xbar;
    for (int a = 0; a < dim; ++a) {
      x[a] = halton(static_cast<std::uint64_t>(s), a);
      const double d = (2.0 * halton(static_cast<std::uint64_t>(s), dim + a) - 1.0) * w.max_disp;
      xbar[a] = wrap_unit(x[a] + d);
    }
    double mineig, detb;
    try {
      const CostJet jet = cost_jet(m, x, xbar, dim);
      detb = jet.det_b;
      mineig = min_sym_eigenvalue(jet.b, dim);
    } catch (const SingularJetError&) {
      detb = 0.0;
      mineig = 0.0;
    }
    rep.min_det_b = std::min(rep.min_det_b, detb);
    rep.min_eigenvalue = std::min(rep.min_eigenvalue, mineig);
  }
  rep.pass = rep.min_eigenvalue >= 1e-8;
  return rep;
}

}  // namespace lt
