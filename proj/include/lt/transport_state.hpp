#pragma once

#include <cmath>
#include <vector>

#include "lt/cost.hpp"
#include "lt/density.hpp"
#include "lt/grid.hpp"
#include "lt/interp.hpp"
#include "lt/linalg.hpp"
#include "lt/parallel.hpp"

namespace lt {

// Everything the candidate-map bundle carries at each node:
//   T = cexp(x, eta),   DT by unwrapped centered differences,
//   w_ij = D_j eta_i + c_ij(x, T),
//   theta = ln det w - ln det b - ln rho + ln rhobar(T),
//   lam = (rho rhobar(T) / det b)^{1/(n-2)},  g = lam w   (n >= 3 only).
//
// `zeroth` caches the coefficient of the undifferentiated argument shared by
// the linearized operator L and the mass linearization D (they contract the
// same jets).
struct TransportState {
  PeriodicGrid grid;
  CostModel cost;
  DensityPair dens;
  CubicInterpolant rhobar_interp;

  OneFormField eta;
  std::vector<double> T;        // component-major planes, like OneFormField
  std::vector<double> DT;       // per node: n*n block, DT[s*n+j] = dT^s/dx_j
  std::vector<double> w;        // per node: n*n block
  std::vector<double> w_inv;    // per node: n*n block (zero where w singular)
  std::vector<double> b_inv;    // per node: n*n block
  std::vector<double> zeroth;   // per node: n block, r^k
  ScalarField theta;
  ScalarField det_dt;
  ScalarField rhobar_at_T;
  ScalarField lam;          // n >= 3
  std::vector<double> g;    // n >= 3, per node n*n block
  ScalarField sqrt_det_g;   // n >= 3

  bool convex = true;
  double min_w_eig = 0.0;
  double max_deta = 0.0;

  int dim() const { return grid.dim(); }

  double T_at(int comp, index_t i) const {
    return T[static_cast<size_t>(comp) * static_cast<size_t>(grid.num_nodes()) +
             static_cast<size_t>(i)];
  }

  Vec map_point(index_t i) const {
    Vec y;
    for (int s = 0; s < dim(); ++s) y[s] = T_at(s, i);
    return y;
  }

  Mat w_at(index_t i) const { return block_at(w, i); }
  Mat w_inv_at(index_t i) const { return block_at(w_inv, i); }
  Mat b_inv_at(index_t i) const { return block_at(b_inv, i); }
  Mat dt_at(index_t i) const { return block_at(DT, i); }
  Mat g_at(index_t i) const { return block_at(g, i); }

  // Map evaluation off the lattice: interpolate eta, then take the cost
  // exponential (used by the audit's orbit tracing).
  Vec map_at_point(const Vec& x, const std::vector<CubicInterpolant>& eta_interp) const {
    Vec e;
    for (int c = 0; c < dim(); ++c) e[c] = eta_interp[static_cast<size_t>(c)].value(x);
    return cexp(cost, x, e, dim());
  }

  std::vector<CubicInterpolant> make_eta_interpolants() const {
    std::vector<CubicInterpolant> out;
    for (int c = 0; c < dim(); ++c) {
      ScalarField comp(grid);
      auto src = eta.component(c);
      for (index_t i = 0; i < grid.num_nodes(); ++i)
        comp[i] = src[static_cast<size_t>(i)];
      out.emplace_back(comp);
    }
    return out;
  }

 private:
  Mat block_at(const std::vector<double>& v, index_t i) const {
    const int n = dim();
    Mat m;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        m(a, b) = v[static_cast<size_t>(i) * static_cast<size_t>(n * n) +
                    static_cast<size_t>(a * n + b)];
    return m;
  }
};

inline TransportState assemble_state(const PeriodicGrid& grid, const CostModel& cost,
                                     const DensityPair& dens, const OneFormField& eta) {
  check_same_grid(grid, eta.grid());
  check_same_grid(grid, dens.rho.grid());
  const int n = grid.dim();
  const index_t N = grid.num_nodes();
  const size_t nn = static_cast<size_t>(n * n);

  TransportState st;
  st.grid = grid;
  st.cost = cost;
  st.dens = dens;
  st.rhobar_interp = CubicInterpolant(dens.rhobar);
  st.eta = eta;

  {
    const TwoFormField deta = d1(eta);
    st.max_deta = max_abs(deta.values());
    if (st.max_deta > 1e-10)
      throw NotClosedError("assemble_state: |d eta| = " + format_double(st.max_deta));
  }

  st.T.assign(static_cast<size_t>(N) * static_cast<size_t>(n), 0.0);
  st.DT.assign(static_cast<size_t>(N) * nn, 0.0);
  st.w.assign(static_cast<size_t>(N) * nn, 0.0);
  st.w_inv.assign(static_cast<size_t>(N) * nn, 0.0);
  st.b_inv.assign(static_cast<size_t>(N) * nn, 0.0);
  st.zeroth.assign(static_cast<size_t>(N) * static_cast<size_t>(n), 0.0);
  st.theta = ScalarField(grid);
  st.det_dt = ScalarField(grid);
  st.rhobar_at_T = ScalarField(grid);
  if (n >= 3) {
    st.lam = ScalarField(grid);
    st.g.assign(static_cast<size_t>(N) * nn, 0.0);
    st.sqrt_det_g = ScalarField(grid);
  }

  // Map points first; DT needs the images of all neighbors.
  parallel_for(N, [&](index_t i) {
    const Vec x = grid.position(i);
    Vec e;
    for (int c = 0; c < n; ++c) e[c] = eta.at(c, i);
    const Vec y = cexp(cost, x, e, n);
    for (int c = 0; c < n; ++c)
      st.T[static_cast<size_t>(c) * static_cast<size_t>(N) + static_cast<size_t>(i)] = y[c];
  });

  // Derivatives of eta (centered) feed w.
  std::vector<std::vector<double>> deta(static_cast<size_t>(n) * static_cast<size_t>(n));
  for (int c = 0; c < n; ++c)
    for (int j = 0; j < n; ++j) {
      auto& plane = deta[static_cast<size_t>(c * n + j)];
      plane.resize(static_cast<size_t>(N));
      centered_diff(grid, eta.component(c), plane, j);
    }

  std::vector<double> mineig_per_node(static_cast<size_t>(N), 0.0);

  parallel_for(N, [&](index_t i) {
    const Vec x = grid.position(i);
    const Vec y = st.map_point(i);

    // DT with per-axis unwrapping between neighbor images.
    Mat dt;
    for (int j = 0; j < n; ++j) {
      const index_t ip = grid.neighbor(i, j, +1);
      const index_t im = grid.neighbor(i, j, -1);
      const double sc = 1.0 / (2.0 * grid.spacing(j));
      for (int s = 0; s < n; ++s)
        dt(s, j) = torus_displacement(st.T_at(s, im), st.T_at(s, ip)) * sc;
    }

    const CostJet jet = cost_jet(cost, x, y, n);

    Mat wm;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        wm(a, b) = deta[static_cast<size_t>(a * n + b)][static_cast<size_t>(i)] + jet.c_xx(a, b);

    Vec grad_rb;
    const double rb = st.rhobar_interp.value_and_gradient(y, grad_rb);
    Vec glnrb;
    for (int s = 0; s < n; ++s) glnrb[s] = grad_rb[s] / rb;

    const double detw = det(wm, n);
    const double mineig = min_sym_eigenvalue(wm, n);
    mineig_per_node[static_cast<size_t>(i)] = mineig;

    Mat winv;
    if (std::abs(detw) > 1e-12) winv = inverse(wm, n, detw);

    // Shared zeroth-order coefficient of L and D:
    //   r^k = -w^{ij} b^{pk} b_{ip,j} - b^{pk} b_{ip,r} b^{ri} + (ln rhobar)_s b^{sk}
    Vec r;
    for (int k = 0; k < n; ++k) {
      double acc = 0.0;
      for (int i2 = 0; i2 < n; ++i2)
        for (int p = 0; p < n; ++p) {
          double t1 = 0.0;
          for (int j = 0; j < n; ++j) t1 += winv(i2, j) * jet.b_x(i2, p, j);
          acc -= t1 * jet.b_inv(p, k);
          double t2 = 0.0;
          for (int rr = 0; rr < n; ++rr) t2 += jet.b_xbar(i2, p, rr) * jet.b_inv(rr, i2);
          acc -= jet.b_inv(p, k) * t2;
        }
      for (int s = 0; s < n; ++s) acc += glnrb[s] * jet.b_inv(s, k);
      r[k] = acc;
    }

    const size_t base = static_cast<size_t>(i) * nn;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        st.DT[base + static_cast<size_t>(a * n + b)] = dt(a, b);
        st.w[base + static_cast<size_t>(a * n + b)] = wm(a, b);
        st.w_inv[base + static_cast<size_t>(a * n + b)] = winv(a, b);
        st.b_inv[base + static_cast<size_t>(a * n + b)] = jet.b_inv(a, b);
      }
    for (int k = 0; k < n; ++k)
      st.zeroth[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(k)] = r[k];

    st.det_dt[i] = det(dt, n);
    st.rhobar_at_T[i] = rb;
    const double safe_detw = std::max(detw, 1e-300);
    st.theta[i] = std::log(safe_detw) - std::log(jet.det_b) - std::log(dens.rho[i]) + std::log(rb);

    if (n >= 3) {
      const double l = std::pow(dens.rho[i] * rb / jet.det_b, 1.0 / (n - 2));
      st.lam[i] = l;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          st.g[base + static_cast<size_t>(a * n + b)] = l * wm(a, b);
      st.sqrt_det_g[i] = std::pow(l, 0.5 * n) * std::sqrt(safe_detw);
    }
  });

  double mn = std::numeric_limits<double>::infinity();
  for (index_t i = 0; i < N; ++i) mn = std::min(mn, mineig_per_node[static_cast<size_t>(i)]);
  st.min_w_eig = mn;
  st.convex = mn > 0.0;
  return st;
}

// rhobar(T(x)) det DT(x) - rho(x): the local pushforward defect.
inline ScalarField pushforward_residual(const TransportState& st) {
  ScalarField out(st.grid);
  parallel_for(st.grid.num_nodes(), [&](index_t i) {
    out[i] = st.rhobar_at_T[i] * st.det_dt[i] - st.dens.rho[i];
  });
  return out;
}

namespace state_detail {

// Applies w^{ij} second-argument + zeroth coefficients to precomputed
// first-derivative planes dv[k] and second-derivative planes ddv[i*n+j].
inline ScalarField contract_operator(const TransportState& st,
                                     const std::vector<std::vector<double>>& dv,
                                     const std::vector<std::vector<double>>& ddv) {
  const int n = st.dim();
  ScalarField out(st.grid);
  parallel_for(st.grid.num_nodes(), [&](index_t idx) {
    const size_t i = static_cast<size_t>(idx);
    const Mat winv = st.w_inv_at(idx);
    double acc = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) acc += winv(a, b) * ddv[static_cast<size_t>(a * n + b)][i];
    for (int k = 0; k < n; ++k)
      acc += st.zeroth[i * static_cast<size_t>(n) + static_cast<size_t>(k)] *
             dv[static_cast<size_t>(k)][i];
    out[idx] = acc;
  });
  return out;
}

}  // namespace state_detail

// Linearized mass-transport operator applied to a potential v. All v
// derivatives are compositions of the centered first difference, so L is the
// exact directional derivative of the assembled theta along d v.
inline ScalarField linearized_L(const TransportState& st, const ScalarField& v) {
  check_same_grid(st.grid, v.grid());
  const int n = st.dim();
  const index_t N = st.grid.num_nodes();
  std::vector<std::vector<double>> dv(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    dv[static_cast<size_t>(k)].resize(static_cast<size_t>(N));
    centered_diff(st.grid, v.values(), dv[static_cast<size_t>(k)], k);
  }
  std::vector<std::vector<double>> ddv(static_cast<size_t>(n) * static_cast<size_t>(n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      auto& plane = ddv[static_cast<size_t>(a * n + b)];
      plane.resize(static_cast<size_t>(N));
      centered_diff(st.grid, dv[static_cast<size_t>(a)], plane, b);
    }
  return state_detail::contract_operator(st, dv, ddv);
}

// The bracket of the mass-component linearization on an arbitrary 1-form
// (no 1/lam prefactor; see README). Coincides with linearized_L on exact
// forms by construction.
inline ScalarField mass_linearization_D(const TransportState& st, const OneFormField& zeta) {
  check_same_grid(st.grid, zeta.grid());
  const int n = st.dim();
  const index_t N = st.grid.num_nodes();
  std::vector<std::vector<double>> z(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k)
    z[static_cast<size_t>(k)].assign(zeta.component(k).begin(), zeta.component(k).end());
  std::vector<std::vector<double>> dz(static_cast<size_t>(n) * static_cast<size_t>(n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      auto& plane = dz[static_cast<size_t>(a * n + b)];
      plane.resize(static_cast<size_t>(N));
      centered_diff(st.grid, zeta.component(a), plane, b);
    }
  return state_detail::contract_operator(st, z, dz);
}

struct LbReport {
  double residual_sup = 0.0;
  double residual_l2 = 0.0;
  double lhs_l2 = 0.0;
  double rel_l2 = 0.0;
};

// Checks L z = lam (Lap_g z + 1/2 <grad theta, grad z>_g) with the
// Laplace-Beltrami side assembled from the explicit coordinate formula.
// The two discretizations agree only to O(h^2); the defect must shrink at
// second order under refinement.
inline LbReport lb_check(const TransportState& st, const ScalarField& z) {
  if (st.dim() < 3)
    throw DimensionError("lb_check requires n >= 3 (conformal factor undefined for n = 2)");
  check_same_grid(st.grid, z.grid());
  const int n = st.dim();
  const index_t N = st.grid.num_nodes();

  const ScalarField lhs = linearized_L(st, z);

  std::vector<std::vector<double>> dz(static_cast<size_t>(n)), dtheta(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    dz[static_cast<size_t>(k)].resize(static_cast<size_t>(N));
    centered_diff(st.grid, z.values(), dz[static_cast<size_t>(k)], k);
    dtheta[static_cast<size_t>(k)].resize(static_cast<size_t>(N));
    centered_diff(st.grid, st.theta.values(), dtheta[static_cast<size_t>(k)], k);
  }

  // q^j = sqrt(det g) g^{ij} z_i, with g^{ij} = w^{ij} / lam
  std::vector<std::vector<double>> q(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) q[static_cast<size_t>(j)].resize(static_cast<size_t>(N));
  parallel_for(N, [&](index_t idx) {
    const size_t i = static_cast<size_t>(idx);
    const Mat winv = st.w_inv_at(idx);
    const double fac = st.sqrt_det_g[idx] / st.lam[idx];
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int a = 0; a < n; ++a) s += winv(a, j) * dz[static_cast<size_t>(a)][i];
      q[static_cast<size_t>(j)][i] = fac * s;
    }
  });
  std::vector<std::vector<double>> dq(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) {
    dq[static_cast<size_t>(j)].resize(static_cast<size_t>(N));
    centered_diff(st.grid, q[static_cast<size_t>(j)], dq[static_cast<size_t>(j)], j);
  }

  LbReport rep;
  KahanSum res2, lhs2;
  for (index_t idx = 0; idx < N; ++idx) {
    const size_t i = static_cast<size_t>(idx);
    double lap = 0.0;
    for (int j = 0; j < n; ++j) lap += dq[static_cast<size_t>(j)][i];
    lap /= st.sqrt_det_g[idx];
    const Mat winv = st.w_inv_at(idx);
    double cross = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        cross += winv(a, b) / st.lam[idx] * dtheta[static_cast<size_t>(a)][i] *
                 dz[static_cast<size_t>(b)][i];
    const double rhs = st.lam[idx] * (lap + 0.5 * cross);
    const double r = lhs[idx] - rhs;
    rep.residual_sup = std::max(rep.residual_sup, std::abs(r));
    res2.add(r * r);
    lhs2.add(lhs[idx] * lhs[idx]);
  }
  const double vol = st.grid.cell_volume();
  rep.residual_l2 = std::sqrt(res2.value() * vol);
  rep.lhs_l2 = std::sqrt(lhs2.value() * vol);
  rep.rel_l2 = rep.residual_l2 / std::max(rep.lhs_l2, 1e-300);
  return rep;
}

}  // namespace lt
