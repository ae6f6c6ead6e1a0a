#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lt/audit.hpp"
#include "lt/hodge.hpp"
#include "lt/solver.hpp"
#include "lt/transport_state.hpp"

namespace lt {

// One point of the moduli manifold: cohomology coordinates tau on the flat
// basis dx^1..dx^n plus a mean-zero potential, with the assembled state of
// eta(tau, phi) = sum tau_a dx^a + d phi.
struct ModuliChart {
  Vec tau;
  ScalarField phi;
  TransportState state;
  bool converged = false;
  double residual_inf = 0.0;
  double residual_l2 = 0.0;
  int newton_iters = 0;
  std::vector<double> residual_history;  // l2 per accepted iterate
};

struct ContinuationSettings {
  double step = 0.02;
  int max_steps = 10;
  double newton_tol = 1e-11;  // on the sup norm of theta
  int max_newton = 25;
  double armijo_factor = 0.5;
  double armijo_slope = 1e-4;
  int max_linear_iter = 20000;

  void validate() const {
    if (!(step >= 0.0) || !(newton_tol > 0.0) || max_newton < 1)
      throw ConfigError("invalid continuation settings");
  }
};

struct PhiResidual {
  TwoFormField kahler;
  ScalarField mass;  // un-normalized: no 1/lam prefactor
};

inline OneFormField closed_eta(const PeriodicGrid& g, const Vec& tau, const ScalarField& phi) {
  OneFormField eta = d0(phi);
  for (int c = 0; c < g.dim(); ++c) {
    auto comp = eta.component(c);
    for (index_t i = 0; i < g.num_nodes(); ++i) comp[static_cast<size_t>(i)] += tau[c];
  }
  return eta;
}

// The map Phi evaluated on the deformed graph: T_V = T + b^{-1} zeta (mod 1),
// kahler = pullback of b_{i sbar} dx^i ^ dxbar^sbar through (Id x T_V),
// mass = rhobar(T_V) det DT_V - rho.
inline PhiResidual phi_residual(const TransportState& base, const OneFormField& zeta) {
  check_same_grid(base.grid, zeta.grid());
  const PeriodicGrid& g = base.grid;
  const int n = g.dim();
  const index_t N = g.num_nodes();

  std::vector<double> Tv(static_cast<size_t>(N) * static_cast<size_t>(n));
  parallel_for(N, [&](index_t i) {
    const Mat binv = base.b_inv_at(i);
    for (int s = 0; s < n; ++s) {
      double disp = 0.0;
      for (int k = 0; k < n; ++k) disp += binv(s, k) * zeta.at(k, i);
      Tv[static_cast<size_t>(s) * static_cast<size_t>(N) + static_cast<size_t>(i)] =
          wrap_unit(base.T_at(s, i) + disp);
    }
  });

  PhiResidual out{TwoFormField(g), ScalarField(g)};
  parallel_for(N, [&](index_t i) {
    const Vec x = g.position(i);
    Vec y;
    for (int s = 0; s < n; ++s)
      y[s] = Tv[static_cast<size_t>(s) * static_cast<size_t>(N) + static_cast<size_t>(i)];
    const CostJet jet = cost_jet(base.cost, x, y, n);

    Mat dtv;
    for (int j = 0; j < n; ++j) {
      const index_t ip = g.neighbor(i, j, +1), im = g.neighbor(i, j, -1);
      const double sc = 1.0 / (2.0 * g.spacing(j));
      for (int s = 0; s < n; ++s)
        dtv(s, j) =
            torus_displacement(
                Tv[static_cast<size_t>(s) * static_cast<size_t>(N) + static_cast<size_t>(im)],
                Tv[static_cast<size_t>(s) * static_cast<size_t>(N) + static_cast<size_t>(ip)]) *
            sc;
    }

    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        double v = 0.0;
        for (int s = 0; s < n; ++s) v += jet.b(a, s) * dtv(s, b) - jet.b(b, s) * dtv(s, a);
        out.kahler.at(TwoFormField::pair_index(a, b, n), i) = v;
      }
    out.mass[i] = base.rhobar_interp.value(y) * det(dtv, n) - base.dens.rho[i];
  });
  return out;
}

struct DphiSample {
  double eps = 0.0;
  double kahler_rel = 0.0;  // distance of the kahler slope to -d zeta, relative
  double kahler_abs = 0.0;  // L2 norm of the kahler slope
  double mass_rel = 0.0;    // distance of the mass slope to rho*D(zeta), relative
  double mass_abs = 0.0;    // L2 norm of the mass slope
};

struct DphiReport {
  std::vector<DphiSample> sweep;
  double dzeta_norm = 0.0;
  double rhoD_norm = 0.0;
  int kahler_sign = -1;          // sign s minimizing |slope - s*d zeta|
  double codiff_factor = 0.0;    // n >= 3: least-squares a in slope ~ a*codiff_g(zeta)
  double codiff_fit_rel = 0.0;   // relative residual of that fit
  // The mass comparison target carries the pointwise factor rho; the paper's
  // 1/lam normalization is intentionally omitted from D (see README).
};

inline DphiReport verify_dphi(const TransportState& base, const OneFormField& zeta,
                              const std::vector<double>& eps_list) {
  const PeriodicGrid& g = base.grid;
  const index_t N = g.num_nodes();
  const int n = g.dim();
  DphiReport rep;

  const TwoFormField dz = d1(zeta);
  double dzn = 0.0;
  {
    KahanSum s;
    for (auto v : dz.values()) s.add(v * v);
    dzn = std::sqrt(s.value() * g.cell_volume());
  }
  rep.dzeta_norm = dzn;

  ScalarField rhoD(g);
  {
    const ScalarField Dz = mass_linearization_D(base, zeta);
    for (index_t i = 0; i < N; ++i) rhoD[i] = base.dens.rho[i] * Dz[i];
  }
  rep.rhoD_norm = l2_norm(rhoD);

  OneFormField zs(g);
  for (double eps : eps_list) {
    for (size_t i = 0; i < zs.values().size(); ++i) zs.values()[i] = eps * zeta.values()[i];
    const PhiResidual fp = phi_residual(base, zs);
    for (size_t i = 0; i < zs.values().size(); ++i) zs.values()[i] = -eps * zeta.values()[i];
    const PhiResidual fm = phi_residual(base, zs);

    DphiSample sample;
    sample.eps = eps;
    {
      KahanSum sp, sm;
      for (size_t i = 0; i < fp.kahler.values().size(); ++i) {
        const double slope = (fp.kahler.values()[i] - fm.kahler.values()[i]) / (2.0 * eps);
        sp.add(slope * slope);
        const double dminus = slope + dz.values()[i];  // distance to -d zeta
        sm.add(dminus * dminus);
      }
      sample.kahler_abs = std::sqrt(sp.value() * g.cell_volume());
      sample.kahler_rel = std::sqrt(sm.value() * g.cell_volume()) / std::max(dzn, 1e-300);
    }
    {
      KahanSum sp, sm;
      for (index_t i = 0; i < N; ++i) {
        const double slope = (fp.mass[i] - fm.mass[i]) / (2.0 * eps);
        sp.add(slope * slope);
        const double d = slope - rhoD[i];
        sm.add(d * d);
      }
      sample.mass_abs = std::sqrt(sp.value() * g.cell_volume());
      sample.mass_rel = std::sqrt(sm.value() * g.cell_volume()) / std::max(rep.rhoD_norm, 1e-300);
    }
    rep.sweep.push_back(sample);
  }

  // empirical sign of the kahler slope against d zeta (smallest eps sample)
  if (!eps_list.empty() && dzn > 1e-14) {
    const double eps = eps_list.back();
    for (size_t i = 0; i < zs.values().size(); ++i) zs.values()[i] = eps * zeta.values()[i];
    const PhiResidual fp = phi_residual(base, zs);
    for (size_t i = 0; i < zs.values().size(); ++i) zs.values()[i] = -eps * zeta.values()[i];
    const PhiResidual fm = phi_residual(base, zs);
    double dot = 0.0;
    for (size_t i = 0; i < dz.values().size(); ++i)
      dot += dz.values()[i] * (fp.kahler.values()[i] - fm.kahler.values()[i]) / (2.0 * eps);
    rep.kahler_sign = dot >= 0.0 ? 1 : -1;
  }

  // n >= 3: fit the mass slope against the g-codifferential, resolving the
  // lam-normalization empirically
  if (n >= 3 && !eps_list.empty()) {
    const MetricField metric = MetricField::from_state(base);
    const ScalarField cd = codiff_1(metric, zeta);
    const double eps = eps_list.back();
    for (size_t i = 0; i < zs.values().size(); ++i) zs.values()[i] = eps * zeta.values()[i];
    const PhiResidual fp = phi_residual(base, zs);
    for (size_t i = 0; i < zs.values().size(); ++i) zs.values()[i] = -eps * zeta.values()[i];
    const PhiResidual fm = phi_residual(base, zs);
    double num = 0.0, den = 0.0;
    for (index_t i = 0; i < N; ++i) {
      const double slope = (fp.mass[i] - fm.mass[i]) / (2.0 * eps);
      num += slope * cd[i];
      den += cd[i] * cd[i];
    }
    if (den > 1e-280) {
      rep.codiff_factor = num / den;
      KahanSum resid, scale;
      for (index_t i = 0; i < N; ++i) {
        const double slope = (fp.mass[i] - fm.mass[i]) / (2.0 * eps);
        const double r = slope - rep.codiff_factor * cd[i];
        resid.add(r * r);
        scale.add(slope * slope);
      }
      rep.codiff_fit_rel = std::sqrt(resid.value() / std::max(scale.value(), 1e-300));
    }
  }
  return rep;
}

// Damped Newton on phi for theta = 0 at fixed cohomology coordinates tau.
// The linear solves run in the flat-mode-free subspace (mean plus the
// alternating lattice modes are pure gauge for d phi).
inline ModuliChart solve_lie(const PeriodicGrid& g, const CostModel& cost,
                             const DensityPair& dens, const Vec& tau,
                             const ScalarField& init_phi, const ContinuationSettings& settings) {
  settings.validate();
  const int n = g.dim();
  const index_t N = g.num_nodes();
  for (int a = 0; a < n; ++a)
    if (std::abs(tau[a]) > cost.window().max_disp)
      throw CutLocusError("solve_lie: tau outside the twist window");

  const FlatModeProjector proj(g);
  ScalarField phi = init_phi;
  check_same_grid(g, phi.grid());
  proj.remove_scalar_modes(phi.values(), /*keep_mean=*/false);

  ModuliChart chart;
  chart.tau = tau;

  TransportState st = assemble_state(g, cost, dens, closed_eta(g, tau, phi));
  double rl2 = l2_norm(st.theta);
  double rinf = max_abs(st.theta.values());
  chart.residual_history.push_back(rl2);

  for (int it = 0; it < settings.max_newton; ++it) {
    if (rinf <= settings.newton_tol) break;

    const LinOp A = [&](const DVec& in, DVec& out) {
      ScalarField v(g);
      std::copy(in.begin(), in.end(), v.values().begin());
      proj.remove_scalar_modes(v.values(), false);
      const ScalarField Lv = linearized_L(st, v);
      out.assign(Lv.values().begin(), Lv.values().end());
      proj.remove_scalar_modes(out, false);
    };
    DVec rhs(static_cast<size_t>(N));
    for (index_t i = 0; i < N; ++i) rhs[static_cast<size_t>(i)] = -st.theta[i];
    proj.remove_scalar_modes(rhs, false);
    DVec delta(static_cast<size_t>(N), 0.0);
    const double lin_tol = std::max(0.1 * settings.newton_tol, std::min(1e-4, 0.1 * rinf));
    bicgstab_solve(A, rhs, delta, lin_tol, settings.max_linear_iter);

    // Armijo backtracking on the l2 residual; cut-locus excursions shrink
    // the step like an insufficient decrease
    double s = 1.0;
    bool accepted = false;
    while (s >= 1e-6) {
      ScalarField trial = phi;
      for (index_t i = 0; i < N; ++i) trial[i] += s * delta[static_cast<size_t>(i)];
      proj.remove_scalar_modes(trial.values(), false);
      try {
        TransportState st_t = assemble_state(g, cost, dens, closed_eta(g, tau, trial));
        const double rl2_t = l2_norm(st_t.theta);
        if (rl2_t <= (1.0 - settings.armijo_slope * s) * rl2) {
          phi = std::move(trial);
          st = std::move(st_t);
          rl2 = rl2_t;
          rinf = max_abs(st.theta.values());
          chart.residual_history.push_back(rl2);
          ++chart.newton_iters;
          accepted = true;
          break;
        }
      } catch (const CutLocusError&) {
        // fall through to a smaller step
      }
      s *= settings.armijo_factor;
    }
    if (!accepted) break;  // stalled; best iterate is returned below
  }

  chart.phi = phi;
  chart.residual_inf = rinf;
  chart.residual_l2 = rl2;
  chart.converged = rinf <= settings.newton_tol;
  if (chart.converged && !st.convex)
    throw NonConvexBreakdownError("solve_lie: w lost positivity at an accepted iterate");
  chart.state = std::move(st);
  return chart;
}

struct FamilyStep {
  Vec tau;
  double cost = 0.0;
  double residual_inf = 0.0;
  double residual_l2 = 0.0;
  int newton_iters = 0;
  bool converged = false;
};

struct FamilyResult {
  std::vector<ModuliChart> charts;
  std::vector<FamilyStep> steps;
  bool completed = false;
  std::string stop_reason;
};

// Continuation of the b1-dimensional family: march tau in one coordinate
// direction with warm-started correctors.
inline FamilyResult continue_family(const ModuliChart& base, int direction,
                                    const ContinuationSettings& settings) {
  settings.validate();
  const PeriodicGrid& g = base.state.grid;
  if (direction < 1 || direction > g.dim())
    throw ConfigError("continue_family: direction must be in 1..n");
  if (!base.converged) throw ConfigError("continue_family: base chart is not converged");

  FamilyResult fam;
  auto record = [&](const ModuliChart& c) {
    FamilyStep srec;
    srec.tau = c.tau;
    srec.cost = transport_cost(c.state);
    srec.residual_inf = c.residual_inf;
    srec.residual_l2 = c.residual_l2;
    srec.newton_iters = c.newton_iters;
    srec.converged = c.converged;
    fam.steps.push_back(srec);
  };
  fam.charts.push_back(base);
  record(base);
  if (settings.step == 0.0 || settings.max_steps == 0) {
    fam.completed = true;
    fam.stop_reason = "zero step";
    return fam;
  }

  Vec tau = base.tau;
  ScalarField warm = base.phi;
  for (int k = 0; k < settings.max_steps; ++k) {
    tau[direction - 1] += settings.step;
    ModuliChart next;
    try {
      next = solve_lie(g, base.state.cost, base.state.dens, tau, warm, settings);
    } catch (const std::runtime_error& e) {
      fam.stop_reason = e.what();
      return fam;
    }
    fam.charts.push_back(next);
    record(next);
    if (!next.converged) {
      fam.stop_reason = "corrector did not converge";
      return fam;
    }
    warm = fam.charts.back().phi;
  }
  fam.completed = true;
  fam.stop_reason = "max steps";
  return fam;
}

struct TangentReport {
  double harmonic_norm = 0.0;
  double exact_rel = 0.0;
  double coexact_rel = 0.0;
};

// Decomposes the discrete family tangent under the mid-chart metric; the
// non-harmonic fractions are the falsifiable content of the tangent-space
// identification.
inline TangentReport tangent_harmonicity(const ModuliChart& prev, const ModuliChart& next,
                                         const MetricField& metric_mid) {
  const PeriodicGrid& g = prev.state.grid;
  if (g.dim() < 3)
    throw DimensionError("tangent_harmonicity needs n >= 3 (use n2_kernel_dim for n = 2)");
  double dtau = 0.0;
  for (int a = 0; a < g.dim(); ++a) dtau = std::max(dtau, std::abs(next.tau[a] - prev.tau[a]));
  if (dtau <= 0.0) throw ConfigError("tangent_harmonicity: charts share tau");

  OneFormField xi(g);
  for (size_t i = 0; i < xi.values().size(); ++i)
    xi.values()[i] = (next.state.eta.values()[i] - prev.state.eta.values()[i]) / dtau;

  const HarmonicBasis basis = harmonic_basis(metric_mid, g.dim());
  const HodgeDecomposition dec = hodge_decompose(metric_mid, xi, basis);
  const OneFormField ex = d0(dec.exact_potential);
  const OneFormField co = codiff_2(metric_mid, dec.coexact_potential);
  TangentReport rep;
  rep.harmonic_norm = std::sqrt(inner_product_1(metric_mid, dec.harmonic, dec.harmonic));
  rep.exact_rel =
      std::sqrt(inner_product_1(metric_mid, ex, ex)) / std::max(rep.harmonic_norm, 1e-300);
  rep.coexact_rel =
      std::sqrt(inner_product_1(metric_mid, co, co)) / std::max(rep.harmonic_norm, 1e-300);
  return rep;
}

struct KernelReport {
  int dim = 0;
  std::vector<double> singular_values;
  std::vector<OneFormField> kernel_forms;
  double sigma_max = 0.0;
  double gap_ratio = 0.0;
};

namespace moduli_detail {

// Normal operator of zeta -> (d1 zeta, D(zeta)) in the flat reference inner
// product, with the alternating-mode deflation penalty. The pieces are
// selectable so regression tests can ablate one component.
inline LinOp n2_normal_operator(const TransportState& st, const FlatModeProjector& proj,
                                double kappa, bool with_kahler, bool with_mass) {
  const PeriodicGrid g = st.grid;
  const index_t N = g.num_nodes();
  return [&st, g, N, &proj, kappa, with_kahler, with_mass](const DVec& in, DVec& out) {
    out.assign(in.size(), 0.0);
    OneFormField zeta(g);
    std::copy(in.begin(), in.end(), zeta.values().begin());

    if (with_kahler) {
      const TwoFormField dz = d1(zeta);
      // d1^T on T^2: (d1^T z)_1 = D_2 z, (d1^T z)_2 = -D_1 z
      std::vector<double> tmp(static_cast<size_t>(N));
      centered_diff(g, dz.component(0), tmp, 1);
      for (index_t i = 0; i < N; ++i) out[static_cast<size_t>(i)] += tmp[static_cast<size_t>(i)];
      centered_diff(g, dz.component(0), tmp, 0);
      for (index_t i = 0; i < N; ++i)
        out[static_cast<size_t>(N) + static_cast<size_t>(i)] -= tmp[static_cast<size_t>(i)];
    }

    if (with_mass) {
      const ScalarField Dz = mass_linearization_D(st, zeta);
      // D^T u: component k = -sum_j D_j(winv(k,j) u) + r^k u
      std::vector<double> prod(static_cast<size_t>(N)), tmp(static_cast<size_t>(N));
      for (int k = 0; k < 2; ++k) {
        for (int j = 0; j < 2; ++j) {
          for (index_t i = 0; i < N; ++i) {
            const Mat winv = st.w_inv_at(i);
            prod[static_cast<size_t>(i)] = winv(k, j) * Dz[i];
          }
          centered_diff(g, prod, tmp, j);
          for (index_t i = 0; i < N; ++i)
            out[static_cast<size_t>(k) * static_cast<size_t>(N) + static_cast<size_t>(i)] -=
                tmp[static_cast<size_t>(i)];
        }
        for (index_t i = 0; i < N; ++i)
          out[static_cast<size_t>(k) * static_cast<size_t>(N) + static_cast<size_t>(i)] +=
              st.zeroth[static_cast<size_t>(i) * 2 + static_cast<size_t>(k)] * Dz[i];
      }
    }

    if (kappa > 0.0) {
      DVec spur(in.size());
      for (int c = 0; c < 2; ++c) {
        std::span<const double> comp{in.data() + static_cast<size_t>(c) * static_cast<size_t>(N),
                                     static_cast<size_t>(N)};
        std::span<double> s{spur.data() + static_cast<size_t>(c) * static_cast<size_t>(N),
                            static_cast<size_t>(N)};
        proj.alternating_part(comp, s);
      }
      axpy(kappa, spur, out);
    }
  };
}

}  // namespace moduli_detail

// Kernel dimension of zeta -> (d1 zeta, D(zeta)) via the smallest singular
// values of the deflated normal operator (block inverse iteration in the
// flat reference inner product).
inline KernelReport n2_kernel_dim(const TransportState& st, bool with_kahler = true,
                                  bool with_mass = true) {
  if (st.dim() != 2) throw DimensionError("n2_kernel_dim is the n = 2 route");
  const PeriodicGrid& g = st.grid;
  const index_t N = g.num_nodes();
  const FlatModeProjector proj(g);

  const Inner ip = [](const DVec& a, const DVec& b) { return dot_flat(a, b); };

  // operator norm first (penalty-free), then place the deflated modes at
  // about a tenth of it
  double sigma_max = 0.0;
  {
    const LinOp raw = moduli_detail::n2_normal_operator(st, proj, 0.0, with_kahler, with_mass);
    Rng rng(0xabcdULL);
    DVec v(static_cast<size_t>(2 * N)), Av(v.size());
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    double nv = std::sqrt(dot_flat(v, v));
    scale(v, 1.0 / nv);
    for (int it = 0; it < 30; ++it) {
      raw(v, Av);
      nv = std::sqrt(dot_flat(Av, Av));
      v = Av;
      scale(v, 1.0 / nv);
    }
    sigma_max = std::sqrt(nv);
  }
  const double kappa = 0.01 * sigma_max * sigma_max;

  const LinOp A = moduli_detail::n2_normal_operator(st, proj, kappa, with_kahler, with_mass);
  EigOptions opt;
  opt.block = 8;  // six reported singular values plus guard vectors
  opt.shift = 1e-6;
  opt.seed = 0x17ULL;
  opt.tol_abs = 1e-9;
  const EigResult eig = smallest_eigenpairs(A, ip, static_cast<size_t>(2 * N), opt);
  if (!eig.converged)
    throw NoConvergenceError("n2_kernel_dim: eigensolver did not certify residuals");

  KernelReport rep;
  rep.sigma_max = sigma_max;
  for (int k = 0; k < 6; ++k)
    rep.singular_values.push_back(
        std::sqrt(std::max(eig.eigenvalues[static_cast<size_t>(k)], 0.0)));
  const double thresh = 1e-6 * sigma_max;
  int dim = 0;
  while (dim < 6 && rep.singular_values[static_cast<size_t>(dim)] < thresh) ++dim;
  rep.dim = dim;
  for (int k = 0; k < dim; ++k) {
    OneFormField f(g);
    std::copy(eig.vectors[static_cast<size_t>(k)].begin(),
              eig.vectors[static_cast<size_t>(k)].end(), f.values().begin());
    rep.kernel_forms.push_back(std::move(f));
  }
  if (dim == 0 || dim >= 6) {
    rep.gap_ratio = 0.0;
    throw SpectralGapError("n2_kernel_dim: kernel count " + std::to_string(dim) +
                           " not certifiable from six singular values");
  }
  rep.gap_ratio = rep.singular_values[static_cast<size_t>(dim)] /
                  std::max(rep.singular_values[static_cast<size_t>(dim - 1)], 1e-14);
  if (rep.gap_ratio < 100.0)
    throw SpectralGapError("n2_kernel_dim: gap ratio " + format_double(rep.gap_ratio) +
                           " < 100");
  return rep;
}

}  // namespace lt
