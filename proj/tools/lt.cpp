// lt: construct, deform, and audit Lie solutions of the mass-transport
// equation on flat tori. One JSON config drives every subcommand; outputs
// land under --out as summary.json plus per-command artifacts.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lt/audit.hpp"
#include "lt/config.hpp"
#include "lt/hodge.hpp"
#include "lt/io.hpp"
#include "lt/moduli.hpp"
#include "lt/transport_state.hpp"

namespace fs = std::filesystem;
using namespace lt;

namespace {

constexpr const char* kVersion = "0.1.0";

// exit codes: 0 ok, 1 config/usage, 2 convergence, 3 cut locus or singular
// jet, 4 spectral gap, 5 verification failure
enum ExitCode {
  kOk = 0,
  kConfigError = 1,
  kNoConvergence = 2,
  kCutLocus = 3,
  kSpectralGap = 4,
  kCheckFailed = 5,
};

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

struct Run {
  RunConfig cfg;
  fs::path out;
  json summary;
  std::vector<std::string> artifacts;

  Run(const std::string& config_path, const std::string& out_dir, const std::string& command)
      : cfg(load_config(config_path)), out(out_dir) {
    fs::create_directories(out);
    summary["tool"] = "lt";
    summary["version"] = kVersion;
    summary["command"] = command;
    summary["config_hash"] = cfg.hash();
  }

  void add_artifact(const std::string& name, const json& payload) {
    const fs::path p = out / name;
    std::ofstream f(p);
    f << payload.dump(2) << "\n";
    artifacts.push_back(p.string());
  }

  void dump_field(const std::string& stem, const FieldDump& d) {
    const fs::path csv = out / (stem + ".csv");
    const fs::path bin = out / (stem + ".bin");
    write_field_csv(csv.string(), d);
    write_field_bin(bin.string(), d);
    artifacts.push_back(csv.string());
    artifacts.push_back(bin.string());
  }

  int finish(const Timer& timer, int code) {
    summary["artifacts"] = artifacts;
    summary["timings_ms"] = json{{"total", timer.ms()}};
    summary["exit_code"] = code;
    std::ofstream f(out / "summary.json");
    f << summary.dump(2) << "\n";
    return code;
  }
};

ScalarField test_potential(const PeriodicGrid& g, double amp) {
  return ScalarField::sample(g, [amp](const Vec& x) {
    return amp * std::sin(kTwoPi * x[0]) * std::sin(kTwoPi * x[1]);
  });
}

ScalarField test_function_z(const PeriodicGrid& g) {
  ScalarField z = ScalarField::sample(g, [&](const Vec& x) {
    double v = 0.5 * std::sin(kTwoPi * x[0]) + std::sin(kTwoPi * x[1]);
    if (g.dim() == 3) v += std::sin(kTwoPi * x[1]) * std::cos(kTwoPi * x[2]);
    return v;
  });
  const double nrm = l2_norm(z);
  for (index_t i = 0; i < g.num_nodes(); ++i) z[i] /= nrm;
  return z;
}

// ---- verify ---------------------------------------------------------------

int cmd_verify(const std::string& config_path, const std::string& out_dir) {
  Timer timer;
  Run run(config_path, out_dir, "verify");
  const PeriodicGrid g = run.cfg.make_grid();
  const DensityPair dens = run.cfg.make_densities(g);
  json checks = json::array();
  bool all_pass = true;
  auto check = [&](const std::string& name, bool pass, double value) {
    checks.push_back(json{{"name", name}, {"pass", pass}, {"value", value}});
    all_pass = all_pass && pass;
  };

  {  // discrete complex
    Rng rng(run.cfg.seed + 1);
    ScalarField u = ScalarField::sample(g, [&](const Vec& x) {
      return std::sin(kTwoPi * x[0]) + 0.7 * std::cos(kTwoPi * (x[1] + x[0])) +
             (g.dim() == 3 ? 0.3 * std::sin(kTwoPi * x[2]) : 0.0);
    });
    const double scale = std::max(1.0, max_abs(d0(u).values()));
    const double dd = max_abs(d1(d0(u)).values()) / scale;
    check("d1_after_d0_vanishes", dd <= 1e-13, dd);
    const ScalarField one(g, 1.0);
    const double vol = integrate(one, one);
    check("unit_volume", std::abs(vol - 1.0) <= 1e-14, vol);
  }

  {  // cost exponential and twist window
    Rng rng(run.cfg.seed + 2);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
      Vec x, e;
      for (int a = 0; a < g.dim(); ++a) {
        x[a] = rng.next_double();
        e[a] = rng.uniform(-0.25, 0.25);
      }
      const Vec y = cexp(run.cfg.cost, x, e, g.dim());
      const CostJet jet = cost_jet(run.cfg.cost, x, y, g.dim());
      for (int a = 0; a < g.dim(); ++a) worst = std::max(worst, std::abs(e[a] + jet.c_x[a]));
    }
    check("cexp_contact_residual", worst <= 1e-12, worst);
    const TwistReport tw = check_twist_window(run.cfg.cost, run.cfg.cost.window(), 256, g.dim());
    check("twist_window", tw.pass, tw.min_eigenvalue);
    run.summary["twist_report"] = to_json(tw);
  }

  {  // weighted adjointness
    const ScalarField lam = ScalarField::sample(
        g, [](const Vec& x) { return 1.0 + 0.2 * std::cos(kTwoPi * x[0]); });
    const MetricField metric = MetricField::conformal(g, lam);
    Rng rng(run.cfg.seed + 3);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      OneFormField eta(g);
      ScalarField a(g);
      for (auto& v : eta.values()) v = rng.uniform(-1.0, 1.0);
      for (index_t i = 0; i < g.num_nodes(); ++i) a[i] = rng.uniform(-1.0, 1.0);
      const double lhs = inner_product_1(metric, d0(a), eta);
      const double rhs = inner_product_0(metric, a, codiff_1(metric, eta));
      worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    }
    check("codifferential_adjointness", worst <= 1e-12, worst);
  }

  {  // Eq (id1): w = b DT
    const ScalarField phi = test_potential(g, 0.006);
    const OneFormField eta = closed_eta(g, run.cfg.tau, phi);
    const TransportState st = assemble_state(g, run.cfg.cost, dens, eta);
    double defect = 0.0;
    for (index_t i = 0; i < g.num_nodes(); ++i) {
      const CostJet jet = cost_jet(run.cfg.cost, g.position(i), st.map_point(i), g.dim());
      const Mat w = st.w_at(i), dt = st.dt_at(i);
      for (int a = 0; a < g.dim(); ++a)
        for (int b = 0; b < g.dim(); ++b) {
          double bdt = 0.0;
          for (int s = 0; s < g.dim(); ++s) bdt += jet.b(a, s) * dt(s, b);
          defect = std::max(defect, std::abs(w(a, b) - bdt));
        }
    }
    const double h2 = g.spacing(0) * g.spacing(0);
    check("id1_w_equals_b_DT", defect <= std::max(1e-11, 40.0 * h2), defect);
    const double mass_rho = integrate(dens.rho);
    check("rho_unit_mass", std::abs(mass_rho - 1.0) <= 1e-12, mass_rho);
  }

  run.summary["checks"] = checks;
  return run.finish(timer, all_pass ? kOk : kCheckFailed);
}

// ---- solve ----------------------------------------------------------------

int cmd_solve(const std::string& config_path, const std::string& out_dir, bool dump_fields) {
  Timer timer;
  Run run(config_path, out_dir, "solve");
  const PeriodicGrid g = run.cfg.make_grid();
  const DensityPair dens = run.cfg.make_densities(g);
  const ModuliChart chart =
      solve_lie(g, run.cfg.cost, dens, run.cfg.tau, ScalarField(g), run.cfg.solver);
  run.summary["metrics"] = json{{"converged", chart.converged},
                                {"residual_inf", chart.residual_inf},
                                {"residual_l2", chart.residual_l2},
                                {"newton_iters", chart.newton_iters},
                                {"transport_cost", transport_cost(chart.state)},
                                {"min_w_eig", chart.state.min_w_eig},
                                {"residual_history", chart.residual_history}};
  if (dump_fields) {
    OneFormField T(g);
    for (int c = 0; c < g.dim(); ++c) {
      auto dst = T.component(c);
      for (index_t i = 0; i < g.num_nodes(); ++i)
        dst[static_cast<size_t>(i)] = chart.state.T_at(c, i);
    }
    run.dump_field("T", pack(T));
    run.dump_field("theta", pack(chart.state.theta));
    run.dump_field("phi", pack(chart.phi));
  }
  return run.finish(timer, chart.converged ? kOk : kNoConvergence);
}

// ---- deform ---------------------------------------------------------------

int cmd_deform(const std::string& config_path, const std::string& out_dir, int direction,
               int steps, double step_size, bool dump_fields) {
  Timer timer;
  Run run(config_path, out_dir, "deform");
  const PeriodicGrid g = run.cfg.make_grid();
  const DensityPair dens = run.cfg.make_densities(g);
  ContinuationSettings settings = run.cfg.solver;
  if (steps > 0) settings.max_steps = steps;
  if (step_size > 0.0) settings.step = step_size;
  const ModuliChart base =
      solve_lie(g, run.cfg.cost, dens, run.cfg.tau, ScalarField(g), settings);
  if (!base.converged) {
    run.summary["metrics"] = json{{"converged", false}, {"residual_inf", base.residual_inf}};
    return run.finish(timer, kNoConvergence);
  }
  const FamilyResult fam = continue_family(base, direction, settings);
  run.add_artifact("family.json", to_json(fam, g.dim()));
  if (dump_fields) {
    for (size_t k = 0; k < fam.charts.size(); ++k)
      run.dump_field("phi_step" + std::to_string(k), pack(fam.charts[k].phi));
  }
  run.summary["metrics"] = json{{"completed", fam.completed},
                                {"stop_reason", fam.stop_reason},
                                {"charts", fam.charts.size()}};
  return run.finish(timer, fam.completed ? kOk : kNoConvergence);
}

// ---- audit ----------------------------------------------------------------

AuditStrategy parse_strategy(const std::string& s) {
  if (s == "random") return AuditStrategy::Random;
  if (s == "orbit") return AuditStrategy::Orbit;
  if (s == "both") return AuditStrategy::Both;
  throw ConfigError("unknown strategy: " + s);
}

int cmd_audit(const std::string& config_path, const std::string& out_dir, int k_max,
              int samples, std::int64_t seed, const std::string& strategy) {
  Timer timer;
  Run run(config_path, out_dir, "audit");
  const PeriodicGrid g = run.cfg.make_grid();
  const DensityPair dens = run.cfg.make_densities(g);
  const ModuliChart chart =
      solve_lie(g, run.cfg.cost, dens, run.cfg.tau, ScalarField(g), run.cfg.solver);
  if (!chart.converged) return run.finish(timer, kNoConvergence);
  const std::uint64_t use_seed = seed >= 0 ? static_cast<std::uint64_t>(seed) : run.cfg.seed;
  const AuditReport rep = cyclical_monotonicity_audit(chart.state, k_max, samples, use_seed,
                                                      parse_strategy(strategy));
  run.add_artifact("audit.json", to_json(rep, g.dim()));
  run.summary["metrics"] = json{{"total_cost", rep.total_cost},
                                {"violations_found", rep.violations_found},
                                {"best_gain", rep.has_best ? rep.best.gain : 0.0}};
  return run.finish(timer, kOk);
}

// ---- lb-check ---------------------------------------------------------------

json lb_at(const RunConfig& cfg, const std::array<int, 3>& sizes, double phi_amp) {
  const PeriodicGrid g(cfg.dim, sizes);
  const DensityPair dens = cfg.make_densities(g);
  const ScalarField phi = test_potential(g, phi_amp);
  const TransportState st = assemble_state(g, cfg.cost, dens, closed_eta(g, cfg.tau, phi));
  const LbReport rep = lb_check(st, test_function_z(g));
  json out = to_json(rep);
  out["sizes"] = json::array();
  for (int a = 0; a < cfg.dim; ++a) out["sizes"].push_back(sizes[static_cast<size_t>(a)]);
  out["theta_sup"] = max_abs(st.theta.values());
  return out;
}

int cmd_lb_check(const std::string& config_path, const std::string& out_dir, bool refine,
                 double phi_amp) {
  Timer timer;
  Run run(config_path, out_dir, "lb-check");
  if (run.cfg.dim < 3) throw DimensionError("lb-check requires a T^3 grid");
  json rep;
  rep["fine"] = lb_at(run.cfg, run.cfg.sizes, phi_amp);
  if (refine) {
    std::array<int, 3> half = run.cfg.sizes;
    for (int a = 0; a < run.cfg.dim; ++a) half[static_cast<size_t>(a)] /= 2;
    rep["coarse"] = lb_at(run.cfg, half, phi_amp);
    rep["refinement_ratio"] = rep["coarse"]["residual_l2"].get<double>() /
                              rep["fine"]["residual_l2"].get<double>();
  }
  run.add_artifact("lb.json", rep);
  run.summary["metrics"] = rep;
  return run.finish(timer, kOk);
}

// ---- dphi-check -------------------------------------------------------------

int cmd_dphi_check(const std::string& config_path, const std::string& out_dir,
                   const std::string& zeta_kind, const std::vector<double>& eps_list) {
  Timer timer;
  Run run(config_path, out_dir, "dphi-check");
  const PeriodicGrid g = run.cfg.make_grid();
  const DensityPair dens = run.cfg.make_densities(g);
  const ModuliChart chart =
      solve_lie(g, run.cfg.cost, dens, run.cfg.tau, ScalarField(g), run.cfg.solver);
  if (!chart.converged) return run.finish(timer, kNoConvergence);

  OneFormField zeta(g);
  if (zeta_kind == "harmonic") {
    const MetricField metric =
        g.dim() >= 3 ? MetricField::from_state(chart.state) : MetricField::flat(g);
    const HarmonicBasis basis = harmonic_basis(metric, g.dim());
    zeta = basis.forms[0];
  } else if (zeta_kind == "exact") {
    zeta = d0(test_potential(g, 1.0));
  } else if (zeta_kind == "random") {
    Rng rng(run.cfg.seed + 17);
    const int kmodes = 4;
    zeta = OneFormField::sample(g, [&](const Vec&) { return Vec{}; });
    for (int c = 0; c < g.dim(); ++c) {
      Rng mode_rng(run.cfg.seed + 31 * static_cast<std::uint64_t>(c));
      std::vector<double> amp(static_cast<size_t>(kmodes)), ph(static_cast<size_t>(kmodes));
      for (int m = 0; m < kmodes; ++m) {
        amp[static_cast<size_t>(m)] = mode_rng.uniform(-0.5, 0.5);
        ph[static_cast<size_t>(m)] = mode_rng.next_double();
      }
      auto comp = zeta.component(c);
      for (index_t i = 0; i < g.num_nodes(); ++i) {
        const Vec x = g.position(i);
        double v = 0.0;
        for (int m = 0; m < kmodes; ++m)
          v += amp[static_cast<size_t>(m)] *
               std::sin(kTwoPi * ((m % 2 ? x[0] : x[1]) * (1 + m / 2) + ph[static_cast<size_t>(m)]));
        comp[static_cast<size_t>(i)] = v;
      }
    }
    (void)rng;
  } else {
    throw ConfigError("unknown zeta kind: " + zeta_kind);
  }

  const DphiReport rep = verify_dphi(chart.state, zeta, eps_list);
  run.add_artifact("dphi.json", to_json(rep));
  run.summary["metrics"] = json{{"zeta", zeta_kind}};
  return run.finish(timer, kOk);
}

// ---- hodge-info -------------------------------------------------------------

int cmd_hodge_info(const std::string& config_path, const std::string& out_dir,
                   const std::string& metric_kind) {
  Timer timer;
  Run run(config_path, out_dir, "hodge-info");
  const PeriodicGrid g = run.cfg.make_grid();
  MetricField metric;
  if (metric_kind == "flat") {
    metric = MetricField::flat(g);
  } else if (metric_kind == "state") {
    const DensityPair dens = run.cfg.make_densities(g);
    const ModuliChart chart =
        solve_lie(g, run.cfg.cost, dens, run.cfg.tau, ScalarField(g), run.cfg.solver);
    if (!chart.converged) return run.finish(timer, kNoConvergence);
    metric = MetricField::from_state(chart.state);
  } else {
    throw ConfigError("unknown metric kind: " + metric_kind);
  }
  const HarmonicBasis basis = harmonic_basis(metric, g.dim(), run.cfg.seed + 0x5eedULL);
  json info{{"eigenvalues", basis.eigenvalues},
            {"gap_ratio", basis.gap_ratio},
            {"first_rejected", basis.first_rejected},
            {"dim", basis.forms.size()}};
  run.add_artifact("hodge.json", info);
  for (size_t k = 0; k < basis.forms.size(); ++k)
    run.dump_field("harmonic" + std::to_string(k + 1), pack(basis.forms[k]));
  std::cout << "eigenvalues:";
  for (double ev : basis.eigenvalues) std::cout << " " << format_double(ev);
  std::cout << "\ngap_ratio: " << format_double(basis.gap_ratio) << "\n";
  run.summary["metrics"] = info;
  return run.finish(timer, kOk);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lie solutions of mass-transport equations on flat tori"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  app.add_option("-c,--config", config_path, "run configuration (JSON)")->required();
  app.add_option("-o,--out", out_dir, "output directory");

  auto* sc_verify = app.add_subcommand("verify", "run the cross-module invariant suite");

  bool dump_fields = false;
  auto* sc_solve = app.add_subcommand("solve", "Newton-solve theta = 0 at the config tau");
  sc_solve->add_flag("--dump-fields", dump_fields, "write T/theta/phi field dumps");

  int direction = 1, steps = 0;
  double step_size = 0.0;
  bool deform_dump = false;
  auto* sc_deform = app.add_subcommand("deform", "continue the moduli family");
  sc_deform->add_option("--direction", direction, "cohomology direction 1..n");
  sc_deform->add_option("--steps", steps, "number of continuation steps");
  sc_deform->add_option("--step-size", step_size, "tau increment per step");
  sc_deform->add_flag("--dump-fields", deform_dump, "write per-step potential dumps");

  int k_max = 8, samples = 1000;
  std::int64_t audit_seed = -1;
  std::string strategy = "both";
  auto* sc_audit = app.add_subcommand("audit", "hunt for c-cyclical monotonicity violations");
  sc_audit->add_option("--k-max", k_max, "max tuple size for random search (2..8)");
  sc_audit->add_option("--samples", samples, "search budget per strategy");
  sc_audit->add_option("--seed", audit_seed, "override the config seed");
  sc_audit->add_option("--strategy", strategy, "random | orbit | both");

  bool refine = false;
  double phi_amp = 0.008;
  auto* sc_lb = app.add_subcommand("lb-check", "Laplace-Beltrami identity check (T^3)");
  sc_lb->add_flag("--refine", refine, "also run at half resolution");
  sc_lb->add_option("--phi-amp", phi_amp, "test potential amplitude");

  std::string zeta_kind = "random";
  std::string eps_csv = "1e-2,3e-3,1e-3";
  auto* sc_dphi = app.add_subcommand("dphi-check", "finite-difference check of D Phi");
  sc_dphi->add_option("--zeta", zeta_kind, "harmonic | exact | random");
  sc_dphi->add_option("--eps", eps_csv, "comma-separated sweep");

  std::string metric_kind = "flat";
  auto* sc_hodge = app.add_subcommand("hodge-info", "harmonic basis and spectral gap");
  sc_hodge->add_option("--metric", metric_kind, "flat | state");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sc_verify->parsed()) return cmd_verify(config_path, out_dir);
    if (sc_solve->parsed()) return cmd_solve(config_path, out_dir, dump_fields);
    if (sc_deform->parsed())
      return cmd_deform(config_path, out_dir, direction, steps, step_size, deform_dump);
    if (sc_audit->parsed())
      return cmd_audit(config_path, out_dir, k_max, samples, audit_seed, strategy);
    if (sc_lb->parsed()) return cmd_lb_check(config_path, out_dir, refine, phi_amp);
    if (sc_dphi->parsed()) {
      std::vector<double> eps_list;
      std::stringstream ss(eps_csv);
      std::string tok;
      while (std::getline(ss, tok, ',')) eps_list.push_back(std::strtod(tok.c_str(), nullptr));
      if (eps_list.empty()) throw ConfigError("empty eps list");
      return cmd_dphi_check(config_path, out_dir, zeta_kind, eps_list);
    }
    if (sc_hodge->parsed()) return cmd_hodge_info(config_path, out_dir, metric_kind);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NotClosedError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const CutLocusError& e) {
    std::cerr << "cut locus: " << e.what() << "\n";
    return kCutLocus;
  } catch (const SingularJetError& e) {
    std::cerr << "singular jet: " << e.what() << "\n";
    return kCutLocus;
  } catch (const SpectralGapError& e) {
    std::cerr << "spectral gap: " << e.what() << "\n";
    return kSpectralGap;
  } catch (const NoConvergenceError& e) {
    std::cerr << "no convergence: " << e.what() << "\n";
    return kNoConvergence;
  } catch (const NonConvexBreakdownError& e) {
    std::cerr << "non-convex breakdown: " << e.what() << "\n";
    return kNoConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}
