#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lt/cost.hpp"
#include "lt/density.hpp"
#include "lt/errors.hpp"
#include "lt/grid.hpp"
#include "lt/moduli.hpp"
#include "lt/util.hpp"

namespace lt {

using json = nlohmann::json;

// Run configuration: one structured JSON file drives every subcommand.
struct RunConfig {
  int dim = 2;
  std::array<int, 3> sizes{64, 64, 1};
  CostModel cost = CostModel::quadratic();
  DensitySpec rho_spec;
  DensitySpec rhobar_spec;
  ContinuationSettings solver;
  Vec tau;
  std::uint64_t seed = 0;
  json raw;

  PeriodicGrid make_grid() const { return PeriodicGrid(dim, sizes); }
  DensityPair make_densities(const PeriodicGrid& g) const {
    return DensityPair::make(g, rho_spec, rhobar_spec);
  }
  std::string hash() const { return fnv1a64_hex(raw.dump()); }
};

namespace config_detail {

inline DensitySpec parse_density(const json& j) {
  DensitySpec spec;
  if (j.contains("base")) spec.base = j.at("base").get<double>();
  if (spec.base <= 0.0) throw ConfigError("density base must be positive");
  if (j.contains("fourier")) {
    for (const auto& t : j.at("fourier")) {
      FourierTerm term;
      const auto& k = t.at("k");
      if (!k.is_array() || k.size() > 3) throw ConfigError("fourier k must be a short vector");
      for (size_t a = 0; a < k.size(); ++a) term.k[a] = k[a].get<int>();
      if (t.contains("cos")) term.cos_coef = t.at("cos").get<double>();
      if (t.contains("sin")) term.sin_coef = t.at("sin").get<double>();
      spec.terms.push_back(term);
    }
  }
  return spec;
}

inline TwistWindow parse_window(const json& j) {
  TwistWindow w;
  if (j.contains("max_disp")) w.max_disp = j.at("max_disp").get<double>();
  if (j.contains("margin")) w.margin = j.at("margin").get<double>();
  w.validate();
  return w;
}

}  // namespace config_detail

inline RunConfig parse_config(const json& j) {
  RunConfig cfg;
  cfg.raw = j;

  const auto& grid = j.at("grid");
  cfg.dim = grid.at("dim").get<int>();
  const auto& sizes = grid.at("sizes");
  if (!sizes.is_array() || static_cast<int>(sizes.size()) != cfg.dim)
    throw ConfigError("grid.sizes must list one count per axis");
  for (int a = 0; a < cfg.dim; ++a) cfg.sizes[static_cast<size_t>(a)] = sizes[static_cast<size_t>(a)].get<int>();
  for (int a = cfg.dim; a < 3; ++a) cfg.sizes[static_cast<size_t>(a)] = 1;
  cfg.make_grid();  // validates now, before anything runs

  TwistWindow window;
  if (j.contains("window")) window = config_detail::parse_window(j.at("window"));

  if (j.contains("cost")) {
    const auto& c = j.at("cost");
    const std::string kind = c.at("kind").get<std::string>();
    if (kind == "quadratic-periodic") {
      cfg.cost = CostModel::quadratic(window);
    } else if (kind == "perturbed-quadratic") {
      std::array<int, 3> freq{1, 1, 0};
      if (c.contains("freq")) {
        const auto& f = c.at("freq");
        for (size_t a = 0; a < f.size() && a < 3; ++a) freq[a] = f[a].get<int>();
      }
      const double eps = c.value("epsilon", 0.0);
      const double eps_sep = c.value("separable_epsilon", 0.0);
      cfg.cost = CostModel::perturbed(eps, freq, eps_sep, window);
    } else {
      throw ConfigError("unknown cost kind: " + kind);
    }
  } else {
    cfg.cost = CostModel::quadratic(window);
  }

  if (j.contains("rho")) cfg.rho_spec = config_detail::parse_density(j.at("rho"));
  if (j.contains("rhobar")) cfg.rhobar_spec = config_detail::parse_density(j.at("rhobar"));

  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    cfg.solver.step = s.value("step", cfg.solver.step);
    cfg.solver.max_steps = s.value("max_steps", cfg.solver.max_steps);
    cfg.solver.newton_tol = s.value("newton_tol", cfg.solver.newton_tol);
    cfg.solver.max_newton = s.value("max_newton", cfg.solver.max_newton);
    cfg.solver.validate();
  }

  if (j.contains("tau")) {
    const auto& t = j.at("tau");
    if (static_cast<int>(t.size()) != cfg.dim) throw ConfigError("tau must have grid dim entries");
    for (int a = 0; a < cfg.dim; ++a) cfg.tau[a] = t[static_cast<size_t>(a)].get<double>();
  }
  cfg.seed = j.value("seed", 0ULL);
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  try {
    return parse_config(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config schema error: ") + e.what());
  }
}

// ---- report serializers -------------------------------------------------

inline json to_json(const TwistReport& r) {
  return json{{"min_det_b", r.min_det_b},
              {"min_eigenvalue", r.min_eigenvalue},
              {"samples", r.samples},
              {"pass", r.pass}};
}

inline json to_json(const LbReport& r) {
  return json{{"residual_sup", r.residual_sup},
              {"residual_l2", r.residual_l2},
              {"lhs_l2", r.lhs_l2},
              {"rel_l2", r.rel_l2}};
}

inline json to_json(const DphiReport& r) {
  json sweep = json::array();
  for (const auto& s : r.sweep)
    sweep.push_back(json{{"eps", s.eps},
                         {"kahler_rel", s.kahler_rel},
                         {"kahler_abs", s.kahler_abs},
                         {"mass_rel", s.mass_rel},
                         {"mass_abs", s.mass_abs}});
  return json{{"sweep", sweep},
              {"dzeta_norm", r.dzeta_norm},
              {"rhoD_norm", r.rhoD_norm},
              {"kahler_sign", r.kahler_sign},
              {"codiff_factor", r.codiff_factor},
              {"codiff_fit_rel", r.codiff_fit_rel},
              {"mass_reference", "rho * mass_linearization_D (1/lam prefactor omitted)"}};
}

inline json to_json(const FamilyResult& fam, int dim) {
  json steps = json::array();
  for (const auto& s : fam.steps) {
    json tau = json::array();
    for (int a = 0; a < dim; ++a) tau.push_back(s.tau[a]);
    steps.push_back(json{{"tau", tau},
                         {"cost", s.cost},
                         {"residual_inf", s.residual_inf},
                         {"residual_l2", s.residual_l2},
                         {"newton_iters", s.newton_iters},
                         {"converged", s.converged}});
  }
  return json{{"steps", steps}, {"completed", fam.completed}, {"stop_reason", fam.stop_reason}};
}

inline json to_json(const CycleViolation& v, int dim) {
  auto pts = json::array();
  auto imgs = json::array();
  for (size_t i = 0; i < v.points.size(); ++i) {
    json p = json::array(), q = json::array();
    for (int a = 0; a < dim; ++a) {
      p.push_back(v.points[i][a]);
      q.push_back(v.images[i][a]);
    }
    pts.push_back(p);
    imgs.push_back(q);
  }
  return json{{"points", pts},
              {"images", imgs},
              {"plan_cost", v.plan_cost},
              {"best_reassignment_cost", v.best_reassignment_cost},
              {"gain", v.gain},
              {"shift", v.shift},
              {"skipped_shifts", v.skipped_shifts}};
}

inline json to_json(const AuditReport& r, int dim) {
  json j{{"total_cost", r.total_cost},
         {"violations_found", r.violations_found},
         {"samples_checked", r.samples_checked},
         {"skipped", r.skipped},
         {"seed", r.seed}};
  j["best"] = r.has_best ? to_json(r.best, dim) : json(nullptr);
  return j;
}

inline json to_json(const KernelReport& r) {
  return json{{"dim", r.dim},
              {"singular_values", r.singular_values},
              {"sigma_max", r.sigma_max},
              {"gap_ratio", r.gap_ratio}};
}

}  // namespace lt
