#pragma once

#include <cmath>
#include <vector>

#include "lt/cost.hpp"
#include "lt/errors.hpp"
#include "lt/grid.hpp"

namespace lt {

// Densities are truncated Fourier series, sampled on the grid and then
// normalized to unit mass by explicit division. Smooth, exactly periodic,
// reproducible.
struct FourierTerm {
  std::array<int, 3> k{0, 0, 0};
  double cos_coef = 0.0;
  double sin_coef = 0.0;
};

struct DensitySpec {
  double base = 1.0;
  std::vector<FourierTerm> terms;

  double eval(const Vec& x, int dim) const {
    double v = base;
    for (const auto& t : terms) {
      double phase = 0.0;
      for (int a = 0; a < dim; ++a) phase += t.k[static_cast<size_t>(a)] * x[a];
      phase *= kTwoPi;
      if (t.cos_coef != 0.0) v += t.cos_coef * std::cos(phase);
      if (t.sin_coef != 0.0) v += t.sin_coef * std::sin(phase);
    }
    return v;
  }

  static DensitySpec uniform() { return DensitySpec{}; }

  static DensitySpec cosine(std::array<int, 3> k, double amp) {
    DensitySpec s;
    s.terms.push_back({k, amp, 0.0});
    return s;
  }
};

inline ScalarField make_density(const PeriodicGrid& g, const DensitySpec& spec) {
  ScalarField f = ScalarField::sample(g, [&](const Vec& x) { return spec.eval(x, g.dim()); },
                                      /*check_periodic=*/false);
  const double mass = integrate(f);
  if (!(mass > 0.0)) throw ConfigError("density has non-positive total mass");
  double mn = std::numeric_limits<double>::infinity();
  for (index_t i = 0; i < g.num_nodes(); ++i) {
    f[i] /= mass;
    mn = std::min(mn, f[i]);
  }
  if (mn < 1e-6) throw ConfigError("density minimum " + format_double(mn) + " below 1e-6");
  return f;
}

// Source and target densities on the same lattice, both unit mass.
struct DensityPair {
  ScalarField rho;
  ScalarField rhobar;

  static DensityPair make(const PeriodicGrid& g, const DensitySpec& rho_spec,
                          const DensitySpec& rhobar_spec) {
    DensityPair d{make_density(g, rho_spec), make_density(g, rhobar_spec)};
    return d;
  }

  static DensityPair uniform(const PeriodicGrid& g) {
    return make(g, DensitySpec::uniform(), DensitySpec::uniform());
  }
};

}  // namespace lt
