#pragma once

#include <cmath>
#include <vector>

#include "lt/density.hpp"
#include "lt/grid.hpp"
#include "lt/util.hpp"

namespace lt_test {

using namespace lt;

// Band-limited trigonometric polynomial: smooth, exactly periodic, and free
// of Nyquist content.
inline ScalarField random_smooth(const PeriodicGrid& g, std::uint64_t seed, int max_k = 3,
                                 double amp = 1.0) {
  Rng rng(seed);
  struct Mode {
    int k[3];
    double ac, as;
  };
  std::vector<Mode> modes;
  for (int t = 0; t < 6; ++t) {
    Mode m{};
    for (int a = 0; a < g.dim(); ++a) m.k[a] = rng.uniform_int(-max_k, max_k);
    m.ac = rng.uniform(-amp, amp);
    m.as = rng.uniform(-amp, amp);
    modes.push_back(m);
  }
  return ScalarField::sample(g, [&, modes](const Vec& x) {
    double v = 0.0;
    for (const auto& m : modes) {
      double ph = 0.0;
      for (int a = 0; a < g.dim(); ++a) ph += m.k[a] * x[a];
      v += m.ac * std::cos(kTwoPi * ph) + m.as * std::sin(kTwoPi * ph);
    }
    return v;
  });
}

inline OneFormField random_smooth_form(const PeriodicGrid& g, std::uint64_t seed,
                                       double amp = 1.0) {
  OneFormField f(g);
  for (int c = 0; c < g.dim(); ++c) {
    const ScalarField s = random_smooth(g, seed + static_cast<std::uint64_t>(97 * c), 3, amp);
    auto dst = f.component(c);
    for (index_t i = 0; i < g.num_nodes(); ++i) dst[static_cast<size_t>(i)] = s[i];
  }
  return f;
}

// eta = sum_a tau_a dx^a + d phi
inline OneFormField closed_form(const PeriodicGrid& g, const Vec& tau, const ScalarField& phi) {
  OneFormField eta = d0(phi);
  for (int c = 0; c < g.dim(); ++c) {
    auto comp = eta.component(c);
    for (index_t i = 0; i < g.num_nodes(); ++i) comp[static_cast<size_t>(i)] += tau[c];
  }
  return eta;
}

inline OneFormField constant_form(const PeriodicGrid& g, const Vec& tau) {
  return closed_form(g, tau, ScalarField(g));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace lt_test
