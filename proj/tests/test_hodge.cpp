#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "helpers.hpp"
#include "lt/hodge.hpp"

using namespace lt;
using namespace lt_test;

namespace {

TwoFormField random_smooth_2form(const PeriodicGrid& g, std::uint64_t seed, double amp = 1.0) {
  TwoFormField f(g);
  for (int c = 0; c < f.num_components(); ++c) {
    const ScalarField s = random_smooth(g, seed + static_cast<std::uint64_t>(13 * c), 3, amp);
    auto dst = f.component(c);
    for (index_t i = 0; i < g.num_nodes(); ++i) dst[static_cast<size_t>(i)] = s[i];
  }
  return f;
}

MetricField bumpy_metric(const PeriodicGrid& g, std::uint64_t seed) {
  const ScalarField lam = ScalarField::sample(g, [&](const Vec& x) {
    return 1.0 + 0.25 * std::cos(kTwoPi * x[0]) + 0.15 * std::sin(kTwoPi * (x[1] + x[0]));
  });
  (void)seed;
  return MetricField::conformal(g, lam);
}

double form_norm_1(const MetricField& m, const OneFormField& f) {
  return std::sqrt(inner_product_1(m, f, f));
}

}  // namespace

TEST_CASE("inner products") {
  const PeriodicGrid g = PeriodicGrid::cube(2, 16);
  const MetricField flat = MetricField::flat(g);
  Vec e1, e2;
  e1[0] = 1.0;
  e2[1] = 1.0;
  const OneFormField dx1 = constant_form(g, e1);
  const OneFormField dx2 = constant_form(g, e2);
  CHECK(inner_product_1(flat, dx1, dx1) == Catch::Approx(1.0).margin(1e-12));
  CHECK(inner_product_1(flat, dx1, dx2) == Catch::Approx(0.0).margin(1e-13));

  // conformal metric: <dx1,dx1> = integral of lambda^{n/2-1}
  const PeriodicGrid g3 = PeriodicGrid::cube(3, 8);
  const ScalarField lam = ScalarField::sample(
      g3, [](const Vec& x) { return 1.0 + 0.3 * std::cos(kTwoPi * x[0]); });
  const MetricField conf = MetricField::conformal(g3, lam);
  Vec e;
  e[0] = 1.0;
  const OneFormField f = constant_form(g3, e);
  const ScalarField integrand = ScalarField::sample(
      g3, [&](const Vec& x) { return std::sqrt(1.0 + 0.3 * std::cos(kTwoPi * x[0])); });
  CHECK(inner_product_1(conf, f, f) ==
        Catch::Approx(integrate(integrand)).margin(1e-12));
}

TEST_CASE("codifferentials are exact adjoints") {
  for (int dim : {2, 3}) {
    const PeriodicGrid g = PeriodicGrid::cube(dim, dim == 2 ? 16 : 10);
    const MetricField metric = bumpy_metric(g, 3);
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
      const ScalarField a = random_smooth(g, 1000 + trial);
      const OneFormField eta = random_smooth_form(g, 2000 + trial);
      const double lhs = inner_product_1(metric, d0(a), eta);
      const double rhs = inner_product_0(metric, a, codiff_1(metric, eta));
      CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));

      const TwoFormField om = random_smooth_2form(g, 3000 + trial);
      const double lhs2 = inner_product_2(metric, d1(eta), om);
      const double rhs2 = inner_product_1(metric, eta, codiff_2(metric, om));
      CHECK(std::abs(lhs2 - rhs2) <= 1e-12 * std::max(1.0, std::abs(lhs2)));
    }
  }
}

TEST_CASE("flat codifferential is minus the divergence") {
  const PeriodicGrid g = PeriodicGrid::cube(2, 32);
  const MetricField flat = MetricField::flat(g);
  Vec c;
  c[0] = 0.4;
  c[1] = -0.2;
  CHECK(max_abs(codiff_1(flat, constant_form(g, c)).values()) <= 1e-14);

  const auto u = ScalarField::sample(g, [](const Vec& x) { return std::sin(kTwoPi * x[0]); });
  const ScalarField d = codiff_1(flat, d0(u));
  const double h = g.spacing(0);
  const double fac = std::sin(kTwoPi * h) / h;
  for (index_t i = 0; i < g.num_nodes(); ++i)
    CHECK(d[i] == Catch::Approx(fac * fac * u[i]).margin(1e-11));
}

TEST_CASE("hodge laplacian") {
  const PeriodicGrid g = PeriodicGrid::cube(2, 24);
  const MetricField flat = MetricField::flat(g);
  Vec e1;
  e1[0] = 1.0;
  CHECK(max_abs(hodge_laplacian_1(flat, constant_form(g, e1)).values()) <= 1e-14);

  // eta = sin(2 pi x1) dx2: componentwise discrete -Lap
  const OneFormField eta = OneFormField::sample(g, [](const Vec& x) {
    Vec v;
    v[1] = std::sin(kTwoPi * x[0]);
    return v;
  });
  const OneFormField lap = hodge_laplacian_1(flat, eta);
  const double h = g.spacing(0);
  const double fac = std::sin(kTwoPi * h) / h;
  for (index_t i = 0; i < g.num_nodes(); ++i) {
    CHECK(lap.at(1, i) == Catch::Approx(fac * fac * eta.at(1, i)).margin(1e-11));
    CHECK(lap.at(0, i) == Catch::Approx(0.0).margin(1e-12));
  }

  const MetricField bump = bumpy_metric(g, 5);
  for (int t = 0; t < 10; ++t) {
    const OneFormField r = random_smooth_form(g, 400 + static_cast<std::uint64_t>(t));
    CHECK(inner_product_1(bump, hodge_laplacian_1(bump, r), r) >= -1e-11);
  }
}

TEST_CASE("harmonic basis on the flat torus") {
  const PeriodicGrid g = PeriodicGrid::cube(2, 24);
  const MetricField flat = MetricField::flat(g);
  const HarmonicBasis basis = harmonic_basis(flat, 2);
  REQUIRE(basis.forms.size() == 2);
  CHECK(basis.gap_ratio >= 1e6);
  for (int k = 0; k < 2; ++k) {
    CHECK(std::abs(basis.eigenvalues[static_cast<size_t>(k)]) <= 1e-10);
    const OneFormField& f = basis.forms[static_cast<size_t>(k)];
    CHECK(form_norm_1(flat, hodge_laplacian_1(flat, f)) <= 1e-8 * form_norm_1(flat, f));
    // distance to span{dx1, dx2}: constants are the kernel
    double resid = 0.0;
    Vec meanv;
    for (int c = 0; c < 2; ++c) {
      double mc = 0.0;
      for (index_t i = 0; i < g.num_nodes(); ++i) mc += f.at(c, i);
      meanv[c] = mc / static_cast<double>(g.num_nodes());
    }
    for (int c = 0; c < 2; ++c)
      for (index_t i = 0; i < g.num_nodes(); ++i)
        resid = std::max(resid, std::abs(f.at(c, i) - meanv[c]));
    CHECK(resid <= 1e-6);  // subspace angle
  }
  // g-orthonormality
  CHECK(inner_product_1(flat, basis.forms[0], basis.forms[1]) ==
        Catch::Approx(0.0).margin(1e-10));
  CHECK(inner_product_1(flat, basis.forms[0], basis.forms[0]) ==
        Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("kernel dimension is metric independent") {
  const PeriodicGrid g = PeriodicGrid::cube(2, 20);
  const MetricField conf = bumpy_metric(g, 9);
  const HarmonicBasis basis = harmonic_basis(conf, 2);
  CHECK(basis.gap_ratio >= 100.0);
  for (const auto& f : basis.forms)
    CHECK(form_norm_1(conf, hodge_laplacian_1(conf, f)) <= 1e-8 * form_norm_1(conf, f));

  // no 3-dimensional kernel exists on T^2
  CHECK_THROWS_AS(harmonic_basis(conf, 3), SpectralGapError);
}

TEST_CASE("hodge decomposition") {
  const PeriodicGrid g = PeriodicGrid::cube(2, 24);
  const MetricField flat = MetricField::flat(g);
  const HarmonicBasis fb = harmonic_basis(flat, 2);

  SECTION("recovers a known exact form") {
    ScalarField alpha0 = random_smooth(g, 55, 2, 0.5);
    const double m0 = mean(alpha0);
    for (index_t i = 0; i < g.num_nodes(); ++i) alpha0[i] -= m0;
    const HodgeDecomposition dec = hodge_decompose(flat, d0(alpha0), fb);
    CHECK(max_abs(dec.harmonic.values()) <= 1e-9);
    CHECK(max_abs(codiff_2(flat, dec.coexact_potential).values()) <= 1e-9);
    CHECK(max_abs_diff(dec.exact_potential.values(), alpha0.values()) <= 1e-9);
  }

  SECTION("splits dx1 + d(sin 2 pi x2)") {
    const auto f = ScalarField::sample(g, [](const Vec& x) { return std::sin(kTwoPi * x[1]); });
    OneFormField eta = d0(f);
    {
      auto comp = eta.component(0);
      for (index_t i = 0; i < g.num_nodes(); ++i) comp[static_cast<size_t>(i)] += 1.0;
    }
    const HodgeDecomposition dec = hodge_decompose(flat, eta, fb);
    for (index_t i = 0; i < g.num_nodes(); ++i) {
      CHECK(dec.harmonic.at(0, i) == Catch::Approx(1.0).margin(1e-9));
      CHECK(dec.harmonic.at(1, i) == Catch::Approx(0.0).margin(1e-9));
    }
  }

  SECTION("reconstruction, orthogonality, Pythagoras under a bumpy metric") {
    const MetricField metric = bumpy_metric(g, 12);
    const HarmonicBasis basis = harmonic_basis(metric, 2);
    const OneFormField eta = random_smooth_form(g, 321, 0.8);
    const HodgeDecomposition dec = hodge_decompose(metric, eta, basis);
    const OneFormField ex = d0(dec.exact_potential);
    const OneFormField co = codiff_2(metric, dec.coexact_potential);

    OneFormField recon(g);
    double recon_err = 0.0;
    for (size_t i = 0; i < recon.values().size(); ++i) {
      recon.values()[i] = dec.harmonic.values()[i] + ex.values()[i] + co.values()[i];
      recon_err = std::max(recon_err, std::abs(recon.values()[i] - eta.values()[i]));
    }
    const double scale = max_abs(eta.values());
    CHECK(recon_err <= 1e-9 * scale);

    const double nh = form_norm_1(metric, dec.harmonic), ne = form_norm_1(metric, ex),
                 nc = form_norm_1(metric, co), nt = form_norm_1(metric, eta);
    CHECK(std::abs(inner_product_1(metric, dec.harmonic, ex)) <= 1e-9 * nh * ne);
    CHECK(std::abs(inner_product_1(metric, dec.harmonic, co)) <= 1e-9 * nh * nc);
    CHECK(std::abs(inner_product_1(metric, ex, co)) <= 1e-9 * ne * nc);
    CHECK(nh * nh + ne * ne + nc * nc == Catch::Approx(nt * nt).epsilon(1e-8));
  }
}

TEST_CASE("laplacian commutes with d on 0-forms") {
  const PeriodicGrid g = PeriodicGrid::cube(2, 16);
  const MetricField metric = bumpy_metric(g, 31);
  const ScalarField a = random_smooth(g, 17, 2, 0.7);
  const OneFormField lhs = hodge_laplacian_1(metric, d0(a));
  const OneFormField rhs = d0(laplacian_0(metric, a));
  CHECK(max_abs_diff(lhs.values(), rhs.values()) <= 1e-10 * std::max(1.0, max_abs(lhs.values())));
}
