#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "helpers.hpp"
#include "lt/audit.hpp"
#include "lt/moduli.hpp"

using namespace lt;
using namespace lt_test;

namespace {

TransportState translation_state(const PeriodicGrid& g, double t1, double t2 = 0.0) {
  Vec tau;
  tau[0] = t1;
  tau[1] = t2;
  return assemble_state(g, CostModel::quadratic(), DensityPair::uniform(g),
                        constant_form(g, tau));
}

}  // namespace

TEST_CASE("transport_cost") {
  const PeriodicGrid g = PeriodicGrid::cube(2, 32);
  CHECK(std::abs(transport_cost(translation_state(g, 0.0))) <= 1e-13);
  CHECK(transport_cost(translation_state(g, 0.1)) == Catch::Approx(0.005).margin(1e-10));
  CHECK(transport_cost(translation_state(g, 0.1, 0.1)) == Catch::Approx(0.01).margin(1e-10));
}

TEST_CASE("cycle_gain") {
  const CostModel q = CostModel::quadratic();

  SECTION("the wrap-around 4-cycle under tau = 0.25") {
    std::vector<Vec> pts(4), imgs(4);
    for (int i = 0; i < 4; ++i) {
      pts[static_cast<size_t>(i)][0] = 0.25 * i;
      pts[static_cast<size_t>(i)][1] = 0.5;
      imgs[static_cast<size_t>(i)][0] = wrap_unit(0.25 * i + 0.25);
      imgs[static_cast<size_t>(i)][1] = 0.5;
    }
    const CycleViolation v = cycle_gain(q, pts, imgs, 2);
    CHECK(v.plan_cost == Catch::Approx(0.125).margin(1e-14));
    CHECK(v.best_reassignment_cost == Catch::Approx(0.0).margin(1e-14));
    CHECK(v.gain == Catch::Approx(0.125).margin(1e-14));
    CHECK(v.shift == 3);  // assign each point its predecessor's image
    CHECK(v.skipped_shifts == 1);  // the half-period shift hits the cut locus

    // gain is invariant under cyclic relabeling
    std::vector<Vec> pts_r(4), imgs_r(4);
    for (int i = 0; i < 4; ++i) {
      pts_r[static_cast<size_t>(i)] = pts[static_cast<size_t>((i + 1) % 4)];
      imgs_r[static_cast<size_t>(i)] = imgs[static_cast<size_t>((i + 1) % 4)];
    }
    CHECK(cycle_gain(q, pts_r, imgs_r, 2).gain == Catch::Approx(v.gain).margin(1e-14));
  }

  SECTION("pairs never witness a translation") {
    Vec x1, x2;
    x1[0] = 0.12;
    x1[1] = 0.7;
    x2 = x1;
    x2[0] = wrap_unit(x1[0] + 0.1);
    std::vector<Vec> pts{x1, x2};
    std::vector<Vec> imgs{x2, Vec{}};
    imgs[1] = x2;
    imgs[1][0] = wrap_unit(x2[0] + 0.1);
    const CycleViolation v = cycle_gain(q, pts, imgs, 2);
    CHECK(v.gain == Catch::Approx(-0.01).margin(1e-12));  // -tau^2
  }

  SECTION("identity pairs are cyclically monotone") {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
      std::vector<Vec> pts(2);
      for (auto& p : pts)
        for (int a = 0; a < 2; ++a) p[a] = rng.next_double();
      CHECK(cycle_gain(q, pts, pts, 2).gain <= 1e-15);
    }
  }

  SECTION("contract bounds") {
    std::vector<Vec> one(1);
    CHECK_THROWS_AS(cycle_gain(q, one, one, 2), ConfigError);
  }
}

TEST_CASE("cyclical_monotonicity_audit") {
  const PeriodicGrid g = PeriodicGrid::cube(2, 32);

  SECTION("identity plan is clean") {
    const auto st = translation_state(g, 0.0);
    const AuditReport rep = cyclical_monotonicity_audit(st, 8, 1000, 0);
    CHECK(rep.violations_found == 0);
    CHECK_FALSE(rep.has_best);
    CHECK(rep.total_cost <= 1e-12);
  }

  SECTION("tau = 0.25 e1: orbit tracing finds the 4-cycle") {
    const auto st = translation_state(g, 0.25);
    const AuditReport rep =
        cyclical_monotonicity_audit(st, 8, 1000, 0, AuditStrategy::Orbit);
    CHECK(rep.violations_found > 0);
    REQUIRE(rep.has_best);
    CHECK(rep.best.points.size() == 4);
    CHECK(rep.best.gain >= 0.12);
    CHECK(rep.best.gain == Catch::Approx(0.125).margin(1e-6));
  }

  SECTION("tau = 0.1 e1: pairs fail, the orbit 10-cycle succeeds") {
    const auto st = translation_state(g, 0.1);
    const AuditReport pairs =
        cyclical_monotonicity_audit(st, 2, 500, 7, AuditStrategy::Random);
    CHECK(pairs.violations_found == 0);

    const AuditReport orbit =
        cyclical_monotonicity_audit(st, 8, 500, 7, AuditStrategy::Orbit);
    CHECK(orbit.violations_found > 0);
    REQUIRE(orbit.has_best);
    CHECK(orbit.best.points.size() == 10);
    CHECK(orbit.best.gain == Catch::Approx(0.05).margin(1e-6));
  }

  SECTION("byte-identical reports for identical seeds") {
    const auto st = translation_state(g, 0.25);
    const AuditReport a = cyclical_monotonicity_audit(st, 6, 200, 42);
    const AuditReport b = cyclical_monotonicity_audit(st, 6, 200, 42);
    CHECK(a.total_cost == b.total_cost);
    CHECK(a.violations_found == b.violations_found);
    CHECK(a.samples_checked == b.samples_checked);
    REQUIRE(a.has_best == b.has_best);
    REQUIRE(a.best.points.size() == b.best.points.size());
    for (size_t i = 0; i < a.best.points.size(); ++i)
      for (int c = 0; c < 2; ++c) {
        CHECK(a.best.points[i][c] == b.best.points[i][c]);
        CHECK(a.best.images[i][c] == b.best.images[i][c]);
      }
    CHECK(a.best.gain == b.best.gain);
  }
}

TEST_CASE("optimality_gap") {
  const PeriodicGrid g = PeriodicGrid::cube(2, 32);

  SECTION("identity and translations with rho = rhobar") {
    CHECK(optimality_gap(translation_state(g, 0.0)) <= 1e-13);
    CHECK(optimality_gap(translation_state(g, 0.1)) == Catch::Approx(0.005).margin(1e-10));
  }

  SECTION("the fake-solution signature along a nonuniform family") {
    const DensityPair dens = DensityPair::make(g, DensitySpec::cosine({1, 0, 0}, 0.2),
                                               DensitySpec::cosine({1, 0, 0}, 0.2));
    ContinuationSettings set;
    set.newton_tol = 1e-4;
    set.step = 0.03;
    set.max_steps = 3;
    const ModuliChart base =
        solve_lie(g, CostModel::quadratic(), dens, Vec{}, ScalarField(g), set);
    const FamilyResult fam = continue_family(base, 1, set);
    REQUIRE(fam.completed);
    double prev = -1.0;
    for (const auto& chart : fam.charts) {
      const double gap = optimality_gap(chart.state);
      CHECK(gap > prev);
      prev = gap;
      // volume preserving within the solve tolerance yet globally suboptimal
      CHECK(max_abs(pushforward_residual(chart.state).values()) <= 1e-3);
    }
    CHECK(prev > 1e-4);
  }

  SECTION("density mismatch is rejected") {
    const DensityPair dens = DensityPair::make(g, DensitySpec::cosine({1, 0, 0}, 0.2),
                                               DensitySpec::uniform());
    const auto st = assemble_state(g, CostModel::quadratic(), dens, OneFormField(g));
    CHECK_THROWS_AS(optimality_gap(st), DensityMismatchError);
  }
}
