#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "lt/cost.hpp"
#include "lt/grid.hpp"

using namespace lt;

namespace {

Vec vec2(double a, double b) {
  Vec v;
  v[0] = a;
  v[1] = b;
  return v;
}

// Nested central finite differences of the plain cost value; the oracle for
// every analytic jet entry.
struct FdJet {
  const CostModel& m;
  int dim;
  double d1x(const Vec& x, const Vec& xb, int i, double h) const {
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    return (cost_value(m, xp, xb, dim) - cost_value(m, xm, xb, dim)) / (2 * h);
  }
  double d1xb(const Vec& x, const Vec& xb, int s, double h) const {
    Vec xp = xb, xm = xb;
    xp[s] += h;
    xm[s] -= h;
    return (cost_value(m, x, xp, dim) - cost_value(m, x, xm, dim)) / (2 * h);
  }
  double d2xx(const Vec& x, const Vec& xb, int i, int j, double h) const {
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    return (d1x(xp, xb, i, h) - d1x(xm, xb, i, h)) / (2 * h);
  }
  double d2xxb(const Vec& x, const Vec& xb, int i, int s, double h) const {
    Vec xp = xb, xm = xb;
    xp[s] += h;
    xm[s] -= h;
    return (d1x(x, xp, i, h) - d1x(x, xm, i, h)) / (2 * h);
  }
  double d3xxb_x(const Vec& x, const Vec& xb, int i, int s, int j, double h) const {
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    return (d2xxb(xp, xb, i, s, h) - d2xxb(xm, xb, i, s, h)) / (2 * h);
  }
  double d3xxb_xb(const Vec& x, const Vec& xb, int i, int s, int p, double h) const {
    Vec xp = xb, xm = xb;
    xp[p] += h;
    xm[p] -= h;
    return (d2xxb(x, xp, i, s, h) - d2xxb(x, xm, i, s, h)) / (2 * h);
  }
};

}  // namespace

TEST_CASE("quadratic jet hand values") {
  const CostModel m = CostModel::quadratic();
  const CostJet j = cost_jet(m, vec2(0.2, 0.2), vec2(0.3, 0.2), 2);
  CHECK(j.c == Catch::Approx(0.005));
  CHECK(j.b(0, 0) == 1.0);
  CHECK(j.b(1, 1) == 1.0);
  CHECK(j.b(0, 1) == 0.0);
  CHECK(j.det_b == Catch::Approx(1.0));
  // c_i = displacement from xbar back to x
  CHECK(j.c_x[0] == Catch::Approx(-0.1));
  CHECK(j.c_x[1] == Catch::Approx(0.0).margin(1e-15));
  CHECK(j.c_xbar[0] == Catch::Approx(0.1));
  double third = 0.0;
  for (double v : j.b_x.t) third = std::max(third, std::abs(v));
  for (double v : j.b_xbar.t) third = std::max(third, std::abs(v));
  CHECK(third == 0.0);

  const CostJet jd = cost_jet(m, vec2(0.4, 0.7), vec2(0.4, 0.7), 2);
  CHECK(jd.c == 0.0);
  CHECK(jd.c_x[0] == 0.0);
  CHECK(jd.c_x[1] == 0.0);
}

TEST_CASE("perturbed jets match nested finite differences") {
  // the kernel curvature scales like eps (2 pi k)^2; keep eps inside the
  // positivity budget
  const CostModel m = CostModel::perturbed(0.004, {1, 2, 0}, 0.003);
  const Vec x = vec2(0.31, 0.62), xb = vec2(0.45, 0.51);
  const CostJet j = cost_jet(m, x, xb, 2);
  const FdJet fd{m, 2};

  const double h1 = 1e-6, h2 = 1e-4, h3 = 1e-3;
  for (int i = 0; i < 2; ++i) {
    CHECK(j.c_x[i] == Catch::Approx(fd.d1x(x, xb, i, h1)).margin(1e-9));
    CHECK(j.c_xbar[i] == Catch::Approx(fd.d1xb(x, xb, i, h1)).margin(1e-9));
  }
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) {
      CHECK(j.c_xx(i, k) == Catch::Approx(fd.d2xx(x, xb, i, k, h2)).epsilon(1e-5).margin(1e-6));
      CHECK(-j.b(i, k) == Catch::Approx(fd.d2xxb(x, xb, i, k, h2)).epsilon(1e-5).margin(1e-6));
    }
  for (int i = 0; i < 2; ++i)
    for (int s = 0; s < 2; ++s)
      for (int k = 0; k < 2; ++k) {
        CHECK(-j.b_x(i, s, k) ==
              Catch::Approx(fd.d3xxb_x(x, xb, i, s, k, h3)).epsilon(1e-3).margin(1e-4));
        CHECK(-j.b_xbar(i, s, k) ==
              Catch::Approx(fd.d3xxb_xb(x, xb, i, s, k, h3)).epsilon(1e-3).margin(1e-4));
      }
}

TEST_CASE("perturbed jets in three dimensions") {
  const CostModel m = CostModel::perturbed(0.003, {1, 1, 2});
  Vec x, xb;
  x[0] = 0.21;
  x[1] = 0.11;
  x[2] = 0.87;
  xb[0] = 0.33;
  xb[1] = 0.03;
  xb[2] = 0.95;
  const CostJet j = cost_jet(m, x, xb, 3);
  const FdJet fd{m, 3};
  const double h3 = 1e-3;
  // spot-check the all-distinct third derivative, absent for n = 2
  CHECK(-j.b_x(0, 1, 2) ==
        Catch::Approx(fd.d3xxb_x(x, xb, 0, 1, 2, h3)).epsilon(1e-3).margin(1e-4));
  CHECK(-j.b_xbar(2, 0, 1) ==
        Catch::Approx(fd.d3xxb_xb(x, xb, 2, 0, 1, h3)).epsilon(1e-3).margin(1e-4));
}

TEST_CASE("cut locus and singular jets") {
  const CostModel m = CostModel::quadratic();
  CHECK_THROWS_AS(cost_jet(m, vec2(0.0, 0.0), vec2(0.48, 0.0), 2), CutLocusError);
  CHECK_NOTHROW(cost_jet(m, vec2(0.0, 0.0), vec2(0.44, 0.0), 2));
}

TEST_CASE("cexp closed form and contact residual") {
  const CostModel q = CostModel::quadratic();
  Vec eta;
  eta[0] = 0.1;
  const Vec y = cexp(q, vec2(0.5, 0.5), eta, 2);
  CHECK(y[0] == Catch::Approx(0.6));
  CHECK(y[1] == Catch::Approx(0.5));

  const Vec y0 = cexp(q, vec2(0.12, 0.93), Vec{}, 2);
  CHECK(y0[0] == Catch::Approx(0.12));
  CHECK(y0[1] == Catch::Approx(0.93));

  // difference-kernel models fix x under eta = 0 (c_i(x,x) = 0); the
  // separable term shifts the contact point, so it stays off here
  const CostModel p = CostModel::perturbed(0.008, {1, 1, 0});
  const Vec yp = cexp(p, vec2(0.12, 0.93), Vec{}, 2);
  CHECK(yp[0] == Catch::Approx(0.12).margin(1e-12));
  CHECK(yp[1] == Catch::Approx(0.93).margin(1e-12));

  const CostModel psep = CostModel::perturbed(0.008, {1, 1, 0}, 0.004);
  Rng rng(5);
  for (int t = 0; t < 25; ++t) {
    Vec x = vec2(rng.next_double(), rng.next_double());
    Vec e = vec2(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3));
    const Vec xb = cexp(psep, x, e, 2);
    const CostJet j = cost_jet(psep, x, xb, 2);
    CHECK(std::abs(e[0] + j.c_x[0]) <= 1e-12);
    CHECK(std::abs(e[1] + j.c_x[1]) <= 1e-12);
  }

  Vec big;
  big[0] = 0.47;
  CHECK_THROWS_AS(cexp(q, vec2(0.5, 0.5), big, 2), CutLocusError);
}

TEST_CASE("check_twist_window") {
  const TwistWindow w{};
  const TwistReport rq = check_twist_window(CostModel::quadratic(), w, 64, 2);
  CHECK(rq.pass);
  CHECK(rq.min_eigenvalue == Catch::Approx(1.0));

  const TwistReport r0 = check_twist_window(CostModel::perturbed(0.0, {1, 1, 0}), w, 64, 2);
  CHECK(r0.min_eigenvalue == Catch::Approx(1.0));

  // bisect for the positivity breakdown, then check both sides of it
  double lo = 0.0, hi = 10.0;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    const TwistReport r = check_twist_window(CostModel::perturbed(mid, {1, 1, 0}), w, 128, 2);
    (r.pass ? lo : hi) = mid;
  }
  CHECK(check_twist_window(CostModel::perturbed(10.0, {1, 1, 0}), w, 128, 2).pass == false);
  CHECK(check_twist_window(CostModel::perturbed(0.5 * lo, {1, 1, 0}), w, 128, 2).pass);
  CHECK(check_twist_window(CostModel::perturbed(2.0 * hi, {1, 1, 0}), w, 128, 2).pass == false);
}
