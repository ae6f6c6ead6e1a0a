#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "lt/grid.hpp"
#include "lt/io.hpp"
#include "lt/util.hpp"

using namespace lt;

namespace {

ScalarField random_smooth(const PeriodicGrid& g, std::uint64_t seed) {
  // band-limited trigonometric polynomial; smooth and exactly periodic
  Rng rng(seed);
  struct Mode {
    int k[3];
    double ac, as;
  };
  std::vector<Mode> modes;
  for (int t = 0; t < 6; ++t) {
    Mode m{};
    for (int a = 0; a < g.dim(); ++a) m.k[a] = rng.uniform_int(-3, 3);
    m.ac = rng.uniform(-1.0, 1.0);
    m.as = rng.uniform(-1.0, 1.0);
    modes.push_back(m);
  }
  return ScalarField::sample(g, [&](const Vec& x) {
    double v = 0.0;
    for (const auto& m : modes) {
      double ph = 0.0;
      for (int a = 0; a < g.dim(); ++a) ph += m.k[a] * x[a];
      v += m.ac * std::cos(kTwoPi * ph) + m.as * std::sin(kTwoPi * ph);
    }
    return v;
  });
}

ScalarField shift_field(const ScalarField& f, int axis, int steps) {
  const PeriodicGrid& g = f.grid();
  ScalarField out(g);
  for (index_t i = 0; i < g.num_nodes(); ++i) out[g.neighbor(i, axis, steps)] = f[i];
  return out;
}

}  // namespace

TEST_CASE("grid construction invariants") {
  CHECK_THROWS_AS(PeriodicGrid(4, {8, 8, 8}), ConfigError);
  CHECK_THROWS_AS(PeriodicGrid(2, {7, 8, 1}), ConfigError);   // odd
  CHECK_THROWS_AS(PeriodicGrid(2, {6, 8, 1}), ConfigError);   // too small
  const PeriodicGrid g(3, {8, 10, 12});
  CHECK(g.num_nodes() == 8 * 10 * 12);
  CHECK(g.spacing(1) == Catch::Approx(0.1));
}

TEST_CASE("torus_displacement") {
  CHECK(torus_displacement(0.1, 0.9) == Catch::Approx(-0.2));
  CHECK(torus_displacement(0.3, 0.3) == 0.0);
  CHECK(torus_displacement(0.0, 0.5) == 0.5);  // tie toward +1/2
  CHECK(torus_displacement(0.5, 0.0) == 0.5);
  CHECK(torus_displacement(0.9, 0.1) == Catch::Approx(0.2));
}

TEST_CASE("d0 of a sinusoid matches the symbolic centered-difference factor") {
  const PeriodicGrid g = PeriodicGrid::cube(2, 32);
  const double h = g.spacing(0);
  const auto u = ScalarField::sample(g, [](const Vec& x) { return std::sin(kTwoPi * x[0]); });
  const OneFormField du = d0(u);
  const double factor = std::sin(kTwoPi * h) / (kTwoPi * h);
  for (index_t i = 0; i < g.num_nodes(); ++i) {
    const Vec x = g.position(i);
    CHECK(du.at(0, i) == Catch::Approx(std::cos(kTwoPi * x[0]) * kTwoPi * factor).margin(1e-12));
    CHECK(du.at(1, i) == Catch::Approx(0.0).margin(1e-13));
  }
}

TEST_CASE("d0 of a constant is zero; non-periodic samplers are rejected") {
  const PeriodicGrid g = PeriodicGrid::cube(2, 16);
  const auto u = ScalarField::sample(g, [](const Vec&) { return 3.25; });
  CHECK(max_abs(d0(u).values()) == 0.0);
  CHECK_THROWS_AS(ScalarField::sample(g, [](const Vec& x) { return x[0]; }), ConfigError);
}

TEST_CASE("d1 . d0 = 0 and linearity") {
  for (int dim : {2, 3}) {
    const PeriodicGrid g = PeriodicGrid::cube(dim, dim == 2 ? 32 : 12);
    const ScalarField u = random_smooth(g, 7);
    const ScalarField v = random_smooth(g, 8);
    const TwoFormField ddu = d1(d0(u));
    const double scale = max_abs(d0(u).values());
    CHECK(max_abs(ddu.values()) <= 1e-13 * std::max(1.0, scale));

    ScalarField lin(g);
    for (index_t i = 0; i < g.num_nodes(); ++i) lin[i] = 2.5 * u[i] - 0.75 * v[i];
    const OneFormField da = d0(lin);
    const OneFormField du = d0(u);
    const OneFormField dv = d0(v);
    double err = 0.0;
    for (int c = 0; c < dim; ++c)
      for (index_t i = 0; i < g.num_nodes(); ++i)
        err = std::max(err, std::abs(da.at(c, i) - 2.5 * du.at(c, i) + 0.75 * dv.at(c, i)));
    CHECK(err <= 1e-13);
  }
}

TEST_CASE("d1 of an x2-dependent 1-form matches the symbolic oracle") {
  const PeriodicGrid g = PeriodicGrid::cube(2, 32);
  const double h = g.spacing(1);
  const OneFormField eta = OneFormField::sample(g, [](const Vec& x) {
    Vec v;
    v[0] = std::sin(kTwoPi * x[1]);
    return v;
  });
  const TwoFormField de = d1(eta);
  const double factor = std::sin(kTwoPi * h) / (kTwoPi * h);
  for (index_t i = 0; i < g.num_nodes(); ++i) {
    const Vec x = g.position(i);
    const double expect = -std::cos(kTwoPi * x[1]) * kTwoPi * factor;
    CHECK(de.at(0, i) == Catch::Approx(expect).margin(1e-12));
  }
  const OneFormField c = OneFormField::sample(g, [](const Vec&) {
    Vec v;
    v[0] = 0.3;
    v[1] = -0.7;
    return v;
  });
  CHECK(max_abs(d1(c).values()) == 0.0);
}

TEST_CASE("translation equivariance of d and integrate") {
  const PeriodicGrid g = PeriodicGrid::cube(2, 16);
  const ScalarField u = random_smooth(g, 21);
  const ScalarField us = shift_field(u, 0, 3);
  const OneFormField a = d0(us);
  const OneFormField b = d0(u);
  double err = 0.0;
  for (int c = 0; c < 2; ++c)
    for (index_t i = 0; i < g.num_nodes(); ++i)
      err = std::max(err, std::abs(a.at(c, g.neighbor(i, 0, 3)) - b.at(c, i)));
  CHECK(err == 0.0);

  const ScalarField w = random_smooth(g, 22);
  const double i0 = integrate(u, w);
  const double i1 = integrate(shift_field(u, 1, 5), shift_field(w, 1, 5));
  CHECK(i0 == Catch::Approx(i1).margin(1e-14));
}

TEST_CASE("integrate: unit volume, periodic mean, sin^2") {
  const PeriodicGrid g = PeriodicGrid::cube(2, 32);
  const ScalarField one(g, 1.0);
  CHECK(integrate(one, one) == Catch::Approx(1.0).margin(1e-14));
  const auto s = ScalarField::sample(g, [](const Vec& x) { return std::sin(kTwoPi * x[0]); });
  CHECK(integrate(s, one) == Catch::Approx(0.0).margin(1e-13));
  const auto s2 = ScalarField::sample(g, [](const Vec& x) {
    const double v = std::sin(kTwoPi * x[0]);
    return v * v;
  });
  CHECK(integrate(s2, one) == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("field dumps round-trip") {
  const PeriodicGrid g(2, {8, 12, 1});
  const ScalarField u = random_smooth(g, 33);
  const auto dir = std::filesystem::temp_directory_path() / "lt_grid_test";
  std::filesystem::create_directories(dir);

  const std::string binpath = (dir / "u.bin").string();
  write_field_bin(binpath, pack(u));
  const FieldDump rb = read_field_bin(binpath);
  REQUIRE(rb.grid == g);
  REQUIRE(rb.components == 1);
  for (index_t i = 0; i < g.num_nodes(); ++i)
    CHECK(rb.values[static_cast<size_t>(i)] == u[i]);  // bitwise

  const std::string csvpath = (dir / "eta.csv").string();
  const OneFormField eta = d0(u);
  write_field_csv(csvpath, pack(eta));
  const FieldDump rc = read_field_csv(csvpath);
  REQUIRE(rc.grid == g);
  REQUIRE(rc.components == 2);
  for (index_t i = 0; i < g.num_nodes(); ++i)
    for (int c = 0; c < 2; ++c)
      CHECK(rc.values[static_cast<size_t>(i) * 2 + static_cast<size_t>(c)] ==
            Catch::Approx(eta.at(c, i)).margin(1e-15));
}
