#include <cmath>
#include <limits>

#include "doctest.h"
#include "ndem/baseline.hpp"
#include "ndem/errors.hpp"
#include "ndem/rng.hpp"

using namespace ndem;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

TEST_CASE("naive_height") {
  GridSpec g;
  g.cells = 12;
  MaintainedFeatureMap m(g);
  const auto empty = naive_height(m);
  for (double v : empty.values()) CHECK(std::isnan(v));

  m.frames(3, 4) = 1.0;
  m.mean(3, 4) = 0.3;
  m.mean(5, 5) = 0.9;  // not observed: stays empty
  const auto h = naive_height(m);
  CHECK(h(3, 4) == 0.3);
  CHECK(std::isnan(h(5, 5)));

  Rng rng(2);
  for (std::size_t i = 0; i < m.mean.size(); ++i) {
    m.mean[i] = rng.uniform(-1.0, 1.0);
    m.frames[i] = rng.unit() < 0.5 ? 1.0 : 0.0;
  }
  const auto p = naive_height(m);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (m.frames[i] >= 1.0) CHECK(p[i] == m.mean[i]);
    else CHECK(std::isnan(p[i]));
  }
}

TEST_CASE("inpaint_iterative") {
  SUBCASE("dense input unchanged") {
    GridD g(6, 6, 0.2);
    g(1, 1) = -0.4;
    CHECK(inpaint_iterative(g, 10) == g);
  }
  SUBCASE("single hole") {
    GridD g(5, 5, 0.35);
    g(2, 2) = kNaN;
    CHECK(inpaint_iterative(g, 1)(2, 2) == 0.35);
  }
  SUBCASE("hole strip across a ramp obeys the maximum principle") {
    GridD g(30, 20);
    for (int y = 0; y < 20; ++y) {
      for (int x = 0; x < 30; ++x) g(x, y) = 0.05 * x;
    }
    for (int y = 0; y < 20; ++y) {
      for (int x = 10; x < 18; ++x) g(x, y) = kNaN;
    }
    const auto out = inpaint_iterative(g, dense_iteration_cap(g));
    for (int y = 0; y < 20; ++y) {
      for (int x = 10; x < 18; ++x) {
        REQUIRE_FALSE(std::isnan(out(x, y)));
        CHECK(out(x, y) >= 0.05 * 9 - 1e-12);
        CHECK(out(x, y) <= 0.05 * 18 + 1e-12);
      }
    }
  }
  SUBCASE("single seed fills the grid within the cap") {
    GridD g(17, 9, kNaN);
    g(16, 8) = 1.25;
    const auto out = inpaint_iterative(g, dense_iteration_cap(g));
    for (double v : out.values()) CHECK(v == 1.25);
  }
  SUBCASE("random sparse input stays within observed bounds and is deterministic") {
    Rng rng(9);
    GridD g(40, 40, kNaN);
    double lo = 1e9, hi = -1e9;
    for (double& v : g.values()) {
      if (rng.unit() < 0.05) {
        v = rng.uniform(-2.0, 2.0);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    const auto a = inpaint_iterative(g, dense_iteration_cap(g));
    for (double v : a.values()) {
      REQUIRE_FALSE(std::isnan(v));
      CHECK(v >= lo);
      CHECK(v <= hi);
    }
    CHECK(inpaint_iterative(g, dense_iteration_cap(g)) == a);
  }
  SUBCASE("iteration cap leaves unreached cells empty") {
    GridD g(10, 1, kNaN);
    g(0, 0) = 1.0;
    const auto out = inpaint_iterative(g, 3);
    CHECK(out(3, 0) == 1.0);
    CHECK(std::isnan(out(4, 0)));
  }
  SUBCASE("empty input") {
    CHECK_THROWS_AS(inpaint_iterative(GridD(3, 3, kNaN), 5), DomainError);
  }
}
