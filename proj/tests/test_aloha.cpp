#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "wlanstab/aloha.hpp"

using namespace wlanstab::aloha;

TEST_CASE("throughput map") {
  SECTION("hand values") {
    const auto r2 = throughput({0.5, 0.5});
    CHECK(r2[0] == Catch::Approx(0.25).epsilon(1e-14));
    CHECK(r2[1] == Catch::Approx(0.25).epsilon(1e-14));
    const auto sole = throughput({1.0, 0.0, 0.0});
    CHECK(sole[0] == 1.0);
    CHECK(sole[1] == 0.0);
    const auto r3 = throughput({0.2, 0.3, 0.4});
    CHECK(r3[0] == Catch::Approx(0.2 * 0.7 * 0.6).epsilon(1e-14));
    CHECK(r3[1] == Catch::Approx(0.3 * 0.8 * 0.6).epsilon(1e-14));
    CHECK(r3[2] == Catch::Approx(0.4 * 0.8 * 0.7).epsilon(1e-14));
  }
  SECTION("at most one success per slot") {
    std::mt19937 gen(5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
      std::vector<double> tau(1 + gen() % 6);
      for (auto& t : tau) t = unif(gen);
      const auto rates = throughput(tau);
      double sum = 0.0;
      for (std::size_t i = 0; i < tau.size(); ++i) {
        CHECK(rates[i] <= tau[i] + 1e-15);
        CHECK(rates[i] >= 0.0);
        sum += rates[i];
      }
      CHECK(sum <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("region boundary") {
  SECTION("full region touches the axes and the symmetric point") {
    const auto frontier = region_boundary(2, 1.0, 201);
    REQUIRE(frontier.size() >= 3);
    bool has_10 = false, has_01 = false, has_quarter = false;
    for (const auto& p : frontier) {
      if (std::abs(p[0] - 1.0) < 1e-12 && std::abs(p[1]) < 1e-12) has_10 = true;
      if (std::abs(p[1] - 1.0) < 1e-12 && std::abs(p[0]) < 1e-12) has_01 = true;
      if (std::abs(p[0] - 0.25) < 1e-12 && std::abs(p[1] - 0.25) < 1e-12) has_quarter = true;
    }
    CHECK(has_10);
    CHECK(has_01);
    CHECK(has_quarter);
  }
  SECTION("constrained boxes put the symmetric corner on the frontier") {
    for (double wbar : {2.0, 10.0}) {
      const auto frontier = region_boundary(2, wbar, 201);
      const double corner = (1.0 / wbar) * (1.0 - 1.0 / wbar);
      bool found = false;
      for (const auto& p : frontier)
        if (std::abs(p[0] - corner) < 1e-9 && std::abs(p[1] - corner) < 1e-9) found = true;
      CHECK(found);
    }
    // wbar = 10: corner at 0.1 * 0.9 = 0.09
    const auto f10 = region_boundary(2, 10.0, 201);
    bool found = false;
    for (const auto& p : f10)
      if (std::abs(p[0] - 0.09) < 1e-9 && std::abs(p[1] - 0.09) < 1e-9) found = true;
    CHECK(found);
  }
  SECTION("symmetric frontier is symmetric about the diagonal") {
    const auto frontier = region_boundary(2, 5.0, 101);
    for (const auto& p : frontier) {
      bool mirrored = false;
      for (const auto& q : frontier)
        if (std::abs(q[0] - p[1]) < 1e-12 && std::abs(q[1] - p[0]) < 1e-12) mirrored = true;
      CHECK(mirrored);
    }
  }
  SECTION("symmetric n-user optimum attained within grid resolution") {
    for (int n : {2, 3}) {
      const auto frontier = region_boundary(n, 1.0, n == 2 ? 201 : 61);
      const double best = std::pow(1.0 - 1.0 / n, n - 1) / n;
      double seen = 0.0;
      for (const auto& p : frontier) {
        double lo = p[0];
        for (double v : p) lo = std::min(lo, v);
        seen = std::max(seen, lo);
      }
      CHECK(seen == Catch::Approx(best).margin(2.0 / 60));
    }
  }
  SECTION("input validation") {
    CHECK_THROWS_AS(region_boundary(0, 1.0, 10), std::invalid_argument);
    CHECK_THROWS_AS(region_boundary(2, 0.5, 10), std::invalid_argument);
    CHECK_THROWS_AS(region_boundary(2, 1.0, 1), std::invalid_argument);
  }
}

TEST_CASE("frontier shape") {
  SECTION("unconstrained region is concave, tight backoff regions convex") {
    CHECK(frontier_shape(region_boundary(2, 1.0, 201)) == RegionShape::kConcave);
    CHECK(frontier_shape(region_boundary(2, 20.0, 201)) == RegionShape::kConvex);
  }
  SECTION("straight synthetic boundary sits in the tolerance band") {
    std::vector<RatePoint> line;
    for (int i = 0; i <= 100; ++i) {
      const double x = i / 100.0;
      line.push_back({x, 1.0 - x});
    }
    CHECK(frontier_shape(line) == RegionShape::kMixed);
  }
  SECTION("needs at least three points") {
    CHECK_THROWS_AS(frontier_shape({{0.0, 1.0}, {1.0, 0.0}}), std::invalid_argument);
  }
}

TEST_CASE("region nesting") {
  // Larger backoff never enlarges the region: C^{w1} inside C^{w2} for w1 >= w2.
  const std::vector<double> wbars{1.0, 2.0, 5.0, 10.0, 20.0};
  std::vector<std::vector<RatePoint>> frontiers;
  for (double w : wbars) frontiers.push_back(region_boundary(2, w, 200));
  for (std::size_t a = 0; a < wbars.size(); ++a) {
    for (std::size_t b = 0; b < a; ++b) {
      // wbars[a] > wbars[b]: the region of wbars[a] must fit inside wbars[b]'s.
      const double slack = 3.0 / (wbars[b] * 199.0);
      CHECK(frontier_contains(frontiers[b], frontiers[a], slack));
    }
  }
}
