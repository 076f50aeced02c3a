#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "reference_interp.hpp"
#include "sarfuse/error.hpp"
#include "sarfuse/interp.hpp"

using namespace sarfuse;
using namespace sarfuse::interp;
using doctest::Approx;

using testing::AkimaReference;
using testing::QuadraticReference;
using testing::queries;
using testing::random_knots;

TEST_SUITE("interp") {
  TEST_CASE("linear interpolant") {
    const LinearInterpolant f(Knots{{100, 112}, {0.4, 0.8}});
    CHECK(f(106) == Approx(0.6));
    CHECK(f(112) == Approx(0.8));
    CHECK(f(94) == Approx(0.4));
    CHECK(f(300) == Approx(0.8));
    CHECK_THROWS_AS(LinearInterpolant(Knots{{100}, {0.4}}), ValidationError);
  }

  TEST_CASE("akima examples") {
    Knots sq{{0, 6, 12, 18, 24}, {0, 36, 144, 324, 576}};
    const AkimaSpline f(sq);
    CHECK(f(9) == Approx(81).epsilon(1e-12));
    CHECK(f(18) == Approx(324));
    const AkimaSpline line(Knots{{0, 3, 10, 11, 20, 26}, {1, 2.5, 6, 6.5, 11, 14}});
    for (double q = 0; q <= 26; q += 0.25) CHECK(line(q) == Approx(1 + 0.5 * q).epsilon(1e-12));
    CHECK_THROWS_AS(AkimaSpline(Knots{{0, 1, 2, 3}, {0, 1, 2, 3}}), ValidationError);
  }

  TEST_CASE("quadratic examples") {
    const QuadraticSpline sq(Knots{{0, 1, 2, 3, 4}, {0, 1, 4, 9, 16}});
    CHECK(sq(1.5) == Approx(2.25).epsilon(1e-12));
    CHECK(sq(3.7) == Approx(3.7 * 3.7).epsilon(1e-12));
    const QuadraticSpline three(Knots{{0, 6, 12}, {0, 1, 0}});
    CHECK(three(3) == Approx(0.75).epsilon(1e-12));
    const QuadraticSpline line(Knots{{0, 2, 5, 6, 9}, {1, 0, -1.5, -2, -3.5}});
    for (double q = 0; q <= 9; q += 0.3) CHECK(line(q) == Approx(1 - 0.5 * q).epsilon(1e-12));
  }

  TEST_CASE("50 random knot sets against the reference implementations") {
    std::mt19937_64 rng(2024);
    double worst_akima = 0, worst_quad = 0;
    for (int rep = 0; rep < 50; ++rep) {
      const Knots k = random_knots(rng, 5);
      const AkimaSpline akima(k);
      const QuadraticSpline quad(k);
      const AkimaReference akima_ref(k.x, k.y);
      const QuadraticReference quad_ref(k.x, k.y);
      for (double q : queries(k)) {
        worst_akima = std::max(worst_akima, std::fabs(akima(q) - akima_ref(q)));
        worst_quad = std::max(worst_quad, std::fabs(quad(q) - quad_ref(q)));
      }
      for (std::size_t i = 0; i < k.size(); ++i) {
        CHECK(akima(k.x[i]) == Approx(k.y[i]).epsilon(1e-12));
        CHECK(std::fabs(quad(k.x[i]) - k.y[i]) < 1e-9);
      }
    }
    CHECK(worst_akima < 1e-9);
    CHECK(worst_quad < 1e-9);
  }

  TEST_CASE("frozen scipy values") {
    std::ifstream in(std::string(SARFUSE_ORACLE_DIR) + "/scipy_interp.json");
    REQUIRE(in.good());
    const auto j = nlohmann::json::parse(in);
    double worst_akima = 0, worst_quad = 0;
    for (const auto& c : j.at("cases")) {
      Knots k{c.at("x").get<std::vector<double>>(), c.at("y").get<std::vector<double>>()};
      const AkimaSpline akima(k);
      const QuadraticSpline quad(k);
      const auto q = c.at("query").get<std::vector<double>>();
      const auto ya = c.at("akima").get<std::vector<double>>();
      const auto yq = c.at("quadratic").get<std::vector<double>>();
      for (std::size_t i = 0; i < q.size(); ++i) {
        worst_akima = std::max(worst_akima, std::fabs(akima(q[i]) - ya[i]));
        worst_quad = std::max(worst_quad, std::fabs(quad(q[i]) - yq[i]));
      }
    }
    CHECK(worst_akima < 1e-9);
    CHECK(worst_quad < 1e-9);
  }

  TEST_CASE("polynomial reproduction") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 20; ++rep) {
      Knots k = random_knots(rng, 5);
      for (std::size_t i = 0; i < k.size(); ++i) k.y[i] = 0.3 - 0.002 * (k.x[i] - 100);
      const AkimaSpline akima(k);
      const QuadraticSpline quad(k);
      for (double q : queries(k)) {
        if (q < k.x.front() || q > k.x.back()) continue;
        CHECK(akima(q) == Approx(0.3 - 0.002 * (q - 100)).epsilon(1e-10));
        CHECK(quad(q) == Approx(0.3 - 0.002 * (q - 100)).epsilon(1e-10));
      }
      for (std::size_t i = 0; i < k.size(); ++i) k.y[i] = 1e-4 * (k.x[i] - 140) * (k.x[i] - 140);
      const QuadraticSpline parabola(k);
      for (double q : queries(k)) {
        if (q < k.x.front() || q > k.x.back()) continue;
        CHECK(std::fabs(parabola(q) - 1e-4 * (q - 140) * (q - 140)) < 1e-10);
      }
    }
  }

  TEST_CASE("grid fill keeps observations and clamps the ends") {
    const TemporalGrid g{100, 6, 10};
    using testing::kGap;
    const auto s = testing::series({kGap, 0.2, 0.3, kGap, 0.5, 0.6, kGap, 0.8, 0.7, kGap});
    for (Method m : {Method::Linear, Method::Akima, Method::Quadratic}) {
      const auto f = fill(s, g, m);
      REQUIRE(f.size() == 10);
      for (int t = 0; t < 10; ++t) {
        if (s[t]) CHECK(f[t] == *s[t]);
      }
      CHECK(f[0] == Approx(0.2));
      CHECK(f[9] == Approx(0.7));
      CHECK(method_from_name(method_name(m)) == m);
    }
    CHECK(fill_linear(s, g)[3] == Approx(0.4));
    CHECK_THROWS_AS(fill_akima(testing::series({0.1, kGap, 0.2, kGap, 0.3, kGap, 0.4, kGap, kGap, kGap}), g),
                    ValidationError);
    CHECK_THROWS_AS(method_from_name("cubic"), ValidationError);
  }
}
