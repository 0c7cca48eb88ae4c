#include "doctest.h"

#include <cmath>
#include <random>

#include "vedge/channel.hpp"

using namespace vedge::channel;

namespace {

// Straight transcription of the contention formulas, kept apart from the
// library code on purpose.
double oracle_pt(double w, double m, double pc) {
  return 2.0 * (1.0 - 2.0 * pc) /
         ((1.0 - 2.0 * pc) * (w + 1.0) + pc * w * (1.0 - std::pow(2.0 * pc, m)));
}

double oracle_rate(double w, double m, double pc, double ts, double L, double h) {
  const double p = oracle_pt(w, m, pc);
  return h * p * L / ((1.0 - p) * (1.0 + ts) + (std::pow(1.0 - p, 1.0 - h) - (1.0 - p - h * p)) * p);
}

ApChannel ap(int w, int m, double pc, double ts, double L, int h) {
  return ApChannel{w, m, pc, ts, 0.0, L, h};
}

}  // namespace

TEST_CASE("bs uplink rate examples") {
  CHECK(bs_uplink_rate({1, 1, 1, 1, {}}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(bs_uplink_rate({1, 1, 1, 1, {{1, 1}}}) == doctest::Approx(0.5849625007211562).epsilon(1e-14));
  CHECK(bs_uplink_rate({1, 0, 1, 1, {}}) == 0.0);
  CHECK(bs_uplink_rate({1, 1, 0, 1, {}}) == 0.0);
  CHECK(bs_uplink_rate({1e7, 0.5, 1e-6, 1e-9, {{0.2, 1e-7}, {0.2, 1e-7}}}) ==
        doctest::Approx(37219327.79208732).epsilon(1e-13));
}

TEST_CASE("bs rate as printed") {
  // log2((1 + 1) / 1) with unit powers.
  CHECK(bs_uplink_rate({1, 1, 1, 1, {}}, true) == doctest::Approx(1.0));
  // (1 + S) / (N + I) below one clamps to zero.
  CHECK(bs_uplink_rate({1, 0.1, 1, 10, {}}, true) == 0.0);
  CHECK(bs_uplink_rate({2, 1, 3, 1, {}}, true) == doctest::Approx(2.0 * std::log2(4.0)));
}

TEST_CASE("bs rate monotonicity") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  for (int i = 0; i < 500; ++i) {
    BsChannel ch{u(rng), u(rng), u(rng), u(rng), {{u(rng), u(rng)}, {u(rng), u(rng)}}};
    const double base = bs_uplink_rate(ch);
    CHECK(base >= 0.0);
    auto louder = ch;
    louder.interferers[1].gain *= 1.5;
    CHECK(bs_uplink_rate(louder) < base);
    auto stronger = ch;
    stronger.tx_power *= 1.5;
    CHECK(bs_uplink_rate(stronger) > base);
  }
}

TEST_CASE("bs domain") {
  CHECK_THROWS_AS(bs_uplink_rate({1, 1, 1, 0, {}}), DomainError);
  CHECK_THROWS_AS(bs_uplink_rate({0, 1, 1, 1, {}}), DomainError);
  CHECK_THROWS_AS(bs_uplink_rate({1, -1, 1, 1, {}}), DomainError);
}

TEST_CASE("transmit probability examples") {
  CHECK(ap_transmit_prob(31, 5, 0.0) == 0.0625);
  CHECK(ap_transmit_prob(1, 5, 0.0) == 1.0);
  CHECK(ap_transmit_prob(3, 1, 0.25) == doctest::Approx(8.0 / 19.0).epsilon(1e-15));
  CHECK(ap_transmit_prob(3, 1, 0.25) == doctest::Approx(0.42105).epsilon(1e-5));
  for (int w : {1, 2, 3, 7, 15, 31, 63, 127, 1023}) {
    for (int m : {0, 1, 3, 7}) {
      CHECK(std::abs(ap_transmit_prob(w, m, 0.0) - 2.0 / (w + 1.0)) <= 1e-12);
    }
  }
}

TEST_CASE("transmit probability matches oracle and stays in (0, 1]") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> w(1, 1024), m(0, 8);
  std::uniform_real_distribution<double> pc(0.0, 0.4999);
  for (int i = 0; i < 1000; ++i) {
    const int wi = w(rng), mi = m(rng);
    const double p = pc(rng);
    const double got = ap_transmit_prob(wi, mi, p);
    CHECK(got > 0.0);
    CHECK(got <= 1.0);
    CHECK(got == doctest::Approx(oracle_pt(wi, mi, p)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(ap_transmit_prob(31, 5, 0.5), DomainError);
  CHECK_THROWS_AS(ap_transmit_prob(31, 5, -0.1), DomainError);
  CHECK_THROWS_AS(ap_transmit_prob(0, 5, 0.1), DomainError);
}

TEST_CASE("ap rate examples") {
  // W_min = 3 at p_c = 0 gives p_t = 0.5.
  CHECK(ap_rate(ap(3, 0, 0.0, 1.0, 1.0, 1)) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const double r = ap_rate(ap(31, 5, 0.1, 1e-3, 1e8, 5));
  CHECK(r == doctest::Approx(28496123.969999816).epsilon(1e-12));
  CHECK(ap_rate(ap(15, 3, 0.05, 1e-3, 1e8, 3)) == doctest::Approx(36644368.02121987).epsilon(1e-12));
  CHECK(ap_rate(ap(31, 5, 0.1, 1e-3, 2e8, 5)) == doctest::Approx(2.0 * r).epsilon(1e-15));
  // p_t -> 0 drives the rate to zero.
  CHECK(ap_rate(ap(1 << 30, 0, 0.0, 1.0, 1.0, 1)) < 1e-8);
}

TEST_CASE("ap rate matches oracle, positive and linear in payload") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> w(2, 256), m(0, 6), h(1, 12);
  std::uniform_real_distribution<double> pc(0.0, 0.45), ts(0.0, 0.01), L(1e3, 1e9);
  for (int i = 0; i < 1000; ++i) {
    const auto ch = ap(w(rng), m(rng), pc(rng), ts(rng), L(rng), h(rng));
    const double got = ap_rate(ch);
    CHECK(got > 0.0);
    CHECK(std::isfinite(got));
    CHECK(got == doctest::Approx(oracle_rate(ch.w_min, ch.max_backoff, ch.collision_prob,
                                             ch.busy_success, ch.payload, ch.contenders))
                     .epsilon(1e-12));
    auto doubled = ch;
    doubled.payload *= 2.0;
    CHECK(ap_rate(doubled) == doctest::Approx(2.0 * got).epsilon(1e-14));
  }
}

TEST_CASE("ap rate domain") {
  CHECK_THROWS_AS(ap_rate(ap(1, 0, 0.0, 0.0, 1.0, 2)), DomainError);
  CHECK_NOTHROW(ap_rate(ap(1, 0, 0.0, 0.0, 1.0, 1)));
  CHECK_THROWS_AS(ap_rate(ap(31, 5, 0.1, 0.0, 0.0, 1)), DomainError);
  CHECK_THROWS_AS(ap_rate(ap(31, 5, 0.1, 0.0, 1.0, 0)), DomainError);
  CHECK_THROWS_AS(ap_rate(ap(31, 5, 0.1, -1.0, 1.0, 1)), DomainError);
}

TEST_CASE("rates are pure") {
  const auto ch = ap(31, 5, 0.1, 1e-3, 1e8, 5);
  CHECK(ap_rate(ch) == ap_rate(ch));
  const BsChannel b{1e7, 0.5, 1e-6, 1e-9, {{0.2, 1e-7}}};
  CHECK(bs_uplink_rate(b) == bs_uplink_rate(b));
}
