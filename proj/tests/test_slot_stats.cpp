#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "wlanstab/params.hpp"
#include "wlanstab/slot_stats.hpp"

using namespace wlanstab;

namespace {

SystemParams table1(CollisionModel model = CollisionModel::kBianchi) {
  SystemParams p;
  p.collision_model = model;
  return p;
}

// Series oracle for the run-of-attempts success cost: the first success may be
// followed by chains of immediate re-attempts, each occurring w.p. 1/W.
double facs_success_series(double t_s, int w) {
  double sum = 0.0;
  for (int i = 0; i < 200; ++i) sum += std::pow(1.0 / w, i) * t_s;
  return sum;
}

// Series oracle for the two-node successive-collision cost with the window
// substituted by W: after a collision both nodes redraw; both landing on zero
// (p = 1/W^2) repeats the collision, exactly one landing on zero leads into a
// success run.
double facs_collision_series(double t_c, double t_s, int w) {
  const double q = 1.0 / (static_cast<double>(w) * w);
  double sum = t_c;
  for (int i = 1; i < 400; ++i) {
    sum += std::pow(q, i) * t_c;
    sum += 2.0 * std::pow(q, i - 1) * (1.0 / w) * (1.0 - 1.0 / w) * facs_success_series(t_s, w);
  }
  return sum;
}

}  // namespace

TEST_CASE("effective slot costs") {
  const SystemParams params = table1();
  const ChannelSpec chan = derive_timing(params, 11e6);

  SECTION("bianchi mode is the identity") {
    const EffectiveSlotCosts c = effective_costs(params, chan);
    CHECK(c.idle == params.slot_time);
    CHECK(c.success == chan.t_success);
    CHECK(c.collision == chan.t_collision);
  }
  SECTION("facs costs match the series oracles at W = 32") {
    const SystemParams facs = table1(CollisionModel::kFacs);
    const EffectiveSlotCosts c = effective_costs(facs, chan);
    CHECK(c.success == Catch::Approx(facs_success_series(chan.t_success, 32)).epsilon(1e-10));
    CHECK(c.collision ==
          Catch::Approx(facs_collision_series(chan.t_collision, chan.t_success, 32)).epsilon(1e-10));
    // Frozen values from the series oracles above.
    CHECK(c.success == Catch::Approx(1597.845e-6).epsilon(1e-4));
    CHECK(c.collision == Catch::Approx(1432.052e-6).epsilon(1e-4));
  }
  SECTION("facs strictly exceeds bianchi at finite W and converges as W grows") {
    for (int w : {2, 4, 8, 32, 256, 4096}) {
      SystemParams facs = table1(CollisionModel::kFacs);
      facs.initial_window = w;
      const EffectiveSlotCosts c = effective_costs(facs, chan);
      CHECK(c.success > chan.t_success);
      CHECK(c.collision > chan.t_collision);
      if (w >= 4) CHECK(std::abs(c.success - chan.t_success) < 2.0 * chan.t_success / w);
    }
    SystemParams facs = table1(CollisionModel::kFacs);
    facs.initial_window = 1 << 20;
    const EffectiveSlotCosts c = effective_costs(facs, chan);
    CHECK(c.success == Catch::Approx(chan.t_success).epsilon(1e-5));
    CHECK(c.collision == Catch::Approx(chan.t_collision).epsilon(1e-5));
  }
  SECTION("facs requires W >= 2") {
    SystemParams facs = table1(CollisionModel::kFacs);
    facs.initial_window = 1;
    CHECK_THROWS_AS(effective_costs(facs, chan), std::domain_error);
  }
}

TEST_CASE("conditional slot lengths") {
  const SystemParams params = table1();
  const ChannelSpec chan = derive_timing(params, 11e6);
  const EffectiveSlotCosts costs = effective_costs(params, chan);

  SECTION("two nodes, idle-queue case: the lone neighbour cannot collide") {
    const std::vector<double> tau{0.0, 0.1};
    const SlotOutcomeProbs p = slot_probs_queue_empty(0, tau);
    CHECK(p.idle == Catch::Approx(0.9).epsilon(1e-12));
    CHECK(p.success == Catch::Approx(0.1).epsilon(1e-12));
    CHECK(p.collision == Catch::Approx(0.0).margin(1e-12));
    const SlotLengths s = conditional_slot_lengths(0, tau, 1.0 / 16.5, costs);
    CHECK(s.empty ==
          Catch::Approx(0.9 * params.slot_time + 0.1 * chan.t_success).epsilon(1e-12));
  }
  SECTION("two nodes, busy-queue case matches exhaustive enumeration") {
    const std::vector<double> tau{0.0, 0.1};
    const double tau_busy = 1.0 / 16.5;
    const SlotOutcomeProbs p = slot_probs_queue_busy(0, tau, tau_busy);
    // Enumerate the four joint transmit/silent outcomes of the two nodes.
    const double p00 = (1 - tau_busy) * (1 - 0.1);
    const double p10 = tau_busy * (1 - 0.1);
    const double p01 = (1 - tau_busy) * 0.1;
    const double p11 = tau_busy * 0.1;
    CHECK(p.idle == Catch::Approx(p00).epsilon(1e-12));
    CHECK(p.success == Catch::Approx(p10 + p01).epsilon(1e-12));
    CHECK(p.collision == Catch::Approx(p11).epsilon(1e-12));
    CHECK(p.idle == Catch::Approx(0.845454545455).epsilon(1e-9));
    CHECK(p.success == Catch::Approx(0.148484848485).epsilon(1e-9));
    CHECK(p.collision == Catch::Approx(0.006060606061).epsilon(1e-9));
  }
  SECTION("silence everywhere gives sigma slots") {
    const std::vector<double> tau{0.0, 0.0, 0.0};
    const SlotLengths s = conditional_slot_lengths(1, tau, 0.5, costs);
    CHECK(s.deferred == Catch::Approx(params.slot_time).epsilon(1e-12));
    CHECK(s.empty == Catch::Approx(params.slot_time).epsilon(1e-12));
    CHECK(s.deferred == s.empty);
  }
  SECTION("busy mean never falls below the silent mean") {
    std::mt19937 gen(11);
    std::uniform_real_distribution<double> unif(0.0, 0.6);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = 2 + gen() % 5;
      std::vector<double> tau(n);
      for (auto& t : tau) t = unif(gen);
      const double tau_busy = 0.01 + 0.98 * unif(gen) / 0.6;
      const SlotLengths s = conditional_slot_lengths(0, tau, tau_busy, costs);
      CHECK(s.busy >= s.empty - 1e-15);
      const double max_cost = std::max(costs.success, costs.collision);
      for (double v : {s.busy, s.empty, s.deferred}) {
        CHECK(v >= costs.idle - 1e-15);
        CHECK(v <= max_cost + 1e-15);
      }
    }
  }
  SECTION("outcome probabilities always sum to one") {
    std::mt19937 gen(13);
    std::uniform_real_distribution<double> unif(0.0, 0.99);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = 1 + gen() % 6;
      std::vector<double> tau(n);
      for (auto& t : tau) t = unif(gen);
      const std::size_t i = gen() % n;
      const SlotOutcomeProbs a = slot_probs_queue_empty(i, tau);
      CHECK(a.idle + a.success + a.collision == Catch::Approx(1.0).epsilon(1e-12));
      const SlotOutcomeProbs b = slot_probs_queue_busy(i, tau, 0.01 + 0.98 * unif(gen));
      CHECK(b.idle + b.success + b.collision == Catch::Approx(1.0).epsilon(1e-12));
    }
  }
  SECTION("domain errors") {
    CHECK_THROWS_AS(conditional_slot_lengths(0, {0.5, 1.0}, 0.5, costs), std::domain_error);
    CHECK_THROWS_AS(conditional_slot_lengths(0, {0.5, 0.5}, 0.0, costs), std::domain_error);
  }
}

TEST_CASE("embedded-utilization estimate") {
  SlotLengths slots;
  slots.busy = 300e-6;
  slots.empty = 100e-6;
  slots.deferred = 120e-6;

  SECTION("endpoints and the equal-length case") {
    CHECK(slot_util_estimate(0.0, slots) == 0.0);
    CHECK(slot_util_estimate(1.0, slots) == 1.0);
    SlotLengths eq = slots;
    eq.busy = eq.empty = 200e-6;
    CHECK(slot_util_estimate(0.5, eq) == Catch::Approx(0.5).epsilon(1e-14));
  }
  SECTION("never exceeds rho; monotone in rho") {
    std::mt19937 gen(17);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 400; ++trial) {
      SlotLengths s;
      s.empty = 20e-6 + 1e-3 * unif(gen);
      s.busy = s.empty * (1.0 + 3.0 * unif(gen));  // busy >= empty
      const double rho = unif(gen);
      const double est = slot_util_estimate(rho, s);
      CHECK(est <= rho + 1e-14);
      CHECK(est >= 0.0);
      const double rho2 = rho + (1.0 - rho) * unif(gen);
      CHECK(slot_util_estimate(rho2, s) >= est - 1e-14);
    }
  }
  SECTION("rejects out-of-domain input") {
    CHECK_THROWS_AS(slot_util_estimate(-0.1, slots), std::domain_error);
    CHECK_THROWS_AS(slot_util_estimate(1.1, slots), std::domain_error);
    SlotLengths bad = slots;
    bad.busy = 0.0;
    CHECK_THROWS_AS(slot_util_estimate(0.5, bad), std::domain_error);
  }
}
