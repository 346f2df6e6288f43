#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "wlanstab/params.hpp"

namespace wlanstab {

// Effective durations charged to an idle / success / collision slot. Under the
// Bianchi decoupling these are just (sigma, T_s, T_c); under the run-of-attempts
// (FACS) accounting a success or collision slot absorbs the expected cost of
// the successive attempts that may follow it.
struct EffectiveSlotCosts {
  double idle = 0;
  double success = 0;
  double collision = 0;
};

inline EffectiveSlotCosts effective_costs(const SystemParams& params, const ChannelSpec& chan) {
  EffectiveSlotCosts c;
  c.idle = params.slot_time;
  if (params.collision_model == CollisionModel::kBianchi) {
    c.success = chan.t_success;
    c.collision = chan.t_collision;
    return c;
  }
  const double w = static_cast<double>(params.initial_window);
  if (w < 2.0) throw std::domain_error("effective_costs: FACS costs require W >= 2");
  c.success = chan.t_success / (1.0 - 1.0 / w);
  c.collision = chan.t_collision / (1.0 - 1.0 / (w * w)) +
                2.0 * chan.t_success / (w - 1.0 / w);
  return c;
}

// Probabilities of the three slot outcomes under a given conditioning event.
struct SlotOutcomeProbs {
  double idle = 0;
  double success = 0;
  double collision = 0;
};

// Mean slot lengths conditioned on the state of node i's queue.
struct SlotLengths {
  double busy = 0;      // E[S | queue at i non-empty]
  double empty = 0;     // E[S | queue at i empty]
  double deferred = 0;  // E[S | queue at i non-empty, i not transmitting]
};

namespace detail {

// Outcome probabilities of a slot in which node i is silent (empty queue, or
// counting down without transmitting): only the other nodes act.
inline SlotOutcomeProbs slot_probs_others(std::size_t i, const std::vector<double>& tau) {
  SlotOutcomeProbs p;
  double idle = 1.0;
  for (std::size_t j = 0; j < tau.size(); ++j)
    if (j != i) idle *= 1.0 - tau[j];
  double succ = 0.0;
  for (std::size_t j = 0; j < tau.size(); ++j) {
    if (j == i) continue;
    double prod = tau[j];
    for (std::size_t l = 0; l < tau.size(); ++l)
      if (l != i && l != j) prod *= 1.0 - tau[l];
    succ += prod;
  }
  p.idle = idle;
  p.success = succ;
  p.collision = std::max(0.0, 1.0 - idle - succ);
  return p;
}

// Outcome probabilities of a slot in which node i's queue is non-empty, so i
// itself attempts with the conditional probability tau_busy = 1/avg_backoff.
inline SlotOutcomeProbs slot_probs_with_self(std::size_t i, const std::vector<double>& tau,
                                             double tau_busy) {
  SlotOutcomeProbs p;
  double idle = 1.0 - tau_busy;
  for (std::size_t j = 0; j < tau.size(); ++j)
    if (j != i) idle *= 1.0 - tau[j];
  double succ = 0.0;
  for (std::size_t l = 0; l < tau.size(); ++l) {
    double prod = (l == i) ? tau_busy : tau[l];
    for (std::size_t j = 0; j < tau.size(); ++j) {
      if (j == l) continue;
      prod *= (j == i) ? 1.0 - tau_busy : 1.0 - tau[j];
    }
    succ += prod;
  }
  p.idle = idle;
  p.success = succ;
  p.collision = std::max(0.0, 1.0 - idle - succ);
  return p;
}

inline double mean_slot(const SlotOutcomeProbs& p, const EffectiveSlotCosts& costs) {
  return costs.idle * p.idle + costs.success * p.success + costs.collision * p.collision;
}

inline SlotLengths slot_lengths_unchecked(std::size_t i, const std::vector<double>& tau,
                                          double tau_busy, const EffectiveSlotCosts& costs) {
  const SlotOutcomeProbs others = slot_probs_others(i, tau);
  const SlotOutcomeProbs with_self = slot_probs_with_self(i, tau, tau_busy);
  SlotLengths out;
  out.busy = mean_slot(with_self, costs);
  out.empty = mean_slot(others, costs);
  out.deferred = mean_slot(others, costs);  // i present but silent: same outcome law
  return out;
}

}  // namespace detail

// Conditional slot-outcome probabilities with node i silent (queue empty or
// deferring). Exposed for direct inspection in tests and reports.
inline SlotOutcomeProbs slot_probs_queue_empty(std::size_t i, const std::vector<double>& tau) {
  for (double t : tau)
    if (!(t >= 0.0) || t >= 1.0) throw std::domain_error("attempt probabilities must lie in [0,1)");
  return detail::slot_probs_others(i, tau);
}

// Conditional slot-outcome probabilities with node i backlogged, attempting
// with probability tau_busy.
inline SlotOutcomeProbs slot_probs_queue_busy(std::size_t i, const std::vector<double>& tau,
                                              double tau_busy) {
  for (double t : tau)
    if (!(t >= 0.0) || t >= 1.0) throw std::domain_error("attempt probabilities must lie in [0,1)");
  if (!(tau_busy > 0.0) || tau_busy > 1.0)
    throw std::domain_error("conditional attempt probability must lie in (0,1]");
  return detail::slot_probs_with_self(i, tau, tau_busy);
}

// The three conditional mean slot lengths for node i given everyone else's
// attempt probabilities.
inline SlotLengths conditional_slot_lengths(std::size_t i, const std::vector<double>& tau,
                                            double tau_busy, const EffectiveSlotCosts& costs) {
  for (double t : tau)
    if (!(t >= 0.0) || t >= 1.0) throw std::domain_error("attempt probabilities must lie in [0,1)");
  if (!(tau_busy > 0.0) || tau_busy > 1.0)
    throw std::domain_error("conditional attempt probability must lie in (0,1]");
  return detail::slot_lengths_unchecked(i, tau, tau_busy, costs);
}

// Computable estimate of the embedded (slot-time) utilization from the
// real-time utilization: rho * E[S_empty] / (rho * E[S_empty] + (1-rho) * E[S_busy]).
// Underestimates rho, with equality exactly at rho in {0, 1}.
inline double slot_util_estimate(double rho, const SlotLengths& slots) {
  if (!(rho >= 0.0) || rho > 1.0) throw std::domain_error("utilization must lie in [0,1]");
  if (!(slots.busy > 0.0) || !(slots.empty > 0.0))
    throw std::domain_error("slot lengths must be positive");
  const double num = rho * slots.empty;
  const double den = num + (1.0 - rho) * slots.busy;
  return den > 0.0 ? num / den : 1.0;
}

}  // namespace wlanstab
