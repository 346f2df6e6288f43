#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wlanstab/params.hpp"
#include "wlanstab/slot_stats.hpp"

namespace wlanstab {

// Mean service time of one head-of-line packet.
struct ServiceTime {
  double per_packet = 0;  // seconds
  double per_bit = 0;     // seconds/bit, X-bar
};

// Per-packet service time: (Wbar-1)/(1-p) deferred slots plus the expected
// collision overhead p/(1-p) and the final success. Infinite when p -> 1.
inline ServiceTime packet_service_time(double avg_backoff_len, double coll_prob,
                                       double deferred_slot, const EffectiveSlotCosts& costs,
                                       double payload_bits) {
  ServiceTime st;
  if (coll_prob >= 1.0) {
    st.per_packet = std::numeric_limits<double>::infinity();
    st.per_bit = st.per_packet;
    return st;
  }
  st.per_packet = (avg_backoff_len - 1.0) / (1.0 - coll_prob) * deferred_slot +
                  costs.collision * coll_prob / (1.0 - coll_prob) + costs.success;
  st.per_bit = st.per_packet / payload_bits;
  return st;
}

// One node-indexed snapshot of every quantity in the single-channel system.
struct FixedPointState {
  std::vector<double> attempt_prob;  // tau
  std::vector<double> coll_prob;     // p
  std::vector<double> avg_backoff;   // Wbar, slots
  std::vector<double> util;          // rho
  std::vector<double> slot_util;     // rho-hat (realized as the computable estimate)

  static FixedPointState zeros(std::size_t n) {
    FixedPointState s;
    s.attempt_prob.assign(n, 0.0);
    s.coll_prob.assign(n, 0.0);
    s.avg_backoff.assign(n, 0.0);
    s.util.assign(n, 0.0);
    s.slot_util.assign(n, 0.0);
    return s;
  }
};

struct InitialCondition {
  std::vector<double> attempt0;  // starting tau
  std::vector<double> util0;     // starting rho (kept for reporting; the map is tau-driven)
  std::string label;

  static InitialCondition uniform(std::size_t n, double value, std::string label) {
    InitialCondition ic;
    ic.attempt0.assign(n, value);
    ic.util0.assign(n, value);
    ic.label = std::move(label);
    return ic;
  }
  static InitialCondition all_zero(std::size_t n) { return uniform(n, 0.0, "zero"); }
  static InitialCondition near_one(std::size_t n) { return uniform(n, 0.999, "near_one"); }
};

struct SolveOptions {
  double damping = 0.5;
  double tolerance = 1e-10;
  int max_iterations = 100000;
  bool crude_slot_util = false;  // use rho itself as rho-hat (large-W comparison mode)
};

struct SolveResult {
  FixedPointState state;
  bool converged = false;
  int iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
  InitialCondition ic;
};

namespace detail {

// One application of the composed single-channel map: from the attempt vector,
// derive p, Wbar, slot lengths, rho, rho-hat, and the next attempt vector.
inline FixedPointState sigma_step_impl(const std::vector<double>& tau, const ArrivalVector& lambda,
                                       const SystemParams& params,
                                       const EffectiveSlotCosts& costs, bool crude_slot_util) {
  const std::size_t n = tau.size();
  FixedPointState next = FixedPointState::zeros(n);
  for (std::size_t i = 0; i < n; ++i) {
    double prod = 1.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) prod *= 1.0 - tau[j];
    next.coll_prob[i] = 1.0 - prod;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::min(next.coll_prob[i], 1.0);
    next.avg_backoff[i] =
        detail::avg_backoff_unchecked(p, params.initial_window, params.max_stage);
    const SlotLengths slots =
        detail::slot_lengths_unchecked(i, tau, 1.0 / next.avg_backoff[i], costs);
    const ServiceTime st = packet_service_time(next.avg_backoff[i], p, slots.deferred, costs,
                                               params.payload_bits);
    if (std::isinf(st.per_packet)) {
      next.util[i] = lambda[i] > 0.0 ? 1.0 : 0.0;
    } else {
      next.util[i] = std::min(lambda[i] * st.per_bit, 1.0);
    }
    next.slot_util[i] = crude_slot_util ? next.util[i] : slot_util_estimate(next.util[i], slots);
    next.attempt_prob[i] = next.slot_util[i] / next.avg_backoff[i];
  }
  return next;
}

}  // namespace detail

// One application of the composed map. The returned state's derived fields
// (p, Wbar, rho, rho-hat) are consistent with the input attempt vector; the
// attempt_prob field holds the updated vector.
inline FixedPointState sigma_step(const FixedPointState& state, const ArrivalVector& lambda,
                                  const SystemParams& params, const ChannelSpec& chan,
                                  bool crude_slot_util = false) {
  if (state.attempt_prob.size() != lambda.size())
    throw std::invalid_argument("sigma_step: state/arrival size mismatch");
  return detail::sigma_step_impl(state.attempt_prob, lambda, params,
                                 effective_costs(params, chan), crude_slot_util);
}

// Damped fixed-point iteration of the single-channel system from one initial
// condition. Non-convergence is reported through the result, never hidden.
inline SolveResult solve_fixed_point(const ArrivalVector& lambda, const InitialCondition& ic,
                                     const SystemParams& params, const ChannelSpec& chan,
                                     const SolveOptions& opts = {}) {
  validate_arrivals(lambda);
  params.validate();
  const std::size_t n = lambda.size();
  if (ic.attempt0.size() != n)
    throw std::invalid_argument("solve_fixed_point: initial condition size mismatch");
  const EffectiveSlotCosts costs = effective_costs(params, chan);

  std::vector<double> tau = ic.attempt0;
  for (double& t : tau) t = std::clamp(t, 0.0, 1.0);

  SolveResult result;
  result.ic = ic;
  FixedPointState mapped;
  for (int it = 0; it < opts.max_iterations; ++it) {
    mapped = detail::sigma_step_impl(tau, lambda, params, costs, opts.crude_slot_util);
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      residual = std::max(residual, std::abs(mapped.attempt_prob[i] - tau[i]));
    result.iterations = it + 1;
    result.residual = residual;
    if (residual < opts.tolerance) {
      result.converged = true;
      break;
    }
    for (std::size_t i = 0; i < n; ++i)
      tau[i] = (1.0 - opts.damping) * tau[i] + opts.damping * mapped.attempt_prob[i];
  }
  // Report the state whose derived quantities are exactly consistent with tau;
  // the residual then measures only the attempt-probability equation.
  result.state = detail::sigma_step_impl(tau, lambda, params, costs, opts.crude_slot_util);
  result.state.attempt_prob = tau;
  return result;
}

enum class StabilityClass { kStableAllIc, kUnstableAllIc, kIcDependent };

inline const char* to_string(StabilityClass c) {
  switch (c) {
    case StabilityClass::kStableAllIc: return "stable_all_ic";
    case StabilityClass::kUnstableAllIc: return "unstable_all_ic";
    default: return "ic_dependent";
  }
}

struct StabilityVerdict {
  StabilityClass cls = StabilityClass::kStableAllIc;
  bool in_region = false;  // stable from at least one initial condition
  std::vector<SolveResult> solutions;      // converged solutions, one per IC
  std::vector<std::string> non_converged;  // IC labels that failed to converge
};

inline bool state_is_stable(const FixedPointState& s) {
  for (double r : s.util)
    if (r >= 1.0 - 1e-12) return false;
  return true;
}

// Default IC set: the two empirical extremes. The all-zero start produces the
// latest transition to instability, the near-one start the earliest.
inline std::vector<InitialCondition> extremal_ics(std::size_t n) {
  return {InitialCondition::all_zero(n), InitialCondition::near_one(n)};
}

inline std::vector<InitialCondition> ic_grid(std::size_t n, int levels) {
  std::vector<InitialCondition> ics;
  if (levels < 2) levels = 2;
  for (int k = 0; k < levels; ++k) {
    const double v = 0.999 * static_cast<double>(k) / (levels - 1);
    ics.push_back(InitialCondition::uniform(n, v, "grid_" + std::to_string(k)));
  }
  return ics;
}

// Classify an arrival vector over a set of initial conditions. The point lies
// in the stability region if at least one converged solution keeps every
// utilization strictly below one.
inline StabilityVerdict classify(const ArrivalVector& lambda, const SystemParams& params,
                                 const ChannelSpec& chan, const SolveOptions& opts = {},
                                 std::vector<InitialCondition> ics = {}) {
  if (ics.empty()) ics = extremal_ics(lambda.size());
  StabilityVerdict verdict;
  bool any_stable = false, any_unstable = false;
  for (const auto& ic : ics) {
    SolveResult r = solve_fixed_point(lambda, ic, params, chan, opts);
    if (!r.converged) {
      verdict.non_converged.push_back(ic.label);
      continue;
    }
    (state_is_stable(r.state) ? any_stable : any_unstable) = true;
    verdict.solutions.push_back(std::move(r));
  }
  if (verdict.solutions.empty())
    throw std::runtime_error("classify: no initial condition converged");
  verdict.in_region = any_stable;
  if (any_stable && any_unstable)
    verdict.cls = StabilityClass::kIcDependent;
  else if (any_stable)
    verdict.cls = StabilityClass::kStableAllIc;
  else
    verdict.cls = StabilityClass::kUnstableAllIc;
  return verdict;
}

// Two converged states are the same equilibrium if they agree within this
// max-norm radius; the coexisting branches sit far apart by comparison.
inline bool states_distinct(const FixedPointState& a, const FixedPointState& b,
                            double tol = 1e-4) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.attempt_prob.size(); ++i) {
    d = std::max(d, std::abs(a.attempt_prob[i] - b.attempt_prob[i]));
    d = std::max(d, std::abs(a.util[i] - b.util[i]));
  }
  return d > tol;
}

// ---------------------------------------------------------------------------
// Large-window closed form and the region it induces.

struct LargeWindowSolution {
  std::vector<double> attempt_prob;
  std::vector<double> util;
  bool feasible = false;     // sum of gamma1 stayed below one
  double gamma1_sum = 0;
};

// Closed-form solution of the large-window approximation with a common busy
// slot cost T: tau_i = gamma1_i * sum_j gamma2_j / (1 - sum gamma1) + gamma2_i.
inline LargeWindowSolution solve_large_window(const ArrivalVector& lambda,
                                              const SystemParams& params, double slot_cost) {
  validate_arrivals(lambda);
  const std::size_t n = lambda.size();
  const double w = static_cast<double>(params.initial_window);
  const double p_bits = params.payload_bits;
  LargeWindowSolution out;
  std::vector<double> g1(n), g2(n);
  double sum1 = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lt = lambda[i] * slot_cost / p_bits;
    g1[i] = lt / (1.0 + lt);
    g2[i] = lambda[i] * ((w - 1.0) * params.slot_time + 2.0 * slot_cost) /
            (p_bits * (w + 1.0)) / (1.0 + lt);
    sum1 += g1[i];
    sum2 += g2[i];
  }
  out.gamma1_sum = sum1;
  if (sum1 >= 1.0) return out;  // closed form blows up; signalled, not clamped
  out.feasible = true;
  out.attempt_prob.resize(n);
  out.util.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.attempt_prob[i] = g1[i] * sum2 / (1.0 - sum1) + g2[i];
    out.util[i] = out.attempt_prob[i] * (w + 1.0) / 2.0;
  }
  return out;
}

// Membership in the large-window region: every closed-form attempt probability
// must lie strictly inside (0, 2/(W+1)). The origin fails the left inequality
// by construction (it is classified stable by convention elsewhere).
inline bool large_window_region_contains(const ArrivalVector& lambda, const SystemParams& params,
                                         double slot_cost) {
  const LargeWindowSolution sol = solve_large_window(lambda, params, slot_cost);
  if (!sol.feasible) return false;
  const double cap = 2.0 / (params.initial_window + 1.0);
  for (double t : sol.attempt_prob)
    if (!(t > 0.0 && t < cap)) return false;
  return true;
}

}  // namespace wlanstab
