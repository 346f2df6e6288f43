#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "wlanstab/params.hpp"
#include "wlanstab/single_channel.hpp"
#include "wlanstab/slot_stats.hpp"

namespace wlanstab {

// The three occupancy descriptions of a switching policy for one node:
// fraction of node-slots spent per channel (nslot), the per-channel c-slot
// presence profile (cslot, not a distribution), and the per-packet channel
// assignment distribution (packet).
struct OccupancyProfile {
  std::vector<double> nslot;   // q
  std::vector<double> cslot;   // q-hat
  std::vector<double> packet;  // q-tilde
};

inline void validate_distribution(const std::vector<double>& q, const char* what) {
  if (q.empty()) throw std::invalid_argument(std::string(what) + ": empty distribution");
  double sum = 0.0;
  for (double v : q) {
    if (!(v >= 0.0)) throw std::invalid_argument(std::string(what) + ": negative entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument(std::string(what) + ": entries must sum to one");
}

// A switching policy that induces the same channel occupancy distribution at
// every node. Biased (node-dependent) policies are outside the analytic model.
struct UnbiasedPolicy {
  std::vector<double> occupancy;  // q over channels

  static UnbiasedPolicy uniform(std::size_t k) {
    UnbiasedPolicy p;
    p.occupancy.assign(k, 1.0 / static_cast<double>(k));
    return p;
  }
  void validate() const { validate_distribution(occupancy, "UnbiasedPolicy"); }
};

// Convert the n-slot occupancy distribution to the c-slot presence profile:
// q-hat_k = q_k / (q_k + sum_{l != k} q_l * E[slot present in l] / E[slot absent in k]).
inline std::vector<double> occupancy_cslot_from_nslot(const std::vector<double>& q,
                                                      const std::vector<double>& mean_slot_present,
                                                      const std::vector<double>& mean_slot_absent) {
  validate_distribution(q, "occupancy_cslot_from_nslot");
  const std::size_t k = q.size();
  if (mean_slot_present.size() != k || mean_slot_absent.size() != k)
    throw std::invalid_argument("occupancy_cslot_from_nslot: size mismatch");
  for (std::size_t c = 0; c < k; ++c)
    if (!(mean_slot_present[c] > 0.0) || !(mean_slot_absent[c] > 0.0))
      throw std::domain_error("occupancy_cslot_from_nslot: slot means must be positive");
  std::vector<double> q_hat(k);
  for (std::size_t c = 0; c < k; ++c) {
    double cross = 0.0;
    for (std::size_t l = 0; l < k; ++l)
      if (l != c) cross += q[l] * mean_slot_present[l] / mean_slot_absent[c];
    q_hat[c] = (q[c] + cross) > 0.0 ? q[c] / (q[c] + cross) : 0.0;
  }
  return q_hat;
}

// Recover the n-slot occupancy distribution from the packet assignment
// distribution: q_k proportional to q-tilde_k * (Wbar_k / (1 - p_k)) / rho-hat_k.
inline std::vector<double> occupancy_nslot_from_packet(const std::vector<double>& q_tilde,
                                                       const std::vector<double>& avg_backoff_len,
                                                       const std::vector<double>& coll_prob,
                                                       const std::vector<double>& slot_util) {
  validate_distribution(q_tilde, "occupancy_nslot_from_packet");
  const std::size_t k = q_tilde.size();
  if (avg_backoff_len.size() != k || coll_prob.size() != k || slot_util.size() != k)
    throw std::invalid_argument("occupancy_nslot_from_packet: size mismatch");
  std::vector<double> weights(k, 0.0);
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    if (q_tilde[c] <= 0.0) continue;
    if (!(slot_util[c] > 0.0))
      throw std::domain_error("occupancy_nslot_from_packet: zero slot utilization on a used channel");
    if (!(coll_prob[c] < 1.0))
      throw std::domain_error("occupancy_nslot_from_packet: collision probability must be < 1");
    weights[c] = q_tilde[c] * avg_backoff_len[c] / (1.0 - coll_prob[c]) / slot_util[c];
    total += weights[c];
  }
  if (!(total > 0.0))
    throw std::domain_error("occupancy_nslot_from_packet: degenerate assignment");
  for (double& w : weights) w /= total;
  return weights;
}

// Node x channel matrices are laid out as vector-of-rows, one row per node.
using Matrix = std::vector<std::vector<double>>;

struct MultiFixedPointState {
  Matrix attempt_prob;      // tau[i][k]
  Matrix coll_prob;         // p[i][k]
  Matrix avg_backoff;       // Wbar[i][k]
  Matrix slot_util;         // rho-hat[i][k]
  Matrix cslot_occupancy;   // q-hat[i][k]
  std::vector<double> util; // rho[i]

  static MultiFixedPointState zeros(std::size_t n, std::size_t k) {
    MultiFixedPointState s;
    s.attempt_prob.assign(n, std::vector<double>(k, 0.0));
    s.coll_prob = s.attempt_prob;
    s.avg_backoff = s.attempt_prob;
    s.slot_util = s.attempt_prob;
    s.cslot_occupancy = s.attempt_prob;
    s.util.assign(n, 0.0);
    return s;
  }
};

struct MultiSolveResult {
  MultiFixedPointState state;
  bool converged = false;
  int iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
  std::string ic_label;
};

namespace detail {

struct MultiIterate {
  Matrix tau;
  std::vector<double> rho;
};

// One application of the multi-channel map at the current (tau, rho) iterate.
inline MultiFixedPointState multi_step_impl(const MultiIterate& cur, const ArrivalVector& lambda,
                                            const std::vector<double>& q,
                                            const SystemParams& params,
                                            const std::vector<EffectiveSlotCosts>& costs,
                                            bool crude_slot_util) {
  const std::size_t n = lambda.size();
  const std::size_t k = q.size();
  MultiFixedPointState next = MultiFixedPointState::zeros(n, k);

  // Per-channel collision probabilities and backoff lengths.
  std::vector<std::vector<double>> tau_col(k, std::vector<double>(n));
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t i = 0; i < n; ++i) tau_col[c][i] = cur.tau[i][c];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      double prod = 1.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) prod *= 1.0 - cur.tau[j][c];
      next.coll_prob[i][c] = 1.0 - prod;
      next.avg_backoff[i][c] = detail::avg_backoff_unchecked(
          std::min(next.coll_prob[i][c], 1.0), params.initial_window, params.max_stage);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    // Channel-conditional slot lengths seen by node i.
    std::vector<SlotLengths> slots(k);
    std::vector<double> present(k), absent(k);
    for (std::size_t c = 0; c < k; ++c) {
      slots[c] = detail::slot_lengths_unchecked(i, tau_col[c], 1.0 / next.avg_backoff[i][c],
                                                costs[c]);
      const double sl_util = crude_slot_util
                                 ? cur.rho[i]
                                 : slot_util_estimate(std::clamp(cur.rho[i], 0.0, 1.0), slots[c]);
      present[c] = sl_util * slots[c].busy + (1.0 - sl_util) * slots[c].empty;
      absent[c] = slots[c].empty;
    }
    const std::vector<double> q_hat = occupancy_cslot_from_nslot(q, present, absent);
    next.cslot_occupancy[i] = q_hat;

    // Occupancy-weighted per-packet service time, then rho and the updated
    // per-channel attempt probabilities.
    double per_packet = 0.0;
    bool infinite = false;
    for (std::size_t c = 0; c < k; ++c) {
      const ServiceTime st =
          packet_service_time(next.avg_backoff[i][c], std::min(next.coll_prob[i][c], 1.0),
                              slots[c].deferred, costs[c], params.payload_bits);
      if (q_hat[c] > 0.0 && std::isinf(st.per_packet)) {
        infinite = true;
        break;
      }
      if (q_hat[c] > 0.0) per_packet += q_hat[c] * st.per_packet;
    }
    if (infinite) {
      next.util[i] = lambda[i] > 0.0 ? 1.0 : 0.0;
    } else {
      next.util[i] = std::min(lambda[i] * per_packet / params.payload_bits, 1.0);
    }
    for (std::size_t c = 0; c < k; ++c) {
      next.slot_util[i][c] =
          crude_slot_util ? next.util[i] : slot_util_estimate(next.util[i], slots[c]);
      next.attempt_prob[i][c] = q_hat[c] * next.slot_util[i][c] / next.avg_backoff[i][c];
    }
  }
  return next;
}

}  // namespace detail

// Solve the multi-channel system under an unbiased policy by damped iteration
// on the (attempt matrix, utilization vector) pair.
inline MultiSolveResult solve_multi_fixed_point(const ArrivalVector& lambda,
                                                const UnbiasedPolicy& policy,
                                                const SystemParams& params,
                                                const std::vector<ChannelSpec>& channels,
                                                const InitialCondition& ic,
                                                const SolveOptions& opts = {}) {
  validate_arrivals(lambda);
  params.validate();
  policy.validate();
  const std::size_t n = lambda.size();
  const std::size_t k = channels.size();
  if (policy.occupancy.size() != k)
    throw std::invalid_argument("solve_multi_fixed_point: policy/channel size mismatch");
  if (ic.attempt0.size() != n)
    throw std::invalid_argument("solve_multi_fixed_point: initial condition size mismatch");

  std::vector<EffectiveSlotCosts> costs(k);
  for (std::size_t c = 0; c < k; ++c) costs[c] = effective_costs(params, channels[c]);

  detail::MultiIterate cur;
  cur.tau.assign(n, std::vector<double>(k));
  cur.rho.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t0 = std::clamp(ic.attempt0[i], 0.0, 1.0);
    for (std::size_t c = 0; c < k; ++c) cur.tau[i][c] = t0;
    cur.rho[i] = std::clamp(ic.util0.empty() ? t0 : ic.util0[i], 0.0, 1.0);
  }

  MultiSolveResult result;
  result.ic_label = ic.label;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const MultiFixedPointState next =
        detail::multi_step_impl(cur, lambda, policy.occupancy, params, costs, opts.crude_slot_util);
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      residual = std::max(residual, std::abs(next.util[i] - cur.rho[i]));
      for (std::size_t c = 0; c < k; ++c)
        residual = std::max(residual, std::abs(next.attempt_prob[i][c] - cur.tau[i][c]));
    }
    result.iterations = it + 1;
    result.residual = residual;
    if (residual < opts.tolerance) {
      result.converged = true;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      cur.rho[i] = (1.0 - opts.damping) * cur.rho[i] + opts.damping * next.util[i];
      for (std::size_t c = 0; c < k; ++c)
        cur.tau[i][c] = (1.0 - opts.damping) * cur.tau[i][c] + opts.damping * next.attempt_prob[i][c];
    }
  }
  result.state =
      detail::multi_step_impl(cur, lambda, policy.occupancy, params, costs, opts.crude_slot_util);
  result.state.attempt_prob = cur.tau;
  result.state.util = cur.rho;
  return result;
}

inline bool state_is_stable(const MultiFixedPointState& s) {
  for (double r : s.util)
    if (r >= 1.0 - 1e-12) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Large-window approximation under an unbiased policy with symmetric channels.

struct MultiLargeWindowSolution {
  Matrix attempt_prob;        // tau[i][k]
  std::vector<double> util;   // rho[i]
  bool feasible = false;
  double gamma1_sum = 0;
};

// Closed form of the reduced system: substituting the attempt probabilities
// tau_i^(k) = 2 q_k rho_i / (W+1) turns the utilization equations into the
// linear system rho_i = a_i + b_i * sum_{j != i} rho_j with
// b_i = (lambda_i T / P) * sum_k q_k^2.
inline MultiLargeWindowSolution solve_multi_large_window(const ArrivalVector& lambda,
                                                         const UnbiasedPolicy& policy,
                                                         const SystemParams& params,
                                                         double slot_cost) {
  validate_arrivals(lambda);
  policy.validate();
  const std::size_t n = lambda.size();
  const std::size_t k = policy.occupancy.size();
  const double w = static_cast<double>(params.initial_window);
  const double p_bits = params.payload_bits;
  double q_sq = 0.0;
  for (double v : policy.occupancy) q_sq += v * v;

  MultiLargeWindowSolution out;
  std::vector<double> g1(n), g2(n);
  double sum1 = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = lambda[i] * ((w - 1.0) * params.slot_time + 2.0 * slot_cost) / (2.0 * p_bits);
    const double b = lambda[i] * slot_cost / p_bits * q_sq;
    g1[i] = b / (1.0 + b);
    g2[i] = a / (1.0 + b);
    sum1 += g1[i];
    sum2 += g2[i];
  }
  out.gamma1_sum = sum1;
  if (sum1 >= 1.0) return out;
  const double y = sum2 / (1.0 - sum1);  // sum of utilizations
  out.feasible = true;
  out.util.resize(n);
  out.attempt_prob.assign(n, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    out.util[i] = g1[i] * y + g2[i];
    for (std::size_t c = 0; c < k; ++c)
      out.attempt_prob[i][c] = 2.0 * policy.occupancy[c] * out.util[i] / (w + 1.0);
  }
  return out;
}

inline bool multi_large_window_stable(const MultiLargeWindowSolution& sol) {
  if (!sol.feasible) return false;
  for (double r : sol.util)
    if (!(r < 1.0)) return false;
  return true;
}

// Convexity certificate for equi-occupancy optimality: with the per-node
// weights alpha_j = 2 rho_j / (W+1) fixed at the solution under q, the
// utilization excess over the uniform policy is
//   theta1_i * sum_{j != i} alpha_j * (sum_k q_k^2 - 1/K)  >= 0,
// with equality exactly when q is uniform (given positive traffic).
inline std::vector<double> equi_occupancy_gap(const ArrivalVector& lambda,
                                              const std::vector<double>& q,
                                              const SystemParams& params, double slot_cost) {
  validate_distribution(q, "equi_occupancy_gap");
  UnbiasedPolicy policy{q};
  const MultiLargeWindowSolution sol = solve_multi_large_window(lambda, policy, params, slot_cost);
  if (!sol.feasible)
    throw std::runtime_error("equi_occupancy_gap: system infeasible under this policy");
  const std::size_t n = lambda.size();
  const double w = static_cast<double>(params.initial_window);
  double q_sq = 0.0;
  for (double v : q) q_sq += v * v;
  const double excess = q_sq - 1.0 / static_cast<double>(q.size());
  std::vector<double> gap(n);
  double alpha_sum = 0.0;
  for (double r : sol.util) alpha_sum += 2.0 * r / (w + 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double theta1 = lambda[i] * (w + 1.0) * slot_cost / (2.0 * params.payload_bits);
    const double alpha_others = alpha_sum - 2.0 * sol.util[i] / (w + 1.0);
    gap[i] = theta1 * alpha_others * excess;
  }
  return gap;
}

}  // namespace wlanstab
