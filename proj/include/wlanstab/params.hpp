#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace wlanstab {

// How collision/success slot costs are accounted: plain per-attempt decoupling,
// or with runs of successive attempts folded into effective slot costs.
enum class CollisionModel { kBianchi, kFacs };

inline const char* to_string(CollisionModel m) {
  return m == CollisionModel::kBianchi ? "bianchi" : "facs";
}

// Global MAC/PHY constants shared by all nodes. Durations are seconds, sizes
// are bits; microsecond figures from configuration files are converted on
// ingest so only one unit circulates internally.
struct SystemParams {
  int initial_window = 32;  // W, slots; contention window of stage 0
  int max_stage = 5;        // m, window doubles up to 2^m * W
  double slot_time = 20e-6;  // sigma, empty system slot
  double difs = 50e-6;
  double sifs = 10e-6;
  double ack_time = 203e-6;      // ACK duration in time units
  double header_time = 192e-6;   // PHY+MAC header duration in time units
  double prop_delay = 1e-6;      // delta
  double payload_bits = 12000.0; // P
  CollisionModel collision_model = CollisionModel::kBianchi;

  void validate() const {
    if (initial_window < 2) throw std::invalid_argument("initial_window must be >= 2");
    if (max_stage < 0) throw std::invalid_argument("max_stage must be >= 0");
    if (slot_time <= 0 || difs <= 0 || sifs <= 0 || ack_time <= 0 ||
        header_time <= 0 || prop_delay <= 0)
      throw std::invalid_argument("all durations must be > 0");
    if (payload_bits <= 0) throw std::invalid_argument("payload_bits must be > 0");
  }
};

// Per-channel transmission rate and the derived busy-slot durations.
struct ChannelSpec {
  double bandwidth = 11e6;  // bits/second
  double t_success = 0;     // T_s, seconds
  double t_collision = 0;   // T_c, seconds
};

// Busy-slot durations under the basic access mechanism:
//   T_s = P/rate + Header + ACK + DIFS + SIFS + 2*delta
//   T_c = P/rate + Header + DIFS + delta
inline ChannelSpec derive_timing(const SystemParams& params, double bandwidth) {
  if (!(bandwidth > 0)) throw std::invalid_argument("bandwidth must be > 0");
  ChannelSpec chan;
  chan.bandwidth = bandwidth;
  const double tx = params.payload_bits / bandwidth;
  chan.t_success = tx + params.header_time + params.ack_time + params.difs +
                   params.sifs + 2.0 * params.prop_delay;
  chan.t_collision = tx + params.header_time + params.difs + params.prop_delay;
  return chan;
}

namespace detail {

// Average backoff length (slots per transmission attempt) as a function of the
// conditional collision probability. Evaluated term by term so the expression
// stays well defined across the whole p range, including 2p = 1.
inline double avg_backoff_unchecked(double coll_prob, int initial_window, int max_stage) {
  const double w = static_cast<double>(initial_window);
  double series = 0.0;  // (1-p) * sum_{j=0}^{m-1} (2p)^j
  double term = 1.0;
  for (int j = 0; j < max_stage; ++j) {
    series += term;
    term *= 2.0 * coll_prob;
  }
  // after the loop, term == (2p)^m
  return 0.5 * (w * ((1.0 - coll_prob) * series + term) + 1.0);
}

}  // namespace detail

// W-bar: expected number of slots per transmission attempt. Domain: p in [0,1).
inline double avg_backoff(double coll_prob, const SystemParams& params) {
  if (!(coll_prob >= 0.0) || coll_prob >= 1.0)
    throw std::domain_error("avg_backoff: collision probability must lie in [0,1)");
  return detail::avg_backoff_unchecked(coll_prob, params.initial_window, params.max_stage);
}

struct SaturatedPoint {
  double attempt_prob = 0;  // tau
  double coll_prob = 0;     // p
  double residual = 0;      // max-norm residual of the two defining equations
};

// Saturated-network fixed point: tau = 1/avg_backoff(p) together with
// p = 1 - (1-tau)^(N-1). Solved by bisection on p; the composed scalar map
// p - (1 - (1 - 1/avg_backoff(p))^(N-1)) is monotone increasing.
inline SaturatedPoint saturated_fixed_point(const SystemParams& params, int num_nodes) {
  if (num_nodes < 1) throw std::invalid_argument("saturated_fixed_point: need at least one node");
  const auto tau_of = [&](double p) {
    return 1.0 / detail::avg_backoff_unchecked(p, params.initial_window, params.max_stage);
  };
  const auto excess = [&](double p) {
    return p - (1.0 - std::pow(1.0 - tau_of(p), num_nodes - 1));
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) >= 0.0 ? hi : lo) = mid;
  }
  SaturatedPoint out;
  out.coll_prob = 0.5 * (lo + hi);
  out.attempt_prob = tau_of(out.coll_prob);
  out.residual = std::max(
      std::abs(out.attempt_prob - tau_of(out.coll_prob)),
      std::abs(out.coll_prob - (1.0 - std::pow(1.0 - out.attempt_prob, num_nodes - 1))));
  return out;
}

// Arrival-rate vector, bits/second per node.
using ArrivalVector = std::vector<double>;

inline void validate_arrivals(const ArrivalVector& lambda) {
  if (lambda.empty()) throw std::invalid_argument("arrival vector must be non-empty");
  for (double v : lambda)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument("arrival rates must be finite and non-negative");
}

}  // namespace wlanstab
