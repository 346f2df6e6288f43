#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "wlanstab/params.hpp"

namespace wlanstab {

enum class PolicyKind { kStatic, kSwitchAfterSuccess, kSwitchAfterCollision, kPacketAssign };

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::kStatic: return "static";
    case PolicyKind::kSwitchAfterSuccess: return "sas";
    case PolicyKind::kSwitchAfterCollision: return "sac";
    default: return "packet_assign";
  }
}

// Channel-switching behaviour of one node. switch_probs[j] is the switch
// probability when the triggering event occurs at backoff stage j; the
// packet-assignment variant instead redraws the serving channel after every
// delivered packet.
struct PolicySpec {
  PolicyKind kind = PolicyKind::kStatic;
  std::vector<double> switch_probs;  // per stage, 0..m
  std::vector<double> assign_dist;   // over channels

  static PolicySpec constant(PolicyKind kind, double prob, int max_stage) {
    PolicySpec p;
    p.kind = kind;
    p.switch_probs.assign(static_cast<std::size_t>(max_stage) + 1, prob);
    return p;
  }
  // The stage-proportional profile alpha_j = j/m.
  static PolicySpec stage_ramp(PolicyKind kind, int max_stage) {
    PolicySpec p;
    p.kind = kind;
    p.switch_probs.resize(static_cast<std::size_t>(max_stage) + 1);
    for (int j = 0; j <= max_stage; ++j)
      p.switch_probs[j] = max_stage > 0 ? static_cast<double>(j) / max_stage : 0.0;
    return p;
  }
};

struct NodeSetup {
  double arrival_rate = 0;  // bits/second
  PolicySpec policy;
  int initial_channel = 0;
};

struct SimConfig {
  SystemParams params;
  std::vector<ChannelSpec> channels;
  std::vector<NodeSetup> nodes;
  double duration = 10.0;         // T_f, seconds
  std::uint64_t seed = 1;
  double alpha_threshold = 0.01;  // backlog-ratio instability threshold
  double sample_interval = 0.01;  // population sampling period; <= 0 disables

  void validate() const {
    params.validate();
    if (channels.empty()) throw std::invalid_argument("SimConfig: need at least one channel");
    if (nodes.empty()) throw std::invalid_argument("SimConfig: need at least one node");
    if (!(duration > 0)) throw std::invalid_argument("SimConfig: duration must be > 0");
    if (!(alpha_threshold > 0) || !(alpha_threshold < 1))
      throw std::invalid_argument("SimConfig: alpha threshold must lie in (0,1)");
    const int k = static_cast<int>(channels.size());
    for (const auto& node : nodes) {
      if (!(node.arrival_rate >= 0) || !std::isfinite(node.arrival_rate))
        throw std::invalid_argument("SimConfig: arrival rates must be finite and non-negative");
      if (node.initial_channel < 0 || node.initial_channel >= k)
        throw std::invalid_argument("SimConfig: initial channel out of range");
      if (node.policy.kind == PolicyKind::kPacketAssign) {
        if (static_cast<int>(node.policy.assign_dist.size()) != k)
          throw std::invalid_argument("SimConfig: assignment distribution size mismatch");
        double sum = 0;
        for (double v : node.policy.assign_dist) {
          if (!(v >= 0)) throw std::invalid_argument("SimConfig: negative assignment probability");
          sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9)
          throw std::invalid_argument("SimConfig: assignment distribution must sum to one");
      } else if (node.policy.kind != PolicyKind::kStatic) {
        if (node.policy.switch_probs.size() != static_cast<std::size_t>(params.max_stage) + 1)
          throw std::invalid_argument("SimConfig: switch_probs must have one entry per stage");
        for (double v : node.policy.switch_probs)
          if (!(v >= 0.0) || v > 1.0)
            throw std::invalid_argument("SimConfig: switch probabilities must lie in [0,1]");
      }
    }
  }
};

using Rng = std::mt19937_64;

namespace detail {

inline double rng_uniform(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::uint64_t rng_below(Rng& rng, std::uint64_t n) {
  return n > 1 ? rng() % n : 0;
}

inline double rng_exponential(Rng& rng, double rate) {
  return -std::log1p(-rng_uniform(rng)) / rate;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Backoff and queue state of one node during a run.
struct NodeState {
  std::uint64_t queue = 0;  // waiting packets, excluding the one in service
  bool in_service = false;
  int channel = 0;
  int stage = 0;
  std::int64_t timer = 0;   // remaining countdown slots
  double sync_time = 0;     // participates in slots starting at or after this
};

enum class SlotEvent { kSuccess, kCollision };

struct PolicyOutcome {
  int channel = 0;
  int stage = 0;
};

// Post-event channel and backoff stage under the node's switching policy.
// Success resets the stage; a collision advances it (capped at m) and, under
// the switch-after-collision rule, the advanced stage travels with the node.
// Switch probabilities are indexed by the stage at which the event occurred.
inline PolicyOutcome apply_policy(const NodeState& node, SlotEvent event, const PolicySpec& policy,
                                  int max_stage, int num_channels, Rng& rng) {
  PolicyOutcome out;
  out.channel = node.channel;
  out.stage = event == SlotEvent::kSuccess ? 0 : std::min(node.stage + 1, max_stage);
  const auto switch_uniform_other = [&]() {
    if (num_channels < 2) return node.channel;
    auto pick = static_cast<int>(detail::rng_below(rng, num_channels - 1));
    return pick >= node.channel ? pick + 1 : pick;
  };
  switch (policy.kind) {
    case PolicyKind::kStatic:
      break;
    case PolicyKind::kSwitchAfterSuccess:
      if (event == SlotEvent::kSuccess) {
        const double alpha = policy.switch_probs[node.stage];
        if (alpha > 0.0 && detail::rng_uniform(rng) < alpha) out.channel = switch_uniform_other();
      }
      break;
    case PolicyKind::kSwitchAfterCollision:
      if (event == SlotEvent::kCollision) {
        const double alpha = policy.switch_probs[node.stage];
        if (alpha > 0.0 && detail::rng_uniform(rng) < alpha) out.channel = switch_uniform_other();
      }
      break;
    case PolicyKind::kPacketAssign:
      if (event == SlotEvent::kSuccess) {
        double u = detail::rng_uniform(rng);
        for (std::size_t c = 0; c < policy.assign_dist.size(); ++c) {
          u -= policy.assign_dist[c];
          if (u < 0.0) {
            out.channel = static_cast<int>(c);
            break;
          }
        }
      }
      break;
  }
  return out;
}

struct SimReport {
  std::vector<double> throughput;           // bits/second per node
  std::vector<std::uint64_t> backlog;       // waiting packets at the end, excl. in-service
  std::vector<std::uint64_t> in_service;    // 0/1 per node
  std::vector<std::uint64_t> arrivals;      // packets per node
  std::vector<std::vector<std::uint64_t>> successes;      // [node][channel]
  std::vector<std::vector<std::uint64_t>> collisions;     // [node][channel]
  std::vector<std::vector<std::uint64_t>> attempts;       // [node][channel]
  std::vector<std::vector<std::uint64_t>> slots_present;  // [node][channel]
  std::vector<std::vector<double>> empirical_tau;         // attempts / slots present
  std::vector<std::uint64_t> cslot_count;   // per channel
  std::vector<double> simulated_time;       // per channel, sum of slot durations
  std::vector<double> busy_time_fraction;   // per node (time-average utilization)
  std::vector<double> busy_slot_fraction;   // per node (slot-average utilization)
  std::vector<std::vector<std::uint64_t>> population_histogram;  // [channel][count 0..N]
  std::uint64_t samples_taken = 0;
  std::vector<double> sample_times;
  std::vector<std::vector<int>> population_series;                // [sample][channel]
  std::vector<std::vector<std::uint64_t>> cumulative_bits_series; // [sample][node]
  std::uint64_t seed = 0;
  std::string generator;
};

// Deterministic multi-channel DCF run. Every channel advances slot by slot;
// slots are processed in global start-time order (ties broken by channel
// index), and a node takes part only in slots of its channel that begin at or
// after its last switch.
inline SimReport simulate(const SimConfig& config) {
  config.validate();
  const std::size_t n = config.nodes.size();
  const std::size_t k = config.channels.size();
  const double p_bits = config.params.payload_bits;
  const int w0 = config.params.initial_window;
  const int m = config.params.max_stage;

  Rng mac_rng(detail::splitmix64(config.seed));
  std::vector<Rng> arrival_rng;
  arrival_rng.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    arrival_rng.emplace_back(detail::splitmix64(config.seed ^ (0xA5A5A5A5ULL + i)));

  std::vector<NodeState> nodes(n);
  std::vector<double> next_arrival(n, std::numeric_limits<double>::infinity());
  std::vector<double> busy_since(n, 0.0);
  std::vector<double> busy_time(n, 0.0);
  std::vector<std::uint64_t> busy_slots(n, 0), present_slots(n, 0);
  std::vector<std::uint64_t> bits(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    nodes[i].channel = config.nodes[i].initial_channel;
    const double rate_pkts = config.nodes[i].arrival_rate / p_bits;
    if (rate_pkts > 0.0) next_arrival[i] = detail::rng_exponential(arrival_rng[i], rate_pkts);
  }

  SimReport rep;
  rep.seed = config.seed;
  rep.generator = "mt19937_64";
  rep.throughput.assign(n, 0.0);
  rep.backlog.assign(n, 0);
  rep.in_service.assign(n, 0);
  rep.arrivals.assign(n, 0);
  rep.successes.assign(n, std::vector<std::uint64_t>(k, 0));
  rep.collisions = rep.successes;
  rep.attempts = rep.successes;
  rep.slots_present = rep.successes;
  rep.cslot_count.assign(k, 0);
  rep.simulated_time.assign(k, 0.0);
  rep.population_histogram.assign(k, std::vector<std::uint64_t>(n + 1, 0));

  std::vector<double> next_start(k, 0.0);
  const bool sampling = config.sample_interval > 0.0;
  double next_sample = sampling ? 0.0 : std::numeric_limits<double>::infinity();

  const auto pull_arrivals = [&](std::size_t i, double now) {
    const double rate_pkts = config.nodes[i].arrival_rate / p_bits;
    while (next_arrival[i] <= now) {
      if (nodes[i].queue == 0 && !nodes[i].in_service) busy_since[i] = next_arrival[i];
      ++nodes[i].queue;
      ++rep.arrivals[i];
      if (rep.arrivals[i] > (1ULL << 40)) throw std::runtime_error("simulate: arrival counter overflow");
      next_arrival[i] += detail::rng_exponential(arrival_rng[i], rate_pkts);
    }
  };

  const auto take_sample = [&](double t) {
    std::vector<int> pop(k, 0);
    for (const auto& node : nodes) ++pop[node.channel];
    for (std::size_t c = 0; c < k; ++c) ++rep.population_histogram[c][pop[c]];
    ++rep.samples_taken;
    rep.sample_times.push_back(t);
    rep.population_series.push_back(pop);
    rep.cumulative_bits_series.push_back(bits);
  };

  std::vector<std::size_t> members, transmitters;
  members.reserve(n);
  transmitters.reserve(n);

  while (true) {
    // Next slot to process: earliest start, lowest channel index on ties.
    std::size_t ch = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (next_start[c] < next_start[ch]) ch = c;
    const double t0 = next_start[ch];
    if (t0 >= config.duration) break;

    while (next_sample <= t0 && next_sample <= config.duration) {
      take_sample(next_sample);
      next_sample += config.sample_interval;
    }

    members.clear();
    transmitters.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (nodes[i].channel != static_cast<int>(ch) || nodes[i].sync_time > t0) continue;
      members.push_back(i);
      pull_arrivals(i, t0);
      if (!nodes[i].in_service && nodes[i].queue > 0) {
        --nodes[i].queue;
        nodes[i].in_service = true;
        nodes[i].stage = 0;
        nodes[i].timer = static_cast<std::int64_t>(detail::rng_below(mac_rng, w0));
      }
      if (nodes[i].in_service && nodes[i].timer == 0) transmitters.push_back(i);
    }

    double slot_len = config.params.slot_time;
    if (transmitters.size() == 1) slot_len = config.channels[ch].t_success;
    else if (transmitters.size() > 1) slot_len = config.channels[ch].t_collision;
    const double t1 = t0 + slot_len;
    ++rep.cslot_count[ch];
    rep.simulated_time[ch] += slot_len;

    for (std::size_t i : members) {
      ++rep.slots_present[i][ch];
      ++present_slots[i];
      if (nodes[i].in_service || nodes[i].queue > 0) ++busy_slots[i];
    }
    for (std::size_t i : transmitters) ++rep.attempts[i][ch];

    if (transmitters.size() == 1) {
      const std::size_t i = transmitters.front();
      ++rep.successes[i][ch];
      bits[i] += static_cast<std::uint64_t>(p_bits);
      const PolicyOutcome next = apply_policy(nodes[i], SlotEvent::kSuccess,
                                              config.nodes[i].policy, m,
                                              static_cast<int>(k), mac_rng);
      // Arrivals that landed during this slot keep the busy period open.
      pull_arrivals(i, std::min(t1, config.duration));
      nodes[i].in_service = false;
      nodes[i].stage = next.stage;
      nodes[i].timer = 0;
      if (next.channel != nodes[i].channel) {
        nodes[i].channel = next.channel;
        nodes[i].sync_time = t1;
      }
      if (nodes[i].queue == 0) {
        busy_time[i] += std::min(t1, config.duration) - std::min(busy_since[i], config.duration);
      }
    } else if (transmitters.size() > 1) {
      for (std::size_t i : transmitters) {
        ++rep.collisions[i][ch];
        const PolicyOutcome next = apply_policy(nodes[i], SlotEvent::kCollision,
                                                config.nodes[i].policy, m,
                                                static_cast<int>(k), mac_rng);
        nodes[i].stage = next.stage;
        const std::uint64_t window = (1ULL << nodes[i].stage) * static_cast<std::uint64_t>(w0);
        nodes[i].timer = static_cast<std::int64_t>(detail::rng_below(mac_rng, window));
        if (next.channel != nodes[i].channel) {
          nodes[i].channel = next.channel;
          nodes[i].sync_time = t1;
        }
      }
    }
    for (std::size_t i : members) {
      if (nodes[i].in_service && nodes[i].timer > 0 &&
          std::find(transmitters.begin(), transmitters.end(), i) == transmitters.end())
        --nodes[i].timer;
    }
    next_start[ch] = t1;
  }

  while (sampling && next_sample <= config.duration) {
    take_sample(next_sample);
    next_sample += config.sample_interval;
  }

  for (std::size_t i = 0; i < n; ++i) {
    pull_arrivals(i, config.duration);
    if (nodes[i].queue > 0 || nodes[i].in_service)
      busy_time[i] += config.duration - std::min(busy_since[i], config.duration);
    rep.backlog[i] = nodes[i].queue;
    rep.in_service[i] = nodes[i].in_service ? 1 : 0;
    rep.throughput[i] = static_cast<double>(bits[i]) / config.duration;
  }
  rep.busy_time_fraction.assign(n, 0.0);
  rep.busy_slot_fraction.assign(n, 0.0);
  rep.empirical_tau.assign(n, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    rep.busy_time_fraction[i] = std::clamp(busy_time[i] / config.duration, 0.0, 1.0);
    if (present_slots[i] > 0)
      rep.busy_slot_fraction[i] = static_cast<double>(busy_slots[i]) / present_slots[i];
    for (std::size_t c = 0; c < k; ++c)
      if (rep.slots_present[i][c] > 0)
        rep.empirical_tau[i][c] =
            static_cast<double>(rep.attempts[i][c]) / rep.slots_present[i][c];
  }
  return rep;
}

struct NodeMargin {
  bool throughput_deficit = false;  // delivered less than offered
  double backlog_ratio = 0;         // B * P / (lambda * T_f)
};

struct RunVerdict {
  bool unstable = false;
  std::vector<NodeMargin> margins;
};

// A run is unstable when some node with positive traffic both delivered less
// than its offered load and accumulated a backlog above the alpha threshold.
// Zero-rate nodes are skipped: both conditions are undefined for them.
inline RunVerdict classify_stability(const SimReport& report, const SimConfig& config) {
  RunVerdict verdict;
  const std::size_t n = config.nodes.size();
  verdict.margins.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lambda = config.nodes[i].arrival_rate;
    if (lambda <= 0.0) continue;
    const double pending =
        static_cast<double>(report.backlog[i] + report.in_service[i]) * config.params.payload_bits;
    verdict.margins[i].throughput_deficit = report.throughput[i] < lambda;
    verdict.margins[i].backlog_ratio = pending / (lambda * config.duration);
    if (verdict.margins[i].throughput_deficit &&
        verdict.margins[i].backlog_ratio > config.alpha_threshold)
      verdict.unstable = true;
  }
  return verdict;
}

// Histogram of the sampled node population of one channel.
inline std::vector<std::uint64_t> population_histogram(const SimReport& report, int channel) {
  if (channel < 0 || channel >= static_cast<int>(report.population_histogram.size()))
    throw std::out_of_range("population_histogram: channel index out of range");
  return report.population_histogram[channel];
}

inline double mean_population(const SimReport& report, int channel) {
  const auto hist = population_histogram(report, channel);
  double weighted = 0.0, total = 0.0;
  for (std::size_t c = 0; c < hist.size(); ++c) {
    weighted += static_cast<double>(c) * hist[c];
    total += static_cast<double>(hist[c]);
  }
  return total > 0.0 ? weighted / total : 0.0;
}

}  // namespace wlanstab
