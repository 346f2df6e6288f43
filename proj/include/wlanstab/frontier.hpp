#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wlanstab/parallel.hpp"
#include "wlanstab/params.hpp"
#include "wlanstab/simulator.hpp"
#include "wlanstab/single_channel.hpp"

namespace wlanstab {

enum class TraceMethod {
  kAnalyticSigma,
  kAnalyticSigmaTilde,
  kAnalyticSigmaG,
  kAnalyticSigmaGTilde,
  kEmpiricalSim,
};

inline const char* to_string(TraceMethod m) {
  switch (m) {
    case TraceMethod::kAnalyticSigma: return "analytic_sigma";
    case TraceMethod::kAnalyticSigmaTilde: return "analytic_sigma_tilde";
    case TraceMethod::kAnalyticSigmaG: return "analytic_sigma_g";
    case TraceMethod::kAnalyticSigmaGTilde: return "analytic_sigma_g_tilde";
    default: return "empirical_sim";
  }
}

// Boundary of the stability region along one arrival-rate axis, traced as a
// function of another axis: points are (varied coordinate, boundary value).
struct BoundaryTrace {
  int sweep_axis = 0;  // coordinate whose boundary is located
  int vary_axis = 1;   // coordinate stepped across points
  std::vector<double> x;         // varied coordinate values
  std::vector<double> boundary;  // largest stable swept value
  std::vector<bool> flagged;     // solver trouble at this point
  TraceMethod method = TraceMethod::kAnalyticSigma;
  std::string ic_label;
};

struct TraceOptions {
  double step = 0.1e6;        // sweep granularity, bits/second
  double sweep_max = 12e6;    // give up beyond this rate
  int refine_levels = 4;      // bisection levels between the bracketing grid points
};

// Verdict of a stability probe at one arrival vector: `stable` is meaningful
// only when the probe is trustworthy (`ok`).
struct ProbeResult {
  bool stable = false;
  bool ok = true;
};

using StabilityProbe = std::function<ProbeResult(const ArrivalVector&)>;

namespace detail {

struct Crossing {
  double boundary = 0;
  bool flagged = false;
};

// Step the swept coordinate upward until the first unstable point, then
// sharpen the bracket by bisection. Probe failures mark the point flagged.
inline Crossing locate_crossing(ArrivalVector lambda, int sweep_axis, const StabilityProbe& probe,
                                const TraceOptions& opts, bool refine) {
  Crossing out;
  double last_stable = 0.0;
  double first_unstable = -1.0;
  for (double v = opts.step; v <= opts.sweep_max + 1e-9; v += opts.step) {
    lambda[sweep_axis] = v;
    const ProbeResult r = probe(lambda);
    if (!r.ok) out.flagged = true;
    if (r.ok && r.stable) {
      last_stable = v;
    } else {
      first_unstable = v;
      break;
    }
  }
  if (first_unstable < 0.0) {
    out.boundary = last_stable;  // never crossed inside the sweep window
    out.flagged = true;
    return out;
  }
  double lo = last_stable, hi = first_unstable;
  if (refine) {
    for (int level = 0; level < opts.refine_levels; ++level) {
      const double mid = 0.5 * (lo + hi);
      lambda[sweep_axis] = mid;
      const ProbeResult r = probe(lambda);
      if (!r.ok) {
        out.flagged = true;
        break;
      }
      (r.stable ? lo : hi) = mid;
    }
  }
  out.boundary = lo;
  return out;
}

}  // namespace detail

// Trace the analytic stability boundary: for each value of the varied
// coordinate, locate the largest stable swept coordinate under the probe.
inline BoundaryTrace trace_analytic(const ArrivalVector& base, int sweep_axis, int vary_axis,
                                    const std::vector<double>& vary_values,
                                    const StabilityProbe& probe, const TraceOptions& opts,
                                    TraceMethod method, std::string ic_label = {}) {
  if (!(opts.step > 0)) throw std::invalid_argument("trace_analytic: step must be > 0");
  BoundaryTrace trace;
  trace.sweep_axis = sweep_axis;
  trace.vary_axis = vary_axis;
  trace.method = method;
  trace.ic_label = std::move(ic_label);
  trace.x = vary_values;
  trace.boundary.resize(vary_values.size());
  trace.flagged.resize(vary_values.size());
  std::vector<detail::Crossing> crossings(vary_values.size());
  parallel_for(vary_values.size(), [&](std::size_t idx) {
    ArrivalVector lambda = base;
    lambda[vary_axis] = vary_values[idx];
    crossings[idx] = detail::locate_crossing(lambda, sweep_axis, probe, opts, true);
  });
  for (std::size_t idx = 0; idx < vary_values.size(); ++idx) {
    trace.boundary[idx] = crossings[idx].boundary;
    trace.flagged[idx] = crossings[idx].flagged;
  }
  return trace;
}

// Stability probe backed by the full single-channel system from one IC.
inline StabilityProbe sigma_probe(const SystemParams& params, const ChannelSpec& chan,
                                  const InitialCondition& ic, const SolveOptions& opts = {}) {
  return [=](const ArrivalVector& lambda) {
    InitialCondition sized = ic;
    sized.attempt0.resize(lambda.size(), ic.attempt0.empty() ? 0.0 : ic.attempt0.front());
    sized.util0.resize(lambda.size(), ic.util0.empty() ? 0.0 : ic.util0.front());
    const SolveResult r = solve_fixed_point(lambda, sized, params, chan, opts);
    return ProbeResult{r.converged && state_is_stable(r.state), r.converged};
  };
}

// Empirical boundary: for each varied value and each replication, step the
// swept coordinate until the simulator declares instability, then average the
// per-replication crossings. No bisection; the step is the paper-style grid.
inline BoundaryTrace trace_empirical(const ArrivalVector& base, int sweep_axis, int vary_axis,
                                     const std::vector<double>& vary_values,
                                     const SimConfig& sim_template, int replications,
                                     const TraceOptions& opts) {
  if (replications < 1) throw std::invalid_argument("trace_empirical: need >= 1 replication");
  if (sim_template.nodes.size() != base.size())
    throw std::invalid_argument("trace_empirical: base/node size mismatch");
  BoundaryTrace trace;
  trace.sweep_axis = sweep_axis;
  trace.vary_axis = vary_axis;
  trace.method = TraceMethod::kEmpiricalSim;
  trace.x = vary_values;
  trace.boundary.assign(vary_values.size(), 0.0);
  trace.flagged.assign(vary_values.size(), false);

  struct Item { std::size_t idx; int rep; };
  std::vector<Item> items;
  for (std::size_t idx = 0; idx < vary_values.size(); ++idx)
    for (int rep = 0; rep < replications; ++rep) items.push_back({idx, rep});
  std::vector<double> crossings(items.size(), 0.0);
  std::vector<char> flagged(items.size(), 0);

  parallel_for(items.size(), [&](std::size_t w) {
    const auto [idx, rep] = items[w];
    SimConfig config = sim_template;
    config.seed = sim_template.seed + static_cast<std::uint64_t>(rep);
    config.sample_interval = 0.0;  // boundary runs do not need population series
    for (std::size_t i = 0; i < base.size(); ++i) config.nodes[i].arrival_rate = base[i];
    config.nodes[vary_axis].arrival_rate = vary_values[idx];
    double last_stable = 0.0;
    bool crossed = false;
    for (double v = opts.step; v <= opts.sweep_max + 1e-9; v += opts.step) {
      config.nodes[sweep_axis].arrival_rate = v;
      const SimReport report = simulate(config);
      if (classify_stability(report, config).unstable) {
        crossed = true;
        break;
      }
      last_stable = v;
    }
    crossings[w] = last_stable;
    flagged[w] = crossed ? 0 : 1;
  });

  for (std::size_t w = 0; w < items.size(); ++w) {
    trace.boundary[items[w].idx] += crossings[w] / replications;
    if (flagged[w]) trace.flagged[items[w].idx] = true;
  }
  return trace;
}

enum class TraceShape { kConvex, kConcave, kNearLinear, kMixed };

inline const char* to_string(TraceShape s) {
  switch (s) {
    case TraceShape::kConvex: return "convex";
    case TraceShape::kConcave: return "concave";
    case TraceShape::kNearLinear: return "near_linear";
    default: return "mixed";
  }
}

// Region geometry from the sign pattern of second differences of the traced
// boundary. Second differences all within the band (2% of the dynamic range)
// classify as near-linear; a concave boundary curve bounds a convex region.
inline TraceShape shape_classify(const BoundaryTrace& trace) {
  const std::size_t n = trace.boundary.size();
  if (n < 5) throw std::invalid_argument("shape_classify: need at least 5 points");
  const auto [lo, hi] = std::minmax_element(trace.boundary.begin(), trace.boundary.end());
  const double band = 0.02 * std::max(*hi - *lo, 1e-12);
  bool has_pos = false, has_neg = false;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double second = trace.boundary[i + 1] - 2.0 * trace.boundary[i] + trace.boundary[i - 1];
    if (second > band) has_pos = true;
    if (second < -band) has_neg = true;
  }
  if (!has_pos && !has_neg) return TraceShape::kNearLinear;
  if (has_neg && !has_pos) return TraceShape::kConvex;
  if (has_pos && !has_neg) return TraceShape::kConcave;
  return TraceShape::kMixed;
}

// rho of one node along a one-dimensional arrival sweep for a fixed IC;
// jumps larger than 0.05 between neighbouring grid points mark the phase
// transition between solution branches.
struct SolutionComponent {
  std::vector<double> lambda_values;
  std::vector<double> util;        // rho of the swept node
  std::vector<bool> converged;
  std::vector<bool> jump;
  std::string ic_label;
};

inline SolutionComponent sweep_solution_component(const ArrivalVector& base, int sweep_axis,
                                                  const std::vector<double>& sweep_values,
                                                  const InitialCondition& ic,
                                                  const SystemParams& params,
                                                  const ChannelSpec& chan,
                                                  const SolveOptions& opts = {}) {
  if (sweep_values.empty())
    throw std::invalid_argument("sweep_solution_component: empty sweep range");
  SolutionComponent comp;
  comp.ic_label = ic.label;
  comp.lambda_values = sweep_values;
  comp.util.resize(sweep_values.size());
  comp.converged.resize(sweep_values.size());
  comp.jump.assign(sweep_values.size(), false);
  std::vector<double> util(sweep_values.size(), 0.0);
  std::vector<char> conv(sweep_values.size(), 0);
  parallel_for(sweep_values.size(), [&](std::size_t idx) {
    ArrivalVector lambda = base;
    lambda[sweep_axis] = sweep_values[idx];
    const SolveResult r = solve_fixed_point(lambda, ic, params, chan, opts);
    util[idx] = r.state.util[sweep_axis];
    conv[idx] = r.converged ? 1 : 0;
  });
  for (std::size_t idx = 0; idx < sweep_values.size(); ++idx) {
    comp.util[idx] = util[idx];
    comp.converged[idx] = conv[idx] != 0;
    if (idx > 0 && std::abs(util[idx] - util[idx - 1]) > 0.05) comp.jump[idx] = true;
  }
  return comp;
}

}  // namespace wlanstab
