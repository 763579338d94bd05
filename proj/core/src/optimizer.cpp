#include "risbeam/optimizer.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

namespace risbeam {

namespace {

void check_grouping(const RisLayout& layout, const GroupingScheme& grouping) {
  std::vector<char> seen(layout.active_count(), 0);
  std::size_t total = 0;
  for (const auto& g : grouping.groups) {
    if (g.empty()) throw std::invalid_argument("greedy_iterative: empty group");
    for (auto n : g) {
      if (n >= seen.size()) throw std::invalid_argument("greedy_iterative: group member outside the layout");
      if (seen[n]++) throw std::invalid_argument("greedy_iterative: groups overlap");
      ++total;
    }
  }
  if (total != layout.active_count()) throw std::invalid_argument("greedy_iterative: groups do not cover the layout");
}

std::vector<std::size_t> resolve_order(const GroupingScheme& grouping, const std::vector<std::size_t>& requested) {
  const std::size_t n = grouping.count();
  if (requested.empty()) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    return order;
  }
  if (requested.size() != n) throw std::invalid_argument("greedy_iterative: visit order must list every group once");
  std::vector<char> seen(n, 0);
  for (auto g : requested) {
    if (g >= n || seen[g]++) throw std::invalid_argument("greedy_iterative: visit order is not a permutation");
  }
  return requested;
}

double checked_measure(MeasureFn& measure, const RisConfig& config, PowerTrace& trace) {
  try {
    return measure(config);
  } catch (const std::exception& e) {
    trace.final_config = config;
    throw OptimizerError(std::string("measurement failed: ") + e.what(), std::move(trace));
  }
}

}  // namespace

MeasureFn measure_with(ReceiverChain& chain) {
  return MeasureFn([&chain](const RisConfig& c) {
    try {
      return chain.measure(c);
    } catch (const MeasurementFloorError&) {
      // an empty capture is the weakest possible reading; it can never become the running maximum
      return -std::numeric_limits<double>::infinity();
    }
  });
}

MeasureFn exact_gain_measure(ChannelRealization chan, double amplitude) {
  return MeasureFn([chan = std::move(chan), amplitude](const RisConfig& c) {
    return 10.0 * std::log10(end_to_end_gain(c, chan, amplitude));
  });
}

bool PowerTrace::running_max_nondecreasing() const {
  for (std::size_t i = 1; i < entries.size(); ++i)
    if (entries[i].p_max < entries[i - 1].p_max) return false;
  return true;
}

double PowerTrace::final_max() const {
  return entries.empty() ? -std::numeric_limits<double>::infinity() : entries.back().p_max;
}

OptimizerResult greedy_iterative(MeasureFn& measure, const RisLayout& layout, const GroupingScheme& grouping,
                                 const GreedyOptions& options) {
  if (options.states_per_unit < 1 || options.states_per_unit > kStatesPerElement)
    throw std::invalid_argument("greedy_iterative: states per unit must lie in [1, 4]");
  if (options.max_sweeps < 1) throw std::invalid_argument("greedy_iterative: max_sweeps must be >= 1");
  check_grouping(layout, grouping);
  const auto order = resolve_order(grouping, options.visit_order);

  RisConfig config = RisConfig::all_off(layout);
  PowerTrace trace;
  trace.entries.reserve(grouping.count() * static_cast<std::size_t>(options.states_per_unit) *
                        static_cast<std::size_t>(options.max_sweeps));
  // -inf so the first measurement always registers, whatever the dBFS sign
  double p_max = -std::numeric_limits<double>::infinity();

  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    bool changed = false;
    for (auto g : order) {
      const auto& members = grouping.groups[g];
      const ElementState previous = config[members.front()];
      ElementState best = previous;
      for (int j = 0; j < options.states_per_unit; ++j) {
        const auto state = static_cast<ElementState>(j);
        config.set_all(members, state);
        const double p = checked_measure(measure, config, trace);
        if (p > p_max) {
          p_max = p;
          best = state;
        }
        trace.entries.push_back({trace.entries.size(), static_cast<long>(g), j, p, p_max});
      }
      config.set_all(members, best);
      changed = changed || best != previous;
    }
    if (!changed) break;
  }

  trace.final_config = config;
  return {std::move(config), std::move(trace)};
}

OptimizerResult exhaustive_search(MeasureFn& measure, const RisLayout& layout, int states_per_unit,
                                  std::uint64_t cap) {
  if (states_per_unit < 1 || states_per_unit > kStatesPerElement)
    throw std::invalid_argument("exhaustive_search: states per unit must lie in [1, 4]");
  const std::size_t n = layout.active_count();
  const double required = std::pow(static_cast<double>(states_per_unit), static_cast<double>(n));
  if (required > static_cast<double>(cap))
    throw BudgetExceeded(fmt::format("exhaustive_search: {}^{} = {:.6g} configurations exceed the cap of {}",
                                     states_per_unit, n, required, cap),
                         required);
  const auto total = static_cast<std::uint64_t>(std::llround(required));

  std::vector<ElementState> digits(n, 0);
  RisConfig config(n);
  RisConfig best_config = config;
  PowerTrace trace;
  trace.entries.reserve(total);
  double p_max = -std::numeric_limits<double>::infinity();

  for (std::uint64_t count = 0; count < total; ++count) {
    const double p = checked_measure(measure, config, trace);
    if (p > p_max) {
      p_max = p;
      best_config = config;
    }
    trace.entries.push_back({trace.entries.size(), -1, -1, p, p_max});

    // odometer, last element fastest, so visiting order is lexicographic
    for (std::size_t i = n; i-- > 0;) {
      if (++digits[i] < states_per_unit) {
        config.set(i, digits[i]);
        break;
      }
      digits[i] = 0;
      config.set(i, 0);
    }
  }

  trace.final_config = best_config;
  return {std::move(best_config), std::move(trace)};
}

void write_trace_csv(std::ostream& os, const PowerTrace& trace, bool with_header) {
  if (with_header) os << "measurement_index,group_index,candidate_state,p_r_dbfs,p_max_dbfs\n";
  for (const auto& e : trace.entries)
    os << fmt::format("{},{},{},{:.6f},{:.6f}\n", e.measurement_index, e.group_index, e.candidate_state, e.p_r, e.p_max);
}

}  // namespace risbeam
