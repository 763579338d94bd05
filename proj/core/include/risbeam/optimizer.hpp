#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "risbeam/channel.hpp"
#include "risbeam/layout.hpp"

namespace risbeam {

/// A received-power meter: configuration in, dBFS out. Every call is one
/// measurement and is counted.
class MeasureFn {
 public:
  using Fn = std::function<double(const RisConfig&)>;

  explicit MeasureFn(Fn fn) : fn_(std::move(fn)) {}

  double operator()(const RisConfig& config) {
    ++calls_;
    return fn_(config);
  }
  std::size_t calls() const { return calls_; }

 private:
  Fn fn_;
  std::size_t calls_ = 0;
};

/// Meter backed by the full receiver chain. The chain must outlive the meter.
/// A capture that quantizes to all zeros reads as -inf dBFS.
MeasureFn measure_with(ReceiverChain& chain);

/// Noiseless meter: 10 log10 of the end-to-end gain, no tone or ADC.
MeasureFn exact_gain_measure(ChannelRealization chan, double amplitude);

struct TraceEntry {
  std::size_t measurement_index = 0;
  long group_index = -1;     // -1 when the row is not tied to a group
  int candidate_state = -1;  // -1 when not tied to a single candidate
  double p_r = 0.0;
  double p_max = 0.0;
};

struct PowerTrace {
  std::vector<TraceEntry> entries;
  RisConfig final_config;

  std::size_t size() const { return entries.size(); }
  bool running_max_nondecreasing() const;
  double final_max() const;
};

struct OptimizerResult {
  RisConfig config;
  PowerTrace trace;
};

/// Measurement failure during a run; carries the trace recorded so far.
class OptimizerError : public std::runtime_error {
 public:
  OptimizerError(const std::string& what, PowerTrace partial) : std::runtime_error(what), partial_(std::move(partial)) {}
  const PowerTrace& partial() const { return partial_; }

 private:
  PowerTrace partial_;
};

/// Enumeration budget over the cap; reports how many measurements would be needed.
class BudgetExceeded : public std::invalid_argument {
 public:
  BudgetExceeded(const std::string& what, double required) : std::invalid_argument(what), required_(required) {}
  double required() const { return required_; }

 private:
  double required_;
};

struct GreedyOptions {
  /// Candidate states per group, 4 for both diodes or 2 for H only.
  int states_per_unit = kStatesPerElement;
  /// Group visit order; empty means row-major (group index order).
  std::vector<std::size_t> visit_order;
  /// 1 reproduces the single sweep. Larger values re-sweep until nothing changes.
  int max_sweeps = 1;
};

/// Iterative phase adjustment. Starts from all-off; for each group, applies
/// every candidate state to the whole group, measures, and keeps the state
/// that raised the running maximum (strictly), otherwise the group's previous
/// state. Uses exactly groups * states_per_unit measurements per sweep.
OptimizerResult greedy_iterative(MeasureFn& measure, const RisLayout& layout, const GroupingScheme& grouping,
                                 const GreedyOptions& options = {});

inline constexpr std::uint64_t kDefaultExhaustiveCap = std::uint64_t{1} << 20;

/// Every configuration over the first `states_per_unit` states, in
/// lexicographic order. Ties keep the lexicographically smallest.
OptimizerResult exhaustive_search(MeasureFn& measure, const RisLayout& layout, int states_per_unit,
                                  std::uint64_t cap = kDefaultExhaustiveCap);

/// oracle - greedy, in dB.
inline double greedy_gap(double oracle_db, double greedy_db) { return oracle_db - greedy_db; }

/// CSV: measurement_index,group_index,candidate_state,p_r_dbfs,p_max_dbfs
void write_trace_csv(std::ostream& os, const PowerTrace& trace, bool with_header = true);

}  // namespace risbeam
