#pragma once

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "risbeam/link.hpp"
#include "risbeam/optimizer.hpp"

namespace risbeam {

inline constexpr int kCodebookSchemaVersion = 1;

struct CodebookEntry {
  PolarPoint reference;
  RisConfig config;
};

struct Codebook {
  std::vector<CodebookEntry> entries;
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
};

struct CodebookSettings {
  int group_size = 1;
  GreedyOptions greedy;
};

class CodebookError : public std::runtime_error {
 public:
  CodebookError(const std::string& what, Codebook partial) : std::runtime_error(what), partial_(std::move(partial)) {}
  const Codebook& partial() const { return partial_; }

 private:
  Codebook partial_;
};

/// Runs the greedy optimizer once per reference point, each on the channel
/// realization for that receiver position, and stores the resulting configs.
Codebook generate_codebook(const LinkModel& link, std::span<const PolarPoint> references,
                           const CodebookSettings& settings = {});

enum class NearestMetric {
  /// Smallest angular difference; Euclidean distance breaks ties, then the smaller angle.
  AngleFirst,
  /// Smallest Euclidean distance; angular difference breaks ties, then the smaller angle.
  Euclidean,
};

const CodebookEntry& lookup_nearest(const Codebook& book, PolarPoint query,
                                    NearestMetric metric = NearestMetric::AngleFirst);

struct PathRecord {
  PolarPoint point;
  double x_cm = 0.0;
  double y_cm = 0.0;
  double p_off = 0.0;
  double p_codebook = 0.0;
  double p_online = 0.0;
  PolarPoint codeword;
};

inline constexpr double kCodewordSwitchMs = 1.0;

struct PathEvaluation {
  std::vector<PathRecord> records;
  /// Codeword changes along the path, including the first application.
  std::size_t codeword_switches = 0;

  double reconfiguration_ms(double per_switch_ms = kCodewordSwitchMs) const {
    return static_cast<double>(codeword_switches) * per_switch_ms;
  }
};

class PathEvaluationError : public std::runtime_error {
 public:
  PathEvaluationError(const std::string& what, PathEvaluation partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const PathEvaluation& partial() const { return partial_; }

 private:
  PathEvaluation partial_;
};

/// For each point, on one shared channel realization: power with all-off,
/// with the nearest codeword, and after a fresh online greedy run.
PathEvaluation evaluate_path(const Codebook& book, std::span<const PolarPoint> path, const LinkModel& link,
                             const CodebookSettings& settings = {}, NearestMetric metric = NearestMetric::AngleFirst);

void write_codebook_json(std::ostream& os, const Codebook& book);
Codebook read_codebook_json(std::istream& is);

/// CSV: x_cm,y_cm,angle_deg,distance_cm,p_off,p_codebook,p_online,codeword_angle
void write_path_csv(std::ostream& os, const PathEvaluation& eval, bool with_header = true);

}  // namespace risbeam
