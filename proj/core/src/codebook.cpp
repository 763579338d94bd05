#include "risbeam/codebook.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "risbeam/seeding.hpp"

namespace risbeam {

namespace {

constexpr std::uint64_t kCodebookStream = fnv1a64("codebook-generation");
constexpr std::uint64_t kPathStream = fnv1a64("path-evaluation");
constexpr double kTieTolerance = 1e-9;

double euclid_cm(PolarPoint a, PolarPoint b) {
  const RisMount mount;
  return (grid_point(mount, a.angle_deg, a.distance_cm) - grid_point(mount, b.angle_deg, b.distance_cm)).norm() * 100.0;
}

// negative if a is the better match, positive if b is, 0 only for identical references
int compare_keys(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double tol = i < 2 ? kTieTolerance : 0.0;
    if (a[i] < b[i] - tol) return -1;
    if (a[i] > b[i] + tol) return 1;
  }
  return 0;
}

std::array<double, 4> match_key(const CodebookEntry& e, PolarPoint q, NearestMetric metric) {
  const double dang = std::abs(e.reference.angle_deg - q.angle_deg);
  const double dist = euclid_cm(e.reference, q);
  if (metric == NearestMetric::AngleFirst) return {dang, dist, e.reference.angle_deg, e.reference.distance_cm};
  return {dist, dang, e.reference.angle_deg, e.reference.distance_cm};
}

RisConfig run_greedy(ReceiverChain& chain, const RisLayout& layout, const CodebookSettings& settings) {
  auto meter = measure_with(chain);
  return greedy_iterative(meter, layout, make_grouping(layout, settings.group_size), settings.greedy).config;
}

}  // namespace

Codebook generate_codebook(const LinkModel& link, std::span<const PolarPoint> references,
                           const CodebookSettings& settings) {
  std::set<PolarPoint> unique(references.begin(), references.end());
  if (unique.size() != references.size()) throw std::invalid_argument("generate_codebook: duplicate reference point");

  Codebook book;
  book.metadata["seed"] = link.channel.seed;
  book.metadata["path_loss_exponent"] = link.channel.path_loss_exponent;
  book.metadata["rician_k_db"] =
      std::isfinite(link.channel.rician_k_db) ? nlohmann::ordered_json(link.channel.rician_k_db) : nlohmann::ordered_json("inf");
  book.metadata["noise_variance"] = link.channel.noise_variance;
  book.metadata["group_size"] = settings.group_size;
  book.metadata["states_per_unit"] = settings.greedy.states_per_unit;
  book.metadata["max_sweeps"] = settings.greedy.max_sweeps;

  for (const auto& ref : references) {
    try {
      auto chain = link.receiver(ref, kCodebookStream);
      book.entries.push_back({ref, run_greedy(chain, link.layout, settings)});
    } catch (const std::exception& e) {
      throw CodebookError(fmt::format("generate_codebook: failed at {} deg / {} cm: {}", ref.angle_deg,
                                      ref.distance_cm, e.what()),
                          std::move(book));
    }
  }
  return book;
}

const CodebookEntry& lookup_nearest(const Codebook& book, PolarPoint query, NearestMetric metric) {
  if (book.empty()) throw std::invalid_argument("lookup_nearest: empty codebook");
  const CodebookEntry* best = &book.entries.front();
  auto best_key = match_key(*best, query, metric);
  for (const auto& e : book.entries) {
    auto key = match_key(e, query, metric);
    if (compare_keys(key, best_key) < 0) {
      best = &e;
      best_key = key;
    }
  }
  return *best;
}

PathEvaluation evaluate_path(const Codebook& book, std::span<const PolarPoint> path, const LinkModel& link,
                             const CodebookSettings& settings, NearestMetric metric) {
  PathEvaluation eval;
  if (path.empty()) return eval;
  if (book.empty()) throw std::invalid_argument("evaluate_path: empty codebook");

  const PolarPoint* last_codeword = nullptr;
  for (const auto& point : path) {
    try {
      const auto& entry = lookup_nearest(book, point, metric);
      if (!entry.config.matches(link.layout)) throw std::invalid_argument("codeword does not match the layout");
      auto chain = link.receiver(point, kPathStream);

      PathRecord rec;
      rec.point = point;
      const Vec3 p = grid_point(link.scene.ris, point.angle_deg, point.distance_cm) - link.scene.ris.center;
      rec.x_cm = p.dot(link.scene.ris.along) * 100.0;
      rec.y_cm = p.dot(link.scene.ris.normal) * 100.0;
      rec.p_off = chain.measure(RisConfig::all_off(link.layout));
      rec.p_codebook = chain.measure(entry.config);
      const auto online = run_greedy(chain, link.layout, settings);
      rec.p_online = chain.measure(online);
      rec.codeword = entry.reference;

      if (last_codeword == nullptr || *last_codeword != entry.reference) ++eval.codeword_switches;
      last_codeword = &entry.reference;
      eval.records.push_back(rec);
    } catch (const std::exception& e) {
      throw PathEvaluationError(fmt::format("evaluate_path: failed at {} deg / {} cm: {}", point.angle_deg,
                                            point.distance_cm, e.what()),
                                std::move(eval));
    }
  }
  return eval;
}

void write_codebook_json(std::ostream& os, const Codebook& book) {
  nlohmann::ordered_json j;
  j["schema"] = "risbeam.codebook";
  j["version"] = kCodebookSchemaVersion;
  j["metadata"] = book.metadata;
  const std::size_t n = book.empty() ? 0 : book.entries.front().config.size();
  j["active_elements"] = n;
  j["bits_per_entry"] = 2 * n;
  auto entries = nlohmann::ordered_json::array();
  for (const auto& e : book.entries) {
    nlohmann::ordered_json je;
    je["angle_deg"] = e.reference.angle_deg;
    je["distance_cm"] = e.reference.distance_cm;
    je["bits"] = bits_to_json(e.config);
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);
  os << j.dump(2) << '\n';
}

Codebook read_codebook_json(std::istream& is) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("read_codebook_json: malformed JSON: ") + e.what());
  }
  if (j.value("schema", "") != "risbeam.codebook") throw std::invalid_argument("read_codebook_json: wrong schema");
  if (j.value("version", 0) != kCodebookSchemaVersion)
    throw std::invalid_argument("read_codebook_json: unsupported schema version");

  Codebook book;
  book.metadata = j.value("metadata", nlohmann::ordered_json::object());
  std::set<PolarPoint> seen;
  for (const auto& je : j.at("entries")) {
    CodebookEntry e{{je.at("angle_deg").get<double>(), je.at("distance_cm").get<double>()},
                    config_from_json(je.at("bits"))};
    if (!seen.insert(e.reference).second) throw std::invalid_argument("read_codebook_json: duplicate reference point");
    if (!book.empty() && e.config.size() != book.entries.front().config.size())
      throw std::invalid_argument("read_codebook_json: inconsistent entry sizes");
    book.entries.push_back(std::move(e));
  }
  return book;
}

void write_path_csv(std::ostream& os, const PathEvaluation& eval, bool with_header) {
  if (with_header) os << "x_cm,y_cm,angle_deg,distance_cm,p_off,p_codebook,p_online,codeword_angle\n";
  for (const auto& r : eval.records)
    os << fmt::format("{:.3f},{:.3f},{:g},{:g},{:.6f},{:.6f},{:.6f},{:g}\n", r.x_cm, r.y_cm, r.point.angle_deg,
                      r.point.distance_cm, r.p_off, r.p_codebook, r.p_online, r.codeword.angle_deg);
}

}  // namespace risbeam
