#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <random>
#include <set>
#include <string_view>

#include <fmt/format.h>

#include "risbeam/experiments.hpp"
#include "risbeam/seeding.hpp"

namespace risbeam {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void check_keys(const json& obj, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(fmt::format("config: '{}' must be an object", section));
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(fmt::format("config: unknown key '{}' in '{}'", key, section));
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config: bad value for '{}': {}", key, e.what()));
  }
}

double k_factor_from_json(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ConfigError("config: rician_k_db must be a number, \"inf\" or \"-inf\"");
  }
  return v.get<double>();
}

ojson k_factor_to_json(double k) {
  if (std::isinf(k)) return k > 0 ? "inf" : "-inf";
  return k;
}

ScenarioPoint point_from_json(const json& v) {
  if (v.is_array()) {
    if (v.size() != 2) throw ConfigError("config: point arrays must be [angle_deg, distance_cm]");
    return {{v[0].get<double>(), v[1].get<double>()}, false};
  }
  check_keys(v, "point", {"angle_deg", "distance_cm", "interior"});
  if (!v.contains("angle_deg") || !v.contains("distance_cm"))
    throw ConfigError("config: point needs angle_deg and distance_cm");
  return {{v.at("angle_deg").get<double>(), v.at("distance_cm").get<double>()}, get_or(v, "interior", false)};
}

ojson point_to_json(const ScenarioPoint& p) {
  ojson j;
  j["angle_deg"] = p.point.angle_deg;
  j["distance_cm"] = p.point.distance_cm;
  if (p.interior) j["interior"] = true;
  return j;
}

std::vector<ScenarioPoint> points_from_json(const json& arr) {
  if (!arr.is_array()) throw ConfigError("config: expected a list of points");
  std::vector<ScenarioPoint> out;
  for (const auto& v : arr) out.push_back(point_from_json(v));
  return out;
}

std::vector<ScenarioPoint> grid_points(std::initializer_list<std::pair<double, std::initializer_list<double>>> spec,
                                       bool interior) {
  std::vector<ScenarioPoint> out;
  for (const auto& [angle, distances] : spec)
    for (double d : distances) out.push_back({{angle, d}, interior});
  return out;
}

void check_grid_point(const MeasurementGrid& grid, const ScenarioPoint& p, std::string_view what) {
  if (!(p.point.distance_cm > 0.0))
    throw ConfigError(fmt::format("config: {} point has non-positive distance", what));
  if (!(p.point.angle_deg > 0.0 && p.point.angle_deg < 180.0))
    throw ConfigError(fmt::format("config: {} point angle must lie in (0, 180)", what));
  if (!p.interior && !grid.contains(p.point.angle_deg, p.point.distance_cm))
    throw ConfigError(fmt::format("config: {} point {}/{} is not on the grid and not marked interior", what,
                                  p.point.angle_deg, p.point.distance_cm));
}

}  // namespace

RisLayout LayoutSpec::build() const {
  const double spacing = spacing_m.value_or(kSpeedOfLight / carrier_hz / 2.0);
  auto dis = disabled.value_or(nx >= 2 && ny >= 2 ? RisLayout::top_right_block(nx, ny, 2) : std::vector<ElementIndex>{});
  return RisLayout(nx, ny, spacing, std::move(dis), carrier_hz);
}

GreedyOptions OptimizerSpec::greedy_options(const GroupingScheme& grouping, std::uint64_t seed) const {
  GreedyOptions opt;
  opt.states_per_unit = states_per_unit;
  opt.max_sweeps = max_sweeps;
  if (order == VisitOrder::Explicit) {
    opt.visit_order = explicit_order;
  } else if (order == VisitOrder::Shuffled) {
    opt.visit_order.resize(grouping.count());
    for (std::size_t i = 0; i < opt.visit_order.size(); ++i) opt.visit_order[i] = i;
    std::mt19937_64 rng(derive_seed(seed, {fnv1a64("visit-order"), static_cast<std::uint64_t>(grouping.group_size)}));
    std::shuffle(opt.visit_order.begin(), opt.visit_order.end(), rng);
  }
  return opt;
}

ScenarioConfig ScenarioConfig::standard() {
  ScenarioConfig c;
  c.sweep.points = grid_points({{50.0, {120, 170, 220}},
                                {70.0, {120, 170, 220}},
                                {110.0, {120, 170, 220}},
                                {130.0, {120, 170, 220, 270}}},
                               false);
  for (double a : MeasurementGrid::standard().angles_deg) c.codebook.references.push_back({a, 170.0});
  // Interior points within 5 degrees of a codeword angle. The 95-105 degree
  // band around the specular direction is left out: a flat surface already
  // reflects there and no codeword can beat all-off.
  c.codebook.path = grid_points({{55.0, {145, 195}},
                                 {65.0, {245}},
                                 {75.0, {245}},
                                 {85.0, {195, 145}},
                                 {115.0, {145, 195}},
                                 {125.0, {245}},
                                 {135.0, {245}},
                                 {140.0, {195, 145}}},
                                true);
  return c;
}

ScenarioConfig ScenarioConfig::from_json(const json& j) {
  check_keys(j, "root", {"version", "seed", "seeds", "parallel", "out", "experiment", "layout", "scene", "channel",
                         "tone", "adc", "optimizer", "sweep", "codebook", "grouping", "oracle"});
  const int version = get_or(j, "version", kConfigSchemaVersion);
  if (version != kConfigSchemaVersion) throw ConfigError(fmt::format("config: unsupported version {}", version));

  ScenarioConfig c = standard();
  if (!j.contains("seed")) throw ConfigError("config: 'seed' is required");
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.seeds = get_or(j, "seeds", c.seeds);
  c.parallel = get_or(j, "parallel", c.parallel);
  c.out_dir = get_or<std::string>(j, "out", c.out_dir.string());
  c.experiment = get_or<std::string>(j, "experiment", c.experiment);

  try {
    if (j.contains("layout")) {
      const auto& l = j.at("layout");
      check_keys(l, "layout", {"nx", "ny", "spacing_m", "carrier_hz", "amplitude", "disabled"});
      c.layout.nx = get_or(l, "nx", c.layout.nx);
      c.layout.ny = get_or(l, "ny", c.layout.ny);
      if (l.contains("spacing_m") && !l.at("spacing_m").is_null()) c.layout.spacing_m = l.at("spacing_m").get<double>();
      c.layout.carrier_hz = get_or(l, "carrier_hz", c.layout.carrier_hz);
      c.layout.amplitude = get_or(l, "amplitude", c.layout.amplitude);
      if (l.contains("disabled") && !l.at("disabled").is_null()) {
        std::vector<ElementIndex> dis;
        for (const auto& e : l.at("disabled")) dis.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
        c.layout.disabled = std::move(dis);
      }
    }
    if (j.contains("scene")) {
      const auto& s = j.at("scene");
      check_keys(s, "scene", {"tx", "rx", "pattern_floor_db", "grid"});
      if (s.contains("tx")) {
        const auto& t = s.at("tx");
        check_keys(t, "scene.tx", {"angle_deg", "distance_cm", "half_beamwidth_deg", "h_weight"});
        c.scene.tx.angle_deg = get_or(t, "angle_deg", c.scene.tx.angle_deg);
        c.scene.tx.distance_cm = get_or(t, "distance_cm", c.scene.tx.distance_cm);
        c.scene.tx_half_beamwidth_deg = get_or(t, "half_beamwidth_deg", c.scene.tx_half_beamwidth_deg);
        c.scene.tx_h_weight = get_or(t, "h_weight", c.scene.tx_h_weight);
      }
      if (s.contains("rx")) {
        const auto& r = s.at("rx");
        check_keys(r, "scene.rx", {"half_beamwidth_deg", "h_weight"});
        c.scene.rx_half_beamwidth_deg = get_or(r, "half_beamwidth_deg", c.scene.rx_half_beamwidth_deg);
        c.scene.rx_h_weight = get_or(r, "h_weight", c.scene.rx_h_weight);
      }
      c.scene.pattern_floor_db = get_or(s, "pattern_floor_db", c.scene.pattern_floor_db);
      if (s.contains("grid")) {
        const auto& g = s.at("grid");
        check_keys(g, "scene.grid", {"angles_deg", "distances_cm"});
        c.scene.grid = MeasurementGrid(get_or(g, "angles_deg", c.scene.grid.angles_deg),
                                       get_or(g, "distances_cm", c.scene.grid.distances_cm));
      }
    }
    if (j.contains("channel")) {
      const auto& ch = j.at("channel");
      check_keys(ch, "channel", {"path_loss_exponent", "rician_k_db", "noise_variance", "cross_pol_coupling"});
      c.channel.path_loss_exponent = get_or(ch, "path_loss_exponent", c.channel.path_loss_exponent);
      if (ch.contains("rician_k_db")) c.channel.rician_k_db = k_factor_from_json(ch.at("rician_k_db"));
      c.channel.noise_variance = get_or(ch, "noise_variance", c.channel.noise_variance);
      c.channel.cross_pol_coupling = get_or(ch, "cross_pol_coupling", c.channel.cross_pol_coupling);
    }
    if (j.contains("tone")) {
      const auto& t = j.at("tone");
      check_keys(t, "tone", {"tone_hz", "sample_rate_hz", "buffer_len", "tx_amplitude"});
      c.tone.tone_hz = get_or(t, "tone_hz", c.tone.tone_hz);
      c.tone.sample_rate_hz = get_or(t, "sample_rate_hz", c.tone.sample_rate_hz);
      c.tone.buffer_len = get_or(t, "buffer_len", c.tone.buffer_len);
      c.tone.tx_amplitude = get_or(t, "tx_amplitude", c.tone.tx_amplitude);
    }
    if (j.contains("adc")) {
      const auto& a = j.at("adc");
      check_keys(a, "adc", {"full_scale"});
      c.adc.full_scale = get_or(a, "full_scale", c.adc.full_scale);
    }
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      check_keys(o, "optimizer", {"states_per_unit", "group_size", "visit_order", "max_sweeps"});
      c.optimizer.states_per_unit = get_or(o, "states_per_unit", c.optimizer.states_per_unit);
      c.optimizer.group_size = get_or(o, "group_size", c.optimizer.group_size);
      c.optimizer.max_sweeps = get_or(o, "max_sweeps", c.optimizer.max_sweeps);
      if (o.contains("visit_order")) {
        const auto& v = o.at("visit_order");
        if (v.is_array()) {
          c.optimizer.order = VisitOrder::Explicit;
          c.optimizer.explicit_order = v.get<std::vector<std::size_t>>();
        } else if (v == "row-major") {
          c.optimizer.order = VisitOrder::RowMajor;
        } else if (v == "shuffled") {
          c.optimizer.order = VisitOrder::Shuffled;
        } else {
          throw ConfigError("config: visit_order must be \"row-major\", \"shuffled\" or a list");
        }
      }
    }
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      check_keys(s, "sweep", {"points", "order_sensitivity"});
      if (s.contains("points")) c.sweep.points = points_from_json(s.at("points"));
      c.sweep.order_sensitivity = get_or(s, "order_sensitivity", c.sweep.order_sensitivity);
    }
    if (j.contains("codebook")) {
      const auto& b = j.at("codebook");
      check_keys(b, "codebook", {"references", "path"});
      if (b.contains("references")) {
        c.codebook.references.clear();
        for (const auto& p : points_from_json(b.at("references"))) c.codebook.references.push_back(p.point);
      }
      if (b.contains("path")) c.codebook.path = points_from_json(b.at("path"));
    }
    if (j.contains("grouping")) {
      const auto& g = j.at("grouping");
      check_keys(g, "grouping", {"group_sizes", "angles_deg", "distance_cm"});
      c.grouping.group_sizes = get_or(g, "group_sizes", c.grouping.group_sizes);
      c.grouping.angles_deg = get_or(g, "angles_deg", c.grouping.angles_deg);
      c.grouping.distance_cm = get_or(g, "distance_cm", c.grouping.distance_cm);
    }
    if (j.contains("oracle")) {
      const auto& o = j.at("oracle");
      check_keys(o, "oracle", {"nx", "ny", "states_per_unit", "instances", "channel", "cap"});
      c.oracle.nx = get_or(o, "nx", c.oracle.nx);
      c.oracle.ny = get_or(o, "ny", c.oracle.ny);
      c.oracle.states_per_unit = get_or(o, "states_per_unit", c.oracle.states_per_unit);
      c.oracle.instances = get_or(o, "instances", c.oracle.instances);
      c.oracle.cap = get_or(o, "cap", c.oracle.cap);
      const auto kind = get_or<std::string>(o, "channel", "random");
      if (kind == "random") c.oracle.channel = OracleChannel::Random;
      else if (kind == "rank-one") c.oracle.channel = OracleChannel::RankOne;
      else throw ConfigError("config: oracle.channel must be \"random\" or \"rank-one\"");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ScenarioConfig ScenarioConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  return from_json(j);
}

ojson ScenarioConfig::to_json() const {
  ojson j;
  j["version"] = kConfigSchemaVersion;
  j["seed"] = seed;
  j["seeds"] = seeds;
  if (!experiment.empty()) j["experiment"] = experiment;

  ojson l;
  l["nx"] = layout.nx;
  l["ny"] = layout.ny;
  l["spacing_m"] = layout.spacing_m ? ojson(*layout.spacing_m) : ojson(nullptr);
  l["carrier_hz"] = layout.carrier_hz;
  l["amplitude"] = layout.amplitude;
  if (layout.disabled) {
    auto arr = ojson::array();
    for (const auto& e : *layout.disabled) arr.push_back({e.row, e.col});
    l["disabled"] = std::move(arr);
  } else {
    l["disabled"] = nullptr;
  }
  j["layout"] = std::move(l);

  ojson s;
  s["tx"] = {{"angle_deg", scene.tx.angle_deg},
             {"distance_cm", scene.tx.distance_cm},
             {"half_beamwidth_deg", scene.tx_half_beamwidth_deg},
             {"h_weight", scene.tx_h_weight}};
  s["rx"] = {{"half_beamwidth_deg", scene.rx_half_beamwidth_deg}, {"h_weight", scene.rx_h_weight}};
  s["pattern_floor_db"] = scene.pattern_floor_db;
  s["grid"] = {{"angles_deg", scene.grid.angles_deg}, {"distances_cm", scene.grid.distances_cm}};
  j["scene"] = std::move(s);

  j["channel"] = {{"path_loss_exponent", channel.path_loss_exponent},
                  {"rician_k_db", k_factor_to_json(channel.rician_k_db)},
                  {"noise_variance", channel.noise_variance},
                  {"cross_pol_coupling", channel.cross_pol_coupling}};
  j["tone"] = {{"tone_hz", tone.tone_hz},
               {"sample_rate_hz", tone.sample_rate_hz},
               {"buffer_len", tone.buffer_len},
               {"tx_amplitude", tone.tx_amplitude}};
  j["adc"] = {{"full_scale", adc.full_scale}};

  ojson o;
  o["states_per_unit"] = optimizer.states_per_unit;
  o["group_size"] = optimizer.group_size;
  switch (optimizer.order) {
    case VisitOrder::RowMajor: o["visit_order"] = "row-major"; break;
    case VisitOrder::Shuffled: o["visit_order"] = "shuffled"; break;
    case VisitOrder::Explicit: o["visit_order"] = optimizer.explicit_order; break;
  }
  o["max_sweeps"] = optimizer.max_sweeps;
  j["optimizer"] = std::move(o);

  auto pts = ojson::array();
  for (const auto& p : sweep.points) pts.push_back(point_to_json(p));
  j["sweep"] = {{"points", std::move(pts)}, {"order_sensitivity", sweep.order_sensitivity}};

  auto refs = ojson::array();
  for (const auto& p : codebook.references) refs.push_back(point_to_json({p, false}));
  auto path = ojson::array();
  for (const auto& p : codebook.path) path.push_back(point_to_json(p));
  j["codebook"] = {{"references", std::move(refs)}, {"path", std::move(path)}};

  j["grouping"] = {{"group_sizes", grouping.group_sizes},
                   {"angles_deg", grouping.angles_deg},
                   {"distance_cm", grouping.distance_cm}};
  j["oracle"] = {{"nx", oracle.nx},
                 {"ny", oracle.ny},
                 {"states_per_unit", oracle.states_per_unit},
                 {"instances", oracle.instances},
                 {"channel", oracle.channel == OracleChannel::Random ? "random" : "rank-one"},
                 {"cap", oracle.cap}};
  return j;
}

std::uint64_t ScenarioConfig::hash() const { return fnv1a64(to_json().dump()); }

std::string ScenarioConfig::header_line() const {
  return fmt::format("risbeam config_hash={:016x} seed={} seeds={}", hash(), seed, seeds);
}

void ScenarioConfig::validate() const {
  if (seeds < 1) throw ConfigError("config: seeds must be >= 1");
  if (parallel < 1) throw ConfigError("config: parallel must be >= 1");
  if (!experiment.empty() && experiment != "sweep" && experiment != "codebook" && experiment != "grouping" &&
      experiment != "oracle-check")
    throw ConfigError("config: unknown experiment '" + experiment + "'");
  try {
    const auto l = layout.build();
    if (!(layout.amplitude > 0.0 && layout.amplitude <= 1.0)) throw ConfigError("config: amplitude must lie in (0, 1]");
    channel.validate();
    tone.validate();
    if (!(adc.full_scale > 0.0)) throw ConfigError("config: adc.full_scale must be positive");
    if (optimizer.states_per_unit < 1 || optimizer.states_per_unit > kStatesPerElement)
      throw ConfigError("config: states_per_unit must lie in [1, 4]");
    if (optimizer.max_sweeps < 1) throw ConfigError("config: max_sweeps must be >= 1");
    const auto grouping_scheme = make_grouping(l, optimizer.group_size);
    if (optimizer.order == VisitOrder::Explicit && optimizer.explicit_order.size() != grouping_scheme.count())
      throw ConfigError("config: explicit visit order must list every group");
    // builds and checks the transmitter placement
    (void)link(seed);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  std::set<PolarPoint> refs;
  for (const auto& r : codebook.references) {
    check_grid_point(scene.grid, {r, false}, "codebook reference");
    if (!refs.insert(r).second) throw ConfigError("config: duplicate codebook reference");
  }
  for (const auto& p : codebook.path) check_grid_point(scene.grid, p, "path");
  for (int g : grouping.group_sizes)
    if (g != 1 && g != 2 && g != 4 && g != 8) throw ConfigError("config: group sizes must be drawn from {1, 2, 4, 8}");
  for (double a : grouping.angles_deg) check_grid_point(scene.grid, {{a, grouping.distance_cm}, false}, "grouping");
  if (oracle.nx < 1 || oracle.ny < 1 || oracle.instances < 0)
    throw ConfigError("config: oracle layout and instance count must be positive");
  if (oracle.states_per_unit < 1 || oracle.states_per_unit > kStatesPerElement)
    throw ConfigError("config: oracle.states_per_unit must lie in [1, 4]");
}

LinkModel ScenarioConfig::link(std::uint64_t run_seed) const {
  RisMount mount;
  auto tx = Terminal::aimed_at(grid_point(mount, scene.tx.angle_deg, scene.tx.distance_cm), mount.center,
                               scene.tx_half_beamwidth_deg, scene.tx_h_weight);
  tx.floor_db = scene.pattern_floor_db;
  auto rx = Terminal::aimed_at(grid_point(mount, 90.0, 100.0), mount.center, scene.rx_half_beamwidth_deg,
                               scene.rx_h_weight);
  rx.floor_db = scene.pattern_floor_db;
  auto ch = channel;
  ch.seed = run_seed;
  return LinkModel{Scene(mount, tx, rx, scene.grid), layout.build(), ch, tone, adc, layout.amplitude};
}

std::vector<std::uint64_t> ScenarioConfig::seed_list() const {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < seeds; ++i) out.push_back(seed + static_cast<std::uint64_t>(i));
  return out;
}

}  // namespace risbeam
