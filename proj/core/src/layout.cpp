#include "risbeam/layout.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

namespace risbeam {

RisLayout::RisLayout(int nx, int ny, double spacing_m, std::vector<ElementIndex> disabled, double carrier_hz)
    : nx_(nx), ny_(ny), spacing_(spacing_m), carrier_hz_(carrier_hz), disabled_(std::move(disabled)) {
  if (nx_ < 1 || ny_ < 1) throw std::invalid_argument("RisLayout: grid dimensions must be positive");
  if (!(spacing_ > 0.0)) throw std::invalid_argument("RisLayout: spacing must be > 0");
  if (!(carrier_hz_ > 0.0)) throw std::invalid_argument("RisLayout: carrier frequency must be > 0");

  std::set<ElementIndex> seen;
  for (const auto& e : disabled_) {
    if (e.row < 0 || e.row >= ny_ || e.col < 0 || e.col >= nx_)
      throw std::invalid_argument("RisLayout: disabled cell (" + std::to_string(e.row) + "," +
                                  std::to_string(e.col) + ") outside the grid");
    if (!seen.insert(e).second)
      throw std::invalid_argument("RisLayout: duplicate disabled cell (" + std::to_string(e.row) + "," +
                                  std::to_string(e.col) + ")");
  }
  std::sort(disabled_.begin(), disabled_.end());

  lookup_.assign(static_cast<std::size_t>(nx_) * ny_, -1);
  for (int r = 0; r < ny_; ++r) {
    for (int c = 0; c < nx_; ++c) {
      if (seen.contains({r, c})) continue;
      lookup_[static_cast<std::size_t>(r) * nx_ + c] = static_cast<int>(active_.size());
      active_.push_back({r, c});
    }
  }
  if (active_.empty()) throw std::invalid_argument("RisLayout: no active elements");
}

RisLayout RisLayout::standard() {
  return RisLayout(10, 8, kSpeedOfLight / kDefaultCarrierHz / 2.0, top_right_block(10, 8, 2), kDefaultCarrierHz);
}

std::vector<ElementIndex> RisLayout::top_right_block(int nx, int ny, int block) {
  std::vector<ElementIndex> out;
  for (int r = 0; r < std::min(block, ny); ++r)
    for (int c = std::max(0, nx - block); c < nx; ++c) out.push_back({r, c});
  return out;
}

std::optional<std::size_t> RisLayout::index_of(ElementIndex e) const {
  if (e.row < 0 || e.row >= ny_ || e.col < 0 || e.col >= nx_) return std::nullopt;
  const int v = lookup_[static_cast<std::size_t>(e.row) * nx_ + e.col];
  if (v < 0) return std::nullopt;
  return static_cast<std::size_t>(v);
}

std::pair<double, double> RisLayout::local_offset(std::size_t n) const {
  const auto& e = active_.at(n);
  const double x = (e.col - (nx_ - 1) / 2.0) * spacing_;
  const double z = ((ny_ - 1) / 2.0 - e.row) * spacing_;
  return {x, z};
}

std::vector<ElementIndex> active_elements(const RisLayout& layout) { return layout.active_elements(); }

RisConfig::RisConfig(std::vector<ElementState> states) : states_(std::move(states)) {
  for (auto s : states_)
    if (s >= kStatesPerElement) throw std::invalid_argument("RisConfig: state out of range {0,1,2,3}");
}

void RisConfig::set(std::size_t n, ElementState s) {
  if (s >= kStatesPerElement) throw std::invalid_argument("RisConfig: state out of range {0,1,2,3}");
  states_.at(n) = s;
}

void RisConfig::set_all(std::span<const std::size_t> elements, ElementState s) {
  for (auto n : elements) set(n, s);
}

std::vector<std::complex<double>> theta_diag(const RisConfig& config, Polarization pol, double amplitude) {
  std::vector<std::complex<double>> out(config.size());
  for (std::size_t n = 0; n < config.size(); ++n) {
    const bool flip = pol == Polarization::H ? h_flipped(config[n]) : v_flipped(config[n]);
    out[n] = flip ? -amplitude : amplitude;
  }
  return out;
}

std::vector<bool> to_bit_array(const RisConfig& config) {
  const std::size_t n = config.size();
  std::vector<bool> bits(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    bits[i] = h_flipped(config[i]);
    bits[n + i] = v_flipped(config[i]);
  }
  return bits;
}

RisConfig from_bit_array(const std::vector<bool>& bits) {
  if (bits.size() % 2 != 0) throw std::invalid_argument("from_bit_array: bit array length must be even");
  const std::size_t n = bits.size() / 2;
  std::vector<ElementState> states(n);
  for (std::size_t i = 0; i < n; ++i) states[i] = make_state(bits[i], bits[n + i]);
  return RisConfig(std::move(states));
}

nlohmann::json bits_to_json(const RisConfig& config) {
  auto arr = nlohmann::json::array();
  for (bool b : to_bit_array(config)) arr.push_back(b);
  return arr;
}

RisConfig config_from_json(const nlohmann::json& bits) {
  if (!bits.is_array()) throw std::invalid_argument("config_from_json: expected a boolean array");
  std::vector<bool> v;
  v.reserve(bits.size());
  for (const auto& b : bits) {
    if (!b.is_boolean()) throw std::invalid_argument("config_from_json: non-boolean entry");
    v.push_back(b.get<bool>());
  }
  return from_bit_array(v);
}

std::pair<int, int> tile_shape(int group_size) {
  switch (group_size) {
    case 1: return {1, 1};
    case 2: return {1, 2};
    case 4: return {2, 2};
    case 8: return {2, 4};
    default: throw std::invalid_argument("make_grouping: group size must be one of 1, 2, 4, 8");
  }
}

GroupingScheme make_grouping(const RisLayout& layout, int group_size) {
  const auto [tile_cols, tile_rows] = tile_shape(group_size);
  GroupingScheme scheme;
  scheme.group_size = group_size;
  for (int r0 = 0; r0 < layout.ny(); r0 += tile_rows) {
    for (int c0 = 0; c0 < layout.nx(); c0 += tile_cols) {
      std::vector<std::size_t> members;
      for (int r = r0; r < std::min(r0 + tile_rows, layout.ny()); ++r)
        for (int c = c0; c < std::min(c0 + tile_cols, layout.nx()); ++c)
          if (auto idx = layout.index_of({r, c})) members.push_back(*idx);
      if (!members.empty()) {
        std::sort(members.begin(), members.end());
        scheme.groups.push_back(std::move(members));
      }
    }
  }
  return scheme;
}

}  // namespace risbeam
