#pragma once

#include <compare>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace risbeam {

/// Grid coordinate of a surface element. Row 0 is the top row, column 0 the
/// leftmost column (seen from the reflective side).
struct ElementIndex {
  int row = 0;
  int col = 0;
  auto operator<=>(const ElementIndex&) const = default;
};

enum class Polarization { H, V };

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kDefaultCarrierHz = 5.2e9;
inline constexpr double kDefaultElementAmplitude = 0.9;

/// Physical layout of a binary-phase surface: an nx-by-ny grid (nx columns
/// along the surface, ny rows) with some cells reserved for the controller.
class RisLayout {
 public:
  RisLayout(int nx, int ny, double spacing_m, std::vector<ElementIndex> disabled,
            double carrier_hz = kDefaultCarrierHz);

  /// 10 x 8 grid at 5.2 GHz, half-wavelength pitch, top-right 2 x 2 block
  /// reserved for the controller: 76 active elements.
  static RisLayout standard();

  /// Disabled cells for a corner block of the given size at the top-right.
  static std::vector<ElementIndex> top_right_block(int nx, int ny, int block);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double spacing() const { return spacing_; }
  double carrier_hz() const { return carrier_hz_; }
  double wavelength() const { return kSpeedOfLight / carrier_hz_; }
  const std::vector<ElementIndex>& disabled() const { return disabled_; }

  std::size_t active_count() const { return active_.size(); }
  const std::vector<ElementIndex>& active_elements() const { return active_; }
  std::optional<std::size_t> index_of(ElementIndex e) const;

  /// In-plane offset of active element n from the array center, in meters:
  /// first = along the rows (column direction), second = up.
  std::pair<double, double> local_offset(std::size_t n) const;

  bool operator==(const RisLayout&) const = default;

 private:
  int nx_;
  int ny_;
  double spacing_;
  double carrier_hz_;
  std::vector<ElementIndex> disabled_;
  std::vector<ElementIndex> active_;
  std::vector<int> lookup_;  // row-major cell -> active index, -1 if disabled
};

/// Row-major over the grid, skipping disabled cells.
std::vector<ElementIndex> active_elements(const RisLayout& layout);

/// Per-element state in {0,1,2,3}. Bit 0 flips the H polarization diode to
/// 180 degrees, bit 1 flips the V diode.
using ElementState = std::uint8_t;
inline constexpr int kStatesPerElement = 4;

constexpr bool h_flipped(ElementState s) { return (s & 1u) != 0; }
constexpr bool v_flipped(ElementState s) { return (s & 2u) != 0; }
constexpr ElementState make_state(bool h_flip, bool v_flip) {
  return static_cast<ElementState>((h_flip ? 1u : 0u) | (v_flip ? 2u : 0u));
}

class RisConfig {
 public:
  RisConfig() = default;
  /// All elements in the no-phase-shift state.
  explicit RisConfig(std::size_t n) : states_(n, 0) {}
  explicit RisConfig(std::vector<ElementState> states);

  static RisConfig all_off(const RisLayout& layout) { return RisConfig(layout.active_count()); }

  std::size_t size() const { return states_.size(); }
  ElementState operator[](std::size_t n) const { return states_[n]; }
  std::span<const ElementState> states() const { return states_; }

  void set(std::size_t n, ElementState s);
  void set_all(std::span<const std::size_t> elements, ElementState s);

  bool matches(const RisLayout& layout) const { return states_.size() == layout.active_count(); }

  auto operator<=>(const RisConfig&) const = default;

 private:
  std::vector<ElementState> states_;
};

/// Diagonal of the reflection matrix for one polarization: amplitude * exp(j phi_n),
/// which is +/- amplitude for binary phases.
std::vector<std::complex<double>> theta_diag(const RisConfig& config, Polarization pol, double amplitude);

/// Controller bit array: all H bits in element order, then all V bits.
/// false = no phase shift, true = 180 degrees.
std::vector<bool> to_bit_array(const RisConfig& config);
RisConfig from_bit_array(const std::vector<bool>& bits);

nlohmann::json bits_to_json(const RisConfig& config);
RisConfig config_from_json(const nlohmann::json& bits);

/// Partition of active elements into rectangular tiles that share a state
/// during optimization.
struct GroupingScheme {
  int group_size = 1;
  std::vector<std::vector<std::size_t>> groups;

  std::size_t count() const { return groups.size(); }
};

/// Tile footprint in (columns, rows): 1 -> 1x1, 2 -> 1x2, 4 -> 2x2, 8 -> 2x4.
std::pair<int, int> tile_shape(int group_size);

/// Tiles laid out row-major from the top-left corner. Tiles that overlap
/// disabled cells keep only their active members; empty tiles are dropped.
GroupingScheme make_grouping(const RisLayout& layout, int group_size);

}  // namespace risbeam
