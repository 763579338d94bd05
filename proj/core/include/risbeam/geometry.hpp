#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "risbeam/layout.hpp"

namespace risbeam {

using Vec3 = Eigen::Vector3d;

inline constexpr double kDefaultHalfBeamwidthDeg = 40.0;
inline constexpr double kDefaultPatternFloorDb = -30.0;

/// Directional antenna with a cos^q main lobe: unit gain on boresight, -3 dB
/// at the half beamwidth, floored at `floor_db`.
struct Terminal {
  Vec3 position = Vec3::Zero();
  Vec3 boresight = Vec3::UnitX();
  double half_beamwidth_deg = kDefaultHalfBeamwidthDeg;
  /// Fraction of power on the H polarization; 1 = pure H, 0 = pure V.
  double h_weight = 0.5;
  double floor_db = kDefaultPatternFloorDb;

  Terminal() = default;
  Terminal(Vec3 position, Vec3 boresight, double half_beamwidth_deg, double h_weight,
           double floor_db = kDefaultPatternFloorDb);

  /// Terminal at `position` with boresight pointed at `target`.
  static Terminal aimed_at(const Vec3& position, const Vec3& target, double half_beamwidth_deg = kDefaultHalfBeamwidthDeg,
                           double h_weight = 0.5);
};

/// Polar measurement grid. Angles are measured clockwise from the surface
/// (90 = broadside), distances from the surface center.
struct MeasurementGrid {
  std::vector<double> angles_deg;
  std::vector<double> distances_cm;

  MeasurementGrid() = default;
  MeasurementGrid(std::vector<double> angles_deg, std::vector<double> distances_cm);

  static MeasurementGrid standard();

  bool contains(double angle_deg, double distance_cm) const;
};

/// Where the surface sits: its center, outward normal, and the in-plane
/// direction of increasing column index.
struct RisMount {
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::UnitY();
  Vec3 along = Vec3::UnitX();

  Vec3 up() const { return along.cross(normal); }
  Vec3 element_position(const RisLayout& layout, std::size_t n) const;
};

struct Scene {
  RisMount ris;
  Terminal tx;
  Terminal rx;
  MeasurementGrid grid;

  Scene() = default;
  Scene(RisMount ris, Terminal tx, Terminal rx, MeasurementGrid grid);

  /// Tx fixed at 78 deg / 100 cm, Rx at (rx_angle_deg, rx_distance_cm); both
  /// horns aimed at the surface center.
  static Scene standard(double rx_angle_deg, double rx_distance_cm);

  /// Same scene with the receiver moved to a polar point and re-aimed at the surface.
  Scene with_rx_at(double angle_deg, double distance_cm) const;
};

/// Point at the given polar coordinates in the plane through the surface center.
/// The angle is measured from the surface (the -along direction) toward the normal.
Vec3 grid_point(const RisMount& mount, double angle_deg, double distance_cm);

/// Inverse of grid_point for points in the mount plane: {angle_deg, distance_cm}.
std::pair<double, double> polar_coordinates(const RisMount& mount, const Vec3& p);

/// Linear power gain toward a unit `direction`.
double antenna_gain(const Terminal& term, const Vec3& direction);

/// Product of the two terminals' gains along the direct path.
double los_gain_product(const Scene& scene);

/// True unless each terminal sees the other inside twice its half beamwidth
/// (and the gain product is at least 1e-4).
bool los_blocked(const Scene& scene);

}  // namespace risbeam
