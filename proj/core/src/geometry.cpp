#include "risbeam/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace risbeam {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kLosProductThreshold = 1e-4;

void require_unit(const Vec3& v, const char* what) {
  if (std::abs(v.norm() - 1.0) > 1e-9) throw std::invalid_argument(std::string(what) + " must have unit norm");
}

bool strictly_increasing(const std::vector<double>& v) {
  return std::adjacent_find(v.begin(), v.end(), [](double a, double b) { return b <= a; }) == v.end();
}

double off_axis_deg(const Vec3& boresight, const Vec3& direction) {
  const double c = std::clamp(boresight.dot(direction), -1.0, 1.0);
  return std::acos(c) / kDeg;
}

}  // namespace

Terminal::Terminal(Vec3 position_, Vec3 boresight_, double half_beamwidth_deg_, double h_weight_, double floor_db_)
    : position(std::move(position_)),
      boresight(std::move(boresight_)),
      half_beamwidth_deg(half_beamwidth_deg_),
      h_weight(h_weight_),
      floor_db(floor_db_) {
  require_unit(boresight, "Terminal boresight");
  if (!(half_beamwidth_deg > 0.0 && half_beamwidth_deg < 180.0))
    throw std::invalid_argument("Terminal: half beamwidth must lie in (0, 180) degrees");
  if (!(h_weight >= 0.0 && h_weight <= 1.0)) throw std::invalid_argument("Terminal: h_weight must lie in [0, 1]");
  if (!(floor_db < 0.0)) throw std::invalid_argument("Terminal: pattern floor must be negative dB");
}

Terminal Terminal::aimed_at(const Vec3& position, const Vec3& target, double half_beamwidth_deg, double h_weight) {
  const Vec3 d = target - position;
  if (d.norm() == 0.0) throw std::invalid_argument("Terminal::aimed_at: target coincides with position");
  return Terminal(position, d.normalized(), half_beamwidth_deg, h_weight);
}

MeasurementGrid::MeasurementGrid(std::vector<double> angles, std::vector<double> distances)
    : angles_deg(std::move(angles)), distances_cm(std::move(distances)) {
  if (!strictly_increasing(angles_deg)) throw std::invalid_argument("MeasurementGrid: angles must be strictly increasing");
  if (!strictly_increasing(distances_cm))
    throw std::invalid_argument("MeasurementGrid: distances must be strictly increasing");
  for (double a : angles_deg)
    if (!(a > 0.0 && a < 180.0)) throw std::invalid_argument("MeasurementGrid: angles must lie in (0, 180)");
  for (double d : distances_cm)
    if (!(d > 0.0)) throw std::invalid_argument("MeasurementGrid: distances must be positive");
}

MeasurementGrid MeasurementGrid::standard() {
  return MeasurementGrid({50, 70, 90, 110, 130, 145}, {70, 120, 170, 220, 270, 320, 420});
}

bool MeasurementGrid::contains(double angle_deg, double distance_cm) const {
  return std::find(angles_deg.begin(), angles_deg.end(), angle_deg) != angles_deg.end() &&
         std::find(distances_cm.begin(), distances_cm.end(), distance_cm) != distances_cm.end();
}

Vec3 RisMount::element_position(const RisLayout& layout, std::size_t n) const {
  const auto [x, z] = layout.local_offset(n);
  return center + x * along + z * up();
}

Scene::Scene(RisMount ris_, Terminal tx_, Terminal rx_, MeasurementGrid grid_)
    : ris(std::move(ris_)), tx(std::move(tx_)), rx(std::move(rx_)), grid(std::move(grid_)) {
  require_unit(ris.normal, "RIS normal");
  require_unit(ris.along, "RIS in-plane axis");
  if (std::abs(ris.normal.dot(ris.along)) > 1e-9) throw std::invalid_argument("Scene: RIS axes must be orthogonal");
  if ((tx.position - ris.center).dot(ris.normal) <= 0.0)
    throw std::invalid_argument("Scene: transmitter is not on the reflective side");
  if ((rx.position - ris.center).dot(ris.normal) <= 0.0)
    throw std::invalid_argument("Scene: receiver is not on the reflective side");
}

Scene Scene::standard(double rx_angle_deg, double rx_distance_cm) {
  RisMount mount;
  auto tx = Terminal::aimed_at(grid_point(mount, 78.0, 100.0), mount.center);
  auto rx = Terminal::aimed_at(grid_point(mount, rx_angle_deg, rx_distance_cm), mount.center);
  return Scene(mount, tx, rx, MeasurementGrid::standard());
}

Scene Scene::with_rx_at(double angle_deg, double distance_cm) const {
  auto moved = Terminal::aimed_at(grid_point(ris, angle_deg, distance_cm), ris.center, rx.half_beamwidth_deg, rx.h_weight);
  moved.floor_db = rx.floor_db;
  return Scene(ris, tx, moved, grid);
}

Vec3 grid_point(const RisMount& mount, double angle_deg, double distance_cm) {
  if (!(distance_cm > 0.0)) throw std::invalid_argument("grid_point: distance must be positive");
  const double a = angle_deg * kDeg;
  const double r = distance_cm / 100.0;
  return mount.center + r * (-std::cos(a) * mount.along + std::sin(a) * mount.normal);
}

std::pair<double, double> polar_coordinates(const RisMount& mount, const Vec3& p) {
  const Vec3 d = p - mount.center;
  const double x = -d.dot(mount.along);
  const double y = d.dot(mount.normal);
  return {std::atan2(y, x) / kDeg, std::hypot(x, y) * 100.0};
}

double antenna_gain(const Terminal& term, const Vec3& direction) {
  const double floor = std::pow(10.0, term.floor_db / 10.0);
  const double c = term.boresight.dot(direction);
  if (c <= 0.0) return floor;
  // cos^q(theta) with q fixed by cos^q(half beamwidth) = 1/2
  const double q = std::log(0.5) / std::log(std::cos(term.half_beamwidth_deg * kDeg));
  return std::max(std::pow(std::min(c, 1.0), q), floor);
}

double los_gain_product(const Scene& scene) {
  const Vec3 d = scene.rx.position - scene.tx.position;
  if (d.norm() == 0.0) return 1.0;
  const Vec3 u = d.normalized();
  return antenna_gain(scene.tx, u) * antenna_gain(scene.rx, -u);
}

bool los_blocked(const Scene& scene) {
  const Vec3 d = scene.rx.position - scene.tx.position;
  if (d.norm() == 0.0) return false;
  const Vec3 u = d.normalized();
  const bool rx_in_tx_cone = off_axis_deg(scene.tx.boresight, u) <= 2.0 * scene.tx.half_beamwidth_deg;
  const bool tx_in_rx_cone = off_axis_deg(scene.rx.boresight, -u) <= 2.0 * scene.rx.half_beamwidth_deg;
  return !(rx_in_tx_cone && tx_in_rx_cone) || los_gain_product(scene) < kLosProductThreshold;
}

}  // namespace risbeam
