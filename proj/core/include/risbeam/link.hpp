#pragma once

#include <cstdint>

#include "risbeam/channel.hpp"
#include "risbeam/geometry.hpp"
#include "risbeam/layout.hpp"

namespace risbeam {

struct PolarPoint {
  double angle_deg = 90.0;
  double distance_cm = 100.0;
  auto operator<=>(const PolarPoint&) const = default;
};

/// Everything needed to measure received power for a receiver placed at an
/// arbitrary polar point, with the transmitter and surface held fixed.
struct LinkModel {
  Scene scene;  // rx is replaced per point
  RisLayout layout;
  ChannelModelParams channel;
  ToneParams tone;
  AdcParams adc;
  double amplitude = kDefaultElementAmplitude;

  static LinkModel standard();

  Scene scene_at(PolarPoint rx) const { return scene.with_rx_at(rx.angle_deg, rx.distance_cm); }
  ChannelRealization realize(PolarPoint rx) const;

  /// Receiver whose noise stream is tied to (channel seed, rx point, stream).
  ReceiverChain receiver(PolarPoint rx, std::uint64_t stream = 0) const;
};

}  // namespace risbeam
