#include "risbeam/link.hpp"

#include <cmath>

#include "risbeam/seeding.hpp"

namespace risbeam {

LinkModel LinkModel::standard() {
  return LinkModel{Scene::standard(90.0, 170.0), RisLayout::standard(), {}, {}, {}, kDefaultElementAmplitude};
}

ChannelRealization LinkModel::realize(PolarPoint rx) const { return synthesize_channels(scene_at(rx), layout, channel); }

ReceiverChain LinkModel::receiver(PolarPoint rx, std::uint64_t stream) const {
  const auto a = static_cast<std::uint64_t>(std::llround(rx.angle_deg * 1e6));
  const auto d = static_cast<std::uint64_t>(std::llround(rx.distance_cm * 1e6));
  const std::uint64_t noise_seed = derive_seed(channel.seed, {fnv1a64("receiver-noise"), a, d, stream});
  return ReceiverChain(realize(rx), tone, adc, amplitude, noise_seed);
}

}  // namespace risbeam
