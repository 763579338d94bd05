#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "risbeam/geometry.hpp"
#include "risbeam/layout.hpp"

namespace risbeam {

using CVec = Eigen::VectorXcd;
using Complex = std::complex<double>;

// Calibrated so the all-off baseline at typical grid points sits around 15-17 dBFS
// (see README, "Receiver calibration").
inline constexpr double kDefaultFullScale = 800.0;
inline constexpr double kDefaultNoiseVariance = 0.016;

struct ChannelModelParams {
  double path_loss_exponent = 2.0;
  /// Ratio of deterministic to scattered power in dB; +inf disables scattering.
  double rician_k_db = 10.0;
  double noise_variance = kDefaultNoiseVariance;
  std::uint64_t seed = 0;
  /// Leakage between the H and V incident fields, in [0, 1).
  double cross_pol_coupling = 0.0;

  void validate() const;
};

/// Per-polarization cascaded channels. Index 0 is H, 1 is V.
struct ChannelRealization {
  std::array<CVec, 2> h;  // Tx -> RIS
  std::array<CVec, 2> g;  // RIS -> Rx, conjugated so that g^H Theta h is the path gain
  Complex h_los{0.0, 0.0};
  double noise_variance = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(h[0].size()); }
};

struct ToneParams {
  double tone_hz = 100e3;
  double sample_rate_hz = 1e6;
  std::size_t buffer_len = 10000;
  double tx_amplitude = 1.0;

  void validate() const;
};

struct AdcParams {
  double full_scale = kDefaultFullScale;
};

/// One complex sample after the 12-bit converter.
struct IqSample {
  std::int16_t i = 0;
  std::int16_t q = 0;
  bool operator==(const IqSample&) const = default;
};

inline constexpr int kAdcMin = -2046;  // integers in (-2047, 2048]
inline constexpr int kAdcMax = 2048;
inline constexpr double kAdcCountsAtFullScale = 2048.0;

struct AdcCapture {
  std::vector<IqSample> samples;
  double clip_fraction = 0.0;
};

/// Raised when a capture holds no energy at all; dBFS is undefined there.
class MeasurementFloorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Near-field spherical-wave channels plus Rician scattering. Deterministic in
/// (scene, layout, params): the Tx-side scattering is seeded from the Tx
/// position and the Rx side from the Rx position.
ChannelRealization synthesize_channels(const Scene& scene, const RisLayout& layout, const ChannelModelParams& params);

/// sum_pol g_pol^H Theta_pol h_pol + h_los
Complex cascaded_coefficient(const RisConfig& config, const ChannelRealization& chan, double amplitude);

/// |cascaded_coefficient|^2, the noiseless objective.
double end_to_end_gain(const RisConfig& config, const ChannelRealization& chan, double amplitude);

/// r[k] = coefficient * x[k] + n[k], with x the complex tone and n drawn from `noise_seed`.
std::vector<Complex> received_samples(const RisConfig& config, const ChannelRealization& chan, const ToneParams& tone,
                                      double amplitude, std::uint64_t noise_seed);

/// Scale by 2048 / full_scale, round half away from zero, clamp to (-2047, 2048].
AdcCapture quantize_adc(std::span<const Complex> samples, double full_scale);

/// 10 log10 of the mean squared magnitude of integer samples.
double power_dbfs(std::span<const IqSample> samples);

/// Write `<stem>.iq16` (little-endian interleaved int16 I/Q) and `<stem>.json`.
void export_capture(const std::filesystem::path& stem, const AdcCapture& capture, const ToneParams& tone,
                    double full_scale);
std::vector<IqSample> read_iq16(const std::filesystem::path& path);

/// Tone -> channel -> AWGN -> ADC -> dBFS. Every call to measure() is one
/// measurement; its noise stream is derived from (noise_seed, call index).
class ReceiverChain {
 public:
  ReceiverChain(ChannelRealization chan, ToneParams tone, AdcParams adc, double amplitude, std::uint64_t noise_seed);

  double measure(const RisConfig& config);
  AdcCapture capture(const RisConfig& config, std::uint64_t measurement_index) const;

  std::uint64_t measurements() const { return next_index_; }
  const ChannelRealization& channel() const { return chan_; }
  double amplitude() const { return amplitude_; }

 private:
  double measure_at(const RisConfig& config, std::uint64_t index) const;

  ChannelRealization chan_;
  ToneParams tone_;
  AdcParams adc_;
  double amplitude_;
  std::uint64_t noise_seed_;
  std::uint64_t next_index_ = 0;
  std::vector<Complex> tone_samples_;
};

}  // namespace risbeam
