#include "risbeam/channel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "risbeam/seeding.hpp"

namespace risbeam {

namespace {

constexpr std::uint64_t kTxStreamTag = fnv1a64("tx-scatter");
constexpr std::uint64_t kRxStreamTag = fnv1a64("rx-scatter");

std::uint64_t position_tag(const Vec3& p) {
  // micrometer lattice so that equal placements always share a stream
  std::uint64_t t = 0;
  for (int i = 0; i < 3; ++i) t = mix64(t ^ static_cast<std::uint64_t>(std::llround(p[i] * 1e6)));
  return t;
}

struct LinkTerm {
  std::array<CVec, 2> per_pol;
};

// Spherical-wave term from `term` to each element plus a complex Gaussian
// scattered term of the same local mean power.
LinkTerm element_link(const Terminal& term, const RisMount& mount, const RisLayout& layout,
                      const ChannelModelParams& params, std::uint64_t stream_seed) {
  const std::size_t n = layout.active_count();
  const double k = 2.0 * std::numbers::pi / layout.wavelength();
  CVec det(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 v = mount.element_position(layout, i) - term.position;
    const double d = v.norm();
    if (d < 1e-9) throw std::invalid_argument("synthesize_channels: terminal coincides with a surface element");
    const double gain = antenna_gain(term, v / d);
    det[static_cast<Eigen::Index>(i)] =
        std::sqrt(gain) * std::pow(d, -params.path_loss_exponent / 2.0) * std::polar(1.0, -k * d);
  }

  double los_w = 1.0;
  double nlos_w = 0.0;
  if (std::isfinite(params.rician_k_db)) {
    const double kr = std::pow(10.0, params.rician_k_db / 10.0);
    los_w = std::sqrt(kr / (kr + 1.0));
    nlos_w = std::sqrt(1.0 / (kr + 1.0));
  } else if (params.rician_k_db < 0) {
    los_w = 0.0;
    nlos_w = 1.0;
  }

  std::mt19937_64 rng(stream_seed);
  std::normal_distribution<double> unit(0.0, std::sqrt(0.5));
  const std::array<double, 2> pol_w{std::sqrt(term.h_weight), std::sqrt(1.0 - term.h_weight)};

  LinkTerm out;
  for (int p = 0; p < 2; ++p) {
    CVec v(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double re = unit(rng);
      const double im = unit(rng);
      const Complex scatter = Complex(re, im) * std::abs(det[ii]);
      v[ii] = pol_w[p] * (los_w * det[ii] + nlos_w * scatter);
    }
    out.per_pol[p] = std::move(v);
  }
  return out;
}

void apply_coupling(std::array<CVec, 2>& v, double c) {
  if (c == 0.0) return;
  const double keep = std::sqrt(1.0 - c * c);
  CVec h = keep * v[0] + c * v[1];
  CVec w = keep * v[1] + c * v[0];
  v[0] = std::move(h);
  v[1] = std::move(w);
}

inline int adc_round(double v, bool& clipped) {
  const double r = std::round(v);  // half away from zero
  if (r > kAdcMax) {
    clipped = true;
    return kAdcMax;
  }
  if (r < kAdcMin) {
    clipped = true;
    return kAdcMin;
  }
  return static_cast<int>(r);
}

std::vector<Complex> make_tone(const ToneParams& tone) {
  std::vector<Complex> x(tone.buffer_len);
  const double w = 2.0 * std::numbers::pi * tone.tone_hz / tone.sample_rate_hz;
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::polar(tone.tx_amplitude, w * static_cast<double>(k));
  return x;
}

// Shared by the vector and streaming paths so both see bit-identical samples.
template <typename Sink>
void generate(Complex coef, std::span<const Complex> tone, double noise_variance, std::uint64_t noise_seed,
              Sink&& sink) {
  if (noise_variance > 0.0) {
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> noise(0.0, std::sqrt(noise_variance / 2.0));
    for (const auto& x : tone) {
      const double re = noise(rng);
      const double im = noise(rng);
      sink(coef * x + Complex(re, im));
    }
  } else {
    for (const auto& x : tone) sink(coef * x);
  }
}

}  // namespace

void ChannelModelParams::validate() const {
  if (!(path_loss_exponent >= 1.0)) throw std::invalid_argument("ChannelModelParams: path loss exponent must be >= 1");
  if (!(noise_variance >= 0.0)) throw std::invalid_argument("ChannelModelParams: noise variance must be >= 0");
  if (std::isnan(rician_k_db)) throw std::invalid_argument("ChannelModelParams: Rician K is NaN");
  if (!(cross_pol_coupling >= 0.0 && cross_pol_coupling < 1.0))
    throw std::invalid_argument("ChannelModelParams: cross-polarization coupling must lie in [0, 1)");
}

void ToneParams::validate() const {
  if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("ToneParams: sample rate must be positive");
  if (!(tone_hz < sample_rate_hz / 2.0)) throw std::invalid_argument("ToneParams: tone must be below Nyquist");
  if (buffer_len < 1) throw std::invalid_argument("ToneParams: buffer length must be >= 1");
}

ChannelRealization synthesize_channels(const Scene& scene, const RisLayout& layout, const ChannelModelParams& params) {
  params.validate();
  ChannelRealization chan;
  auto tx = element_link(scene.tx, scene.ris, layout, params,
                         derive_seed(params.seed, {kTxStreamTag, position_tag(scene.tx.position)}));
  auto rx = element_link(scene.rx, scene.ris, layout, params,
                         derive_seed(params.seed, {kRxStreamTag, position_tag(scene.rx.position)}));
  chan.h = std::move(tx.per_pol);
  apply_coupling(chan.h, params.cross_pol_coupling);
  for (int p = 0; p < 2; ++p) chan.g[p] = rx.per_pol[p].conjugate();

  if (!los_blocked(scene)) {
    const Vec3 d = scene.rx.position - scene.tx.position;
    const double dist = d.norm();
    const double k = 2.0 * std::numbers::pi / layout.wavelength();
    const double pol_match = std::sqrt(scene.tx.h_weight * scene.rx.h_weight) +
                             std::sqrt((1.0 - scene.tx.h_weight) * (1.0 - scene.rx.h_weight));
    chan.h_los = std::sqrt(los_gain_product(scene)) * pol_match * std::pow(dist, -params.path_loss_exponent / 2.0) *
                 std::polar(1.0, -k * dist);
  }
  chan.noise_variance = params.noise_variance;
  return chan;
}

Complex cascaded_coefficient(const RisConfig& config, const ChannelRealization& chan, double amplitude) {
  if (config.size() != chan.size()) throw std::invalid_argument("cascaded_coefficient: config does not match channel");
  Complex acc = chan.h_los;
  const auto n = static_cast<Eigen::Index>(config.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto s = config[static_cast<std::size_t>(i)];
    const double th = h_flipped(s) ? -amplitude : amplitude;
    const double tv = v_flipped(s) ? -amplitude : amplitude;
    acc += std::conj(chan.g[0][i]) * th * chan.h[0][i] + std::conj(chan.g[1][i]) * tv * chan.h[1][i];
  }
  return acc;
}

double end_to_end_gain(const RisConfig& config, const ChannelRealization& chan, double amplitude) {
  return std::norm(cascaded_coefficient(config, chan, amplitude));
}

std::vector<Complex> received_samples(const RisConfig& config, const ChannelRealization& chan, const ToneParams& tone,
                                      double amplitude, std::uint64_t noise_seed) {
  tone.validate();
  const auto x = make_tone(tone);
  std::vector<Complex> r;
  r.reserve(x.size());
  generate(cascaded_coefficient(config, chan, amplitude), x, chan.noise_variance, noise_seed,
           [&](Complex s) { r.push_back(s); });
  return r;
}

AdcCapture quantize_adc(std::span<const Complex> samples, double full_scale) {
  if (!(full_scale > 0.0)) throw std::invalid_argument("quantize_adc: full scale must be positive");
  const double scale = kAdcCountsAtFullScale / full_scale;
  AdcCapture cap;
  cap.samples.reserve(samples.size());
  std::size_t clipped_count = 0;
  for (const auto& s : samples) {
    bool clipped = false;
    const int i = adc_round(s.real() * scale, clipped);
    const int q = adc_round(s.imag() * scale, clipped);
    if (clipped) ++clipped_count;
    cap.samples.push_back({static_cast<std::int16_t>(i), static_cast<std::int16_t>(q)});
  }
  cap.clip_fraction = samples.empty() ? 0.0 : static_cast<double>(clipped_count) / static_cast<double>(samples.size());
  return cap;
}

double power_dbfs(std::span<const IqSample> samples) {
  if (samples.empty()) throw std::invalid_argument("power_dbfs: empty buffer");
  // integer accumulation keeps the sum exact
  std::uint64_t acc = 0;
  for (const auto& s : samples) {
    acc += static_cast<std::uint64_t>(std::int64_t{s.i} * s.i) + static_cast<std::uint64_t>(std::int64_t{s.q} * s.q);
  }
  if (acc == 0) throw MeasurementFloorError("power_dbfs: all-zero capture is below the measurement floor");
  return 10.0 * std::log10(static_cast<double>(acc) / static_cast<double>(samples.size()));
}

void export_capture(const std::filesystem::path& stem, const AdcCapture& capture, const ToneParams& tone,
                    double full_scale) {
  auto bin_path = stem;
  bin_path += ".iq16";
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("export_capture: cannot open " + bin_path.string());
  for (const auto& s : capture.samples) {
    for (std::int16_t v : {s.i, s.q}) {
      const auto u = static_cast<std::uint16_t>(v);
      const char bytes[2] = {static_cast<char>(u & 0xff), static_cast<char>(u >> 8)};
      bin.write(bytes, 2);
    }
  }

  nlohmann::ordered_json meta;
  meta["format"] = "int16le-iq-interleaved";
  meta["sample_rate_hz"] = tone.sample_rate_hz;
  meta["tone_hz"] = tone.tone_hz;
  meta["buffer_len"] = capture.samples.size();
  meta["full_scale"] = full_scale;
  meta["clip_fraction"] = capture.clip_fraction;
  auto json_path = stem;
  json_path += ".json";
  std::ofstream js(json_path);
  if (!js) throw std::runtime_error("export_capture: cannot open " + json_path.string());
  js << meta.dump(2) << '\n';
}

std::vector<IqSample> read_iq16(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_iq16: cannot open " + path.string());
  std::vector<IqSample> out;
  unsigned char b[4];
  while (in.read(reinterpret_cast<char*>(b), 4)) {
    const auto i = static_cast<std::int16_t>(static_cast<std::uint16_t>(b[0] | (b[1] << 8)));
    const auto q = static_cast<std::int16_t>(static_cast<std::uint16_t>(b[2] | (b[3] << 8)));
    out.push_back({i, q});
  }
  return out;
}

ReceiverChain::ReceiverChain(ChannelRealization chan, ToneParams tone, AdcParams adc, double amplitude,
                             std::uint64_t noise_seed)
    : chan_(std::move(chan)), tone_(tone), adc_(adc), amplitude_(amplitude), noise_seed_(noise_seed) {
  tone_.validate();
  if (!(adc_.full_scale > 0.0)) throw std::invalid_argument("ReceiverChain: full scale must be positive");
  if (!(amplitude_ > 0.0 && amplitude_ <= 1.0)) throw std::invalid_argument("ReceiverChain: amplitude must lie in (0, 1]");
  tone_samples_ = make_tone(tone_);
}

double ReceiverChain::measure(const RisConfig& config) { return measure_at(config, next_index_++); }

double ReceiverChain::measure_at(const RisConfig& config, std::uint64_t index) const {
  const double scale = kAdcCountsAtFullScale / adc_.full_scale;
  std::uint64_t acc = 0;
  generate(cascaded_coefficient(config, chan_, amplitude_), tone_samples_, chan_.noise_variance,
           derive_seed(noise_seed_, {index}), [&](Complex s) {
             bool clipped = false;
             const std::int64_t i = adc_round(s.real() * scale, clipped);
             const std::int64_t q = adc_round(s.imag() * scale, clipped);
             acc += static_cast<std::uint64_t>(i * i + q * q);
           });
  if (acc == 0) throw MeasurementFloorError("ReceiverChain: all-zero capture is below the measurement floor");
  return 10.0 * std::log10(static_cast<double>(acc) / static_cast<double>(tone_samples_.size()));
}

AdcCapture ReceiverChain::capture(const RisConfig& config, std::uint64_t measurement_index) const {
  auto r = received_samples(config, chan_, tone_, amplitude_, derive_seed(noise_seed_, {measurement_index}));
  return quantize_adc(r, adc_.full_scale);
}

}  // namespace risbeam
