#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pitlab/errors.hpp"
#include "pitlab/rng.hpp"

namespace pitlab {

struct Waveform {
  std::vector<double> samples;
  double sample_rate = 8000.0;

  std::size_t size() const { return samples.size(); }
};

// One training example: the mix plus its N reference sources.
struct Mixture {
  std::uint32_t id = 0;
  Waveform mix;
  std::vector<Waveform> sources;
  std::vector<std::uint32_t> speaker_ids;

  std::size_t num_sources() const { return sources.size(); }
};

enum class Split { Train, Valid, Test };

inline std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    default: return "test";
  }
}

struct Dataset {
  std::vector<Mixture> mixtures;
  Split split = Split::Train;

  std::size_t size() const { return mixtures.size(); }
};

// Synthetic stand-in for a speaker: a spectral energy signature over
// num_bands equal frequency bands, concentrated on a few of them.
struct SpeakerProfile {
  std::uint32_t speaker_id = 0;
  std::vector<double> band_weights;
  double base_amplitude = 1.0;
};

namespace detail {

constexpr double kSdrEps = 1e-10;      // relative guard in the SDR ratio
constexpr double kSdrCapDb = 100.0;    // resulting cap/floor: +-100 dB
constexpr double kEnergyFloor = 1e-12; // additive guard under the log

struct SdrParts {
  double dot = 0.0;  // <s, y>
  double ref_pow = 0.0;
  double est_pow = 0.0;
  double num = 0.0;  // <s,y>^2
  double den = 0.0;  // |s|^2 |y|^2 - <s,y>^2
  bool at_cap = false;
  bool at_floor = false;
};

inline SdrParts sdr_parts(const std::vector<double>& ref,
                          const std::vector<double>& est) {
  SdrParts p;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    p.dot += ref[i] * est[i];
    p.ref_pow += ref[i] * ref[i];
    p.est_pow += est[i] * est[i];
  }
  p.num = p.dot * p.dot;
  p.den = p.ref_pow * p.est_pow - p.num;
  p.at_floor = p.num <= kSdrEps * p.den;
  p.at_cap = !p.at_floor && p.den <= kSdrEps * p.num;
  return p;
}

inline double sdr_from_parts(const SdrParts& p) {
  if (p.at_floor) return -kSdrCapDb;
  if (p.at_cap) return kSdrCapDb;
  const double num = std::max(p.num, kSdrEps * p.den);
  const double den = std::max(p.den, kSdrEps * p.num);
  return 10.0 * std::log10(num / den);
}

}  // namespace detail

// Eq-1-style SDR in dB, stabilized so perfect estimates hit +100 dB and
// orthogonal ones -100 dB instead of diverging.
inline double sdr(const Waveform& reference, const Waveform& estimate) {
  if (reference.size() != estimate.size())
    throw LengthMismatch("sdr: reference has " +
                         std::to_string(reference.size()) +
                         " samples, estimate has " +
                         std::to_string(estimate.size()));
  const auto p = detail::sdr_parts(reference.samples, estimate.samples);
  if (p.ref_pow == 0.0) throw ZeroReference("sdr: all-zero reference");
  return detail::sdr_from_parts(p);
}

inline void check_permutation(const std::vector<int>& perm, std::size_t n) {
  if (perm.size() != n)
    throw InvalidPermutation("permutation has wrong arity");
  std::vector<bool> seen(n, false);
  for (int p : perm) {
    if (p < 0 || static_cast<std::size_t>(p) >= n || seen[p])
      throw InvalidPermutation("not a bijection on [0,N)");
    seen[p] = true;
  }
}

// Mean over output channels of SDR(source, estimate) - SDR(source, mix),
// with channel c paired to source perm[c].
inline double sdr_improvement(const Mixture& mixture,
                              const std::vector<Waveform>& estimates,
                              const std::vector<int>& perm) {
  const std::size_t n = mixture.num_sources();
  check_permutation(perm, n);
  if (estimates.size() != n)
    throw LengthMismatch("sdr_improvement: estimate count != source count");
  double total = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    const Waveform& src = mixture.sources[perm[c]];
    total += sdr(src, estimates[c]) - sdr(src, mixture.mix);
  }
  return total / static_cast<double>(n);
}

// Per-frame energy in dB over non-overlapping frames; the trailing partial
// frame is dropped.
inline std::vector<double> frame_energies(const Waveform& w,
                                          std::size_t frame_len) {
  if (frame_len < 1) throw InvalidConfig("frame_len must be >= 1");
  if (w.size() == 0) throw EmptyWaveform("frame_energies: empty waveform");
  const std::size_t num_frames = w.size() / frame_len;
  std::vector<double> energies(num_frames);
  for (std::size_t f = 0; f < num_frames; ++f) {
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < frame_len; ++i) {
      const double s = w.samples[f * frame_len + i];
      sum_sq += s * s;
    }
    const double mean_sq = sum_sq / static_cast<double>(frame_len);
    energies[f] = 10.0 * std::log10(mean_sq + detail::kEnergyFloor);
  }
  return energies;
}

// Mean energy (in linear power, reported in dB) over frames within
// silence_margin_db of the loudest frame. Frames below that threshold count
// as silence and are dropped, per the energy-label rule.
inline double average_active_energy(const Waveform& w, std::size_t frame_len,
                                    double silence_margin_db = 40.0) {
  const auto energies = frame_energies(w, frame_len);
  if (energies.empty())
    throw NoActiveFrames("average_active_energy: no complete frame");
  double max_e = energies.front();
  for (double e : energies) max_e = std::max(max_e, e);
  const double floor_db = 10.0 * std::log10(detail::kEnergyFloor);
  if (max_e <= floor_db + 1e-9)
    throw NoActiveFrames("average_active_energy: signal is silent");
  const double threshold = max_e - silence_margin_db;
  double linear_sum = 0.0;
  std::size_t active = 0;
  for (double e : energies) {
    if (e >= threshold) {
      linear_sum += std::pow(10.0, e / 10.0);
      ++active;
    }
  }
  return 10.0 * std::log10(linear_sum / static_cast<double>(active));
}

inline double total_energy(const Waveform& w) {
  double e = 0.0;
  for (double s : w.samples) e += s * s;
  return e;
}

// --- synthetic data -------------------------------------------------------

inline std::vector<SpeakerProfile> draw_speaker_profiles(int num_speakers,
                                                         int num_bands,
                                                         Rng& rng) {
  if (num_speakers < 2) throw InvalidConfig("need at least 2 speakers");
  if (num_bands < 4) throw InvalidConfig("need at least 4 bands");
  std::vector<SpeakerProfile> profiles(num_speakers);
  for (int s = 0; s < num_speakers; ++s) {
    SpeakerProfile& p = profiles[s];
    p.speaker_id = static_cast<std::uint32_t>(s);
    p.band_weights.assign(num_bands, 0.0);
    // concentrate energy on 2-3 distinct bands
    const int active_bands = 2 + static_cast<int>(rng.uniform_index(2));
    std::vector<std::size_t> bands(num_bands);
    for (int b = 0; b < num_bands; ++b) bands[b] = b;
    rng.shuffle(bands);
    double total = 0.0;
    for (int k = 0; k < active_bands; ++k) {
      const double w = rng.uniform(0.5, 1.0);
      p.band_weights[bands[k]] = w;
      total += w;
    }
    for (double& w : p.band_weights) w /= total;
    p.base_amplitude = rng.uniform(0.5, 1.0);
  }
  return profiles;
}

// One utterance: a sinusoid per active band of the speaker profile, with a
// contiguous silence gap somewhere inside.
inline Waveform synthesize_utterance(const SpeakerProfile& profile,
                                     int num_samples, double sample_rate,
                                     Rng& rng) {
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(num_samples, 0.0);
  const int num_bands = static_cast<int>(profile.band_weights.size());
  const double nyquist = sample_rate / 2.0;
  const double band_width = nyquist / num_bands;
  for (int b = 0; b < num_bands; ++b) {
    const double weight = profile.band_weights[b];
    if (weight <= 0.0) continue;
    // keep the tone away from band edges so DFT leakage stays in-band
    const double freq =
        rng.uniform((b + 0.15) * band_width, (b + 0.85) * band_width);
    const double amp =
        profile.base_amplitude * std::sqrt(weight) * rng.uniform(0.8, 1.2);
    const double phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    const double omega = 2.0 * 3.14159265358979323846 * freq / sample_rate;
    for (int t = 0; t < num_samples; ++t)
      w.samples[t] += amp * std::sin(omega * t + phase);
  }
  // silence gap
  const int gap_len = static_cast<int>(
      rng.uniform(0.15, 0.30) * static_cast<double>(num_samples));
  const int gap_start = static_cast<int>(
      rng.uniform(0.10, 0.60) * static_cast<double>(num_samples));
  for (int t = gap_start; t < std::min(gap_start + gap_len, num_samples); ++t)
    w.samples[t] = 0.0;
  return w;
}

inline Mixture synthesize_mixture(const std::vector<SpeakerProfile>& profiles,
                                  std::uint32_t id, int num_samples,
                                  double sample_rate,
                                  std::pair<double, double> gain_range_db,
                                  Rng& rng) {
  const std::size_t a = rng.uniform_index(profiles.size());
  std::size_t b = rng.uniform_index(profiles.size() - 1);
  if (b >= a) ++b;
  Mixture m;
  m.id = id;
  m.speaker_ids = {profiles[a].speaker_id, profiles[b].speaker_id};
  m.sources.push_back(
      synthesize_utterance(profiles[a], num_samples, sample_rate, rng));
  Waveform second =
      synthesize_utterance(profiles[b], num_samples, sample_rate, rng);
  const double gain_db =
      rng.uniform(gain_range_db.first, gain_range_db.second);
  const double gain = std::pow(10.0, gain_db / 20.0);
  for (double& s : second.samples) s *= gain;
  m.sources.push_back(std::move(second));
  m.mix.sample_rate = sample_rate;
  m.mix.samples.resize(num_samples);
  for (int t = 0; t < num_samples; ++t)
    m.mix.samples[t] = m.sources[0].samples[t] + m.sources[1].samples[t];
  return m;
}

// Deterministic two-speaker mixture corpus; the mix is the exact sample-wise
// sum of the sources.
inline Dataset synthesize_dataset(int num_speakers, int num_mixtures,
                                  int samples_per_utt,
                                  std::pair<double, double> gain_range_db =
                                      {-2.5, 2.5},
                                  std::uint64_t seed = 0, int num_bands = 8,
                                  double sample_rate = 8000.0,
                                  Split split = Split::Train) {
  if (num_mixtures < 1) throw InvalidConfig("need at least 1 mixture");
  if (samples_per_utt < 1) throw InvalidConfig("need at least 1 sample");
  Rng rng(mix_seed(seed, 0x5eed));
  const auto profiles = draw_speaker_profiles(num_speakers, num_bands, rng);
  Dataset ds;
  ds.split = split;
  ds.mixtures.reserve(num_mixtures);
  for (int i = 0; i < num_mixtures; ++i)
    ds.mixtures.push_back(synthesize_mixture(
        profiles, static_cast<std::uint32_t>(i), samples_per_utt, sample_rate,
        gain_range_db, rng));
  return ds;
}

}  // namespace pitlab
