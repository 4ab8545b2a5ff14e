#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pitlab/errors.hpp"
#include "pitlab/rng.hpp"
#include "pitlab/signal.hpp"

namespace pitlab {

// Row-major dense matrix; small enough here that hand-rolled loops beat
// pulling in a linear algebra dependency.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) {
    return data[r * cols + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
};

struct SeparatorConfig {
  int frame_len = 16;    // F
  int latent_dim = 16;   // B
  int hidden_dim = 32;   // H
  int num_channels = 2;  // N
  double init_scale = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    if (frame_len < 4) throw InvalidConfig("frame_len must be >= 4");
    if (latent_dim < 2) throw InvalidConfig("latent_dim must be >= 2");
    if (hidden_dim < 1) throw InvalidConfig("hidden_dim must be >= 1");
    if (num_channels < 2) throw InvalidConfig("num_channels must be >= 2");
    if (init_scale < 0.0) throw InvalidConfig("init_scale must be >= 0");
  }
};

// Weights of the encoder -> mask network -> decoder stack. Also reused as
// the gradient container, since gradients share every shape.
struct SeparatorParams {
  SeparatorConfig config;
  Matrix encoder;               // B x F
  Matrix mask_w1;               // H x B
  std::vector<double> mask_b1;  // H
  Matrix mask_w2;               // (N*B) x H
  std::vector<double> mask_b2;  // N*B
  Matrix decoder;               // F x B

  static SeparatorParams zeros_like(const SeparatorConfig& cfg) {
    SeparatorParams p;
    p.config = cfg;
    const auto F = static_cast<std::size_t>(cfg.frame_len);
    const auto B = static_cast<std::size_t>(cfg.latent_dim);
    const auto H = static_cast<std::size_t>(cfg.hidden_dim);
    const auto N = static_cast<std::size_t>(cfg.num_channels);
    p.encoder = Matrix(B, F);
    p.mask_w1 = Matrix(H, B);
    p.mask_b1.assign(H, 0.0);
    p.mask_w2 = Matrix(N * B, H);
    p.mask_b2.assign(N * B, 0.0);
    p.decoder = Matrix(F, B);
    return p;
  }

  // visit every parameter tensor as a flat vector, in declaration order
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    fn(encoder.data);
    fn(mask_w1.data);
    fn(mask_b1);
    fn(mask_w2.data);
    fn(mask_b2);
    fn(decoder.data);
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    fn(encoder.data);
    fn(mask_w1.data);
    fn(mask_b1);
    fn(mask_w2.data);
    fn(mask_b2);
    fn(decoder.data);
  }

  std::size_t num_parameters() const {
    std::size_t n = 0;
    for_each_tensor([&](const std::vector<double>& t) { n += t.size(); });
    return n;
  }

  bool same_shape(const SeparatorParams& other) const {
    return encoder.rows == other.encoder.rows &&
           encoder.cols == other.encoder.cols &&
           mask_w1.rows == other.mask_w1.rows &&
           mask_b1.size() == other.mask_b1.size() &&
           mask_w2.rows == other.mask_w2.rows &&
           mask_b2.size() == other.mask_b2.size() &&
           decoder.rows == other.decoder.rows &&
           decoder.cols == other.decoder.cols;
  }
};

inline SeparatorParams init_params(const SeparatorConfig& config) {
  config.validate();
  SeparatorParams p = SeparatorParams::zeros_like(config);
  Rng rng(mix_seed(config.seed, 0x1417));
  p.for_each_tensor([&](std::vector<double>& t) {
    for (double& v : t) v = rng.uniform(-config.init_scale, config.init_scale);
  });
  return p;
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  AdamConfig hyper;
  SeparatorParams m;  // first moments
  SeparatorParams v;  // second moments
  std::uint64_t step = 0;

  static OptimizerState fresh(const SeparatorConfig& cfg,
                              const AdamConfig& hyper = {}) {
    OptimizerState s;
    s.hyper = hyper;
    s.m = SeparatorParams::zeros_like(cfg);
    s.v = SeparatorParams::zeros_like(cfg);
    s.step = 0;
    return s;
  }

  void reset() {
    m.for_each_tensor([](std::vector<double>& t) {
      std::fill(t.begin(), t.end(), 0.0);
    });
    v.for_each_tensor([](std::vector<double>& t) {
      std::fill(t.begin(), t.end(), 0.0);
    });
    step = 0;
  }
};

// Everything backward() needs from the forward pass. Shapes are flattened
// per frame: latent[f*B + b], hidden[f*H + h], masks/channel latents
// [ (f*N + c)*B + b ].
struct ForwardCache {
  std::size_t input_len = 0;
  std::size_t num_frames = 0;
  std::vector<double> padded;
  std::vector<double> latent;
  std::vector<double> hidden;
  std::vector<double> masks;
  std::vector<double> channel_latent;
  std::vector<std::vector<double>> estimates;  // N x input_len
};

// Per non-overlapping frame: latent = E*frame, masks = channel-softmax of the
// mask network logits, per-channel latent = mask .* latent, frame out =
// D * channel latent. Masks sum to 1 across channels at every latent bin, so
// the channel latents partition the mixture latent exactly.
inline ForwardCache forward(const SeparatorParams& params, const Waveform& mix) {
  const auto F = static_cast<std::size_t>(params.config.frame_len);
  const auto B = static_cast<std::size_t>(params.config.latent_dim);
  const auto H = static_cast<std::size_t>(params.config.hidden_dim);
  const auto N = static_cast<std::size_t>(params.config.num_channels);

  ForwardCache cache;
  cache.input_len = mix.size();
  cache.num_frames = (mix.size() + F - 1) / F;
  cache.padded.assign(cache.num_frames * F, 0.0);
  std::copy(mix.samples.begin(), mix.samples.end(), cache.padded.begin());

  const std::size_t T = cache.num_frames;
  cache.latent.assign(T * B, 0.0);
  cache.hidden.assign(T * H, 0.0);
  cache.masks.assign(T * N * B, 0.0);
  cache.channel_latent.assign(T * N * B, 0.0);
  cache.estimates.assign(N, std::vector<double>(cache.input_len, 0.0));

  std::vector<double> logits(N * B);
  std::vector<double> frame_out(F);
  for (std::size_t f = 0; f < T; ++f) {
    const double* frame = &cache.padded[f * F];
    double* z = &cache.latent[f * B];
    for (std::size_t b = 0; b < B; ++b) {
      double acc = 0.0;
      for (std::size_t i = 0; i < F; ++i) acc += params.encoder(b, i) * frame[i];
      z[b] = acc;
    }
    double* h = &cache.hidden[f * H];
    for (std::size_t j = 0; j < H; ++j) {
      double acc = params.mask_b1[j];
      for (std::size_t b = 0; b < B; ++b) acc += params.mask_w1(j, b) * z[b];
      h[j] = std::tanh(acc);
    }
    for (std::size_t cb = 0; cb < N * B; ++cb) {
      double acc = params.mask_b2[cb];
      for (std::size_t j = 0; j < H; ++j) acc += params.mask_w2(cb, j) * h[j];
      logits[cb] = acc;
    }
    // softmax across channels, independently per latent bin
    double* m = &cache.masks[f * N * B];
    for (std::size_t b = 0; b < B; ++b) {
      double max_logit = logits[b];
      for (std::size_t c = 1; c < N; ++c)
        max_logit = std::max(max_logit, logits[c * B + b]);
      double denom = 0.0;
      for (std::size_t c = 0; c < N; ++c) {
        const double e = std::exp(logits[c * B + b] - max_logit);
        m[c * B + b] = e;
        denom += e;
      }
      for (std::size_t c = 0; c < N; ++c) m[c * B + b] /= denom;
    }
    double* u = &cache.channel_latent[f * N * B];
    for (std::size_t c = 0; c < N; ++c) {
      for (std::size_t b = 0; b < B; ++b) u[c * B + b] = m[c * B + b] * z[b];
      for (std::size_t i = 0; i < F; ++i) {
        double acc = 0.0;
        for (std::size_t b = 0; b < B; ++b)
          acc += params.decoder(i, b) * u[c * B + b];
        frame_out[i] = acc;
      }
      const std::size_t start = f * F;
      const std::size_t stop = std::min(start + F, cache.input_len);
      for (std::size_t t = start; t < stop; ++t)
        cache.estimates[c][t] = frame_out[t - start];
    }
  }
  return cache;
}

inline std::vector<Waveform> estimates_as_waveforms(const ForwardCache& cache,
                                                    double sample_rate) {
  std::vector<Waveform> out(cache.estimates.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c].sample_rate = sample_rate;
    out[c].samples = cache.estimates[c];
  }
  return out;
}

// Negative mean utterance-level SDR over channels, channel c scored against
// source perm[c].
inline double loss_from_cache(const ForwardCache& cache, const Mixture& mixture,
                              const std::vector<int>& perm) {
  const std::size_t n = mixture.num_sources();
  check_permutation(perm, n);
  if (cache.estimates.size() != n)
    throw ShapeMismatch("loss: channel count != source count");
  double total = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    const auto p = detail::sdr_parts(mixture.sources[perm[c]].samples,
                                     cache.estimates[c]);
    if (p.ref_pow == 0.0) throw ZeroReference("loss: all-zero source");
    total += detail::sdr_from_parts(p);
  }
  return -total / static_cast<double>(n);
}

inline std::pair<double, ForwardCache> loss(const SeparatorParams& params,
                                            const Mixture& mixture,
                                            const std::vector<int>& perm) {
  ForwardCache cache = forward(params, mixture.mix);
  return {loss_from_cache(cache, mixture, perm), std::move(cache)};
}

// Analytic gradient of loss() w.r.t. every parameter tensor. Channels pinned
// at the +-100 dB guard contribute zero gradient.
inline SeparatorParams backward(const SeparatorParams& params,
                                const Mixture& mixture,
                                const std::vector<int>& perm,
                                const ForwardCache& cache) {
  const auto F = static_cast<std::size_t>(params.config.frame_len);
  const auto B = static_cast<std::size_t>(params.config.latent_dim);
  const auto H = static_cast<std::size_t>(params.config.hidden_dim);
  const auto N = static_cast<std::size_t>(params.config.num_channels);
  const std::size_t n = mixture.num_sources();
  check_permutation(perm, n);
  if (cache.input_len != mixture.mix.size() || cache.estimates.size() != N ||
      cache.latent.size() != cache.num_frames * B ||
      cache.hidden.size() != cache.num_frames * H ||
      cache.masks.size() != cache.num_frames * N * B)
    throw StaleCache("backward: cache does not match params/mixture");

  SeparatorParams grads = SeparatorParams::zeros_like(params.config);

  // d(loss)/d(estimate sample), per channel; zero inside the clamped region
  // and over the zero-padding tail.
  std::vector<std::vector<double>> d_est(N);
  const double log10_scale = 10.0 / std::log(10.0);
  for (std::size_t c = 0; c < N; ++c) {
    const auto& ref = mixture.sources[perm[c]].samples;
    const auto& est = cache.estimates[c];
    d_est[c].assign(cache.input_len, 0.0);
    const auto p = detail::sdr_parts(ref, est);
    if (p.ref_pow == 0.0) throw ZeroReference("backward: all-zero source");
    if (p.at_cap || p.at_floor) continue;
    // SDR = k*(ln num - ln den); d num = 2*dot*s, d den = 2*pow_s*y - 2*dot*s
    const double k = -log10_scale / static_cast<double>(n);  // loss sign
    const double c_num = 2.0 * p.dot / p.num;
    const double c_den = 2.0 / p.den;
    for (std::size_t t = 0; t < cache.input_len; ++t) {
      const double d_num = c_num * ref[t];
      const double d_den = c_den * (p.ref_pow * est[t] - p.dot * ref[t]);
      d_est[c][t] = k * (d_num - d_den);
    }
  }

  std::vector<double> d_u(B);
  std::vector<double> d_mask(N * B);
  std::vector<double> d_logit(N * B);
  std::vector<double> d_hidden(H);
  std::vector<double> d_act(H);
  std::vector<double> d_latent(B);
  for (std::size_t f = 0; f < cache.num_frames; ++f) {
    const double* z = &cache.latent[f * B];
    const double* h = &cache.hidden[f * H];
    const double* m = &cache.masks[f * N * B];
    const double* u = &cache.channel_latent[f * N * B];
    const std::size_t start = f * F;
    const std::size_t valid = std::min(F, cache.input_len - std::min(cache.input_len, start));

    std::fill(d_latent.begin(), d_latent.end(), 0.0);
    for (std::size_t c = 0; c < N; ++c) {
      // through the decoder
      std::fill(d_u.begin(), d_u.end(), 0.0);
      for (std::size_t i = 0; i < valid; ++i) {
        const double g = d_est[c][start + i];
        if (g == 0.0) continue;
        for (std::size_t b = 0; b < B; ++b) {
          grads.decoder(i, b) += g * u[c * B + b];
          d_u[b] += g * params.decoder(i, b);
        }
      }
      // u = m .* z
      for (std::size_t b = 0; b < B; ++b) {
        d_mask[c * B + b] = d_u[b] * z[b];
        d_latent[b] += d_u[b] * m[c * B + b];
      }
    }
    // softmax across channels per bin
    for (std::size_t b = 0; b < B; ++b) {
      double weighted = 0.0;
      for (std::size_t c = 0; c < N; ++c)
        weighted += m[c * B + b] * d_mask[c * B + b];
      for (std::size_t c = 0; c < N; ++c)
        d_logit[c * B + b] = m[c * B + b] * (d_mask[c * B + b] - weighted);
    }
    // logits = W2 h + b2
    std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
    for (std::size_t cb = 0; cb < N * B; ++cb) {
      const double g = d_logit[cb];
      if (g == 0.0) continue;
      grads.mask_b2[cb] += g;
      for (std::size_t j = 0; j < H; ++j) {
        grads.mask_w2(cb, j) += g * h[j];
        d_hidden[j] += g * params.mask_w2(cb, j);
      }
    }
    // h = tanh(W1 z + b1)
    for (std::size_t j = 0; j < H; ++j) {
      const double g = d_hidden[j] * (1.0 - h[j] * h[j]);
      d_act[j] = g;
      grads.mask_b1[j] += g;
      for (std::size_t b = 0; b < B; ++b) {
        grads.mask_w1(j, b) += g * z[b];
        d_latent[b] += g * params.mask_w1(j, b);
      }
    }
    // z = E x
    const double* frame = &cache.padded[f * F];
    for (std::size_t b = 0; b < B; ++b) {
      const double g = d_latent[b];
      if (g == 0.0) continue;
      for (std::size_t i = 0; i < F; ++i) grads.encoder(b, i) += g * frame[i];
    }
  }
  return grads;
}

// Standard adaptive-moment update, in place.
inline void adam_step(SeparatorParams& params, const SeparatorParams& grads,
                      OptimizerState& state) {
  if (!params.same_shape(grads) || !params.same_shape(state.m))
    throw ShapeMismatch("adam_step: parameter/gradient shapes differ");
  state.step += 1;
  const double b1 = state.hyper.beta1;
  const double b2 = state.hyper.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

  auto update = [&](std::vector<double>& p, const std::vector<double>& g,
                    std::vector<double>& m, std::vector<double>& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p[i] -= state.hyper.lr * m_hat / (std::sqrt(v_hat) + state.hyper.eps);
    }
  };
  update(params.encoder.data, grads.encoder.data, state.m.encoder.data,
         state.v.encoder.data);
  update(params.mask_w1.data, grads.mask_w1.data, state.m.mask_w1.data,
         state.v.mask_w1.data);
  update(params.mask_b1, grads.mask_b1, state.m.mask_b1, state.v.mask_b1);
  update(params.mask_w2.data, grads.mask_w2.data, state.m.mask_w2.data,
         state.v.mask_w2.data);
  update(params.mask_b2, grads.mask_b2, state.m.mask_b2, state.v.mask_b2);
  update(params.decoder.data, grads.decoder.data, state.m.decoder.data,
         state.v.decoder.data);
}

// Accumulate scaled gradients: acc += scale * g.
inline void accumulate_grads(SeparatorParams& acc, const SeparatorParams& g,
                             double scale) {
  if (!acc.same_shape(g)) throw ShapeMismatch("accumulate_grads");
  auto add = [&](std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
  };
  add(acc.encoder.data, g.encoder.data);
  add(acc.mask_w1.data, g.mask_w1.data);
  add(acc.mask_b1, g.mask_b1);
  add(acc.mask_w2.data, g.mask_w2.data);
  add(acc.mask_b2, g.mask_b2);
  add(acc.decoder.data, g.decoder.data);
}

}  // namespace pitlab
