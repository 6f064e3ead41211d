// include/echolab/signals.hpp
//
// Copyright 2026 The Echolab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <complex>
#include <span>
#include <vector>

#include "echolab/fft.hpp"
#include "echolab/tensor.hpp"
#include "echolab/wave.hpp"

namespace echolab {
namespace signals {

struct StftConfig {
  int win_len = 1200;  // periodic Hann
  int fft_len = 2048;
  int hop = 300;

  void validate() const {
    ECHOLAB_REQUIRE(hop > 0 && win_len > 0 && fft_len > 0 &&
                        hop <= win_len && win_len <= fft_len,
                    "invalid stft config: need 0 < hop <= win <= fft");
  }
  int bins() const { return fft_len / 2 + 1; }
  // Frames for an n-sample signal: floor((n - win) / hop) + 1.
  size_t num_frames(size_t n) const {
    ECHOLAB_REQUIRE(n >= size_t(win_len), "signal too short for one window (",
                    n, " < ", win_len, " samples)");
    return (n - size_t(win_len)) / size_t(hop) + 1;
  }
  size_t num_samples(size_t frames) const {
    return (frames - 1) * size_t(hop) + size_t(win_len);
  }
};

// Per-channel complex time-frequency tensor, data is [C x T x K].
struct ComplexSpec {
  Tensor<cplx> data;
  StftConfig config;
  int sample_rate = 16000;

  size_t channels() const { return data.dim(0); }
  size_t frames() const { return data.dim(1); }
  size_t bins() const { return data.dim(2); }
};

enum class FeatKind { kMag, kPhase, kCombined, kDownsampled, kTarget };

// Layout of a feature tensor: per-channel per-frame width and, after
// downsampling, the stacking factor. Super-frames flatten as
// [frame-within-superframe][channel][feature] with feature innermost.
struct DimsMeta {
  size_t channels = 1;
  size_t feat_dim = 0;
  int d_rate = 1;
};

// Real feature sequence, [C x T x D] before downsampling, [T' x D'] after.
struct FeatTensor {
  Tensor<double> data;
  FeatKind kind = FeatKind::kMag;
  DimsMeta dims_meta;
};

struct FeatStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // floored at 1e-5
};

std::vector<double> hann_periodic(int n);

// Single channel helper; frame t covers samples [t*hop, t*hop + win).
Tensor<cplx> stft_channel(std::span<const double> x, const StftConfig& cfg);
ComplexSpec stft(const MultiWave& wave, const StftConfig& cfg);

// Weighted overlap-add with synthesis-window normalization. Output length is
// (T-1)*hop + win per channel. Throws if the window/hop pair does not satisfy
// constant overlap-add in the interior.
MultiWave istft(const ComplexSpec& spec);

// Triangular filters with peak 1.0, centers equally spaced on the HTK mel
// scale mel(f) = 2595*log10(1 + f/700). Returns [n_mels x (fft/2+1)].
Tensor<double> mel_filterbank(int n_mels, double f_lo, double f_hi,
                              int fft_len, int sample_rate);

double hz_to_mel(double f);
double mel_to_hz(double m);

constexpr double kLogFloor = 1e-10;

// log(fb * |spec| + 1e-10), natural log; [C x T x n_mels].
FeatTensor logmel(const ComplexSpec& spec, const Tensor<double>& fb);

// Phase of the first n_bins one-sided bins, values in [-pi, pi); [C x T x n_bins].
FeatTensor phase_features(const ComplexSpec& spec, int n_bins = 80);

// concat(mag, phase) along the last dimension, mag first.
FeatTensor assemble_features(const FeatTensor& mag, const FeatTensor& phase);
void split_features(const FeatTensor& combined, FeatTensor* mag,
                    FeatTensor* phase);

// Per-dimension mean/std pooled over channels and frames of the inputs.
FeatStats compute_stats(const std::vector<const FeatTensor*>& train_feats);

// Z-scores the magnitude dimensions only; phase dimensions pass through.
FeatTensor normalize(const FeatTensor& feat, const FeatStats& stats);
FeatTensor denormalize(const FeatTensor& feat, const FeatStats& stats);

// [C x T x F] -> [floor(T/dr) x F*dr*C]; trailing remainder frames dropped.
FeatTensor downsample(const FeatTensor& feat, int dr);
// Exact layout inverse of downsample: [T' x F*dr*C] -> [C x T'*dr x F].
FeatTensor upsample(const FeatTensor& feat);

// Clipped pseudo-inverse of the filterbank applied per frame; input and
// output are linear-domain magnitudes ([T x n_mels] -> [T x K]).
Tensor<double> mel_to_linear(const Tensor<double>& mel_mag,
                             const Tensor<double>& fb);

// Phase recovery from a magnitude spectrogram [T x K]; zero-phase init so the
// result is deterministic. convergence, when given, receives per-iteration
// relative spectral error.
MultiWave griffin_lim(const Tensor<double>& mag_spec, const StftConfig& cfg,
                      int iters, int sample_rate,
                      std::vector<double>* convergence = nullptr);

}  // namespace signals
}  // namespace echolab
