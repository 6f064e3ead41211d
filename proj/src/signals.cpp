// src/signals.cpp
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

#include "echolab/signals.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace echolab {
namespace signals {

namespace {
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;
}  // namespace

std::vector<double> hann_periodic(int n) {
  std::vector<double> w(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    w[size_t(i)] = 0.5 * (1.0 - std::cos(2.0 * kPi * double(i) / double(n)));
  return w;
}

Tensor<cplx> stft_channel(std::span<const double> x, const StftConfig& cfg) {
  cfg.validate();
  const size_t t_frames = cfg.num_frames(x.size());
  const size_t k = size_t(cfg.bins());
  const std::vector<double> win = hann_periodic(cfg.win_len);

  Tensor<cplx> out({t_frames, k});
  std::vector<double> frame(size_t(cfg.win_len));
  for (size_t t = 0; t < t_frames; ++t) {
    const double* src = x.data() + t * size_t(cfg.hop);
    for (int i = 0; i < cfg.win_len; ++i)
      frame[size_t(i)] = src[i] * win[size_t(i)];
    std::vector<cplx> spec = rfft(frame, size_t(cfg.fft_len));
    std::copy(spec.begin(), spec.end(), out.row(t));
  }
  return out;
}

ComplexSpec stft(const MultiWave& wave, const StftConfig& cfg) {
  cfg.validate();
  const size_t c = wave.channels();
  const size_t t_frames = cfg.num_frames(wave.frames());
  const size_t k = size_t(cfg.bins());

  ComplexSpec spec;
  spec.data = Tensor<cplx>({c, t_frames, k});
  spec.config = cfg;
  spec.sample_rate = wave.sample_rate;
  for (size_t ch = 0; ch < c; ++ch) {
    Tensor<cplx> one = stft_channel(
        std::span<const double>(wave.channel(ch), wave.frames()), cfg);
    std::copy(one.flat().begin(), one.flat().end(), spec.data.row(ch, 0));
  }
  return spec;
}

MultiWave istft(const ComplexSpec& spec) {
  const StftConfig& cfg = spec.config;
  cfg.validate();
  const size_t c = spec.channels();
  const size_t t_frames = spec.frames();
  ECHOLAB_REQUIRE(spec.bins() == size_t(cfg.bins()), "bin count mismatch");
  const size_t n = cfg.num_samples(t_frames);
  const std::vector<double> win = hann_periodic(cfg.win_len);

  // squared-window overlap-add weight
  std::vector<double> wsum(n, 0.0);
  for (size_t t = 0; t < t_frames; ++t)
    for (int i = 0; i < cfg.win_len; ++i)
      wsum[t * size_t(cfg.hop) + size_t(i)] += win[size_t(i)] * win[size_t(i)];

  // COLA check over the interior (one window length from each edge)
  if (n > 2 * size_t(cfg.win_len)) {
    double lo = 1e300, hi = 0.0;
    for (size_t i = size_t(cfg.win_len); i + size_t(cfg.win_len) < n; ++i) {
      lo = std::min(lo, wsum[i]);
      hi = std::max(hi, wsum[i]);
    }
    ECHOLAB_REQUIRE(lo > 0.0 && (hi - lo) <= 1e-6 * hi,
                    "window/hop is not constant-overlap-add (interior weight ",
                    lo, "..", hi, ")");
  }

  MultiWave wave(c, n, spec.sample_rate);
  std::vector<cplx> frame_spec(size_t(cfg.bins()));
  for (size_t ch = 0; ch < c; ++ch) {
    std::vector<double> acc(n, 0.0);
    for (size_t t = 0; t < t_frames; ++t) {
      const cplx* row = spec.data.row(ch, t);
      std::copy(row, row + cfg.bins(), frame_spec.begin());
      std::vector<double> frame = irfft(frame_spec, size_t(cfg.fft_len));
      double* dst = acc.data() + t * size_t(cfg.hop);
      for (int i = 0; i < cfg.win_len; ++i)
        dst[i] += frame[size_t(i)] * win[size_t(i)];
    }
    const double eps = 1e-8;
    for (size_t i = 0; i < n; ++i)
      wave.channel(ch)[i] = wsum[i] > eps ? acc[i] / wsum[i] : 0.0;
  }
  return wave;
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) {
  return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
}

Tensor<double> mel_filterbank(int n_mels, double f_lo, double f_hi,
                              int fft_len, int sample_rate) {
  ECHOLAB_REQUIRE(n_mels >= 1, "need at least one mel bin");
  ECHOLAB_REQUIRE(f_lo >= 0 && f_lo < f_hi && f_hi <= double(sample_rate) / 2.0,
                  "invalid mel band edges [", f_lo, ", ", f_hi, "] for rate ",
                  sample_rate);
  const int k = fft_len / 2 + 1;
  const double mel_lo = hz_to_mel(f_lo);
  const double mel_hi = hz_to_mel(f_hi);

  std::vector<double> centers_hz(size_t(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    centers_hz[size_t(i)] = mel_to_hz(
        mel_lo + (mel_hi - mel_lo) * double(i) / double(n_mels + 1));

  Tensor<double> fb({size_t(n_mels), size_t(k)});
  for (int m = 0; m < n_mels; ++m) {
    const double left = centers_hz[size_t(m)];
    const double center = centers_hz[size_t(m) + 1];
    const double right = centers_hz[size_t(m) + 2];
    double peak = 0.0;
    for (int b = 0; b < k; ++b) {
      const double f = double(b) * double(sample_rate) / double(fft_len);
      double v = 0.0;
      if (f > left && f < center)
        v = (f - left) / (center - left);
      else if (f >= center && f < right)
        v = (right - f) / (right - center);
      fb.at(size_t(m), size_t(b)) = v;
      peak = std::max(peak, v);
    }
    ECHOLAB_REQUIRE(peak > 0.0, "mel filter ", m,
                    " has empty support; fft resolution too coarse");
    for (int b = 0; b < k; ++b) fb.at(size_t(m), size_t(b)) /= peak;
  }
  return fb;
}

FeatTensor logmel(const ComplexSpec& spec, const Tensor<double>& fb) {
  const size_t c = spec.channels(), t = spec.frames(), k = spec.bins();
  ECHOLAB_REQUIRE(fb.ndim() == 2 && fb.dim(1) == k,
                  "filterbank bins do not match spectrum");
  const size_t n_mels = fb.dim(0);

  Eigen::Map<const MatX> fbm(fb.data(), Eigen::Index(k), Eigen::Index(n_mels));
  // fb is stored row-major [n_mels x k]; the column-major map above reads it
  // as its transpose [k x n_mels], which is what the GEMM below needs.

  FeatTensor out;
  out.data = Tensor<double>({c, t, n_mels});
  out.kind = FeatKind::kMag;
  out.dims_meta = {c, n_mels, 1};
  MatX mag(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k));
  for (size_t ch = 0; ch < c; ++ch) {
    for (size_t tt = 0; tt < t; ++tt) {
      const cplx* row = spec.data.row(ch, tt);
      for (size_t b = 0; b < k; ++b)
        mag(Eigen::Index(tt), Eigen::Index(b)) = std::abs(row[b]);
    }
    MatX mel = mag * fbm;  // [t x n_mels]
    for (size_t tt = 0; tt < t; ++tt)
      for (size_t b = 0; b < n_mels; ++b)
        out.data.at(ch, tt, b) =
            std::log(mel(Eigen::Index(tt), Eigen::Index(b)) + kLogFloor);
  }
  return out;
}

FeatTensor phase_features(const ComplexSpec& spec, int n_bins) {
  const size_t c = spec.channels(), t = spec.frames();
  ECHOLAB_REQUIRE(spec.bins() >= size_t(n_bins), "spectrum has fewer than ",
                  n_bins, " bins");
  FeatTensor out;
  out.data = Tensor<double>({c, t, size_t(n_bins)});
  out.kind = FeatKind::kPhase;
  out.dims_meta = {c, size_t(n_bins), 1};
  for (size_t ch = 0; ch < c; ++ch)
    for (size_t tt = 0; tt < t; ++tt) {
      const cplx* row = spec.data.row(ch, tt);
      for (int b = 0; b < n_bins; ++b) {
        double a = std::arg(row[size_t(b)]);
        if (a >= kPi) a -= 2.0 * kPi;  // fold +pi onto -pi
        out.data.at(ch, tt, size_t(b)) = a;
      }
    }
  return out;
}

FeatTensor assemble_features(const FeatTensor& mag, const FeatTensor& phase) {
  ECHOLAB_REQUIRE(mag.data.ndim() == 3 && phase.data.ndim() == 3,
                  "assemble expects [C x T x D] inputs");
  ECHOLAB_REQUIRE(mag.data.dim(0) == phase.data.dim(0) &&
                      mag.data.dim(1) == phase.data.dim(1),
                  "mag/phase channel or frame mismatch");
  const size_t c = mag.data.dim(0), t = mag.data.dim(1);
  const size_t dm = mag.data.dim(2), dp = phase.data.dim(2);

  FeatTensor out;
  out.data = Tensor<double>({c, t, dm + dp});
  out.kind = FeatKind::kCombined;
  out.dims_meta = {c, dm + dp, 1};
  for (size_t ch = 0; ch < c; ++ch)
    for (size_t tt = 0; tt < t; ++tt) {
      double* dst = out.data.row(ch, tt);
      std::copy(mag.data.row(ch, tt), mag.data.row(ch, tt) + dm, dst);
      std::copy(phase.data.row(ch, tt), phase.data.row(ch, tt) + dp, dst + dm);
    }
  return out;
}

void split_features(const FeatTensor& combined, FeatTensor* mag,
                    FeatTensor* phase) {
  ECHOLAB_REQUIRE(combined.kind == FeatKind::kCombined &&
                      combined.data.ndim() == 3,
                  "split expects a combined [C x T x D] tensor");
  const size_t c = combined.data.dim(0), t = combined.data.dim(1);
  const size_t d = combined.data.dim(2);
  ECHOLAB_REQUIRE(d % 2 == 0, "combined feature width must be even");
  const size_t half = d / 2;
  mag->data = Tensor<double>({c, t, half});
  mag->kind = FeatKind::kMag;
  mag->dims_meta = {c, half, 1};
  phase->data = Tensor<double>({c, t, half});
  phase->kind = FeatKind::kPhase;
  phase->dims_meta = {c, half, 1};
  for (size_t ch = 0; ch < c; ++ch)
    for (size_t tt = 0; tt < t; ++tt) {
      const double* src = combined.data.row(ch, tt);
      std::copy(src, src + half, mag->data.row(ch, tt));
      std::copy(src + half, src + d, phase->data.row(ch, tt));
    }
}

FeatStats compute_stats(const std::vector<const FeatTensor*>& train_feats) {
  ECHOLAB_REQUIRE(!train_feats.empty(), "no feature tensors given");
  const size_t d = train_feats.front()->data.dim(
      train_feats.front()->data.ndim() - 1);
  std::vector<double> sum(d, 0.0), sumsq(d, 0.0);
  size_t count = 0;
  for (const FeatTensor* f : train_feats) {
    ECHOLAB_REQUIRE(f->data.ndim() >= 2, "feature tensor must have frames");
    ECHOLAB_REQUIRE(f->data.dim(f->data.ndim() - 1) == d,
                    "feature width mismatch across tensors");
    const size_t rows = f->data.size() / d;
    const double* p = f->data.data();
    for (size_t r = 0; r < rows; ++r, p += d)
      for (size_t i = 0; i < d; ++i) {
        sum[i] += p[i];
        sumsq[i] += p[i] * p[i];
      }
    count += rows;
  }
  ECHOLAB_REQUIRE(count > 0, "no frames in training features");

  FeatStats stats;
  stats.mean.resize(d);
  stats.stddev.resize(d);
  for (size_t i = 0; i < d; ++i) {
    stats.mean[i] = sum[i] / double(count);
    double var = sumsq[i] / double(count) - stats.mean[i] * stats.mean[i];
    stats.stddev[i] = std::sqrt(std::max(var, 0.0));
    if (stats.stddev[i] < 1e-5) stats.stddev[i] = 1e-5;
  }
  return stats;
}

namespace {

// Number of leading (magnitude) dimensions z-scoring applies to. Phase
// dimensions of combined tensors stay raw.
size_t norm_width(const FeatTensor& feat) {
  ECHOLAB_REQUIRE(feat.kind != FeatKind::kDownsampled,
                  "normalize before downsampling, not after");
  const size_t d = feat.data.dim(feat.data.ndim() - 1);
  if (feat.kind == FeatKind::kCombined) return d / 2;
  if (feat.kind == FeatKind::kPhase) return 0;
  return d;
}

}  // namespace

FeatTensor normalize(const FeatTensor& feat, const FeatStats& stats) {
  const size_t apply = norm_width(feat);
  ECHOLAB_REQUIRE(stats.mean.size() >= apply && stats.stddev.size() >= apply,
                  "stats narrower than feature tensor");
  FeatTensor out = feat;
  const size_t d = feat.data.dim(feat.data.ndim() - 1);
  const size_t rows = feat.data.size() / d;
  double* p = out.data.data();
  for (size_t r = 0; r < rows; ++r, p += d)
    for (size_t i = 0; i < apply; ++i)
      p[i] = (p[i] - stats.mean[i]) / stats.stddev[i];
  return out;
}

FeatTensor denormalize(const FeatTensor& feat, const FeatStats& stats) {
  const size_t apply = norm_width(feat);
  ECHOLAB_REQUIRE(stats.mean.size() >= apply && stats.stddev.size() >= apply,
                  "stats narrower than feature tensor");
  FeatTensor out = feat;
  const size_t d = feat.data.dim(feat.data.ndim() - 1);
  const size_t rows = feat.data.size() / d;
  double* p = out.data.data();
  for (size_t r = 0; r < rows; ++r, p += d)
    for (size_t i = 0; i < apply; ++i) p[i] = p[i] * stats.stddev[i] + stats.mean[i];
  return out;
}

FeatTensor downsample(const FeatTensor& feat, int dr) {
  ECHOLAB_REQUIRE(feat.data.ndim() == 3, "downsample expects [C x T x F]");
  ECHOLAB_REQUIRE(dr >= 1, "d_rate must be >= 1");
  const size_t c = feat.data.dim(0), t = feat.data.dim(1), f = feat.data.dim(2);
  ECHOLAB_REQUIRE(t >= size_t(dr), "too few frames (", t, ") for d_rate ", dr);
  const size_t t_out = t / size_t(dr);

  FeatTensor out;
  out.data = Tensor<double>({t_out, f * size_t(dr) * c});
  out.kind = FeatKind::kDownsampled;
  out.dims_meta = {c, f, dr};
  for (size_t s = 0; s < t_out; ++s) {
    double* dst = out.data.row(s);
    for (int r = 0; r < dr; ++r)
      for (size_t ch = 0; ch < c; ++ch) {
        const double* src = feat.data.row(ch, s * size_t(dr) + size_t(r));
        std::copy(src, src + f, dst);
        dst += f;
      }
  }
  return out;
}

FeatTensor upsample(const FeatTensor& feat) {
  ECHOLAB_REQUIRE(feat.kind == FeatKind::kDownsampled && feat.data.ndim() == 2,
                  "upsample expects a downsampled [T' x F*dr*C] tensor");
  const size_t c = feat.dims_meta.channels, f = feat.dims_meta.feat_dim;
  const int dr = feat.dims_meta.d_rate;
  const size_t t_sup = feat.data.dim(0);
  ECHOLAB_REQUIRE(feat.data.dim(1) == f * size_t(dr) * c,
                  "dims_meta inconsistent with tensor width");

  FeatTensor out;
  out.data = Tensor<double>({c, t_sup * size_t(dr), f});
  out.kind = FeatKind::kCombined;
  if (f <= 80) out.kind = FeatKind::kMag;
  out.dims_meta = {c, f, 1};
  for (size_t s = 0; s < t_sup; ++s) {
    const double* src = feat.data.row(s);
    for (int r = 0; r < dr; ++r)
      for (size_t ch = 0; ch < c; ++ch) {
        std::copy(src, src + f, out.data.row(ch, s * size_t(dr) + size_t(r)));
        src += f;
      }
  }
  return out;
}

Tensor<double> mel_to_linear(const Tensor<double>& mel_mag,
                             const Tensor<double>& fb) {
  ECHOLAB_REQUIRE(mel_mag.ndim() == 2 && fb.ndim() == 2 &&
                      mel_mag.dim(1) == fb.dim(0),
                  "mel frames do not match filterbank");
  const size_t t = mel_mag.dim(0), n_mels = fb.dim(0), k = fb.dim(1);

  // row-major [n_mels x k] viewed column-major is fb^T [k x n_mels]
  Eigen::Map<const MatX> fbt(fb.data(), Eigen::Index(k), Eigen::Index(n_mels));
  MatX gram = fbt.transpose() * fbt;  // [n_mels x n_mels]
  Eigen::LDLT<MatX> solver(gram);
  ECHOLAB_REQUIRE(solver.info() == Eigen::Success,
                  "filterbank gram matrix is singular");

  Eigen::Map<const MatX> melt(mel_mag.data(), Eigen::Index(n_mels),
                              Eigen::Index(t));  // mel_mag^T
  MatX lin = fbt * solver.solve(melt);  // [k x t]
  Tensor<double> out({t, k});
  for (size_t tt = 0; tt < t; ++tt)
    for (size_t b = 0; b < k; ++b)
      out.at(tt, b) = std::max(lin(Eigen::Index(b), Eigen::Index(tt)), 0.0);
  return out;
}

MultiWave griffin_lim(const Tensor<double>& mag_spec, const StftConfig& cfg,
                      int iters, int sample_rate,
                      std::vector<double>* convergence) {
  cfg.validate();
  ECHOLAB_REQUIRE(mag_spec.ndim() == 2 && mag_spec.dim(1) == size_t(cfg.bins()),
                  "magnitude must be [T x K]");
  ECHOLAB_REQUIRE(iters >= 1, "need at least one iteration");
  const size_t t = mag_spec.dim(0), k = mag_spec.dim(1);

  double mag_norm = 0.0;
  for (double v : mag_spec.flat()) mag_norm += v * v;
  mag_norm = std::sqrt(mag_norm);

  ComplexSpec spec;
  spec.data = Tensor<cplx>({1, t, k});
  spec.config = cfg;
  spec.sample_rate = sample_rate;
  // zero-phase start
  for (size_t i = 0; i < mag_spec.size(); ++i)
    spec.data[i] = cplx(mag_spec[i], 0.0);

  MultiWave wave;
  if (convergence) convergence->clear();
  for (int it = 0; it < iters; ++it) {
    wave = istft(spec);
    ComplexSpec est = stft(wave, cfg);
    double err = 0.0;
    for (size_t i = 0; i < mag_spec.size(); ++i) {
      const double d = std::abs(est.data[i]) - mag_spec[i];
      err += d * d;
      const double a = std::abs(est.data[i]);
      const cplx ph = a > 0.0 ? est.data[i] / a : cplx(1.0, 0.0);
      spec.data[i] = mag_spec[i] * ph;
    }
    if (convergence)
      convergence->push_back(mag_norm > 0.0 ? std::sqrt(err) / mag_norm : 0.0);
  }
  return istft(spec);
}

}  // namespace signals
}  // namespace echolab
