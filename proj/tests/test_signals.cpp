// tests/test_signals.cpp
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

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "echolab/signals.hpp"
#include "echolab/testsig.hpp"
#include "oracles.hpp"

using namespace echolab;
using namespace echolab::signals;

namespace {

MultiWave random_wave(uint64_t seed, size_t n, int rate = 16000,
                      size_t channels = 1) {
  Rng rng(seed);
  MultiWave w(channels, n, rate);
  for (size_t c = 0; c < channels; ++c)
    for (size_t i = 0; i < n; ++i) w.channel(c)[i] = 0.25 * rng.normal();
  return w;
}

}  // namespace

TEST_CASE("stft framing and zero input") {
  StftConfig cfg;
  MultiWave zero(1, 48000, 16000);
  ComplexSpec spec = stft(zero, cfg);
  CHECK(spec.frames() == 157);
  CHECK(spec.bins() == 1025);
  double energy = 0;
  for (const auto& v : spec.data.flat()) energy += std::norm(v);
  CHECK(energy == 0.0);
}

TEST_CASE("stft too short") {
  StftConfig cfg;
  MultiWave w(1, 1199, 16000);
  CHECK_THROWS_AS(stft(w, cfg), DataError);
}

TEST_CASE("stft frame matches naive dft of the windowed frame") {
  StftConfig cfg;
  MultiWave w = random_wave(7, 2400);
  ComplexSpec spec = stft(w, cfg);

  const auto win = hann_periodic(cfg.win_len);
  // frame 2 covers samples [600, 1800)
  std::vector<double> frame(size_t(cfg.fft_len), 0.0);
  for (int i = 0; i < cfg.win_len; ++i)
    frame[size_t(i)] = w.channel(0)[600 + i] * win[size_t(i)];
  auto ref = oracle::naive_dft(frame, size_t(cfg.fft_len));

  double num = 0, den = 0;
  for (size_t k = 0; k < spec.bins(); ++k) {
    num += std::norm(spec.data.at(0, 2, k) - ref[k]);
    den += std::norm(ref[k]);
  }
  CHECK(std::sqrt(num / den) < 1e-10);
}

TEST_CASE("bin-center sinusoid concentrates energy") {
  // true bin centers need win == fft (no zero padding)
  StftConfig cfg;
  cfg.win_len = 2048;
  cfg.fft_len = 2048;
  cfg.hop = 512;
  const double f = 64.0 * 16000.0 / 2048.0;  // exact center of bin 64
  MultiWave w(1, 16000, 16000);
  for (size_t i = 0; i < w.frames(); ++i)
    w.channel(0)[i] = std::sin(2.0 * kPi * f * double(i) / 16000.0);
  ComplexSpec spec = stft(w, cfg);

  // the Hann window smears the line over exactly bins 63..65
  double total = 0, central = 0;
  for (size_t k = 0; k < spec.bins(); ++k) {
    const double e =
        std::norm(spec.data.at(0, 10, k)) * (k == 0 || k == 1024 ? 1.0 : 2.0);
    total += e;
    if (k >= 63 && k <= 65) central += e;
  }
  CHECK(central / total > 0.99);
  CHECK(std::norm(spec.data.at(0, 10, 64)) / total > 0.3);  // dominant line
}

TEST_CASE("istft round trip and linearity") {
  StftConfig cfg;
  MultiWave x = random_wave(11, 16000);
  ComplexSpec sx = stft(x, cfg);
  MultiWave rec = istft(sx);

  const size_t lo = size_t(cfg.win_len);
  const size_t hi = rec.frames() - size_t(cfg.win_len);
  std::vector<double> a(rec.channel(0) + lo, rec.channel(0) + hi);
  std::vector<double> b(x.channel(0) + lo, x.channel(0) + hi);
  CHECK(oracle::rel_l2(a, b) < 1e-9);

  // linearity
  MultiWave y = random_wave(13, 16000);
  MultiWave mix(1, 16000, 16000);
  for (size_t i = 0; i < 16000; ++i)
    mix.channel(0)[i] = 2.5 * x.channel(0)[i] - 0.75 * y.channel(0)[i];
  ComplexSpec sy = stft(y, cfg);
  ComplexSpec sm = stft(mix, cfg);
  double num = 0, den = 0;
  for (size_t i = 0; i < sm.data.size(); ++i) {
    const cplx want = 2.5 * sx.data[i] - 0.75 * sy.data[i];
    num += std::norm(sm.data[i] - want);
    den += std::norm(want);
  }
  CHECK(std::sqrt(num / den) < 1e-12);
}

TEST_CASE("istft of zero spectrum is zero") {
  StftConfig cfg;
  ComplexSpec spec;
  spec.data = Tensor<cplx>({1, 10, size_t(cfg.bins())});
  spec.config = cfg;
  spec.sample_rate = 16000;
  MultiWave w = istft(spec);
  for (size_t i = 0; i < w.frames(); ++i) CHECK(w.channel(0)[i] == 0.0);
}

TEST_CASE("single frame istft recovers the signal where the window lives") {
  StftConfig cfg;
  MultiWave x = random_wave(3, size_t(cfg.win_len));
  ComplexSpec s = stft(x, cfg);
  CHECK(s.frames() == 1);
  MultiWave rec = istft(s);
  const auto win = hann_periodic(cfg.win_len);
  for (int i = 0; i < cfg.win_len; ++i) {
    if (win[size_t(i)] * win[size_t(i)] <= 1e-8) continue;
    CHECK(rec.channel(0)[size_t(i)] ==
          doctest::Approx(x.channel(0)[size_t(i)]).epsilon(1e-9));
  }
}

TEST_CASE("non-cola window/hop is rejected") {
  StftConfig cfg;
  cfg.hop = 700;  // hann^2 with hop 700/1200 does not overlap-add flat
  MultiWave x = random_wave(5, 16000);
  ComplexSpec s = stft(x, cfg);
  CHECK_THROWS_AS(istft(s), DataError);
}

TEST_CASE("parseval per frame") {
  StftConfig cfg;
  MultiWave x = random_wave(17, 4800);
  ComplexSpec s = stft(x, cfg);
  const auto win = hann_periodic(cfg.win_len);

  double time_energy = 0;
  for (int i = 0; i < cfg.win_len; ++i) {
    const double v = x.channel(0)[size_t(2 * cfg.hop + i)] * win[size_t(i)];
    time_energy += v * v;
  }
  double spec_energy = 0;
  for (size_t k = 0; k < s.bins(); ++k)
    spec_energy +=
        std::norm(s.data.at(0, 2, k)) * (k == 0 || k + 1 == s.bins() ? 1.0 : 2.0);
  spec_energy /= double(cfg.fft_len);
  CHECK(std::abs(spec_energy - time_energy) < 1e-9 * time_energy);
}

TEST_CASE("mel scale closed form and filter shape") {
  CHECK(hz_to_mel(80.0) == doctest::Approx(121.9561).epsilon(1e-4));
  CHECK(hz_to_mel(7000.0) == doctest::Approx(2702.414).epsilon(1e-4));

  Tensor<double> fb = mel_filterbank(80, 80.0, 7000.0, 2048, 16000);
  REQUIRE(fb.shape() == std::vector<size_t>{80, 1025});

  int prev_center = -1;
  for (size_t m = 0; m < 80; ++m) {
    double peak = 0;
    int first = -1, last = -1, center = -1;
    for (int k = 0; k < 1025; ++k) {
      const double v = fb.at(m, size_t(k));
      CHECK(v >= 0.0);
      if (v > 0) {
        if (first < 0) first = k;
        last = k;
      }
      if (v > peak) {
        peak = v;
        center = k;
      }
    }
    CHECK(peak == 1.0);  // peak-normalized triangles
    CHECK(center > prev_center);
    prev_center = center;
    // single contiguous support, unimodal around the center
    for (int k = first; k < center; ++k)
      CHECK(fb.at(m, size_t(k)) <= fb.at(m, size_t(k + 1)) + 1e-12);
    for (int k = center; k < last; ++k)
      CHECK(fb.at(m, size_t(k)) >= fb.at(m, size_t(k + 1)) - 1e-12);
  }

  // union of supports covers all bins strictly inside (80, 7000) Hz
  for (int k = 0; k < 1025; ++k) {
    const double f = double(k) * 16000.0 / 2048.0;
    if (f <= 80.0 || f >= 7000.0) continue;
    double s = 0;
    for (size_t m = 0; m < 80; ++m) s += fb.at(m, size_t(k));
    CHECK(s > 0.0);
  }

  CHECK_THROWS_AS(mel_filterbank(80, 7000.0, 80.0, 2048, 16000), DataError);
  CHECK_THROWS_AS(mel_filterbank(80, 80.0, 9000.0, 2048, 16000), DataError);
}

TEST_CASE("logmel floor, scaling shift, shape") {
  StftConfig cfg;
  Tensor<double> fb = mel_filterbank(80, 80.0, 7000.0, 2048, 16000);

  MultiWave zero(4, 48000, 16000);
  FeatTensor lm0 = logmel(stft(zero, cfg), fb);
  REQUIRE(lm0.data.shape() == std::vector<size_t>{4, 157, 80});
  for (double v : lm0.data.flat())
    CHECK(v == doctest::Approx(std::log(1e-10)).epsilon(1e-12));

  MultiWave x = random_wave(23, 48000, 16000, 4);
  MultiWave x10 = x;
  for (double& v : x10.samples.flat()) v *= 10.0;
  FeatTensor a = logmel(stft(x, cfg), fb);
  FeatTensor b = logmel(stft(x10, cfg), fb);
  // where energy is far above the floor the shift is ln 10
  size_t checked = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    if (a.data[i] < -18.0) continue;
    CHECK(b.data[i] - a.data[i] == doctest::Approx(std::log(10.0)).epsilon(1e-6));
    if (++checked > 500) break;
  }
  CHECK(checked > 100);
}

TEST_CASE("phase features") {
  StftConfig cfg;
  ComplexSpec spec;
  spec.data = Tensor<cplx>({1, 3, size_t(cfg.bins())});
  spec.config = cfg;
  spec.sample_rate = 16000;
  for (size_t k = 0; k < spec.bins(); ++k) {
    spec.data.at(0, 0, k) = cplx(2.0, 0.0);   // real positive
    spec.data.at(0, 1, k) = cplx(0.0, 3.0);   // imaginary positive
    spec.data.at(0, 2, k) = cplx(-1.0, 0.0);  // the +pi edge case
  }
  FeatTensor ph = phase_features(spec, 80);
  REQUIRE(ph.data.shape() == std::vector<size_t>{1, 3, 80});
  for (size_t k = 0; k < 80; ++k) {
    CHECK(ph.data.at(0, 0, k) == 0.0);
    CHECK(ph.data.at(0, 1, k) == doctest::Approx(kPi / 2).epsilon(1e-12));
    CHECK(ph.data.at(0, 2, k) >= -kPi);
    CHECK(ph.data.at(0, 2, k) < kPi);
  }
}

TEST_CASE("assemble and split features") {
  StftConfig cfg;
  Tensor<double> fb = mel_filterbank(80, 80.0, 7000.0, 2048, 16000);
  MultiWave x = random_wave(29, 48000, 16000, 4);
  ComplexSpec spec = stft(x, cfg);
  FeatTensor mag = logmel(spec, fb);
  FeatTensor ph = phase_features(spec, 80);
  FeatTensor both = assemble_features(mag, ph);
  REQUIRE(both.data.shape() == std::vector<size_t>{4, 157, 160});
  CHECK(both.data.at(2, 5, 0) == mag.data.at(2, 5, 0));
  CHECK(both.data.at(2, 5, 80) == ph.data.at(2, 5, 0));

  FeatTensor mag2, ph2;
  split_features(both, &mag2, &ph2);
  CHECK(mag2.data.flat() == mag.data.flat());
  CHECK(ph2.data.flat() == ph.data.flat());
}

TEST_CASE("stats and normalization") {
  StftConfig cfg;
  Tensor<double> fb = mel_filterbank(80, 80.0, 7000.0, 2048, 16000);
  MultiWave x = random_wave(31, 24000, 16000, 2);
  ComplexSpec spec = stft(x, cfg);
  FeatTensor both = assemble_features(logmel(spec, fb), phase_features(spec, 80));

  FeatStats stats = compute_stats({&both});
  FeatTensor norm = normalize(both, stats);

  const size_t rows = norm.data.dim(0) * norm.data.dim(1);
  for (size_t f : {size_t(0), size_t(40), size_t(79)}) {
    double s = 0, ss = 0;
    const double* p = norm.data.data();
    for (size_t r = 0; r < rows; ++r) {
      const double v = p[r * 160 + f];
      s += v;
      ss += v * v;
    }
    CHECK(std::abs(s / double(rows)) < 1e-9);
    CHECK(ss / double(rows) == doctest::Approx(1.0).epsilon(1e-6));
  }
  // phase dims pass through untouched
  for (size_t r = 0; r < rows; ++r)
    for (size_t f = 80; f < 160; ++f)
      CHECK(norm.data[r * 160 + f] == both.data[r * 160 + f]);

  FeatTensor back = denormalize(norm, stats);
  for (size_t i = 0; i < back.data.size(); ++i)
    CHECK(back.data[i] == doctest::Approx(both.data[i]).epsilon(1e-12));

  // constant dimension: std floored, normalized value 0
  FeatTensor constant;
  constant.data = Tensor<double>({1, 5, 4});
  constant.kind = FeatKind::kMag;
  constant.dims_meta = {1, 4, 1};
  for (auto& v : constant.data.flat()) v = 3.25;
  FeatStats cs = compute_stats({&constant});
  CHECK(cs.stddev[0] == 1e-5);
  FeatTensor cn = normalize(constant, cs);
  for (double v : cn.data.flat()) CHECK(v == 0.0);

  CHECK_THROWS_AS(compute_stats({}), DataError);
}

TEST_CASE("downsample layout") {
  FeatTensor f;
  const size_t c = 4, t = 157, d = 160;
  f.data = Tensor<double>({c, t, d});
  f.kind = FeatKind::kCombined;
  f.dims_meta = {c, d, 1};
  for (size_t ch = 0; ch < c; ++ch)
    for (size_t tt = 0; tt < t; ++tt)
      for (size_t k = 0; k < d; ++k)
        f.data.at(ch, tt, k) = double(ch) * 1e6 + double(tt) * 1e3 + double(k);

  FeatTensor y = downsample(f, 3);
  REQUIRE(y.data.shape() == std::vector<size_t>{52, 1920});
  // super-frame s, inner order [frame r][channel c][feature k]
  for (size_t s : {size_t(0), size_t(17), size_t(51)})
    for (size_t r = 0; r < 3; ++r)
      for (size_t ch = 0; ch < c; ++ch)
        for (size_t k : {size_t(0), size_t(79), size_t(159)})
          CHECK(y.data.at(s, (r * c + ch) * d + k) ==
                f.data.at(ch, s * 3 + r, k));

  // exact layout inverse
  FeatTensor up = upsample(y);
  REQUIRE(up.data.shape() == std::vector<size_t>{c, 156, d});
  FeatTensor y2 = downsample(up, 3);
  CHECK(y2.data.flat() == y.data.flat());

  // dr = 1 flattens channels only
  FeatTensor flat = downsample(f, 1);
  REQUIRE(flat.data.shape() == std::vector<size_t>{157, 640});
  CHECK(flat.data.at(9, 0 * d + 5) == f.data.at(0, 9, 5));
  CHECK(flat.data.at(9, 3 * d + 5) == f.data.at(3, 9, 5));

  FeatTensor tiny;
  tiny.data = Tensor<double>({1, 2, 4});
  tiny.kind = FeatKind::kCombined;
  tiny.dims_meta = {1, 4, 1};
  CHECK_THROWS_AS(downsample(tiny, 3), DataError);
}

TEST_CASE("mel pseudo-inverse on smooth spectra") {
  Tensor<double> fb = mel_filterbank(80, 80.0, 7000.0, 2048, 16000);
  // a smooth in-band magnitude spectrum
  Tensor<double> m({1, 1025});
  for (int k = 0; k < 1025; ++k) {
    const double f = double(k) * 16000.0 / 2048.0;
    m.at(0, size_t(k)) = std::exp(-(f - 1500.0) * (f - 1500.0) / (2 * 600.0 * 600.0));
  }
  // mel projection then back
  Tensor<double> mel({1, 80});
  for (size_t b = 0; b < 80; ++b) {
    double acc = 0;
    for (size_t k = 0; k < 1025; ++k) acc += fb.at(b, k) * m.at(0, k);
    mel.at(0, b) = acc;
  }
  Tensor<double> rec = mel_to_linear(mel, fb);
  double num = 0, den = 0;
  for (size_t k = 0; k < 1025; ++k) {
    const double f = double(k) * 16000.0 / 2048.0;
    if (f < 300.0 || f > 6000.0) continue;  // inside the band, away from edges
    num += (rec.at(0, k) - m.at(0, k)) * (rec.at(0, k) - m.at(0, k));
    den += m.at(0, k) * m.at(0, k);
  }
  CHECK(std::sqrt(num / den) < 0.05);
}

TEST_CASE("griffin-lim convergence and zero case") {
  StftConfig cfg;
  auto speech = testsig::synthetic_speech(41, 0.6);
  MultiWave w = mono_wave(speech, 16000);
  ComplexSpec spec = stft(w, cfg);

  Tensor<double> mag({spec.frames(), spec.bins()});
  for (size_t t = 0; t < spec.frames(); ++t)
    for (size_t k = 0; k < spec.bins(); ++k)
      mag.at(t, k) = std::abs(spec.data.at(0, t, k));

  std::vector<double> conv;
  MultiWave rec = griffin_lim(mag, cfg, 12, 16000, &conv);
  REQUIRE(conv.size() == 12);
  for (size_t i = 1; i < conv.size(); ++i)
    CHECK(conv[i] <= conv[i - 1] + 1e-9);
  CHECK(conv.back() < conv.front());
  for (double v : rec.samples.flat()) CHECK(std::isfinite(v));

  Tensor<double> zero({20, size_t(cfg.bins())});
  MultiWave silent = griffin_lim(zero, cfg, 3, 16000);
  for (double v : silent.samples.flat()) CHECK(v == 0.0);
}
