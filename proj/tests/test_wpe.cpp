// tests/test_wpe.cpp
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

#include <cmath>

#include "doctest.h"
#include "echolab/wpe.hpp"

using namespace echolab;
using namespace echolab::wpe;
using namespace echolab::signals;

namespace {

ComplexSpec empty_spec(size_t c, size_t t, size_t bins = 0) {
  StftConfig cfg;
  ComplexSpec s;
  s.data = Tensor<cplx>({c, t, bins ? bins : size_t(cfg.bins())});
  s.config = cfg;
  s.sample_rate = 16000;
  return s;
}

// reverberant tail built as an exact delayed autoregression of the
// observations: x nonzero only in the first `delay` frames, then
// y(t) = sum_g G^H ytilde(t); WPE with matching taps recovers x exactly
ComplexSpec make_ar_reverb(size_t c, size_t t, int taps, int delay,
                           uint64_t seed, ComplexSpec* clean) {
  ComplexSpec y = empty_spec(c, t, 8);
  *clean = empty_spec(c, t, 8);
  Rng rng(seed);
  const size_t kd = size_t(taps) * c;
  for (size_t b = 0; b < y.bins(); ++b) {
    // stable random prediction filters
    std::vector<cplx> g(kd * c);
    for (auto& v : g)
      v = cplx(rng.normal(), rng.normal()) * (0.25 / double(kd));
    for (size_t n = 0; n < t; ++n) {
      for (size_t ch = 0; ch < c; ++ch) {
        cplx x = n < size_t(delay) ? cplx(rng.normal(), rng.normal())
                                   : cplx(0.0, 0.0);
        clean->data.at(ch, n, b) = x;
        cplx acc = x;
        for (int tap = 0; tap < taps; ++tap) {
          const ptrdiff_t src = ptrdiff_t(n) - delay - tap;
          if (src < 0) continue;
          for (size_t cc = 0; cc < c; ++cc)
            acc += std::conj(g[(size_t(tap) * c + cc) * c + ch]) *
                   y.data.at(cc, size_t(src), b);
        }
        y.data.at(ch, n, b) = acc;
      }
    }
  }
  return y;
}

double late_energy(const ComplexSpec& s, int delay) {
  double e = 0;
  for (size_t c = 0; c < s.channels(); ++c)
    for (size_t t = size_t(delay); t < s.frames(); ++t)
      for (size_t b = 0; b < s.bins(); ++b) e += std::norm(s.data.at(c, t, b));
  return e;
}

}  // namespace

TEST_CASE("exact autoregressive reverberation is removed") {
  WpeConfig cfg;
  cfg.taps = 6;
  cfg.delay = 3;
  ComplexSpec clean;
  ComplexSpec wet = make_ar_reverb(2, 60, cfg.taps, cfg.delay, 31, &clean);
  ComplexSpec out = wpe_dereverb(wet, cfg);

  const double e_in = late_energy(wet, cfg.delay);
  REQUIRE(e_in > 0);
  // all energy past the first frames is reverberant tail by construction
  double e_out = 0;
  for (size_t c = 0; c < out.channels(); ++c)
    for (size_t t = size_t(cfg.delay); t < out.frames(); ++t)
      for (size_t b = 0; b < out.bins(); ++b)
        e_out += std::norm(out.data.at(c, t, b) - clean.data.at(c, t, b));
  CHECK(e_out / e_in < 1e-6);
}

TEST_CASE("zero input gives zero output") {
  WpeConfig cfg;
  ComplexSpec zero = empty_spec(2, 40);
  ComplexSpec out = wpe_dereverb(zero, cfg);
  for (const auto& v : out.data.flat()) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("too short input is rejected") {
  WpeConfig cfg;  // delay 3 + taps 10
  ComplexSpec tiny = empty_spec(2, 13);
  CHECK_THROWS_AS(wpe_dereverb(tiny, cfg), DataError);
}

TEST_CASE("complex scale equivariance") {
  WpeConfig cfg;
  cfg.taps = 4;
  ComplexSpec clean;
  ComplexSpec wet = make_ar_reverb(2, 50, 4, cfg.delay, 17, &clean);
  ComplexSpec out1 = wpe_dereverb(wet, cfg);

  const cplx scale(1.7, -2.3);
  ComplexSpec scaled = wet;
  for (auto& v : scaled.data.flat()) v *= scale;
  ComplexSpec out2 = wpe_dereverb(scaled, cfg);

  double num = 0, den = 0;
  for (size_t i = 0; i < out1.data.size(); ++i) {
    num += std::norm(out2.data[i] - scale * out1.data[i]);
    den += std::norm(scale * out1.data[i]);
  }
  CHECK(std::sqrt(num / den) < 1e-9);
}

TEST_CASE("objective is monotone non-increasing per bin") {
  WpeConfig cfg;
  cfg.taps = 5;
  cfg.iterations = 5;
  ComplexSpec clean;
  ComplexSpec wet = make_ar_reverb(2, 48, 8, cfg.delay, 23, &clean);
  Tensor<double> obj;
  wpe_dereverb(wet, cfg, &obj);
  REQUIRE(obj.shape() == std::vector<size_t>{5, wet.bins()});
  for (size_t b = 0; b < wet.bins(); ++b)
    for (size_t it = 1; it < 5; ++it) {
      const double prev = obj.at(it - 1, b);
      const double cur = obj.at(it, b);
      CHECK(cur <= prev + 1e-9 * std::abs(prev));
    }
}

TEST_CASE("per-channel mode equals independent single channel runs") {
  WpeConfig cfg;
  cfg.taps = 4;
  ComplexSpec clean;
  ComplexSpec wet = make_ar_reverb(3, 40, 4, cfg.delay, 41, &clean);

  WpeConfig per = cfg;
  per.per_channel = true;
  ComplexSpec joint_per = wpe_dereverb(wet, per);

  for (size_t c = 0; c < 3; ++c) {
    ComplexSpec one = empty_spec(1, 40, wet.bins());
    for (size_t t = 0; t < 40; ++t)
      for (size_t b = 0; b < wet.bins(); ++b)
        one.data.at(0, t, b) = wet.data.at(c, t, b);
    ComplexSpec out1 = wpe_dereverb(one, cfg);
    for (size_t t = 0; t < 40; ++t)
      for (size_t b = 0; b < wet.bins(); ++b)
        CHECK(std::abs(joint_per.data.at(c, t, b) - out1.data.at(0, t, b)) ==
              0.0);
  }
}
