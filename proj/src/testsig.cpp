// src/testsig.cpp
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

#include "echolab/testsig.hpp"

#include <algorithm>
#include <cmath>

namespace echolab {
namespace testsig {

namespace {

// two-pole resonator, unit peak gain near the resonance
struct Resonator {
  double b0 = 1, a1 = 0, a2 = 0, z1 = 0, z2 = 0;

  void tune(double freq, double bw, int fs) {
    const double r = std::exp(-kPi * bw / double(fs));
    const double theta = 2.0 * kPi * freq / double(fs);
    a1 = 2.0 * r * std::cos(theta);
    a2 = -r * r;
    b0 = (1.0 - r) * std::sqrt(1.0 - 2.0 * r * std::cos(2.0 * theta) + r * r);
  }
  double step(double x) {
    const double y = b0 * x + a1 * z1 + a2 * z2;
    z2 = z1;
    z1 = y;
    return y;
  }
};

}  // namespace

std::vector<double> synthetic_speech(uint64_t seed, double seconds,
                                     int sample_rate) {
  ECHOLAB_REQUIRE(seconds > 0, "duration must be positive");
  const size_t n = size_t(seconds * sample_rate);
  Rng rng(seed);
  std::vector<double> out(n, 0.0);

  Resonator f1, f2, f3;
  double f0 = rng.uniform(100.0, 200.0);
  double phase = 0.0;
  size_t seg_end = 0;
  bool voiced = true;
  double seg_gain = 1.0;

  for (size_t i = 0; i < n; ++i) {
    if (i >= seg_end) {
      // new 80..250 ms segment with fresh formants
      seg_end = i + size_t(rng.uniform(0.08, 0.25) * sample_rate);
      voiced = rng.uniform() < 0.8;
      seg_gain = rng.uniform(0.4, 1.0);
      f1.tune(rng.uniform(250.0, 900.0), rng.uniform(60.0, 150.0), sample_rate);
      f2.tune(rng.uniform(900.0, 2200.0), rng.uniform(80.0, 200.0), sample_rate);
      f3.tune(rng.uniform(2200.0, 3400.0), rng.uniform(120.0, 280.0),
              sample_rate);
      f0 = rng.uniform(90.0, 220.0);
    }
    double excitation;
    if (voiced) {
      phase += f0 / double(sample_rate);
      if (phase >= 1.0) {
        phase -= 1.0;
        excitation = 1.0;
      } else {
        excitation = 0.0;
      }
      excitation += 0.05 * rng.normal();  // aspiration
      f0 *= 1.0 + 2e-5 * rng.normal();    // slow pitch drift
      f0 = std::clamp(f0, 80.0, 260.0);
    } else {
      excitation = 0.35 * rng.normal();
    }
    const double env =
        0.55 + 0.45 * std::sin(2.0 * kPi * 3.5 * double(i) / sample_rate +
                               double(seed % 7));
    out[i] = seg_gain * env *
             (f1.step(excitation) + 0.6 * f2.step(excitation) +
              0.35 * f3.step(excitation));
  }

  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : out) v *= 0.9 / peak;
  return out;
}

}  // namespace testsig
}  // namespace echolab
