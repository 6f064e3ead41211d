// tests/test_doa.cpp
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
#include "echolab/doa.hpp"
#include "echolab/testsig.hpp"

using namespace echolab;
using namespace echolab::doa;
using namespace echolab::signals;

namespace {

ComplexSpec render_and_stft(double angle_deg, bool anechoic, uint64_t seed,
                            double t60 = 0.6) {
  roomsim::RoomScene scene;
  scene.source_angle_deg = angle_deg;
  scene.anechoic = anechoic;
  scene.t60 = t60;
  auto src = testsig::synthetic_speech(seed, 0.5);
  auto r = roomsim::render_scene({src}, scene, 16000);
  return stft(r.mixture, StftConfig());
}

size_t argmax(const std::vector<double>& v) {
  return size_t(std::max_element(v.begin(), v.end()) - v.begin());
}

double circular_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

}  // namespace

TEST_CASE("steering grid geometry") {
  roomsim::RoomScene scene;
  SteeringGrid grid = steering_delays(scene);
  REQUIRE(grid.size() == 72);
  REQUIRE(grid.channels() == 4);

  // candidate at 0 deg to the mic at 0 deg: 1.5 - 1.0 = 0.5 m
  CHECK(grid.delays.at(0, 0) == doctest::Approx(0.5 / 343.0).epsilon(1e-12));

  // rotating the candidate by 90 deg relabels the mics
  for (size_t g = 0; g < 72; ++g) {
    const size_t g90 = (g + 18) % 72;
    for (size_t m = 0; m < 4; ++m)
      CHECK(grid.delays.at(g90, (m + 1) % 4) ==
            doctest::Approx(grid.delays.at(g, m)).epsilon(1e-12));
  }

  // max possible distance: source circle 1.5 m + mic circle 1.0 m
  for (size_t g = 0; g < 72; ++g)
    for (size_t m = 0; m < 4; ++m)
      CHECK(grid.delays.at(g, m) <= 2.5 / 343.0 + 1e-12);
}

TEST_CASE("srp-phat finds an anechoic source") {
  roomsim::RoomScene scene;
  SteeringGrid grid = steering_delays(scene);
  ComplexSpec spec = render_and_stft(45.0, true, 3);
  std::vector<double> p = srp_phat(spec, grid);
  REQUIRE(p.size() == 72);
  const double got = double(argmax(p)) * 5.0;
  CHECK(circular_deg(got, 45.0) <= 5.0);
}

TEST_CASE("srp-phat is invariant to per-channel scaling") {
  roomsim::RoomScene scene;
  SteeringGrid grid = steering_delays(scene);
  ComplexSpec spec = render_and_stft(130.0, true, 4);
  std::vector<double> p1 = srp_phat(spec, grid);

  ComplexSpec scaled = spec;
  const double gains[4] = {0.1, 3.0, 17.0, 0.5};
  for (size_t c = 0; c < 4; ++c)
    for (size_t t = 0; t < scaled.frames(); ++t)
      for (size_t k = 0; k < scaled.bins(); ++k)
        scaled.data.at(c, t, k) *= gains[c];
  std::vector<double> p2 = srp_phat(scaled, grid);
  for (size_t i = 0; i < p1.size(); ++i)
    CHECK(p2[i] == doctest::Approx(p1[i]).epsilon(1e-9));
}

TEST_CASE("identical signals on all mics: response has the array symmetry") {
  roomsim::RoomScene scene;
  SteeringGrid grid = steering_delays(scene);
  auto src = testsig::synthetic_speech(9, 0.4);
  MultiWave w(4, src.size(), 16000);
  for (size_t c = 0; c < 4; ++c)
    std::copy(src.begin(), src.end(), w.channel(c));
  ComplexSpec spec = stft(w, StftConfig());
  std::vector<double> p = srp_phat(spec, grid);

  // no spatial information: nothing distinguishes an angle from its 90 deg
  // rotations, so the response is exactly 4-fold symmetric
  double scale = 0.0;
  for (double v : p) scale = std::max(scale, std::abs(v));
  for (size_t g = 0; g < 72; ++g)
    CHECK(std::abs(p[g] - p[(g + 18) % 72]) <= 1e-9 * scale);

  CHECK_THROWS_AS(
      srp_phat(render_and_stft(0.0, true, 1), grid, 300.0, 200.0), DataError);
}

TEST_CASE("srp-phat rejects single channel input") {
  roomsim::RoomScene scene;
  scene.num_mics = 1;
  SteeringGrid grid = steering_delays(scene);
  auto src = testsig::synthetic_speech(2, 0.3);
  ComplexSpec spec = stft(mono_wave(src, 16000), StftConfig());
  CHECK_THROWS_AS(srp_phat(spec, grid), DataError);
}

TEST_CASE("music finds an anechoic source and caps the peak") {
  roomsim::RoomScene scene;
  SteeringGrid grid = steering_delays(scene);
  ComplexSpec spec = render_and_stft(120.0, true, 5);
  std::vector<double> p = music_spectrum(spec, grid, 1);
  REQUIRE(p.size() == 72);
  CHECK(double(argmax(p)) * 5.0 == doctest::Approx(120.0));

  // rank-one covariance built from one steering vector: the pseudo spectrum
  // blows up at that angle and is capped
  const size_t g0 = 24;  // 120 deg
  const double freq = 1000.0;
  StftConfig cfg;
  const size_t bin = size_t(freq * cfg.fft_len / 16000.0);
  ComplexSpec synth;
  synth.data = Tensor<cplx>({4, 16, size_t(cfg.bins())});
  synth.config = cfg;
  synth.sample_rate = 16000;
  Rng rng(11);
  const double f_bin = double(bin) * 16000.0 / double(cfg.fft_len);
  for (size_t t = 0; t < 16; ++t) {
    const cplx s(rng.normal(), rng.normal());
    for (size_t m = 0; m < 4; ++m) {
      const double w = -2.0 * kPi * f_bin * grid.delays.at(g0, m);
      synth.data.at(m, t, bin) =
          s * cplx(std::cos(w), std::sin(w)) / grid.dists.at(g0, m);
    }
  }
  const double lo = f_bin - 1.0, hi = f_bin + 1.0;
  std::vector<double> ps = music_spectrum(synth, grid, 1, lo, hi);
  CHECK(argmax(ps) == g0);
  // the unbounded narrowband value hits the 1e12 cap, so after max
  // normalization the peak sits exactly at 1
  CHECK(ps[g0] == doctest::Approx(1.0).epsilon(1e-12));
  for (double v : ps) CHECK(std::isfinite(v));
}

TEST_CASE("music on white noise is near flat and scale invariant") {
  roomsim::RoomScene scene;
  SteeringGrid grid = steering_delays(scene);
  StftConfig cfg;
  Rng rng(21);
  MultiWave w(4, 16000, 16000);
  for (size_t c = 0; c < 4; ++c)
    for (size_t i = 0; i < 16000; ++i) w.channel(c)[i] = rng.normal();
  ComplexSpec spec = stft(w, cfg);
  std::vector<double> p = music_spectrum(spec, grid, 1);
  const double mx = *std::max_element(p.begin(), p.end());
  const double mn = *std::min_element(p.begin(), p.end());
  CHECK(mx / mn < 3.0);

  ComplexSpec scaled = spec;
  for (auto& v : scaled.data.flat()) v *= 123.0;
  std::vector<double> p2 = music_spectrum(scaled, grid, 1);
  for (size_t i = 0; i < p.size(); ++i)
    CHECK(p2[i] == doctest::Approx(p[i]).epsilon(1e-9));
}

TEST_CASE("top k peaks") {
  std::vector<double> spectrum(72, 0.0);
  spectrum[10] = 5.0;
  auto top = top_k_peaks(spectrum, 5);
  REQUIRE(top.size() == 5);
  CHECK(top[0].first == 50.0);
  CHECK(top[0].second == 5.0);

  // constant spectrum: deterministic lowest-angle fill
  std::vector<double> flat(72, 1.0);
  auto tf = top_k_peaks(flat, 5);
  for (int i = 0; i < 5; ++i) CHECK(tf[size_t(i)].first == double(5 * i));

  // two equal peaks, lower angle first
  std::vector<double> twin(72, 0.0);
  twin[30] = 2.0;
  twin[12] = 2.0;
  auto tt = top_k_peaks(twin, 5);
  CHECK(tt[0].first == 60.0);
  CHECK(tt[1].first == 150.0);

  // plateaus are not strict peaks: filled from remaining values
  std::vector<double> plat(72, 0.0);
  plat[4] = plat[5] = 3.0;
  auto tp = top_k_peaks(plat, 2);
  CHECK(tp[0].first == 20.0);
  CHECK(tp[1].first == 25.0);
}
