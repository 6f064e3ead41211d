// tests/test_roomsim.cpp
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
#include <set>

#include "doctest.h"
#include "echolab/roomsim.hpp"
#include "echolab/testsig.hpp"
#include "oracles.hpp"

using namespace echolab;
using namespace echolab::roomsim;

TEST_CASE("scene sampling covers the grids deterministically") {
  std::set<std::pair<int, int>> task1, task2;
  for (uint64_t s = 0; s < 4000; ++s) {
    RoomScene a = sample_scene(1, s);
    CHECK(int(a.source_angle_deg) % 5 == 0);
    CHECK((a.t60 == 0.3 || a.t60 == 0.6 || a.t60 == 0.9));
    task1.insert({int(a.source_angle_deg), int(a.t60 * 10)});

    RoomScene b = sample_scene(2, s);
    CHECK(b.source_angle_deg == 0.0);
    CHECK(int(b.interferer_angle_deg) % 30 == 0);
    CHECK(b.interferer_angle_deg >= 30.0);
    CHECK(b.interferer_angle_deg <= 330.0);
    task2.insert({int(b.interferer_angle_deg), int(b.t60 * 10)});
  }
  CHECK(task1.size() == 216);  // 72 angles x 3 t60
  CHECK(task2.size() == 33);   // 11 angles x 3 t60

  RoomScene x = sample_scene(1, 1234), y = sample_scene(1, 1234);
  CHECK(x.source_angle_deg == y.source_angle_deg);
  CHECK(x.t60 == y.t60);
}

TEST_CASE("anechoic direct path matches geometry") {
  RoomScene scene;
  scene.anechoic = true;
  scene.source_angle_deg = 0.0;
  Rir rir = image_rir(scene, SourceRole::kTarget, 16000, 2000);

  // mic 0 is at (3, 2, 1.25), source at (3.5, 2, 1.25): 0.5 m
  const double expected_delay = 0.5 / 343.0 * 16000.0;  // 23.32 samples
  const double* h = rir.taps.row(0);
  size_t peak = 0;
  for (size_t i = 1; i < rir.length(); ++i)
    if (std::abs(h[i]) > std::abs(h[peak])) peak = i;
  CHECK(std::abs(double(peak) - expected_delay) <= 1.0);

  // windowed-sinc taps sum to the image amplitude 1/(4 pi d)
  double tap_sum = 0;
  for (size_t i = 0; i < rir.length(); ++i) tap_sum += h[i];
  CHECK(tap_sum == doctest::Approx(1.0 / (4.0 * kPi * 0.5)).epsilon(0.01));

  // per-mic delays follow per-mic distances
  const double dists[4] = {0.5, std::sqrt(3.25), 2.5, std::sqrt(3.25)};
  for (int m = 0; m < 4; ++m) {
    const double* hm = rir.taps.row(size_t(m));
    size_t pk = 0;
    for (size_t i = 1; i < rir.length(); ++i)
      if (std::abs(hm[i]) > std::abs(hm[pk])) pk = i;
    CHECK(std::abs(double(pk) - dists[m] / 343.0 * 16000.0) <= 1.0);
  }
}

TEST_CASE("image rir determinism and energy vs absorption") {
  RoomScene scene;
  scene.t60 = 0.3;
  Rir a = image_rir(scene, SourceRole::kTarget);
  Rir b = image_rir(scene, SourceRole::kTarget);
  CHECK(a.taps.flat() == b.taps.flat());  // bit identical

  auto energy = [](const Rir& r) {
    double e = 0;
    for (double v : r.taps.flat()) e += v * v;
    return e;
  };
  // lower t60 = higher absorption = less energy; compare on equal lengths
  Rir e3 = image_rir(scene, SourceRole::kTarget, 16000, 6000);
  scene.t60 = 0.6;
  Rir e6 = image_rir(scene, SourceRole::kTarget, 16000, 6000);
  scene.t60 = 0.9;
  Rir e9 = image_rir(scene, SourceRole::kTarget, 16000, 6000);
  CHECK(energy(e3) < energy(e6));
  CHECK(energy(e6) < energy(e9));
}

TEST_CASE("schroeder t60 on synthetic decay") {
  const int fs = 16000;
  const double t60 = 0.5;
  // 60 dB down over t60: tap envelope exp(-n * 3 ln10 / (t60 fs))
  const double rate = 3.0 * std::log(10.0) / (t60 * fs);
  Rng rng(99);
  std::vector<double> h(size_t(0.8 * fs));
  for (size_t i = 0; i < h.size(); ++i)
    h[i] = std::exp(-rate * double(i)) * rng.normal();

  const double est = estimate_t60(h, fs);
  CHECK(est == doctest::Approx(t60).epsilon(0.10));

  // scaling leaves the estimate unchanged
  std::vector<double> h2 = h;
  for (double& v : h2) v *= 37.5;
  CHECK(estimate_t60(h2, fs) == doctest::Approx(est).epsilon(1e-12));

  // a bare impulse has no decay segment
  std::vector<double> imp(4000, 0.0);
  imp[100] = 1.0;
  CHECK_THROWS_AS(estimate_t60(imp, fs), DataError);
}

TEST_CASE("simulated rir t60 lands near the request") {
  RoomScene scene;
  scene.t60 = 0.3;
  Rir rir = image_rir(scene, SourceRole::kTarget);
  const double est = estimate_t60(
      std::span<const double>(rir.taps.row(0), rir.length()), 16000);
  CHECK(est == doctest::Approx(0.3).epsilon(0.20));
}

TEST_CASE("anechoic render is a delayed attenuated copy") {
  RoomScene scene;
  scene.anechoic = true;
  scene.source_angle_deg = 45.0;
  // bandlimited two-tone source so the delayed copy has a closed form
  std::vector<double> src(4000);
  for (size_t i = 0; i < src.size(); ++i)
    src[i] = 0.5 * std::sin(2 * kPi * 500.0 * double(i) / 16000.0) +
             0.3 * std::sin(2 * kPi * 1300.0 * double(i) / 16000.0);
  RenderResult r = render_scene({src}, scene, 16000);
  REQUIRE(r.images.size() == 1);

  const Point s = scene.source_position(45.0);
  for (int m = 0; m < 4; ++m) {
    const Point mic = scene.mic_position(m);
    const double d = std::hypot(s[0] - mic[0], s[1] - mic[1], s[2] - mic[2]);
    const double delay = d / 343.0 * 16000.0;
    const double gain = 1.0 / (4.0 * kPi * d);
    double num = 0, den = 0;
    for (size_t i = 300; i < 3800; ++i) {
      const double tt = double(i) - delay;
      const double want =
          gain * (0.5 * std::sin(2 * kPi * 500.0 * tt / 16000.0) +
                  0.3 * std::sin(2 * kPi * 1300.0 * tt / 16000.0));
      const double got = r.mixture.channel(size_t(m))[i];
      num += (got - want) * (got - want);
      den += want * want;
    }
    CHECK(std::sqrt(num / den) < 1e-3);
  }
}

TEST_CASE("two source mix is peak matched and exactly additive") {
  RoomScene scene = sample_scene(2, 77);
  auto a = testsig::synthetic_speech(21, 0.4);
  auto b = testsig::synthetic_speech(22, 0.35);
  RenderResult r = render_scene({a, b}, scene, 16000);
  REQUIRE(r.images.size() == 2);
  REQUIRE(r.cleans.size() == 2);

  auto peak = [](const MultiWave& w) {
    double p = 0;
    for (double v : w.samples.flat()) p = std::max(p, std::abs(v));
    return p;
  };
  CHECK(std::abs(peak(r.images[0]) - peak(r.images[1])) < 1e-9);

  for (size_t c = 0; c < r.mixture.channels(); ++c)
    for (size_t i = 0; i < r.mixture.frames(); i += 97)
      CHECK(r.mixture.channel(c)[i] ==
            r.images[0].channel(c)[i] + r.images[1].channel(c)[i]);

  CHECK_THROWS_AS(render_scene({a, b, a}, scene, 16000), DataError);
}

TEST_CASE("scene json roundtrip and validation") {
  RoomScene scene = sample_scene(2, 5);
  RoomScene back = RoomScene::from_json(scene.to_json());
  CHECK(back.source_angle_deg == scene.source_angle_deg);
  CHECK(back.interferer_angle_deg == scene.interferer_angle_deg);
  CHECK(back.t60 == scene.t60);

  RoomScene bad;
  bad.source_radius = 5.0;  // outside the 4 x 4 room
  CHECK_THROWS_AS(bad.validate(), DataError);
  RoomScene tiny;
  tiny.t60 = 0.01;  // sabine absorption > 1
  CHECK_THROWS_AS(image_rir(tiny, SourceRole::kTarget), DataError);
}
