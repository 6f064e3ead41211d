// include/echolab/roomsim.hpp
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

#include <array>
#include <span>
#include <string>
#include <vector>

#include "echolab/tensor.hpp"
#include "echolab/wave.hpp"

namespace echolab {
namespace roomsim {

using Point = std::array<double, 3>;

// Shoebox room with a circular 4-mic array at the room center and sources on
// a coplanar circle. Angles are degrees in the horizontal plane.
struct RoomScene {
  std::array<double, 3> room = {4.0, 4.0, 2.5};
  Point center = {2.0, 2.0, 1.25};
  double mic_radius = 1.0;
  int num_mics = 4;  // at 0/90/180/270 degrees
  double source_radius = 1.5;
  double source_angle_deg = 0.0;
  double interferer_angle_deg = -1.0;  // < 0 means absent
  double t60 = 0.6;
  double sound_speed = 343.0;
  bool anechoic = false;  // forces reflection coefficient 0

  Point mic_position(int m) const;
  Point source_position(double angle_deg) const;
  bool has_interferer() const { return interferer_angle_deg >= 0.0; }
  void validate() const;

  std::string to_json() const;
  static RoomScene from_json(const std::string& text);
};

enum class SourceRole { kTarget, kInterferer };

struct Rir {
  Tensor<double> taps;  // [C x L]
  int sample_rate = 16000;
  RoomScene scene;
  SourceRole role = SourceRole::kTarget;

  size_t channels() const { return taps.dim(0); }
  size_t length() const { return taps.dim(1); }
};

// Task 1: source angle uniform over the 5-degree grid, t60 uniform over
// {0.3, 0.6, 0.9}. Task 2: target fixed at 0 degrees, interferer uniform over
// {30, 60, ..., 330}.
RoomScene sample_scene(int task, uint64_t seed);

// Image-source sum with a Sabine-derived uniform reflection coefficient and
// 81-tap windowed-sinc fractional delays. length < 0 picks
// ceil(1.25 * t60 * fs). jobs <= 0 uses all cores (parallel across mics).
Rir image_rir(const RoomScene& scene, SourceRole role, int sample_rate = 16000,
              int length = -1, int jobs = 0);

// Schroeder backward integration with a -5..-35 dB line fit extrapolated to
// -60 dB. Throws if the energy curve has no usable decay segment.
double estimate_t60(std::span<const double> taps, int sample_rate);

// Keeps taps up to direct-path peak + early_ms, zeroes the rest.
Rir direct_early(const Rir& rir, double early_ms = 50.0);

struct RenderResult {
  MultiWave mixture;               // [C x N]
  std::vector<MultiWave> images;   // reverberant image per source
  std::vector<MultiWave> cleans;   // anechoic direct-path image per source
};

MultiWave render_with_rir(std::span<const double> source, const Rir& rir);

// Convolves each source with its per-mic RIRs and mixes. With two sources the
// reverberant images are peak-matched (0 dB) before summing, and the anechoic
// references get the same per-source scale.
RenderResult render_scene(const std::vector<std::vector<double>>& sources,
                          const RoomScene& scene, int sample_rate = 16000,
                          int jobs = 0);

}  // namespace roomsim
}  // namespace echolab
