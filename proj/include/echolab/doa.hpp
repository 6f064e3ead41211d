// include/echolab/doa.hpp
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

#include <utility>
#include <vector>

#include "echolab/roomsim.hpp"
#include "echolab/signals.hpp"

namespace echolab {
namespace doa {

// 72-point candidate grid on the source circle with exact (near-field)
// propagation delays to every mic.
struct SteeringGrid {
  std::vector<double> angles_deg;  // ascending, 0..355 step 5
  Tensor<double> delays;           // [72 x C] seconds
  Tensor<double> dists;            // [72 x C] meters

  size_t size() const { return angles_deg.size(); }
  size_t channels() const { return delays.dim(1); }
};

SteeringGrid steering_delays(const roomsim::RoomScene& scene,
                             int grid_step_deg = 5);

// Defaults chosen for speech: spatial information below ~300 Hz is weak and
// the wide array aliases badly above a few kHz.
constexpr double kBandLo = 300.0;
constexpr double kBandHi = 3500.0;

// PHAT-weighted steered response power over all mic pairs; length matches the
// grid.
std::vector<double> srp_phat(const signals::ComplexSpec& spec,
                             const SteeringGrid& grid,
                             double f_lo = kBandLo, double f_hi = kBandHi);

// Broadband MUSIC pseudo-spectrum: per-bin spatial covariance, noise-subspace
// projection with near-field steering vectors, max-normalized narrowband
// spectra averaged over the band. Values capped at 1e12.
std::vector<double> music_spectrum(const signals::ComplexSpec& spec,
                                   const SteeringGrid& grid, int n_sources = 1,
                                   double f_lo = kBandLo, double f_hi = kBandHi);

// Circular local maxima sorted by score (ties: lower angle first), padded
// with the highest remaining grid values; exactly k results.
std::vector<std::pair<double, double>> top_k_peaks(
    const std::vector<double>& spectrum, int k = 5);

}  // namespace doa
}  // namespace echolab
