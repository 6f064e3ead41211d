// include/echolab/wpe.hpp
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

#include "echolab/signals.hpp"

namespace echolab {
namespace wpe {

struct WpeConfig {
  int taps = 10;
  int delay = 3;  // frames
  int iterations = 3;
  double diagonal_loading = 1e-10;
  // process each channel on its own (the single-channel baseline applied
  // per channel) instead of jointly
  bool per_channel = false;

  void validate() const {
    ECHOLAB_REQUIRE(taps >= 1 && delay >= 1 && iterations >= 1,
                    "invalid wpe config");
    ECHOLAB_REQUIRE(diagonal_loading > 0, "loading must be positive");
  }
};

// Variance-normalized delayed linear prediction per frequency bin. Output
// shape equals input shape. objective, when given, is filled with the
// per-iteration profile objective per bin, [iterations x K].
signals::ComplexSpec wpe_dereverb(const signals::ComplexSpec& spec,
                                  const WpeConfig& cfg,
                                  Tensor<double>* objective = nullptr,
                                  int jobs = 0);

}  // namespace wpe
}  // namespace echolab
