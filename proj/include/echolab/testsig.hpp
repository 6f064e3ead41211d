// include/echolab/testsig.hpp
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

#include <vector>

#include "echolab/common.hpp"

namespace echolab {
namespace testsig {

// Speech-like mono signal: a glottal pulse train (drifting f0) plus noise
// bursts through drifting formant resonators, with a syllable-rate envelope.
// Stands in for licensed corpora in tests and demos.
std::vector<double> synthetic_speech(uint64_t seed, double seconds,
                                     int sample_rate = 16000);

}  // namespace testsig
}  // namespace echolab
