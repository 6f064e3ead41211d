// include/echolab/wave.hpp
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

#include <string>
#include <vector>

#include "echolab/tensor.hpp"

namespace echolab {

// Multichannel time-domain signal. samples is [channels x n], amplitudes
// nominally in [-1, 1].
struct MultiWave {
  Tensor<double> samples;
  int sample_rate = 16000;

  MultiWave() = default;
  MultiWave(size_t channels, size_t n, int rate)
      : samples(Tensor<double>({channels, n})), sample_rate(rate) {}
  MultiWave(Tensor<double> s, int rate)
      : samples(std::move(s)), sample_rate(rate) {
    ECHOLAB_REQUIRE(samples.ndim() == 2, "wave tensor must be [C x N]");
  }

  size_t channels() const { return samples.ndim() == 2 ? samples.dim(0) : 0; }
  size_t frames() const { return samples.ndim() == 2 ? samples.dim(1) : 0; }
  double* channel(size_t c) { return samples.row(c); }
  const double* channel(size_t c) const { return samples.row(c); }

  void validate() const;
};

MultiWave mono_wave(std::vector<double> samples, int rate);

enum class WavEncoding { kPcm16, kFloat32 };

// RIFF WAVE, PCM 16-bit or IEEE float 32-bit, 1..8 channels.
MultiWave read_wav(const std::string& path);
void write_wav(const std::string& path, const MultiWave& wave,
               WavEncoding enc = WavEncoding::kFloat32);

}  // namespace echolab
