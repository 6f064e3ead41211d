// include/echolab/fft.hpp
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

#include <complex>
#include <span>
#include <vector>

namespace echolab {

using cplx = std::complex<double>;

size_t next_pow2(size_t n);

// In-place iterative radix-2 transform; size must be a power of two.
// The inverse includes the 1/N factor.
void fft_inplace(std::vector<cplx>& x, bool inverse);

// One-sided spectrum of a real signal zero-padded to fft_len
// (power of two); returns fft_len/2 + 1 bins.
std::vector<cplx> rfft(std::span<const double> x, size_t fft_len);

// Real inverse of a one-sided spectrum; returns fft_len samples.
std::vector<double> irfft(std::span<const cplx> spec, size_t fft_len);

// Full linear convolution, length a.size() + b.size() - 1.
std::vector<double> fft_convolve(std::span<const double> a,
                                 std::span<const double> b);

}  // namespace echolab
