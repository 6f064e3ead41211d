// tests/oracles.hpp
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

// Independent reference implementations used as test oracles. These must stay
// brute-force and must not call the code under test.

#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <vector>

namespace echolab {
namespace oracle {

// textbook O(n^2) DFT
inline std::vector<std::complex<double>> naive_dft(
    std::span<const double> x, size_t n_out = 0) {
  const size_t n = x.size();
  if (n_out == 0) n_out = n;
  std::vector<std::complex<double>> out(n_out);
  for (size_t k = 0; k < n_out; ++k) {
    std::complex<double> acc(0, 0);
    for (size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * M_PI * double(k) * double(t) / double(n_out);
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

inline double rel_l2(std::span<const double> a, std::span<const double> b) {
  double num = 0, den = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

// fractional shift of a periodic signal via an exact DFT phase ramp
inline std::vector<double> fractional_shift(std::span<const double> x,
                                            double delay, size_t out_len) {
  size_t n = 1;
  while (n < x.size() + out_len) n <<= 1;
  std::vector<std::complex<double>> spec(n);
  for (size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0, 0);
    for (size_t t = 0; t < x.size(); ++t) {
      const double ang = -2.0 * M_PI * double(k) * double(t) / double(n);
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    spec[k] = acc;
  }
  // slow path is fine for the small test signals
  std::vector<double> out(out_len, 0.0);
  for (size_t t = 0; t < out_len; ++t) {
    std::complex<double> acc(0, 0);
    for (size_t k = 0; k < n; ++k) {
      const double shift_ang = -2.0 * M_PI * double(k < n / 2 ? k : k - n) *
                               delay / double(n);
      const double ang = 2.0 * M_PI * double(k) * double(t) / double(n);
      acc += spec[k] * std::complex<double>(std::cos(shift_ang), std::sin(shift_ang)) *
             std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[t] = acc.real() / double(n);
  }
  return out;
}

}  // namespace oracle
}  // namespace echolab
