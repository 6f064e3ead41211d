// src/fft.cpp
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

#include "echolab/fft.hpp"

#include <cmath>

#include "echolab/common.hpp"

namespace echolab {

size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_inplace(std::vector<cplx>& x, bool inverse) {
  const size_t n = x.size();
  ECHOLAB_REQUIRE(n > 0 && (n & (n - 1)) == 0,
                  "fft size must be a power of two, got ", n);

  // bit reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }

  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * kPi / double(len);
    const cplx wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        cplx u = x[i + k];
        cplx v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }

  if (inverse) {
    const double inv_n = 1.0 / double(n);
    for (auto& v : x) v *= inv_n;
  }
}

std::vector<cplx> rfft(std::span<const double> x, size_t fft_len) {
  ECHOLAB_REQUIRE(x.size() <= fft_len, "signal longer than fft size");
  std::vector<cplx> buf(fft_len, cplx(0.0, 0.0));
  for (size_t i = 0; i < x.size(); ++i) buf[i] = cplx(x[i], 0.0);
  fft_inplace(buf, false);
  buf.resize(fft_len / 2 + 1);
  return buf;
}

std::vector<double> irfft(std::span<const cplx> spec, size_t fft_len) {
  const size_t k = fft_len / 2 + 1;
  ECHOLAB_REQUIRE(spec.size() == k, "one-sided spectrum must have fft/2+1 bins");
  std::vector<cplx> buf(fft_len);
  for (size_t i = 0; i < k; ++i) buf[i] = spec[i];
  for (size_t i = k; i < fft_len; ++i) buf[i] = std::conj(spec[fft_len - i]);
  fft_inplace(buf, true);
  std::vector<double> out(fft_len);
  for (size_t i = 0; i < fft_len; ++i) out[i] = buf[i].real();
  return out;
}

std::vector<double> fft_convolve(std::span<const double> a,
                                 std::span<const double> b) {
  ECHOLAB_REQUIRE(!a.empty() && !b.empty(), "convolution of empty signal");
  const size_t out_len = a.size() + b.size() - 1;
  const size_t n = next_pow2(out_len);
  std::vector<cplx> fa(n, cplx(0, 0)), fb(n, cplx(0, 0));
  for (size_t i = 0; i < a.size(); ++i) fa[i] = cplx(a[i], 0);
  for (size_t i = 0; i < b.size(); ++i) fb[i] = cplx(b[i], 0);
  fft_inplace(fa, false);
  fft_inplace(fb, false);
  for (size_t i = 0; i < n; ++i) fa[i] *= fb[i];
  fft_inplace(fa, true);
  std::vector<double> out(out_len);
  for (size_t i = 0; i < out_len; ++i) out[i] = fa[i].real();
  return out;
}

}  // namespace echolab
