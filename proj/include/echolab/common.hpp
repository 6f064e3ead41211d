// include/echolab/common.hpp
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

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace echolab {

// Invalid data or arguments; the CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class... Args>
std::string str_cat(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

#define ECHOLAB_REQUIRE(cond, ...)                        \
  do {                                                    \
    if (!(cond))                                          \
      throw ::echolab::DataError(                         \
          ::echolab::str_cat(__VA_ARGS__));               \
  } while (0)

// xoshiro256++ seeded through splitmix64. Self-contained so that streams are
// reproducible across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& s : state_) {
      // splitmix64
      x += 0x9e3779b97f4a7c15ULL;
      uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      s = z ^ (z >> 31);
    }
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int uniform_int(int n) { return int(next_u64() % uint64_t(n)); }

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    // Box-Muller; u clamped away from 0
    double u = uniform();
    if (u < 1e-300) u = 1e-300;
    double v = uniform();
    double r = std::sqrt(-2.0 * std::log(u));
    double a = 6.283185307179586476925286766559 * v;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = next_u64() % i;
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t state_[4];
  bool have_cached_ = false;
  double cached_ = 0.0;
};

// Runs fn(i) for i in [0, n). Each index must write only its own outputs;
// results are then independent of the thread schedule.
inline void parallel_for(size_t n, const std::function<void(size_t)>& fn,
                         int jobs = 0) {
  if (jobs <= 0) jobs = int(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;
  if (jobs == 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(jobs));
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (size_t i = size_t(w); i < n; i += size_t(jobs)) fn(i);
      } catch (...) {
        errors[size_t(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace echolab
