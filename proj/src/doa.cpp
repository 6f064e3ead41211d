// src/doa.cpp
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

#include "echolab/doa.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>

namespace echolab {
namespace doa {

SteeringGrid steering_delays(const roomsim::RoomScene& scene,
                             int grid_step_deg) {
  ECHOLAB_REQUIRE(grid_step_deg > 0 && 360 % grid_step_deg == 0,
                  "grid step must divide 360");
  const size_t n = size_t(360 / grid_step_deg);
  const size_t c = size_t(scene.num_mics);

  SteeringGrid grid;
  grid.angles_deg.resize(n);
  grid.delays = Tensor<double>({n, c});
  grid.dists = Tensor<double>({n, c});
  for (size_t i = 0; i < n; ++i) {
    const double ang = double(i) * double(grid_step_deg);
    grid.angles_deg[i] = ang;
    const roomsim::Point p = scene.source_position(ang);
    for (size_t m = 0; m < c; ++m) {
      const roomsim::Point mic = scene.mic_position(int(m));
      const double d =
          std::hypot(p[0] - mic[0], p[1] - mic[1], p[2] - mic[2]);
      grid.dists.at(i, m) = d;
      grid.delays.at(i, m) = d / scene.sound_speed;
    }
  }
  return grid;
}

namespace {

struct Band {
  size_t lo, hi;  // bin range [lo, hi)
};

Band band_bins(const signals::ComplexSpec& spec, double f_lo, double f_hi) {
  ECHOLAB_REQUIRE(f_lo >= 0 && f_lo < f_hi, "bad analysis band");
  const double hz_per_bin =
      double(spec.sample_rate) / double(spec.config.fft_len);
  size_t lo = size_t(std::ceil(f_lo / hz_per_bin));
  size_t hi = std::min(spec.bins(), size_t(std::floor(f_hi / hz_per_bin)) + 1);
  ECHOLAB_REQUIRE(lo < hi, "analysis band contains no bins");
  return {lo, hi};
}

}  // namespace

std::vector<double> srp_phat(const signals::ComplexSpec& spec,
                             const SteeringGrid& grid, double f_lo,
                             double f_hi) {
  const size_t c = spec.channels();
  ECHOLAB_REQUIRE(c >= 2, "srp-phat needs at least two channels");
  ECHOLAB_REQUIRE(grid.channels() == c, "grid channel count mismatch");
  const Band band = band_bins(spec, f_lo, f_hi);
  const size_t t = spec.frames();
  const size_t nb = band.hi - band.lo;

  // frame-summed PHAT-normalized cross spectra, one row per mic pair
  std::vector<std::pair<size_t, size_t>> pairs;
  for (size_t i = 0; i < c; ++i)
    for (size_t j = i + 1; j < c; ++j) pairs.emplace_back(i, j);

  Tensor<cplx> cross({pairs.size(), nb});
  for (size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    for (size_t tt = 0; tt < t; ++tt) {
      const cplx* yi = spec.data.row(i, tt);
      const cplx* yj = spec.data.row(j, tt);
      for (size_t b = 0; b < nb; ++b) {
        cplx g = yi[band.lo + b] * std::conj(yj[band.lo + b]);
        const double a = std::abs(g);
        if (a > 0.0) cross.at(p, b) += g / a;
      }
    }
  }

  const double hz_per_bin =
      double(spec.sample_rate) / double(spec.config.fft_len);
  std::vector<double> power(grid.size(), 0.0);
  for (size_t gidx = 0; gidx < grid.size(); ++gidx) {
    double acc = 0.0;
    for (size_t p = 0; p < pairs.size(); ++p) {
      const auto [i, j] = pairs[p];
      const double dtau = grid.delays.at(gidx, i) - grid.delays.at(gidx, j);
      for (size_t b = 0; b < nb; ++b) {
        const double w = 2.0 * kPi * hz_per_bin * double(band.lo + b) * dtau;
        const cplx steer(std::cos(w), std::sin(w));
        acc += (cross.at(p, b) * steer).real();
      }
    }
    power[gidx] = acc;
  }
  return power;
}

std::vector<double> music_spectrum(const signals::ComplexSpec& spec,
                                   const SteeringGrid& grid, int n_sources,
                                   double f_lo, double f_hi) {
  using CMat = Eigen::MatrixXcd;
  using CVec = Eigen::VectorXcd;
  const size_t c = spec.channels();
  ECHOLAB_REQUIRE(int(c) > n_sources, "need more channels than sources");
  ECHOLAB_REQUIRE(grid.channels() == c, "grid channel count mismatch");
  ECHOLAB_REQUIRE(n_sources >= 1, "n_sources must be >= 1");
  const Band band = band_bins(spec, f_lo, f_hi);
  const size_t t = spec.frames();
  const double hz_per_bin =
      double(spec.sample_rate) / double(spec.config.fft_len);
  constexpr double kCap = 1e12;

  std::vector<double> acc(grid.size(), 0.0);
  size_t used_bins = 0;
  CMat cov(c, c);
  CVec y(c), a(c);
  for (size_t b = band.lo; b < band.hi; ++b) {
    cov.setZero();
    for (size_t tt = 0; tt < t; ++tt) {
      for (size_t m = 0; m < c; ++m) y(Eigen::Index(m)) = spec.data.at(m, tt, b);
      cov.noalias() += y * y.adjoint();
    }
    cov /= double(t);
    const double tr = cov.trace().real();
    if (tr <= 0.0) continue;  // silent bin carries no information
    cov += (1e-9 * tr / double(c)) * CMat::Identity(c, c);

    Eigen::SelfAdjointEigenSolver<CMat> eig(cov);
    ECHOLAB_REQUIRE(eig.info() == Eigen::Success, "eigendecomposition failed");
    // ascending eigenvalues: the first c - n_sources span the noise subspace
    const CMat noise = eig.eigenvectors().leftCols(Eigen::Index(c) - n_sources);

    const double freq = hz_per_bin * double(b);
    double nb_max = 0.0;
    std::vector<double> nb_spec(grid.size());
    for (size_t gidx = 0; gidx < grid.size(); ++gidx) {
      for (size_t m = 0; m < c; ++m) {
        const double w = -2.0 * kPi * freq * grid.delays.at(gidx, m);
        a(Eigen::Index(m)) =
            cplx(std::cos(w), std::sin(w)) / grid.dists.at(gidx, m);
      }
      a.normalize();
      const double denom = (noise.adjoint() * a).squaredNorm();
      nb_spec[gidx] = std::min(denom > 0.0 ? 1.0 / denom : kCap, kCap);
      nb_max = std::max(nb_max, nb_spec[gidx]);
    }
    if (nb_max <= 0.0) continue;
    for (size_t gidx = 0; gidx < grid.size(); ++gidx)
      acc[gidx] += nb_spec[gidx] / nb_max;
    ++used_bins;
  }
  ECHOLAB_REQUIRE(used_bins > 0, "no usable bins in the analysis band");
  for (double& v : acc) v /= double(used_bins);
  return acc;
}

std::vector<std::pair<double, double>> top_k_peaks(
    const std::vector<double>& spectrum, int k) {
  const size_t n = spectrum.size();
  ECHOLAB_REQUIRE(n >= 2, "spectrum too short");
  ECHOLAB_REQUIRE(k >= 1 && size_t(k) <= n, "k out of range");
  const double step = 360.0 / double(n);

  std::vector<size_t> peaks, rest;
  for (size_t i = 0; i < n; ++i) {
    const double prev = spectrum[(i + n - 1) % n];
    const double next = spectrum[(i + 1) % n];
    if (spectrum[i] > prev && spectrum[i] > next)
      peaks.push_back(i);
    else
      rest.push_back(i);
  }
  auto by_score = [&](size_t a, size_t b) {
    if (spectrum[a] != spectrum[b]) return spectrum[a] > spectrum[b];
    return a < b;  // ties: lower angle first
  };
  std::sort(peaks.begin(), peaks.end(), by_score);
  std::sort(rest.begin(), rest.end(), by_score);

  std::vector<std::pair<double, double>> out;
  for (size_t i = 0; i < peaks.size() && int(out.size()) < k; ++i)
    out.emplace_back(double(peaks[i]) * step, spectrum[peaks[i]]);
  for (size_t i = 0; i < rest.size() && int(out.size()) < k; ++i)
    out.emplace_back(double(rest[i]) * step, spectrum[rest[i]]);
  return out;
}

}  // namespace doa
}  // namespace echolab
