// src/wpe.cpp
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

#include "echolab/wpe.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace echolab {
namespace wpe {

namespace {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

constexpr double kPowerFloor = 1e-10;

// One frequency bin: y is [T x C]; returns the dereverberated frames and the
// per-iteration profile objective.
void wpe_bin(const CMat& y, const WpeConfig& cfg, CMat* out,
             std::vector<double>* objective) {
  const Eigen::Index t = y.rows(), c = y.cols();
  const Eigen::Index kd = Eigen::Index(cfg.taps) * c;
  CMat xhat = y;
  CMat stacked(t, kd);

  // delayed observation rows: [y(n-delay), ..., y(n-delay-taps+1)]
  stacked.setZero();
  for (Eigen::Index n = 0; n < t; ++n)
    for (int tap = 0; tap < cfg.taps; ++tap) {
      const Eigen::Index src = n - cfg.delay - tap;
      if (src < 0) continue;
      stacked.block(n, Eigen::Index(tap) * c, 1, c) = y.row(src);
    }

  Eigen::VectorXd lambda(t);
  CMat r(kd, kd);
  CMat p(kd, c);
  for (int it = 0; it < cfg.iterations; ++it) {
    for (Eigen::Index n = 0; n < t; ++n)
      lambda(n) = std::max(xhat.row(n).squaredNorm() / double(c), kPowerFloor);

    r.setZero();
    p.setZero();
    for (Eigen::Index n = 0; n < t; ++n) {
      const double w = 1.0 / lambda(n);
      r.selfadjointView<Eigen::Lower>().rankUpdate(stacked.row(n).transpose(),
                                                   w);
      p.noalias() += (w * stacked.row(n).transpose()) * y.row(n).conjugate();
    }
    r = r.selfadjointView<Eigen::Lower>();

    const double tr = r.trace().real();
    double load = cfg.diagonal_loading * (tr > 0 ? tr / double(kd) : 1.0);
    CMat filters;
    bool ok = false;
    for (int attempt = 0; attempt < 4; ++attempt) {
      CMat rl = r + load * CMat::Identity(kd, kd);
      Eigen::LDLT<CMat> ldlt(rl);
      if (ldlt.info() == Eigen::Success) {
        filters = ldlt.solve(p);
        if (filters.allFinite()) {
          ok = true;
          break;
        }
      }
      load *= 10.0;  // singular system: escalate loading
    }
    ECHOLAB_REQUIRE(ok, "wpe normal equations unsolvable at this bin");

    // prediction: xhat(n, c) = y(n, c) - filters(:, c)^H stacked(n, :)
    xhat = y - (stacked * filters.conjugate());

    if (objective) {
      double obj = 0.0;
      for (Eigen::Index n = 0; n < t; ++n) {
        const double lam =
            std::max(xhat.row(n).squaredNorm() / double(c), kPowerFloor);
        obj += double(c) * (1.0 + std::log(lam));
      }
      objective->push_back(obj);
    }
  }
  *out = xhat;
}

}  // namespace

signals::ComplexSpec wpe_dereverb(const signals::ComplexSpec& spec,
                                  const WpeConfig& cfg, Tensor<double>* objective,
                                  int jobs) {
  cfg.validate();
  const size_t c = spec.channels(), t = spec.frames(), k = spec.bins();
  ECHOLAB_REQUIRE(int(t) > cfg.delay + cfg.taps,
                  "utterance too short for wpe (", t, " frames)");

  signals::ComplexSpec out;
  out.data = Tensor<cplx>({c, t, k});
  out.config = spec.config;
  out.sample_rate = spec.sample_rate;
  if (objective) *objective = Tensor<double>({size_t(cfg.iterations), k});

  const size_t groups = cfg.per_channel ? c : 1;
  const size_t gc = cfg.per_channel ? 1 : c;

  parallel_for(
      k * groups,
      [&](size_t idx) {
        const size_t b = idx % k;
        const size_t g = idx / k;
        CMat y(t, gc);
        for (size_t tt = 0; tt < t; ++tt)
          for (size_t ch = 0; ch < gc; ++ch)
            y(Eigen::Index(tt), Eigen::Index(ch)) =
                spec.data.at(g * gc + ch, tt, b);
        CMat xhat;
        std::vector<double> obj;
        wpe_bin(y, cfg, &xhat, objective ? &obj : nullptr);
        for (size_t tt = 0; tt < t; ++tt)
          for (size_t ch = 0; ch < gc; ++ch)
            out.data.at(g * gc + ch, tt, b) =
                xhat(Eigen::Index(tt), Eigen::Index(ch));
        if (objective && g == 0)
          for (int it = 0; it < cfg.iterations; ++it)
            objective->at(size_t(it), b) = obj[size_t(it)];
      },
      jobs);
  return out;
}

}  // namespace wpe
}  // namespace echolab
