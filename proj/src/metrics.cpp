// src/metrics.cpp
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

#include "echolab/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace echolab {
namespace metrics {

double si_sdr(std::span<const double> est, std::span<const double> ref) {
  ECHOLAB_REQUIRE(est.size() == ref.size(), "length mismatch (", est.size(),
                  " vs ", ref.size(), ")");
  ECHOLAB_REQUIRE(!ref.empty(), "empty reference");
  double ref_energy = 0.0, dot = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) {
    ref_energy += ref[i] * ref[i];
    dot += est[i] * ref[i];
  }
  ECHOLAB_REQUIRE(ref_energy > 0.0, "all-zero reference");

  const double alpha = dot / ref_energy;
  double sig = 0.0, err = 0.0;
  for (size_t i = 0; i < ref.size(); ++i) {
    const double s = alpha * ref[i];
    const double e = est[i] - s;
    sig += s * s;
    err += e * e;
  }
  if (err <= 0.0) return 100.0;
  if (sig <= 0.0) return -100.0;
  return std::clamp(10.0 * std::log10(sig / err), -100.0, 100.0);
}

double lsd(const Tensor<double>& est_logmel, const Tensor<double>& ref_logmel) {
  ECHOLAB_REQUIRE(same_shape(est_logmel, ref_logmel), "shape mismatch");
  ECHOLAB_REQUIRE(est_logmel.ndim() >= 2, "expected [.. x T x D]");
  const size_t d = est_logmel.dim(est_logmel.ndim() - 1);
  const size_t frames = est_logmel.size() / d;
  double acc = 0.0;
  for (size_t t = 0; t < frames; ++t) {
    double fr = 0.0;
    const double* a = est_logmel.data() + t * d;
    const double* b = ref_logmel.data() + t * d;
    for (size_t i = 0; i < d; ++i) fr += (a[i] - b[i]) * (a[i] - b[i]);
    acc += std::sqrt(fr / double(d));
  }
  return acc / double(frames);
}

double mel_l2(const Tensor<double>& est, const Tensor<double>& ref) {
  ECHOLAB_REQUIRE(same_shape(est, ref), "shape mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < est.size(); ++i) {
    const double d = est[i] - ref[i];
    acc += d * d;
  }
  return acc;
}

double circular_error_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

DoaReport doa_report(const std::vector<std::vector<double>>& predictions,
                     const std::vector<double>& truths, int k) {
  ECHOLAB_REQUIRE(!predictions.empty(), "empty prediction list");
  ECHOLAB_REQUIRE(predictions.size() == truths.size(),
                  "prediction/truth count mismatch");
  DoaReport rep;
  const double n = double(predictions.size());
  for (size_t i = 0; i < predictions.size(); ++i) {
    const auto& cand = predictions[i];
    ECHOLAB_REQUIRE(!cand.empty(), "utterance ", i, " has no candidates");
    const double top1 = circular_error_deg(cand[0], truths[i]);
    double best = top1;
    bool hit5 = top1 == 0.0;
    for (size_t j = 1; j < cand.size() && j < size_t(k); ++j) {
      const double e = circular_error_deg(cand[j], truths[i]);
      best = std::min(best, e);
      hit5 = hit5 || e == 0.0;
    }
    if (top1 == 0.0) rep.acc_at_1 += 1.0;
    if (!hit5) rep.top5_err += 1.0;
    rep.mae_at_1 += top1;
    rep.top5_mae += best;
  }
  rep.acc_at_1 /= n;
  rep.top5_err /= n;
  rep.mae_at_1 /= n;
  rep.top5_mae /= n;
  return rep;
}

}  // namespace metrics
}  // namespace echolab
