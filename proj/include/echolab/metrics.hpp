// include/echolab/metrics.hpp
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

#include <span>
#include <vector>

#include "echolab/tensor.hpp"

namespace echolab {
namespace metrics {

// Scale-invariant SDR in dB, capped at +-100.
double si_sdr(std::span<const double> est, std::span<const double> ref);

// Mean over frames of the per-frame RMS log-spectral difference.
double lsd(const Tensor<double>& est_logmel, const Tensor<double>& ref_logmel);

// Frame-summed squared error.
double mel_l2(const Tensor<double>& est, const Tensor<double>& ref);

// min(|a-b|, 360-|a-b|)
double circular_error_deg(double a, double b);

struct DoaReport {
  double acc_at_1 = 0.0;    // fraction of exact top-1 hits
  double top5_err = 0.0;    // fraction whose best-of-5 misses the truth
  double mae_at_1 = 0.0;    // circular MAE of the top-1 candidate
  double top5_mae = 0.0;    // circular MAE of the best-of-5 candidate
};

DoaReport doa_report(const std::vector<std::vector<double>>& predictions,
                     const std::vector<double>& truths, int k = 5);

}  // namespace metrics
}  // namespace echolab
