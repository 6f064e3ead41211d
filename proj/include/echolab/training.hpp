// include/echolab/training.hpp
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

#include "echolab/nnet.hpp"
#include "echolab/signals.hpp"

namespace echolab {
namespace training {

using nnet::EMat;
using nnet::EVec;

struct TrainConfig {
  int64_t total_steps = 75000;
  double peak_lr = 3e-4;
  double warmup_frac = 0.01;
  int batch_size = 8;
  uint64_t seed = 0;
  int task = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int64_t ckpt_interval = 500;
  int jobs = 1;

  void validate() const {
    ECHOLAB_REQUIRE(total_steps >= 1 && batch_size >= 1, "bad train config");
    ECHOLAB_REQUIRE(warmup_frac > 0 && warmup_frac < 1, "bad warmup fraction");
    ECHOLAB_REQUIRE(peak_lr > 0, "peak_lr must be positive");
    ECHOLAB_REQUIRE(task == 1 || task == 2, "task must be 1 or 2");
  }
};

// Linear 0 -> peak over [0, round(warmup_frac * total)], then linear
// peak -> 0 over the rest. Steps outside [0, total] clamp to the endpoints.
double lr_at(int64_t step, const TrainConfig& cfg);

// L2 on mag summed over frames plus frame-summed cross entropy.
// Gradients (optional) are d(loss)/d(logits|mag) for this utterance.
template <class S>
double task1_loss(const EMat<S>& mag, const EMat<S>& doa_logits,
                  const EMat<S>& mag_true, int doa_class, EMat<S>* d_mag,
                  EMat<S>* d_logits, double* l2_part = nullptr,
                  double* ce_part = nullptr);

// Frame-summed L2 for both heads, fixed assignment (no permutation search).
template <class S>
double task2_loss(const EMat<S>& mag0, const EMat<S>& mag1,
                  const EMat<S>& mag0_true, const EMat<S>& mag1_true,
                  EMat<S>* d_mag0, EMat<S>* d_mag1,
                  double* part0 = nullptr, double* part1 = nullptr);

template <class S>
struct AdamState {
  nnet::ModelParams<S> m, v;
  int64_t step = 0;
  int64_t skipped = 0;
};

template <class S>
AdamState<S> make_adam_state(const nnet::ModelParams<S>& params);

// Bias-corrected Adam. Non-finite gradients skip the whole update (moments
// untouched) and bump state.skipped. Sigma parameters are clamped >= 0.1
// after the update. Returns false when the update was skipped.
template <class S>
bool adam_step(nnet::ModelParams<S>* params, nnet::ModelParams<S>* grads,
               AdamState<S>* state, double lr, const TrainConfig& cfg);

// Majority vote over per-frame argmaxes; ties break to the smallest class.
template <class S>
int doa_vote(const EMat<S>& doa_logits);

template <class S>
struct TrainItem {
  std::string utt_id;
  double t60 = 0.0;
  int doa_class = 0;
  EMat<S> input;      // [T' x in_dim]
  EMat<S> mag0_true;  // [T' x out_mag_dim]
  EMat<S> mag1_true;  // task 2 only (size 0 otherwise)
};

template <class S>
struct Dataset {
  int task = 1;
  signals::FeatStats stats;
  std::vector<TrainItem<S>> items;
};

template <class S>
Dataset<S> load_dataset(const std::string& manifest_path,
                        const std::string& split, int task);

struct TrainResult {
  double first_loss = 0.0;
  double final_loss = 0.0;
  int64_t steps_run = 0;
};

// Deterministic given cfg.seed: per-epoch shuffles are derived from
// (seed, epoch) so a resumed run reproduces the unbroken one bit-for-bit.
// Writes loss.csv and step_* checkpoints under out_dir; resumes from the
// newest checkpoint when one exists.
template <class S>
TrainResult train(const nnet::ModelConfig& mcfg, const TrainConfig& tcfg,
                  const Dataset<S>& data, const std::string& out_dir,
                  nnet::ModelParams<S>* final_params = nullptr);

// JSON metric report over a dataset split (see metrics module for the
// definitions). Pass the fb/stats the dataset was built with.
template <class S>
std::string evaluate(const nnet::ModelParams<S>& params,
                     const Dataset<S>& data);

}  // namespace training
}  // namespace echolab
