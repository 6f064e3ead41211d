// include/echolab/nnet.hpp
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

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <string>
#include <vector>

#include "echolab/common.hpp"

namespace echolab {
namespace nnet {

template <class S>
using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using EVec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

enum class Task { kDereverbDoa = 1, kSeparate = 2 };

struct ModelConfig {
  int d_rate = 3;
  int in_dim = 1920;       // 160 * d_rate * channels
  int d_model = 768;       // D_dim
  int n_layers = 3;        // L_num
  int n_heads = 8;         // A_num
  int ffn_dim = 2048;      // F_dim
  int head_hidden = 1024;  // C_num
  int out_mag_dim = 960;   // 80 mel * d_rate * channels
  int n_doa_classes = 72;
  double sigma_init = 10.0;
  bool dense_variant = false;

  void validate() const {
    ECHOLAB_REQUIRE(d_model > 0 && n_heads > 0 && d_model % n_heads == 0,
                    "d_model must be divisible by n_heads");
    ECHOLAB_REQUIRE(d_rate >= 1 && in_dim > 0 && n_layers >= 1 &&
                        ffn_dim > 0 && head_hidden > 0 && out_mag_dim > 0 &&
                        n_doa_classes > 0,
                    "all model dims must be positive");
    ECHOLAB_REQUIRE(sigma_init > 0, "sigma_init must be positive");
  }

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

constexpr double kSigmaMin = 0.1;
constexpr double kLayerNormEps = 1e-5;

template <class S>
struct AttnParams {
  EMat<S> wq, wk, wv, wo;  // [d x d]
  EVec<S> bq, bk, bv, bo;
  EVec<S> sigma;  // per head, clamped >= kSigmaMin
};

template <class S>
struct LayerParams {
  EVec<S> ln1_g, ln1_b, ln2_g, ln2_b;
  AttnParams<S> attn;
  EMat<S> ffn_w1, ffn_w2;
  EVec<S> ffn_b1, ffn_b2;
  // dense variant only: projection of [H0..H_l] back to d_model
  EMat<S> in_w;
  EVec<S> in_b;
};

template <class S>
struct HeadParams {
  EMat<S> w1, w2;
  EVec<S> b1, b2;
};

template <class S>
struct ModelParams {
  ModelConfig config;
  EMat<S> preseq_w;  // [in_dim x d_model]
  EVec<S> preseq_b;
  std::vector<LayerParams<S>> layers;
  HeadParams<S> head_mag0;  // task 1 magnitude / task 2 speaker 0
  HeadParams<S> head_doa;   // task 1 only
  HeadParams<S> head_mag1;  // task 2 speaker 1
};

// Affine weights ~ N(0, 0.02^2), biases 0, layer-norm gain 1, sigma at init.
template <class S>
ModelParams<S> init_params(const ModelConfig& cfg, uint64_t seed);

template <class S>
ModelParams<S> zeros_like(const ModelParams<S>& p);

// Flattened view of every named parameter, in a fixed traversal order shared
// by the optimizer and checkpoints.
template <class S>
struct ParamRef {
  std::string name;
  S* data;
  size_t size;
  std::array<size_t, 2> shape;  // [rows, cols]; vectors are [n, 1]
  bool is_sigma;
};

template <class S>
std::vector<ParamRef<S>> param_refs(ModelParams<S>& p);

template <class S>
size_t param_count(const ModelParams<S>& p);

// pe[t, 2i] = sin(t / 10000^(2i/d)), pe[t, 2i+1] = cos(...)
template <class S>
EMat<S> sinusoidal_pe(int t_frames, int d_model);

template <class S>
struct LayerTrace {
  EMat<S> x_in;       // layer input (post dense projection)
  EMat<S> ln1_xhat, ln2_xhat;
  EVec<S> ln1_inv, ln2_inv;
  EMat<S> ln1_y, ln2_y;
  EMat<S> q, k, v;
  std::vector<EMat<S>> scores;  // per head, pre |.|
  std::vector<EMat<S>> attnw;   // per head, post softmax
  EMat<S> attn_concat;
  EMat<S> x1;  // after attention residual
  EMat<S> ffn_pre, ffn_act;
};

// Recorded intermediates of a training-mode forward; consumed by backward().
template <class S>
struct ForwardTrace {
  Task task = Task::kDereverbDoa;
  EMat<S> input;
  EMat<S> preseq_pre;
  std::vector<EMat<S>> h;  // H0 .. H_L
  std::vector<LayerTrace<S>> layers;
  std::array<EMat<S>, 3> head_pre;  // mag0, doa, mag1
  std::array<EMat<S>, 3> head_act;
};

template <class S>
struct ModelOutput {
  EMat<S> mag0;  // [T' x out_mag_dim]
  EMat<S> doa;   // [T' x n_doa_classes], task 1 only
  EMat<S> mag1;  // task 2 only
};

// valid_len < 0 means no padding; otherwise keys at frames >= valid_len are
// masked out of every attention softmax.
template <class S>
ModelOutput<S> forward(const ModelParams<S>& params, const EMat<S>& input,
                       Task task, ForwardTrace<S>* trace = nullptr,
                       int valid_len = -1);

// Exact reverse-mode gradients accumulated into *grad. Head gradients may be
// empty (size 0) when a head was not used by the loss.
template <class S>
void backward(const ModelParams<S>& params, const ForwardTrace<S>& trace,
              const EMat<S>& d_mag0, const EMat<S>& d_doa,
              const EMat<S>& d_mag1, ModelParams<S>* grad);

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
};

// Central finite differences (step 1e-5) on every parameter of a small double
// precision model against the analytic gradients. mutate_grads, when given,
// is applied to the analytic gradients first (for self-tests of the checker).
GradCheckReport grad_check(
    const ModelConfig& cfg, Task task, uint64_t seed,
    const std::function<void(ModelParams<double>*)>& mutate_grads = nullptr);

}  // namespace nnet
}  // namespace echolab
