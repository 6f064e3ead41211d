// src/training.cpp
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

#include "echolab/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>

#include "echolab/datasetio.hpp"
#include "echolab/metrics.hpp"
#include "json.hpp"

namespace echolab {
namespace training {

double lr_at(int64_t step, const TrainConfig& cfg) {
  cfg.validate();
  const int64_t total = cfg.total_steps;
  const int64_t warm =
      std::max<int64_t>(1, std::llround(cfg.warmup_frac * double(total)));
  if (step <= 0) return 0.0;
  if (step >= total) return 0.0;
  if (step <= warm) return cfg.peak_lr * double(step) / double(warm);
  return cfg.peak_lr * double(total - step) / double(total - warm);
}

template <class S>
double task1_loss(const EMat<S>& mag, const EMat<S>& doa_logits,
                  const EMat<S>& mag_true, int doa_class, EMat<S>* d_mag,
                  EMat<S>* d_logits, double* l2_part, double* ce_part) {
  ECHOLAB_REQUIRE(mag.rows() == mag_true.rows() && mag.cols() == mag_true.cols(),
                  "mag prediction/target shape mismatch");
  ECHOLAB_REQUIRE(mag.rows() == doa_logits.rows(), "frame count mismatch");
  ECHOLAB_REQUIRE(doa_class >= 0 && doa_class < doa_logits.cols(),
                  "doa class ", doa_class, " out of range");

  EMat<S> diff = mag - mag_true;
  const double l2 = double(diff.squaredNorm());
  if (d_mag) *d_mag = S(2) * diff;

  double ce = 0.0;
  if (d_logits) d_logits->resize(doa_logits.rows(), doa_logits.cols());
  for (Eigen::Index t = 0; t < doa_logits.rows(); ++t) {
    const S mx = doa_logits.row(t).maxCoeff();
    Eigen::Array<S, 1, Eigen::Dynamic> e =
        (doa_logits.row(t).array() - mx).exp();
    const S z = e.sum();
    ce += double(mx) + std::log(double(z)) - double(doa_logits(t, doa_class));
    if (d_logits) {
      d_logits->row(t) = (e / z).matrix();
      (*d_logits)(t, doa_class) -= S(1);
    }
  }
  if (l2_part) *l2_part = l2;
  if (ce_part) *ce_part = ce;
  return l2 + ce;
}

template <class S>
double task2_loss(const EMat<S>& mag0, const EMat<S>& mag1,
                  const EMat<S>& mag0_true, const EMat<S>& mag1_true,
                  EMat<S>* d_mag0, EMat<S>* d_mag1, double* part0,
                  double* part1) {
  ECHOLAB_REQUIRE(
      mag0.rows() == mag0_true.rows() && mag0.cols() == mag0_true.cols() &&
          mag1.rows() == mag1_true.rows() && mag1.cols() == mag1_true.cols(),
      "prediction/target shape mismatch");
  EMat<S> diff0 = mag0 - mag0_true;
  EMat<S> diff1 = mag1 - mag1_true;
  if (d_mag0) *d_mag0 = S(2) * diff0;
  if (d_mag1) *d_mag1 = S(2) * diff1;
  const double p0 = double(diff0.squaredNorm());
  const double p1 = double(diff1.squaredNorm());
  if (part0) *part0 = p0;
  if (part1) *part1 = p1;
  return p0 + p1;
}

template <class S>
AdamState<S> make_adam_state(const nnet::ModelParams<S>& params) {
  AdamState<S> st;
  st.m = nnet::zeros_like(params);
  st.v = nnet::zeros_like(params);
  return st;
}

template <class S>
bool adam_step(nnet::ModelParams<S>* params, nnet::ModelParams<S>* grads,
               AdamState<S>* state, double lr, const TrainConfig& cfg) {
  auto gr = nnet::param_refs(*grads);
  for (const auto& r : gr)
    for (size_t i = 0; i < r.size; ++i)
      if (!std::isfinite(double(r.data[i]))) {
        ++state->skipped;
        std::cerr << "adam: non-finite gradient in " << r.name
                  << ", skipping update\n";
        return false;
      }

  state->step += 1;
  const double t = double(state->step);
  const S b1 = S(cfg.adam_beta1), b2 = S(cfg.adam_beta2);
  const S corr1 = S(1.0 / (1.0 - std::pow(cfg.adam_beta1, t)));
  const S corr2 = S(1.0 / (1.0 - std::pow(cfg.adam_beta2, t)));
  const S eps = S(cfg.adam_eps);
  const S step_lr = S(lr);

  auto pr = nnet::param_refs(*params);
  auto mr = nnet::param_refs(state->m);
  auto vr = nnet::param_refs(state->v);
  for (size_t r = 0; r < pr.size(); ++r) {
    S* p = pr[r].data;
    S* g = gr[r].data;
    S* m = mr[r].data;
    S* v = vr[r].data;
    for (size_t i = 0; i < pr[r].size; ++i) {
      m[i] = b1 * m[i] + (S(1) - b1) * g[i];
      v[i] = b2 * v[i] + (S(1) - b2) * g[i] * g[i];
      const S mhat = m[i] * corr1;
      const S vhat = v[i] * corr2;
      p[i] -= step_lr * mhat / (std::sqrt(vhat) + eps);
    }
    if (pr[r].is_sigma)
      for (size_t i = 0; i < pr[r].size; ++i)
        p[i] = std::max(p[i], S(nnet::kSigmaMin));
  }
  return true;
}

template <class S>
int doa_vote(const EMat<S>& doa_logits) {
  ECHOLAB_REQUIRE(doa_logits.rows() >= 1, "no frames to vote over");
  std::vector<int> counts(size_t(doa_logits.cols()), 0);
  for (Eigen::Index t = 0; t < doa_logits.rows(); ++t) {
    Eigen::Index arg = 0;
    doa_logits.row(t).maxCoeff(&arg);
    ++counts[size_t(arg)];
  }
  int best = 0;
  for (int c = 1; c < int(counts.size()); ++c)
    if (counts[size_t(c)] > counts[size_t(best)]) best = c;
  return best;
}

namespace {

uint64_t mix64(uint64_t a, uint64_t b) {
  uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  return x;
}

template <class S>
EMat<S> tensor_to_emat(const Tensor<float>& t) {
  ECHOLAB_REQUIRE(t.ndim() == 2, "expected a 2-d tensor");
  EMat<S> m(Eigen::Index(t.dim(0)), Eigen::Index(t.dim(1)));
  for (size_t i = 0; i < t.dim(0); ++i)
    for (size_t j = 0; j < t.dim(1); ++j)
      m(Eigen::Index(i), Eigen::Index(j)) = S(t.at(i, j));
  return m;
}

}  // namespace

template <class S>
Dataset<S> load_dataset(const std::string& manifest_path,
                        const std::string& split, int task) {
  namespace fs = std::filesystem;
  auto entries = datasetio::read_manifest(manifest_path);
  const fs::path dir = fs::path(manifest_path).parent_path();

  Dataset<S> ds;
  ds.task = task;
  ds.stats = datasetio::read_stats((dir / "stats.ntsr").string());
  for (const auto& e : entries) {
    if (!split.empty() && e.split != split) continue;
    ECHOLAB_REQUIRE(e.task == task, "manifest entry ", e.utt_id,
                    " was synthesized for task ", e.task);
    TrainItem<S> item;
    item.utt_id = e.utt_id;
    item.t60 = e.scene.t60;
    item.doa_class = e.doa_class;
    item.input = tensor_to_emat<S>(
        datasetio::read_tensor<float>((dir / e.feature_path).string()));
    ECHOLAB_REQUIRE(!e.target_paths.empty(), "entry ", e.utt_id,
                    " has no targets; run featurize first");
    item.mag0_true = tensor_to_emat<S>(
        datasetio::read_tensor<float>((dir / e.target_paths[0]).string()));
    if (task == 2) {
      ECHOLAB_REQUIRE(e.target_paths.size() == 2, "task 2 entry ", e.utt_id,
                      " needs two targets");
      item.mag1_true = tensor_to_emat<S>(
          datasetio::read_tensor<float>((dir / e.target_paths[1]).string()));
    }
    ds.items.push_back(std::move(item));
  }
  ECHOLAB_REQUIRE(!ds.items.empty(), "no utterances in split '", split, "'");
  return ds;
}

namespace {

template <class S>
struct StepLoss {
  double total = 0.0, part_a = 0.0, part_b = 0.0;
};

// forward/backward for one utterance; grads scaled by `weight` accumulate
// into *grad
template <class S>
StepLoss<S> item_grads(const nnet::ModelParams<S>& params,
                       const TrainItem<S>& item, int task, double weight,
                       nnet::ModelParams<S>* grad) {
  nnet::ForwardTrace<S> trace;
  const nnet::Task t = task == 1 ? nnet::Task::kDereverbDoa
                                 : nnet::Task::kSeparate;
  nnet::ModelOutput<S> out = nnet::forward(params, item.input, t, &trace);

  StepLoss<S> loss;
  EMat<S> d0, d1;
  if (task == 1) {
    loss.total = task1_loss(out.mag0, out.doa, item.mag0_true, item.doa_class,
                            &d0, &d1, &loss.part_a, &loss.part_b);
    d0 *= S(weight);
    d1 *= S(weight);
    nnet::backward(params, trace, d0, d1, EMat<S>(), grad);
  } else {
    loss.total = task2_loss(out.mag0, out.mag1, item.mag0_true, item.mag1_true,
                            &d0, &d1, &loss.part_a, &loss.part_b);
    d0 *= S(weight);
    d1 *= S(weight);
    nnet::backward(params, trace, d0, EMat<S>(), d1, grad);
  }
  return loss;
}

template <class S>
void add_params(nnet::ModelParams<S>* acc, nnet::ModelParams<S>& inc) {
  auto a = nnet::param_refs(*acc);
  auto b = nnet::param_refs(inc);
  for (size_t r = 0; r < a.size(); ++r)
    for (size_t i = 0; i < a[r].size; ++i) a[r].data[i] += b[r].data[i];
}

}  // namespace

template <class S>
TrainResult train(const nnet::ModelConfig& mcfg, const TrainConfig& tcfg,
                  const Dataset<S>& data, const std::string& out_dir,
                  nnet::ModelParams<S>* final_params) {
  namespace fs = std::filesystem;
  mcfg.validate();
  tcfg.validate();
  ECHOLAB_REQUIRE(!data.items.empty(), "empty dataset");
  ECHOLAB_REQUIRE(data.task == tcfg.task, "dataset/config task mismatch");
  fs::create_directories(out_dir);

  nnet::ModelParams<S> params;
  AdamState<S> opt;
  int64_t start_step = 0;

  const auto resume = datasetio::latest_checkpoint(out_dir);
  if (resume) {
    auto ckpt = datasetio::load_checkpoint<S>(*resume, /*want_optimizer=*/true);
    ECHOLAB_REQUIRE(ckpt.has_optimizer,
                    "checkpoint has no optimizer state, cannot resume");
    params = std::move(ckpt.params);
    opt = make_adam_state(params);
    opt.m = std::move(ckpt.adam_m);
    opt.v = std::move(ckpt.adam_v);
    opt.step = ckpt.step;
    start_step = ckpt.step;
    std::cerr << "resuming from " << *resume << " at step " << start_step
              << "\n";
  } else {
    params = nnet::init_params<S>(mcfg, tcfg.seed);
    opt = make_adam_state(params);
  }

  const size_t n = data.items.size();
  const int64_t batches_per_epoch =
      int64_t((n + size_t(tcfg.batch_size) - 1) / size_t(tcfg.batch_size));

  const fs::path loss_csv = fs::path(out_dir) / "loss.csv";
  std::ofstream csv;
  if (start_step == 0) {
    csv.open(loss_csv);
    csv << "step,loss,lr,loss_mag,loss_aux\n";
  } else {
    csv.open(loss_csv, std::ios::app);
  }

  TrainResult result;
  std::vector<size_t> perm(n);
  int64_t perm_epoch = -1;

  for (int64_t step = start_step + 1; step <= tcfg.total_steps; ++step) {
    const int64_t epoch = (step - 1) / batches_per_epoch;
    const int64_t bidx = (step - 1) % batches_per_epoch;
    if (epoch != perm_epoch) {
      std::iota(perm.begin(), perm.end(), size_t(0));
      Rng rng(mix64(tcfg.seed, uint64_t(epoch)));
      rng.shuffle(perm);
      perm_epoch = epoch;
    }
    const size_t lo = size_t(bidx) * size_t(tcfg.batch_size);
    const size_t hi = std::min(n, lo + size_t(tcfg.batch_size));
    const size_t bsz = hi - lo;
    const double weight = 1.0 / double(bsz);

    // per-item gradients, reduced in index order for determinism
    std::vector<nnet::ModelParams<S>> grads(bsz);
    std::vector<StepLoss<S>> losses(bsz);
    parallel_for(
        bsz,
        [&](size_t i) {
          grads[i] = nnet::zeros_like(params);
          losses[i] = item_grads(params, data.items[perm[lo + i]], tcfg.task,
                                 weight, &grads[i]);
        },
        tcfg.jobs);
    nnet::ModelParams<S> grad = nnet::zeros_like(params);
    double loss = 0.0, part_a = 0.0, part_b = 0.0;
    for (size_t i = 0; i < bsz; ++i) {
      add_params(&grad, grads[i]);
      loss += losses[i].total * weight;
      part_a += losses[i].part_a * weight;
      part_b += losses[i].part_b * weight;
    }

    const double lr = lr_at(step, tcfg);
    adam_step(&params, &grad, &opt, lr, tcfg);

    if (step == start_step + 1) result.first_loss = loss;
    result.final_loss = loss;
    result.steps_run = step;
    csv << step << "," << loss << "," << lr << "," << part_a << "," << part_b
        << "\n";

    if (step % tcfg.ckpt_interval == 0 || step == tcfg.total_steps) {
      datasetio::CheckpointData<S> ckpt;
      ckpt.params = params;
      ckpt.adam_m = opt.m;
      ckpt.adam_v = opt.v;
      ckpt.has_optimizer = true;
      ckpt.step = step;
      ckpt.seed = tcfg.seed;
      ckpt.stats = data.stats;
      char name[32];
      std::snprintf(name, sizeof(name), "step_%08lld",
                    static_cast<long long>(step));
      datasetio::save_checkpoint((fs::path(out_dir) / name).string(), ckpt);
    }
  }
  if (final_params) *final_params = std::move(params);
  return result;
}

template <class S>
std::string evaluate(const nnet::ModelParams<S>& params,
                     const Dataset<S>& data) {
  ECHOLAB_REQUIRE(!data.items.empty(), "empty dataset");
  const int task = data.task;

  nlohmann::json per_utt = nlohmann::json::array();
  std::map<double, std::vector<double>> l2_by_t60;
  std::map<double, std::vector<double>> lsd_by_t60;
  double vote_hits = 0.0, frame_hits = 0.0, frames_total = 0.0;
  double assign_hits = 0.0;

  // per-dim stddev for reporting LSD in the raw log-mel domain
  const auto& stddev = data.stats.stddev;

  std::vector<std::string> reports(data.items.size());
  std::vector<double> l2s(data.items.size()), lsds(data.items.size());
  std::vector<int> votes(data.items.size(), -1);
  std::vector<double> fhits(data.items.size(), 0.0),
      fcount(data.items.size(), 0.0);
  std::vector<int> assigns(data.items.size(), 0);

  for (size_t i = 0; i < data.items.size(); ++i) {
    const TrainItem<S>& item = data.items[i];
    const nnet::Task t =
        task == 1 ? nnet::Task::kDereverbDoa : nnet::Task::kSeparate;
    nnet::ModelOutput<S> out = nnet::forward(params, item.input, t);

    double l2, lsd_val;
    {
      EMat<S> diff = out.mag0 - item.mag0_true;
      l2 = double(diff.squaredNorm());
      // scale columns back to the log-mel domain for LSD
      double acc = 0.0;
      for (Eigen::Index r = 0; r < diff.rows(); ++r) {
        double fr = 0.0;
        for (Eigen::Index c2 = 0; c2 < diff.cols(); ++c2) {
          const double sd = stddev.empty() ? 1.0 : stddev[size_t(c2) % 80];
          const double d = double(diff(r, c2)) * sd;
          fr += d * d;
        }
        acc += std::sqrt(fr / double(diff.cols()));
      }
      lsd_val = acc / double(diff.rows());
    }
    l2s[i] = l2;
    lsds[i] = lsd_val;

    if (task == 1) {
      votes[i] = doa_vote(out.doa);
      for (Eigen::Index r = 0; r < out.doa.rows(); ++r) {
        Eigen::Index arg = 0;
        out.doa.row(r).maxCoeff(&arg);
        if (int(arg) == item.doa_class) fhits[i] += 1.0;
      }
      fcount[i] = double(out.doa.rows());
    } else {
      const double to_own = double((out.mag0 - item.mag0_true).squaredNorm());
      const double to_other = double((out.mag0 - item.mag1_true).squaredNorm());
      assigns[i] = to_own < to_other ? 1 : 0;
    }
  }

  for (size_t i = 0; i < data.items.size(); ++i) {
    const TrainItem<S>& item = data.items[i];
    nlohmann::json u;
    u["utt_id"] = item.utt_id;
    u["t60"] = item.t60;
    u["mel_l2"] = l2s[i];
    u["lsd"] = lsds[i];
    if (task == 1) {
      u["doa_true"] = item.doa_class;
      u["doa_vote"] = votes[i];
      u["frame_acc"] = fcount[i] > 0 ? fhits[i] / fcount[i] : 0.0;
      vote_hits += votes[i] == item.doa_class ? 1.0 : 0.0;
      frame_hits += fhits[i];
      frames_total += fcount[i];
    } else {
      u["head0_matches_target"] = assigns[i] == 1;
      assign_hits += assigns[i];
    }
    l2_by_t60[item.t60].push_back(l2s[i]);
    lsd_by_t60[item.t60].push_back(lsds[i]);
    per_utt.push_back(u);
  }

  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0
                     : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  };

  nlohmann::json summary;
  summary["utterances"] = data.items.size();
  summary["mel_l2_mean"] = mean(l2s);
  summary["lsd_mean"] = mean(lsds);
  if (task == 1) {
    summary["doa_vote_acc"] = vote_hits / double(data.items.size());
    summary["doa_frame_acc"] =
        frames_total > 0 ? frame_hits / frames_total : 0.0;
  } else {
    summary["head0_assignment_acc"] = assign_hits / double(data.items.size());
  }
  nlohmann::json by_t60 = nlohmann::json::object();
  for (const auto& [t60, v] : l2_by_t60) {
    nlohmann::json g;
    g["mel_l2_mean"] = mean(v);
    g["lsd_mean"] = mean(lsd_by_t60[t60]);
    g["count"] = v.size();
    by_t60[str_cat(t60)] = g;
  }
  summary["by_t60"] = by_t60;

  nlohmann::json report;
  report["task"] = task;
  report["summary"] = summary;
  report["per_utterance"] = per_utt;
  return report.dump(2);
}

#define ECHOLAB_INSTANTIATE_TRAIN(S)                                          \
  template double task1_loss<S>(const EMat<S>&, const EMat<S>&,               \
                                const EMat<S>&, int, EMat<S>*, EMat<S>*,      \
                                double*, double*);                            \
  template double task2_loss<S>(const EMat<S>&, const EMat<S>&,               \
                                const EMat<S>&, const EMat<S>&, EMat<S>*,     \
                                EMat<S>*, double*, double*);                  \
  template AdamState<S> make_adam_state<S>(const nnet::ModelParams<S>&);      \
  template bool adam_step<S>(nnet::ModelParams<S>*, nnet::ModelParams<S>*,    \
                             AdamState<S>*, double, const TrainConfig&);      \
  template int doa_vote<S>(const EMat<S>&);                                   \
  template Dataset<S> load_dataset<S>(const std::string&, const std::string&, \
                                      int);                                   \
  template TrainResult train<S>(const nnet::ModelConfig&, const TrainConfig&, \
                                const Dataset<S>&, const std::string&,        \
                                nnet::ModelParams<S>*);                       \
  template std::string evaluate<S>(const nnet::ModelParams<S>&,               \
                                   const Dataset<S>&);

ECHOLAB_INSTANTIATE_TRAIN(float)
ECHOLAB_INSTANTIATE_TRAIN(double)
#undef ECHOLAB_INSTANTIATE_TRAIN

}  // namespace training
}  // namespace echolab
