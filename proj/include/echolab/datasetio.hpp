// include/echolab/datasetio.hpp
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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "echolab/nnet.hpp"
#include "echolab/roomsim.hpp"
#include "echolab/signals.hpp"
#include "echolab/tensor.hpp"

namespace echolab {
namespace datasetio {

// Binary tensor file: magic "NTSR", version u32, dtype u32, ndim u32,
// dims u64 each, then a little-endian row-major payload.
enum class Dtype : uint32_t { kF32 = 1, kF64 = 2, kI64 = 3 };

template <class T>
void write_tensor(const std::string& path, const Tensor<T>& t);
template <class T>
Tensor<T> read_tensor(const std::string& path);

Dtype peek_dtype(const std::string& path);

struct ManifestEntry {
  std::string utt_id;
  std::vector<std::string> source_wavs;  // 1 (task 1) or 2 (task 2)
  roomsim::RoomScene scene;
  int doa_class = 0;  // source_angle / 5
  std::string split;  // tr | dt | et
  std::string mixture_wav;
  std::vector<std::string> clean_wavs;    // per source
  std::string feature_path;               // Y' tensor
  std::vector<std::string> target_paths;  // per source mag targets
  int task = 1;

  std::string to_json_line() const;
  static ManifestEntry from_json_line(const std::string& line);
};

std::vector<ManifestEntry> read_manifest(const std::string& path);

// Append-only by utt_id: entries already present are not rewritten. Returns
// the number of lines actually appended.
size_t append_manifest(const std::string& path,
                       const std::vector<ManifestEntry>& entries);

struct SynthConfig {
  int task = 1;
  int count = 10;
  uint64_t seed = 0;
  std::string out_dir;
  double tr_frac = 0.8;
  double dt_frac = 0.1;
  int sample_rate = 16000;
  int jobs = 0;
};

// Renders `count` utterances from the wav corpus through sampled scenes and
// appends their manifest lines. Features are produced separately by
// featurize_dataset.
std::vector<ManifestEntry> synth_dataset(const std::string& corpus_dir,
                                         const SynthConfig& cfg);

// Computes train-split normalization stats, then writes Y' features and mag
// targets for every manifest entry plus <dir>/stats.ntsr ([2 x D]: mean, std).
signals::FeatStats featurize_dataset(const std::string& manifest_path,
                                     int d_rate = 3, int jobs = 0);

signals::FeatStats read_stats(const std::string& path);
void write_stats(const std::string& path, const signals::FeatStats& stats);

// Checkpoint: a directory of tensor files (one per parameter, plus optimizer
// moments) and a manifest.json with config, step, seed and stats.
template <class S>
struct CheckpointData {
  nnet::ModelParams<S> params;
  nnet::ModelParams<S> adam_m, adam_v;
  bool has_optimizer = false;
  int64_t step = 0;
  uint64_t seed = 0;
  signals::FeatStats stats;
};

template <class S>
void save_checkpoint(const std::string& dir, const CheckpointData<S>& ckpt);

template <class S>
CheckpointData<S> load_checkpoint(const std::string& dir,
                                  bool want_optimizer = false);

// Directory of the highest-numbered step_* checkpoint under dir, if any.
std::optional<std::string> latest_checkpoint(const std::string& dir);

}  // namespace datasetio
}  // namespace echolab
