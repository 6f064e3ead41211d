// src/datasetio.cpp
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

#include "echolab/datasetio.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "json.hpp"

namespace echolab {
namespace datasetio {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'N', 'T', 'S', 'R'};
constexpr uint32_t kVersion = 1;

template <class T>
Dtype dtype_of();
template <>
Dtype dtype_of<float>() { return Dtype::kF32; }
template <>
Dtype dtype_of<double>() { return Dtype::kF64; }
template <>
Dtype dtype_of<int64_t>() { return Dtype::kI64; }

const char* dtype_name(Dtype d) {
  switch (d) {
    case Dtype::kF32: return "f32";
    case Dtype::kF64: return "f64";
    case Dtype::kI64: return "i64";
  }
  return "?";
}

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {(unsigned char)(v & 0xff), (unsigned char)(v >> 8 & 0xff),
                        (unsigned char)(v >> 16 & 0xff),
                        (unsigned char)(v >> 24 & 0xff)};
  os.write(reinterpret_cast<char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (unsigned char)(v >> (8 * i) & 0xff);
  os.write(reinterpret_cast<char*>(b), 8);
}

uint32_t take_u32(std::istream& is, const std::string& path,
                  const char* field) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  ECHOLAB_REQUIRE(is.gcount() == 4, path, ": truncated ", field);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
         uint32_t(b[3]) << 24;
}

uint64_t take_u64(std::istream& is, const std::string& path,
                  const char* field) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  ECHOLAB_REQUIRE(is.gcount() == 8, path, ": truncated ", field);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
  return v;
}

}  // namespace

template <class T>
void write_tensor(const std::string& path, const Tensor<T>& t) {
  ECHOLAB_REQUIRE(t.ndim() >= 1, "cannot write a rank-0 tensor");
  std::ofstream os(path, std::ios::binary);
  ECHOLAB_REQUIRE(os.good(), "cannot open for write: ", path);
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, uint32_t(dtype_of<T>()));
  put_u32(os, uint32_t(t.ndim()));
  for (size_t d : t.shape()) put_u64(os, uint64_t(d));
  // payload assumes a little-endian host; asserted at configure time
  os.write(reinterpret_cast<const char*>(t.data()),
           std::streamsize(t.size() * sizeof(T)));
  ECHOLAB_REQUIRE(os.good(), "short write: ", path);
}

template <class T>
Tensor<T> read_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  ECHOLAB_REQUIRE(is.good(), "cannot open: ", path);
  char magic[4];
  is.read(magic, 4);
  ECHOLAB_REQUIRE(is.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0, path,
                  ": bad magic (expected NTSR)");
  const uint32_t version = take_u32(is, path, "version");
  ECHOLAB_REQUIRE(version == kVersion, path, ": unsupported version ", version);
  const uint32_t dtype = take_u32(is, path, "dtype");
  ECHOLAB_REQUIRE(dtype == uint32_t(dtype_of<T>()), path,
                  ": dtype mismatch (file has ", dtype_name(Dtype(dtype)),
                  ", caller wants ", dtype_name(dtype_of<T>()), ")");
  const uint32_t ndim = take_u32(is, path, "ndim");
  ECHOLAB_REQUIRE(ndim >= 1 && ndim <= 8, path, ": implausible ndim ", ndim);
  std::vector<size_t> shape(ndim);
  for (uint32_t i = 0; i < ndim; ++i)
    shape[i] = size_t(take_u64(is, path, "dims"));

  Tensor<T> t(shape);
  const std::streamsize want = std::streamsize(t.size() * sizeof(T));
  is.read(reinterpret_cast<char*>(t.data()), want);
  ECHOLAB_REQUIRE(is.gcount() == want, path, ": truncated payload (expected ",
                  want, " bytes, got ", is.gcount(), ")");
  return t;
}

template void write_tensor<float>(const std::string&, const Tensor<float>&);
template void write_tensor<double>(const std::string&, const Tensor<double>&);
template void write_tensor<int64_t>(const std::string&, const Tensor<int64_t>&);
template Tensor<float> read_tensor<float>(const std::string&);
template Tensor<double> read_tensor<double>(const std::string&);
template Tensor<int64_t> read_tensor<int64_t>(const std::string&);

Dtype peek_dtype(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  ECHOLAB_REQUIRE(is.good(), "cannot open: ", path);
  char magic[4];
  is.read(magic, 4);
  ECHOLAB_REQUIRE(is.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0, path,
                  ": bad magic (expected NTSR)");
  take_u32(is, path, "version");
  return Dtype(take_u32(is, path, "dtype"));
}

std::string ManifestEntry::to_json_line() const {
  nlohmann::json j;
  j["utt_id"] = utt_id;
  j["task"] = task;
  j["source_wavs"] = source_wavs;
  j["scene"] = nlohmann::json::parse(scene.to_json());
  j["doa_class"] = doa_class;
  j["split"] = split;
  j["mixture_wav"] = mixture_wav;
  j["clean_wavs"] = clean_wavs;
  j["feature_path"] = feature_path;
  j["target_paths"] = target_paths;
  return j.dump();
}

ManifestEntry ManifestEntry::from_json_line(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  ManifestEntry e;
  e.utt_id = j.at("utt_id").get<std::string>();
  e.task = j.value("task", 1);
  e.source_wavs = j.at("source_wavs").get<std::vector<std::string>>();
  e.scene = roomsim::RoomScene::from_json(j.at("scene").dump());
  e.doa_class = j.at("doa_class").get<int>();
  e.split = j.at("split").get<std::string>();
  e.mixture_wav = j.value("mixture_wav", "");
  e.clean_wavs = j.value("clean_wavs", std::vector<std::string>{});
  e.feature_path = j.value("feature_path", "");
  e.target_paths = j.value("target_paths", std::vector<std::string>{});
  ECHOLAB_REQUIRE(e.doa_class >= 0 && e.doa_class < 72, "doa_class ",
                  e.doa_class, " out of range in manifest");
  return e;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream is(path);
  ECHOLAB_REQUIRE(is.good(), "cannot open manifest: ", path);
  std::vector<ManifestEntry> entries;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      entries.push_back(ManifestEntry::from_json_line(line));
    } catch (const std::exception& e) {
      throw DataError(str_cat(path, ":", lineno, ": ", e.what()));
    }
  }
  return entries;
}

size_t append_manifest(const std::string& path,
                       const std::vector<ManifestEntry>& entries) {
  std::set<std::string> existing;
  if (fs::exists(path))
    for (const auto& e : read_manifest(path)) existing.insert(e.utt_id);

  std::ofstream os(path, std::ios::app);
  ECHOLAB_REQUIRE(os.good(), "cannot open manifest for append: ", path);
  size_t added = 0;
  for (const auto& e : entries) {
    if (existing.count(e.utt_id)) continue;
    os << e.to_json_line() << "\n";
    ++added;
  }
  return added;
}

namespace {

uint64_t mix64(uint64_t a, uint64_t b) {
  uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  return x;
}

}  // namespace

std::vector<ManifestEntry> synth_dataset(const std::string& corpus_dir,
                                         const SynthConfig& cfg) {
  ECHOLAB_REQUIRE(cfg.task == 1 || cfg.task == 2, "task must be 1 or 2");
  ECHOLAB_REQUIRE(cfg.count >= 1, "count must be >= 1");
  ECHOLAB_REQUIRE(!cfg.out_dir.empty(), "out_dir required");

  // corpus listing; unreadable or non-conforming files are warned and dropped
  std::vector<std::string> files;
  ECHOLAB_REQUIRE(fs::is_directory(corpus_dir), "corpus dir not found: ",
                  corpus_dir);
  for (const auto& e : fs::directory_iterator(corpus_dir))
    if (e.is_regular_file() && e.path().extension() == ".wav")
      files.push_back(e.path().string());
  std::sort(files.begin(), files.end());

  std::vector<std::vector<double>> corpus;
  for (const auto& f : files) {
    try {
      MultiWave w = read_wav(f);
      ECHOLAB_REQUIRE(w.channels() == 1, "not mono");
      ECHOLAB_REQUIRE(w.sample_rate == cfg.sample_rate, "sample rate ",
                      w.sample_rate, " != ", cfg.sample_rate);
      corpus.emplace_back(w.channel(0), w.channel(0) + w.frames());
    } catch (const std::exception& err) {
      std::cerr << "skipping " << f << ": " << err.what() << "\n";
    }
  }
  ECHOLAB_REQUIRE(!corpus.empty(), "no usable wav files in ", corpus_dir);

  fs::create_directories(fs::path(cfg.out_dir) / "wav");
  fs::create_directories(fs::path(cfg.out_dir) / "feat");

  std::vector<ManifestEntry> entries(size_t(cfg.count));
  parallel_for(
      size_t(cfg.count),
      [&](size_t i) {
        const uint64_t useed = mix64(cfg.seed, uint64_t(i));
        char buf[32];
        std::snprintf(buf, sizeof(buf), "utt_%06zu", i);
        const std::string utt = buf;

        roomsim::RoomScene scene = roomsim::sample_scene(cfg.task, useed);
        Rng rng(mix64(useed, 0xC0FFEE));
        std::vector<std::vector<double>> sources;
        const size_t i0 = size_t(rng.uniform_int(int(corpus.size())));
        sources.push_back(corpus[i0]);
        if (cfg.task == 2) {
          size_t i1 = i0;
          if (corpus.size() > 1)
            i1 = (i0 + 1 + size_t(rng.uniform_int(int(corpus.size()) - 1))) %
                 corpus.size();
          sources.push_back(corpus[i1]);
        }

        roomsim::RenderResult render =
            roomsim::render_scene(sources, scene, cfg.sample_rate, 1);

        ManifestEntry e;
        e.utt_id = utt;
        e.task = cfg.task;
        e.scene = scene;
        e.doa_class =
            (int(std::lround(scene.source_angle_deg / 5.0)) % 72 + 72) % 72;
        const double r = rng.uniform();
        e.split = r < cfg.tr_frac ? "tr"
                  : r < cfg.tr_frac + cfg.dt_frac ? "dt" : "et";
        for (size_t s = 0; s < sources.size(); ++s)
          e.source_wavs.push_back(files.size() > s ? files[s] : "");
        e.mixture_wav = "wav/" + utt + "_mix.wav";
        write_wav((fs::path(cfg.out_dir) / e.mixture_wav).string(),
                  render.mixture);
        for (size_t s = 0; s < render.cleans.size(); ++s) {
          const std::string p = "wav/" + utt + "_clean" + std::to_string(s) + ".wav";
          write_wav((fs::path(cfg.out_dir) / p).string(), render.cleans[s]);
          e.clean_wavs.push_back(p);
          e.target_paths.push_back("feat/" + utt + "_target" +
                                   std::to_string(s) + ".ntsr");
        }
        e.feature_path = "feat/" + utt + "_input.ntsr";
        entries[i] = std::move(e);
      },
      cfg.jobs);

  append_manifest((fs::path(cfg.out_dir) / "manifest.jsonl").string(), entries);
  return entries;
}

namespace {

signals::FeatTensor combined_features(const MultiWave& wave,
                                      const Tensor<double>& fb,
                                      const signals::StftConfig& stft_cfg) {
  signals::ComplexSpec spec = signals::stft(wave, stft_cfg);
  signals::FeatTensor mag = signals::logmel(spec, fb);
  signals::FeatTensor phase = signals::phase_features(spec, int(fb.dim(0)));
  return signals::assemble_features(mag, phase);
}

Tensor<float> to_f32(const Tensor<double>& t) {
  Tensor<float> out(t.shape());
  for (size_t i = 0; i < t.size(); ++i) out[i] = float(t[i]);
  return out;
}

}  // namespace

signals::FeatStats featurize_dataset(const std::string& manifest_path,
                                     int d_rate, int jobs) {
  const fs::path dir = fs::path(manifest_path).parent_path();
  auto entries = read_manifest(manifest_path);
  ECHOLAB_REQUIRE(!entries.empty(), "empty manifest: ", manifest_path);

  const signals::StftConfig stft_cfg;
  int rate = 16000;
  {
    MultiWave probe = read_wav((dir / entries[0].mixture_wav).string());
    rate = probe.sample_rate;
  }
  const Tensor<double> fb = signals::mel_filterbank(80, 80.0, 7000.0,
                                                    stft_cfg.fft_len, rate);

  // pass 1: normalization stats over the train split
  const size_t width = 160;
  std::vector<double> sum(width, 0.0), sumsq(width, 0.0);
  size_t frames = 0;
  for (const auto& e : entries) {
    if (e.split != "tr") continue;
    MultiWave mix = read_wav((dir / e.mixture_wav).string());
    signals::FeatTensor feats = combined_features(mix, fb, stft_cfg);
    const size_t rows = feats.data.size() / width;
    const double* p = feats.data.data();
    for (size_t r = 0; r < rows; ++r, p += width)
      for (size_t i = 0; i < width; ++i) {
        sum[i] += p[i];
        sumsq[i] += p[i] * p[i];
      }
    frames += rows;
  }
  ECHOLAB_REQUIRE(frames > 0, "no 'tr' split utterances; cannot compute stats");

  signals::FeatStats stats;
  stats.mean.resize(width);
  stats.stddev.resize(width);
  for (size_t i = 0; i < width; ++i) {
    stats.mean[i] = sum[i] / double(frames);
    const double var = sumsq[i] / double(frames) - stats.mean[i] * stats.mean[i];
    stats.stddev[i] = std::max(std::sqrt(std::max(var, 0.0)), 1e-5);
  }
  write_stats((dir / "stats.ntsr").string(), stats);

  // pass 2: normalized, downsampled features and targets
  parallel_for(
      entries.size(),
      [&](size_t i) {
        const ManifestEntry& e = entries[i];
        MultiWave mix = read_wav((dir / e.mixture_wav).string());
        signals::FeatTensor feats = combined_features(mix, fb, stft_cfg);
        feats = signals::normalize(feats, stats);
        signals::FeatTensor input = signals::downsample(feats, d_rate);
        write_tensor((dir / e.feature_path).string(), to_f32(input.data));

        for (size_t s = 0; s < e.clean_wavs.size(); ++s) {
          MultiWave clean = read_wav((dir / e.clean_wavs[s]).string());
          signals::ComplexSpec spec = signals::stft(clean, stft_cfg);
          signals::FeatTensor mag = signals::logmel(spec, fb);
          mag.kind = signals::FeatKind::kTarget;
          mag = signals::normalize(mag, stats);
          signals::FeatTensor target = signals::downsample(mag, d_rate);
          write_tensor((dir / e.target_paths[s]).string(), to_f32(target.data));
        }
      },
      jobs);
  return stats;
}

signals::FeatStats read_stats(const std::string& path) {
  Tensor<double> t = read_tensor<double>(path);
  ECHOLAB_REQUIRE(t.ndim() == 2 && t.dim(0) == 2, "stats tensor must be [2 x D]");
  signals::FeatStats s;
  const size_t d = t.dim(1);
  s.mean.assign(t.row(0), t.row(0) + d);
  s.stddev.assign(t.row(1), t.row(1) + d);
  return s;
}

void write_stats(const std::string& path, const signals::FeatStats& stats) {
  const size_t d = stats.mean.size();
  ECHOLAB_REQUIRE(stats.stddev.size() == d, "stats mean/std width mismatch");
  Tensor<double> t({2, d});
  std::copy(stats.mean.begin(), stats.mean.end(), t.row(0));
  std::copy(stats.stddev.begin(), stats.stddev.end(), t.row(1));
  write_tensor(path, t);
}

namespace {

template <class S>
constexpr const char* dtype_tag();
template <>
constexpr const char* dtype_tag<float>() { return "f32"; }
template <>
constexpr const char* dtype_tag<double>() { return "f64"; }

template <class S>
Tensor<S> ref_to_tensor(const nnet::ParamRef<S>& r) {
  Tensor<S> t({r.shape[0], r.shape[1]});
  std::copy(r.data, r.data + r.size, t.data());
  return t;
}

template <class S>
void tensor_to_ref(const Tensor<S>& t, const nnet::ParamRef<S>& r,
                   const std::string& what) {
  ECHOLAB_REQUIRE(t.ndim() == 2 && t.dim(0) == r.shape[0] &&
                      t.dim(1) == r.shape[1],
                  what, ": parameter '", r.name, "' has shape [", t.dim(0),
                  " x ", t.ndim() > 1 ? t.dim(1) : 1, "], model expects [",
                  r.shape[0], " x ", r.shape[1], "]");
  std::copy(t.data(), t.data() + t.size(), r.data);
}

}  // namespace

template <class S>
void save_checkpoint(const std::string& dir, const CheckpointData<S>& ckpt) {
  fs::create_directories(dir);
  nlohmann::json j;
  j["format"] = "echolab-checkpoint";
  j["dtype"] = dtype_tag<S>();
  j["config"] = nlohmann::json::parse(ckpt.params.config.to_json());
  j["step"] = ckpt.step;
  j["seed"] = ckpt.seed;
  j["has_optimizer"] = ckpt.has_optimizer;
  j["stats_mean"] = ckpt.stats.mean;
  j["stats_std"] = ckpt.stats.stddev;
  std::ofstream os(fs::path(dir) / "manifest.json");
  ECHOLAB_REQUIRE(os.good(), "cannot write checkpoint manifest in ", dir);
  os << j.dump(2) << "\n";

  auto& params = const_cast<nnet::ModelParams<S>&>(ckpt.params);
  for (const auto& r : nnet::param_refs(params))
    write_tensor((fs::path(dir) / (r.name + ".ntsr")).string(),
                 ref_to_tensor(r));
  if (ckpt.has_optimizer) {
    auto& m = const_cast<nnet::ModelParams<S>&>(ckpt.adam_m);
    auto& v = const_cast<nnet::ModelParams<S>&>(ckpt.adam_v);
    for (const auto& r : nnet::param_refs(m))
      write_tensor((fs::path(dir) / ("adam_m." + r.name + ".ntsr")).string(),
                   ref_to_tensor(r));
    for (const auto& r : nnet::param_refs(v))
      write_tensor((fs::path(dir) / ("adam_v." + r.name + ".ntsr")).string(),
                   ref_to_tensor(r));
  }
}

template <class S>
CheckpointData<S> load_checkpoint(const std::string& dir, bool want_optimizer) {
  std::ifstream is(fs::path(dir) / "manifest.json");
  ECHOLAB_REQUIRE(is.good(), "no checkpoint manifest in ", dir);
  nlohmann::json j = nlohmann::json::parse(is);
  ECHOLAB_REQUIRE(j.value("format", "") == "echolab-checkpoint",
                  dir, ": not a checkpoint manifest");
  ECHOLAB_REQUIRE(j.value("dtype", "") == dtype_tag<S>(), dir,
                  ": checkpoint dtype is ", j.value("dtype", "?"),
                  ", loader wants ", dtype_tag<S>());

  CheckpointData<S> ckpt;
  const nnet::ModelConfig cfg =
      nnet::ModelConfig::from_json(j.at("config").dump());
  ckpt.params = nnet::init_params<S>(cfg, 0);
  ckpt.step = j.value("step", int64_t(0));
  ckpt.seed = j.value("seed", uint64_t(0));
  ckpt.stats.mean = j.value("stats_mean", std::vector<double>{});
  ckpt.stats.stddev = j.value("stats_std", std::vector<double>{});
  ckpt.has_optimizer = want_optimizer && j.value("has_optimizer", false);

  for (const auto& r : nnet::param_refs(ckpt.params))
    tensor_to_ref(read_tensor<S>((fs::path(dir) / (r.name + ".ntsr")).string()),
                  r, "checkpoint");
  if (ckpt.has_optimizer) {
    ckpt.adam_m = nnet::zeros_like(ckpt.params);
    ckpt.adam_v = nnet::zeros_like(ckpt.params);
    for (const auto& r : nnet::param_refs(ckpt.adam_m))
      tensor_to_ref(
          read_tensor<S>((fs::path(dir) / ("adam_m." + r.name + ".ntsr")).string()),
          r, "checkpoint optimizer");
    for (const auto& r : nnet::param_refs(ckpt.adam_v))
      tensor_to_ref(
          read_tensor<S>((fs::path(dir) / ("adam_v." + r.name + ".ntsr")).string()),
          r, "checkpoint optimizer");
  }
  return ckpt;
}

template void save_checkpoint<float>(const std::string&,
                                     const CheckpointData<float>&);
template void save_checkpoint<double>(const std::string&,
                                      const CheckpointData<double>&);
template CheckpointData<float> load_checkpoint<float>(const std::string&, bool);
template CheckpointData<double> load_checkpoint<double>(const std::string&,
                                                        bool);

std::optional<std::string> latest_checkpoint(const std::string& dir) {
  if (!fs::is_directory(dir)) return std::nullopt;
  std::string best;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_directory()) continue;
    const std::string name = e.path().filename().string();
    if (name.rfind("step_", 0) != 0) continue;
    if (!fs::exists(e.path() / "manifest.json")) continue;
    if (best.empty() || name > fs::path(best).filename().string())
      best = e.path().string();
  }
  if (best.empty()) return std::nullopt;
  return best;
}

}  // namespace datasetio
}  // namespace echolab
