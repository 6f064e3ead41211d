// src/roomsim.cpp
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

#include "echolab/roomsim.hpp"

#include <algorithm>
#include <cmath>

#include "echolab/fft.hpp"
#include "json.hpp"

namespace echolab {
namespace roomsim {

namespace {
constexpr int kKernelHalf = 40;          // 81-tap windowed sinc
constexpr double kKernelEdge = 41.0;     // Hann half-width, zero at the edge
constexpr double kSabine = 0.161;
}  // namespace

Point RoomScene::mic_position(int m) const {
  const double a = 2.0 * kPi * double(m) / double(num_mics);
  return {center[0] + mic_radius * std::cos(a),
          center[1] + mic_radius * std::sin(a), center[2]};
}

Point RoomScene::source_position(double angle_deg) const {
  const double a = angle_deg * kPi / 180.0;
  return {center[0] + source_radius * std::cos(a),
          center[1] + source_radius * std::sin(a), center[2]};
}

void RoomScene::validate() const {
  ECHOLAB_REQUIRE(room[0] > 0 && room[1] > 0 && room[2] > 0, "bad room dims");
  ECHOLAB_REQUIRE(t60 > 0, "t60 must be positive");
  ECHOLAB_REQUIRE(num_mics >= 1, "need at least one mic");
  ECHOLAB_REQUIRE(sound_speed > 0, "bad sound speed");
  auto inside = [&](const Point& p) {
    return p[0] > 0 && p[0] < room[0] && p[1] > 0 && p[1] < room[1] &&
           p[2] > 0 && p[2] < room[2];
  };
  ECHOLAB_REQUIRE(inside(source_position(source_angle_deg)),
                  "source outside room");
  if (has_interferer())
    ECHOLAB_REQUIRE(inside(source_position(interferer_angle_deg)),
                    "interferer outside room");
  for (int m = 0; m < num_mics; ++m) {
    ECHOLAB_REQUIRE(inside(mic_position(m)), "mic ", m, " outside room");
    for (int l = 0; l < m; ++l) {
      const Point a = mic_position(m), b = mic_position(l);
      const double d = std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
      ECHOLAB_REQUIRE(d > 1e-9, "mic positions not distinct");
    }
  }
}

std::string RoomScene::to_json() const {
  nlohmann::json j;
  j["room_m"] = {room[0], room[1], room[2]};
  j["center_m"] = {center[0], center[1], center[2]};
  j["mic_radius_m"] = mic_radius;
  j["num_mics"] = num_mics;
  j["source_radius_m"] = source_radius;
  j["source_angle_deg"] = source_angle_deg;
  j["interferer_angle_deg"] = interferer_angle_deg;
  j["t60_s"] = t60;
  j["sound_speed_mps"] = sound_speed;
  j["anechoic"] = anechoic;
  std::vector<std::vector<double>> mics;
  for (int m = 0; m < num_mics; ++m) {
    const Point p = mic_position(m);
    mics.push_back({p[0], p[1], p[2]});
  }
  j["mic_positions_m"] = mics;
  return j.dump(2);
}

RoomScene RoomScene::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  RoomScene s;
  auto room = j.at("room_m").get<std::vector<double>>();
  ECHOLAB_REQUIRE(room.size() == 3, "room_m must have 3 entries");
  s.room = {room[0], room[1], room[2]};
  if (j.contains("center_m")) {
    auto c = j.at("center_m").get<std::vector<double>>();
    ECHOLAB_REQUIRE(c.size() == 3, "center_m must have 3 entries");
    s.center = {c[0], c[1], c[2]};
  }
  s.mic_radius = j.value("mic_radius_m", s.mic_radius);
  s.num_mics = j.value("num_mics", s.num_mics);
  s.source_radius = j.value("source_radius_m", s.source_radius);
  s.source_angle_deg = j.value("source_angle_deg", s.source_angle_deg);
  s.interferer_angle_deg = j.value("interferer_angle_deg", s.interferer_angle_deg);
  s.t60 = j.value("t60_s", s.t60);
  s.sound_speed = j.value("sound_speed_mps", s.sound_speed);
  s.anechoic = j.value("anechoic", s.anechoic);
  s.validate();
  return s;
}

RoomScene sample_scene(int task, uint64_t seed) {
  ECHOLAB_REQUIRE(task == 1 || task == 2, "task must be 1 or 2");
  static const double kT60s[3] = {0.3, 0.6, 0.9};
  Rng rng(seed);
  RoomScene s;
  if (task == 1) {
    s.source_angle_deg = 5.0 * double(rng.uniform_int(72));
    s.interferer_angle_deg = -1.0;
  } else {
    s.source_angle_deg = 0.0;
    s.interferer_angle_deg = 30.0 * double(1 + rng.uniform_int(11));
  }
  s.t60 = kT60s[rng.uniform_int(3)];
  return s;
}

namespace {

// Adds a windowed-sinc kernel centered at fractional delay `delay` (samples).
void add_fractional_impulse(double* taps, size_t len, double delay,
                            double gain, const double* win_cos,
                            const double* win_sin) {
  const int i0 = int(std::floor(delay));
  const double frac = delay - double(i0);
  const int start = i0 - kKernelHalf;
  const double sin_pf = std::sin(kPi * frac);
  const double b = kPi * frac / kKernelEdge;
  const double cos_b = std::cos(b), sin_b = std::sin(b);

  if (frac < 1e-12) {
    // integer delay: the kernel degenerates to a unit impulse
    if (i0 >= 0 && size_t(i0) < len) taps[i0] += gain;
    return;
  }
  for (int u = 0; u <= 2 * kKernelHalf; ++u) {
    const int n = start + u;
    if (n < 0 || size_t(n) >= len) continue;
    const double t = double(u - kKernelHalf) - frac;
    // sin(pi*t) for t = (u-40) - frac collapses to +-sin(pi*frac)
    const double sinc = ((u & 1) ? sin_pf : -sin_pf) / (kPi * t);
    const double w = 0.5 * (1.0 + win_cos[u] * cos_b + win_sin[u] * sin_b);
    taps[n] += gain * sinc * w;
  }
}

}  // namespace

Rir image_rir(const RoomScene& scene, SourceRole role, int sample_rate,
              int length, int jobs) {
  scene.validate();
  ECHOLAB_REQUIRE(role == SourceRole::kTarget || scene.has_interferer(),
                  "scene has no interferer");
  const Point src = scene.source_position(role == SourceRole::kTarget
                                              ? scene.source_angle_deg
                                              : scene.interferer_angle_deg);

  const double fs = double(sample_rate);
  if (length < 0) length = int(std::ceil(1.25 * scene.t60 * fs));
  ECHOLAB_REQUIRE(length > kKernelHalf, "rir length too short");

  double beta = 0.0;
  if (!scene.anechoic) {
    const double v = scene.room[0] * scene.room[1] * scene.room[2];
    const double s2 = 2.0 * (scene.room[0] * scene.room[1] +
                             scene.room[1] * scene.room[2] +
                             scene.room[0] * scene.room[2]);
    const double absorption = kSabine * v / (s2 * scene.t60);
    ECHOLAB_REQUIRE(absorption <= 1.0,
                    "t60 too small for this room (Sabine absorption ",
                    absorption, " > 1)");
    beta = std::clamp(std::sqrt(1.0 - absorption), 0.0, 0.9999);
  }

  const double cts = scene.sound_speed / fs;  // meters per sample
  const double max_dist = double(length) * cts;
  const int nx = int(std::ceil(max_dist / (2.0 * scene.room[0])));
  const int ny = int(std::ceil(max_dist / (2.0 * scene.room[1])));
  const int nz = int(std::ceil(max_dist / (2.0 * scene.room[2])));

  // reflection powers up to the largest possible count
  const int max_refl = 2 * (nx + ny + nz) + 3;
  std::vector<double> beta_pow(size_t(max_refl) + 1);
  beta_pow[0] = 1.0;
  for (int i = 1; i <= max_refl; ++i) beta_pow[size_t(i)] = beta_pow[size_t(i - 1)] * beta;

  // window tables for the fractional-delay kernel
  double win_cos[2 * kKernelHalf + 1], win_sin[2 * kKernelHalf + 1];
  for (int u = 0; u <= 2 * kKernelHalf; ++u) {
    const double a = kPi * double(u - kKernelHalf) / kKernelEdge;
    win_cos[u] = std::cos(a);
    win_sin[u] = std::sin(a);
  }

  Rir rir;
  rir.taps = Tensor<double>({size_t(scene.num_mics), size_t(length)});
  rir.sample_rate = sample_rate;
  rir.scene = scene;
  rir.role = role;

  const bool only_direct = scene.anechoic;
  parallel_for(
      size_t(scene.num_mics),
      [&](size_t m) {
        const Point mic = scene.mic_position(int(m));
        double* taps = rir.taps.row(m);
        const int bx = only_direct ? 0 : nx;
        const int by = only_direct ? 0 : ny;
        const int bz = only_direct ? 0 : nz;
        for (int ix = -bx; ix <= bx; ++ix) {
          const double rmx = 2.0 * double(ix) * scene.room[0];
          for (int iy = -by; iy <= by; ++iy) {
            const double rmy = 2.0 * double(iy) * scene.room[1];
            for (int iz = -bz; iz <= bz; ++iz) {
              const double rmz = 2.0 * double(iz) * scene.room[2];
              for (int q = 0; q <= 1; ++q) {
                const double px = (1 - 2 * q) * src[0] - mic[0] + rmx;
                const int rx = std::abs(ix - q) + std::abs(ix);
                for (int jq = 0; jq <= 1; ++jq) {
                  const double py = (1 - 2 * jq) * src[1] - mic[1] + rmy;
                  const int ry = std::abs(iy - jq) + std::abs(iy);
                  for (int kq = 0; kq <= 1; ++kq) {
                    if (only_direct && (q | jq | kq)) continue;
                    const double pz = (1 - 2 * kq) * src[2] - mic[2] + rmz;
                    const int rz = std::abs(iz - kq) + std::abs(iz);
                    const double dist =
                        std::sqrt(px * px + py * py + pz * pz);
                    const double delay = dist / cts;
                    if (delay >= double(length)) continue;
                    const double refl = beta_pow[size_t(rx + ry + rz)];
                    if (refl == 0.0 && (rx + ry + rz) > 0) continue;
                    const double gain = refl / (4.0 * kPi * dist);
                    add_fractional_impulse(taps, size_t(length), delay, gain,
                                           win_cos, win_sin);
                  }
                }
              }
            }
          }
        }
      },
      jobs);
  return rir;
}

double estimate_t60(std::span<const double> taps, int sample_rate) {
  ECHOLAB_REQUIRE(taps.size() >= 2, "rir too short");
  // Schroeder backward integration
  std::vector<double> energy(taps.size());
  double acc = 0.0;
  for (size_t i = taps.size(); i-- > 0;) {
    acc += taps[i] * taps[i];
    energy[i] = acc;
  }
  ECHOLAB_REQUIRE(acc > 0.0, "rir has no energy");

  const double e0 = energy[0];
  ptrdiff_t n5 = -1, n35 = -1;
  for (size_t i = 0; i < energy.size(); ++i) {
    const double db = 10.0 * std::log10(energy[i] / e0 + 1e-300);
    if (n5 < 0 && db <= -5.0) n5 = ptrdiff_t(i);
    if (db <= -35.0) {
      n35 = ptrdiff_t(i);
      break;
    }
  }
  ECHOLAB_REQUIRE(n5 >= 0 && n35 > n5 + 4,
                  "no usable decay segment between -5 and -35 dB");

  // least-squares line fit of the dB curve on [n5, n35]
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double count = double(n35 - n5 + 1);
  for (ptrdiff_t i = n5; i <= n35; ++i) {
    const double x = double(i);
    const double y = 10.0 * std::log10(energy[size_t(i)] / e0 + 1e-300);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = count * sxx - sx * sx;
  ECHOLAB_REQUIRE(std::abs(denom) > 0, "degenerate decay fit");
  const double slope = (count * sxy - sx * sy) / denom;  // dB per sample
  ECHOLAB_REQUIRE(slope < 0, "energy curve is not decaying");
  return -60.0 / slope / double(sample_rate);
}

Rir direct_early(const Rir& rir, double early_ms) {
  Rir out = rir;
  const size_t early =
      size_t(std::llround(early_ms * 1e-3 * double(rir.sample_rate)));
  for (size_t c = 0; c < rir.channels(); ++c) {
    const double* src = rir.taps.row(c);
    size_t peak = 0;
    for (size_t i = 1; i < rir.length(); ++i)
      if (std::abs(src[i]) > std::abs(src[peak])) peak = i;
    double* dst = out.taps.row(c);
    for (size_t i = std::min(peak + early, rir.length()); i < rir.length(); ++i)
      dst[i] = 0.0;
  }
  return out;
}

MultiWave render_with_rir(std::span<const double> source, const Rir& rir) {
  ECHOLAB_REQUIRE(!source.empty(), "empty source");
  const size_t c = rir.channels();
  const size_t n = source.size() + rir.length() - 1;
  MultiWave out(c, n, rir.sample_rate);
  for (size_t ch = 0; ch < c; ++ch) {
    std::vector<double> y = fft_convolve(
        source, std::span<const double>(rir.taps.row(ch), rir.length()));
    std::copy(y.begin(), y.end(), out.channel(ch));
  }
  return out;
}

RenderResult render_scene(const std::vector<std::vector<double>>& sources,
                          const RoomScene& scene, int sample_rate, int jobs) {
  ECHOLAB_REQUIRE(!sources.empty(), "no sources");
  ECHOLAB_REQUIRE(sources.size() <= 2, "at most two sources supported");
  const bool two = sources.size() == 2;
  if (two)
    ECHOLAB_REQUIRE(scene.has_interferer(),
                    "two sources need an interferer angle");

  size_t n_src = 0;
  for (const auto& s : sources) n_src = std::max(n_src, s.size());
  ECHOLAB_REQUIRE(n_src > 0, "empty source signal");

  RoomScene dry = scene;
  dry.anechoic = true;
  // anechoic reference length: direct kernel only
  int dry_len = 0;
  {
    double far = 0.0;
    for (int m = 0; m < scene.num_mics; ++m)
      for (double ang : {scene.source_angle_deg,
                         scene.has_interferer() ? scene.interferer_angle_deg
                                                : scene.source_angle_deg}) {
        const Point s = scene.source_position(ang);
        const Point p = scene.mic_position(m);
        far = std::max(far, std::hypot(s[0] - p[0], s[1] - p[1], s[2] - p[2]));
      }
    dry_len = int(far / scene.sound_speed * double(sample_rate)) + 2 * kKernelHalf + 2;
  }

  RenderResult res;
  std::vector<MultiWave> images, cleans;
  for (size_t i = 0; i < sources.size(); ++i) {
    const SourceRole role = i == 0 ? SourceRole::kTarget : SourceRole::kInterferer;
    Rir wet = image_rir(scene, role, sample_rate, -1, jobs);
    Rir anech = image_rir(dry, role, sample_rate, dry_len, jobs);

    std::vector<double> padded = sources[i];
    padded.resize(n_src, 0.0);
    MultiWave img = render_with_rir(padded, wet);
    MultiWave cln = render_with_rir(padded, anech);
    // pad the anechoic render to the reverberant length so frames align
    MultiWave cln_pad(cln.channels(), img.frames(), sample_rate);
    for (size_t c = 0; c < cln.channels(); ++c)
      std::copy(cln.channel(c), cln.channel(c) + cln.frames(),
                cln_pad.channel(c));
    images.push_back(std::move(img));
    cleans.push_back(std::move(cln_pad));
  }

  if (two) {
    // 0 dB mix: match reverberant image peaks to a common reference
    const double kRef = 0.25;
    for (size_t i = 0; i < images.size(); ++i) {
      double peak = 0.0;
      for (double v : images[i].samples.flat()) peak = std::max(peak, std::abs(v));
      ECHOLAB_REQUIRE(peak > 0.0, "silent source ", i);
      const double g = kRef / peak;
      for (double& v : images[i].samples.flat()) v *= g;
      for (double& v : cleans[i].samples.flat()) v *= g;
    }
  }

  const size_t c = images[0].channels(), n = images[0].frames();
  res.mixture = MultiWave(c, n, sample_rate);
  for (const auto& img : images)
    for (size_t ch = 0; ch < c; ++ch)
      for (size_t s = 0; s < n; ++s)
        res.mixture.channel(ch)[s] += img.channel(ch)[s];
  res.images = std::move(images);
  res.cleans = std::move(cleans);
  return res;
}

}  // namespace roomsim
}  // namespace echolab
