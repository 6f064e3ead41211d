// src/wave.cpp
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

#include "echolab/wave.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace echolab {

void MultiWave::validate() const {
  ECHOLAB_REQUIRE(samples.ndim() == 2, "wave tensor must be [C x N]");
  ECHOLAB_REQUIRE(channels() >= 1 && frames() >= 1, "empty wave");
  for (double v : samples.flat())
    ECHOLAB_REQUIRE(std::isfinite(v), "wave contains non-finite samples");
}

MultiWave mono_wave(std::vector<double> samples, int rate) {
  const size_t n = samples.size();
  return MultiWave(Tensor<double>({1, n}, std::move(samples)), rate);
}

namespace {

uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
         uint32_t(b[3]) << 24;
}

uint16_t read_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return uint16_t(b[0]) | uint16_t(uint32_t(b[1]) << 8);
}

void write_u32(std::ostream& os, uint32_t v) {
  char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
               char((v >> 24) & 0xff)};
  os.write(b, 4);
}

void write_u16(std::ostream& os, uint16_t v) {
  char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
  os.write(b, 2);
}

}  // namespace

MultiWave read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  ECHOLAB_REQUIRE(is.good(), "cannot open wav file: ", path);

  char tag[5] = {0};
  is.read(tag, 4);
  ECHOLAB_REQUIRE(std::strncmp(tag, "RIFF", 4) == 0, path, ": missing RIFF");
  read_u32(is);  // riff size, unused
  is.read(tag, 4);
  ECHOLAB_REQUIRE(std::strncmp(tag, "WAVE", 4) == 0, path, ": missing WAVE");

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  std::vector<char> payload;
  bool have_fmt = false, have_data = false;

  while (is.good() && !(have_fmt && have_data)) {
    is.read(tag, 4);
    if (!is.good()) break;
    uint32_t sz = read_u32(is);
    if (std::strncmp(tag, "fmt ", 4) == 0) {
      format = read_u16(is);
      channels = read_u16(is);
      rate = read_u32(is);
      read_u32(is);  // byte rate
      read_u16(is);  // block align
      bits = read_u16(is);
      if (sz > 16) is.seekg(sz - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::strncmp(tag, "data", 4) == 0) {
      payload.resize(sz);
      is.read(payload.data(), sz);
      ECHOLAB_REQUIRE(size_t(is.gcount()) == sz, path, ": truncated data chunk");
      have_data = true;
    } else {
      is.seekg(sz + (sz & 1), std::ios::cur);
    }
  }
  ECHOLAB_REQUIRE(have_fmt && have_data, path, ": missing fmt/data chunks");
  ECHOLAB_REQUIRE(channels >= 1 && channels <= 8, path, ": unsupported channel count ", channels);
  const bool pcm16 = (format == 1 && bits == 16);
  const bool f32 = (format == 3 && bits == 32);
  ECHOLAB_REQUIRE(pcm16 || f32, path, ": unsupported wav encoding (format ",
                  format, ", ", bits, " bit)");

  const size_t bytes_per = pcm16 ? 2 : 4;
  const size_t n = payload.size() / (bytes_per * channels);
  ECHOLAB_REQUIRE(n >= 1, path, ": empty wav");

  MultiWave wave(channels, n, int(rate));
  const unsigned char* p = reinterpret_cast<const unsigned char*>(payload.data());
  for (size_t i = 0; i < n; ++i) {
    for (size_t c = 0; c < channels; ++c) {
      if (pcm16) {
        int16_t v = int16_t(uint16_t(p[0]) | uint16_t(uint32_t(p[1]) << 8));
        wave.channel(c)[i] = double(v) / 32768.0;
        p += 2;
      } else {
        uint32_t u = uint32_t(p[0]) | uint32_t(p[1]) << 8 |
                     uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
        float f;
        std::memcpy(&f, &u, 4);
        wave.channel(c)[i] = double(f);
        p += 4;
      }
    }
  }
  return wave;
}

void write_wav(const std::string& path, const MultiWave& wave,
               WavEncoding enc) {
  wave.validate();
  ECHOLAB_REQUIRE(wave.channels() <= 8, "more than 8 channels");
  std::ofstream os(path, std::ios::binary);
  ECHOLAB_REQUIRE(os.good(), "cannot write wav file: ", path);

  const uint16_t channels = uint16_t(wave.channels());
  const size_t n = wave.frames();
  const bool pcm16 = enc == WavEncoding::kPcm16;
  const uint16_t bits = pcm16 ? 16 : 32;
  const uint32_t data_size = uint32_t(n * channels * (bits / 8));

  os.write("RIFF", 4);
  write_u32(os, 36 + data_size);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  write_u32(os, 16);
  write_u16(os, pcm16 ? 1 : 3);
  write_u16(os, channels);
  write_u32(os, uint32_t(wave.sample_rate));
  write_u32(os, uint32_t(wave.sample_rate) * channels * (bits / 8));
  write_u16(os, uint16_t(channels * (bits / 8)));
  write_u16(os, bits);
  os.write("data", 4);
  write_u32(os, data_size);

  for (size_t i = 0; i < n; ++i) {
    for (size_t c = 0; c < channels; ++c) {
      double v = wave.channel(c)[i];
      if (pcm16) {
        double s = std::round(v * 32768.0);
        if (s > 32767.0) s = 32767.0;
        if (s < -32768.0) s = -32768.0;
        write_u16(os, uint16_t(int16_t(s)));
      } else {
        float f = float(v);
        uint32_t u;
        std::memcpy(&u, &f, 4);
        write_u32(os, u);
      }
    }
  }
  ECHOLAB_REQUIRE(os.good(), "short write: ", path);
}

}  // namespace echolab
