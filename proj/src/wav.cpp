// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "playitback/dsp.hpp"
#include "playitback/errors.hpp"

namespace pib {
namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

}  // namespace

AudioClip parse_wav(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 12) throw ParseError("RIFF header: file shorter than 12 bytes");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0)
    throw ParseError("RIFF header: missing 'RIFF' tag");
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw ParseError("RIFF header: form type is not 'WAVE'");

  bool have_fmt = false;
  std::uint16_t channels = 0;
  std::uint16_t bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string tag(reinterpret_cast<const char*>(bytes.data() + pos), 4);
    const std::uint32_t size = read_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size())
      throw ParseError("'" + tag + "' chunk: declared size " + std::to_string(size) +
                       " runs past end of file");
    if (tag == "fmt ") {
      if (size < 16) throw ParseError("'fmt ' chunk: too short (" + std::to_string(size) + " bytes)");
      const std::uint16_t format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      std::uint16_t effective = format;
      if (format == kFormatExtensible && size >= 26) {
        effective = read_u16(bytes.data() + body + 24);
      }
      if (effective != kFormatPcm)
        throw UnsupportedFormatError("'fmt ' chunk: audio format " + std::to_string(format) +
                                     " is not integer PCM");
      if (bits != 16)
        throw UnsupportedFormatError("'fmt ' chunk: " + std::to_string(bits) +
                                     "-bit samples are not supported (16-bit only)");
      if (channels != 1 && channels != 2)
        throw UnsupportedFormatError("'fmt ' chunk: " + std::to_string(channels) +
                                     " channels are not supported (mono or stereo only)");
      if (rate == 0) throw ParseError("'fmt ' chunk: sample rate is zero");
      have_fmt = true;
    } else if (tag == "data") {
      if (!have_fmt) throw ParseError("'data' chunk: appears before 'fmt ' chunk");
      const std::size_t frame_bytes = 2u * channels;
      const std::size_t n = size / frame_bytes;
      AudioClip clip;
      clip.sample_rate = static_cast<int>(rate);
      clip.samples.resize(n);
      const unsigned char* p = bytes.data() + body;
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          const auto raw = static_cast<std::int16_t>(read_u16(p + i * frame_bytes + 2 * c));
          acc += static_cast<double>(raw) / 32768.0;
        }
        clip.samples[i] = acc / channels;
      }
      return clip;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw ParseError("'fmt ' chunk: not found");
  throw ParseError("'data' chunk: not found");
}

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return parse_wav(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const UnsupportedFormatError& e) {
    throw UnsupportedFormatError(path.string() + ": " + e.what());
  }
}

std::vector<unsigned char> encode_wav(const AudioClip& clip) {
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  std::vector<unsigned char> out;
  out.reserve(44 + 2 * static_cast<std::size_t>(n));
  put_tag(out, "RIFF");
  put_u32(out, 36 + 2 * n);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, 2 * n);
  for (double s : clip.samples) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(q));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  const auto bytes = encode_wav(clip);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace pib
