#include <spdlog/spdlog.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "deffx/core/error.hpp"
#include "deffx/data/dataset.hpp"

namespace deffx::data {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct Parsed {
  WavInfo info;
  std::size_t data_offset = 0;
};

template <typename U>
U read_le(const std::vector<char>& bytes, std::size_t at) {
  U v;
  std::memcpy(&v, bytes.data() + at, sizeof(U));
  return v;
}

std::vector<char> read_file(const std::filesystem::path& path, std::size_t limit = SIZE_MAX) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> bytes;
  if (limit == SIZE_MAX) {
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  } else {
    bytes.resize(limit);
    in.read(bytes.data(), static_cast<std::streamsize>(limit));
    bytes.resize(static_cast<std::size_t>(in.gcount()));
  }
  return bytes;
}

// Walks the chunk list until the data chunk. With `header_only` the data
// chunk may extend past the bytes read.
Parsed parse(const std::vector<char>& b, const std::filesystem::path& path, bool header_only) {
  auto fail = [&](const std::string& what) { return IoError(path.string() + ": " + what); };
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0)
    throw fail("not a RIFF/WAVE file");
  Parsed p;
  bool have_fmt = false;
  std::uint16_t tag = 0, bits = 0;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::string id(b.data() + pos, 4);
    const std::size_t size = read_le<std::uint32_t>(b, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + size > b.size()) throw fail("truncated fmt chunk");
      tag = read_le<std::uint16_t>(b, body);
      p.info.channels = read_le<std::uint16_t>(b, body + 2);
      p.info.sample_rate = read_le<std::uint32_t>(b, body + 4);
      bits = read_le<std::uint16_t>(b, body + 14);
      if (tag == kFormatExtensible) {
        if (size < 40) throw fail("truncated extensible fmt chunk");
        tag = read_le<std::uint16_t>(b, body + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw fail("data chunk before fmt chunk");
      if (!header_only && body + size > b.size()) throw fail("truncated data chunk");
      if (tag == kFormatPcm && bits == 16) {
        p.info.format = SampleFormat::kPcm16;
      } else if (tag == kFormatPcm && bits == 24) {
        p.info.format = SampleFormat::kPcm24;
      } else if (tag == kFormatFloat && bits == 32) {
        p.info.format = SampleFormat::kFloat32;
      } else {
        throw fail("unsupported encoding (format " + std::to_string(tag) + ", " + std::to_string(bits) +
                   " bits); expected PCM 16/24-bit or float 32-bit");
      }
      if (p.info.channels != 1) throw fail(std::to_string(p.info.channels) + " channels; only mono is supported");
      p.info.frames = size / (bits / 8);
      p.data_offset = body;
      return p;
    }
    pos = body + size + (size & 1);
  }
  throw fail(have_fmt ? "no data chunk" : "no fmt chunk");
}

std::size_t bytes_per_sample(SampleFormat f) {
  switch (f) {
    case SampleFormat::kPcm16: return 2;
    case SampleFormat::kPcm24: return 3;
    case SampleFormat::kFloat32: return 4;
  }
  return 4;
}

template <typename U>
void put(std::vector<char>& out, U v) {
  char raw[sizeof(U)];
  std::memcpy(raw, &v, sizeof(U));
  out.insert(out.end(), raw, raw + sizeof(U));
}

}  // namespace

WavInfo read_wav_info(const std::filesystem::path& path) { return parse(read_file(path, 4096), path, true).info; }

Audio load_wav(const std::filesystem::path& path) {
  const std::vector<char> b = read_file(path);
  const Parsed p = parse(b, path, false);
  Audio a;
  a.sample_rate = p.info.sample_rate;
  a.samples.resize(p.info.frames);
  const auto* data = reinterpret_cast<const unsigned char*>(b.data() + p.data_offset);
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < p.info.frames; ++i) {
    switch (p.info.format) {
      case SampleFormat::kPcm16: {
        std::int16_t v;
        std::memcpy(&v, data + 2 * i, 2);
        a.samples[i] = v / 32768.0;
        break;
      }
      case SampleFormat::kPcm24: {
        const unsigned char* s = data + 3 * i;
        std::int32_t v = s[0] | (s[1] << 8) | (s[2] << 16);
        if (v & 0x800000) v -= 0x1000000;
        a.samples[i] = v / 8388608.0;
        break;
      }
      case SampleFormat::kFloat32: {
        float v;
        std::memcpy(&v, data + 4 * i, 4);
        if (!std::isfinite(v)) throw IoError(path.string() + ": non-finite sample at " + std::to_string(i));
        if (v > 1.0f || v < -1.0f) ++clamped;
        a.samples[i] = std::clamp(static_cast<double>(v), -1.0, 1.0);
        break;
      }
    }
  }
  if (clamped) spdlog::warn("{}: clamped {} samples to [-1, 1]", path.string(), clamped);
  return a;
}

void save_wav(const std::filesystem::path& path, std::span<const double> samples, double sample_rate,
              SampleFormat format) {
  if (!(sample_rate > 0.0) || sample_rate > 4294967295.0) throw InvalidArgument("invalid WAV sample rate");
  const std::size_t width = bytes_per_sample(format);
  const std::size_t data_bytes = samples.size() * width;
  if (data_bytes > 0xFFFFFFFFu - 36) throw InvalidArgument("audio too long for a WAV file");
  std::vector<char> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put<std::uint32_t>(out, static_cast<std::uint32_t>(36 + data_bytes + (data_bytes & 1)));
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put<std::uint32_t>(out, 16);
  put<std::uint16_t>(out, format == SampleFormat::kFloat32 ? kFormatFloat : kFormatPcm);
  put<std::uint16_t>(out, 1);
  const auto rate = static_cast<std::uint32_t>(std::llround(sample_rate));
  put<std::uint32_t>(out, rate);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(rate * width));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(width));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(8 * width));
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data_bytes));
  for (double x : samples) {
    switch (format) {
      case SampleFormat::kPcm16:
        put<std::int16_t>(out, static_cast<std::int16_t>(std::clamp(std::round(x * 32768.0), -32768.0, 32767.0)));
        break;
      case SampleFormat::kPcm24: {
        const auto v = static_cast<std::int32_t>(std::clamp(std::round(x * 8388608.0), -8388608.0, 8388607.0));
        out.push_back(static_cast<char>(v & 0xFF));
        out.push_back(static_cast<char>((v >> 8) & 0xFF));
        out.push_back(static_cast<char>((v >> 16) & 0xFF));
        break;
      }
      case SampleFormat::kFloat32:
        put<float>(out, static_cast<float>(x));
        break;
    }
  }
  if (data_bytes & 1) out.push_back(0);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace deffx::data
