#include "anavi/audiomeasure.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "anavi/acoustics.hpp"
#include "anavi/error.hpp"

namespace anavi {

using nlohmann::json;

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const std::string& b, std::size_t at) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[at])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 3])) << 24;
}

std::uint16_t read_u16(const std::string& b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    static_cast<unsigned char>(b[at + 1]) << 8);
}

void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xFF));
  b.push_back(static_cast<char>(v >> 8));
}

}  // namespace

Waveform parse_wav(const std::string& b, const std::string& origin) {
  const auto fail = [&](const std::string& what) {
    return DataError(origin + ": " + what);
  };
  if (b.size() < 12 || b.compare(0, 4, "RIFF") != 0 || b.compare(8, 4, "WAVE") != 0) {
    throw fail("not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_at = 0, data_size = 0;
  bool have_data = false;
  for (std::size_t pos = 12; pos + 8 <= b.size();) {
    const std::string id = b.substr(pos, 4);
    const std::uint32_t size = read_u32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + size > b.size()) throw fail("truncated fmt chunk");
      format = read_u16(b, body);
      channels = read_u16(b, body + 2);
      rate = read_u32(b, body + 4);
      bits = read_u16(b, body + 14);
      if (format == kFormatExtensible) {
        if (size < 26) throw fail("truncated extensible fmt chunk");
        format = read_u16(b, body + 24);
      }
      have_fmt = true;
    } else if (id == "data") {
      data_at = body;
      data_size = std::min<std::size_t>(size, b.size() - body);
      have_data = true;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw fail("missing fmt chunk");
  if (!have_data) throw fail("missing data chunk");
  if (channels == 0 || rate == 0) throw fail("malformed fmt chunk");
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    throw fail("unsupported encoding (format " + std::to_string(format) + ", " +
               std::to_string(bits) + " bits); expected PCM16 or float32");
  }
  const std::size_t width = bits / 8;
  const std::size_t frame = width * channels;
  const std::size_t frames = data_size / frame;
  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  w.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t at = data_at + i * frame + c * width;
      if (pcm16) {
        sum += static_cast<std::int16_t>(read_u16(b, at)) / 32768.0;
      } else {
        sum += std::bit_cast<float>(read_u32(b, at));
      }
    }
    w.samples[i] = std::clamp(sum / channels, -1.0, 1.0);
  }
  return w;
}

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return parse_wav(s.str(), path.string());
}

std::string encode_wav(const std::vector<std::vector<double>>& channels, int sample_rate,
                       WavEncoding encoding) {
  if (channels.empty()) throw UsageError("encode_wav: no channels");
  const std::size_t frames = channels.front().size();
  for (const auto& c : channels) {
    if (c.size() != frames) throw UsageError("encode_wav: channel lengths differ");
  }
  const std::uint16_t n_ch = static_cast<std::uint16_t>(channels.size());
  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
  const std::uint32_t data_size = static_cast<std::uint32_t>(frames * n_ch * bits / 8);
  std::string b = "RIFF";
  put_u32(b, 36 + data_size);
  b += "WAVEfmt ";
  put_u32(b, 16);
  put_u16(b, encoding == WavEncoding::pcm16 ? kFormatPcm : kFormatFloat);
  put_u16(b, n_ch);
  put_u32(b, static_cast<std::uint32_t>(sample_rate));
  put_u32(b, static_cast<std::uint32_t>(sample_rate) * n_ch * bits / 8);
  put_u16(b, static_cast<std::uint16_t>(n_ch * bits / 8));
  put_u16(b, bits);
  b += "data";
  put_u32(b, data_size);
  for (std::size_t i = 0; i < frames; ++i) {
    for (const auto& c : channels) {
      const double v = std::clamp(c[i], -1.0, 1.0);
      if (encoding == WavEncoding::pcm16) {
        const long q = std::lround(v * 32768.0);
        put_u16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L))));
      } else {
        put_u32(b, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  }
  return b;
}

void save_wav(const std::filesystem::path& path, const Waveform& w, WavEncoding encoding) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << encode_wav({w.samples}, w.sample_rate, encoding);
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw UsageError("fft: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        // twiddles from the angle directly to avoid accumulated drift
        const std::complex<double> w = std::polar(1.0, ang * static_cast<double>(k));
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

std::vector<std::complex<double>> spectrum(const Waveform& w) {
  if (w.samples.empty()) throw UsageError("spectrum: empty waveform");
  std::vector<std::complex<double>> a(next_pow2(w.samples.size()));
  for (std::size_t i = 0; i < w.samples.size(); ++i) a[i] = w.samples[i];
  fft(a);
  const double n = static_cast<double>(w.samples.size());
  for (auto& v : a) v /= n;
  return a;
}

double waveform_db(const Waveform& w, double calibration_offset, const AirConstants& air) {
  if (w.samples.empty()) throw UsageError("waveform_db: empty waveform");
  if (!(air.density > 0.0 && air.sound_speed > 0.0)) {
    throw UsageError("waveform_db: air constants must be positive");
  }
  double i_max = 0.0;
  for (const auto& v : spectrum(w)) i_max = std::max(i_max, std::norm(v) / (air.density * air.sound_speed));
  return intensity_to_label(i_max).db_max + calibration_offset;
}

double parse_direction(const std::string& direction) {
  if (direction.empty()) throw UsageError("empty direction");
  char* end = nullptr;
  const double deg = std::strtod(direction.c_str(), &end);
  if (end && *end == '\0') {
    double t = std::fmod(deg * std::numbers::pi / 180.0, 2.0 * std::numbers::pi);
    return t < 0 ? t + 2.0 * std::numbers::pi : t;
  }
  double x = 0.0, y = 0.0;
  for (char c : direction) {
    switch (std::toupper(static_cast<unsigned char>(c))) {
      case 'E': x += 1.0; break;
      case 'W': x -= 1.0; break;
      case 'N': y += 1.0; break;
      case 'S': y -= 1.0; break;
      case '-': case ' ': break;
      default: throw UsageError("unknown direction '" + direction + "'");
    }
  }
  if (x == 0.0 && y == 0.0) throw UsageError("direction '" + direction + "' cancels out");
  double t = std::atan2(y, x);
  return t < 0 ? t + 2.0 * std::numbers::pi : t;
}

std::vector<MeasurementInput> load_measurements(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open measurements " + path.string());
  try {
    const json j = json::parse(in);
    std::vector<MeasurementInput> out;
    for (const auto& e : j.at("measurements")) {
      MeasurementInput m;
      m.label = e.at("label").get<std::string>();
      m.distance = e.at("distance").get<double>();
      m.direction = e.at("direction").get<std::string>();
      if (e.contains("wav")) m.wav = path.parent_path() / e.at("wav").get<std::string>();
      if (e.contains("real_db")) m.real_db = e.at("real_db").get<double>();
      if (e.contains("y")) m.y = e.at("y").get<double>();
      if (!m.wav && !m.real_db) {
        throw DataError("measurement '" + m.label + "' has neither wav nor real_db");
      }
      out.push_back(std::move(m));
    }
    return out;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<MeasurementRecord> compare_table(const std::vector<MeasurementInput>& inputs,
                                             const PredictorModel& model,
                                             const PanoramaScan& scan, double source_db,
                                             double calibration_offset) {
  std::vector<MeasurementRecord> out;
  for (const auto& in : inputs) {
    if (!(in.distance >= 0.0) || in.distance > kMaxListenerRange) {
      throw UsageError("measurement '" + in.label + "': distance must be within 10 m");
    }
    MeasurementRecord r;
    r.label = in.label;
    r.distance = in.distance;
    r.direction = in.direction;
    double y = 0.0;
    if (in.y) {
      y = *in.y;
    } else {
      const double theta = parse_direction(in.direction);
      const Pose2 listener{scan.origin.x + in.distance * std::cos(theta),
                           scan.origin.y + in.distance * std::sin(theta)};
      y = predict_from_scan(model, scan, listener);
    }
    r.db_predicted = scale_action_db(y, source_db);
    if (in.wav) {
      r.db_measured = waveform_db(load_wav(*in.wav), calibration_offset);
    } else if (in.real_db) {
      r.db_measured = *in.real_db;
    } else {
      throw UsageError("measurement '" + in.label + "' has no recording");
    }
    r.error = r.db_measured - r.db_predicted;
    out.push_back(std::move(r));
  }
  return out;
}

void write_table_csv(const std::filesystem::path& path,
                     const std::vector<MeasurementRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(10);
  out << "label,distance,direction,db_measured,db_predicted,error\n";
  for (const auto& r : records) {
    out << r.label << ',' << r.distance << ',' << r.direction << ',' << r.db_measured << ','
        << r.db_predicted << ',' << r.error << '\n';
  }
}

}  // namespace anavi
