#pragma once

// Session manifests, 16-bit PCM WAV I/O, rating binarization and the
// synthetic corpus generator.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bmf/error.hpp"

namespace bmf {

struct AudioSignal {
  std::vector<double> samples;
  int sample_rate_hz = 16000;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

inline void validate(const AudioSignal& s) {
  if (s.samples.empty()) throw InputError("audio signal is empty");
  if (s.sample_rate_hz < 8000)
    throw InputError("sample rate " + std::to_string(s.sample_rate_hz) +
                     " Hz is below 8000 Hz");
  for (double x : s.samples)
    if (!std::isfinite(x)) throw InputError("audio signal has non-finite samples");
}

struct SessionRecord {
  std::string session_id;
  std::filesystem::path audio_path;
  std::string group_id;
  std::optional<std::string> scenario;
  std::map<std::string, double> ratings;  // behavior code -> [1, 9]
};

struct Manifest {
  std::vector<SessionRecord> records;

  const SessionRecord* find(std::string_view session_id) const {
    for (const auto& r : records)
      if (r.session_id == session_id) return &r;
    return nullptr;
  }
};

struct BinaryLabelSet {
  std::string behavior_code;
  std::set<std::string> positive;
  std::set<std::string> negative;
  std::set<std::string> excluded;

  static constexpr const char* kPositive = "high";
  static constexpr const char* kNegative = "low";

  /// Label string for a session, or nullopt when it is excluded/unrated.
  std::optional<std::string> label_of(const std::string& session_id) const {
    if (positive.count(session_id)) return std::string(kPositive);
    if (negative.count(session_id)) return std::string(kNegative);
    return std::nullopt;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t'))
    s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline void put_u16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>(v >> 8));
}
inline void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace detail

/// Parses a manifest CSV. Required columns: session_id, wav_path, group_id.
/// Optional: scenario and any number of `rating:<code>` columns. Relative
/// wav paths are resolved against the manifest's directory.
inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw InputError("empty manifest");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF)
    line.erase(0, 3);

  auto header = detail::split_csv_line(detail::trim(line));
  int col_sid = -1, col_wav = -1, col_grp = -1, col_scn = -1;
  std::vector<std::pair<int, std::string>> rating_cols;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    std::string name(detail::trim(header[i]));
    if (name == "session_id") col_sid = i;
    else if (name == "wav_path") col_wav = i;
    else if (name == "group_id") col_grp = i;
    else if (name == "scenario") col_scn = i;
    else if (name.rfind("rating:", 0) == 0 && name.size() > 7)
      rating_cols.emplace_back(i, name.substr(7));
  }
  for (auto [col, name] : {std::pair{col_sid, "session_id"}, std::pair{col_wav, "wav_path"},
                           std::pair{col_grp, "group_id"}})
    if (col < 0) throw InputError(std::string("manifest missing required column '") + name + "'");

  const auto base = path.parent_path();
  Manifest m;
  std::set<std::string> ids;
  std::set<std::filesystem::path> paths;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    auto t = detail::trim(line);
    if (t.empty()) continue;
    auto cells = detail::split_csv_line(t);
    auto cell = [&](int c) -> std::string {
      return c >= 0 && c < static_cast<int>(cells.size()) ? std::string(detail::trim(cells[c]))
                                                          : std::string();
    };
    SessionRecord r;
    r.session_id = cell(col_sid);
    if (r.session_id.empty()) throw InputError("row " + std::to_string(row) + ": empty session_id");
    std::string wav = cell(col_wav);
    if (wav.empty()) throw InputError("row " + std::to_string(row) + ": empty wav_path");
    r.audio_path = std::filesystem::path(wav);
    if (r.audio_path.is_relative()) r.audio_path = base / r.audio_path;
    r.group_id = cell(col_grp);
    if (r.group_id.empty()) throw InputError("row " + std::to_string(row) + ": empty group_id");
    if (auto s = cell(col_scn); !s.empty()) r.scenario = s;
    for (const auto& [c, code] : rating_cols) {
      auto v = cell(c);
      if (v.empty()) continue;
      double x = 0;
      try {
        std::size_t used = 0;
        x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
      } catch (const std::exception&) {
        throw InputError("row " + std::to_string(row) + ": rating:" + code + " value '" + v +
                         "' is not a number");
      }
      if (!(x >= 1.0 && x <= 9.0))
        throw InputError("row " + std::to_string(row) + ": rating:" + code + "=" + v +
                         " outside [1, 9]");
      r.ratings[code] = x;
    }
    if (!ids.insert(r.session_id).second)
      throw InputError("row " + std::to_string(row) + ": duplicate session_id '" + r.session_id + "'");
    if (!paths.insert(r.audio_path.lexically_normal()).second)
      throw InputError("row " + std::to_string(row) + ": duplicate wav_path '" + wav + "'");
    m.records.push_back(std::move(r));
  }
  if (m.records.empty()) throw InputError("empty manifest");
  return m;
}

/// Writes a manifest CSV. Audio paths are written relative to `path`'s
/// directory when they live beneath it.
inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::set<std::string> codes;
  for (const auto& r : m.records)
    for (const auto& [code, v] : r.ratings) codes.insert(code);

  std::ostringstream os;
  os << "session_id,wav_path,group_id,scenario";
  for (const auto& c : codes) os << ",rating:" << c;
  os << '\n';
  const auto base = path.parent_path();
  for (const auto& r : m.records) {
    auto rel = r.audio_path.lexically_relative(base);
    auto wav = (rel.empty() || rel.native().rfind("..", 0) == 0) ? r.audio_path : rel;
    os << detail::csv_escape(r.session_id) << ',' << detail::csv_escape(wav.generic_string()) << ','
       << detail::csv_escape(r.group_id) << ',' << detail::csv_escape(r.scenario.value_or(""));
    for (const auto& c : codes) {
      os << ',';
      if (auto it = r.ratings.find(c); it != r.ratings.end()) os << it->second;
    }
    os << '\n';
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write manifest " + path.string());
  out << os.str();
}

/// Reads a RIFF/WAVE file with 16-bit PCM samples. Channels are averaged
/// to mono and samples scaled by 1/32768.
inline AudioSignal read_audio(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open audio file " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = " (" + path.string() + ")";
  if (buf.size() < 12 || std::string_view(reinterpret_cast<char*>(buf.data()), 4) != "RIFF" ||
      std::string_view(reinterpret_cast<char*>(buf.data()) + 8, 4) != "WAVE")
    throw InputError("not a RIFF/WAVE file" + where);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    std::string_view id(reinterpret_cast<char*>(buf.data()) + pos, 4);
    std::uint32_t size = detail::read_u32(&buf[pos + 4]);
    std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + size > buf.size()) throw InputError("truncated fmt chunk" + where);
      format = detail::read_u16(&buf[body]);
      channels = detail::read_u16(&buf[body + 2]);
      rate = detail::read_u32(&buf[body + 4]);
      bits = detail::read_u16(&buf[body + 14]);
      if (format == 0xFFFE && size >= 26) format = detail::read_u16(&buf[body + 24]);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw InputError("data chunk before fmt chunk" + where);
      if (format != 1 || bits != 16)
        throw InputError("unsupported encoding: format " + std::to_string(format) + ", " +
                         std::to_string(bits) + " bits; need 16-bit PCM" + where);
      if (channels == 0) throw InputError("zero channels" + where);
      if (body + size > buf.size()) throw InputError("truncated data chunk" + where);
      const std::size_t frame_bytes = 2u * channels;
      if (size % frame_bytes != 0) throw InputError("truncated sample frame" + where);
      AudioSignal s;
      s.sample_rate_hz = static_cast<int>(rate);
      const std::size_t n = size / frame_bytes;
      s.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        long acc = 0;
        for (std::size_t c = 0; c < channels; ++c)
          acc += static_cast<std::int16_t>(detail::read_u16(&buf[body + i * frame_bytes + 2 * c]));
        s.samples[i] = static_cast<double>(acc) / channels / 32768.0;
      }
      return s;
    }
    pos = body + size + (size & 1u);
  }
  throw InputError(std::string(have_fmt ? "missing data chunk" : "missing fmt chunk") + where);
}

/// 16-bit quantization used by write_audio: round(x * 32768) clamped to int16.
inline std::int16_t quantize_pcm16(double x) {
  double v = std::round(x * 32768.0);
  return static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0));
}

inline void write_audio(const std::filesystem::path& path, const AudioSignal& s) {
  const auto data_bytes = static_cast<std::uint32_t>(s.samples.size() * 2);
  std::string b;
  b.reserve(44 + data_bytes);
  b += "RIFF";
  detail::put_u32(b, 36 + data_bytes);
  b += "WAVEfmt ";
  detail::put_u32(b, 16);
  detail::put_u16(b, 1);
  detail::put_u16(b, 1);
  detail::put_u32(b, static_cast<std::uint32_t>(s.sample_rate_hz));
  detail::put_u32(b, static_cast<std::uint32_t>(s.sample_rate_hz) * 2);
  detail::put_u16(b, 2);
  detail::put_u16(b, 16);
  b += "data";
  detail::put_u32(b, data_bytes);
  for (double x : s.samples) detail::put_u16(b, static_cast<std::uint16_t>(quantize_pcm16(x)));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write audio file " + path.string());
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

/// Splits the sessions rated for `behavior_code` into the floor(fraction*n)
/// lowest (negative) and highest (positive) rated; the rest are excluded.
/// Ordering is by (rating, session_id), so ties cut deterministically.
inline BinaryLabelSet binarize_ratings(const Manifest& manifest, const std::string& behavior_code,
                                       double fraction) {
  if (!(fraction > 0.0 && fraction <= 0.5))
    throw InputError("binarization fraction must lie in (0, 0.5]");
  std::vector<std::pair<double, std::string>> rated;
  for (const auto& r : manifest.records)
    if (auto it = r.ratings.find(behavior_code); it != r.ratings.end())
      rated.emplace_back(it->second, r.session_id);
  if (rated.empty()) throw InputError("no session rated for behavior '" + behavior_code + "'");
  std::sort(rated.begin(), rated.end());
  const auto n = rated.size();
  const auto m = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  if (m == 0)
    throw InputError("binarizing " + std::to_string(n) + " rated sessions with fraction " +
                     std::to_string(fraction) + " selects no session");
  BinaryLabelSet out;
  out.behavior_code = behavior_code;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < m) out.negative.insert(rated[i].second);
    else if (i >= n - m) out.positive.insert(rated[i].second);
    else out.excluded.insert(rated[i].second);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

struct SynthCorpus {
  Manifest manifest;
  std::vector<AudioSignal> audio;  // parallel to manifest.records
  std::vector<int> classes;
};

inline constexpr const char* kSynthBehavior = "synthetic";

/// Center fundamental of a synthetic class: 110 Hz, 220 Hz, 330 Hz, 440 Hz.
inline double synth_class_f0(int cls) { return 110.0 * (cls + 1); }

namespace detail {

inline AudioSignal synth_session(int cls, double seconds, std::uint64_t seed) {
  constexpr int rate = 16000;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  // Per-session "speaker" nuisance: pitch offset, tilt offset, formant,
  // speaking rate, gain and a slow loudness drift.
  const double center = synth_class_f0(cls) * (1.0 + 0.05 * (2.0 * uni(rng) - 1.0));
  const double tilt = 1.0 + 0.8 * cls + 0.15 * (uni(rng) - 0.5);
  const double formant_hz = 400.0 + 1000.0 * uni(rng);
  const double formant2_hz = 1500.0 + 1500.0 * uni(rng);
  const double tempo = 0.5 + uni(rng);
  const double walk_step = 0.003 + 0.017 * uni(rng);
  const double level_spread = 0.05 + 0.5 * uni(rng);
  const double gain = 0.25 + 0.2 * uni(rng);
  const double drift_period_s = 20.0 + 20.0 * uni(rng);
  const double drift_phase = two_pi * uni(rng);
  const double max_harmonic_hz = 4000.0;
  const int max_harmonics = static_cast<int>(max_harmonic_hz / (center * 0.9)) + 1;
  std::vector<double> harmonic_gain(static_cast<std::size_t>(max_harmonics) + 1);
  for (int k = 1; k <= max_harmonics; ++k)
    harmonic_gain[static_cast<std::size_t>(k)] = std::pow(static_cast<double>(k), -tilt);

  // Two-pole resonators at the formant frequencies.
  struct Resonator {
    double a1, a2, y1 = 0.0, y2 = 0.0;
    double step(double x) {
      const double y = x + a1 * y1 + a2 * y2;
      y2 = y1;
      y1 = y;
      return y;
    }
  };
  const double radius = std::exp(-std::numbers::pi * 150.0 / rate);
  Resonator f1{2.0 * radius * std::cos(two_pi * formant_hz / rate), -radius * radius};
  Resonator f2{2.0 * radius * std::cos(two_pi * formant2_hz / rate), -radius * radius};

  std::vector<double> voiced(n, 0.0);
  double walk = 0.0;
  double phase = 0.0;
  double env_target = 0.0;
  double env = 0.0;
  std::size_t seg_left = 0;
  bool in_voice = false;
  const std::size_t hop = rate / 100;

  for (std::size_t i = 0; i < n; ++i) {
    if (seg_left == 0) {
      in_voice = !in_voice;
      const double len = in_voice ? 0.12 + 0.25 * uni(rng) : 0.05 + 0.15 * uni(rng);
      seg_left = static_cast<std::size_t>(len * tempo * rate);
      env_target = in_voice ? 1.0 - level_spread * uni(rng) : 0.0;
    }
    --seg_left;
    if (i % hop == 0) {
      walk += walk_step * gauss(rng);
      if (walk > 0.1) walk = 0.2 - walk;
      if (walk < -0.1) walk = -0.2 - walk;
    }
    // One-pole smoothing (5 ms) toward the segment level.
    env += (env_target - env) / (0.005 * rate);
    const double f0 = center * (1.0 + walk);
    phase += two_pi * f0 / rate;
    if (phase > two_pi) phase -= two_pi;
    // sin(k*phase) by the Chebyshev recurrence.
    const int harmonics = std::min(max_harmonics, static_cast<int>(max_harmonic_hz / f0));
    const double c2 = 2.0 * std::cos(phase);
    double s_prev = 0.0, s_cur = std::sin(phase), acc = 0.0;
    for (int k = 1; k <= harmonics; ++k) {
      acc += s_cur * harmonic_gain[static_cast<std::size_t>(k)];
      const double s_next = c2 * s_cur - s_prev;
      s_prev = s_cur;
      s_cur = s_next;
    }
    const double source = env * acc;
    const double shaped = (f1.step(source) + 0.5 * f2.step(source)) * (1.0 - radius);
    const double drift = std::pow(10.0, 0.15 * std::sin(two_pi * i / (drift_period_s * rate) + drift_phase));
    voiced[i] = (source + 0.5 * shaped) * drift;
  }

  double power = 0.0, peak = 0.0;
  for (double v : voiced) {
    power += v * v;
    peak = std::max(peak, std::abs(v));
  }
  power /= static_cast<double>(n);
  const double scale = peak > 0 ? gain / peak : 0.0;
  const double noise_std = std::sqrt(power / 100.0) * scale;  // 20 dB SNR

  AudioSignal s;
  s.sample_rate_hz = rate;
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = voiced[i] * scale + noise_std * gauss(rng);
    s.samples[i] = quantize_pcm16(x) / 32768.0;
  }
  return s;
}

}  // namespace detail

/// Deterministic synthetic corpus. Session i has latent class i % n_classes,
/// its own group, a harmonic voice whose fundamental wanders +-10% around the
/// class center, a class-dependent spectral tilt, per-session speaker
/// nuisance and white noise at 20 dB SNR.
/// The class is stored as rating "synthetic" (lowest class 1.0, highest 9.0)
/// and as scenario "class<c>". Audio paths are "<session_id>.wav".
inline SynthCorpus synth_corpus(int n_sessions, double session_len_s, int n_classes,
                                std::uint64_t seed) {
  if (n_classes < 1 || n_classes > 4) throw InputError("synth: n_classes must be in [1, 4]");
  if (n_sessions < 2 * n_classes) throw InputError("synth: need at least 2 sessions per class");
  if (!(session_len_s >= 30.0)) throw InputError("synth: sessions must be at least 30 s long");

  SynthCorpus c;
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(n_sessions));
  {
    std::mt19937_64 master(seed ^ 0x9E3779B97F4A7C15ull);
    for (auto& s : seeds) s = master();
  }
  for (int i = 0; i < n_sessions; ++i) {
    const int cls = i % n_classes;
    char id[32];
    std::snprintf(id, sizeof id, "s%03d", i);
    char grp[32];
    std::snprintf(grp, sizeof grp, "g%03d", i);
    SessionRecord r;
    r.session_id = id;
    r.audio_path = std::string(id) + ".wav";
    r.group_id = grp;
    r.scenario = "class" + std::to_string(cls);
    r.ratings[kSynthBehavior] = n_classes == 1 ? 1.0 : 1.0 + 8.0 * cls / (n_classes - 1);
    c.manifest.records.push_back(std::move(r));
    c.audio.push_back(detail::synth_session(cls, session_len_s, seeds[static_cast<std::size_t>(i)]));
    c.classes.push_back(cls);
  }
  return c;
}

/// Writes a synthetic corpus as `dir/manifest.csv` plus one WAV per session.
/// Record paths in the returned corpus point inside `dir`.
inline SynthCorpus write_synth_corpus(const std::filesystem::path& dir, int n_sessions,
                                      double session_len_s, int n_classes, std::uint64_t seed) {
  auto c = synth_corpus(n_sessions, session_len_s, n_classes, seed);
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < c.audio.size(); ++i) {
    auto& r = c.manifest.records[i];
    r.audio_path = dir / r.audio_path;
    write_audio(r.audio_path, c.audio[i]);
  }
  write_manifest(dir / "manifest.csv", c.manifest);
  return c;
}

}  // namespace bmf
