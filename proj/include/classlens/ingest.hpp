#pragma once

// Session input parsing: manifest, detection JSONL, PCM WAV, annotation TSV,
// screen luminance CSV.

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "classlens/core.hpp"

namespace classlens {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Shared text helpers -------------------------------------------------------

/// Shortest decimal text that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw Error("format_number: conversion failed");
  return std::string(buf, ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ws(s.back())) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

// Detections ----------------------------------------------------------------

struct PersonDetection {
  int detection_id = 0;
  BoundingBox box;
  std::optional<PoseKeypoints> pose;
  double confidence = 0.0;
};

struct FrameDetections {
  std::int64_t frame_index = 0;
  Timestamp timestamp = 0.0;
  std::vector<PersonDetection> persons;
};

namespace detail {

inline PersonDetection person_from_json(const json& j) {
  PersonDetection p;
  p.detection_id = j.at("id").get<int>();
  const auto& box = j.at("box");
  if (!box.is_array() || box.size() != 4) throw ParseError("box must have 4 numbers");
  p.box = BoundingBox{{box[0].get<double>(), box[1].get<double>()}, box[2].get<double>(),
                      box[3].get<double>()};
  if (!is_usable(p.box)) throw ParseError("box has non-positive size");
  p.confidence = j.at("conf").get<double>();
  if (!(p.confidence >= 0.0 && p.confidence <= 1.0)) throw ParseError("conf outside [0,1]");
  if (auto it = j.find("kps"); it != j.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != kJointCount)
      throw ParseError("kps must have 17 entries");
    PoseKeypoints pose;
    for (std::size_t k = 0; k < kJointCount; ++k) {
      const auto& kp = (*it)[k];
      if (!kp.is_array() || kp.size() != 3) throw ParseError("keypoint must be [x,y,c]");
      pose.joints[k] = Keypoint{{kp[0].get<double>(), kp[1].get<double>()}, kp[2].get<double>()};
      if (!(pose.joints[k].confidence >= 0.0 && pose.joints[k].confidence <= 1.0))
        throw ParseError("keypoint confidence outside [0,1]");
    }
    p.pose = pose;
  }
  return p;
}

}  // namespace detail

/// Parses a detection JSONL stream. Blank lines are ignored. When `duration`
/// is given, frames stamped beyond it are rejected.
inline std::vector<FrameDetections> parse_detection_stream(
    std::istream& in, double fps, std::optional<double> duration = std::nullopt) {
  if (!(fps > 0.0)) throw ParseError("fps must be positive");
  std::vector<FrameDetections> frames;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = " at line " + std::to_string(line_no);
    FrameDetections fd;
    try {
      const json j = json::parse(line);
      fd.frame_index = j.at("frame").get<std::int64_t>();
      if (fd.frame_index < 0) throw ParseError("negative frame index");
      for (const auto& pj : j.at("persons")) fd.persons.push_back(detail::person_from_json(pj));
    } catch (const ParseError& e) {
      throw ParseError(std::string("malformed detection: ") + e.what() + where);
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed detection: ") + e.what() + where);
    }
    if (!frames.empty() && fd.frame_index <= frames.back().frame_index)
      throw ParseError("non-monotonic" + where);
    std::set<int> ids;
    for (const auto& p : fd.persons)
      if (!ids.insert(p.detection_id).second)
        throw ParseError("duplicate detection id " + std::to_string(p.detection_id) + where);
    fd.timestamp = static_cast<double>(fd.frame_index) / fps;
    if (duration && fd.timestamp > *duration)
      throw ParseError("frame timestamp beyond session duration" + where);
    frames.push_back(std::move(fd));
  }
  return frames;
}

inline std::vector<FrameDetections> parse_detection_stream(
    const fs::path& path, double fps, std::optional<double> duration = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open detection stream " + path.string());
  return parse_detection_stream(in, fps, duration);
}

inline std::string detection_line(const FrameDetections& fd) {
  json persons = json::array();
  for (const auto& p : fd.persons) {
    json pj{{"id", p.detection_id},
            {"box", {p.box.center.x, p.box.center.y, p.box.width, p.box.height}},
            {"conf", p.confidence}};
    if (p.pose) {
      json kps = json::array();
      for (const auto& k : p.pose->joints) kps.push_back({k.point.x, k.point.y, k.confidence});
      pj["kps"] = std::move(kps);
    }
    persons.push_back(std::move(pj));
  }
  return json{{"frame", fd.frame_index}, {"persons", std::move(persons)}}.dump();
}

// Audio ---------------------------------------------------------------------

struct AudioClip {
  int sample_rate = 16000;
  std::vector<double> samples;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

inline constexpr int kMaxAudioRate = 48000;

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}
inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

/// Decodes a PCM WAV held in memory: 16-bit integer or 32-bit float, any
/// channel count (averaged to mono). Rates above 48 kHz are decimated by an
/// integer factor with a boxcar pre-filter.
inline AudioClip decode_wav(std::string_view bytes) {
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();
  if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0)
    throw ParseError("not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* pcm = nullptr;
  std::size_t pcm_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= size) {
    const std::uint32_t chunk = detail::le32(data + pos + 4);
    const unsigned char* body = data + pos + 8;
    const std::size_t avail = std::min<std::size_t>(chunk, size - pos - 8);
    if (std::memcmp(data + pos, "fmt ", 4) == 0) {
      if (avail < 16) throw ParseError("fmt chunk too short");
      format = detail::le16(body);
      channels = detail::le16(body + 2);
      rate = detail::le32(body + 4);
      bits = detail::le16(body + 14);
      if (format == 0xFFFE) {
        if (avail < 26) throw ParseError("extensible fmt chunk too short");
        format = detail::le16(body + 24);  // first two bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (std::memcmp(data + pos, "data", 4) == 0) {
      pcm = body;
      pcm_size = avail;
    }
    pos += 8 + chunk + (chunk & 1u);
  }
  if (!have_fmt) throw ParseError("missing fmt chunk");
  if (!pcm) throw ParseError("missing data chunk");
  if (channels == 0) throw ParseError("unsupported num_channels 0");
  if (format == 1 && bits != 16)
    throw ParseError("unsupported bits_per_sample " + std::to_string(bits) + " for PCM");
  if (format == 3 && bits != 32)
    throw ParseError("unsupported bits_per_sample " + std::to_string(bits) + " for float");
  if (format != 1 && format != 3)
    throw ParseError("unsupported audio_format " + std::to_string(format));
  if (rate < 8000) throw ParseError("unsupported sample_rate " + std::to_string(rate));

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t n = pcm_size / frame_bytes;
  if (n == 0) throw ParseError("empty data chunk");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* s = pcm + i * frame_bytes + c * bytes_per_sample;
      if (format == 1) {
        acc += static_cast<std::int16_t>(detail::le16(s)) / 32768.0;
      } else {
        float f;
        const std::uint32_t u = detail::le32(s);
        std::memcpy(&f, &u, sizeof f);
        acc += std::clamp(static_cast<double>(f), -1.0, 1.0);
      }
    }
    clip.samples[i] = acc / channels;
  }

  if (clip.sample_rate > kMaxAudioRate) {
    const int factor = (clip.sample_rate + kMaxAudioRate - 1) / kMaxAudioRate;
    std::vector<double> out(clip.samples.size() / factor);
    for (std::size_t i = 0; i < out.size(); ++i) {
      double s = 0.0;
      for (int k = 0; k < factor; ++k) s += clip.samples[i * factor + k];
      out[i] = s / factor;
    }
    clip.samples = std::move(out);
    clip.sample_rate /= factor;
    if (clip.samples.empty()) throw ParseError("audio too short after decimation");
  }
  return clip;
}

inline AudioClip load_audio(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open audio " + path.string());
  return decode_wav(read_file(path));
}

enum class WavEncoding { pcm16, float32 };

inline std::string encode_wav(const std::vector<std::vector<double>>& channels, int sample_rate,
                              WavEncoding enc = WavEncoding::pcm16) {
  if (channels.empty()) throw Error("encode_wav: no channels");
  const std::size_t n = channels.front().size();
  const std::uint16_t nch = static_cast<std::uint16_t>(channels.size());
  const std::uint16_t bits = enc == WavEncoding::pcm16 ? 16 : 32;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(n * nch * (bits / 8));
  std::string out;
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  auto put16 = [&](std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>(v >> 8));
  };
  out += "RIFF";
  put32(36 + data_bytes);
  out += "WAVEfmt ";
  put32(16);
  put16(enc == WavEncoding::pcm16 ? 1 : 3);
  put16(nch);
  put32(static_cast<std::uint32_t>(sample_rate));
  put32(static_cast<std::uint32_t>(sample_rate) * nch * (bits / 8));
  put16(static_cast<std::uint16_t>(nch * (bits / 8)));
  put16(bits);
  out += "data";
  put32(data_bytes);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& ch : channels) {
      const double v = std::clamp(ch[i], -1.0, 1.0);
      if (enc == WavEncoding::pcm16) {
        const long q = std::lround(v * 32768.0);
        put16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L))));
      } else {
        const float f = static_cast<float>(v);
        std::uint32_t u;
        std::memcpy(&u, &f, sizeof u);
        put32(u);
      }
    }
  }
  return out;
}

// Annotations ---------------------------------------------------------------

enum class AnnotationSource { manual, model };

inline const char* to_string(AnnotationSource s) {
  return s == AnnotationSource::manual ? "manual" : "model";
}

struct RawAnnotation {
  TimeInterval interval;
  std::string label;
  AnnotationSource source = AnnotationSource::manual;
  friend bool operator==(const RawAnnotation&, const RawAnnotation&) = default;
};

/// Parses `start<TAB>end<TAB>label` records; `#` lines are comments.
inline std::vector<RawAnnotation> parse_annotations(std::istream& in, AnnotationSource source,
                                                    std::optional<double> duration = std::nullopt) {
  std::vector<RawAnnotation> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const std::string where = " (line " + std::to_string(line_no) + ")";
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw ParseError("expected start<TAB>end<TAB>label" + where);
    const auto start = parse_double(std::string_view(line).substr(0, t1));
    const auto end = parse_double(std::string_view(line).substr(t1 + 1, t2 - t1 - 1));
    if (!start || !end) throw ParseError("non-numeric time" + where);
    if (*end < *start) throw ParseError("end before start" + where);
    if (*start < 0.0) throw ParseError("negative time" + where);
    if (duration && *end > *duration) throw ParseError("annotation beyond session duration" + where);
    const std::string label(trim(std::string_view(line).substr(t2 + 1)));
    if (label.empty()) throw ParseError("empty label" + where);
    out.push_back({{*start, *end}, label, source});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.interval.start < b.interval.start;
  });
  return out;
}

inline std::vector<RawAnnotation> parse_annotation_file(const fs::path& path, AnnotationSource source,
                                                        std::optional<double> duration = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open annotations " + path.string());
  return parse_annotations(in, source, duration);
}

inline std::string format_annotations(const std::vector<RawAnnotation>& anns) {
  std::string out;
  for (const auto& a : anns) {
    out += format_number(a.interval.start) + '\t' + format_number(a.interval.end) + '\t' +
           a.label + '\n';
  }
  return out;
}

// Screen luminance ----------------------------------------------------------

struct LumaSample {
  Timestamp time = 0.0;
  double luma = 0.0;
};

/// Parses `frame,luma` CSV (header line optional) into a time series.
inline std::vector<LumaSample> parse_luma_stream(std::istream& in, double fps) {
  std::vector<LumaSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto comma = view.find(',');
    if (comma == std::string_view::npos) throw ParseError("expected frame,luma (line " + std::to_string(line_no) + ")");
    const auto frame = parse_double(view.substr(0, comma));
    const auto luma = parse_double(view.substr(comma + 1));
    if (!frame || !luma) {
      if (line_no == 1) continue;  // header
      throw ParseError("non-numeric luma record (line " + std::to_string(line_no) + ")");
    }
    const double t = *frame / fps;
    if (!out.empty() && t <= out.back().time)
      throw ParseError("non-monotonic (line " + std::to_string(line_no) + ")");
    out.push_back({t, *luma});
  }
  return out;
}

// Manifest ------------------------------------------------------------------

struct SessionManifest {
  fs::path directory;
  std::string session_id;
  double fps = 25.0;
  double duration = 0.0;
  std::string media_path;  // relative to directory; may be empty
  fs::path detections;
  fs::path audio;
  std::optional<fs::path> annotations;
  std::optional<fs::path> model_actions;
  std::optional<fs::path> screen_luma;
  std::vector<Zone> zones;
  std::map<std::string, std::string> style_map;  // label -> active|passive
  std::map<std::string, std::string> label_map;  // label -> action kind
  json config = json::object();                  // partial analysis-config overrides

  const Zone* zone(std::string_view name) const {
    for (const auto& z : zones)
      if (z.name == name) return &z;
    return nullptr;
  }
};

inline constexpr const char* kManifestName = "session.json";

struct ManifestFinding {
  std::string where;
  std::string message;
};

namespace detail {

inline Polygon polygon_from_json(const json& j) {
  Polygon poly;
  for (const auto& v : j) {
    if (!v.is_array() || v.size() != 2) throw ConfigError("zone vertex must be [x,y]");
    poly.push_back({v[0].get<double>(), v[1].get<double>()});
  }
  return poly;
}

inline bool segments_equal(NormPoint a, NormPoint b, NormPoint c, NormPoint d) {
  return (a == c && b == d) || (a == d && b == c);
}

}  // namespace detail

/// Structural checks on a parsed manifest. Returns every problem found.
inline std::vector<ManifestFinding> lint_manifest(const SessionManifest& m, bool check_paths = true) {
  std::vector<ManifestFinding> out;
  if (m.session_id.empty()) out.push_back({"session_id", "must be non-empty"});
  if (!(m.fps > 0.0)) out.push_back({"fps", "must be positive"});
  if (!(m.duration > 0.0)) out.push_back({"duration", "must be positive"});
  for (const auto& z : m.zones) {
    if (z.polygon.size() < 3)
      out.push_back({"zones." + z.name, "zone '" + z.name + "' has " +
                                            std::to_string(z.polygon.size()) +
                                            " vertices (need >= 3)"});
    for (const auto& p : z.polygon)
      if (!(p.x >= 0 && p.x <= 1 && p.y >= 0 && p.y <= 1))
        out.push_back({"zones." + z.name, "vertex outside unit square"});
  }
  for (const char* required : {"board", "students"})
    if (!m.zone(required)) out.push_back({"zones", std::string("missing required zone '") + required + "'"});
  for (const auto& [label, cls] : m.style_map)
    if (cls != "active" && cls != "passive")
      out.push_back({"style_map." + label, "class must be active or passive"});
  if (check_paths) {
    auto need = [&](const char* name, const fs::path& p) {
      if (!fs::exists(p)) out.push_back({std::string("streams.") + name, "missing file " + p.string()});
    };
    need("detections", m.detections);
    need("audio", m.audio);
    if (m.annotations) need("annotations", *m.annotations);
    if (m.model_actions) need("model_actions", *m.model_actions);
    if (m.screen_luma) need("screen_luma", *m.screen_luma);
  }
  return out;
}

/// Shared zone edges make closed-boundary membership ambiguous.
inline std::vector<ManifestFinding> shared_edge_warnings(const SessionManifest& m) {
  std::vector<ManifestFinding> out;
  for (std::size_t i = 0; i < m.zones.size(); ++i)
    for (std::size_t j = i + 1; j < m.zones.size(); ++j) {
      const auto& a = m.zones[i].polygon;
      const auto& b = m.zones[j].polygon;
      for (std::size_t p = 0; p < a.size(); ++p)
        for (std::size_t q = 0; q < b.size(); ++q)
          if (detail::segments_equal(a[p], a[(p + 1) % a.size()], b[q], b[(q + 1) % b.size()]))
            out.push_back({"zones", "zones '" + m.zones[i].name + "' and '" + m.zones[j].name +
                                        "' share an edge"});
    }
  return out;
}

/// Parses a manifest document without validating it.
inline SessionManifest manifest_from_json(const json& j, const fs::path& dir) {
  SessionManifest m;
  m.directory = dir;
  try {
    m.session_id = j.at("session_id").get<std::string>();
    m.fps = j.at("fps").get<double>();
    m.duration = j.at("duration").get<double>();
    m.media_path = j.value("media_path", std::string{});
    const auto& s = j.at("streams");
    m.detections = dir / s.at("detections").get<std::string>();
    m.audio = dir / s.at("audio").get<std::string>();
    if (s.contains("annotations")) m.annotations = dir / s["annotations"].get<std::string>();
    if (s.contains("model_actions")) m.model_actions = dir / s["model_actions"].get<std::string>();
    if (s.contains("screen_luma")) m.screen_luma = dir / s["screen_luma"].get<std::string>();
    if (j.contains("zones"))
      for (const auto& [name, poly] : j["zones"].items())
        m.zones.push_back({name, detail::polygon_from_json(poly)});
    if (j.contains("style_map")) m.style_map = j["style_map"].get<std::map<std::string, std::string>>();
    if (j.contains("label_map")) m.label_map = j["label_map"].get<std::map<std::string, std::string>>();
    if (j.contains("config")) {
      if (!j["config"].is_object()) throw ConfigError("session.json: config must be an object");
      m.config = j["config"];
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("session.json: ") + e.what());
  }
  return m;
}

/// Thrown when a session directory has no manifest.
class ManifestMissing : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Loads and validates `<dir>/session.json`.
inline SessionManifest load_manifest(const fs::path& dir) {
  const fs::path path = dir / kManifestName;
  if (!fs::exists(path)) throw ManifestMissing("missing " + path.string());
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("session.json: ") + e.what());
  }
  SessionManifest m = manifest_from_json(j, dir);
  if (auto findings = lint_manifest(m); !findings.empty())
    throw ConfigError("session.json: " + findings.front().where + ": " + findings.front().message);
  return m;
}

inline json manifest_to_json(const SessionManifest& m) {
  json streams{{"detections", fs::relative(m.detections, m.directory).generic_string()},
               {"audio", fs::relative(m.audio, m.directory).generic_string()}};
  if (m.annotations) streams["annotations"] = fs::relative(*m.annotations, m.directory).generic_string();
  if (m.model_actions) streams["model_actions"] = fs::relative(*m.model_actions, m.directory).generic_string();
  if (m.screen_luma) streams["screen_luma"] = fs::relative(*m.screen_luma, m.directory).generic_string();
  json zones = json::object();
  for (const auto& z : m.zones) {
    json poly = json::array();
    for (const auto& p : z.polygon) poly.push_back({p.x, p.y});
    zones[z.name] = std::move(poly);
  }
  json out{{"session_id", m.session_id}, {"fps", m.fps},        {"duration", m.duration},
           {"media_path", m.media_path}, {"streams", streams},  {"zones", zones},
           {"style_map", m.style_map},   {"label_map", m.label_map}};
  if (!m.config.empty()) out["config"] = m.config;
  return out;
}

}  // namespace classlens
