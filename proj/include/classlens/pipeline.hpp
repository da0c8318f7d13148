#pragma once

// End-to-end drivers behind the CLI: analyze a session directory and
// validate its inputs.

#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "classlens/actions.hpp"
#include "classlens/config.hpp"
#include "classlens/ingest.hpp"
#include "classlens/speech.hpp"
#include "classlens/summary.hpp"
#include "classlens/tracking.hpp"

namespace classlens {

enum ExitCode : int {
  kExitOk = 0,
  kExitFindings = 1,
  kExitMissingManifest = 2,
  kExitUsage = 2,
  kExitParse = 3,
  kExitPipeline = 4,
};

struct AnalyzeOptions {
  fs::path session_dir;
  std::optional<fs::path> out_dir;  // defaults to session_dir
  std::optional<fs::path> config_file;
  std::vector<std::string> assignments;  // key=value overrides, applied last
  std::optional<fs::path> dump_tracking;
};

/// Defaults, then the manifest's `config` block, then the config file, then
/// individual assignments.
inline AnalysisConfig effective_config(const SessionManifest& m, const AnalyzeOptions& opt) {
  AnalysisConfig cfg = config_with_overrides(AnalysisConfig{}, m.config);
  if (opt.config_file) cfg = load_config_file(*opt.config_file, cfg);
  for (const auto& a : opt.assignments) cfg = config_with_assignment(cfg, a);
  return cfg;
}

struct SessionInputs {
  std::vector<FrameDetections> frames;
  AudioClip audio;
  std::vector<RawAnnotation> manual;
  std::vector<RawAnnotation> model;
  std::vector<LumaSample> luma;
};

inline SessionInputs load_session_inputs(const SessionManifest& m) {
  const auto tagged = [](const fs::path& p, auto&& fn) {
    try {
      return fn();
    } catch (const ParseError& e) {
      throw ParseError(p.filename().string() + ": " + e.what());
    }
  };
  SessionInputs in;
  in.frames = tagged(m.detections, [&] { return parse_detection_stream(m.detections, m.fps, m.duration); });
  in.audio = tagged(m.audio, [&] { return load_audio(m.audio); });
  if (m.annotations)
    in.manual = tagged(*m.annotations,
                       [&] { return parse_annotation_file(*m.annotations, AnnotationSource::manual, m.duration); });
  if (m.model_actions)
    in.model = tagged(*m.model_actions,
                      [&] { return parse_annotation_file(*m.model_actions, AnnotationSource::model, m.duration); });
  if (m.screen_luma)
    in.luma = tagged(*m.screen_luma, [&] {
      std::ifstream f(*m.screen_luma);
      if (!f) throw ParseError("cannot open");
      auto luma = parse_luma_stream(f, m.fps);
      if (!luma.empty() && luma.back().time > m.duration)
        throw ParseError("timestamp beyond session duration");
      return luma;
    });
  return in;
}

struct AnalysisArtifacts {
  std::string summary;   // summary.json text
  std::string timeline;  // timeline.json text
  std::string windows;   // windows.csv text
  std::string tracking_log;
  json summary_doc;
  EventTimeline events;
};

inline AnalysisArtifacts analyze_session(const SessionManifest& m, const AnalysisConfig& cfg,
                                         const fs::path& out_dir) {
  const SessionInputs in = load_session_inputs(m);

  // Audio and video chains are independent.
  auto speech_job = std::async(std::launch::async, [&] { return analyze_speech(in.audio, cfg.speech, m.duration); });
  TrackingResult tracking;
  try {
    tracking = build_teacher_track(in.frames, cfg.tracking);
  } catch (...) {
    speech_job.wait();
    throw;
  }
  const SpeechAnalysis speech = speech_job.get();

  HandWaveParams wave = cfg.hand_wave;
  wave.visibility = cfg.tracking.visibility;
  std::vector<std::vector<ActionEvent>> sources;
  sources.push_back(detect_hand_wave(tracking.teacher_poses, wave));
  sources.push_back(detect_slide_change(in.luma, cfg.slide_change));
  sources.push_back(ingest_model_actions(in.model, m.label_map, m.style_map));
  {
    // Manual annotations contribute action events only through label_map.
    std::vector<RawAnnotation> mapped;
    for (const auto& a : in.manual)
      if (m.label_map.count(a.label)) mapped.push_back(a);
    sources.push_back(ingest_model_actions(mapped, m.label_map));
  }

  AnalysisArtifacts out;
  out.events = merge_timeline(m.session_id, sources, cfg.merge_gap);

  SummaryInputs si;
  si.manifest = &m;
  si.config = &cfg;
  si.tracking = &tracking;
  si.speech = &speech;
  si.timeline = &out.events;
  si.manual_annotations = in.manual;
  if (!m.media_path.empty()) {
    const fs::path media = fs::weakly_canonical(m.directory / m.media_path);
    si.media_path = fs::relative(media, fs::weakly_canonical(out_dir)).generic_string();
  }
  out.summary_doc = compile_summary(si);
  out.summary = dump_document(out.summary_doc);
  out.timeline = dump_document(timeline_to_json(out.events));

  std::vector<WindowFeatures> all{speech.session};
  all.insert(all.end(), speech.coarse.begin(), speech.coarse.end());
  all.insert(all.end(), speech.fine.begin(), speech.fine.end());
  out.windows = windows_to_csv(all);

  for (const auto& f : tracking.log) out.tracking_log += frame_log_to_json(f).dump() + "\n";
  return out;
}

/// Maps the error taxonomy onto CLI exit codes and prints a diagnostic.
template <class Fn>
int with_exit_codes(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ManifestMissing& e) {
    err << "error: " << e.what() << "\n";
    return kExitMissingManifest;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitParse;
  } catch (const PipelineError& e) {
    err << "pipeline error: " << e.what() << "\n";
    return kExitPipeline;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitPipeline;
  }
}

inline int run_analyze(const AnalyzeOptions& opt, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  return with_exit_codes(err, [&] {
    const SessionManifest m = load_manifest(opt.session_dir);
    const AnalysisConfig cfg = effective_config(m, opt);
    const fs::path out_dir = opt.out_dir.value_or(opt.session_dir);
    fs::create_directories(out_dir);
    const auto art = analyze_session(m, cfg, out_dir);
    write_file(out_dir / kSummaryName, art.summary);
    write_file(out_dir / kTimelineName, art.timeline);
    write_file(out_dir / kWindowsName, art.windows);
    if (opt.dump_tracking) write_file(*opt.dump_tracking, art.tracking_log);
    log << "analyzed " << m.session_id << ": " << art.events.events.size() << " events, "
        << art.summary_doc["tracking"]["samples"].get<std::size_t>() << " teacher samples -> "
        << out_dir.string() << "\n";
    return static_cast<int>(kExitOk);
  });
}

// Validation ----------------------------------------------------------------

struct ValidationReport {
  std::vector<ManifestFinding> errors;
  std::vector<ManifestFinding> warnings;
  bool clean() const { return errors.empty(); }
};

/// Lints the manifest, zone polygons and every stream without stopping at the
/// first problem.
inline ValidationReport validate_session(const fs::path& dir) {
  ValidationReport r;
  const fs::path path = dir / kManifestName;
  if (!fs::exists(path)) {
    r.errors.push_back({kManifestName, "missing"});
    return r;
  }
  SessionManifest m;
  try {
    m = manifest_from_json(json::parse(read_file(path)), dir);
  } catch (const std::exception& e) {
    r.errors.push_back({kManifestName, e.what()});
    return r;
  }
  for (auto& f : lint_manifest(m)) r.errors.push_back({std::string(kManifestName) + ":" + f.where, f.message});
  for (auto& f : shared_edge_warnings(m)) r.warnings.push_back({std::string(kManifestName) + ":" + f.where, f.message});
  try {
    (void)config_with_overrides(AnalysisConfig{}, m.config);
  } catch (const ConfigError& e) {
    r.errors.push_back({std::string(kManifestName) + ":config", e.what()});
  }
  if (!(m.fps > 0.0) || !(m.duration > 0.0)) return r;

  const auto check = [&](const fs::path& p, auto&& fn) {
    if (!fs::exists(p)) return;  // already reported by lint
    try {
      fn();
    } catch (const Error& e) {
      r.errors.push_back({p.filename().string(), e.what()});
    }
  };
  check(m.detections, [&] { (void)parse_detection_stream(m.detections, m.fps, m.duration); });
  check(m.audio, [&] { (void)load_audio(m.audio); });
  if (m.annotations)
    check(*m.annotations, [&] { (void)parse_annotation_file(*m.annotations, AnnotationSource::manual, m.duration); });
  if (m.model_actions)
    check(*m.model_actions,
          [&] { (void)parse_annotation_file(*m.model_actions, AnnotationSource::model, m.duration); });
  if (m.screen_luma)
    check(*m.screen_luma, [&] {
      std::ifstream f(*m.screen_luma);
      (void)parse_luma_stream(f, m.fps);
    });
  return r;
}

inline int run_validate(const fs::path& dir, std::ostream& out = std::cout) {
  const auto r = validate_session(dir);
  for (const auto& f : r.errors) out << "error   " << f.where << ": " << f.message << "\n";
  for (const auto& f : r.warnings) out << "warning " << f.where << ": " << f.message << "\n";
  out << (r.clean() ? "clean" : std::to_string(r.errors.size()) + " problem(s)") << "\n";
  return r.clean() ? kExitOk : kExitFindings;
}

}  // namespace classlens
