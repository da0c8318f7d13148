// classlens: analyze | synth | validate | serve

#include <csignal>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "classlens/classlens.hpp"
#include "classlens/service.hpp"

namespace {

classlens::service::Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  using namespace classlens;

  CLI::App app{"Classroom session analytics: teacher tracking, speech features and summaries"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // analyze
  AnalyzeOptions analyze;
  std::string analyze_dir, analyze_out, config_file, dump_tracking;
  auto* a = app.add_subcommand("analyze", "Analyze a session directory");
  a->add_option("session_dir", analyze_dir, "Directory holding session.json")->required();
  a->add_option("--out", analyze_out, "Output directory (default: the session directory)");
  a->add_option("--config", config_file, "JSON config file (partial overrides allowed)");
  a->add_option("--set", analyze.assignments, "Override one config field, e.g. tracking.max_cost=0.6");
  a->add_option("--dump-tracking", dump_tracking, "Write the per-frame association log (JSONL)");

  // synth
  std::string scenario, synth_out;
  std::uint64_t seed = synth::kDefaultSeed;
  double duration = 0.0;
  auto* s = app.add_subcommand("synth", "Write a synthetic session with ground truth");
  s->add_option("scenario", scenario, "stationary | crossing | exit_reentry | lecture_audio")->required();
  s->add_option("--out", synth_out, "Output directory")->required();
  s->add_option("--seed", seed, "Random seed");
  s->add_option("--duration", duration, "Session length in seconds (scenario default when omitted)");

  // validate
  std::string validate_dir;
  auto* v = app.add_subcommand("validate", "Lint a session directory");
  v->add_option("session_dir", validate_dir, "Directory holding session.json")->required();

  // serve
  service::ServiceOptions serve;
  std::string data_dir = "data", static_dir;
  auto* sv = app.add_subcommand("serve", "Serve analyzed sessions over HTTP");
  sv->add_option("--data", data_dir, "Directory of session directories")->envname("CI_DATA");
  sv->add_option("--port", serve.port, "Port (0 picks a free one)")->envname("CI_PORT");
  sv->add_option("--static", static_dir, "Dashboard assets served from /")->envname("CI_STATIC");
  sv->add_option("--host", serve.host, "Bind address")->envname("CI_HOST");

  // print-config
  std::string print_dir;
  auto* pc = app.add_subcommand("print-config", "Print the effective analysis config");
  pc->add_option("session_dir", print_dir, "Apply this session's manifest overrides");
  pc->add_option("--config", config_file, "JSON config file");
  pc->add_option("--set", analyze.assignments, "Override one config field");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (*a) {
    analyze.session_dir = analyze_dir;
    if (!analyze_out.empty()) analyze.out_dir = analyze_out;
    if (!config_file.empty()) analyze.config_file = config_file;
    if (!dump_tracking.empty()) analyze.dump_tracking = dump_tracking;
    return run_analyze(analyze);
  }

  if (*s) {
    if (!synth::is_scenario(scenario)) {
      std::cerr << "error: unknown scenario '" << scenario
                << "' (expected stationary, crossing, exit_reentry or lecture_audio)\n";
      return kExitUsage;
    }
    return with_exit_codes(std::cerr, [&] {
      auto session = synth::make_session(scenario, seed, duration > 0.0 ? std::optional(duration) : std::nullopt);
      synth::write_session(std::move(session), synth_out);
      std::cout << "wrote " << scenario << " (seed " << seed << ") to " << synth_out << "\n";
      return static_cast<int>(kExitOk);
    });
  }

  if (*v) return run_validate(validate_dir);

  if (*pc) {
    return with_exit_codes(std::cerr, [&] {
      AnalyzeOptions opt = analyze;
      if (!config_file.empty()) opt.config_file = config_file;
      SessionManifest m;
      if (!print_dir.empty()) m = load_manifest(print_dir);
      std::cout << config_to_json(effective_config(m, opt)).dump(2) << "\n";
      return static_cast<int>(kExitOk);
    });
  }

  if (*sv) {
    serve.data_dir = data_dir;
    if (!static_dir.empty()) serve.static_dir = static_dir;
    service::Service svc(serve);
    const int port = svc.bind();
    if (port < 0) {
      std::cerr << "error: cannot bind " << serve.host << ":" << serve.port << "\n";
      return kExitPipeline;
    }
    g_service = &svc;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "serving " << svc.snapshot()->sessions.size() << " session(s) from " << data_dir << " on http://"
              << serve.host << ":" << port << std::endl;
    svc.listen_after_bind();
    return kExitOk;
  }
  return kExitUsage;
}
