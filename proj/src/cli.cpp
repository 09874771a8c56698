#include "cogstat/cli.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "cogstat/chsh.hpp"
#include "cogstat/distfit.hpp"
#include "cogstat/errors.hpp"
#include "cogstat/io.hpp"
#include "cogstat/llm_protocol.hpp"
#include "cogstat/spectrum.hpp"
#include "cogstat/text_ingest.hpp"

namespace cogstat::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const ConvergenceError*>(&e) != nullptr) return kExitConvergence;
  if (dynamic_cast<const TransportError*>(&e) != nullptr) return kExitTransport;
  return kExitInput;
}

namespace {

constexpr const char* kManifestName = "run_manifest.json";

struct Manifest {
  std::string command;
  json inputs = json::array();
  json parameters = json::object();
  json outputs = json::array();
};

class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, std::string_view content, Manifest& manifest) {
    io::write_file_atomic(dir_ / name, content);
    manifest.outputs.push_back(name);
  }

  void write_manifest(Manifest& manifest) {
    json j{{"command", manifest.command},
           {"tool_version", COGSTAT_VERSION},
           {"inputs", manifest.inputs},
           {"parameters", manifest.parameters},
           {"outputs", manifest.outputs}};
    io::write_file_atomic(dir_ / kManifestName, j.dump(2) + "\n");
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

 private:
  fs::path dir_;
};

json fit_options_json(const FitOptions& opts) {
  return {{"rel_tol", opts.rel_tol},
          {"max_outer_iterations", opts.max_outer_iterations},
          {"be_solver", opts.be_solver == BeSolver::NestedMonotone ? "nested_monotone" : "damped_newton"}};
}

json read_json_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string(), std::string("invalid JSON: ") + e.what());
  }
}

void write_fit_outputs(OutputDir& out, const EnergyModel& model, const FitReport& report, Manifest& manifest) {
  out.write("table.csv", fit_table_csv(model, report), manifest);
  out.write("fit_report.json", to_json(report).dump(2) + "\n", manifest);
  out.write("figure1_occupancy.csv", occupancy_figure_csv(model, report, false), manifest);
  out.write("figure1_occupancy_loglog.csv", occupancy_figure_csv(model, report, true), manifest);
  out.write("figure2_radiated.csv", radiated_figure_csv(model, report, false), manifest);
  out.write("figure2_radiated_loglog.csv", radiated_figure_csv(model, report, true), manifest);
}

struct AnalyzeArgs {
  std::string text;
  std::optional<double> d;
  std::string d_grid;
  std::string out_dir = ".";
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  const auto spectrum = build_spectrum(tokenize(read_text_file(a.text)));
  const FitOptions opts;
  Manifest manifest{"analyze"};
  manifest.inputs.push_back(a.text);
  manifest.parameters["fit"] = fit_options_json(opts);

  FitReport report;
  if (a.d) {
    manifest.parameters["d"] = *a.d;
    report = fit_report(build_energy_model(spectrum, *a.d), opts);
  } else {
    const std::string grid_spec = a.d_grid.empty() ? "0.5:1.5:0.05" : a.d_grid;
    manifest.parameters["d_grid"] = grid_spec;
    report = search_d(spectrum, parse_d_grid(grid_spec), opts);
  }
  const auto model = build_energy_model(spectrum, report.d_used);

  OutputDir dir(a.out_dir);
  dir.write("spectrum.json", to_json(spectrum).dump(2) + "\n", manifest);
  write_fit_outputs(dir, model, report, manifest);
  dir.write_manifest(manifest);

  out << "words " << spectrum.total_words() << ", distinct " << spectrum.distinct_words() << ", d "
      << report.d_used << ", E " << io::format_sig6(model.total_energy()) << "\n"
      << "BE A=" << io::format_sig6(report.be.p1) << " B=" << io::format_sig6(report.be.p2)
      << " rmse_log=" << io::format_sig6(report.be.rmse_log_counts) << "\n";
  if (report.mb) {
    out << "MB C=" << io::format_sig6(report.mb->p1) << " D=" << io::format_sig6(report.mb->p2)
        << " rmse_log=" << io::format_sig6(report.mb->rmse_log_counts) << "\n";
  } else {
    out << "MB fit failed\n";
  }
  out << "winner " << to_string(report.winner) << "\n";
  return kExitOk;
}

struct FiguresArgs {
  std::string csv;
  double d = 0.8;
  std::string out_dir = ".";
};

int cmd_figures(const FiguresArgs& a, std::ostream& out) {
  const auto model = parse_spectrum_csv(read_text_file(a.csv), a.d);
  const FitOptions opts;
  const auto report = fit_report(model, opts);
  Manifest manifest{"figures"};
  manifest.inputs.push_back(a.csv);
  manifest.parameters["d"] = a.d;
  manifest.parameters["fit"] = fit_options_json(opts);
  OutputDir dir(a.out_dir);
  write_fit_outputs(dir, model, report, manifest);
  dir.write_manifest(manifest);
  out << "levels " << model.size() << ", winner " << to_string(report.winner) << "\n";
  return kExitOk;
}

struct ChshArgs {
  std::string table;
  std::string out_dir;
};

int cmd_chsh(const ChshArgs& a, std::ostream& out) {
  const auto table = table_from_json(read_json_file(a.table));
  const auto result = chsh_term(table);
  const std::string text = to_json(result).dump(2) + "\n";
  out << text;
  if (!a.out_dir.empty()) {
    Manifest manifest{"chsh"};
    manifest.inputs.push_back(a.table);
    OutputDir dir(a.out_dir);
    dir.write("chsh_result.json", text, manifest);
    dir.write_manifest(manifest);
  }
  return kExitOk;
}

struct ProtocolArgs {
  std::string config;
  std::vector<std::string> mocks;
  std::optional<int> trials;
  std::string out_dir = ".";
};

struct Subject {
  protocol::SessionConfig config;
  std::unique_ptr<protocol::Transport> transport;
};

std::vector<Subject> make_subjects(const ProtocolArgs& a, Manifest& manifest) {
  std::vector<protocol::SessionConfig> configs;
  if (!a.config.empty()) {
    configs = protocol::configs_from_json(read_json_file(a.config));
    manifest.inputs.push_back(a.config);
  }
  std::vector<Subject> subjects;
  if (a.mocks.empty()) {
    if (configs.empty()) throw ConfigError("protocol needs --config or at least one --mock");
    for (auto& c : configs) {
      auto transport = std::make_unique<protocol::HttpTransport>(c.endpoint, c.auth_env);
      subjects.push_back({std::move(c), std::move(transport)});
    }
  } else {
    const protocol::SessionConfig base = configs.empty() ? protocol::SessionConfig{} : configs.front();
    std::set<std::string> names;
    for (const auto& path : a.mocks) {
      auto mock = std::make_unique<protocol::MockTransport>(protocol::MockTransport::from_file(path));
      if (!names.insert(mock->model()).second) throw ConfigError("two mock fixtures share model " + mock->model());
      protocol::SessionConfig c = base;
      c.model = mock->model();
      manifest.inputs.push_back(path);
      subjects.push_back({std::move(c), std::move(mock)});
    }
  }
  for (auto& s : subjects) {
    if (a.trials) s.config.trials = *a.trials;
    s.config.validate();
  }
  return subjects;
}

json config_json(const protocol::SessionConfig& c) {
  return {{"model", c.model},
          {"trials", c.trials},
          {"retry_limit", c.retry_limit},
          {"timeout_seconds", c.timeout_seconds},
          {"temperature", c.temperature ? json(*c.temperature) : json(nullptr)},
          {"mode", c.mode == protocol::ConversationMode::Independent ? "independent" : "single_conversation"},
          {"follow_up", c.follow_up}};
}

int cmd_protocol(const ProtocolArgs& a, std::ostream& out, std::ostream& err) {
  Manifest manifest{"protocol"};
  auto subjects = make_subjects(a, manifest);
  manifest.parameters["subjects"] = json::array();
  for (const auto& s : subjects) manifest.parameters["subjects"].push_back(config_json(s.config));

  OutputDir dir(a.out_dir);
  fs::create_directories(a.out_dir);
  const std::string transcript_name = "transcripts.jsonl";
  protocol::SessionHooks hooks;
  hooks.transcript_path = dir.path(transcript_name);

  const auto measurements = protocol::default_measurements();
  std::vector<protocol::TranscriptRecord> all;
  int transport_errors = 0;
  for (auto& s : subjects) {
    auto result = protocol::run_session(s.config, measurements, *s.transport, hooks);
    transport_errors += result.transport_errors;
    int parsed = 0;
    for (const auto& r : result.records) parsed += r.parsed() ? 1 : 0;
    out << s.config.model << ": " << result.records.size() << " records, " << parsed << " parsed, "
        << result.resumed << " resumed, " << result.transport_errors << " transport errors\n";
    all.insert(all.end(), result.records.begin(), result.records.end());
  }
  manifest.outputs.push_back(transcript_name);

  json per_subject = json::object();
  std::vector<CoincidenceTable> tables;
  for (const auto& s : subjects) {
    std::vector<protocol::TranscriptRecord> mine;
    for (const auto& r : all) {
      if (r.model == s.config.model) mine.push_back(r);
    }
    try {
      tables.push_back(protocol::aggregate(mine));
      per_subject[s.config.model] = to_json(tables.back());
    } catch (const InsufficientData& e) {
      if (transport_errors == 0) throw;
      err << "skipping " << s.config.model << ": " << e.what() << "\n";
    }
  }
  if (!tables.empty()) {
    const auto table = protocol::average_tables(tables);
    const auto result = chsh_term(table);
    dir.write("subject_tables.json", per_subject.dump(2) + "\n", manifest);
    dir.write("coincidence_table.json", to_json(table).dump(2) + "\n", manifest);
    dir.write("chsh_result.json", to_json(result).dump(2) + "\n", manifest);
    out << "chsh " << io::format_sig6(result.chsh) << " (" << to_string(result.classification) << ")\n";
  }
  dir.write_manifest(manifest);
  if (transport_errors > 0) {
    err << transport_errors << " request(s) failed after retries; rerun to resume\n";
    return kExitTransport;
  }
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Word-frequency spectra, BE/MB fits and CHSH analysis of concept combinations", "cogstat"};
  app.set_version_flag("--version", COGSTAT_VERSION);
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Spectrum and BE/MB fits of a text file");
  analyze_cmd->add_option("text", analyze.text, "UTF-8 text file")->required();
  auto* d_opt = analyze_cmd->add_option("--d", analyze.d, "Energy exponent (skips the grid search)");
  analyze_cmd->add_option("--d-grid", analyze.d_grid, "MIN:MAX:STEP grid for the exponent search")
      ->excludes(d_opt);
  analyze_cmd->add_option("--out", analyze.out_dir, "Output directory");

  FiguresArgs figures;
  auto* figures_cmd = app.add_subcommand("figures", "Refit a spectrum CSV and emit figure datasets");
  figures_cmd->add_option("csv", figures.csv, "Spectrum or table CSV")->required();
  figures_cmd->add_option("--d", figures.d, "Energy exponent")->capture_default_str();
  figures_cmd->add_option("--out", figures.out_dir, "Output directory");

  ChshArgs chsh;
  auto* chsh_cmd = app.add_subcommand("chsh", "CHSH value of a coincidence table");
  chsh_cmd->add_option("table", chsh.table, "Coincidence table JSON")->required();
  chsh_cmd->add_option("--out", chsh.out_dir, "Also write chsh_result.json here");

  ProtocolArgs proto;
  auto* proto_cmd = app.add_subcommand("protocol", "Run the concept-combination protocol on LLM subjects");
  proto_cmd->add_option("--config", proto.config, "Session config JSON");
  proto_cmd->add_option("--mock", proto.mocks, "Mock fixture; one subject per fixture");
  proto_cmd->add_option("--trials", proto.trials, "Override the trial count");
  proto_cmd->add_option("--out", proto.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*analyze_cmd) return cmd_analyze(analyze, out);
    if (*figures_cmd) return cmd_figures(figures, out);
    if (*chsh_cmd) return cmd_chsh(chsh, out);
    if (*proto_cmd) return cmd_protocol(proto, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitInput;
}

}  // namespace cogstat::cli
