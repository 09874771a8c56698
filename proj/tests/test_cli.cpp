#include <fstream>
#include <sstream>

#include "cogstat/cli.hpp"
#include "cogstat/distfit.hpp"
#include "cogstat/io.hpp"
#include "cogstat/spectrum.hpp"
#include "cogstat/text_ingest.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cogstat;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "cogstat");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

fs::path write(const fs::path& p, const std::string& content) {
  std::ofstream(p) << content;
  return p;
}

std::string story() { return testing::fixture("pooh_story.txt").string(); }

}  // namespace

TEST_CASE("analyze at fixed d") {
  const auto dir = testing::scratch_dir("cli_analyze");
  const auto r = invoke({"analyze", story(), "--d", "0.8", "--out", dir.string()});
  REQUIRE(r.code == cli::kExitOk);
  for (const char* f : {"table.csv", "fit_report.json", "spectrum.json", "figure1_occupancy.csv",
                        "figure1_occupancy_loglog.csv", "figure2_radiated.csv", "figure2_radiated_loglog.csv",
                        "run_manifest.json"}) {
    CHECK(fs::exists(dir / f));
  }
  const auto lines = io::split_lines(slurp(dir / "table.csv"));
  std::string totals;
  for (const auto& l : lines) {
    if (l.rfind("TOTAL,", 0) == 0) totals = l;
  }
  const auto f = io::csv_split(totals);
  REQUIRE(f.size() == 9);
  CHECK(std::stod(f[3]) == 2861.0);
  CHECK(std::abs(std::stod(f[6]) - 145694.86) <= 0.02 * 145694.86);
  CHECK(std::stod(f[4]) == doctest::Approx(2861.0).epsilon(1e-5));

  const auto report = nlohmann::json::parse(slurp(dir / "fit_report.json"));
  CHECK(report["winner"] == "BE");
  CHECK(report["d_used"] == 0.8);

  // the emitted table re-parses to the in-memory model
  const auto model = build_energy_model(build_spectrum(tokenize(read_text_file(story()))), 0.8);
  CHECK(parse_spectrum_csv(slurp(dir / "table.csv"), 0.8) == model);

  const auto manifest = nlohmann::json::parse(slurp(dir / "run_manifest.json"));
  CHECK(manifest["command"] == "analyze");
  CHECK(manifest["parameters"]["d"] == 0.8);
  CHECK(manifest["tool_version"] == COGSTAT_VERSION);
}

TEST_CASE("analyze is reproducible") {
  const auto a = testing::scratch_dir("cli_repro_a");
  const auto b = testing::scratch_dir("cli_repro_b");
  REQUIRE(invoke({"analyze", story(), "--out", a.string()}).code == 0);
  REQUIRE(invoke({"analyze", story(), "--out", b.string()}).code == 0);
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
    ++compared;
  }
  CHECK(compared == 8);
  const auto manifest = nlohmann::json::parse(slurp(a / "run_manifest.json"));
  CHECK(manifest["parameters"]["d_grid"] == "0.5:1.5:0.05");
  const auto report = nlohmann::json::parse(slurp(a / "fit_report.json"));
  CHECK(report["grid"].size() == 21);
}

TEST_CASE("analyze errors map to exit codes") {
  const auto dir = testing::scratch_dir("cli_errors");
  CHECK(invoke({"analyze", write(dir / "empty.txt", "").string(), "--out", dir.string()}).code == cli::kExitInput);
  CHECK(invoke({"analyze", (dir / "missing.txt").string()}).code == cli::kExitInput);
  const auto one = write(dir / "one.txt", "bee bee bee").string();
  CHECK(invoke({"analyze", one, "--d", "1", "--out", dir.string()}).code == cli::kExitConvergence);
  const auto flat = write(dir / "flat.txt", "ant bee").string();
  CHECK(invoke({"analyze", flat, "--out", dir.string()}).code == cli::kExitConvergence);
  CHECK(invoke({"analyze", story(), "--d", "0.8", "--d-grid", "0.5:1:0.1"}).code == cli::kExitInput);
  CHECK(invoke({"analyze", story(), "--d-grid", "1:0.5:0.1", "--out", dir.string()}).code == cli::kExitInput);
  CHECK(invoke({}).code == cli::kExitInput);
  CHECK(invoke({"frobnicate"}).code == cli::kExitInput);
  CHECK(invoke({"--help"}).code == cli::kExitOk);
}

TEST_CASE("figures refits a spectrum CSV") {
  const auto dir = testing::scratch_dir("cli_figures");
  REQUIRE(invoke({"analyze", story(), "--d", "0.8", "--out", dir.string()}).code == 0);
  const auto out = dir / "figs";
  const auto r = invoke({"figures", (dir / "table.csv").string(), "--d", "0.8", "--out", out.string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(out / "figure1_occupancy.csv") == slurp(dir / "figure1_occupancy.csv"));
  CHECK(slurp(out / "table.csv") == slurp(dir / "table.csv"));
  CHECK(invoke({"figures", (dir / "table.csv").string(), "--d", "0.9", "--out", out.string()}).code ==
        cli::kExitInput);
}

TEST_CASE("chsh subcommand") {
  const auto dir = testing::scratch_dir("cli_chsh");
  auto r = invoke({"chsh", testing::fixture("table1.json").string(), "--out", dir.string()});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(std::abs(j["chsh"].get<double>() - 2.4197) <= 0.01);
  CHECK(j["classification"] == "quantum_violation");
  CHECK(nlohmann::json::parse(slurp(dir / "chsh_result.json")) == j);

  r = invoke({"chsh", testing::fixture("table2.json").string()});
  CHECK(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["chsh"] == 4.0);

  CHECK(invoke({"chsh", write(dir / "bad.json", "{\"AB\": [").string()}).code == cli::kExitInput);
  r = invoke({"chsh", write(dir / "partial.json", R"({"AB":{"p11":1,"p22":0,"p12":0}})").string()});
  CHECK(r.code == cli::kExitInput);
  CHECK(r.err.find("/AB/p21") != std::string::npos);
}

TEST_CASE("protocol with mocks") {
  const auto dir = testing::scratch_dir("cli_protocol");
  const auto r = invoke({"protocol", "--mock", testing::fixture("mock_replay_subject.json").string(), "--mock",
                      testing::fixture("mock_second_subject.json").string(), "--out", dir.string()});
  REQUIRE(r.code == 0);
  const auto result = nlohmann::json::parse(slurp(dir / "chsh_result.json"));
  CHECK(result["chsh"] == 4.0);
  const auto table = nlohmann::json::parse(slurp(dir / "coincidence_table.json"));
  CHECK(table["AB"]["p12"] == 0.5);
  CHECK(io::split_lines(slurp(dir / "transcripts.jsonl")).size() == 8);

  // rerunning resumes every record and rewrites identical results
  const auto before = slurp(dir / "coincidence_table.json");
  const auto again = invoke({"protocol", "--mock", testing::fixture("mock_replay_subject.json").string(), "--mock",
                          testing::fixture("mock_second_subject.json").string(), "--out", dir.string()});
  CHECK(again.code == 0);
  CHECK(again.out.find("4 resumed") != std::string::npos);
  CHECK(slurp(dir / "coincidence_table.json") == before);
}

TEST_CASE("protocol configuration errors") {
  const auto dir = testing::scratch_dir("cli_protocol_errors");
  CHECK(invoke({"protocol", "--mock", testing::fixture("mock_replay_subject.json").string(), "--trials", "0", "--out",
             dir.string()})
            .code == cli::kExitInput);
  CHECK(invoke({"protocol", "--out", dir.string()}).code == cli::kExitInput);
  CHECK(invoke({"protocol", "--mock", testing::fixture("mock_replay_subject.json").string(), "--mock",
             testing::fixture("mock_replay_subject.json").string(), "--out", dir.string()})
            .code == cli::kExitInput);
}

TEST_CASE("protocol transport failure keeps partial results") {
  const auto dir = testing::scratch_dir("cli_protocol_down");
  const auto cfg = write(dir / "config.json",
                         R"({"endpoint":"http://127.0.0.1:9/v1/chat/completions","model":"offline",)"
                         R"("retry_limit":0,"timeout_seconds":0.5})");
  const auto r = invoke({"protocol", "--config", cfg.string(), "--out", (dir / "out").string()});
  CHECK(r.code == cli::kExitTransport);
  CHECK(io::split_lines(slurp(dir / "out" / "transcripts.jsonl")).size() == 4);
  CHECK(fs::exists(dir / "out" / "run_manifest.json"));
}
