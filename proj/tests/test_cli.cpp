#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "fidelity/corpus.hpp"

#include <json.hpp>

#ifndef FIDELITY_CLI_PATH
#error "FIDELITY_CLI_PATH must point at the fidelity binary"
#endif

using namespace fidelity;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  fs::path capture =
      fs::temp_directory_path() / ("fidelity_cli_out_" + std::to_string(::getpid()));
  std::string cmd = std::string(FIDELITY_CLI_PATH) + " " + args + " > " +
                    capture.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.output = read_text_file(capture);
  fs::remove(capture);
  return result;
}

// --print-config JSON, ignoring any notes around it
nlohmann::json printed_config(const RunResult& r) {
  std::size_t open = r.output.find('{');
  std::size_t close = r.output.rfind('}');
  REQUIRE(open != std::string::npos);
  REQUIRE(close != std::string::npos);
  return nlohmann::json::parse(r.output.substr(open, close - open + 1));
}

struct CliFixture {
  fs::path root, input, output;
  fs::path config, db;

  CliFixture() {
    root = fs::temp_directory_path() / ("fidelity_cli_" + std::to_string(::getpid()));
    fs::remove_all(root);
    input = root / "in";
    output = root / "out";
    fs::create_directories(input);

    db = root / "fidelity_db.c";
    write_text_file(db,
                    "*(_DWORD *)(a1 + 4) = 0; // I1\n"
                    "v5 = v4; // I4\n"
                    "while ( v3 ) // I3\n"
                    "return 0LL; // I5\n");

    config = root / "config.ini";
    write_text_file(config, std::string("[LLM]\nmodel = gpt-4o\ntemperature = 0\n") +
                                "api_key = sk-TEST\napi_base = http://127.0.0.1:1\n" +
                                "[PATHS]\ninput_dir = " + input.string() + "\n" +
                                "output_dir = " + output.string() + "\n" +
                                "knowledge_base = " + db.string() + "\n");

    write_function_file(
        std::vector<std::string>{"int v1 = a1; /*gt:I4*/\nv2 = v1 + 1;\nreturn v2;",
                                 "x = 1;\nreturn x;"},
        input / "sample.txt");
  }
  ~CliFixture() { fs::remove_all(root); }
};

}  // namespace

TEST_CASE("unknown subcommands are rejected before any work") {
  RunResult r = run_cli("frobnicate");
  CHECK(r.exit_code == 2);
}

TEST_CASE("detect with the oracle mock writes labeled output files") {
  CliFixture fx;
  // the network guard proves --mock runs never touch the wire
  RunResult r = run_cli("detect --config " + fx.config.string() +
                        " --mock oracle --jobs 2");
  CHECK(r.exit_code == 0);
  REQUIRE(fs::exists(fx.output / "sample.txt"));
  std::string out = read_text_file(fx.output / "sample.txt");
  CHECK(out.find("/*gt:I4*/ // I4") != std::string::npos);
  CHECK(fs::exists(fx.output / "run_report.json"));
}

TEST_CASE("mock runs perform zero network I/O") {
  CliFixture fx;
  ::setenv("FIDELITY_FORBID_NETWORK", "1", 1);
  RunResult r = run_cli("detect --config " + fx.config.string() + " --mock oracle");
  ::unsetenv("FIDELITY_FORBID_NETWORK");
  CHECK(r.exit_code == 0);

  // without the mock, the same guard makes the (unreachable) provider fail
  ::setenv("FIDELITY_FORBID_NETWORK", "1", 1);
  RunResult live = run_cli("detect --config " + fx.config.string());
  ::unsetenv("FIDELITY_FORBID_NETWORK");
  CHECK(live.exit_code != 0);
  CHECK(live.output.find("FIDELITY_FORBID_NETWORK") != std::string::npos);
}

TEST_CASE("evaluate prints perfect metrics for identical files") {
  CliFixture fx;
  fs::path model = fx.root / "model.txt";
  write_function_file(std::vector<std::string>{"a = 1; // I4\nreturn a;"}, model);
  RunResult r = run_cli("evaluate " + model.string() + " " + model.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("Acc: 1") != std::string::npos);
  CHECK(r.output.find("Pr:  1") != std::string::npos);
}

TEST_CASE("db-stats reports the record count and weights") {
  CliFixture fx;
  RunResult r = run_cli("db-stats " + fx.db.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("4 records") != std::string::npos);
  CHECK(r.output.find("I4") != std::string::npos);
  CHECK(r.output.find("assignment") != std::string::npos);
}

TEST_CASE("flags beat config.ini which beats built-in defaults") {
  CliFixture fx;

  // layer 1: built-in default
  RunResult builtin = run_cli("detect --mock oracle --dry-run --print-config --input " +
                              fx.input.string() + " --output " + fx.output.string());
  REQUIRE(builtin.exit_code == 0);
  CHECK(printed_config(builtin)["chunk_threshold"] == 50);

  // layer 2: config.ini overrides the default
  fs::path with_analysis = fx.root / "config_analysis.ini";
  write_text_file(with_analysis, read_text_file(fx.config) +
                                     "\n[ANALYSIS]\nchunk_threshold = 40\n");
  RunResult from_ini = run_cli("detect --config " + with_analysis.string() +
                               " --mock oracle --dry-run --print-config");
  REQUIRE(from_ini.exit_code == 0);
  CHECK(printed_config(from_ini)["chunk_threshold"] == 40);

  // layer 3: the flag beats both
  RunResult from_flag = run_cli("detect --config " + with_analysis.string() +
                                " --chunk-threshold 30 --mock oracle --dry-run" +
                                " --print-config");
  REQUIRE(from_flag.exit_code == 0);
  CHECK(printed_config(from_flag)["chunk_threshold"] == 30);
}

TEST_CASE("detect rejects the zero baseline with a usage error") {
  CliFixture fx;
  RunResult r = run_cli("detect --config " + fx.config.string() +
                        " --mock oracle --baseline zero");
  CHECK(r.exit_code == 2);
}

TEST_CASE("report renders a run report") {
  CliFixture fx;
  RunResult detect = run_cli("detect --config " + fx.config.string() + " --mock oracle");
  REQUIRE(detect.exit_code == 0);
  RunResult report = run_cli("report " + (fx.output / "run_report.json").string());
  CHECK(report.exit_code == 0);
  CHECK(report.output.find("functions") != std::string::npos);
  CHECK(report.output.find("tokens") != std::string::npos);
}

TEST_CASE("correct consumes detect output and writes corrected files") {
  CliFixture fx;
  RunResult detect = run_cli("detect --config " + fx.config.string() + " --mock oracle");
  REQUIRE(detect.exit_code == 0);
  RunResult correct = run_cli("correct --config " + fx.config.string() +
                              " --mock oracle " + fx.output.string());
  CHECK(correct.exit_code == 0);
  REQUIRE(fs::exists(fx.output / "corrected_sample.txt"));
  std::string corrected = read_text_file(fx.output / "corrected_sample.txt");
  CHECK(corrected.find("/*gt:I4*/") == std::string::npos);  // I4 line removed
  CHECK(fs::exists(fx.output / "cfr_worksheet.csv"));
}

TEST_CASE("graph dumps land in the requested directory") {
  CliFixture fx;
  fs::path dots = fx.root / "dots";
  RunResult r = run_cli("detect --config " + fx.config.string() +
                        " --mock oracle --dry-run --dump-graphs " + dots.string());
  CHECK(r.exit_code == 0);
  bool found_cfg = false, found_pdg = false;
  for (const auto& entry : fs::directory_iterator(dots)) {
    std::string name = entry.path().filename().string();
    if (name.find("_cfg.dot") != std::string::npos) found_cfg = true;
    if (name.find("_pdg.dot") != std::string::npos) found_pdg = true;
  }
  CHECK(found_cfg);
  CHECK(found_pdg);
}
