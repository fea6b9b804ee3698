// fidelity: detect and correct decompilation distortions in pseudo-C
// functions. Subcommands: detect, correct, evaluate, db-stats, report.

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>

#include "fidelity/corpus.hpp"
#include "fidelity/depgraph.hpp"
#include "fidelity/errors.hpp"
#include "fidelity/evaluation.hpp"
#include "fidelity/gateway.hpp"
#include "fidelity/intensity.hpp"
#include "fidelity/pipeline.hpp"
#include "fidelity/prompt.hpp"
#include "fidelity/store.hpp"

#include <CLI11.hpp>
#include <json.hpp>

namespace {

using namespace fidelity;

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

bool color_enabled() {
  return std::getenv("NO_COLOR") == nullptr && isatty(fileno(stdout));
}

std::string paint(const std::string& text, const char* code) {
  if (!color_enabled()) return text;
  return std::string("\033[") + code + "m" + text + "\033[0m";
}

struct CommonFlags {
  std::string config_path;
  std::string mock = "off";  // off | oracle | script:<path>
  std::string retrieval_mode = "intensity";
  std::string baseline = "none";
  std::string templates_dir;
  std::string extra_types_file;
  int chunk_threshold = -1;
  int retrieval_k = -1;
  std::uint64_t seed = 0;
  int jobs = 0;
  bool lenient = false;
  bool print_config = false;
  bool dry_run = false;
  std::string dump_graphs_dir;
  std::string input_dir_override;
  std::string output_dir_override;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "config.ini path");
  cmd->add_option("--mock", flags.mock,
                  "LLM provider: off, oracle, or script:<rules.json>");
  cmd->add_option("--retrieval-mode", flags.retrieval_mode, "intensity | random | all")
      ->check(CLI::IsMember({"intensity", "random", "all"}));
  cmd->add_option("--baseline", flags.baseline, "none | zero | def | eg")
      ->check(CLI::IsMember({"none", "zero", "def", "eg"}));
  cmd->add_option("--templates", flags.templates_dir, "prompt template directory");
  cmd->add_option("--extra-types", flags.extra_types_file,
                  "file with additional type keywords, one per line");
  cmd->add_option("--chunk-threshold", flags.chunk_threshold, "chunking threshold (lines)");
  cmd->add_option("--retrieval-k", flags.retrieval_k, "records retrieved per query line");
  cmd->add_option("--seed", flags.seed, "seed for --retrieval-mode random");
  cmd->add_option("--jobs", flags.jobs, "parallel function workers (0 = cpu count)");
  cmd->add_flag("--lenient", flags.lenient, "tolerate misaligned model output");
  cmd->add_flag("--strict", [](std::int64_t) {}, "strict output alignment (default)");
  cmd->add_flag("--print-config", flags.print_config, "print the effective config");
  cmd->add_flag("--dry-run", flags.dry_run, "stop before any LLM or file work");
  cmd->add_option("--input", flags.input_dir_override, "input directory override");
  cmd->add_option("--output", flags.output_dir_override, "output directory override");
  cmd->add_option("--dump-graphs", flags.dump_graphs_dir,
                  "write CFG/PDG DOT files for each function into this directory");
}

// flags beat config.ini, config.ini beats built-in defaults
PipelineConfig effective_config(const CommonFlags& flags) {
  PipelineConfig cfg;
  if (!flags.config_path.empty()) cfg = load_config(flags.config_path);
  if (flags.chunk_threshold > 0) cfg.chunk_threshold = flags.chunk_threshold;
  if (flags.retrieval_k > 0) cfg.retrieval_k = flags.retrieval_k;
  if (!flags.templates_dir.empty()) cfg.templates_dir = flags.templates_dir;
  if (!flags.input_dir_override.empty()) cfg.input_dir = flags.input_dir_override;
  if (!flags.output_dir_override.empty()) cfg.output_dir = flags.output_dir_override;
  if (const char* key = std::getenv("FIDELITY_API_KEY")) cfg.api_key = key;
  if (cfg.chunk_overlap >= cfg.chunk_threshold)
    throw InvalidParams("chunk overlap must stay below the chunk threshold");
  return cfg;
}

std::string config_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  j["model"] = cfg.model_id;
  j["temperature"] = cfg.temperature;
  j["api_base"] = cfg.api_base;
  j["embedding_model"] = cfg.embedding_model;
  j["input_dir"] = cfg.input_dir;
  j["output_dir"] = cfg.output_dir;
  j["knowledge_base"] = cfg.knowledge_base;
  j["chunk_threshold"] = cfg.chunk_threshold;
  j["chunk_overlap"] = cfg.chunk_overlap;
  j["retrieval_k"] = cfg.retrieval_k;
  j["intensity"] = {{"min_lines", cfg.intensity.min_lines},
                    {"base_lines", cfg.intensity.base_lines},
                    {"max_lines", cfg.intensity.max_lines},
                    {"threshold", cfg.intensity.threshold},
                    {"step", cfg.intensity.step}};
  return j.dump(2);
}

std::shared_ptr<ChatProvider> make_provider(const CommonFlags& flags,
                                            const PipelineConfig& cfg) {
  if (flags.mock == "off")
    return std::make_shared<HttpChatProvider>(cfg.api_base, cfg.api_key);
  if (flags.mock == "oracle") return MockProvider::oracle();
  if (flags.mock.rfind("script:", 0) == 0)
    return MockProvider::from_script_file(flags.mock.substr(7));
  throw InvalidParams("unknown --mock value: " + flags.mock);
}

std::optional<BaselineKind> baseline_kind(const std::string& name) {
  if (name == "none") return std::nullopt;
  if (name == "zero") return BaselineKind::ZeroShot;
  if (name == "def") return BaselineKind::WithDefinitions;
  if (name == "eg") return BaselineKind::WithExamples;
  throw InvalidParams("unknown baseline: " + name);
}

RetrievalMode retrieval_mode(const std::string& name) {
  if (name == "random") return RetrievalMode::Random;
  if (name == "all") return RetrievalMode::All;
  return RetrievalMode::Intensity;
}

struct Runtime {
  PipelineConfig config;
  PromptLibrary prompts;
  std::unique_ptr<LlmGateway> gateway;
  std::optional<DistortionIndex> index;
  FeatureWeights weights;
  PipelineServices services;
};

std::unique_ptr<Runtime> make_runtime(const CommonFlags& flags, bool need_index) {
  auto rt = std::make_unique<Runtime>();
  rt->config = effective_config(flags);
  rt->prompts = rt->config.templates_dir.empty()
                    ? PromptLibrary::load_default()
                    : PromptLibrary::load(rt->config.templates_dir);
  rt->gateway = std::make_unique<LlmGateway>(make_provider(flags, rt->config));

  if (need_index && !rt->config.knowledge_base.empty() &&
      std::filesystem::exists(rt->config.knowledge_base)) {
    std::vector<DistortionRecord> records = load_database(rt->config.knowledge_base);
    rt->weights = derive_feature_weights(records);
    std::shared_ptr<const Embedder> embedder;
    if (flags.mock == "off")
      embedder = std::make_shared<HttpEmbedder>(rt->config.api_base, rt->config.api_key,
                                                rt->config.embedding_model);
    else
      embedder = std::make_shared<HashEmbedder>();
    rt->index = build_index(std::move(records), std::move(embedder));
  } else if (need_index) {
    std::cerr << "note: no distortion database loaded; detection degrades to the "
                 "definitions-only prompt\n";
  }

  rt->services.index = rt->index ? &*rt->index : nullptr;
  rt->services.weights = rt->weights;
  rt->services.gateway = rt->gateway.get();
  rt->services.prompts = &rt->prompts;
  rt->services.config = rt->config;
  rt->services.options.retrieval_mode = retrieval_mode(flags.retrieval_mode);
  rt->services.options.baseline = baseline_kind(flags.baseline);
  rt->services.options.seed = flags.seed;
  rt->services.options.strict = !flags.lenient;
  return rt;
}

void dump_graphs(const PipelineConfig& cfg, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& entry : std::filesystem::directory_iterator(cfg.input_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    int fn_no = 0;
    for (const std::string& text : split_functions(read_text_file(entry.path()))) {
      DecompiledFunction fn = parse_function(text);
      Cfg cfg_graph = build_cfg(fn);
      DependenceGraph graph = build_dependence_graph(fn, cfg_graph);
      std::string stem =
          entry.path().stem().string() + "_f" + std::to_string(fn_no);
      write_text_file(std::filesystem::path(dir) / (stem + "_cfg.dot"),
                      cfg_to_dot(cfg_graph, fn));
      write_text_file(std::filesystem::path(dir) / (stem + "_pdg.dot"),
                      pdg_to_dot(graph, fn));
      ++fn_no;
    }
  }
}

int cmd_detect(const CommonFlags& flags, bool with_correction) {
  if (flags.baseline == "zero" && !with_correction) {
    std::cerr << "error: --baseline zero produces no detection labels; "
                 "use it with `correct`\n";
    return kExitConfig;
  }
  auto rt = make_runtime(flags, true);
  if (flags.print_config) std::cout << config_json(rt->config) << "\n";
  if (!flags.dump_graphs_dir.empty()) dump_graphs(rt->config, flags.dump_graphs_dir);
  if (flags.dry_run) return kExitOk;

  BatchOptions batch;
  batch.jobs = flags.jobs;
  batch.with_correction = with_correction;
  BatchReport report = run_batch(rt->services, batch);

  std::cout << "files: " << report.files << "  functions: " << report.functions
            << "  ok: " << report.succeeded << "  failed: " << report.failures.size()
            << "\n";
  std::cout << "llm calls: " << report.redundancy_calls << " redundancy, "
            << report.detection_calls << " detection, " << report.correction_calls
            << " correction\n";
  std::cout << "tokens: " << report.tokens.prompt_tokens << " prompt + "
            << report.tokens.completion_tokens << " completion\n";
  for (const FunctionFailure& f : report.failures)
    std::cerr << paint("fail", "31") << " " << f.file << "#" << f.function_index << ": "
              << f.error << "\n";
  return report.failures.empty() ? kExitOk : kExitPartial;
}

int cmd_correct(const CommonFlags& flags, const std::string& labeled_dir) {
  auto rt = make_runtime(flags, false);
  if (flags.print_config) std::cout << config_json(rt->config) << "\n";
  if (flags.dry_run) return kExitOk;

  std::string dir = labeled_dir.empty() ? rt->config.output_dir : labeled_dir;
  BatchOptions batch;
  batch.jobs = flags.jobs;
  BatchReport report = run_correction_batch(rt->services, dir, batch);

  std::cout << "files: " << report.files << "  functions: " << report.functions
            << "  ok: " << report.succeeded << "  failed: " << report.failures.size()
            << "\n";
  std::cout << "correction calls: " << report.correction_calls << "\n";
  std::cout << "flagged: " << report.flagged_lines << " (" << report.flagged_i4
            << " I4)  fixed-marked: " << report.fixed_marked << "\n";
  if (auto fr = report.fix_rate())
    std::cout << "FR: " << *fr << "  (CFR needs the manual worksheet)\n";
  for (const FunctionFailure& f : report.failures)
    std::cerr << paint("fail", "31") << " " << f.file << "#" << f.function_index << ": "
              << f.error << "\n";
  return report.failures.empty() ? kExitOk : kExitPartial;
}

int cmd_evaluate(const std::string& model_file, const std::string& truth_file,
                 const std::string& json_out) {
  std::vector<LinePair> pairs =
      align(read_text_file(model_file), read_text_file(truth_file));
  EvalReport report = evaluate_pairs(pairs);
  std::cout << report.to_table();
  if (!json_out.empty()) write_text_file(json_out, report.to_json());
  return kExitOk;
}

int cmd_db_stats(const CommonFlags& flags, const std::string& db_path,
                 const std::string& dump_index_path) {
  std::string path = db_path;
  if (path.empty()) path = effective_config(flags).knowledge_base;
  if (path.empty()) {
    std::cerr << "error: no database path (give one or set knowledge_base)\n";
    return kExitConfig;
  }
  std::vector<DistortionRecord> records = load_database(path);
  std::cout << records.size() << " records\n";

  if (!dump_index_path.empty()) {
    DistortionIndex index = build_index(records, std::make_shared<HashEmbedder>());
    write_text_file(dump_index_path, index.dump_json());
    std::cout << "index dumped to " << dump_index_path << "\n";
  }

  std::map<DistortionType, int> histogram;
  std::map<DecompilerOrigin, int> origins;
  for (const DistortionRecord& r : records) {
    ++histogram[r.label];
    ++origins[r.origin];
  }
  for (DistortionType t : all_distortion_types())
    std::cout << "  " << to_label(t) << "  " << histogram[t] << "  (" << describe(t)
              << ")\n";
  std::cout << "origin: " << origins[DecompilerOrigin::Ida] << " ida, "
            << origins[DecompilerOrigin::Ghidra] << " ghidra\n";

  FeatureWeights weights = derive_feature_weights(records);
  std::cout << "construct weights:\n";
  for (ConstructKind k : all_construct_kinds())
    std::cout << "  " << to_string(k) << "  " << weights.of(k) << "\n";
  return kExitOk;
}

int cmd_report(const std::string& report_path) {
  BatchReport report = BatchReport::from_json(read_text_file(report_path));
  std::cout << "batch report\n";
  std::cout << "  files       " << report.files << "\n";
  std::cout << "  functions   " << report.functions << "\n";
  std::cout << "  succeeded   " << report.succeeded << "\n";
  std::cout << "  failures    " << report.failures.size() << "\n";
  std::cout << "  llm calls   " << report.redundancy_calls << " redundancy, "
            << report.detection_calls << " detection, " << report.correction_calls
            << " correction\n";
  std::cout << "  tokens      " << report.tokens.prompt_tokens << " prompt + "
            << report.tokens.completion_tokens << " completion = "
            << report.tokens.total() << "\n";
  std::cout << "  wall time   " << report.wall_seconds << " s\n";
  if (auto fr = report.fix_rate())
    std::cout << "  FR          " << *fr << "  (" << report.fixed_marked << "/"
              << (report.flagged_lines - report.flagged_i4) << ", " << report.flagged_i4
              << " I4 excluded)\n";
  for (const FunctionFailure& f : report.failures)
    std::cout << "  fail " << f.file << "#" << f.function_index << ": " << f.error << "\n";
  for (const std::string& out : report.output_files)
    std::cout << "  wrote " << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"detect and correct decompilation distortions"};
  app.require_subcommand(1);

  CommonFlags flags;

  CLI::App* detect_cmd = app.add_subcommand("detect", "annotate distorted lines");
  bool with_correction = false;
  add_common(detect_cmd, flags);
  detect_cmd->add_flag("--with-correction", with_correction,
                       "run correction right after detection");

  CLI::App* correct_cmd =
      app.add_subcommand("correct", "correct previously labeled functions");
  std::string labeled_dir;
  add_common(correct_cmd, flags);
  correct_cmd->add_option("labeled_dir", labeled_dir,
                          "directory of labeled files (default: output_dir)");

  CLI::App* evaluate_cmd =
      app.add_subcommand("evaluate", "line-level metrics against ground truth");
  std::string model_file, truth_file, json_out;
  evaluate_cmd->add_option("model", model_file, "model output file")->required();
  evaluate_cmd->add_option("truth", truth_file, "ground truth file")->required();
  evaluate_cmd->add_option("--json", json_out, "also write the report as JSON");

  CLI::App* db_cmd = app.add_subcommand("db-stats", "distortion database statistics");
  std::string db_path, dump_index_path;
  add_common(db_cmd, flags);
  db_cmd->add_option("database", db_path, "database file (default: knowledge_base)");
  db_cmd->add_option("--dump-index", dump_index_path,
                     "embed with the offline embedder and dump the index as JSON");

  CLI::App* report_cmd = app.add_subcommand("report", "render a run report");
  std::string report_path = "run_report.json";
  report_cmd->add_option("report_file", report_path, "run_report.json path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (detect_cmd->parsed()) return cmd_detect(flags, with_correction);
    if (correct_cmd->parsed()) return cmd_correct(flags, labeled_dir);
    if (evaluate_cmd->parsed()) return cmd_evaluate(model_file, truth_file, json_out);
    if (db_cmd->parsed()) return cmd_db_stats(flags, db_path, dump_index_path);
    if (report_cmd->parsed()) return cmd_report(report_path);
  } catch (const MissingSection& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const MissingRequiredKey& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const MalformedValue& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidParams& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPartial;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPartial;
  }
  return kExitConfig;
}
