#include "fidelity/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <tuple>

#include "fidelity/depgraph.hpp"
#include "fidelity/errors.hpp"
#include "fidelity/evaluation.hpp"
#include "fidelity/intensity.hpp"

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fidelity {

namespace {

std::string rtrim_copy(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::vector<std::string> text_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    std::string line = (nl == std::string::npos) ? text.substr(start)
                                                 : text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  return lines;
}

bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t\r") == std::string::npos;
}

// Model replies may arrive wrapped in a ``` fence; unwrap it without
// touching blank lines, which may be part of the code being aligned.
std::vector<std::string> reply_lines(const std::string& reply) {
  std::vector<std::string> lines = text_lines(reply);
  std::size_t fb = 0, lb = lines.size();
  while (fb < lines.size() && is_blank(lines[fb])) ++fb;
  while (lb > fb && is_blank(lines[lb - 1])) --lb;
  if (lb - fb >= 2 && lines[fb].rfind("```", 0) == 0 &&
      lines[lb - 1].rfind("```", 0) == 0)
    return {lines.begin() + fb + 1, lines.begin() + lb - 1};
  return lines;
}

std::vector<std::string> trim_blank_edges(std::vector<std::string> lines) {
  std::size_t b = 0, e = lines.size();
  while (b < e && is_blank(lines[b])) ++b;
  while (e > b && is_blank(lines[e - 1])) --e;
  return {lines.begin() + b, lines.begin() + e};
}

std::string chunk_text(const Chunk& chunk) {
  std::string out;
  for (std::size_t i = 0; i < chunk.lines.size(); ++i) {
    if (i) out += '\n';
    out += chunk.lines[i].text;
  }
  return out;
}

}  // namespace

std::map<int, std::set<DistortionType>> parse_detection_output(
    const std::string& model_text, std::span<const SourceLine> input_lines, bool strict) {
  std::vector<std::string> lines = reply_lines(model_text);
  if (lines.size() != input_lines.size()) {
    std::vector<std::string> trimmed = trim_blank_edges(lines);
    if (trimmed.size() == input_lines.size()) {
      lines = std::move(trimmed);
    } else if (strict) {
      throw LineCountMismatch(static_cast<int>(input_lines.size()),
                              static_cast<int>(lines.size()));
    }
  }

  std::map<int, std::set<DistortionType>> labels;
  const std::size_t n = std::min(lines.size(), input_lines.size());
  for (std::size_t i = 0; i < n; ++i) {
    TrailingLabels parsed = split_trailing_labels(lines[i]);  // throws UnknownLabel
    if (strict && rtrim_copy(parsed.stripped) != rtrim_copy(input_lines[i].text))
      throw OutputParseError("line " + std::to_string(input_lines[i].index) +
                             " was altered by the model: \"" + parsed.stripped + "\"");
    if (!parsed.labels.empty()) labels[input_lines[i].index] = std::move(parsed.labels);
  }
  return labels;
}

AnnotatedFunction parse_detection_output(const std::string& model_text,
                                         const DecompiledFunction& function, bool strict) {
  AnnotatedFunction out;
  out.function = function;
  out.labels = parse_detection_output(model_text, function.lines, strict);
  return out;
}

std::vector<std::string> parse_redundant_variables(const std::string& reply) {
  // first non-blank line, comma-separated identifiers; "none" means empty
  std::vector<std::string> out;
  for (const std::string& raw : text_lines(reply)) {
    if (is_blank(raw)) continue;
    std::string line = raw;
    std::string lower = line;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (lower.find("none") != std::string::npos && line.find(',') == std::string::npos)
      return out;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t comma = line.find(',', start);
      std::string piece = comma == std::string::npos ? line.substr(start)
                                                     : line.substr(start, comma - start);
      // first identifier token of the piece
      std::string name;
      for (char c : piece) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') name += c;
        else if (!name.empty()) break;
      }
      if (!name.empty() && !std::isdigit(static_cast<unsigned char>(name[0])))
        out.push_back(name);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    break;
  }
  return out;
}

namespace {

LlmRequest make_request(const PipelineServices& s, const std::string& prompt,
                        const char* tag) {
  return {prompt, s.config.model_id, s.config.temperature, 0, tag};
}

// One automatic re-prompt with a format reminder; the second failure is
// terminal for the function.
std::map<int, std::set<DistortionType>> detect_chunk(const PipelineServices& s,
                                                     const PromptBundle& prompt,
                                                     std::span<const SourceLine> lines) {
  std::string rendered = prompt.render();
  LlmResponse reply = s.gateway->complete(make_request(s, rendered, "detection"));
  try {
    return parse_detection_output(reply.text, lines, s.options.strict);
  } catch (const OutputParseError&) {
    LlmResponse retry = s.gateway->complete(
        make_request(s, rendered + s.prompts->format_reminder(), "detection"));
    return parse_detection_output(retry.text, lines, s.options.strict);
  }
}

}  // namespace

AnnotatedFunction detect(const DecompiledFunction& function, PipelineServices& s) {
  if (s.options.baseline && *s.options.baseline == BaselineKind::ZeroShot)
    throw InvalidParams("the zero-shot baseline defines no detection output");

  std::vector<std::string> redundant_vars;
  std::vector<RetrievalHit> hits;

  if (!s.options.baseline) {
    // Template 1: redundant-variable context from the dependency map
    DependencyMap dep_map = variable_dependency_analysis(function);
    if (!dep_map.empty()) {
      PromptBundle prompt = s.prompts->build_redundancy_prompt(dep_map);
      LlmResponse reply =
          s.gateway->complete(make_request(s, prompt.render(), "redundancy"));
      redundant_vars = parse_redundant_variables(reply.text);
    }

    // retrieval context, deduplicated by record id across query lines
    if (s.index && s.index->size() > 0) {
      std::vector<SourceLine> queries;
      switch (s.options.retrieval_mode) {
        case RetrievalMode::Intensity:
          for (const ScoredLine& scored :
               select_top_k(function, s.weights, s.config.intensity))
            queries.push_back(scored.line);
          break;
        case RetrievalMode::Random:
          queries = select_random_k(
              function, compute_k(function.line_count(), s.config.intensity),
              s.options.seed);
          break;
        case RetrievalMode::All:
          queries = select_all(function);
          break;
      }
      std::set<int> seen;
      for (const SourceLine& query : queries)
        for (RetrievalHit& hit : s.index->retrieve(query.text, s.config.retrieval_k))
          if (seen.insert(hit.record.id).second) hits.push_back(std::move(hit));
    }
  }

  std::vector<Chunk> chunks =
      segment(function, s.config.chunk_threshold, s.config.chunk_overlap);
  std::vector<ChunkAnnotations> results(chunks.size());
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    const std::string code = chunk_text(chunks[c]);
    PromptBundle prompt =
        s.options.baseline ? s.prompts->build_baseline_prompt(*s.options.baseline, code)
                           : s.prompts->build_detection_prompt(code, redundant_vars, hits);
    results[c].labels = detect_chunk(s, prompt, chunks[c].lines);
    results[c].chunk = chunks[c];
  }

  return merge_annotations(function, results).annotated;
}

CorrectionResult correct(const AnnotatedFunction& annotated, PipelineServices& s) {
  if (!annotated.has_labels()) throw NothingToCorrect();

  PromptBundle prompt;
  if (s.options.baseline && *s.options.baseline == BaselineKind::ZeroShot) {
    // the zero-shot baseline sees neither definitions nor labels
    std::string plain;
    for (const SourceLine& line : annotated.function.lines) {
      if (line.index > 1) plain += '\n';
      plain += line.text;
    }
    prompt = s.prompts->build_baseline_prompt(BaselineKind::ZeroShot, plain);
  } else {
    bool with_examples =
        s.options.baseline && *s.options.baseline == BaselineKind::WithExamples;
    prompt = s.prompts->build_correction_prompt(annotated, with_examples);
  }

  // correction always sees the whole function
  LlmResponse reply = s.gateway->complete(make_request(s, prompt.render(), "correction"));
  std::vector<std::string> lines = reply_lines(reply.text);
  lines = trim_blank_edges(std::move(lines));
  if (lines.empty()) throw OutputParseError("empty correction reply");

  CorrectionResult result;
  result.corrected_lines = lines;
  for (std::size_t i = 0; i < lines.size(); ++i)
    if (has_fixed_marker(lines[i])) result.fixed_indices.insert(static_cast<int>(i) + 1);

  // I4 lines are expected to disappear from the output
  std::set<std::string> output_cores;
  for (const std::string& line : lines) {
    TrailingLabels stripped = split_trailing_labels(strip_fixed_marker(line));
    output_cores.insert(rtrim_copy(stripped.stripped));
  }
  for (const auto& [index, labels] : annotated.labels) {
    if (!labels.count(DistortionType::I4)) continue;
    std::string core = rtrim_copy(annotated.function.line(index).text);
    if (output_cores.count(core))
      result.warnings.push_back("I4 line " + std::to_string(index) +
                                " still present after correction");
    else
      result.removed_input_indices.insert(index);
  }
  return result;
}

std::optional<double> BatchReport::fix_rate() const {
  long denominator = flagged_lines - flagged_i4;
  if (denominator <= 0) return std::nullopt;
  return static_cast<double>(fixed_marked) / static_cast<double>(denominator);
}

std::string BatchReport::to_json() const {
  nlohmann::json j;
  j["files"] = files;
  j["functions"] = functions;
  j["succeeded"] = succeeded;
  j["detection_calls"] = detection_calls;
  j["redundancy_calls"] = redundancy_calls;
  j["correction_calls"] = correction_calls;
  j["prompt_tokens"] = tokens.prompt_tokens;
  j["completion_tokens"] = tokens.completion_tokens;
  j["wall_seconds"] = wall_seconds;
  j["output_files"] = output_files;
  j["flagged_lines"] = flagged_lines;
  j["flagged_i4"] = flagged_i4;
  j["fixed_marked"] = fixed_marked;
  if (auto fr = fix_rate()) j["fix_rate"] = *fr;
  j["failures"] = nlohmann::json::array();
  for (const FunctionFailure& f : failures)
    j["failures"].push_back(
        {{"file", f.file}, {"function_index", f.function_index}, {"error", f.error}});
  return j.dump(2);
}

BatchReport BatchReport::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  BatchReport r;
  r.files = j.value("files", 0);
  r.functions = j.value("functions", 0);
  r.succeeded = j.value("succeeded", 0);
  r.detection_calls = j.value("detection_calls", 0L);
  r.redundancy_calls = j.value("redundancy_calls", 0L);
  r.correction_calls = j.value("correction_calls", 0L);
  r.tokens.prompt_tokens = j.value("prompt_tokens", 0L);
  r.tokens.completion_tokens = j.value("completion_tokens", 0L);
  r.wall_seconds = j.value("wall_seconds", 0.0);
  r.flagged_lines = j.value("flagged_lines", 0L);
  r.flagged_i4 = j.value("flagged_i4", 0L);
  r.fixed_marked = j.value("fixed_marked", 0L);
  for (const auto& f : j.value("output_files", nlohmann::json::array()))
    r.output_files.push_back(f.get<std::string>());
  for (const auto& f : j.value("failures", nlohmann::json::array()))
    r.failures.push_back({f.value("file", std::string()), f.value("function_index", 0),
                          f.value("error", std::string())});
  return r;
}

namespace {

std::vector<std::filesystem::path> list_corpus_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(dir))
    throw IoError("input directory does not exist: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

struct WorkItem {
  std::size_t file_idx = 0;
  int function_idx = 0;
  std::string text;
};

int effective_jobs(int requested) {
  if (requested > 0) return requested;
#ifdef _OPENMP
  int hw = omp_get_max_threads();
#else
  int hw = 1;
#endif
  // default stays within the gateway's in-flight cap
  return std::min(hw, GatewayOptions{}.max_concurrency);
}

}  // namespace

BatchReport run_batch(PipelineServices& services, const BatchOptions& options) {
  auto wall_start = std::chrono::steady_clock::now();
  GatewayTotals before = services.gateway->totals();
  long det_before = services.gateway->calls_tagged("detection");
  long red_before = services.gateway->calls_tagged("redundancy");
  long cor_before = services.gateway->calls_tagged("correction");

  const std::vector<std::filesystem::path> files =
      list_corpus_files(services.config.input_dir);
  const std::filesystem::path out_dir = services.config.output_dir;
  std::filesystem::create_directories(out_dir);

  std::vector<std::vector<std::string>> per_file_functions(files.size());
  std::vector<WorkItem> work;
  for (std::size_t f = 0; f < files.size(); ++f) {
    per_file_functions[f] = split_functions(read_text_file(files[f]));
    for (std::size_t i = 0; i < per_file_functions[f].size(); ++i)
      work.push_back({f, static_cast<int>(i), per_file_functions[f][i]});
  }

  BatchReport report;
  report.files = static_cast<int>(files.size());
  report.functions = static_cast<int>(work.size());

  std::vector<std::string> detected(work.size());
  std::vector<std::string> corrected(work.size());
  std::vector<std::string> worksheet_rows(work.size());
  std::vector<FixCounts> per_item_fixes(work.size());
  std::mutex failures_mutex;

  const int jobs = effective_jobs(options.jobs);
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (std::size_t w = 0; w < work.size(); ++w) {
    const WorkItem& item = work[w];
    try {
      DecompiledFunction function = parse_function(item.text);
      AnnotatedFunction annotated = detect(function, services);
      detected[w] = render_annotated(annotated);
      if (options.with_correction && annotated.has_labels()) {
        CorrectionResult fix = correct(annotated, services);
        std::string text;
        for (std::size_t i = 0; i < fix.corrected_lines.size(); ++i) {
          if (i) text += '\n';
          text += fix.corrected_lines[i];
        }
        corrected[w] = std::move(text);
        worksheet_rows[w] = cfr_worksheet_rows(
            files[item.file_idx].filename().string() + "#" +
                std::to_string(item.function_idx),
            annotated, fix);
        per_item_fixes[w] = fix_counts(annotated, fix);
      } else if (options.with_correction) {
        corrected[w] = item.text;  // nothing flagged; carried through unchanged
      }
    } catch (const std::exception& e) {
      detected[w] = item.text;  // keep alignment: original text, unlabeled
      if (options.with_correction) corrected[w] = item.text;
      std::lock_guard<std::mutex> lock(failures_mutex);
      report.failures.push_back(
          {files[item.file_idx].filename().string(), item.function_idx, e.what()});
    }
  }
  for (const FixCounts& fc : per_item_fixes) {
    report.flagged_lines += fc.flagged_lines;
    report.flagged_i4 += fc.flagged_i4;
    report.fixed_marked += fc.fixed_marked;
  }

  // reassemble outputs in input order
  std::vector<std::vector<std::string>> detected_by_file(files.size());
  std::vector<std::vector<std::string>> corrected_by_file(files.size());
  for (std::size_t w = 0; w < work.size(); ++w) {
    detected_by_file[work[w].file_idx].push_back(detected[w]);
    if (options.with_correction)
      corrected_by_file[work[w].file_idx].push_back(corrected[w]);
  }
  for (std::size_t f = 0; f < files.size(); ++f) {
    if (detected_by_file[f].empty()) continue;
    const std::filesystem::path out_path = out_dir / files[f].filename();
    write_function_file(detected_by_file[f], out_path);
    report.output_files.push_back(out_path.string());
    if (options.with_correction) {
      const std::filesystem::path fix_path =
          out_dir / ("corrected_" + files[f].filename().string());
      write_function_file(corrected_by_file[f], fix_path);
      report.output_files.push_back(fix_path.string());
    }
  }
  if (options.with_correction) {
    std::string csv = cfr_worksheet_header();
    for (const std::string& rows : worksheet_rows) csv += rows;
    write_text_file(out_dir / "cfr_worksheet.csv", csv);
    report.output_files.push_back((out_dir / "cfr_worksheet.csv").string());
  }

  std::sort(report.failures.begin(), report.failures.end(),
            [](const FunctionFailure& a, const FunctionFailure& b) {
              return std::tie(a.file, a.function_index) <
                     std::tie(b.file, b.function_index);
            });
  report.succeeded = report.functions - static_cast<int>(report.failures.size());
  GatewayTotals after = services.gateway->totals();
  report.tokens.prompt_tokens = after.usage.prompt_tokens - before.usage.prompt_tokens;
  report.tokens.completion_tokens =
      after.usage.completion_tokens - before.usage.completion_tokens;
  report.detection_calls = services.gateway->calls_tagged("detection") - det_before;
  report.redundancy_calls = services.gateway->calls_tagged("redundancy") - red_before;
  report.correction_calls = services.gateway->calls_tagged("correction") - cor_before;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();

  write_text_file(out_dir / "run_report.json", report.to_json());
  return report;
}

BatchReport run_correction_batch(PipelineServices& services,
                                 const std::filesystem::path& labeled_dir,
                                 const BatchOptions& options) {
  auto wall_start = std::chrono::steady_clock::now();
  GatewayTotals before = services.gateway->totals();
  long cor_before = services.gateway->calls_tagged("correction");

  const std::vector<std::filesystem::path> files = list_corpus_files(labeled_dir);
  const std::filesystem::path out_dir = services.config.output_dir;
  std::filesystem::create_directories(out_dir);

  std::vector<WorkItem> work;
  std::vector<std::vector<std::string>> per_file(files.size());
  for (std::size_t f = 0; f < files.size(); ++f) {
    per_file[f] = split_functions(read_text_file(files[f]));
    for (std::size_t i = 0; i < per_file[f].size(); ++i)
      work.push_back({f, static_cast<int>(i), per_file[f][i]});
  }

  BatchReport report;
  report.files = static_cast<int>(files.size());
  report.functions = static_cast<int>(work.size());

  std::vector<std::string> corrected(work.size());
  std::vector<std::string> worksheet_rows(work.size());
  std::vector<FixCounts> per_item_fixes(work.size());
  std::mutex failures_mutex;

  const int jobs = effective_jobs(options.jobs);
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (std::size_t w = 0; w < work.size(); ++w) {
    const WorkItem& item = work[w];
    try {
      AnnotatedFunction annotated = annotated_from_labeled_text(item.text);
      if (!annotated.has_labels()) {
        corrected[w] = item.text;  // nothing to correct; pass through
        continue;
      }
      CorrectionResult fix = correct(annotated, services);
      std::string text;
      for (std::size_t i = 0; i < fix.corrected_lines.size(); ++i) {
        if (i) text += '\n';
        text += fix.corrected_lines[i];
      }
      corrected[w] = std::move(text);
      worksheet_rows[w] = cfr_worksheet_rows(
          files[item.file_idx].filename().string() + "#" + std::to_string(item.function_idx),
          annotated, fix);
      per_item_fixes[w] = fix_counts(annotated, fix);
    } catch (const std::exception& e) {
      corrected[w] = item.text;
      std::lock_guard<std::mutex> lock(failures_mutex);
      report.failures.push_back(
          {files[item.file_idx].filename().string(), item.function_idx, e.what()});
    }
  }
  for (const FixCounts& fc : per_item_fixes) {
    report.flagged_lines += fc.flagged_lines;
    report.flagged_i4 += fc.flagged_i4;
    report.fixed_marked += fc.fixed_marked;
  }

  std::vector<std::vector<std::string>> by_file(files.size());
  for (std::size_t w = 0; w < work.size(); ++w)
    by_file[work[w].file_idx].push_back(corrected[w]);
  for (std::size_t f = 0; f < files.size(); ++f) {
    if (by_file[f].empty()) continue;
    const std::filesystem::path out_path =
        out_dir / ("corrected_" + files[f].filename().string());
    write_function_file(by_file[f], out_path);
    report.output_files.push_back(out_path.string());
  }
  std::string csv = cfr_worksheet_header();
  for (const std::string& rows : worksheet_rows) csv += rows;
  write_text_file(out_dir / "cfr_worksheet.csv", csv);
  report.output_files.push_back((out_dir / "cfr_worksheet.csv").string());

  std::sort(report.failures.begin(), report.failures.end(),
            [](const FunctionFailure& a, const FunctionFailure& b) {
              return std::tie(a.file, a.function_index) <
                     std::tie(b.file, b.function_index);
            });
  report.succeeded = report.functions - static_cast<int>(report.failures.size());
  GatewayTotals after = services.gateway->totals();
  report.tokens.prompt_tokens = after.usage.prompt_tokens - before.usage.prompt_tokens;
  report.tokens.completion_tokens =
      after.usage.completion_tokens - before.usage.completion_tokens;
  report.correction_calls = services.gateway->calls_tagged("correction") - cor_before;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();

  write_text_file(out_dir / "run_report.json", report.to_json());
  return report;
}

}  // namespace fidelity
