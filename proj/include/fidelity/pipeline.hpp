#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fidelity/annotation.hpp"
#include "fidelity/chunk.hpp"
#include "fidelity/corpus.hpp"
#include "fidelity/gateway.hpp"
#include "fidelity/prompt.hpp"
#include "fidelity/store.hpp"

namespace fidelity {

struct CorrectionResult {
  std::vector<std::string> corrected_lines;  // //fixed markers retained
  std::set<int> fixed_indices;               // output line indices
  std::set<int> removed_input_indices;       // I4 lines absent from output
  std::vector<std::string> warnings;         // I4Retained and friends
};

enum class RetrievalMode { Intensity, Random, All };

struct DetectOptions {
  RetrievalMode retrieval_mode = RetrievalMode::Intensity;
  std::optional<BaselineKind> baseline;  // def/eg skip context generation
  std::uint64_t seed = 0;                // random retrieval mode
  bool strict = true;                    // output alignment policy
};

// Everything detect/correct/run_batch need; index may be null (empty
// context, Prompt_Def-style degradation).
struct PipelineServices {
  const DistortionIndex* index = nullptr;
  FeatureWeights weights;
  LlmGateway* gateway = nullptr;
  const PromptLibrary* prompts = nullptr;
  PipelineConfig config;
  DetectOptions options;
};

// Aligns model output to the input lines one-to-one and extracts trailing
// labels. Strict mode requires equal line counts and unchanged code text.
std::map<int, std::set<DistortionType>> parse_detection_output(
    const std::string& model_text, std::span<const SourceLine> input_lines,
    bool strict);
AnnotatedFunction parse_detection_output(const std::string& model_text,
                                         const DecompiledFunction& function,
                                         bool strict = true);

// Phase 2 + 3 for one function: dependency analysis -> redundancy prompt,
// intensity selection -> retrieval, chunked detection, merge.
AnnotatedFunction detect(const DecompiledFunction& function, PipelineServices& services);

// Whole-function correction (never chunked).
CorrectionResult correct(const AnnotatedFunction& annotated, PipelineServices& services);

// Splits a Template-1 reply into variable names ("none" -> empty).
std::vector<std::string> parse_redundant_variables(const std::string& reply);

struct FunctionFailure {
  std::string file;
  int function_index = 0;  // 0-based within the file
  std::string error;
};

struct BatchReport {
  int files = 0;
  int functions = 0;
  int succeeded = 0;
  std::vector<FunctionFailure> failures;
  long detection_calls = 0;
  long redundancy_calls = 0;
  long correction_calls = 0;
  TokenUsage tokens;
  double wall_seconds = 0.0;
  std::vector<std::string> output_files;

  // correction runs only: aggregate fix-rate counting (I4 excluded from the
  // denominator); fix_rate() is empty when nothing qualified
  long flagged_lines = 0;
  long flagged_i4 = 0;
  long fixed_marked = 0;
  std::optional<double> fix_rate() const;

  std::string to_json() const;
  static BatchReport from_json(const std::string& text);
};

struct BatchOptions {
  int jobs = 0;             // 0 = hardware concurrency
  bool with_correction = false;
};

// Detects every function of every .txt file under config.input_dir and
// writes annotated files (same names) into config.output_dir, plus
// run_report.json. Per-function failures are recorded; the batch continues.
BatchReport run_batch(PipelineServices& services, const BatchOptions& options = {});

// Correction pass over already-labeled files (the detect phase's output).
// Writes corrected files and a CFR review worksheet.
BatchReport run_correction_batch(PipelineServices& services,
                                 const std::filesystem::path& labeled_dir,
                                 const BatchOptions& options = {});

}  // namespace fidelity
