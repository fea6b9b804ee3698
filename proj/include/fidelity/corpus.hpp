#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fidelity/intensity.hpp"

namespace fidelity {

// A corpus file: functions separated by ///// lines, order preserved.
struct FunctionFile {
  std::filesystem::path path;
  std::vector<std::string> functions;
};

// Splits on separator lines whose trimmed content is exactly ///// (five
// slashes). Separator lines are excluded, empty segments dropped, and each
// segment loses leading/trailing blank lines only.
std::vector<std::string> split_functions(const std::string& file_text);

std::string join_functions(std::span<const std::string> functions);
void write_function_file(std::span<const std::string> functions,
                         const std::filesystem::path& path);
FunctionFile read_function_file(const std::filesystem::path& path);

struct PipelineConfig {
  // [LLM]
  std::string model_id = "gpt-4o";
  double temperature = 0.0;
  std::string api_base = "https://api.openai.com/v1";
  std::string api_key;  // opaque; FIDELITY_API_KEY env overrides
  std::string embedding_model = "text-embedding-ada-002";

  // [PATHS]
  std::string input_dir;
  std::string output_dir;
  std::string knowledge_base;
  std::string templates_dir;  // empty = built-in data directory

  // [ANALYSIS]
  IntensityParams intensity;
  int chunk_threshold = 50;
  int chunk_overlap = 5;
  int retrieval_k = 1;

  // Keys we do not interpret; kept so nothing is silently dropped.
  std::map<std::string, std::string> extras;  // "section.key" -> value
};

PipelineConfig parse_config(const std::string& ini_text);
PipelineConfig load_config(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace fidelity
