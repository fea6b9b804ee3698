#include "fidelity/corpus.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <string_view>

#include "fidelity/errors.hpp"

namespace fidelity {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_lines(const std::string& text) {
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
  if (!text.empty() && text.back() == '\n') lines.pop_back();
  return lines;
}

// Joins accumulated lines, dropping leading/trailing blank lines only.
std::string finish_segment(std::vector<std::string>& lines) {
  std::size_t b = 0, e = lines.size();
  auto blank = [](const std::string& l) { return trim(l).empty(); };
  while (b < e && blank(lines[b])) ++b;
  while (e > b && blank(lines[e - 1])) --e;
  std::string out;
  for (std::size_t i = b; i < e; ++i) {
    if (i > b) out += '\n';
    out += lines[i];
  }
  lines.clear();
  return out;
}

}  // namespace

std::vector<std::string> split_functions(const std::string& file_text) {
  std::vector<std::string> out;
  if (file_text.empty()) return out;

  std::vector<std::string> segment;
  for (std::string& line : split_lines(file_text)) {
    if (trim(line) == "/////") {
      std::string fn = finish_segment(segment);
      if (!fn.empty()) out.push_back(std::move(fn));
    } else {
      segment.push_back(std::move(line));
    }
  }
  std::string fn = finish_segment(segment);
  if (!fn.empty()) out.push_back(std::move(fn));
  return out;
}

std::string join_functions(std::span<const std::string> functions) {
  std::string out;
  for (std::size_t i = 0; i < functions.size(); ++i) {
    if (i > 0) out += "\n/////\n";
    out += functions[i];
  }
  return out;
}

void write_function_file(std::span<const std::string> functions,
                         const std::filesystem::path& path) {
  if (functions.empty()) throw InvalidParams("refusing to write an empty function file");
  write_text_file(path, join_functions(functions));
}

FunctionFile read_function_file(const std::filesystem::path& path) {
  return FunctionFile{path, split_functions(read_text_file(path))};
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

namespace {

using IniData = std::map<std::string, std::map<std::string, std::string>>;

// key = value lines under [section] headings; full-line # and ; comments.
// Keys are case-sensitive.
IniData parse_ini(const std::string& text) {
  IniData data;
  std::string section;
  for (const std::string& raw : split_lines(text)) {
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      data[section];
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw MalformedValue(line, "", "expected `key = value`");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw MalformedValue(line, value, "empty key");
    data[section][key] = value;
  }
  return data;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double d = std::stod(value, &pos);
    if (pos != value.size()) throw MalformedValue(key, value, "trailing characters");
    return d;
  } catch (const MalformedValue&) {
    throw;
  } catch (const std::exception&) {
    throw MalformedValue(key, value, "not a number");
  }
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(value, &pos);
    if (pos != value.size()) throw MalformedValue(key, value, "trailing characters");
    return v;
  } catch (const MalformedValue&) {
    throw;
  } catch (const std::exception&) {
    throw MalformedValue(key, value, "not an integer");
  }
}

}  // namespace

PipelineConfig parse_config(const std::string& ini_text) {
  IniData ini = parse_ini(ini_text);
  if (!ini.count("LLM")) throw MissingSection("LLM");
  if (!ini.count("PATHS")) throw MissingSection("PATHS");

  PipelineConfig cfg;
  std::set<std::string> consumed;
  auto take = [&](const char* section, const char* key) -> const std::string* {
    auto sec = ini.find(section);
    if (sec == ini.end()) return nullptr;
    auto it = sec->second.find(key);
    if (it == sec->second.end()) return nullptr;
    consumed.insert(std::string(section) + "." + key);
    return &it->second;
  };

  if (const auto* v = take("LLM", "model")) cfg.model_id = *v;
  if (const auto* v = take("LLM", "temperature")) cfg.temperature = parse_double("temperature", *v);
  if (const auto* v = take("LLM", "api_key")) cfg.api_key = *v;
  if (const auto* v = take("LLM", "api_base")) cfg.api_base = *v;
  if (const auto* v = take("LLM", "embedding_model")) cfg.embedding_model = *v;

  if (const auto* v = take("PATHS", "input_dir")) cfg.input_dir = *v;
  if (const auto* v = take("PATHS", "output_dir")) cfg.output_dir = *v;
  if (const auto* v = take("PATHS", "knowledge_base")) cfg.knowledge_base = *v;
  if (const auto* v = take("PATHS", "templates_dir")) cfg.templates_dir = *v;
  if (cfg.knowledge_base.empty()) throw MissingRequiredKey("PATHS", "knowledge_base");

  if (const auto* v = take("ANALYSIS", "chunk_threshold"))
    cfg.chunk_threshold = parse_int("chunk_threshold", *v);
  if (const auto* v = take("ANALYSIS", "chunk_overlap"))
    cfg.chunk_overlap = parse_int("chunk_overlap", *v);
  if (const auto* v = take("ANALYSIS", "retrieval_k"))
    cfg.retrieval_k = parse_int("retrieval_k", *v);
  if (const auto* v = take("ANALYSIS", "min_lines"))
    cfg.intensity.min_lines = parse_int("min_lines", *v);
  if (const auto* v = take("ANALYSIS", "base_lines"))
    cfg.intensity.base_lines = parse_int("base_lines", *v);
  if (const auto* v = take("ANALYSIS", "max_lines"))
    cfg.intensity.max_lines = parse_int("max_lines", *v);
  if (const auto* v = take("ANALYSIS", "threshold"))
    cfg.intensity.threshold = parse_int("threshold", *v);
  if (const auto* v = take("ANALYSIS", "step"))
    cfg.intensity.step = parse_int("step", *v);

  // keep anything we did not interpret
  for (const auto& [section, kv] : ini)
    for (const auto& [key, value] : kv)
      if (!consumed.count(section + "." + key)) cfg.extras[section + "." + key] = value;

  if (cfg.temperature < 0.0 || cfg.temperature > 2.0)
    throw MalformedValue("temperature", std::to_string(cfg.temperature),
                         "must be in [0, 2]");
  if (cfg.retrieval_k < 1)
    throw MalformedValue("retrieval_k", std::to_string(cfg.retrieval_k), "must be >= 1");
  if (cfg.chunk_overlap < 0 || cfg.chunk_overlap >= cfg.chunk_threshold)
    throw MalformedValue("chunk_overlap", std::to_string(cfg.chunk_overlap),
                         "must satisfy 0 <= overlap < chunk_threshold");
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text_file(path));
}

}  // namespace fidelity
