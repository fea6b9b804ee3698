#include "fidelity/prompt.hpp"

#include <algorithm>
#include <cctype>

#include "fidelity/corpus.hpp"
#include "fidelity/errors.hpp"

#ifndef FIDELITY_DATA_DIR
#define FIDELITY_DATA_DIR "data"
#endif

namespace fidelity {

namespace {

std::string trim_copy(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

constexpr const char* kCodeHeader = "Decompiled code:";

}  // namespace

std::string PromptBundle::render() const {
  std::string out;
  auto add = [&out](const std::string& part) {
    if (part.empty()) return;
    if (!out.empty()) out += "\n\n";
    out += part;
  };
  add(role_preamble);
  add(distortion_definitions);
  add(context_block);
  add(examples_block);
  add(code_block);
  add(output_instructions);
  return out;
}

const std::array<const char*, 6>& RedundancyCriteria::expected_names() {
  static const std::array<const char*, 6> names = {
      "Temporary", "Intermediate", "Duplicate", "Low-Usage", "Non-Significant",
      "Mergeable"};
  return names;
}

std::string RedundancyCriteria::render() const {
  std::string out = "Redundancy criteria:";
  for (const RedundancyCriterion& c : entries) out += "\n- " + c.name + ": " + c.text;
  return out;
}

PromptLibrary::Template PromptLibrary::parse_template(const std::string& text,
                                                      const std::string& name) {
  Template t;
  std::size_t cursor = 0;
  std::size_t last_end = 0;
  bool first = true;
  while (true) {
    std::size_t open = text.find("{{", cursor);
    if (open == std::string::npos) break;
    std::size_t close = text.find("}}", open + 2);
    if (close == std::string::npos)
      throw TemplateError(name + ": unclosed {{ placeholder");
    std::string slot = text.substr(open + 2, close - open - 2);
    if (first) {
      t.head = trim_copy(text.substr(0, open));
      first = false;
    } else {
      std::string between = text.substr(last_end, open - last_end);
      if (!trim_copy(between).empty())
        throw TemplateError(name + ": literal text between placeholders (\"" +
                            trim_copy(between) +
                            "\"); headers belong to the slot values");
    }
    t.slots.push_back(slot);
    last_end = close + 2;
    cursor = close + 2;
  }
  if (t.slots.empty()) throw TemplateError(name + ": no {{ }} placeholders");
  t.tail = trim_copy(text.substr(last_end));
  return t;
}

PromptBundle PromptLibrary::fill(const Template& t, const std::string& definitions,
                                 const std::string& context, const std::string& examples,
                                 const std::string& code) const {
  PromptBundle bundle;
  bundle.role_preamble = t.head;
  bundle.output_instructions = t.tail;
  for (const std::string& slot : t.slots) {
    if (slot == "definitions") bundle.distortion_definitions = definitions;
    else if (slot == "context") bundle.context_block = context;
    else if (slot == "examples") bundle.examples_block = examples;
    else if (slot == "code") bundle.code_block = code;
    else throw TemplateError("unknown placeholder {{" + slot + "}}");
  }
  if (bundle.code_block.empty()) throw TemplateError("prompt code block is empty");
  return bundle;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  PromptLibrary lib;
  auto read = [&](const char* file) { return read_text_file(dir / file); };

  lib.redundancy_ = parse_template(read("redundancy.txt"), "redundancy.txt");
  lib.detection_ = parse_template(read("detection.txt"), "detection.txt");
  lib.correction_ = parse_template(read("correction.txt"), "correction.txt");
  lib.zero_shot_ = parse_template(read("zero_shot.txt"), "zero_shot.txt");
  lib.definitions_ = trim_copy(read("definitions.txt"));

  // criteria.txt: six `Name: text` lines, fixed names, fixed order
  std::string criteria_text = read("criteria.txt");
  std::size_t entry = 0;
  std::size_t start = 0;
  while (start <= criteria_text.size() && entry < 6) {
    std::size_t nl = criteria_text.find('\n', start);
    std::string line = (nl == std::string::npos)
                           ? criteria_text.substr(start)
                           : criteria_text.substr(start, nl - start);
    start = (nl == std::string::npos) ? criteria_text.size() + 1 : nl + 1;
    line = trim_copy(line);
    if (line.empty() || line[0] == '#') continue;
    std::size_t colon = line.find(':');
    if (colon == std::string::npos)
      throw TemplateError("criteria.txt: expected `Name: text`, got \"" + line + "\"");
    std::string name = trim_copy(line.substr(0, colon));
    if (name != RedundancyCriteria::expected_names()[entry])
      throw TemplateError("criteria.txt: criterion " + std::to_string(entry + 1) +
                          " must be named " +
                          RedundancyCriteria::expected_names()[entry]);
    lib.criteria_.entries[entry] = {name, trim_copy(line.substr(colon + 1))};
    ++entry;
  }
  if (entry != 6) throw TemplateError("criteria.txt: exactly six criteria required");

  const std::filesystem::path examples_dir = dir.parent_path() / "examples";
  for (int i = 0; i < 3; ++i)
    lib.examples_[i] =
        trim_copy(read_text_file(examples_dir / ("example" + std::to_string(i + 1) + ".txt")));
  return lib;
}

PromptLibrary PromptLibrary::load_default() {
  return load(std::filesystem::path(FIDELITY_DATA_DIR) / "templates");
}

std::string fence_code_block(const std::string& header, const std::string& code) {
  return header + "\n```\n" + code + "\n```";
}

std::string extract_fenced_block(const std::string& prompt, const std::string& header) {
  std::size_t at = prompt.find(header);
  if (at == std::string::npos) return {};
  std::size_t open = prompt.find("```\n", at);
  if (open == std::string::npos) return {};
  std::size_t begin = open + 4;
  std::size_t close = prompt.find("\n```", begin);
  if (close == std::string::npos) return {};
  return prompt.substr(begin, close - begin);
}

PromptBundle PromptLibrary::build_redundancy_prompt(const DependencyMap& dep_map) const {
  if (dep_map.empty()) throw EmptyDependencyMap();

  std::string listing = "Variable dependencies:";
  for (const auto& [var, statements] : dep_map) {
    listing += "\n" + var + ":";
    if (statements.empty()) listing += "\n  (no dependent statements)";
    for (const DependentStatement& s : statements) listing += "\n  " + s.text;
  }
  return fill(redundancy_, criteria_.render(), "", "", listing);
}

PromptBundle PromptLibrary::build_detection_prompt(
    const std::string& code, const std::vector<std::string>& redundant_vars,
    const std::vector<RetrievalHit>& retrieved) const {
  std::string context;
  if (!redundant_vars.empty() || !retrieved.empty()) {
    context = "Context:";
    if (!redundant_vars.empty()) {
      context += "\nVariables flagged as likely redundant: ";
      for (std::size_t i = 0; i < redundant_vars.size(); ++i) {
        if (i) context += ", ";
        context += redundant_vars[i];
      }
    }
    if (!retrieved.empty()) {
      context += "\nSimilar annotated lines from the distortion database:";
      for (const RetrievalHit& hit : retrieved)
        context += "\n  " + hit.record.code_line + " // " + to_label(hit.record.label);
    }
  }
  return fill(detection_, definitions_, context, "", fence_code_block(kCodeHeader, code));
}

PromptBundle PromptLibrary::build_correction_prompt(const AnnotatedFunction& annotated,
                                                    bool with_examples) const {
  if (!annotated.has_labels()) throw NothingToCorrect();
  PromptBundle bundle = fill(correction_, definitions_, "", "",
                             fence_code_block(kCodeHeader, render_annotated(annotated)));
  if (with_examples) {
    std::string examples = "Worked examples:";
    for (const std::string& ex : examples_) examples += "\n\n### Example\n" + ex;
    bundle.examples_block = std::move(examples);
  }
  return bundle;
}

PromptBundle PromptLibrary::build_baseline_prompt(BaselineKind kind,
                                                  const std::string& code) const {
  if (code.empty()) throw TemplateError("baseline prompt needs non-empty code");
  switch (kind) {
    case BaselineKind::ZeroShot:
      return fill(zero_shot_, "", "", "", fence_code_block(kCodeHeader, code));
    case BaselineKind::WithDefinitions:
      return build_detection_prompt(code, {}, {});
    case BaselineKind::WithExamples: {
      std::string examples = "Worked examples:";
      for (const std::string& ex : examples_) examples += "\n\n### Example\n" + ex;
      return fill(detection_, definitions_, "", examples,
                  fence_code_block(kCodeHeader, code));
    }
  }
  throw TemplateError("unknown baseline kind");
}

std::string PromptLibrary::format_reminder() const {
  return "\n\nReminder: reply with the code block only, one output line per input "
         "line, labels only as trailing // I<k> comments.";
}

}  // namespace fidelity
