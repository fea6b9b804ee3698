#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "fidelity/annotation.hpp"
#include "fidelity/depgraph.hpp"
#include "fidelity/store.hpp"

namespace fidelity {

// A prompt assembled from typed parts. render() concatenates the non-empty
// parts in declaration order, one blank line between parts, so an absent
// context leaves no trace in the text.
struct PromptBundle {
  std::string role_preamble;
  std::string distortion_definitions;
  std::string context_block;
  std::string examples_block;
  std::string code_block;
  std::string output_instructions;

  std::string render() const;
};

// The six redundancy criteria, fixed order, loaded from criteria.txt.
struct RedundancyCriterion {
  std::string name;
  std::string text;
};

struct RedundancyCriteria {
  std::array<RedundancyCriterion, 6> entries;

  static const std::array<const char*, 6>& expected_names();
  std::string render() const;
};

enum class BaselineKind { ZeroShot, WithDefinitions, WithExamples };

// Loads the editable template/definition data files and assembles the
// redundancy, detection, correction and baseline prompts.
class PromptLibrary {
 public:
  // dir layout: redundancy.txt detection.txt correction.txt zero_shot.txt
  //             definitions.txt criteria.txt ../examples/example[1-3].txt
  static PromptLibrary load(const std::filesystem::path& templates_dir);
  // The data directory this build was configured with.
  static PromptLibrary load_default();

  PromptBundle build_redundancy_prompt(const DependencyMap& dep_map) const;
  PromptBundle build_detection_prompt(const std::string& code,
                                      const std::vector<std::string>& redundant_vars,
                                      const std::vector<RetrievalHit>& retrieved) const;
  // with_examples adds the three worked examples (the eg correction baseline)
  PromptBundle build_correction_prompt(const AnnotatedFunction& annotated,
                                       bool with_examples = false) const;
  PromptBundle build_baseline_prompt(BaselineKind kind, const std::string& code) const;

  const RedundancyCriteria& criteria() const { return criteria_; }
  const std::string& definitions_text() const { return definitions_; }

  // Appended on re-prompt after a malformed model reply.
  std::string format_reminder() const;

 private:
  struct Template {
    // Literal text before the first slot and after the last one; slot names
    // in file order. Loader rejects literal text between slots.
    std::string head;
    std::string tail;
    std::vector<std::string> slots;
  };

  static Template parse_template(const std::string& text, const std::string& name);
  PromptBundle fill(const Template& t, const std::string& definitions,
                    const std::string& context, const std::string& examples,
                    const std::string& code) const;

  Template redundancy_;
  Template detection_;
  Template correction_;
  Template zero_shot_;
  std::string definitions_;
  RedundancyCriteria criteria_;
  std::array<std::string, 3> examples_;
};

// Wraps code for embedding into a prompt; the mock provider and tests
// locate the block through these delimiters.
std::string fence_code_block(const std::string& header, const std::string& code);
std::string extract_fenced_block(const std::string& prompt, const std::string& header);

}  // namespace fidelity
