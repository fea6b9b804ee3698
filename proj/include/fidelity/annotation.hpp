#pragma once

#include <map>
#include <set>
#include <string>

#include "fidelity/distortion.hpp"
#include "fidelity/pseudoc.hpp"

namespace fidelity {

// A function plus its per-line distortion labels. Only labeled lines appear
// in the map and their sets are never empty.
struct AnnotatedFunction {
  DecompiledFunction function;
  std::map<int, std::set<DistortionType>> labels;

  bool has_labels() const { return !labels.empty(); }
};

// Renders the function with trailing `// I<k>` comments on labeled lines.
std::string render_annotated(const AnnotatedFunction& annotated);

// Inverse: parses labels out of labeled text; function holds stripped lines.
AnnotatedFunction annotated_from_labeled_text(const std::string& labeled_text);

}  // namespace fidelity
