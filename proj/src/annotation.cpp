#include "fidelity/annotation.hpp"

namespace fidelity {

std::string render_annotated(const AnnotatedFunction& annotated) {
  std::string out;
  for (const SourceLine& line : annotated.function.lines) {
    if (line.index > 1) out += '\n';
    auto it = annotated.labels.find(line.index);
    out += it != annotated.labels.end() ? append_labels(line.text, it->second) : line.text;
  }
  return out;
}

AnnotatedFunction annotated_from_labeled_text(const std::string& labeled_text) {
  AnnotatedFunction out;
  std::string stripped_text;
  std::map<int, std::set<DistortionType>> labels;

  int index = 0;
  std::size_t start = 0;
  bool final_blank_artifact = false;
  while (start <= labeled_text.size()) {
    std::size_t nl = labeled_text.find('\n', start);
    std::string line = (nl == std::string::npos)
                           ? labeled_text.substr(start)
                           : labeled_text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++index;
    final_blank_artifact = nl == std::string::npos && line.empty() && index > 1;
    if (!final_blank_artifact) {
      TrailingLabels parsed = split_trailing_labels(line);
      if (index > 1) stripped_text += '\n';
      stripped_text += parsed.stripped;
      if (!parsed.labels.empty()) labels[index] = parsed.labels;
    }
    if (nl == std::string::npos) break;
    start = nl + 1;
  }

  out.function = parse_function(stripped_text);
  out.labels = std::move(labels);
  return out;
}

}  // namespace fidelity
