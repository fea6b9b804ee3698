#include "fidelity/distortion.hpp"

#include <algorithm>
#include <cctype>

#include "fidelity/errors.hpp"

namespace fidelity {

std::string to_label(DistortionType t) { return "I" + std::to_string(static_cast<int>(t)); }

const char* describe(DistortionType t) {
  switch (t) {
    case DistortionType::I1: return "non-inertial dereferencing";
    case DistortionType::I2: return "character/string literal representation";
    case DistortionType::I3: return "control flow obfuscation";
    case DistortionType::I4: return "redundant code";
    case DistortionType::I5: return "unexpected returns";
    case DistortionType::I6: return "non-type symbols";
  }
  return "?";
}

std::optional<DistortionType> parse_label_token(std::string_view token) {
  if (token.size() < 2 || (token[0] != 'I' && token[0] != 'i')) return std::nullopt;
  bool digits = std::all_of(token.begin() + 1, token.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c));
  });
  if (!digits) return std::nullopt;
  if (token.size() != 2 || token[1] < '1' || token[1] > '6')
    throw UnknownLabel(std::string(token));
  return static_cast<DistortionType>(token[1] - '0');
}

const char* to_string(DecompilerOrigin origin) {
  return origin == DecompilerOrigin::Ida ? "ida" : "ghidra";
}

namespace {

std::string_view rtrim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Last `//` of the line that is not inside a string or char literal.
std::size_t last_comment_start(std::string_view line) {
  std::size_t found = std::string_view::npos;
  bool in_string = false, in_char = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if ((in_string || in_char) && c == '\\') {
      ++i;
      continue;
    }
    if (in_string) {
      if (c == '"') in_string = false;
      continue;
    }
    if (in_char) {
      if (c == '\'') in_char = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '\'') in_char = true;
    else if (c == '/' && i + 1 < line.size() && line[i + 1] == '/') found = i;
  }
  return found;
}

}  // namespace

TrailingLabels split_trailing_labels(std::string_view line) {
  TrailingLabels out;
  out.stripped = std::string(line);

  std::size_t pos = last_comment_start(line);
  if (pos == std::string_view::npos) return out;

  std::string_view comment = rtrim(line.substr(pos + 2));
  while (!comment.empty() && std::isspace(static_cast<unsigned char>(comment.front())))
    comment.remove_prefix(1);
  if (comment.empty() || (comment[0] != 'I' && comment[0] != 'i')) return out;

  // split on commas/whitespace; every piece must be a label
  std::set<DistortionType> labels;
  std::size_t i = 0;
  while (i < comment.size()) {
    while (i < comment.size() &&
           (comment[i] == ',' || std::isspace(static_cast<unsigned char>(comment[i]))))
      ++i;
    if (i >= comment.size()) break;
    std::size_t j = i;
    while (j < comment.size() && comment[j] != ',' &&
           !std::isspace(static_cast<unsigned char>(comment[j])))
      ++j;
    std::optional<DistortionType> label = parse_label_token(comment.substr(i, j - i));
    if (!label) return out;  // some non-label word: an ordinary comment
    labels.insert(*label);
    i = j;
  }
  if (labels.empty()) return out;

  out.labels = std::move(labels);
  out.stripped = std::string(rtrim(line.substr(0, pos)));
  return out;
}

std::string append_labels(std::string_view code, const std::set<DistortionType>& labels) {
  if (labels.empty()) return std::string(code);
  std::string out(code);
  out += " // ";
  bool first = true;
  for (DistortionType t : labels) {
    if (!first) out += ", ";
    out += to_label(t);
    first = false;
  }
  return out;
}

bool has_fixed_marker(std::string_view line) {
  std::size_t pos = last_comment_start(line);
  if (pos == std::string_view::npos) return false;
  std::string_view comment = rtrim(line.substr(pos + 2));
  while (!comment.empty() && std::isspace(static_cast<unsigned char>(comment.front())))
    comment.remove_prefix(1);
  if (comment.size() != 5) return false;
  std::string lower(comment);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return lower == "fixed";
}

std::string strip_fixed_marker(std::string_view line) {
  if (!has_fixed_marker(line)) return std::string(line);
  std::size_t pos = last_comment_start(line);
  return std::string(rtrim(line.substr(0, pos)));
}

}  // namespace fidelity
