#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace fidelity {

// The six distortion categories, I1..I6.
enum class DistortionType : int {
  I1 = 1,  // non-inertial dereferencing
  I2,      // character/string literal representation
  I3,      // control flow obfuscation
  I4,      // redundant code
  I5,      // unexpected returns
  I6,      // non-type symbols
};

inline constexpr std::array<DistortionType, 6> all_distortion_types() {
  return {DistortionType::I1, DistortionType::I2, DistortionType::I3,
          DistortionType::I4, DistortionType::I5, DistortionType::I6};
}

// "I1".."I6"
std::string to_label(DistortionType t);
// Short human description used by db-stats and reports.
const char* describe(DistortionType t);

// Parses "I3" / "i3"; nullopt when the token is not label-shaped at all.
// Throws UnknownLabel for label-shaped tokens out of range ("I7", "I12").
std::optional<DistortionType> parse_label_token(std::string_view token);

enum class DecompilerOrigin { Ida, Ghidra };
const char* to_string(DecompilerOrigin origin);

// One annotated line of the distortion database.
struct DistortionRecord {
  int id = 0;  // assigned by file order, unique
  std::string code_line;
  DistortionType label = DistortionType::I1;
  DecompilerOrigin origin = DecompilerOrigin::Ida;
};

// ---- trailing label comments --------------------------------------------
//
// A trailing comment is a *label annotation* when it consists solely of
// distortion labels:   v5 = v4; // I4     or    x = p[i]; // I1, I4
// Any other trailing comment (including //fixed) is ordinary code text.

struct TrailingLabels {
  std::string stripped;                 // line with the label comment removed
  std::set<DistortionType> labels;      // empty when no label comment present
};

// Lenient on spacing and case ("// i4", "//I1,I4", "// I1 I4"). Throws
// UnknownLabel when the comment is label-shaped but names an unknown label.
TrailingLabels split_trailing_labels(std::string_view line);

// Renders "<code> // I1, I4" (labels ascending). No-op for empty sets.
std::string append_labels(std::string_view code, const std::set<DistortionType>& labels);

// True when the line ends in a //fixed marker ("// fixed" accepted,
// case-insensitive).
bool has_fixed_marker(std::string_view line);
std::string strip_fixed_marker(std::string_view line);

}  // namespace fidelity
