#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace fidelity {

// The eight syntactic construct kinds scored by the intensity algorithm.
// Enumerator order is load-bearing: it is the deterministic tie-break order.
enum class ConstructKind : std::uint8_t {
  Assignment = 0,
  Addition,
  VariableDefinition,
  Return,
  Loop,
  Conditional,
  FunctionCall,
  TypeMention,
};

inline constexpr std::size_t kConstructKindCount = 8;

constexpr std::array<ConstructKind, kConstructKindCount> all_construct_kinds() {
  return {ConstructKind::Assignment,     ConstructKind::Addition,
          ConstructKind::VariableDefinition, ConstructKind::Return,
          ConstructKind::Loop,           ConstructKind::Conditional,
          ConstructKind::FunctionCall,   ConstructKind::TypeMention};
}

const char* to_string(ConstructKind kind);

// Small value-semantic set of ConstructKind, iterated in enum order.
class ConstructSet {
 public:
  ConstructSet() = default;

  void insert(ConstructKind k) { bits_ |= mask(k); }
  bool contains(ConstructKind k) const { return (bits_ & mask(k)) != 0; }
  bool empty() const { return bits_ == 0; }
  int size() const;
  std::vector<ConstructKind> kinds() const;

  friend bool operator==(ConstructSet a, ConstructSet b) { return a.bits_ == b.bits_; }
  friend bool operator!=(ConstructSet a, ConstructSet b) { return a.bits_ != b.bits_; }

 private:
  static std::uint8_t mask(ConstructKind k) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(k));
  }
  std::uint8_t bits_ = 0;
};

// One physical line of a decompiled function.
struct SourceLine {
  int index = 0;  // 1-based, contiguous within a function
  std::string text;
  ConstructSet constructs;
};

struct DecompiledFunction {
  std::string raw_text;
  std::vector<SourceLine> lines;
  std::set<std::string> variables;

  int line_count() const { return static_cast<int>(lines.size()); }
  const SourceLine& line(int index_1based) const { return lines.at(index_1based - 1); }
};

// Token stream used by construct detection, variable extraction and the
// hash embedder. String/char literals and comments are folded into single
// tokens so operators inside them never trigger construct rules.
enum class TokenKind : std::uint8_t { Identifier, Number, Punct, StringLit, CharLit };

struct Token {
  TokenKind kind;
  std::string text;
  std::size_t offset = 0;  // byte offset in the source line
};

std::vector<Token> tokenize_line(std::string_view line);

// The recognized type tokens: C base types plus IDA/Ghidra synthetic types.
// Extensible at runtime from a file (one token per line), never in code.
class TypeKeywordSet {
 public:
  static const TypeKeywordSet& defaults();
  static TypeKeywordSet with_extra_file(const std::string& path);

  bool contains(std::string_view token) const;
  const std::set<std::string, std::less<>>& tokens() const { return tokens_; }

 private:
  std::set<std::string, std::less<>> tokens_;
};

bool is_control_keyword(std::string_view token);
bool is_c_keyword(std::string_view token);

ConstructSet detect_constructs(std::string_view line_text,
                               const TypeKeywordSet& types = TypeKeywordSet::defaults());

DecompiledFunction parse_function(const std::string& text,
                                  const TypeKeywordSet& types = TypeKeywordSet::defaults());

std::set<std::string> extract_variables(const DecompiledFunction& function,
                                        const TypeKeywordSet& types = TypeKeywordSet::defaults());

// Per-line def/use sets feeding the data-dependence analysis.
struct DefUse {
  std::set<std::string> defs;
  std::set<std::string> uses;
};

DefUse line_def_use(const SourceLine& line, const std::set<std::string>& variables,
                    const TypeKeywordSet& types = TypeKeywordSet::defaults());

// True when `var` occurs as a token anywhere in the line.
bool line_mentions(const SourceLine& line, std::string_view var);

}  // namespace fidelity
