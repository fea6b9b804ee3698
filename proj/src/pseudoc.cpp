#include "fidelity/pseudoc.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>

#include "fidelity/errors.hpp"

namespace fidelity {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Identifier of the form v<digits> or a<digits> (IDA-style locals/args).
bool is_decompiler_local(std::string_view id) {
  if (id.size() < 2 || (id[0] != 'v' && id[0] != 'a')) return false;
  return std::all_of(id.begin() + 1, id.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

const std::set<std::string, std::less<>>& control_keywords() {
  static const std::set<std::string, std::less<>> kw = {
      "if", "else", "for", "while", "do", "switch", "case", "default",
      "return", "break", "continue", "goto", "sizeof",
  };
  return kw;
}

const std::set<std::string, std::less<>>& other_keywords() {
  static const std::set<std::string, std::less<>> kw = {
      "struct", "union", "enum", "const", "static", "volatile", "register",
      "extern", "typedef", "inline", "restrict",
      // calling-convention and annotation tokens common in decompiler output
      "__fastcall", "__cdecl", "__stdcall", "__thiscall", "__usercall",
      "__userpurge", "__noreturn", "__golang",
  };
  return kw;
}

}  // namespace

const char* to_string(ConstructKind kind) {
  switch (kind) {
    case ConstructKind::Assignment: return "assignment";
    case ConstructKind::Addition: return "addition";
    case ConstructKind::VariableDefinition: return "variable_definition";
    case ConstructKind::Return: return "return";
    case ConstructKind::Loop: return "loop";
    case ConstructKind::Conditional: return "conditional";
    case ConstructKind::FunctionCall: return "function_call";
    case ConstructKind::TypeMention: return "type";
  }
  return "?";
}

int ConstructSet::size() const {
  int n = 0;
  for (auto k : all_construct_kinds())
    if (contains(k)) ++n;
  return n;
}

std::vector<ConstructKind> ConstructSet::kinds() const {
  std::vector<ConstructKind> out;
  for (auto k : all_construct_kinds())
    if (contains(k)) out.push_back(k);
  return out;
}

std::vector<Token> tokenize_line(std::string_view line) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  const std::size_t n = line.size();
  while (i < n) {
    char c = line[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    // Comments: // to end of line; /* ... */ within the line (an
    // unterminated /* swallows the rest of the line).
    if (c == '/' && i + 1 < n && line[i + 1] == '/') break;
    if (c == '/' && i + 1 < n && line[i + 1] == '*') {
      std::size_t close = line.find("*/", i + 2);
      if (close == std::string_view::npos) break;
      i = close + 2;
      continue;
    }
    if (c == '"' || c == '\'') {
      const char quote = c;
      std::size_t j = i + 1;
      while (j < n) {
        if (line[j] == '\\' && j + 1 < n) {
          j += 2;
          continue;
        }
        if (line[j] == quote) break;
        ++j;
      }
      std::size_t end = (j < n) ? j + 1 : n;
      tokens.push_back({quote == '"' ? TokenKind::StringLit : TokenKind::CharLit,
                        std::string(line.substr(i, end - i)), i});
      i = end;
      continue;
    }
    if (is_ident_start(c)) {
      std::size_t j = i + 1;
      while (j < n && is_ident_char(line[j])) ++j;
      tokens.push_back({TokenKind::Identifier, std::string(line.substr(i, j - i)), i});
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i + 1;
      while (j < n && (is_ident_char(line[j]) || line[j] == '.')) ++j;  // 0x1F, 1.5f, 10LL
      tokens.push_back({TokenKind::Number, std::string(line.substr(i, j - i)), i});
      i = j;
      continue;
    }
    tokens.push_back({TokenKind::Punct, std::string(1, c), i});
    ++i;
  }
  return tokens;
}

const TypeKeywordSet& TypeKeywordSet::defaults() {
  static const TypeKeywordSet instance = [] {
    TypeKeywordSet s;
    s.tokens_ = {
        // C base types
        "int", "char", "void", "float", "double", "long", "short",
        "unsigned", "signed", "bool", "_Bool", "wchar_t", "size_t", "ssize_t",
        "int8_t", "int16_t", "int32_t", "int64_t",
        "uint8_t", "uint16_t", "uint32_t", "uint64_t", "intptr_t", "uintptr_t",
        // IDA
        "__int8", "__int16", "__int32", "__int64",
        "_BYTE", "_WORD", "_DWORD", "_QWORD", "_OWORD", "_TBYTE", "_UNKNOWN",
        "_BOOL1", "_BOOL2", "_BOOL4", "_BOOL8",
        // Ghidra
        "byte", "word", "dword", "qword", "undefined",
        "undefined1", "undefined2", "undefined4", "undefined8",
        "uint", "ulong", "ushort", "uchar",
        // tag keywords introduce a type
        "struct", "union", "enum",
    };
    return s;
  }();
  return instance;
}

TypeKeywordSet TypeKeywordSet::with_extra_file(const std::string& path) {
  TypeKeywordSet s = defaults();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open type keyword file: " + path);
  std::string line;
  while (std::getline(in, line)) {
    auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos) continue;
    auto end = line.find_last_not_of(" \t\r");
    std::string tok = line.substr(start, end - start + 1);
    if (!tok.empty() && tok[0] != '#') s.tokens_.insert(tok);
  }
  return s;
}

bool TypeKeywordSet::contains(std::string_view token) const {
  return tokens_.find(token) != tokens_.end();
}

bool is_control_keyword(std::string_view token) {
  return control_keywords().find(token) != control_keywords().end();
}

bool is_c_keyword(std::string_view token) {
  return is_control_keyword(token) ||
         other_keywords().find(token) != other_keywords().end();
}

namespace {

// An '=' at position i of the raw text is an assignment operator unless it
// belongs to ==, !=, <= or >=. Compound assignments (+=, <<=, >>=) count.
bool line_has_assignment_op(const std::vector<Token>& tokens, std::string_view line) {
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t].kind != TokenKind::Punct || tokens[t].text != "=") continue;
    std::size_t i = tokens[t].offset;
    if (i + 1 < line.size() && line[i + 1] == '=') continue;  // == (first char)
    if (i > 0) {
      char prev = line[i - 1];
      if (prev == '=' || prev == '!') continue;  // ==, !=
      if (prev == '<' || prev == '>') {
        // <= / >= are comparisons, <<= / >>= are assignments
        if (!(i > 1 && line[i - 2] == prev)) continue;
      }
    }
    return true;
  }
  return false;
}

bool token_is_type(const Token& tok, const TypeKeywordSet& types) {
  return tok.kind == TokenKind::Identifier && types.contains(tok.text);
}

}  // namespace

ConstructSet detect_constructs(std::string_view line_text, const TypeKeywordSet& types) {
  ConstructSet out;
  const std::vector<Token> tokens = tokenize_line(line_text);
  if (tokens.empty()) return out;

  if (line_has_assignment_op(tokens, line_text)) out.insert(ConstructKind::Assignment);

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& tok = tokens[i];
    if (tok.kind == TokenKind::Punct) {
      if (tok.text == "+") out.insert(ConstructKind::Addition);  // +, +=, ++
      if (tok.text == "?") out.insert(ConstructKind::Conditional);
      continue;
    }
    if (tok.kind != TokenKind::Identifier) continue;
    const std::string& id = tok.text;

    if (id == "return") out.insert(ConstructKind::Return);
    if (id == "for" || id == "while" || id == "do") out.insert(ConstructKind::Loop);
    if (id == "if" || id == "else" || id == "switch" || id == "case")
      out.insert(ConstructKind::Conditional);

    if (types.contains(id)) {
      out.insert(ConstructKind::TypeMention);
      // type keyword followed (through type tokens, stars and conventions)
      // by a plain identifier: a declaration
      std::size_t j = i + 1;
      while (j < tokens.size() &&
             (token_is_type(tokens[j], types) ||
              (tokens[j].kind == TokenKind::Punct && tokens[j].text == "*") ||
              (tokens[j].kind == TokenKind::Identifier && is_c_keyword(tokens[j].text))))
        ++j;
      if (j < tokens.size() && tokens[j].kind == TokenKind::Identifier &&
          !is_c_keyword(tokens[j].text) && !types.contains(tokens[j].text))
        out.insert(ConstructKind::VariableDefinition);
    }

    // identifier immediately followed by ( and not a keyword: a call
    if (!is_c_keyword(id) && !types.contains(id) && i + 1 < tokens.size() &&
        tokens[i + 1].kind == TokenKind::Punct && tokens[i + 1].text == "(")
      out.insert(ConstructKind::FunctionCall);
  }

  // pointer-star directly after a type token also mentions a type; covered
  // by the type keyword itself above, so nothing extra to do here.
  return out;
}

DecompiledFunction parse_function(const std::string& text, const TypeKeywordSet& types) {
  if (text.empty()) throw EmptyFunction();

  DecompiledFunction fn;
  fn.raw_text = text;

  std::size_t start = 0;
  int index = 1;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    std::string line = (nl == std::string::npos) ? text.substr(start)
                                                 : text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    fn.lines.push_back({index++, line, detect_constructs(line, types)});
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  // A trailing newline produces a final empty segment; keep interior blank
  // lines but drop that artifact.
  if (fn.lines.size() > 1 && fn.lines.back().text.empty()) fn.lines.pop_back();

  fn.variables = extract_variables(fn, types);
  return fn;
}

namespace {

struct DeclScan {
  std::set<std::string> targets;
  std::set<std::string> other_idents;
};

// Collects declarator targets of a declaration line: after the leading type
// tokens, identifiers at declarator position, comma-separated, skipping
// array extents and initializers.
DeclScan scan_declaration(const std::vector<Token>& tokens, const TypeKeywordSet& types) {
  DeclScan out;
  std::size_t i = 0;
  // leading qualifiers/types (incl. struct/union/enum tag names)
  bool saw_type = false;
  while (i < tokens.size()) {
    const Token& t = tokens[i];
    if (token_is_type(t, types)) {
      saw_type = true;
      bool tag = t.text == "struct" || t.text == "union" || t.text == "enum";
      ++i;
      if (tag && i < tokens.size() && tokens[i].kind == TokenKind::Identifier) ++i;
      continue;
    }
    if (t.kind == TokenKind::Identifier && is_c_keyword(t.text)) {
      ++i;
      continue;
    }
    if (t.kind == TokenKind::Punct && t.text == "*") {
      ++i;
      continue;
    }
    break;
  }
  if (!saw_type) return out;

  int depth = 0;
  bool expect_target = true;
  for (; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    if (t.kind == TokenKind::Punct) {
      if (t.text == "(" || t.text == "[") ++depth;
      else if (t.text == ")" || t.text == "]") --depth;
      else if (t.text == "," && depth == 0) expect_target = true;
      else if (t.text == "*" && depth == 0) continue;
      continue;
    }
    if (t.kind != TokenKind::Identifier) continue;
    if (is_c_keyword(t.text) || types.contains(t.text)) continue;
    bool is_call = i + 1 < tokens.size() && tokens[i + 1].kind == TokenKind::Punct &&
                   tokens[i + 1].text == "(";
    if (expect_target && depth == 0 && !is_call) {
      out.targets.insert(t.text);
      expect_target = false;
    } else if (!is_call) {
      out.other_idents.insert(t.text);
    }
  }
  return out;
}

// Positions of top-level assignment operators (token index of the '=' that
// line_has_assignment_op accepts), at paren/bracket depth 0.
std::vector<std::size_t> assignment_positions(const std::vector<Token>& tokens,
                                              std::string_view line) {
  std::vector<std::size_t> out;
  int depth = 0;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const Token& tok = tokens[t];
    if (tok.kind != TokenKind::Punct) continue;
    if (tok.text == "(" || tok.text == "[") ++depth;
    else if (tok.text == ")" || tok.text == "]") --depth;
    if (tok.text != "=" || depth != 0) continue;
    std::size_t i = tok.offset;
    if (i + 1 < line.size() && line[i + 1] == '=') continue;
    if (i > 0) {
      char prev = line[i - 1];
      if (prev == '=' || prev == '!') continue;
      if ((prev == '<' || prev == '>') && !(i > 1 && line[i - 2] == prev)) continue;
    }
    out.push_back(t);
  }
  return out;
}

bool is_compound_assign(const Token& eq, std::string_view line) {
  std::size_t i = eq.offset;
  if (i == 0) return false;
  char prev = line[i - 1];
  return prev == '+' || prev == '-' || prev == '*' || prev == '/' || prev == '%' ||
         prev == '&' || prev == '|' || prev == '^' || prev == '<' || prev == '>';
}

// Base identifier of the token run [begin, end): the first plain identifier
// that is not a call head.
std::optional<std::string> base_identifier(const std::vector<Token>& tokens,
                                           std::size_t begin, std::size_t end,
                                           const TypeKeywordSet& types) {
  for (std::size_t i = begin; i < end; ++i) {
    const Token& t = tokens[i];
    if (t.kind != TokenKind::Identifier) continue;
    if (is_c_keyword(t.text) || types.contains(t.text)) continue;
    if (i + 1 < end && tokens[i + 1].kind == TokenKind::Punct && tokens[i + 1].text == "(")
      continue;
    return t.text;
  }
  return std::nullopt;
}

}  // namespace

std::set<std::string> extract_variables(const DecompiledFunction& function,
                                        const TypeKeywordSet& types) {
  std::set<std::string> vars;
  for (const SourceLine& line : function.lines) {
    const std::vector<Token> tokens = tokenize_line(line.text);
    if (tokens.empty()) continue;

    if (line.constructs.contains(ConstructKind::VariableDefinition)) {
      DeclScan decl = scan_declaration(tokens, types);
      vars.insert(decl.targets.begin(), decl.targets.end());
    }

    // assignment left-hand sides: base identifier of each run preceding a
    // top-level assignment operator
    std::vector<std::size_t> assigns = assignment_positions(tokens, line.text);
    std::size_t run_begin = 0;
    for (std::size_t pos : assigns) {
      if (auto id = base_identifier(tokens, run_begin, pos, types)) vars.insert(*id);
      run_begin = pos + 1;
    }

    // decompiler-style locals anywhere, unless they head a call
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const Token& t = tokens[i];
      if (t.kind != TokenKind::Identifier || !is_decompiler_local(t.text)) continue;
      bool is_call = i + 1 < tokens.size() && tokens[i + 1].kind == TokenKind::Punct &&
                     tokens[i + 1].text == "(";
      if (!is_call) vars.insert(t.text);
    }
  }
  return vars;
}

DefUse line_def_use(const SourceLine& line, const std::set<std::string>& variables,
                    const TypeKeywordSet& types) {
  DefUse du;
  const std::vector<Token> tokens = tokenize_line(line.text);
  if (tokens.empty()) return du;

  auto is_var = [&](const std::string& id) { return variables.count(id) > 0; };

  std::set<std::size_t> def_token_positions;

  if (line.constructs.contains(ConstructKind::VariableDefinition)) {
    DeclScan decl = scan_declaration(tokens, types);
    for (const std::string& d : decl.targets) {
      if (!is_var(d)) continue;
      du.defs.insert(d);
      // first occurrence is the declarator, not a use
      for (std::size_t i = 0; i < tokens.size(); ++i)
        if (tokens[i].kind == TokenKind::Identifier && tokens[i].text == d) {
          def_token_positions.insert(i);
          break;
        }
    }
  }

  std::vector<std::size_t> assigns = assignment_positions(tokens, line.text);
  std::size_t run_begin = 0;
  for (std::size_t pos : assigns) {
    if (auto id = base_identifier(tokens, run_begin, pos, types)) {
      if (is_var(*id)) {
        du.defs.insert(*id);
        for (std::size_t i = run_begin; i < pos; ++i)
          if (tokens[i].kind == TokenKind::Identifier && tokens[i].text == *id) {
            def_token_positions.insert(i);
            break;
          }
        // compound assignment reads the old value too
        if (is_compound_assign(tokens[pos], line.text)) du.uses.insert(*id);
      }
    }
    run_begin = pos + 1;
  }

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    if (t.kind != TokenKind::Identifier || !is_var(t.text)) continue;
    if (def_token_positions.count(i)) continue;
    du.uses.insert(t.text);
  }
  return du;
}

bool line_mentions(const SourceLine& line, std::string_view var) {
  for (const Token& t : tokenize_line(line.text))
    if (t.kind == TokenKind::Identifier && t.text == var) return true;
  return false;
}

}  // namespace fidelity
