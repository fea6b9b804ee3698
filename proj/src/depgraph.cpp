#include "fidelity/depgraph.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string_view>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fidelity {

Cfg::Cfg(int line_count)
    : line_count_(line_count), succ_(line_count + 2), pred_(line_count + 2) {}

void Cfg::add_edge(int from, int to) {
  if (from < 0 || from >= node_count() || to < 0 || to >= node_count()) return;
  if (from == to && from == entry()) return;
  auto& s = succ_[from];
  if (std::find(s.begin(), s.end(), to) != s.end()) return;
  s.push_back(to);
  pred_[to].push_back(from);
}

bool Cfg::has_edge(int from, int to) const {
  const auto& s = succ_.at(from);
  return std::find(s.begin(), s.end(), to) != s.end();
}

std::vector<std::pair<int, int>> Cfg::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int u = 0; u < node_count(); ++u)
    for (int v : succ_[u]) out.emplace_back(u, v);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

bool line_is_blank(const SourceLine& line) {
  return line.text.find_first_not_of(" \t\r") == std::string::npos;
}

bool has_token(const SourceLine& line, std::string_view word) {
  for (const Token& t : tokenize_line(line.text))
    if (t.kind == TokenKind::Identifier && t.text == word) return true;
  return false;
}

// `label:` at the start of the line (excluding case/default).
std::optional<std::string> leading_label(const SourceLine& line) {
  std::vector<Token> toks = tokenize_line(line.text);
  if (toks.size() < 2) return std::nullopt;
  if (toks[0].kind != TokenKind::Identifier || is_c_keyword(toks[0].text))
    return std::nullopt;
  if (toks[1].kind == TokenKind::Punct && toks[1].text == ":") {
    // not a ternary branch: the colon must directly follow the identifier
    if (toks.size() == 2 || !(toks[2].kind == TokenKind::Punct && toks[2].text == ":"))
      return toks[0].text;
  }
  return std::nullopt;
}

std::optional<std::string> goto_target(const SourceLine& line) {
  std::vector<Token> toks = tokenize_line(line.text);
  for (std::size_t i = 0; i + 1 < toks.size(); ++i)
    if (toks[i].kind == TokenKind::Identifier && toks[i].text == "goto" &&
        toks[i + 1].kind == TokenKind::Identifier)
      return toks[i + 1].text;
  return std::nullopt;
}

struct BraceInfo {
  std::vector<int> opens;   // per line: count of '{'
  std::vector<int> closes;  // per line: count of '}'
  bool balanced = true;
};

BraceInfo scan_braces(const DecompiledFunction& fn) {
  BraceInfo info;
  info.opens.resize(fn.lines.size() + 1, 0);
  info.closes.resize(fn.lines.size() + 1, 0);
  long depth = 0;
  for (const SourceLine& line : fn.lines) {
    for (const Token& t : tokenize_line(line.text)) {
      if (t.kind != TokenKind::Punct) continue;
      if (t.text == "{") {
        ++info.opens[line.index];
        ++depth;
      } else if (t.text == "}") {
        ++info.closes[line.index];
        --depth;
      }
    }
  }
  info.balanced = depth == 0;
  return info;
}

}  // namespace

Cfg build_cfg(const DecompiledFunction& function) {
  const int n = function.line_count();
  Cfg cfg(n);
  if (n == 0) return cfg;

  cfg.add_edge(cfg.entry(), 1);

  BraceInfo braces = scan_braces(function);
  if (!braces.balanced) {
    // Messy decompiler output: fall back to straight-line flow.
    cfg.warnings.push_back("unbalanced braces; falling back to sequential flow");
    for (int i = 1; i < n; ++i) cfg.add_edge(i, i + 1);
    cfg.add_edge(n, cfg.exit_node());
    return cfg;
  }

  std::map<std::string, int> label_lines;
  for (const SourceLine& line : function.lines)
    if (auto lbl = leading_label(line)) label_lines[*lbl] = line.index;

  auto next_nonblank = [&](int i) {
    int j = i + 1;
    while (j <= n && line_is_blank(function.line(j))) ++j;
    return j;  // may be n + 1
  };

  // Block extent for a construct head: the brace block opened on the head
  // line (or the immediately following line), matched token by token so
  // `} else {` lines resolve correctly; otherwise the single next statement.
  auto block_end = [&](int head) -> std::pair<int, int> {
    int open_line = 0;
    if (braces.opens[head] > 0) {
      open_line = head;
    } else {
      int j = next_nonblank(head);
      if (j <= n && braces.opens[j] > 0) open_line = j;
    }
    if (open_line == 0) {
      int j = next_nonblank(head);
      if (j > n) return {0, 0};
      return {j, j};  // single-statement fallback
    }
    int depth = 0;
    bool seen_open = false;
    for (int j = open_line; j <= n; ++j) {
      for (const Token& t : tokenize_line(function.line(j).text)) {
        if (t.kind != TokenKind::Punct) continue;
        if (t.text == "{") {
          ++depth;
          seen_open = true;
        } else if (t.text == "}" && seen_open) {
          if (--depth == 0)
            return {open_line == head ? head + 1 : open_line + 1, j};
        }
      }
    }
    return {open_line + 1, n};
  };

  std::vector<bool> handled_tail(n + 2, false);
  std::map<int, int> redirect;  // then-block end -> join past the else block

  for (int i = 1; i <= n; ++i) {
    const SourceLine& line = function.line(i);
    const int next = i + 1 <= n ? i + 1 : cfg.exit_node();
    const bool conditional_guard = has_token(line, "if");

    if (line.constructs.contains(ConstructKind::Return)) {
      cfg.add_edge(i, cfg.exit_node());
      if (conditional_guard) cfg.add_edge(i, next);  // `if (x) return y;`
      continue;
    }

    if (auto target = goto_target(line)) {
      auto it = label_lines.find(*target);
      if (it != label_lines.end()) {
        cfg.add_edge(i, it->second);
        if (conditional_guard) cfg.add_edge(i, next);
      } else {
        cfg.warnings.push_back("unresolved goto " + *target + " at line " +
                               std::to_string(i) + "; treated as fall-through");
        cfg.add_edge(i, next);
      }
      continue;
    }

    bool is_do_head = has_token(line, "do") && !has_token(line, "while");
    bool is_loop_head =
        (has_token(line, "for") || has_token(line, "while")) && !handled_tail[i];
    bool is_if_head = conditional_guard && !has_token(line, "else");
    bool is_switch_head = has_token(line, "switch");

    if (is_do_head) {
      auto [first, last] = block_end(i);
      cfg.add_edge(i, next);
      if (last > 0) {
        cfg.add_edge(last, i);  // back-edge from the do-while tail
        cfg.add_edge(last, last + 1 <= n ? last + 1 : cfg.exit_node());
        handled_tail[last] = true;
      }
      continue;
    }

    if (is_loop_head) {
      // `while (x);` with no body: condition loops on itself
      std::string trimmed = line.text;
      while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back())))
        trimmed.pop_back();
      bool empty_body = !trimmed.empty() && trimmed.back() == ';' && braces.opens[i] == 0;
      if (empty_body) {
        cfg.add_edge(i, i);
        cfg.add_edge(i, next);
        continue;
      }
      auto [first, last] = block_end(i);
      cfg.add_edge(i, next);  // into the body
      if (last > 0) {
        cfg.add_edge(last, i);  // back-edge
        cfg.add_edge(i, last + 1 <= n ? last + 1 : cfg.exit_node());  // loop exit
      } else {
        cfg.add_edge(i, cfg.exit_node());
      }
      continue;
    }

    if (is_if_head || is_switch_head) {
      auto [first, last] = block_end(i);
      cfg.add_edge(i, next);  // taken branch
      if (last == 0) {
        cfg.add_edge(i, cfg.exit_node());
        continue;
      }
      int after = last + 1;

      // An else adjoining the block takes the false edge. Pure else blocks
      // form a diamond: the then-block end skips past them to the join.
      int else_line = 0;
      bool else_is_chain = false;  // `else if`: let it branch on its own
      if (after <= n && has_token(function.line(after), "else")) {
        else_line = after;
        else_is_chain = has_token(function.line(after), "if");
      } else if (last != i && has_token(function.line(last), "else")) {
        else_line = last;  // `} else {` shares the closing line
        else_is_chain = has_token(function.line(last), "if");
      }

      if (else_line == 0) {
        cfg.add_edge(i, after <= n ? after : cfg.exit_node());
      } else if (else_is_chain) {
        cfg.add_edge(i, else_line);
      } else {
        cfg.add_edge(i, else_line);
        auto [efirst, elast] = block_end(else_line);
        int join = elast > 0 ? elast + 1 : else_line + 1;
        int then_end = (else_line == last) ? last - 1 : last;
        if (then_end >= 1 && then_end >= i + 1)
          redirect[then_end] = join <= n ? join : cfg.exit_node();
      }
      continue;
    }

    auto r = redirect.find(i);
    cfg.add_edge(i, r != redirect.end() ? r->second : next);
  }

  // Exit must stay reachable: dangling statements flow there.
  for (int i = 1; i <= n; ++i)
    if (cfg.successors(i).empty()) cfg.add_edge(i, cfg.exit_node());
  return cfg;
}

std::vector<std::set<int>> compute_post_dominators(const Cfg& cfg) {
  const int count = cfg.node_count();
  const int exit = cfg.exit_node();

  // successors with the synthetic dangling->Exit edges applied
  auto succs = [&](int node) {
    std::vector<int> s = cfg.successors(node);
    if (s.empty() && node != exit) s.push_back(exit);
    return s;
  };

  std::set<int> everything;
  for (int i = 0; i < count; ++i) everything.insert(i);

  std::vector<std::set<int>> pdom(count, everything);
  pdom[exit] = {exit};

  bool changed = true;
  while (changed) {
    changed = false;
    for (int node = count - 1; node >= 0; --node) {
      if (node == exit) continue;
      std::set<int> meet;
      bool first = true;
      for (int s : succs(node)) {
        if (first) {
          meet = pdom[s];
          first = false;
        } else {
          std::set<int> tmp;
          std::set_intersection(meet.begin(), meet.end(), pdom[s].begin(), pdom[s].end(),
                                std::inserter(tmp, tmp.begin()));
          meet.swap(tmp);
        }
      }
      meet.insert(node);
      if (meet != pdom[node]) {
        pdom[node] = std::move(meet);
        changed = true;
      }
    }
  }
  return pdom;
}

std::set<std::pair<int, int>> build_cdg(const Cfg& cfg,
                                        const std::vector<std::set<int>>& postdom) {
  std::set<std::pair<int, int>> cdg;
  const int n = cfg.line_count();

  for (int u = 1; u <= n; ++u) {  // virtual Entry excluded
    for (int w : cfg.successors(u)) {
      for (int v = 1; v <= n; ++v) {
        if (!postdom[w].count(v)) continue;               // v post-dominates w
        if (v != u && postdom[u].count(v)) continue;      // v strictly post-dominates u
        cdg.emplace(u, v);
      }
    }
  }
  return cdg;
}

std::set<DdgEdge> build_ddg(const DecompiledFunction& function, const Cfg& cfg) {
  const int n = function.line_count();
  std::set<DdgEdge> ddg;
  if (n == 0 || function.variables.empty()) return ddg;

  std::vector<DefUse> du(n + 1);
  for (int i = 1; i <= n; ++i) du[i] = line_def_use(function.line(i), function.variables);

  // definition sites, one id per (line, var)
  struct DefSite {
    int line;
    std::string var;
  };
  std::vector<DefSite> sites;
  std::map<int, std::vector<int>> gen;                 // line -> site ids
  std::map<std::string, std::vector<int>> sites_of;   // var -> site ids
  for (int i = 1; i <= n; ++i)
    for (const std::string& v : du[i].defs) {
      int id = static_cast<int>(sites.size());
      sites.push_back({i, v});
      gen[i].push_back(id);
      sites_of[v].push_back(id);
    }
  if (sites.empty()) return ddg;

  const std::size_t nsites = sites.size();
  auto make_empty = [&] { return std::vector<char>(nsites, 0); };

  std::vector<std::vector<char>> in(n + 2, make_empty());
  std::vector<std::vector<char>> out(n + 2, make_empty());

  // forward reaching-definitions fixpoint over the CFG
  bool changed = true;
  while (changed) {
    changed = false;
    for (int node = 1; node <= n; ++node) {
      std::vector<char> new_in = make_empty();
      for (int p : cfg.predecessors(node)) {
        if (p == cfg.entry()) continue;
        for (std::size_t s = 0; s < nsites; ++s)
          if (out[p][s]) new_in[s] = 1;
      }
      std::vector<char> new_out = new_in;
      for (const std::string& v : du[node].defs)
        for (int s : sites_of[v]) new_out[s] = 0;  // kill
      for (int s : gen[node]) new_out[s] = 1;
      if (new_in != in[node] || new_out != out[node]) {
        in[node] = std::move(new_in);
        out[node] = std::move(new_out);
        changed = true;
      }
    }
  }

  for (int node = 1; node <= n; ++node)
    for (const std::string& v : du[node].uses)
      for (int s : sites_of[v])
        if (in[node][s]) ddg.insert({sites[s].line, node, v});
  return ddg;
}

std::set<DdgEdge> build_ddg(const DecompiledFunction& function) {
  return build_ddg(function, build_cfg(function));
}

DependenceGraph build_dependence_graph(const DecompiledFunction& function, const Cfg& cfg) {
  DependenceGraph g;
  g.cdg_edges = build_cdg(cfg, compute_post_dominators(cfg));
  g.ddg_edges = build_ddg(function, cfg);
  g.pdg_edges = g.cdg_edges;
  for (const DdgEdge& e : g.ddg_edges) g.pdg_edges.emplace(e.from, e.to);
  return g;
}

DependenceGraph build_dependence_graph(const DecompiledFunction& function) {
  return build_dependence_graph(function, build_cfg(function));
}

std::vector<int> DependenceGraph::predecessors(int node) const {
  std::vector<int> out;
  for (const auto& [from, to] : pdg_edges)
    if (to == node) out.push_back(from);
  return out;
}

namespace {

// Adjacency cache for the trace: preds per statement, variables per
// statement, statements per variable.
struct TraceContext {
  std::vector<std::vector<int>> preds;              // by statement index
  std::vector<std::vector<std::string>> line_vars;  // by statement index
  std::map<std::string, std::vector<int>> mentions; // var -> statements

  TraceContext(const DecompiledFunction& fn, const DependenceGraph& g) {
    const int n = fn.line_count();
    preds.assign(n + 1, {});
    line_vars.assign(n + 1, {});
    for (const auto& [from, to] : g.pdg_edges)
      if (to >= 1 && to <= n && from >= 1 && from <= n) preds[to].push_back(from);
    for (auto& p : preds) std::sort(p.begin(), p.end());
    for (int i = 1; i <= n; ++i)
      for (const std::string& v : fn.variables)
        if (line_mentions(fn.line(i), v)) {
          line_vars[i].push_back(v);
          mentions[v].push_back(i);
        }
  }
};

}  // namespace

namespace {

std::vector<DependentStatement> trace_with_context(const DecompiledFunction& function,
                                                   const TraceContext& ctx,
                                                   const std::string& variable) {
  std::vector<char> visited(function.line_count() + 1, 0);
  std::vector<int> collected;

  std::function<void(const std::string&)> trace_var = [&](const std::string& var) {
    auto it = ctx.mentions.find(var);
    if (it == ctx.mentions.end()) return;
    for (int seed : it->second) {
      for (int pred : ctx.preds[seed]) {
        if (visited[pred]) continue;
        visited[pred] = 1;
        collected.push_back(pred);
        for (const std::string& dep_var : ctx.line_vars[pred]) trace_var(dep_var);
      }
    }
  };
  trace_var(variable);

  // public value: source order, duplicate texts removed
  std::sort(collected.begin(), collected.end());
  std::vector<DependentStatement> out;
  std::set<std::string> seen_texts;
  for (int idx : collected) {
    const std::string& text = function.line(idx).text;
    if (seen_texts.insert(text).second) out.push_back({idx, text});
  }
  return out;
}

}  // namespace

std::vector<DependentStatement> trace_variable(const DecompiledFunction& function,
                                               const DependenceGraph& graph,
                                               const std::string& variable) {
  return trace_with_context(function, TraceContext(function, graph), variable);
}

DependencyMap variable_dependency_analysis(const DecompiledFunction& function,
                                           const DependenceGraph& graph) {
  const TraceContext ctx(function, graph);
  std::vector<std::string> vars(function.variables.begin(), function.variables.end());
  std::vector<std::vector<DependentStatement>> results(vars.size());

  // traces are independent; the context is shared read-only
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < vars.size(); ++i)
    results[i] = trace_with_context(function, ctx, vars[i]);

  DependencyMap map;
  for (std::size_t i = 0; i < vars.size(); ++i) map[vars[i]] = std::move(results[i]);
  return map;
}

DependencyMap variable_dependency_analysis(const DecompiledFunction& function) {
  return variable_dependency_analysis(function, build_dependence_graph(function));
}

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string cfg_to_dot(const Cfg& cfg, const DecompiledFunction& function) {
  std::ostringstream os;
  os << "digraph cfg {\n  node [shape=box];\n";
  os << "  n0 [label=\"Entry\"];\n";
  os << "  n" << cfg.exit_node() << " [label=\"Exit\"];\n";
  for (const SourceLine& line : function.lines)
    os << "  n" << line.index << " [label=\"" << line.index << ": "
       << dot_escape(line.text) << "\"];\n";
  for (const auto& [u, v] : cfg.edges()) os << "  n" << u << " -> n" << v << ";\n";
  os << "}\n";
  return os.str();
}

std::string pdg_to_dot(const DependenceGraph& graph, const DecompiledFunction& function) {
  std::ostringstream os;
  os << "digraph pdg {\n  node [shape=box];\n";
  for (const SourceLine& line : function.lines)
    os << "  n" << line.index << " [label=\"" << line.index << ": "
       << dot_escape(line.text) << "\"];\n";
  for (const auto& [u, v] : graph.cdg_edges)
    os << "  n" << u << " -> n" << v << " [style=dashed, label=\"ctrl\"];\n";
  for (const DdgEdge& e : graph.ddg_edges)
    os << "  n" << e.from << " -> n" << e.to << " [label=\"" << dot_escape(e.var)
       << "\"];\n";
  os << "}\n";
  return os.str();
}

}  // namespace fidelity
