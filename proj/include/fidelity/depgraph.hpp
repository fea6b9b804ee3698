#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fidelity/pseudoc.hpp"

namespace fidelity {

// Statement-level control flow graph. Node ids: 0 is the virtual Entry,
// 1..n are the function's lines, n+1 is the virtual Exit.
class Cfg {
 public:
  explicit Cfg(int line_count);

  int line_count() const { return line_count_; }
  int entry() const { return 0; }
  int exit_node() const { return line_count_ + 1; }
  int node_count() const { return line_count_ + 2; }

  void add_edge(int from, int to);
  bool has_edge(int from, int to) const;

  const std::vector<int>& successors(int node) const { return succ_.at(node); }
  const std::vector<int>& predecessors(int node) const { return pred_.at(node); }
  std::vector<std::pair<int, int>> edges() const;

  std::vector<std::string> warnings;

 private:
  int line_count_;
  std::vector<std::vector<int>> succ_;
  std::vector<std::vector<int>> pred_;
};

struct DdgEdge {
  int from = 0;  // defining statement
  int to = 0;    // using statement
  std::string var;

  friend bool operator<(const DdgEdge& a, const DdgEdge& b) {
    return std::tie(a.from, a.to, a.var) < std::tie(b.from, b.to, b.var);
  }
  friend bool operator==(const DdgEdge& a, const DdgEdge& b) {
    return a.from == b.from && a.to == b.to && a.var == b.var;
  }
};

// Control + data dependences over statement indices; pdg = cdg ∪ ddg.
struct DependenceGraph {
  std::set<std::pair<int, int>> cdg_edges;   // (controller, dependent)
  std::set<DdgEdge> ddg_edges;               // (def, use, variable)
  std::set<std::pair<int, int>> pdg_edges;   // union, unlabeled

  // Reverse adjacency over pdg_edges: predecessors(s) = nodes with an edge
  // into s.
  std::vector<int> predecessors(int node) const;
};

struct DependentStatement {
  int index = 0;
  std::string text;

  friend bool operator==(const DependentStatement& a, const DependentStatement& b) {
    return a.index == b.index && a.text == b.text;
  }
};

// Variable -> statements it transitively depends on, source order,
// duplicate texts removed. Indices are retained for testing.
using DependencyMap = std::map<std::string, std::vector<DependentStatement>>;

Cfg build_cfg(const DecompiledFunction& function);

// pdom[n] = set of nodes that post-dominate n (n included). Nodes without
// successors are given a synthetic edge to Exit first.
std::vector<std::set<int>> compute_post_dominators(const Cfg& cfg);

// Ferrante-Ottenstein: v is control-dependent on u iff some edge u->w has
// v post-dominating w and v not strictly post-dominating u. Virtual nodes
// are excluded from the result.
std::set<std::pair<int, int>> build_cdg(const Cfg& cfg,
                                        const std::vector<std::set<int>>& postdom);

// Reaching-definitions def-use chains, flow-sensitive over the CFG.
std::set<DdgEdge> build_ddg(const DecompiledFunction& function, const Cfg& cfg);
std::set<DdgEdge> build_ddg(const DecompiledFunction& function);

DependenceGraph build_dependence_graph(const DecompiledFunction& function);
DependenceGraph build_dependence_graph(const DecompiledFunction& function, const Cfg& cfg);

// The per-variable trace: from every statement mentioning the variable,
// walk PDG predecessors transitively (visited-set guarded); tracing extends
// through the variables of each visited statement.
std::vector<DependentStatement> trace_variable(const DecompiledFunction& function,
                                               const DependenceGraph& graph,
                                               const std::string& variable);

DependencyMap variable_dependency_analysis(const DecompiledFunction& function);
DependencyMap variable_dependency_analysis(const DecompiledFunction& function,
                                           const DependenceGraph& graph);

// DOT renderings for the --dump-graphs diagnostic flag.
std::string cfg_to_dot(const Cfg& cfg, const DecompiledFunction& function);
std::string pdg_to_dot(const DependenceGraph& graph, const DecompiledFunction& function);

}  // namespace fidelity
