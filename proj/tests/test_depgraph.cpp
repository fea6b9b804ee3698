#include <doctest.h>

#include <set>

#include "fidelity/depgraph.hpp"
#include "fidelity/serial_ref.hpp"
#include "support/synthetic.hpp"

using namespace fidelity;

TEST_CASE("cfg for straight-line code") {
  DecompiledFunction fn = parse_function("a = 1;\nb = 2;\nc = 3;");
  Cfg cfg = build_cfg(fn);
  CHECK(cfg.has_edge(cfg.entry(), 1));
  CHECK(cfg.has_edge(1, 2));
  CHECK(cfg.has_edge(2, 3));
  CHECK(cfg.has_edge(3, cfg.exit_node()));
}

TEST_CASE("cfg for a braceless if") {
  DecompiledFunction fn = parse_function("if (x)\n a=1;\nb=2;");
  Cfg cfg = build_cfg(fn);
  CHECK(cfg.has_edge(1, 2));
  CHECK(cfg.has_edge(1, 3));
  CHECK(cfg.has_edge(2, 3));
}

TEST_CASE("return mid-function edges only to exit") {
  DecompiledFunction fn = parse_function("a = 1;\nreturn 0;\nb = 2;");
  Cfg cfg = build_cfg(fn);
  CHECK(cfg.successors(2) == std::vector<int>{cfg.exit_node()});
}

TEST_CASE("if/else blocks form a diamond") {
  DecompiledFunction fn = parse_function(
      "if ( x > 0 ) {\n  a = 1;\n} else {\n  a = 2;\n}\nb = a;");
  Cfg cfg = build_cfg(fn);
  CHECK(cfg.has_edge(1, 2));          // then
  CHECK(cfg.has_edge(1, 3));          // else line
  CHECK(cfg.has_edge(2, 6));          // skip over the else block
  CHECK_FALSE(cfg.has_edge(2, 3));
  CHECK(cfg.has_edge(3, 4));
  CHECK(cfg.has_edge(5, 6));
}

TEST_CASE("loops get back-edges") {
  DecompiledFunction fn = parse_function("while ( i < 3 ) {\n  i = i + 1;\n}\nreturn i;");
  Cfg cfg = build_cfg(fn);
  CHECK(cfg.has_edge(1, 2));  // body
  CHECK(cfg.has_edge(1, 4));  // exit the loop
  CHECK(cfg.has_edge(3, 1));  // back-edge
}

TEST_CASE("resolvable goto edges to its label") {
  DecompiledFunction fn =
      parse_function("a = 1;\ngoto done;\nb = 2;\ndone:\nreturn a;");
  Cfg cfg = build_cfg(fn);
  CHECK(cfg.has_edge(2, 4));
  CHECK_FALSE(cfg.has_edge(2, 3));

  DecompiledFunction dangling = parse_function("goto nowhere;\nx = 1;");
  Cfg degraded = build_cfg(dangling);
  CHECK(degraded.has_edge(1, 2));  // fall-through
  CHECK_FALSE(degraded.warnings.empty());
}

TEST_CASE("unbalanced braces degrade to sequential flow with a warning") {
  DecompiledFunction fn = parse_function("if (x) {\n a = 1;\nb = 2;");
  Cfg cfg = build_cfg(fn);
  CHECK_FALSE(cfg.warnings.empty());
  CHECK(cfg.has_edge(1, 2));
  CHECK(cfg.has_edge(2, 3));
}

namespace {

// Hand-wired fixture CFGs for the dominator/CDG checks.
Cfg straight_line_cfg() {
  Cfg cfg(3);
  cfg.add_edge(cfg.entry(), 1);
  cfg.add_edge(1, 2);
  cfg.add_edge(2, 3);
  cfg.add_edge(3, cfg.exit_node());
  return cfg;
}

Cfg diamond_cfg() {
  // 1 branches to 2 and 3; both join at 4
  Cfg cfg(4);
  cfg.add_edge(cfg.entry(), 1);
  cfg.add_edge(1, 2);
  cfg.add_edge(1, 3);
  cfg.add_edge(2, 4);
  cfg.add_edge(3, 4);
  cfg.add_edge(4, cfg.exit_node());
  return cfg;
}

Cfg loop_cfg() {
  // 1 is the condition, 2 the body, 3 the exit statement
  Cfg cfg(3);
  cfg.add_edge(cfg.entry(), 1);
  cfg.add_edge(1, 2);
  cfg.add_edge(1, 3);
  cfg.add_edge(2, 1);
  cfg.add_edge(3, cfg.exit_node());
  return cfg;
}

}  // namespace

TEST_CASE("post-dominators on the textbook fixtures") {
  Cfg straight = straight_line_cfg();
  auto pdom = compute_post_dominators(straight);
  CHECK(pdom[1] == std::set<int>{1, 2, 3, straight.exit_node()});
  for (int node = 0; node < straight.node_count(); ++node)
    CHECK(pdom[node].count(straight.exit_node()) == 1);

  Cfg diamond = diamond_cfg();
  auto dpdom = compute_post_dominators(diamond);
  CHECK(dpdom[1].count(4) == 1);       // join post-dominates the branch head
  CHECK(dpdom[1].count(2) == 0);
  CHECK(dpdom[2] == std::set<int>{2, 4, diamond.exit_node()});
}

TEST_CASE("control dependence on the textbook fixtures") {
  auto cdg_of = [](const Cfg& cfg) { return build_cdg(cfg, compute_post_dominators(cfg)); };

  CHECK(cdg_of(straight_line_cfg()).empty());

  std::set<std::pair<int, int>> diamond_expected = {{1, 2}, {1, 3}};
  CHECK(cdg_of(diamond_cfg()) == diamond_expected);

  // loop: body depends on the condition, and the condition on itself
  std::set<std::pair<int, int>> loop_expected = {{1, 1}, {1, 2}};
  CHECK(cdg_of(loop_cfg()) == loop_expected);
}

TEST_CASE("data dependences follow reaching definitions") {
  std::set<DdgEdge> simple = build_ddg(parse_function("a=1;\nb=a;"));
  CHECK(simple == std::set<DdgEdge>{{1, 2, "a"}});

  std::set<DdgEdge> killed = build_ddg(parse_function("a=1;\na=2;\nb=a;"));
  CHECK(killed == std::set<DdgEdge>{{2, 3, "a"}});

  CHECK(build_ddg(parse_function("a=1;")).empty());
}

TEST_CASE("definitions reach around branches but not through kills") {
  // inside the branch a is redefined; both definitions reach the join
  DecompiledFunction fn =
      parse_function("a = 1;\nif ( x > 0 ) {\n  a = 2;\n}\nb = a;");
  std::set<DdgEdge> ddg = build_ddg(fn);
  CHECK(ddg.count({1, 5, "a"}) == 1);
  CHECK(ddg.count({3, 5, "a"}) == 1);
}

TEST_CASE("pdg predecessors answer reverse adjacency queries") {
  DecompiledFunction fn = parse_function("a = 1;\nb = a;\nc = b;");
  DependenceGraph g = build_dependence_graph(fn);
  CHECK(g.predecessors(2) == std::vector<int>{1});
  CHECK(g.predecessors(3) == std::vector<int>{2});
  CHECK(g.predecessors(1).empty());
}

TEST_CASE("pdg is the union of cdg and ddg") {
  synthetic::Rng rng(23);
  for (int run = 0; run < 20; ++run) {
    DecompiledFunction fn = parse_function(synthetic::make_function(rng));
    DependenceGraph g = build_dependence_graph(fn);
    std::set<std::pair<int, int>> expected = g.cdg_edges;
    for (const DdgEdge& e : g.ddg_edges) expected.emplace(e.from, e.to);
    CHECK(g.pdg_edges == expected);
    // dropping a non-empty component strictly shrinks the union unless the
    // other side already covers it
    if (!g.cdg_edges.empty() && !g.ddg_edges.empty())
      CHECK(g.pdg_edges.size() <= g.cdg_edges.size() + g.ddg_edges.size());
  }
}

TEST_CASE("variable dependency analysis on the documented examples") {
  DecompiledFunction fn = parse_function("int a=1;\nint b=a+2;\nreturn b;");
  DependencyMap map = variable_dependency_analysis(fn);
  REQUIRE(map.count("b"));
  std::set<int> indices;
  for (const DependentStatement& s : map["b"]) indices.insert(s.index);
  CHECK(indices.count(1) == 1);
  CHECK(indices.count(2) == 1);

  // declared but never used: no dependent statements
  DependencyMap lonely = variable_dependency_analysis(parse_function("int x;"));
  REQUIRE(lonely.count("x"));
  CHECK(lonely["x"].empty());
}

TEST_CASE("cyclic dependences terminate with both statements collected") {
  // inside a loop the two assignments feed each other through the back-edge
  DecompiledFunction fn = parse_function(
      "while ( a > 0 ) {\n  a = b;\n  b = a;\n}\nreturn a;");
  DependencyMap map = variable_dependency_analysis(fn);
  for (const char* var : {"a", "b"}) {
    REQUIRE(map.count(var));
    std::set<int> indices;
    for (const DependentStatement& s : map[var]) indices.insert(s.index);
    CHECK(indices.count(2) == 1);
    CHECK(indices.count(3) == 1);
  }

  // straight-line mutual assignment has no cycle under reaching definitions
  // (the later definition cannot flow backwards) but must still terminate
  DependencyMap straight = variable_dependency_analysis(parse_function("a=b;\nb=a;"));
  std::set<int> a_indices;
  for (const DependentStatement& s : straight["a"]) a_indices.insert(s.index);
  CHECK(a_indices == std::set<int>{1});
}

TEST_CASE("trace agrees with the closure oracle on random functions") {
  synthetic::Rng rng(31);
  for (int run = 0; run < 60; ++run) {
    DecompiledFunction fn = parse_function(synthetic::make_function(rng));
    DependenceGraph graph = build_dependence_graph(fn);
    for (const std::string& var : fn.variables) {
      std::set<int> traced;
      for (const DependentStatement& s : trace_variable(fn, graph, var))
        traced.insert(s.index);
      // duplicate texts are removed from the public list, so compare via
      // the texts the oracle's statements carry
      std::set<std::string> traced_texts;
      for (const DependentStatement& s : trace_variable(fn, graph, var))
        traced_texts.insert(s.text);
      std::set<int> closure = serial::dependency_closure(fn, graph, var);
      std::set<std::string> closure_texts;
      for (int idx : closure) closure_texts.insert(fn.line(idx).text);
      CHECK(traced_texts == closure_texts);
      for (int idx : traced) CHECK(closure.count(idx) == 1);
    }
  }
}

TEST_CASE("dependency map values are in source order without duplicate texts") {
  synthetic::Rng rng(37);
  for (int run = 0; run < 20; ++run) {
    DecompiledFunction fn = parse_function(synthetic::make_function(rng));
    DependencyMap map = variable_dependency_analysis(fn);
    for (const auto& [var, statements] : map) {
      std::set<std::string> seen;
      for (std::size_t i = 0; i < statements.size(); ++i) {
        if (i > 0) CHECK(statements[i - 1].index < statements[i].index);
        CHECK(seen.insert(statements[i].text).second);
        CHECK(statements[i].text == fn.line(statements[i].index).text);
      }
    }
  }
}

TEST_CASE("dot dumps mention every line") {
  DecompiledFunction fn = parse_function("a = 1;\nb = a;");
  Cfg cfg = build_cfg(fn);
  std::string dot = cfg_to_dot(cfg, fn);
  CHECK(dot.find("digraph cfg") != std::string::npos);
  CHECK(dot.find("a = 1;") != std::string::npos);
  DependenceGraph g = build_dependence_graph(fn, cfg);
  std::string pdg = pdg_to_dot(g, fn);
  CHECK(pdg.find("label=\"a\"") != std::string::npos);
}
