#include "fidelity/serial_ref.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fidelity::serial {

int compute_k_reference(int total_lines, const IntensityParams& params) {
  if (total_lines <= params.min_lines) return total_lines;
  double raw = params.base_lines +
               std::floor(static_cast<double>(total_lines - params.threshold) /
                          static_cast<double>(params.step));
  double capped = std::min(raw, static_cast<double>(params.max_lines));
  return static_cast<int>(std::max(capped, 1.0));
}

std::set<int> dependency_closure(const DecompiledFunction& function,
                                 const DependenceGraph& graph,
                                 const std::string& variable) {
  const int n = function.line_count();

  // reversed adjacency: statement -> its PDG predecessors
  std::vector<std::vector<int>> preds(n + 1);
  for (const auto& [from, to] : graph.pdg_edges)
    if (from >= 1 && from <= n && to >= 1 && to <= n) preds[to].push_back(from);

  // statements mentioning each variable, derived here from scratch
  auto mention_lines = [&](const std::string& var) {
    std::vector<int> out;
    for (int i = 1; i <= n; ++i)
      if (line_mentions(function.line(i), var)) out.push_back(i);
    return out;
  };

  // saturate: V = preds of statements mentioning any reached variable,
  // variables extend through the statements collected so far
  std::set<int> collected;
  std::set<std::string> vars{variable};
  bool changed = true;
  while (changed) {
    changed = false;
    std::set<int> next_collected;
    for (const std::string& var : vars)
      for (int seed : mention_lines(var))
        for (int pred : preds[seed]) next_collected.insert(pred);
    if (next_collected != collected) {
      collected = std::move(next_collected);
      changed = true;
    }
    std::set<std::string> next_vars{variable};
    for (int stmt : collected)
      for (const std::string& var : function.variables)
        if (line_mentions(function.line(stmt), var)) next_vars.insert(var);
    if (next_vars != vars) {
      vars = std::move(next_vars);
      changed = true;
    }
  }
  return collected;
}

std::vector<RetrievalHit> retrieve_reference(const DistortionIndex& index,
                                             const std::string& query_line, int k) {
  const std::size_t n = index.size();
  EmbeddingVector query = index.embedder().embed(query_line);

  std::vector<std::pair<double, int>> scored;
  scored.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const EmbeddingVector& v = index.vector_of(static_cast<int>(i));
    double dot = 0.0;
    const std::size_t dim = std::min(query.values.size(), v.values.size());
    for (std::size_t d = 0; d < dim; ++d)
      dot += static_cast<double>(query.values[d]) * static_cast<double>(v.values[d]);
    scored.emplace_back(dot, static_cast<int>(i));
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  const std::size_t want = std::min<std::size_t>(std::max(k, 0), n);
  std::vector<RetrievalHit> hits;
  for (std::size_t i = 0; i < want; ++i)
    hits.push_back({index.records()[scored[i].second], scored[i].first});
  return hits;
}

double accuracy_reference(long tp, long tn, long fp, long fn) {
  long double correct = static_cast<long double>(tp) + static_cast<long double>(tn);
  long double total = correct + static_cast<long double>(fp) + static_cast<long double>(fn);
  return static_cast<double>(correct / total);
}

bool precision_reference(long tp, long fp, double& out) {
  if (tp + fp == 0) return false;
  out = static_cast<double>(static_cast<long double>(tp) /
                            (static_cast<long double>(tp) + static_cast<long double>(fp)));
  return true;
}

long chunk_count_reference(int line_count, int threshold, int overlap) {
  if (line_count <= 0) return 0;
  if (line_count <= threshold) return 1;
  double step = threshold - overlap;
  return static_cast<long>(std::ceil((line_count - overlap) / step));
}

ConfusionCounts confusion_reference(const std::vector<LinePair>& pairs) {
  ConfusionCounts c;
  for (const LinePair& pair : pairs) {
    bool model_pos = !split_trailing_labels(pair.model_line).labels.empty();
    bool truth_pos = !split_trailing_labels(pair.truth_line).labels.empty();
    if (model_pos && truth_pos) ++c.tp;
    else if (!model_pos && !truth_pos) ++c.tn;
    else if (model_pos) ++c.fp;
    else ++c.fn;
  }
  return c;
}

}  // namespace fidelity::serial
