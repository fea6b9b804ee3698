#include "fidelity/intensity.hpp"

#include <algorithm>
#include <numeric>

namespace fidelity {

FeatureWeights derive_feature_weights(std::span<const DistortionRecord> records,
                                      const TypeKeywordSet& types) {
  FeatureWeights weights;
  std::array<long, kConstructKindCount> counts{};
  long total = 0;
  for (const DistortionRecord& record : records) {
    ConstructSet constructs = detect_constructs(record.code_line, types);
    for (ConstructKind k : constructs.kinds()) {
      ++counts[static_cast<std::size_t>(k)];
      ++total;
    }
  }
  if (total == 0) return weights;  // empty database: all-zero weights
  for (std::size_t i = 0; i < kConstructKindCount; ++i)
    weights.weight[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  weights.all_zero = false;
  return weights;
}

namespace {

// Floor division for possibly negative numerators.
int floor_div(int a, int b) {
  int q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

int compute_k(int total_lines, const IntensityParams& params) {
  if (total_lines <= params.min_lines) return total_lines;
  int k = params.base_lines + floor_div(total_lines - params.threshold, params.step);
  k = std::min(k, params.max_lines);
  return std::max(k, 1);
}

double line_intensity(const SourceLine& line, const FeatureWeights& weights) {
  double sum = 0.0;
  for (ConstructKind k : line.constructs.kinds()) sum += weights.of(k);
  return sum;
}

std::vector<ScoredLine> select_top_k(const DecompiledFunction& function,
                                     const FeatureWeights& weights,
                                     const IntensityParams& params) {
  std::vector<ScoredLine> candidates;
  for (const SourceLine& line : function.lines) {
    double intensity = line_intensity(line, weights);
    if (intensity > 0.0) candidates.push_back({line, intensity});
  }
  if (candidates.empty()) return {};

  // rank: intensity descending, ties by smaller line index
  std::sort(candidates.begin(), candidates.end(), [](const ScoredLine& a, const ScoredLine& b) {
    if (a.intensity != b.intensity) return a.intensity > b.intensity;
    return a.line.index < b.line.index;
  });

  const int k = compute_k(function.line_count(), params);
  const std::size_t want = std::min<std::size_t>(k, candidates.size());

  // construct kinds in descending weight order, enum order on ties
  std::vector<ConstructKind> kind_order;
  for (ConstructKind kind : all_construct_kinds())
    if (weights.of(kind) > 0.0) kind_order.push_back(kind);
  std::stable_sort(kind_order.begin(), kind_order.end(),
                   [&](ConstructKind a, ConstructKind b) {
                     return weights.of(a) > weights.of(b);
                   });

  std::vector<ScoredLine> selected;
  std::vector<char> taken(candidates.size(), 0);
  std::array<bool, kConstructKindCount> covered{};

  // diversity pass: best remaining line for each not-yet-covered kind
  for (ConstructKind kind : kind_order) {
    if (selected.size() >= want) break;
    if (covered[static_cast<std::size_t>(kind)]) continue;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (taken[i] || !candidates[i].line.constructs.contains(kind)) continue;
      taken[i] = 1;
      for (ConstructKind covered_kind : candidates[i].line.constructs.kinds())
        covered[static_cast<std::size_t>(covered_kind)] = true;
      selected.push_back(candidates[i]);
      break;
    }
  }

  // fill by global rank
  for (std::size_t i = 0; i < candidates.size() && selected.size() < want; ++i) {
    if (taken[i]) continue;
    taken[i] = 1;
    selected.push_back(candidates[i]);
  }
  return selected;
}

std::vector<SourceLine> select_random_k(const DecompiledFunction& function, int k,
                                        std::uint64_t seed) {
  const int n = function.line_count();
  k = std::min(k, n);
  if (k <= 0) return {};

  // splitmix64 keeps the sample identical across platforms
  std::uint64_t state = seed;
  auto next = [&state]() {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  };

  std::vector<int> indices(n);
  std::iota(indices.begin(), indices.end(), 1);
  for (int i = 0; i < k; ++i) {
    std::uint64_t j = i + next() % static_cast<std::uint64_t>(n - i);
    std::swap(indices[i], indices[j]);
  }
  indices.resize(k);
  std::sort(indices.begin(), indices.end());

  std::vector<SourceLine> out;
  out.reserve(k);
  for (int idx : indices) out.push_back(function.line(idx));
  return out;
}

std::vector<SourceLine> select_all(const DecompiledFunction& function) {
  return function.lines;
}

}  // namespace fidelity
