#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "fidelity/distortion.hpp"
#include "fidelity/pseudoc.hpp"

namespace fidelity {

// Dynamic selection parameters. Defaults are the evaluated configuration.
struct IntensityParams {
  int min_lines = 5;
  int base_lines = 5;
  int max_lines = 10;
  int threshold = 5;
  int step = 9;
};

// Per-construct weights derived from construct frequencies in the
// distortion database. Weights sum to 1 unless the database is empty
// (or contains no recognizable construct), in which case all are zero.
struct FeatureWeights {
  std::array<double, kConstructKindCount> weight{};
  bool all_zero = true;

  double of(ConstructKind k) const { return weight[static_cast<std::size_t>(k)]; }
};

struct ScoredLine {
  SourceLine line;
  double intensity = 0.0;
};

FeatureWeights derive_feature_weights(std::span<const DistortionRecord> records,
                                      const TypeKeywordSet& types = TypeKeywordSet::defaults());

// k = total_lines when total_lines <= min_lines, otherwise
// min(base_lines + floor((total_lines - threshold) / step), max_lines),
// clamped to at least 1.
int compute_k(int total_lines, const IntensityParams& params);

double line_intensity(const SourceLine& line, const FeatureWeights& weights);

// Top-k query-line selection: candidates are lines with positive intensity,
// ranked by intensity (ties: smaller line index). A diversity pass first
// picks the best line for each not-yet-covered construct kind, kinds visited
// in descending weight order; remaining slots fill by global rank.
std::vector<ScoredLine> select_top_k(const DecompiledFunction& function,
                                     const FeatureWeights& weights,
                                     const IntensityParams& params);

// Ablation baselines.
std::vector<SourceLine> select_random_k(const DecompiledFunction& function, int k,
                                        std::uint64_t seed);
std::vector<SourceLine> select_all(const DecompiledFunction& function);

}  // namespace fidelity
