#include "fidelity/chunk.hpp"

#include <algorithm>

#include "fidelity/errors.hpp"

namespace fidelity {

std::vector<Chunk> segment(const DecompiledFunction& function, int threshold, int overlap) {
  if (threshold <= 0) throw InvalidParams("chunk threshold must be positive");
  if (overlap < 0 || overlap >= threshold)
    throw InvalidParams("chunk overlap must satisfy 0 <= overlap < threshold");

  const int n = function.line_count();
  std::vector<Chunk> chunks;
  if (n == 0) return chunks;

  if (n <= threshold) {
    chunks.push_back({1, n, function.lines});
    return chunks;
  }

  const int step = threshold - overlap;
  for (int start = 1; start <= n; start += step) {
    int end = std::min(start + threshold - 1, n);
    Chunk chunk{start, end, {}};
    chunk.lines.assign(function.lines.begin() + (start - 1), function.lines.begin() + end);
    chunks.push_back(std::move(chunk));
    if (end == n) break;
  }
  return chunks;
}

int expected_chunk_count(int line_count, int threshold, int overlap) {
  if (line_count <= threshold) return line_count > 0 ? 1 : 0;
  int step = threshold - overlap;
  return (line_count - overlap + step - 1) / step;  // ceil((n - overlap) / step)
}

MergeOutcome merge_annotations(const DecompiledFunction& function,
                               const std::vector<ChunkAnnotations>& chunks) {
  MergeOutcome out;
  out.annotated.function = function;

  const int n = function.line_count();
  std::vector<int> covered_by(n + 1, -1);  // chunk index that owns each line

  for (std::size_t c = 0; c < chunks.size(); ++c) {
    const Chunk& chunk = chunks[c].chunk;
    for (int line = chunk.start_line; line <= chunk.end_line && line <= n; ++line) {
      if (covered_by[line] < 0) covered_by[line] = static_cast<int>(c);
    }
  }
  for (int line = 1; line <= n; ++line)
    if (covered_by[line] < 0) throw CoverageGap(line);

  // earlier chunk wins; disagreements on shared lines are logged
  for (int line = 1; line <= n; ++line) {
    const int owner = covered_by[line];
    const auto& owner_labels = chunks[owner].labels;
    auto it = owner_labels.find(line);
    std::set<DistortionType> winner =
        it != owner_labels.end() ? it->second : std::set<DistortionType>{};

    for (std::size_t c = owner + 1; c < chunks.size(); ++c) {
      const Chunk& chunk = chunks[c].chunk;
      if (line < chunk.start_line || line > chunk.end_line) continue;
      auto later = chunks[c].labels.find(line);
      std::set<DistortionType> other =
          later != chunks[c].labels.end() ? later->second : std::set<DistortionType>{};
      if (other != winner)
        out.conflicts.push_back("line " + std::to_string(line) + ": chunk " +
                                std::to_string(owner + 1) + " and chunk " +
                                std::to_string(c + 1) + " disagree; earlier kept");
    }
    if (!winner.empty()) out.annotated.labels[line] = std::move(winner);
  }
  return out;
}

}  // namespace fidelity
