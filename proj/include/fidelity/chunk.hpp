#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "fidelity/annotation.hpp"
#include "fidelity/pseudoc.hpp"

namespace fidelity {

// A window of a long function. Lines are 1-based inclusive absolute indices.
struct Chunk {
  int start_line = 1;
  int end_line = 1;
  std::vector<SourceLine> lines;

  int length() const { return end_line - start_line + 1; }
};

// One chunk per function up to `threshold` lines; longer functions produce
// windows of `threshold` lines stepping by threshold - overlap, the last
// truncated at the function end.
std::vector<Chunk> segment(const DecompiledFunction& function, int threshold = 50,
                           int overlap = 5);

int expected_chunk_count(int line_count, int threshold, int overlap);

struct ChunkAnnotations {
  Chunk chunk;
  std::map<int, std::set<DistortionType>> labels;  // absolute line -> labels
};

struct MergeOutcome {
  AnnotatedFunction annotated;
  std::vector<std::string> conflicts;  // overlap disagreements, earlier chunk won
};

// Merges per-chunk annotations back into one function. On overlap
// disagreement the earlier chunk wins and the conflict is logged. Throws
// CoverageGap when some line is covered by no chunk.
MergeOutcome merge_annotations(const DecompiledFunction& function,
                               const std::vector<ChunkAnnotations>& chunks);

}  // namespace fidelity
