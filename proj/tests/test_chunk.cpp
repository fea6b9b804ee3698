#include <doctest.h>

#include "fidelity/chunk.hpp"
#include "fidelity/errors.hpp"
#include "fidelity/serial_ref.hpp"

using namespace fidelity;

namespace {

DecompiledFunction function_of_length(int n) {
  std::string text;
  for (int i = 1; i <= n; ++i) {
    if (i > 1) text += '\n';
    text += "x = " + std::to_string(i) + ";";
  }
  return parse_function(text);
}

}  // namespace

TEST_CASE("segment boundary cases") {
  std::vector<Chunk> at_threshold = segment(function_of_length(50), 50, 5);
  REQUIRE(at_threshold.size() == 1);
  CHECK(at_threshold[0].start_line == 1);
  CHECK(at_threshold[0].end_line == 50);

  std::vector<Chunk> long_fn = segment(function_of_length(120), 50, 5);
  REQUIRE(long_fn.size() == 3);
  CHECK(long_fn[0].start_line == 1);
  CHECK(long_fn[0].end_line == 50);
  CHECK(long_fn[1].start_line == 46);
  CHECK(long_fn[1].end_line == 95);
  CHECK(long_fn[2].start_line == 91);
  CHECK(long_fn[2].end_line == 120);

  std::vector<Chunk> barely = segment(function_of_length(51), 50, 5);
  REQUIRE(barely.size() == 2);
  CHECK(barely[0].end_line == 50);
  CHECK(barely[1].start_line == 46);
  CHECK(barely[1].end_line == 51);
}

TEST_CASE("segment rejects overlap >= threshold") {
  CHECK_THROWS_AS(segment(function_of_length(10), 5, 5), InvalidParams);
  CHECK_THROWS_AS(segment(function_of_length(10), 5, 7), InvalidParams);
}

TEST_CASE("chunk lines keep their absolute indices") {
  std::vector<Chunk> chunks = segment(function_of_length(60), 50, 5);
  REQUIRE(chunks.size() == 2);
  CHECK(chunks[1].lines.front().index == 46);
  CHECK(chunks[1].lines.back().index == 60);
  CHECK(static_cast<int>(chunks[1].lines.size()) == chunks[1].length());
}

TEST_CASE("merge of a single chunk is the identity") {
  DecompiledFunction fn = function_of_length(5);
  std::vector<Chunk> chunks = segment(fn, 50, 5);
  ChunkAnnotations ann{chunks[0], {{2, {DistortionType::I4}}}};
  MergeOutcome merged = merge_annotations(fn, {ann});
  CHECK(merged.conflicts.empty());
  REQUIRE(merged.annotated.labels.count(2));
  CHECK(merged.annotated.labels.at(2) == std::set<DistortionType>{DistortionType::I4});
}

TEST_CASE("agreeing chunks merge without conflicts") {
  DecompiledFunction fn = function_of_length(60);
  std::vector<Chunk> chunks = segment(fn, 50, 5);
  ChunkAnnotations first{chunks[0], {{10, {DistortionType::I1}}, {48, {DistortionType::I3}}}};
  ChunkAnnotations second{chunks[1], {{48, {DistortionType::I3}}, {55, {DistortionType::I5}}}};
  MergeOutcome merged = merge_annotations(fn, {first, second});
  CHECK(merged.conflicts.empty());
  CHECK(merged.annotated.labels.size() == 3);
  CHECK(merged.annotated.labels.at(48) == std::set<DistortionType>{DistortionType::I3});
}

TEST_CASE("on disagreement the earlier chunk wins and the conflict is logged") {
  DecompiledFunction fn = function_of_length(60);
  std::vector<Chunk> chunks = segment(fn, 50, 5);
  ChunkAnnotations first{chunks[0], {{47, {DistortionType::I4}}}};
  ChunkAnnotations second{chunks[1], {}};  // overlap line unlabeled here
  MergeOutcome merged = merge_annotations(fn, {first, second});
  REQUIRE(merged.annotated.labels.count(47));
  CHECK(merged.annotated.labels.at(47) == std::set<DistortionType>{DistortionType::I4});
  CHECK(merged.conflicts.size() == 1);
}

TEST_CASE("coverage gaps are an error") {
  DecompiledFunction fn = function_of_length(60);
  std::vector<Chunk> chunks = segment(fn, 50, 5);
  CHECK_THROWS_AS(merge_annotations(fn, {{chunks[0], {}}}), CoverageGap);
}

TEST_CASE("segment then merge round-trips for every length up to 300") {
  for (int n = 1; n <= 300; ++n) {
    DecompiledFunction fn = function_of_length(n);
    std::vector<Chunk> chunks = segment(fn, 50, 5);

    CHECK(static_cast<long>(chunks.size()) == serial::chunk_count_reference(n, 50, 5));
    if (n > 50)
      CHECK(static_cast<long>(chunks.size()) == (n - 5 + 44) / 45);  // ceil((n-5)/45)
    else
      CHECK(chunks.size() == 1);

    // identity annotations: every line labeled with I1 by every chunk
    std::vector<ChunkAnnotations> annotated;
    for (const Chunk& chunk : chunks) {
      ChunkAnnotations ann{chunk, {}};
      for (int line = chunk.start_line; line <= chunk.end_line; ++line)
        ann.labels[line] = {DistortionType::I1};
      annotated.push_back(std::move(ann));
    }
    MergeOutcome merged = merge_annotations(fn, annotated);
    CHECK(merged.conflicts.empty());
    REQUIRE(static_cast<int>(merged.annotated.labels.size()) == n);
    int expect = 1;
    for (const auto& [line, labels] : merged.annotated.labels) {
      CHECK(line == expect++);
      CHECK(labels == std::set<DistortionType>{DistortionType::I1});
    }
  }
}
