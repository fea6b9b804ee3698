#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <memory>

#include "fidelity/corpus.hpp"
#include "fidelity/errors.hpp"
#include "fidelity/serial_ref.hpp"
#include "fidelity/store.hpp"
#include "support/synthetic.hpp"

#include <json.hpp>

using namespace fidelity;

TEST_CASE("database lines parse into labeled records") {
  std::vector<DistortionRecord> records = parse_database(
      "*(_DWORD *)(a1 + 4) = 0; // I1\n"
      "v5 = v4; // I4\n"
      "\n"
      "if ( v3 == 10 ) // i3\n",
      DecompilerOrigin::Ida);
  REQUIRE(records.size() == 3);
  CHECK(records[0].label == DistortionType::I1);
  CHECK(records[0].code_line == "*(_DWORD *)(a1 + 4) = 0;");
  CHECK(records[1].label == DistortionType::I4);
  CHECK(records[2].label == DistortionType::I3);  // lowercase accepted
  CHECK(records[0].id == 0);
  CHECK(records[2].id == 2);
}

TEST_CASE("malformed database lines are rejected with their line number") {
  CHECK_THROWS_AS(parse_database("plain line with no label\n", DecompilerOrigin::Ida),
                  MalformedRecord);
  CHECK_THROWS_AS(parse_database("x = 1; // I9\n", DecompilerOrigin::Ida),
                  MalformedRecord);
  CHECK_THROWS_AS(parse_database("x = 1; // I1, I4\n", DecompilerOrigin::Ida),
                  MalformedRecord);  // database records carry one label
  CHECK_THROWS_AS(parse_database("\n\n", DecompilerOrigin::Ida), EmptyDatabase);

  try {
    parse_database("good(); // I1\nbad line\n", DecompilerOrigin::Ida);
    FAIL("expected MalformedRecord");
  } catch (const MalformedRecord& e) {
    CHECK(e.line_no == 2);
    CHECK(e.text == "bad line");
  }
}

TEST_CASE("a custom line parser adapts to other annotation layouts") {
  // layout: "<label> | <code>"
  RecordLineParser pipe_format = [](std::string_view line)
      -> std::optional<ParsedRecordLine> {
    std::size_t bar = line.find('|');
    if (bar == std::string_view::npos || bar < 2) return std::nullopt;
    auto label = parse_label_token(line.substr(0, 2));
    if (!label) return std::nullopt;
    std::string code(line.substr(bar + 1));
    while (!code.empty() && code.front() == ' ') code.erase(code.begin());
    if (code.empty()) return std::nullopt;
    return ParsedRecordLine{std::move(code), *label};
  };

  std::vector<DistortionRecord> records =
      parse_database("I2 | v1 = 65;\nI5 | return 0LL;\n", DecompilerOrigin::Ida,
                     pipe_format);
  REQUIRE(records.size() == 2);
  CHECK(records[0].label == DistortionType::I2);
  CHECK(records[0].code_line == "v1 = 65;");
  CHECK_THROWS_AS(
      parse_database("v1 = v2; // I4\n", DecompilerOrigin::Ida, pipe_format),
      MalformedRecord);
}

TEST_CASE("origin defaults from the file name") {
  auto tmp = std::filesystem::temp_directory_path() / "fidelity_ghidra_db.c";
  write_text_file(tmp, "v1 = v2; // I4\n");
  CHECK(load_database(tmp)[0].origin == DecompilerOrigin::Ghidra);
  CHECK(load_database(tmp, DecompilerOrigin::Ida)[0].origin == DecompilerOrigin::Ida);
  std::filesystem::remove(tmp);
}

TEST_CASE("hash embedder is deterministic and normalized") {
  HashEmbedder embedder;
  EmbeddingVector a = embedder.embed("v5 = v4 + 1;");
  EmbeddingVector b = embedder.embed("v5 = v4 + 1;");
  CHECK(a.values == b.values);
  CHECK(std::abs(a.norm() - 1.0) < 1e-6);
  CHECK(a.dimension() == 256);
  CHECK(inner_product(a, b) == doctest::Approx(1.0));
}

TEST_CASE("index build: size, determinism, empty rejection") {
  synthetic::Rng rng(51);
  std::vector<DistortionRecord> records =
      parse_database(synthetic::make_db(rng, 150), DecompilerOrigin::Ida);
  auto embedder = std::make_shared<HashEmbedder>();

  DistortionIndex index = build_index(records, embedder);
  CHECK(index.size() == 150);

  DistortionIndex again = build_index(records, embedder);
  for (int i = 0; i < 150; ++i)
    CHECK(index.vector_of(i).values == again.vector_of(i).values);

  CHECK_THROWS_AS(build_index({}, embedder), EmptyDatabase);
}

TEST_CASE("retrieval: self-similarity, k=1, ties by id") {
  std::vector<DistortionRecord> records = parse_database(
      "alpha beta gamma // I1\n"
      "delta epsilon zeta // I2\n"
      "alpha beta gamma // I3\n",  // duplicate text of record 0
      DecompilerOrigin::Ida);
  DistortionIndex index = build_index(records, std::make_shared<HashEmbedder>());

  std::vector<RetrievalHit> one = retrieve(index, "alpha beta gamma", 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].similarity >= 0.999);
  CHECK(one[0].record.id == 0);  // tie with record 2 resolved by smaller id
  CHECK(one[0].record.label == DistortionType::I1);

  std::vector<RetrievalHit> two = retrieve(index, "alpha beta gamma", 2);
  REQUIRE(two.size() == 2);
  CHECK(two[0].record.id == 0);
  CHECK(two[1].record.id == 2);

  // k beyond the database returns everything
  CHECK(retrieve(index, "alpha", 10).size() == 3);
}

TEST_CASE("retrieval equals the brute-force oracle across sizes and k") {
  synthetic::Rng rng(53);
  for (int size : {10, 57, 240, 500}) {
    std::vector<DistortionRecord> records =
        parse_database(synthetic::make_db(rng, size), DecompilerOrigin::Ida);
    DistortionIndex index = build_index(records, std::make_shared<HashEmbedder>());

    for (int q = 0; q < 10; ++q) {
      std::string query = synthetic::make_db_line(rng, q);
      for (int k : {1, 3, size}) {
        std::vector<RetrievalHit> got = retrieve(index, query, k);
        std::vector<RetrievalHit> expected = serial::retrieve_reference(index, query, k);
        REQUIRE(got.size() == expected.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
          CHECK(got[i].record.id == expected[i].record.id);
          CHECK(got[i].similarity == expected[i].similarity);
        }
      }
    }
  }
}

TEST_CASE("records round-trip through the json dump") {
  std::vector<DistortionRecord> records =
      parse_database("v1 = v2; // I4\nreturn v1; // I5\n", DecompilerOrigin::Ghidra);
  DistortionIndex index = build_index(records, std::make_shared<HashEmbedder>());

  nlohmann::json dumped = nlohmann::json::parse(index.dump_json());
  REQUIRE(dumped.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(dumped[i]["id"] == records[i].id);
    CHECK(dumped[i]["code"] == records[i].code_line);
    CHECK(dumped[i]["label"] == to_label(records[i].label));
    CHECK(dumped[i]["origin"] == to_string(records[i].origin));
    CHECK(dumped[i]["dimension"] == 256);
  }
}

TEST_CASE("embedder failures carry the record id") {
  struct FailingEmbedder final : Embedder {
    std::size_t dimension() const override { return 4; }
    EmbeddingVector embed(const std::string& text) const override {
      if (text.find("bad") != std::string::npos) throw Error("boom");
      EmbeddingVector v;
      v.values = {1, 0, 0, 0};
      return v;
    }
  };
  std::vector<DistortionRecord> records =
      parse_database("good(); // I1\nbad(); // I2\n", DecompilerOrigin::Ida);
  CHECK_THROWS_AS(build_index(records, std::make_shared<FailingEmbedder>()),
                  EmbedderFailure);
}
