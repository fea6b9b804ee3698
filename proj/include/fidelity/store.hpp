#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fidelity/distortion.hpp"

namespace fidelity {

// L2-normalized embedding vector.
struct EmbeddingVector {
  std::vector<float> values;

  double norm() const;
  void normalize();
  std::size_t dimension() const { return values.size(); }
};

double inner_product(const EmbeddingVector& a, const EmbeddingVector& b);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  virtual EmbeddingVector embed(const std::string& text) const = 0;
};

// Deterministic offline embedder: bag of tokens hashed into a fixed number
// of buckets, then L2-normalized. Identical text => identical vector.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dim = 256) : dim_(dim) {}
  std::size_t dimension() const override { return dim_; }
  EmbeddingVector embed(const std::string& text) const override;

 private:
  std::size_t dim_;
};

// Remote embedding endpoint (OpenAI-compatible JSON shape).
class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(std::string api_base, std::string api_key, std::string model,
               std::size_t dim = 1536);
  std::size_t dimension() const override { return dim_; }
  EmbeddingVector embed(const std::string& text) const override;

 private:
  std::string api_base_;
  std::string api_key_;
  std::string model_;
  std::size_t dim_;
};

struct RetrievalHit {
  DistortionRecord record;
  double similarity = 0.0;
};

// Hook for adapting to a database whose annotation format differs from the
// default `<code> // I<k>` layout: receives one non-blank line, returns the
// code text and label, or nullopt to reject the line.
struct ParsedRecordLine {
  std::string code;
  DistortionType label;
};
using RecordLineParser = std::function<std::optional<ParsedRecordLine>(std::string_view)>;

RecordLineParser default_record_parser();

// Parses one record per non-blank line. Origin defaults from the file name
// ("ghidra" substring) unless given explicitly.
std::vector<DistortionRecord> load_database(const std::filesystem::path& path,
                                            std::optional<DecompilerOrigin> origin = {});
std::vector<DistortionRecord> parse_database(const std::string& text,
                                             DecompilerOrigin origin,
                                             const RecordLineParser& parser =
                                                 default_record_parser());

// Exact inner-product nearest-neighbor index over the database. Immutable
// after build; retrieval is safe from multiple threads.
class DistortionIndex {
 public:
  std::size_t size() const { return records_.size(); }
  const std::vector<DistortionRecord>& records() const { return records_; }
  const Embedder& embedder() const { return *embedder_; }
  const EmbeddingVector& vector_of(int record_id) const;

  // Top-k by similarity, descending; ties broken by smaller record id.
  // k >= size returns every record.
  std::vector<RetrievalHit> retrieve(const std::string& query_line, int k) const;

  std::string dump_json() const;

  friend DistortionIndex build_index(std::vector<DistortionRecord> records,
                                     std::shared_ptr<const Embedder> embedder);

 private:
  std::vector<DistortionRecord> records_;
  std::vector<EmbeddingVector> vectors_;
  std::shared_ptr<const Embedder> embedder_;
};

DistortionIndex build_index(std::vector<DistortionRecord> records,
                            std::shared_ptr<const Embedder> embedder);

inline std::vector<RetrievalHit> retrieve(const DistortionIndex& index,
                                          const std::string& query_line, int k) {
  return index.retrieve(query_line, k);
}

}  // namespace fidelity
