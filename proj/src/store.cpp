#include "fidelity/store.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "fidelity/corpus.hpp"
#include "fidelity/errors.hpp"
#include "fidelity/http_util.hpp"
#include "fidelity/pseudoc.hpp"

#include <json.hpp>

namespace fidelity {

double EmbeddingVector::norm() const {
  double sum = 0.0;
  for (float v : values) sum += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(sum);
}

void EmbeddingVector::normalize() {
  double n = norm();
  if (n <= 0.0) return;
  for (float& v : values) v = static_cast<float>(v / n);
}

double inner_product(const EmbeddingVector& a, const EmbeddingVector& b) {
  const std::size_t n = std::min(a.values.size(), b.values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    sum += static_cast<double>(a.values[i]) * static_cast<double>(b.values[i]);
  return sum;
}

namespace {

// FNV-1a, 64-bit
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

EmbeddingVector HashEmbedder::embed(const std::string& text) const {
  EmbeddingVector vec;
  vec.values.assign(dim_, 0.0f);
  for (const Token& tok : tokenize_line(text))
    vec.values[fnv1a(tok.text) % dim_] += 1.0f;
  vec.normalize();
  return vec;
}

HttpEmbedder::HttpEmbedder(std::string api_base, std::string api_key, std::string model,
                           std::size_t dim)
    : api_base_(std::move(api_base)), api_key_(std::move(api_key)),
      model_(std::move(model)), dim_(dim) {}

EmbeddingVector HttpEmbedder::embed(const std::string& text) const {
  nlohmann::json payload = {{"model", model_}, {"input", text}};
  std::string body = http_post_json(api_base_, "/embeddings", api_key_, payload.dump());

  nlohmann::json reply = nlohmann::json::parse(body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("data") || reply["data"].empty())
    throw Error("embedding response missing data: " + body.substr(0, 200));

  EmbeddingVector vec;
  for (const auto& v : reply["data"][0]["embedding"])
    vec.values.push_back(v.get<float>());
  vec.normalize();
  return vec;
}

namespace {

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

RecordLineParser default_record_parser() {
  return [](std::string_view line) -> std::optional<ParsedRecordLine> {
    TrailingLabels parsed;
    try {
      parsed = split_trailing_labels(line);
    } catch (const UnknownLabel&) {
      return std::nullopt;
    }
    std::string code(trim_view(parsed.stripped));
    if (parsed.labels.size() != 1 || code.empty()) return std::nullopt;
    return ParsedRecordLine{std::move(code), *parsed.labels.begin()};
  };
}

std::vector<DistortionRecord> parse_database(const std::string& text,
                                             DecompilerOrigin origin,
                                             const RecordLineParser& parser) {
  std::vector<DistortionRecord> records;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    std::string line = (nl == std::string::npos) ? text.substr(start)
                                                 : text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_no;
    std::string_view trimmed = trim_view(line);
    if (!trimmed.empty()) {
      std::optional<ParsedRecordLine> parsed = parser(trimmed);
      if (!parsed) throw MalformedRecord(line_no, std::string(trimmed));
      records.push_back({static_cast<int>(records.size()), std::move(parsed->code),
                         parsed->label, origin});
    }
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  if (records.empty()) throw EmptyDatabase();
  return records;
}

std::vector<DistortionRecord> load_database(const std::filesystem::path& path,
                                            std::optional<DecompilerOrigin> origin) {
  DecompilerOrigin o = origin.value_or(
      path.filename().string().find("ghidra") != std::string::npos
          ? DecompilerOrigin::Ghidra
          : DecompilerOrigin::Ida);
  return parse_database(read_text_file(path), o);
}

const EmbeddingVector& DistortionIndex::vector_of(int record_id) const {
  return vectors_.at(static_cast<std::size_t>(record_id));
}

DistortionIndex build_index(std::vector<DistortionRecord> records,
                            std::shared_ptr<const Embedder> embedder) {
  if (records.empty()) throw EmptyDatabase();

  DistortionIndex index;
  index.records_ = std::move(records);
  index.embedder_ = std::move(embedder);
  index.vectors_.resize(index.records_.size());

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < index.records_.size(); ++i) {
    try {
      index.vectors_[i] = index.embedder_->embed(index.records_[i].code_line);
    } catch (const std::exception& e) {
#pragma omp critical
      if (!failure)
        failure = std::make_exception_ptr(EmbedderFailure(index.records_[i].id, e.what()));
    } catch (...) {
#pragma omp critical
      if (!failure)
        failure = std::make_exception_ptr(
            EmbedderFailure(index.records_[i].id, "unknown embedder error"));
    }
  }
  if (failure) std::rethrow_exception(failure);
  return index;
}

std::vector<RetrievalHit> DistortionIndex::retrieve(const std::string& query_line,
                                                    int k) const {
  const std::size_t n = records_.size();
  EmbeddingVector query = embedder_->embed(query_line);

  std::vector<double> scores(n);
#pragma omp parallel for schedule(static) if (n > 512)
  for (std::size_t i = 0; i < n; ++i) scores[i] = inner_product(query, vectors_[i]);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t want = std::min<std::size_t>(std::max(k, 0), n);
  std::partial_sort(order.begin(), order.begin() + want, order.end(),
                    [&](int a, int b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return records_[a].id < records_[b].id;
                    });

  std::vector<RetrievalHit> hits;
  hits.reserve(want);
  for (std::size_t i = 0; i < want; ++i)
    hits.push_back({records_[order[i]], scores[order[i]]});
  return hits;
}

std::string DistortionIndex::dump_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const DistortionRecord& r = records_[i];
    out.push_back({{"id", r.id},
                   {"code", r.code_line},
                   {"label", to_label(r.label)},
                   {"origin", to_string(r.origin)},
                   {"dimension", vectors_[i].dimension()}});
  }
  return out.dump(2);
}

}  // namespace fidelity
