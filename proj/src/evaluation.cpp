#include "fidelity/evaluation.hpp"

#include <cstdlib>
#include <sstream>

#include "fidelity/corpus.hpp"
#include "fidelity/errors.hpp"

#include <json.hpp>

namespace fidelity {

namespace {

std::vector<std::string> function_lines(const std::string& function_text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= function_text.size()) {
    std::size_t nl = function_text.find('\n', start);
    lines.push_back(nl == std::string::npos
                        ? function_text.substr(start)
                        : function_text.substr(start, nl - start));
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  return lines;
}

}  // namespace

std::vector<LinePair> align(const std::string& model_text, const std::string& truth_text) {
  const std::vector<std::string> model_functions = split_functions(model_text);
  const std::vector<std::string> truth_functions = split_functions(truth_text);
  if (model_functions.size() != truth_functions.size())
    throw FunctionCountMismatch(model_functions.size(), truth_functions.size());

  std::vector<LinePair> pairs;
  for (std::size_t f = 0; f < model_functions.size(); ++f) {
    std::vector<std::string> model_lines = function_lines(model_functions[f]);
    std::vector<std::string> truth_lines = function_lines(truth_functions[f]);
    if (model_lines.size() != truth_lines.size())
      throw LineCountMismatch(static_cast<int>(truth_lines.size()),
                              static_cast<int>(model_lines.size()),
                              static_cast<int>(f));
    for (std::size_t i = 0; i < model_lines.size(); ++i)
      pairs.push_back({std::move(model_lines[i]), std::move(truth_lines[i]),
                       static_cast<int>(f)});
  }
  return pairs;
}

ConfusionCounts confusion(std::span<const LinePair> pairs) {
  long tp = 0, tn = 0, fp = 0, fn = 0;
  const std::size_t n = pairs.size();
  std::exception_ptr failure;  // UnknownLabel must not escape the parallel region
#pragma omp parallel for schedule(static) reduction(+ : tp, tn, fp, fn) if (n > 4096)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const bool model_pos = !split_trailing_labels(pairs[i].model_line).labels.empty();
      const bool truth_pos = !split_trailing_labels(pairs[i].truth_line).labels.empty();
      if (model_pos && truth_pos) ++tp;
      else if (!model_pos && !truth_pos) ++tn;
      else if (model_pos) ++fp;
      else ++fn;
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return {tp, tn, fp, fn};
}

EvalReport metrics(const ConfusionCounts& counts) {
  if (counts.total() == 0) throw EmptyEvaluation();
  EvalReport report;
  report.counts = counts;
  report.accuracy = static_cast<double>(counts.tp + counts.tn) /
                    static_cast<double>(counts.total());
  if (counts.tp + counts.fp > 0)
    report.precision =
        static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fp);
  return report;
}

EvalReport evaluate_pairs(std::span<const LinePair> pairs) {
  EvalReport report = metrics(confusion(pairs));
  for (const LinePair& pair : pairs) {
    const std::set<DistortionType> model = split_trailing_labels(pair.model_line).labels;
    const std::set<DistortionType> truth = split_trailing_labels(pair.truth_line).labels;
    for (DistortionType t : all_distortion_types()) {
      const bool in_model = model.count(t) > 0;
      const bool in_truth = truth.count(t) > 0;
      if (in_model && in_truth) ++report.per_type[t].tp;
      else if (in_model) ++report.per_type[t].fp;
      else if (in_truth) ++report.per_type[t].fn;
    }
  }
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["tp"] = counts.tp;
  j["tn"] = counts.tn;
  j["fp"] = counts.fp;
  j["fn"] = counts.fn;
  j["accuracy"] = accuracy;
  if (precision) j["precision"] = *precision;
  else j["precision"] = nullptr;
  for (const auto& [type, tc] : per_type)
    j["per_type"][to_label(type)] = {{"tp", tc.tp}, {"fp", tc.fp}, {"fn", tc.fn}};
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << "lines: " << counts.total() << "  (tp " << counts.tp << ", tn " << counts.tn
     << ", fp " << counts.fp << ", fn " << counts.fn << ")\n";
  os << "Acc: " << accuracy << "\n";
  if (precision) os << "Pr:  " << *precision << "\n";
  else os << "Pr:  n/a (no positive predictions)\n";
  if (!per_type.empty()) {
    os << "per type (tp/fp/fn):\n";
    for (const auto& [type, tc] : per_type)
      os << "  " << to_label(type) << "  " << tc.tp << "/" << tc.fp << "/" << tc.fn
         << "  (" << describe(type) << ")\n";
  }
  return os.str();
}

double FixCounts::fix_rate() const {
  if (denominator() <= 0) throw DenominatorZero();
  return static_cast<double>(fixed_marked) / static_cast<double>(denominator());
}

FixCounts fix_counts(const AnnotatedFunction& detection, const CorrectionResult& correction) {
  FixCounts out;
  for (const auto& [index, labels] : detection.labels) {
    ++out.flagged_lines;
    if (labels.count(DistortionType::I4)) ++out.flagged_i4;
  }
  out.fixed_marked = static_cast<long>(correction.fixed_indices.size());
  if (out.denominator() > 0 && out.fixed_marked > out.denominator())
    out.warnings.push_back("model fixed more lines than were flagged (" +
                           std::to_string(out.fixed_marked) + " > " +
                           std::to_string(out.denominator()) + ")");
  return out;
}

namespace {

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string cfr_worksheet_header() {
  return "function,line_no,original,corrected,detected_types,manual_verdict\n";
}

std::string cfr_worksheet_rows(const std::string& function_name,
                               const AnnotatedFunction& detection,
                               const CorrectionResult& correction) {
  // pair each //fixed output line with the closest flagged source line,
  // adjusting for lines the correction removed (I4); the verdict column
  // stays blank for the human reviewer
  std::string out;
  for (int fixed_line : correction.fixed_indices) {
    const std::string& corrected =
        correction.corrected_lines[static_cast<std::size_t>(fixed_line) - 1];

    long adjusted = fixed_line;
    for (int removed : correction.removed_input_indices)
      if (removed <= adjusted) ++adjusted;

    int best = 0;
    long best_distance = -1;
    for (const auto& [index, labels] : detection.labels) {
      bool only_i4 =
          labels.size() == 1 && labels.count(DistortionType::I4) == 1;
      if (only_i4) continue;  // removed lines cannot be the fixed one
      long d = std::abs(static_cast<long>(index) - adjusted);
      if (best_distance < 0 || d < best_distance) {
        best_distance = d;
        best = index;
      }
    }
    std::string original =
        best > 0 ? detection.function.line(best).text : std::string();
    std::string types;
    if (best > 0)
      for (DistortionType t : detection.labels.at(best))
        types += (types.empty() ? "" : " ") + to_label(t);
    out += csv_escape(function_name) + "," + std::to_string(fixed_line) + "," +
           csv_escape(original) + "," + csv_escape(corrected) + "," + csv_escape(types) +
           ",\n";
  }
  return out;
}

}  // namespace fidelity
