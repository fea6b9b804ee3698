#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fidelity/annotation.hpp"
#include "fidelity/pipeline.hpp"

namespace fidelity {

struct LinePair {
  std::string model_line;
  std::string truth_line;
  int function_index = 0;  // 0-based
};

// Pairs the two /////-separated files line by line. Throws
// FunctionCountMismatch / LineCountMismatch (with the function index).
std::vector<LinePair> align(const std::string& model_text, const std::string& truth_text);

struct ConfusionCounts {
  long tp = 0;
  long tn = 0;
  long fp = 0;
  long fn = 0;

  long total() const { return tp + tn + fp + fn; }
};

// A line is positive iff it carries at least one label; any-label match
// counts as TP.
ConfusionCounts confusion(std::span<const LinePair> pairs);

struct TypeCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
};

struct EvalReport {
  ConfusionCounts counts;
  double accuracy = 0.0;
  std::optional<double> precision;  // nullopt when tp + fp == 0
  std::map<DistortionType, TypeCounts> per_type;

  std::string to_json() const;
  std::string to_table() const;
};

EvalReport metrics(const ConfusionCounts& counts);
// Full report including per-type counts.
EvalReport evaluate_pairs(std::span<const LinePair> pairs);

struct FixCounts {
  long flagged_lines = 0;
  long flagged_i4 = 0;
  long fixed_marked = 0;
  std::vector<std::string> warnings;

  long denominator() const { return flagged_lines - flagged_i4; }
  double fix_rate() const;  // throws DenominatorZero
};

// FR counting support; CFR needs human judgment, so a review worksheet is
// emitted instead (cfr_worksheet_csv).
FixCounts fix_counts(const AnnotatedFunction& detection, const CorrectionResult& correction);

std::string cfr_worksheet_header();
std::string cfr_worksheet_rows(const std::string& function_name,
                               const AnnotatedFunction& detection,
                               const CorrectionResult& correction);

}  // namespace fidelity
