#include <doctest.h>

#include <cmath>

#include "fidelity/errors.hpp"
#include "fidelity/evaluation.hpp"
#include "fidelity/serial_ref.hpp"
#include "support/synthetic.hpp"

using namespace fidelity;

namespace {

std::string labeled(int lines, const std::set<int>& positives) {
  std::string out;
  for (int i = 1; i <= lines; ++i) {
    if (i > 1) out += '\n';
    out += "x" + std::to_string(i) + " = " + std::to_string(i) + ";";
    if (positives.count(i)) out += " // I1";
  }
  return out;
}

}  // namespace

TEST_CASE("align pairs identical files line by line") {
  std::string text = labeled(3, {2}) + "\n/////\n" + labeled(2, {});
  std::vector<LinePair> pairs = align(text, text);
  CHECK(pairs.size() == 5);
  CHECK(pairs[0].function_index == 0);
  CHECK(pairs[4].function_index == 1);
}

TEST_CASE("alignment mismatches are reported precisely") {
  std::string two_functions = labeled(3, {}) + "\n/////\n" + labeled(2, {});
  std::string one_function = labeled(3, {});
  CHECK_THROWS_AS(align(one_function, two_functions), FunctionCountMismatch);

  std::string truth = labeled(3, {}) + "\n/////\n" + labeled(4, {});
  std::string model = labeled(3, {}) + "\n/////\n" + labeled(2, {});
  try {
    align(model, truth);
    FAIL("expected LineCountMismatch");
  } catch (const LineCountMismatch& e) {
    CHECK(e.function_index == 1);
    CHECK(e.expected == 4);
    CHECK(e.got == 2);
  }
}

TEST_CASE("confusion counting on a constructed fixture") {
  // 100 lines: truth labels 18 (8 hit, 10 missed), model adds 2 spurious
  std::set<int> truth_pos, model_pos;
  for (int i = 1; i <= 8; ++i) {
    truth_pos.insert(i);
    model_pos.insert(i);  // tp
  }
  for (int i = 9; i <= 18; ++i) truth_pos.insert(i);       // fn
  for (int i = 19; i <= 20; ++i) model_pos.insert(i);      // fp
  std::vector<LinePair> pairs =
      align(labeled(100, model_pos), labeled(100, truth_pos));

  ConfusionCounts counts = confusion(pairs);
  CHECK(counts.tp == 8);
  CHECK(counts.tn == 80);
  CHECK(counts.fp == 2);
  CHECK(counts.fn == 10);

  ConfusionCounts reference = serial::confusion_reference(pairs);
  CHECK(counts.tp == reference.tp);
  CHECK(counts.tn == reference.tn);
  CHECK(counts.fp == reference.fp);
  CHECK(counts.fn == reference.fn);

  EvalReport report = metrics(counts);
  CHECK(report.accuracy == doctest::Approx(0.88));
  REQUIRE(report.precision.has_value());
  CHECK(*report.precision == doctest::Approx(0.8));
}

TEST_CASE("degenerate confusion cases") {
  std::vector<LinePair> all_negative = align(labeled(10, {}), labeled(10, {}));
  ConfusionCounts counts = confusion(all_negative);
  CHECK(counts.tn == 10);
  CHECK(counts.total() == 10);

  std::set<int> everything;
  for (int i = 1; i <= 10; ++i) everything.insert(i);
  ConfusionCounts all_fp = confusion(align(labeled(10, everything), labeled(10, {})));
  CHECK(all_fp.fp == 10);
}

TEST_CASE("metrics edge cases") {
  EvalReport perfect = metrics({5, 5, 0, 0});
  CHECK(perfect.accuracy == 1.0);
  CHECK(*perfect.precision == 1.0);

  EvalReport no_positives = metrics({0, 10, 0, 0});
  CHECK(no_positives.accuracy == 1.0);
  CHECK_FALSE(no_positives.precision.has_value());  // undefined, not zero

  CHECK_THROWS_AS(metrics({0, 0, 0, 0}), EmptyEvaluation);
}

TEST_CASE("metrics match the arithmetic reference on 1000 random tuples") {
  synthetic::Rng rng(61);
  for (int i = 0; i < 1000; ++i) {
    long tp = rng.below(500), tn = rng.below(500), fp = rng.below(500),
         fn = rng.below(500);
    if (tp + tn + fp + fn == 0) tp = 1;
    EvalReport report = metrics({tp, tn, fp, fn});
    CHECK(std::abs(report.accuracy - serial::accuracy_reference(tp, tn, fp, fn)) <=
          1e-12);
    double pr = 0.0;
    bool defined = serial::precision_reference(tp, fp, pr);
    CHECK(defined == report.precision.has_value());
    if (defined) CHECK(std::abs(*report.precision - pr) <= 1e-12);
  }
}

TEST_CASE("unknown labels surface even from large (parallel) evaluations") {
  std::vector<LinePair> pairs;
  for (int i = 0; i < 5000; ++i) pairs.push_back({"x;", "x;", 0});
  pairs.push_back({"x; // I9", "x;", 0});
  CHECK_THROWS_AS(confusion(pairs), UnknownLabel);
}

TEST_CASE("per-type counts expose label mismatches") {
  std::string model = "a; // I3\nb; // I1\nc;";
  std::string truth = "a; // I1\nb; // I1\nc;";
  EvalReport report = evaluate_pairs(align(model, truth));
  // line 1 is a binary TP (both positive) but a type-level I1 miss
  CHECK(report.counts.tp == 2);
  CHECK(report.per_type.at(DistortionType::I1).tp == 1);
  CHECK(report.per_type.at(DistortionType::I1).fn == 1);
  CHECK(report.per_type.at(DistortionType::I3).fp == 1);
}

namespace {

AnnotatedFunction flagged_fixture(int flagged, int flagged_i4) {
  std::string text;
  for (int i = 1; i <= flagged + 2; ++i) {
    if (i > 1) text += '\n';
    text += "v" + std::to_string(i) + " = " + std::to_string(i) + ";";
  }
  AnnotatedFunction fn;
  fn.function = parse_function(text);
  for (int i = 1; i <= flagged; ++i)
    fn.labels[i] = {i <= flagged_i4 ? DistortionType::I4 : DistortionType::I1};
  return fn;
}

CorrectionResult fixed_result(int fixed) {
  CorrectionResult r;
  for (int i = 1; i <= fixed; ++i) {
    r.corrected_lines.push_back("line" + std::to_string(i) + "; //fixed");
    r.fixed_indices.insert(i);
  }
  r.corrected_lines.push_back("tail;");
  return r;
}

}  // namespace

TEST_CASE("fix counting excludes I4 from the denominator") {
  FixCounts fc = fix_counts(flagged_fixture(10, 2), fixed_result(6));
  CHECK(fc.flagged_lines == 10);
  CHECK(fc.flagged_i4 == 2);
  CHECK(fc.fixed_marked == 6);
  CHECK(fc.denominator() == 8);
  CHECK(fc.fix_rate() == doctest::Approx(0.75));

  FixCounts full = fix_counts(flagged_fixture(8, 0), fixed_result(8));
  CHECK(full.fix_rate() == doctest::Approx(1.0));

  FixCounts only_i4 = fix_counts(flagged_fixture(3, 3), fixed_result(0));
  CHECK_THROWS_AS(only_i4.fix_rate(), DenominatorZero);
}

TEST_CASE("overshooting fix counts warn instead of failing") {
  FixCounts fc = fix_counts(flagged_fixture(4, 0), fixed_result(6));
  CHECK(fc.fixed_marked == 6);
  CHECK_FALSE(fc.warnings.empty());
  CHECK(fc.fix_rate() == doctest::Approx(1.5));
}

TEST_CASE("cfr worksheet pairs fixed lines with their flagged source") {
  AnnotatedFunction fn;
  fn.function = parse_function("a = 1;\nv2 = v1;\nreturn v2;");
  fn.labels[2] = {DistortionType::I4};  // removed during correction
  fn.labels[3] = {DistortionType::I5};  // rewritten during correction

  CorrectionResult fix;
  fix.corrected_lines = {"a = 1;", "return a; //fixed"};
  fix.fixed_indices = {2};
  fix.removed_input_indices = {2};

  std::string csv = cfr_worksheet_header() + cfr_worksheet_rows("demo#0", fn, fix);
  CHECK(csv.find("function,line_no,original,corrected,detected_types,manual_verdict") !=
        std::string::npos);
  // the fixed output line maps past the removed I4 line onto the I5 source
  CHECK(csv.find("demo#0,2,return v2;,return a; //fixed,I5,") != std::string::npos);
  CHECK(csv.find("v2 = v1;") == std::string::npos);
}
