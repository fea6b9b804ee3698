#pragma once

// Serial reference implementations. These are the independent oracles the
// test suites check the production kernels against, and the baselines the
// benchmark times them against. Nothing in fidelity_core may call into
// this library.

#include <set>
#include <string>
#include <vector>

#include "fidelity/depgraph.hpp"
#include "fidelity/evaluation.hpp"
#include "fidelity/intensity.hpp"
#include "fidelity/store.hpp"

namespace fidelity::serial {

// Independent restatement of the dynamic-k formula.
int compute_k_reference(int total_lines, const IntensityParams& params);

// Set-saturation fixpoint over reversed PDG edges, seeded from statements
// mentioning the variable and extended through the variables of collected
// statements. Order-free; compares set-wise against trace_variable.
std::set<int> dependency_closure(const DecompiledFunction& function,
                                 const DependenceGraph& graph,
                                 const std::string& variable);

// Score every record, stable full sort, ties by record id.
std::vector<RetrievalHit> retrieve_reference(const DistortionIndex& index,
                                             const std::string& query_line, int k);

// Eq.-style arithmetic recomputed independently.
double accuracy_reference(long tp, long tn, long fp, long fn);
bool precision_reference(long tp, long fp, double& out);

// Closed-form chunk count.
long chunk_count_reference(int line_count, int threshold, int overlap);

// Serial confusion counting (production loop may run parallel).
ConfusionCounts confusion_reference(const std::vector<LinePair>& pairs);

}  // namespace fidelity::serial
