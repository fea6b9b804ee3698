// Times the OpenMP kernels against their serial reference implementations:
// retrieval scoring, index embedding, per-variable dependency tracing, and
// the mock-driven detection batch.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "fidelity/depgraph.hpp"
#include "fidelity/gateway.hpp"
#include "fidelity/pipeline.hpp"
#include "fidelity/prompt.hpp"
#include "fidelity/serial_ref.hpp"
#include "fidelity/store.hpp"
#include "support/synthetic.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace fidelity;
namespace fs = std::filesystem;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct Timing {
  double parallel_s = 0.0;
  double serial_s = 0.0;
};

void print_row(const char* name, const Timing& t) {
  double speedup = t.parallel_s > 0.0 ? t.serial_s / t.parallel_s : 0.0;
  std::printf("%-32s %10.3fs %10.3fs %8.2fx\n", name, t.serial_s, t.parallel_s, speedup);
}

Timing bench_retrieval(int records, int queries) {
  synthetic::Rng rng(1);
  DistortionIndex index =
      build_index(parse_database(synthetic::make_db(rng, records), DecompilerOrigin::Ida),
                  std::make_shared<HashEmbedder>());

  std::vector<std::string> query_lines;
  for (int q = 0; q < queries; ++q) query_lines.push_back(synthetic::make_db_line(rng, q));

  Timing t;
  double start = now_seconds();
  std::size_t checksum = 0;
  for (const std::string& q : query_lines) checksum += retrieve(index, q, 5)[0].record.id;
  t.parallel_s = now_seconds() - start;

  start = now_seconds();
  std::size_t ref_checksum = 0;
  for (const std::string& q : query_lines)
    ref_checksum += serial::retrieve_reference(index, q, 5)[0].record.id;
  t.serial_s = now_seconds() - start;

  if (checksum != ref_checksum) std::printf("retrieval checksum mismatch!\n");
  return t;
}

Timing bench_index_build(int records) {
  synthetic::Rng rng(2);
  std::vector<DistortionRecord> parsed =
      parse_database(synthetic::make_db(rng, records), DecompilerOrigin::Ida);
  auto embedder = std::make_shared<HashEmbedder>();

  Timing t;
  double start = now_seconds();
  DistortionIndex parallel_index = build_index(parsed, embedder);
  t.parallel_s = now_seconds() - start;

  // serial baseline: one embed per record, same math, no pragmas
  start = now_seconds();
  std::vector<EmbeddingVector> vectors;
  vectors.reserve(parsed.size());
  for (const DistortionRecord& r : parsed) vectors.push_back(embedder->embed(r.code_line));
  t.serial_s = now_seconds() - start;

  if (vectors.size() != parallel_index.size()) std::printf("index size mismatch!\n");
  return t;
}

Timing bench_dependency(int functions) {
  synthetic::Rng rng(3);
  std::vector<DecompiledFunction> fns;
  std::vector<DependenceGraph> graphs;
  for (int i = 0; i < functions; ++i) {
    fns.push_back(parse_function(synthetic::make_function(rng, 30)));
    graphs.push_back(build_dependence_graph(fns.back()));
  }

  Timing t;
  double start = now_seconds();
  std::size_t entries = 0;
  for (int i = 0; i < functions; ++i)
    entries += variable_dependency_analysis(fns[i], graphs[i]).size();
  t.parallel_s = now_seconds() - start;

  start = now_seconds();
  std::size_t ref_entries = 0;
  for (int i = 0; i < functions; ++i)
    for (const std::string& var : fns[i].variables) {
      serial::dependency_closure(fns[i], graphs[i], var);
      ++ref_entries;
    }
  t.serial_s = now_seconds() - start;

  if (entries != ref_entries) std::printf("dependency entry count mismatch!\n");
  return t;
}

Timing bench_batch(int functions) {
  fs::path root = fs::temp_directory_path() / "fidelity_bench_batch";
  fs::remove_all(root);
  fs::create_directories(root / "in");

  synthetic::Rng rng(4);
  std::vector<std::string> fns;
  for (int i = 0; i < functions; ++i) fns.push_back(synthetic::make_function(rng));
  write_function_file(fns, root / "in" / "bench.txt");

  PromptLibrary prompts = PromptLibrary::load_default();
  DistortionIndex index =
      build_index(parse_database(synthetic::make_db(rng, 100), DecompilerOrigin::Ida),
                  std::make_shared<HashEmbedder>());

  auto run = [&](int jobs, const char* out_name) {
    LlmGateway gateway(MockProvider::oracle(), GatewayOptions{64, 3, 0});
    PipelineServices services;
    services.index = &index;
    services.weights = derive_feature_weights(index.records());
    services.gateway = &gateway;
    services.prompts = &prompts;
    services.config.input_dir = (root / "in").string();
    services.config.output_dir = (root / out_name).string();
    BatchOptions options;
    options.jobs = jobs;
    double start = now_seconds();
    run_batch(services, options);
    return now_seconds() - start;
  };

  Timing t;
  t.parallel_s = run(0, "out_par");
  t.serial_s = run(1, "out_ser");
  fs::remove_all(root);
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  int scale = argc > 1 ? std::atoi(argv[1]) : 1;
  if (scale < 1) scale = 1;

#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; parallel kernels run serially\n");
#endif
  std::printf("%-32s %11s %11s %9s\n", "kernel", "serial", "parallel", "speedup");

  print_row("retrieval scan (20k x 200)", bench_retrieval(20000 * scale, 200));
  print_row("index embedding (50k)", bench_index_build(50000 * scale));
  print_row("dependency tracing (400 fns)", bench_dependency(400 * scale));
  print_row("mock detection batch (300 fns)", bench_batch(300 * scale));
  return 0;
}
