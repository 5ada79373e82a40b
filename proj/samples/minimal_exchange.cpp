// Smallest useful program: generate a non-uniform workload, run the radix
// exchange, and check the result against the direct oracle.

#include <cstdlib>
#include <iostream>

#include "tuna/tuna.hpp"
#include "tuna/workloads.hpp"

int main() {
  tuna::DistSpec dist;
  dist.kind = tuna::DistSpec::Kind::uniform;
  dist.S = 256;  // block sizes drawn from [0, 256]
  dist.seed = 42;

  const tuna::Workload w = tuna::generate(/*P=*/16, dist);
  const tuna::TunaRunResult run = tuna::run_tuna(w, /*r=*/4);

  const tuna::GatheredResult want = tuna::oracle_direct(w);
  if (const auto div = tuna::first_divergence(run.result, want)) {
    std::cerr << div->describe() << "\n";
    return EXIT_FAILURE;
  }

  const tuna::sim::Metrics m = tuna::sim::metrics_from_trace(run.trace);
  std::cout << "verified " << w.P << " ranks, " << w.total_bytes() << " payload bytes\n"
            << "rounds: " << m.rounds << "\n"
            << "data messages: " << m.msgs_total(tuna::sim::Phase::data) << "\n"
            << "peak staging blocks: " << run.stats.peak_temp() << "\n";
  return EXIT_SUCCESS;
}
