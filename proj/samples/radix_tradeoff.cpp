// Shows the latency/volume trade-off behind radix selection: fewer, fatter
// rounds as r grows, and the model's preferred radix at three block sizes.

#include <cstdio>

#include "tuna/costmodel.hpp"

int main() {
  const int P = 64;
  tuna::CostParams cost;  // defaults: inter-node 2us + 1ns/B

  std::printf("%4s %6s %6s\n", "r", "K", "D");
  for (int r : {2, 4, 8, 16, 32, 64}) {
    const tuna::core::ScheduleCounts c = tuna::core::schedule_counts(P, r);
    std::printf("%4d %6d %6llu\n", r, c.K, static_cast<unsigned long long>(c.D));
  }

  for (double s : {16.0, 1024.0, 65536.0}) {
    const auto [best_r, curve] = tuna::sweep_radix(P, s, cost);
    std::printf("blocks of %7.0f bytes -> best radix %d\n", s, best_r);
  }
  return 0;
}
