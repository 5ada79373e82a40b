#pragma once

// Alpha-beta cost model over traces and closed-form schedules.  Rounds are
// treated as bulk-synchronous: each costs one latency unit per message of the
// busiest rank plus bandwidth for the most bytes any rank pushes.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tuna/core.hpp"
#include "tuna/sim.hpp"

namespace tuna {

struct CostParams {
  double alpha_intra = 4e-7;  // seconds per intra-node message
  double beta_intra = 5e-11;  // seconds per intra-node byte
  double alpha_inter = 2e-6;  // seconds per inter-node message
  double beta_inter = 1e-9;   // seconds per inter-node byte
  int meta_entry_bytes = 8;

  void validate() const {
    if (alpha_intra < 0 || beta_intra < 0 || alpha_inter < 0 || beta_inter < 0)
      throw std::invalid_argument("CostParams: rates must be non-negative");
    if (meta_entry_bytes < 0)
      throw std::invalid_argument("CostParams: meta_entry_bytes must be non-negative");
  }

  // unusual but not invalid: inter-node links are normally the slow ones
  std::optional<std::string> warning() const {
    if (alpha_inter < alpha_intra)
      return "alpha_inter below alpha_intra: inter-node latency cheaper than intra-node";
    if (beta_inter < beta_intra)
      return "beta_inter below beta_intra: inter-node bandwidth cheaper than intra-node";
    return std::nullopt;
  }
};

struct RoundCost {
  int round = 0;
  sim::Link link = sim::Link::intra_node;
  double latency_seconds = 0;
  double bandwidth_seconds = 0;
};

struct Prediction {
  double total_seconds = 0;
  std::vector<RoundCost> rounds;
};

inline Prediction predict_from_trace(const sim::Trace& t, const CostParams& cp) {
  cp.validate();
  // (round, link) -> per-source message and byte counts
  std::map<std::pair<int, int>, std::unordered_map<int, std::pair<std::uint64_t, std::uint64_t>>>
      acc;
  for (const auto& e : t.events) {
    if (e.link == sim::Link::self) continue;
    auto& cell = acc[{e.round, static_cast<int>(e.link)}][e.src];
    cell.first += 1;
    cell.second += e.bytes;
  }

  Prediction pred;
  for (const auto& [key, by_src] : acc) {
    std::uint64_t max_msgs = 0;
    std::uint64_t max_bytes = 0;
    for (const auto& [src, cell] : by_src) {
      max_msgs = std::max(max_msgs, cell.first);
      max_bytes = std::max(max_bytes, cell.second);
    }
    const auto link = static_cast<sim::Link>(key.second);
    const double alpha = link == sim::Link::inter_node ? cp.alpha_inter : cp.alpha_intra;
    const double beta = link == sim::Link::inter_node ? cp.beta_inter : cp.beta_intra;
    RoundCost rc;
    rc.round = key.first;
    rc.link = link;
    rc.latency_seconds = alpha * static_cast<double>(max_msgs);
    rc.bandwidth_seconds = beta * static_cast<double>(max_bytes);
    pred.total_seconds += rc.latency_seconds + rc.bandwidth_seconds;
    pred.rounds.push_back(rc);
  }
  return pred;
}

// Closed-form cost of a radix-r exchange over inter-node links: per round one
// metadata and one data message (two latency units) and, for the busiest
// rank, one block plus one length entry per label.
inline Prediction analytic_tuna_cost(int P, int r, double mean_block_bytes,
                                     const CostParams& cp) {
  cp.validate();
  if (mean_block_bytes < 0)
    throw std::invalid_argument("analytic_tuna_cost: mean_block_bytes must be non-negative");
  const core::Schedule sched = core::build_schedule(core::RadixParams(P, r));
  Prediction pred;
  for (int k = 0; k < sched.K(); ++k) {
    const auto blocks = static_cast<double>(sched.rounds[static_cast<std::size_t>(k)].labels.size());
    RoundCost rc;
    rc.round = k;
    rc.link = sim::Link::inter_node;
    rc.latency_seconds = 2 * cp.alpha_inter;
    rc.bandwidth_seconds =
        cp.beta_inter * (blocks * mean_block_bytes + blocks * cp.meta_entry_bytes);
    pred.total_seconds += rc.latency_seconds + rc.bandwidth_seconds;
    pred.rounds.push_back(rc);
  }
  return pred;
}

struct RadixPoint {
  int r = 2;
  double predicted_seconds = 0;
  int K = 0;
  std::uint64_t D = 0;
};

// Ties go to the larger radix: r = P-1 and r = P produce identical schedules
// (K = D = P-1) and the degenerate linear case is canonically named r = P.
inline std::pair<int, std::vector<RadixPoint>> sweep_radix(int P, double mean_block_bytes,
                                                           const CostParams& cp) {
  if (P < 2) throw std::invalid_argument("sweep_radix: P must be >= 2");
  std::vector<RadixPoint> curve;
  curve.reserve(static_cast<std::size_t>(P - 1));
  int best_r = 2;
  double best_cost = 0;
  for (int r = 2; r <= P; ++r) {
    const core::ScheduleCounts sc = core::schedule_counts(P, r);
    RadixPoint pt;
    pt.r = r;
    pt.predicted_seconds = analytic_tuna_cost(P, r, mean_block_bytes, cp).total_seconds;
    pt.K = sc.K;
    pt.D = sc.D;
    if (curve.empty() || pt.predicted_seconds <= best_cost) {
      best_r = r;
      best_cost = pt.predicted_seconds;
    }
    curve.push_back(pt);
  }
  return {best_r, curve};
}

struct BlockCountPoint {
  int block_count = 1;
  double predicted_seconds = 0;
  std::uint64_t wait_calls = 0;         // busiest rank
  std::uint64_t excess_outstanding = 0; // busiest rank
};

// Evaluates a batched exchange at every block_count in [1, max_block_count].
// gen(bc) must return the run's trace.  Cost = per-round alpha-beta total
// + one latency unit per wait_all of the busiest rank + congestion_penalty
// per unit of concurrent outstanding sends above one.  Ties go to the
// smaller block_count.
template <class Gen>
std::pair<int, std::vector<BlockCountPoint>> sweep_block_count(Gen&& gen, int max_block_count,
                                                               const CostParams& cp,
                                                               double congestion_penalty) {
  if (max_block_count < 1)
    throw std::invalid_argument("sweep_block_count: max_block_count must be >= 1");
  if (congestion_penalty < 0)
    throw std::invalid_argument("sweep_block_count: congestion_penalty must be non-negative");
  std::vector<BlockCountPoint> curve;
  curve.reserve(static_cast<std::size_t>(max_block_count));
  int best_bc = 1;
  double best_cost = 0;
  for (int bc = 1; bc <= max_block_count; ++bc) {
    const sim::Trace trace = gen(bc);
    bool any_inter = false;
    for (const auto& e : trace.events)
      if (e.link == sim::Link::inter_node) any_inter = true;
    const double alpha_wait = any_inter ? cp.alpha_inter : cp.alpha_intra;

    BlockCountPoint pt;
    pt.block_count = bc;
    for (const auto& rs : trace.rank_stats) {
      pt.wait_calls = std::max(pt.wait_calls, static_cast<std::uint64_t>(rs.wait_calls));
      pt.excess_outstanding =
          std::max(pt.excess_outstanding, static_cast<std::uint64_t>(rs.excess_outstanding));
    }
    pt.predicted_seconds = predict_from_trace(trace, cp).total_seconds +
                           alpha_wait * static_cast<double>(pt.wait_calls) +
                           congestion_penalty * static_cast<double>(pt.excess_outstanding);
    if (curve.empty() || pt.predicted_seconds < best_cost) {
      best_bc = bc;
      best_cost = pt.predicted_seconds;
    }
    curve.push_back(pt);
  }
  return {best_bc, curve};
}

namespace detail {

inline std::string format_seconds(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_radix_curve_csv(std::ostream& os, int P,
                                  const std::vector<RadixPoint>& curve) {
  os << "P,r,predicted_seconds,K,D\n";
  for (const auto& pt : curve)
    os << P << ',' << pt.r << ',' << detail::format_seconds(pt.predicted_seconds) << ','
       << pt.K << ',' << pt.D << '\n';
}

// K and D columns carry the batch analogues here: wait_all count and excess
// outstanding sends of the busiest rank.
inline void write_block_count_curve_csv(std::ostream& os, int P,
                                        const std::vector<BlockCountPoint>& curve) {
  os << "P,block_count,predicted_seconds,K,D\n";
  for (const auto& pt : curve)
    os << P << ',' << pt.block_count << ',' << detail::format_seconds(pt.predicted_seconds)
       << ',' << pt.wait_calls << ',' << pt.excess_outstanding << '\n';
}

}  // namespace tuna
