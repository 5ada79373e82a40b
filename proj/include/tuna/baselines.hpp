#pragma once

// Linear all-to-all baselines: every rank exchanges directly with every peer,
// P - 1 data messages per rank, no metadata phase (alltoallv semantics make
// receive sizes known a priori).  They differ only in request scheduling.

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tuna/alltoallv.hpp"
#include "tuna/sim.hpp"

namespace tuna {

enum class PairOrder { shift, xor_ };

namespace detail {

inline void check_workload_size(const Workload& w, const sim::Comm& c) {
  if (w.P != c.size()) throw std::invalid_argument("workload P disagrees with communicator size");
}

}  // namespace detail

// One non-blocking recv and send per offset, all in flight at once.
inline sim::Task<RankBlocks> spread_out_rank(sim::Comm& c, const Workload& w) {
  detail::check_workload_size(w, c);
  const int P = c.size();
  const int p = c.rank();
  RankBlocks R(static_cast<std::size_t>(P));
  R[static_cast<std::size_t>(p)] = w.payloads[static_cast<std::size_t>(p)][static_cast<std::size_t>(p)];

  std::vector<sim::Req> waits;
  std::vector<std::pair<int, sim::Req>> recvs;
  for (int i = 1; i < P; ++i) {
    const int peer = (p + i) % P;
    const sim::Req r = c.post_recv(peer, 0);
    recvs.emplace_back(peer, r);
    waits.push_back(r);
    waits.push_back(c.post_send(peer, 0, sim::Phase::data, 0,
                                w.payloads[static_cast<std::size_t>(p)][static_cast<std::size_t>(peer)]));
  }
  co_await c.wait_all(waits);
  for (auto& [peer, r] : recvs) R[static_cast<std::size_t>(peer)] = c.take_payload(r);
  co_return R;
}

// Spread-out offsets issued in batches of block_count with a wait_all after
// each batch.  Receives come from (p + i), sends go to (p - i): the mirrored
// directions pair every send with a receive posted in the same batch, so any
// block_count down to 1 makes progress.
inline sim::Task<RankBlocks> scattered_rank(sim::Comm& c, const Workload& w, int block_count) {
  detail::check_workload_size(w, c);
  const int P = c.size();
  const int p = c.rank();
  if (block_count < 1 || (P > 1 && block_count > P - 1))
    throw std::invalid_argument("scattered: block_count must be in [1, P-1]");
  RankBlocks R(static_cast<std::size_t>(P));
  R[static_cast<std::size_t>(p)] = w.payloads[static_cast<std::size_t>(p)][static_cast<std::size_t>(p)];

  for (int first = 1; first < P; first += block_count) {
    const int last = first + block_count < P ? first + block_count : P;
    const int batch = (first - 1) / block_count;
    std::vector<sim::Req> waits;
    std::vector<std::pair<int, sim::Req>> recvs;
    for (int i = first; i < last; ++i) {
      const int peer = (p + i) % P;
      const sim::Req r = c.post_recv(peer, 0);
      recvs.emplace_back(peer, r);
      waits.push_back(r);
    }
    for (int i = first; i < last; ++i) {
      const int peer = (p - i + P) % P;
      waits.push_back(c.post_send(peer, 0, sim::Phase::data, batch,
                                  w.payloads[static_cast<std::size_t>(p)][static_cast<std::size_t>(peer)]));
    }
    co_await c.wait_all(waits);
    for (auto& [peer, r] : recvs) R[static_cast<std::size_t>(peer)] = c.take_payload(r);
  }
  co_return R;
}

// One Irecv plus a blocking send per round; at most two requests in flight.
inline sim::Task<RankBlocks> pairwise_rank(sim::Comm& c, const Workload& w, PairOrder order) {
  detail::check_workload_size(w, c);
  const int P = c.size();
  const int p = c.rank();
  if (order == PairOrder::xor_ && (P & (P - 1)) != 0)
    throw std::invalid_argument("pairwise: xor order needs a power-of-two P");
  RankBlocks R(static_cast<std::size_t>(P));
  R[static_cast<std::size_t>(p)] = w.payloads[static_cast<std::size_t>(p)][static_cast<std::size_t>(p)];

  for (int i = 1; i < P; ++i) {
    const int send_peer = order == PairOrder::shift ? (p + i) % P : (p ^ i);
    const int recv_peer = order == PairOrder::shift ? (p - i + P) % P : (p ^ i);
    const sim::Req r = c.post_recv(recv_peer, 0);
    const sim::Req s = c.post_send(send_peer, 0, sim::Phase::data, i,
                                   w.payloads[static_cast<std::size_t>(p)][static_cast<std::size_t>(send_peer)]);
    co_await c.wait_all({s});  // blocking send
    co_await c.wait_all({r});
    R[static_cast<std::size_t>(recv_peer)] = c.take_payload(r);
  }
  co_return R;
}

// All receives in ascending source order, then all sends in ascending
// destination order, one wait_all.
inline sim::Task<RankBlocks> linear_ascending_rank(sim::Comm& c, const Workload& w) {
  detail::check_workload_size(w, c);
  const int P = c.size();
  const int p = c.rank();
  RankBlocks R(static_cast<std::size_t>(P));
  R[static_cast<std::size_t>(p)] = w.payloads[static_cast<std::size_t>(p)][static_cast<std::size_t>(p)];

  std::vector<sim::Req> waits;
  std::vector<std::pair<int, sim::Req>> recvs;
  for (int s = 0; s < P; ++s) {
    if (s == p) continue;
    const sim::Req r = c.post_recv(s, 0);
    recvs.emplace_back(s, r);
    waits.push_back(r);
  }
  for (int d = 0; d < P; ++d) {
    if (d == p) continue;
    waits.push_back(c.post_send(d, 0, sim::Phase::data, 0,
                                w.payloads[static_cast<std::size_t>(p)][static_cast<std::size_t>(d)]));
  }
  co_await c.wait_all(waits);
  for (auto& [src, r] : recvs) R[static_cast<std::size_t>(src)] = c.take_payload(r);
  co_return R;
}

struct RunResult {
  GatheredResult result;
  sim::Trace trace;
};

namespace detail {

template <class MakeTask>
RunResult run_alltoallv(const Workload& w, int Q, MakeTask make) {
  w.validate();
  auto out = sim::run_processes(w.P, Q == 0 ? w.P : Q, make);
  RunResult r;
  r.result.recv = std::move(out.outputs);
  r.trace = std::move(out.trace);
  return r;
}

}  // namespace detail

// Drivers: Q sets the node size for link accounting (0 means one flat node).
inline RunResult run_spread_out(const Workload& w, int Q = 0) {
  return detail::run_alltoallv(w, Q, [&w](sim::Comm& c) { return spread_out_rank(c, w); });
}

inline RunResult run_scattered(const Workload& w, int block_count, int Q = 0) {
  return detail::run_alltoallv(
      w, Q, [&w, block_count](sim::Comm& c) { return scattered_rank(c, w, block_count); });
}

inline RunResult run_pairwise(const Workload& w, PairOrder order, int Q = 0) {
  return detail::run_alltoallv(w, Q,
                               [&w, order](sim::Comm& c) { return pairwise_rank(c, w, order); });
}

inline RunResult run_linear_ascending(const Workload& w, int Q = 0) {
  return detail::run_alltoallv(w, Q, [&w](sim::Comm& c) { return linear_ascending_rank(c, w); });
}

}  // namespace tuna
