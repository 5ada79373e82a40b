#pragma once

// Radix-r logarithmic non-uniform all-to-all.  Each round ships a metadata
// message (64-bit block lengths) ahead of the payload so receivers can parse
// variable-size blocks; blocks still in transit between their hops live in a
// fixed-stride temporary buffer of temp_capacity slots.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tuna/alltoallv.hpp"
#include "tuna/core.hpp"
#include "tuna/sim.hpp"

namespace tuna {

struct TunaStats {
  std::vector<int> peak_temp_blocks;  // per rank, max simultaneously occupied slots

  int peak_temp() const {
    int m = 0;
    for (int v : peak_temp_blocks) m = std::max(m, v);
    return m;
  }
};

struct TunaRunResult {
  GatheredResult result;
  sim::Trace trace;
  TunaStats stats;
};

namespace detail {

// Block labeled i starts as rank p's send block for destination (p - i) mod P.
inline std::vector<std::uint64_t> initial_lengths(const Workload& w, int p) {
  const int P = w.P;
  std::vector<std::uint64_t> len(static_cast<std::size_t>(P));
  for (int i = 0; i < P; ++i)
    len[static_cast<std::size_t>(i)] =
        w.send_sizes[static_cast<std::size_t>(p)][static_cast<std::size_t>((p - i + P) % P)];
  return len;
}

// The metadata message for one round: the current length of every block in
// the round's send set, in label order, little-endian 64-bit.
inline Bytes round_metadata(const core::Round& rd, const std::vector<std::uint64_t>& cur_len) {
  Bytes meta;
  meta.reserve(rd.labels.size() * 8);
  for (int i : rd.labels) le64_append(meta, cur_len[static_cast<std::size_t>(i)]);
  return meta;
}

}  // namespace detail

// One rank of the TuNA exchange.  The schedule and the global maximum block
// size M are computed once by the driver and shared read-only.
inline sim::Task<RankBlocks> tuna_rank(sim::Comm& c, const Workload& w,
                                       const core::Schedule& sched, std::uint64_t M,
                                       int* peak_out) {
  const int P = c.size();
  const int p = c.rank();
  RankBlocks R(static_cast<std::size_t>(P));
  R[static_cast<std::size_t>(p)] = w.payloads[static_cast<std::size_t>(p)][static_cast<std::size_t>(p)];
  *peak_out = 0;
  if (P == 1) co_return R;

  const core::RadixParams& rp = sched.params;
  std::vector<std::uint64_t> cur_len = detail::initial_lengths(w, p);

  const int B = core::temp_capacity(rp);
  Bytes arena(static_cast<std::size_t>(B) * M);
  std::vector<char> occupied(static_cast<std::size_t>(B), 0);
  int live = 0;
  int peak = 0;

  for (int k = 0; k < sched.K(); ++k) {
    const core::Round& rd = sched.rounds[static_cast<std::size_t>(k)];
    const std::int64_t rx = core::ipow(rp.r, rd.x);
    const int hop = static_cast<int>(rd.distance);
    const int send_to = (p - hop + P) % P;
    const int recv_from = (p + hop) % P;

    // Outgoing lengths and payload are built from the pre-round length table;
    // the metadata received this round only describes the incoming blob.
    Bytes meta = detail::round_metadata(rd, cur_len);
    Bytes blob;
    for (int i : rd.labels) {
      const std::uint64_t len = cur_len[static_cast<std::size_t>(i)];
      if (i % rx == 0) {
        // first hop: the block leaves rank p's own send table
        const Bytes& src =
            w.payloads[static_cast<std::size_t>(p)][static_cast<std::size_t>((p - i + P) % P)];
        blob.insert(blob.end(), src.begin(), src.end());
      } else {
        const auto t = static_cast<std::size_t>(core::temp_slot(rp, i));
        const std::uint8_t* s = arena.data() + t * M;
        blob.insert(blob.end(), s, s + len);
        occupied[t] = 0;
        --live;
      }
    }

    const sim::Req mr = c.post_recv(recv_from, sim::tag_for(k, sim::Phase::metadata));
    const sim::Req ms = c.post_send(send_to, sim::tag_for(k, sim::Phase::metadata),
                                    sim::Phase::metadata, k, std::move(meta));
    co_await c.wait_all({mr, ms});
    const Bytes in_meta = c.take_payload(mr);
    if (in_meta.size() != rd.labels.size() * 8)
      throw sim::ProtocolError("tuna: metadata size disagrees with the round's block set");
    for (std::size_t n = 0; n < rd.labels.size(); ++n)
      cur_len[static_cast<std::size_t>(rd.labels[n])] = le64_read(in_meta, n);

    const sim::Req dr = c.post_recv(recv_from, sim::tag_for(k, sim::Phase::data));
    const sim::Req ds = c.post_send(send_to, sim::tag_for(k, sim::Phase::data), sim::Phase::data,
                                    k, std::move(blob));
    co_await c.wait_all({dr, ds});
    const Bytes in = c.take_payload(dr);

    std::size_t off = 0;
    const std::int64_t done_below = rx * rp.r;  // every digit above x is zero
    for (int i : rd.labels) {
      const std::uint64_t len = cur_len[static_cast<std::size_t>(i)];
      if (off + len > in.size())
        throw sim::ProtocolError("tuna: data blob shorter than its metadata claims");
      if (i < done_below) {
        R[static_cast<std::size_t>((p + i) % P)].assign(in.begin() + static_cast<std::ptrdiff_t>(off),
                                                        in.begin() + static_cast<std::ptrdiff_t>(off + len));
      } else {
        const auto t = static_cast<std::size_t>(core::temp_slot(rp, i));
        if (len > M) throw sim::ProtocolError("tuna: block exceeds the slot stride");
        if (occupied[t]) throw sim::ProtocolError("tuna: temporary slot collision");
        std::copy(in.begin() + static_cast<std::ptrdiff_t>(off),
                  in.begin() + static_cast<std::ptrdiff_t>(off + len),
                  arena.begin() + static_cast<std::ptrdiff_t>(t * M));
        occupied[t] = 1;
        ++live;
        peak = std::max(peak, live);
      }
      off += len;
    }
    if (off != in.size())
      throw sim::ProtocolError("tuna: data blob longer than its metadata claims");
  }

  if (live != 0) throw sim::ProtocolError("tuna: blocks left in the temporary buffer");
  *peak_out = peak;
  co_return R;
}

// Q sets the node size for link accounting (0 means one flat node).
inline TunaRunResult run_tuna(const Workload& w, int r, int Q = 0) {
  w.validate();
  const core::RadixParams rp(w.P, r);
  const core::Schedule sched = core::build_schedule(rp);
  const std::uint64_t M = w.max_block();

  TunaRunResult out;
  out.stats.peak_temp_blocks.assign(static_cast<std::size_t>(w.P), 0);
  auto& peaks = out.stats.peak_temp_blocks;
  auto run = sim::run_processes(w.P, Q == 0 ? w.P : Q, [&](sim::Comm& c) {
    return tuna_rank(c, w, sched, M, &peaks[static_cast<std::size_t>(c.rank())]);
  });
  out.result.recv = std::move(run.outputs);
  out.trace = std::move(run.trace);
  return out;
}

}  // namespace tuna
