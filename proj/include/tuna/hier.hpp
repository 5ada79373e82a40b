#pragma once

// Hierarchical variant: every node runs N concurrent Q-way radix exchanges
// whose per-round messages are shared (one metadata + one data message per
// rank per round, carrying all N destination-node groups), then nodes trade
// the staged blocks with their matching rank (same in-node index) in either
// coalesced (one message per peer node) or staggered (one message per source
// slot) form.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tuna/alltoallv.hpp"
#include "tuna/core.hpp"
#include "tuna/sim.hpp"
#include "tuna/tuna.hpp"

namespace tuna {

enum class HierVariant { coalesced, staggered };

inline const char* to_string(HierVariant v) {
  return v == HierVariant::coalesced ? "coalesced" : "staggered";
}

struct HierParams {
  int P = 1;
  int Q = 1;           // ranks per node
  int N = 1;           // node count, P / Q
  int r = 2;           // intra-node radix
  int block_count = 1; // inter-node batch size
  HierVariant variant = HierVariant::coalesced;

  HierParams() = default;
  HierParams(int P_, int Q_, int r_, int block_count_, HierVariant variant_)
      : P(P_), Q(Q_), r(r_), block_count(block_count_), variant(variant_) {
    if (P < 1) throw std::invalid_argument("HierParams: P must be >= 1");
    if (Q < 1 || P % Q != 0) throw std::invalid_argument("HierParams: Q must divide P");
    N = P / Q;
    if (r < 2) throw std::invalid_argument("HierParams: r must be >= 2");
    if (Q > 1 && r > Q) throw std::invalid_argument("HierParams: r must be <= Q");
    if (block_count < 1) throw std::invalid_argument("HierParams: block_count must be >= 1");
    const int limit = variant == HierVariant::coalesced ? N - 1 : (N - 1) * Q;
    if (N > 1 && block_count > limit)
      throw std::invalid_argument("HierParams: block_count exceeds the inter-node round count");
  }
};

// What one rank holds after the intra-node phase: finished rows for its own
// node plus, per peer node m, the Q blocks headed for rank m*Q + g, indexed
// by source slot.
struct StagedBlocks {
  RankBlocks R;                   // length P, own-node sources filled
  std::vector<RankBlocks> stage;  // stage[m][q], empty for the own node
  int peak_temp = 0;
};

// Compacted staging for the coalesced path: payloads for all peer nodes back
// to back (node-ascending, source-slot-ascending, own node skipped) with a
// flat length and offset table.
struct CompactStaging {
  Bytes buf;
  std::vector<std::uint64_t> lengths;
  std::vector<std::uint64_t> offsets;
};

inline CompactStaging rearrange_staging(const std::vector<RankBlocks>& stage, int own_node) {
  CompactStaging cs;
  std::uint64_t total = 0;
  for (std::size_t m = 0; m < stage.size(); ++m) {
    if (static_cast<int>(m) == own_node) continue;
    for (const Bytes& b : stage[m]) total += b.size();
  }
  cs.buf.reserve(total);
  for (std::size_t m = 0; m < stage.size(); ++m) {
    if (static_cast<int>(m) == own_node) continue;
    for (const Bytes& b : stage[m]) {
      cs.offsets.push_back(cs.buf.size());
      cs.lengths.push_back(b.size());
      cs.buf.insert(cs.buf.end(), b.begin(), b.end());
    }
  }
  return cs;
}

// N group exchanges sharing one metadata and one data message per round.
inline sim::Task<StagedBlocks> intra_node_exchange(sim::Comm& c, const Workload& w,
                                                   const HierParams& hp,
                                                   const core::Schedule& sched,
                                                   std::uint64_t M) {
  const int P = hp.P;
  const int Q = hp.Q;
  const int N = hp.N;
  const int p = c.rank();
  const int g = p % Q;
  const int n = p / Q;

  StagedBlocks st;
  st.R.resize(static_cast<std::size_t>(P));
  st.stage.resize(static_cast<std::size_t>(N));
  for (int m = 0; m < N; ++m)
    if (m != n) st.stage[static_cast<std::size_t>(m)].resize(static_cast<std::size_t>(Q));

  // label 0 of every group never travels intra-node
  for (int m = 0; m < N; ++m) {
    const Bytes& own = w.payloads[static_cast<std::size_t>(p)][static_cast<std::size_t>(m * Q + g)];
    if (m == n)
      st.R[static_cast<std::size_t>(p)] = own;
    else
      st.stage[static_cast<std::size_t>(m)][static_cast<std::size_t>(g)] = own;
  }
  if (Q == 1 || sched.K() == 0) co_return st;

  const core::RadixParams& rp = sched.params;
  // cur_len[m][j]: current length of group m's block labeled j
  std::vector<std::vector<std::uint64_t>> cur_len(static_cast<std::size_t>(N));
  for (int m = 0; m < N; ++m) {
    auto& row = cur_len[static_cast<std::size_t>(m)];
    row.resize(static_cast<std::size_t>(Q));
    for (int j = 0; j < Q; ++j)
      row[static_cast<std::size_t>(j)] =
          w.send_sizes[static_cast<std::size_t>(p)]
                      [static_cast<std::size_t>(m * Q + (g - j + Q) % Q)];
  }

  const int B = core::temp_capacity(rp);
  Bytes arena(static_cast<std::size_t>(N) * static_cast<std::size_t>(B) * M);
  std::vector<char> occupied(static_cast<std::size_t>(N) * static_cast<std::size_t>(B), 0);
  int live = 0;
  int peak = 0;
  const auto slot_of = [&](int m, int j) {
    return static_cast<std::size_t>(m) * static_cast<std::size_t>(B) +
           static_cast<std::size_t>(core::temp_slot(rp, j));
  };

  for (int k = 0; k < sched.K(); ++k) {
    const core::Round& rd = sched.rounds[static_cast<std::size_t>(k)];
    const std::int64_t rx = core::ipow(rp.r, rd.x);
    const int hop = static_cast<int>(rd.distance);
    const int send_to = n * Q + (g - hop + Q) % Q;
    const int recv_from = n * Q + (g + hop) % Q;

    Bytes meta;
    meta.reserve(static_cast<std::size_t>(N) * rd.labels.size() * 8);
    Bytes blob;
    for (int m = 0; m < N; ++m) {
      for (int j : rd.labels) {
        const std::uint64_t len = cur_len[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)];
        le64_append(meta, len);
        if (j % rx == 0) {
          const Bytes& src = w.payloads[static_cast<std::size_t>(p)]
                                       [static_cast<std::size_t>(m * Q + (g - j + Q) % Q)];
          blob.insert(blob.end(), src.begin(), src.end());
        } else {
          const std::size_t t = slot_of(m, j);
          const std::uint8_t* s = arena.data() + t * M;
          blob.insert(blob.end(), s, s + len);
          occupied[t] = 0;
          --live;
        }
      }
    }

    const sim::Req mr = c.post_recv(recv_from, sim::tag_for(k, sim::Phase::metadata));
    const sim::Req ms = c.post_send(send_to, sim::tag_for(k, sim::Phase::metadata),
                                    sim::Phase::metadata, k, std::move(meta));
    co_await c.wait_all({mr, ms});
    const Bytes in_meta = c.take_payload(mr);
    if (in_meta.size() != static_cast<std::size_t>(N) * rd.labels.size() * 8)
      throw sim::ProtocolError("htuna: metadata size disagrees with the round's block set");
    std::size_t entry = 0;
    for (int m = 0; m < N; ++m)
      for (int j : rd.labels)
        cur_len[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)] = le64_read(in_meta, entry++);

    const sim::Req dr = c.post_recv(recv_from, sim::tag_for(k, sim::Phase::data));
    const sim::Req ds = c.post_send(send_to, sim::tag_for(k, sim::Phase::data), sim::Phase::data,
                                    k, std::move(blob));
    co_await c.wait_all({dr, ds});
    const Bytes in = c.take_payload(dr);

    std::size_t off = 0;
    const std::int64_t done_below = rx * rp.r;
    for (int m = 0; m < N; ++m) {
      for (int j : rd.labels) {
        const std::uint64_t len = cur_len[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)];
        if (off + len > in.size())
          throw sim::ProtocolError("htuna: data blob shorter than its metadata claims");
        if (j < done_below) {
          const int q = (g + j) % Q;
          Bytes& out = m == n ? st.R[static_cast<std::size_t>(n * Q + q)]
                              : st.stage[static_cast<std::size_t>(m)][static_cast<std::size_t>(q)];
          out.assign(in.begin() + static_cast<std::ptrdiff_t>(off),
                     in.begin() + static_cast<std::ptrdiff_t>(off + len));
        } else {
          const std::size_t t = slot_of(m, j);
          if (len > M) throw sim::ProtocolError("htuna: block exceeds the slot stride");
          if (occupied[t]) throw sim::ProtocolError("htuna: temporary slot collision");
          std::copy(in.begin() + static_cast<std::ptrdiff_t>(off),
                    in.begin() + static_cast<std::ptrdiff_t>(off + len),
                    arena.begin() + static_cast<std::ptrdiff_t>(t * M));
          occupied[t] = 1;
          ++live;
          peak = std::max(peak, live);
        }
        off += len;
      }
    }
    if (off != in.size())
      throw sim::ProtocolError("htuna: data blob longer than its metadata claims");
  }

  if (live != 0) throw sim::ProtocolError("htuna: blocks left in the temporary buffer");
  st.peak_temp = peak;
  co_return st;
}

// One metadata (Q lengths) plus one data message (Q contiguous blocks) per
// peer node, batched by block_count; rank (n, g) only talks to ranks (m, g).
inline sim::Task<void> inter_node_coalesced(sim::Comm& c, const HierParams& hp,
                                            const CompactStaging& cs, int intra_rounds,
                                            RankBlocks& R) {
  const int Q = hp.Q;
  const int N = hp.N;
  const int p = c.rank();
  const int g = p % Q;
  const int n = p / Q;

  for (int first = 1; first < N; first += hp.block_count) {
    const int last = std::min(first + hp.block_count, N);
    std::vector<sim::Req> waits;
    struct Incoming {
      int src_node;
      sim::Req meta, data;
    };
    std::vector<Incoming> in;
    for (int off = first; off < last; ++off) {
      const int nsrc = (n + off) % N;
      const int round = intra_rounds + off - 1;
      Incoming rx;
      rx.src_node = nsrc;
      rx.meta = c.post_recv(nsrc * Q + g, sim::tag_for(round, sim::Phase::metadata));
      rx.data = c.post_recv(nsrc * Q + g, sim::tag_for(round, sim::Phase::data));
      waits.push_back(rx.meta);
      waits.push_back(rx.data);
      in.push_back(rx);
    }
    for (int off = first; off < last; ++off) {
      const int ndst = (n - off + N) % N;
      const int round = intra_rounds + off - 1;
      const std::size_t base = static_cast<std::size_t>(ndst < n ? ndst : ndst - 1) *
                               static_cast<std::size_t>(Q);
      Bytes meta;
      meta.reserve(static_cast<std::size_t>(Q) * 8);
      std::uint64_t span = 0;
      for (int q = 0; q < Q; ++q) {
        le64_append(meta, cs.lengths[base + static_cast<std::size_t>(q)]);
        span += cs.lengths[base + static_cast<std::size_t>(q)];
      }
      const std::uint64_t start = cs.offsets[base];
      Bytes blob(cs.buf.begin() + static_cast<std::ptrdiff_t>(start),
                 cs.buf.begin() + static_cast<std::ptrdiff_t>(start + span));
      waits.push_back(c.post_send(ndst * Q + g, sim::tag_for(round, sim::Phase::metadata),
                                  sim::Phase::metadata, round, std::move(meta)));
      waits.push_back(c.post_send(ndst * Q + g, sim::tag_for(round, sim::Phase::data),
                                  sim::Phase::data, round, std::move(blob)));
    }
    co_await c.wait_all(waits);
    for (const Incoming& rx : in) {
      const Bytes meta = c.take_payload(rx.meta);
      const Bytes blob = c.take_payload(rx.data);
      std::size_t off = 0;
      for (int q = 0; q < Q; ++q) {
        const std::uint64_t len = le64_read(meta, static_cast<std::size_t>(q));
        if (off + len > blob.size())
          throw sim::ProtocolError("htuna: inter-node blob shorter than its metadata claims");
        R[static_cast<std::size_t>(rx.src_node * Q + q)].assign(
            blob.begin() + static_cast<std::ptrdiff_t>(off),
            blob.begin() + static_cast<std::ptrdiff_t>(off + len));
        off += len;
      }
      if (off != blob.size())
        throw sim::ProtocolError("htuna: inter-node blob longer than its metadata claims");
    }
  }
  co_return;
}

// One metadata + data message per (peer node, source slot) pair, batched by
// block_count; same rank pairing as coalesced but the staging buffer is
// addressed in place, no compaction.
inline sim::Task<void> inter_node_staggered(sim::Comm& c, const HierParams& hp,
                                            const std::vector<RankBlocks>& stage,
                                            int intra_rounds, RankBlocks& R) {
  const int Q = hp.Q;
  const int N = hp.N;
  const int p = c.rank();
  const int g = p % Q;
  const int n = p / Q;
  const int steps = (N - 1) * Q;

  for (int first = 0; first < steps; first += hp.block_count) {
    const int last = std::min(first + hp.block_count, steps);
    std::vector<sim::Req> waits;
    struct Incoming {
      int src_rank, src_slot;
      sim::Req meta, data;
    };
    std::vector<Incoming> in;
    for (int e = first; e < last; ++e) {
      const int gi = e / Q + 1;
      const int gr = e % Q;
      const int nsrc = (n + gi) % N;
      const int round = intra_rounds + e;
      Incoming rx;
      rx.src_rank = nsrc * Q + gr;
      rx.src_slot = gr;
      rx.meta = c.post_recv(nsrc * Q + g, sim::tag_for(round, sim::Phase::metadata));
      rx.data = c.post_recv(nsrc * Q + g, sim::tag_for(round, sim::Phase::data));
      waits.push_back(rx.meta);
      waits.push_back(rx.data);
      in.push_back(rx);
    }
    for (int e = first; e < last; ++e) {
      const int gi = e / Q + 1;
      const int gr = e % Q;
      const int ndst = (n - gi + N) % N;
      const int round = intra_rounds + e;
      const Bytes& block = stage[static_cast<std::size_t>(ndst)][static_cast<std::size_t>(gr)];
      Bytes meta;
      le64_append(meta, block.size());
      waits.push_back(c.post_send(ndst * Q + g, sim::tag_for(round, sim::Phase::metadata),
                                  sim::Phase::metadata, round, std::move(meta)));
      waits.push_back(c.post_send(ndst * Q + g, sim::tag_for(round, sim::Phase::data),
                                  sim::Phase::data, round, Bytes(block)));
    }
    co_await c.wait_all(waits);
    for (const Incoming& rx : in) {
      const Bytes meta = c.take_payload(rx.meta);
      Bytes blob = c.take_payload(rx.data);
      if (le64_read(meta, 0) != blob.size())
        throw sim::ProtocolError("htuna: inter-node block disagrees with its metadata");
      R[static_cast<std::size_t>(rx.src_rank)] = std::move(blob);
    }
  }
  co_return;
}

inline sim::Task<RankBlocks> htuna_rank(sim::Comm& c, const Workload& w, const HierParams& hp,
                                        const core::Schedule& sched, std::uint64_t M,
                                        int* peak_out) {
  StagedBlocks st = co_await intra_node_exchange(c, w, hp, sched, M);
  *peak_out = st.peak_temp;
  if (hp.N > 1) {
    if (hp.variant == HierVariant::coalesced) {
      const CompactStaging cs = rearrange_staging(st.stage, c.rank() / hp.Q);
      co_await inter_node_coalesced(c, hp, cs, sched.K(), st.R);
    } else {
      co_await inter_node_staggered(c, hp, st.stage, sched.K(), st.R);
    }
  }
  co_return std::move(st.R);
}

struct HtunaRunResult {
  GatheredResult result;
  sim::Trace trace;
  TunaStats stats;
};

inline HtunaRunResult run_htuna(const Workload& w, const HierParams& hp) {
  w.validate();
  if (w.P != hp.P) throw std::invalid_argument("run_htuna: workload P disagrees with params");
  const core::Schedule sched = core::build_schedule(core::RadixParams(hp.Q, hp.r));
  const std::uint64_t M = w.max_block();

  HtunaRunResult out;
  out.stats.peak_temp_blocks.assign(static_cast<std::size_t>(w.P), 0);
  auto& peaks = out.stats.peak_temp_blocks;
  auto run = sim::run_processes(w.P, hp.Q, [&](sim::Comm& c) {
    return htuna_rank(c, w, hp, sched, M, &peaks[static_cast<std::size_t>(c.rank())]);
  });
  out.result.recv = std::move(run.outputs);
  out.trace = std::move(run.trace);
  return out;
}

}  // namespace tuna
