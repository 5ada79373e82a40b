#pragma once

// Non-uniform all-to-all problem statement: every rank owes every rank one
// block of bytes (possibly empty, self included).  Algorithms consume a
// Workload and must produce, at each rank d, the blocks {payload[s][d]}
// indexed by source.  oracle_direct is the ground truth they are checked
// against byte-for-byte.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tuna {

using Bytes = std::vector<std::uint8_t>;
using RankBlocks = std::vector<Bytes>;

// Parameters for the workload generators (see workloads.hpp).
struct DistSpec {
  enum class Kind { uniform, normal, powerlaw, fft_n1, fft_n2 };
  Kind kind = Kind::uniform;
  std::uint64_t S = 1024;   // size cap: uniform/normal clamp to [0, S], powerlaw to [1, S]
  double mean = 1000.0;     // normal only
  double stddev = 240.0;    // normal only
  double exponent = 0.95;   // powerlaw shape
  std::uint64_t seed = 1;
};

struct Workload {
  int P = 0;
  std::vector<std::vector<std::uint64_t>> send_sizes;  // [src][dst] bytes
  std::vector<RankBlocks> payloads;                    // [src][dst]
  std::optional<DistSpec> origin;  // set when produced by a generator

  void validate() const {
    if (P < 1) throw std::invalid_argument("Workload: P must be >= 1");
    const auto p = static_cast<std::size_t>(P);
    if (send_sizes.size() != p || payloads.size() != p)
      throw std::invalid_argument("Workload: row count must equal P");
    for (std::size_t s = 0; s < p; ++s) {
      if (send_sizes[s].size() != p || payloads[s].size() != p)
        throw std::invalid_argument("Workload: column count must equal P");
      for (std::size_t d = 0; d < p; ++d) {
        if (payloads[s][d].size() != send_sizes[s][d])
          throw std::invalid_argument("Workload: payload length disagrees with send_sizes at (" +
                                      std::to_string(s) + ", " + std::to_string(d) + ")");
      }
    }
  }

  std::uint64_t max_block() const {
    std::uint64_t m = 0;
    for (const auto& row : send_sizes)
      for (const std::uint64_t v : row)
        if (v > m) m = v;
    return m;
  }

  std::uint64_t total_bytes() const {
    std::uint64_t t = 0;
    for (const auto& row : send_sizes)
      for (const std::uint64_t v : row) t += v;
    return t;
  }
};

struct GatheredResult {
  std::vector<RankBlocks> recv;  // [dst][src]
};

// Ground-truth permutation: no transport involved.
inline GatheredResult oracle_direct(const Workload& w) {
  w.validate();
  GatheredResult g;
  g.recv.resize(static_cast<std::size_t>(w.P));
  for (int d = 0; d < w.P; ++d) {
    auto& row = g.recv[static_cast<std::size_t>(d)];
    row.resize(static_cast<std::size_t>(w.P));
    for (int s = 0; s < w.P; ++s) {
      row[static_cast<std::size_t>(s)] =
          w.payloads[static_cast<std::size_t>(s)][static_cast<std::size_t>(d)];
    }
  }
  return g;
}

struct Divergence {
  int rank = 0;    // receiving rank
  int source = 0;  // block's source rank
  std::size_t offset = 0;

  std::string describe() const {
    return "first divergence at rank " + std::to_string(rank) + ", source " +
           std::to_string(source) + ", byte offset " + std::to_string(offset);
  }
};

// First mismatch in (rank, source, offset) order, or nullopt when identical.
// A length mismatch reports the first offset past the shorter block.
inline std::optional<Divergence> first_divergence(const GatheredResult& got,
                                                  const GatheredResult& want) {
  const std::size_t n = want.recv.size();
  if (got.recv.size() != n) return Divergence{static_cast<int>(got.recv.size()), 0, 0};
  for (std::size_t d = 0; d < n; ++d) {
    if (got.recv[d].size() != n) return Divergence{static_cast<int>(d), 0, 0};
    for (std::size_t s = 0; s < n; ++s) {
      const Bytes& a = got.recv[d][s];
      const Bytes& b = want.recv[d][s];
      const std::size_t common = a.size() < b.size() ? a.size() : b.size();
      for (std::size_t i = 0; i < common; ++i) {
        if (a[i] != b[i]) return Divergence{static_cast<int>(d), static_cast<int>(s), i};
      }
      if (a.size() != b.size()) return Divergence{static_cast<int>(d), static_cast<int>(s), common};
    }
  }
  return std::nullopt;
}

// Little-endian 64-bit length entries used by metadata payloads.
inline void le64_append(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint64_t le64_read(const Bytes& in, std::size_t index) {
  const std::size_t off = index * 8;
  if (off + 8 > in.size()) throw std::out_of_range("le64_read: metadata payload too short");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[off + static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

}  // namespace tuna
