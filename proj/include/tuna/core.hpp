#pragma once

// Radix-r communication schedules for tunable non-uniform all-to-all.
//
// Every rank tags the block it owes rank t with the label i = (p - t) mod P.
// Writing labels in base r with w = ceil(log_r P) digits, a block moves once
// per non-zero digit: in round (x, z) every block whose digit at position x
// equals z hops z*r^x ranks westward.  Rounds are ordered by digit position,
// then digit value, and the schedule is identical at every rank.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tuna::core {

inline std::int64_t ipow(std::int64_t base, int exp) {
  std::int64_t v = 1;
  while (exp-- > 0) v *= base;
  return v;
}

// Little-endian fixed-width digit expansion of i in base r.
inline std::vector<int> digits_base_r(std::int64_t i, int r, int w) {
  if (i < 0 || r < 2 || w < 1) throw std::invalid_argument("digits_base_r: bad arguments");
  std::vector<int> d(static_cast<std::size_t>(w));
  for (int x = 0; x < w; ++x) {
    d[static_cast<std::size_t>(x)] = static_cast<int>(i % r);
    i /= r;
  }
  if (i != 0) throw std::invalid_argument("digits_base_r: value does not fit in w digits");
  return d;
}

struct RadixParams {
  int P = 1;
  int r = 2;
  int w = 1;  // digit count: smallest w with r^w >= P, at least 1

  RadixParams() = default;
  RadixParams(int P_, int r_) : P(P_), r(r_) {
    if (P < 1) throw std::invalid_argument("RadixParams: P must be >= 1");
    if (r < 2) throw std::invalid_argument("RadixParams: r must be >= 2");
    // P = 1 is legal with any r and produces an empty schedule.
    if (P > 1 && r > P) throw std::invalid_argument("RadixParams: r must be <= P");
    w = 1;
    std::int64_t pw = r;
    while (pw < P) {
      pw *= r;
      ++w;
    }
  }
};

struct Round {
  int x = 0;                // digit position
  int z = 0;                // digit value, 1..r-1
  std::int64_t distance = 0;  // z * r^x, the westward hop length
  std::vector<int> labels;  // ascending labels i in [1, P) with digit_x(i) == z
};

struct Schedule {
  RadixParams params;
  std::vector<Round> rounds;  // (x asc, z asc), empty rounds omitted

  int K() const { return static_cast<int>(rounds.size()); }
  std::uint64_t D() const {
    std::uint64_t total = 0;
    for (const auto& rd : rounds) total += rd.labels.size();
    return total;
  }
};

// Rounds in (x, z) order; round (x, z) carries every label whose digit at
// position x equals z.  A label therefore rides one round per non-zero digit
// and its hops sum to the label itself.
inline Schedule build_schedule(const RadixParams& p) {
  Schedule s;
  s.params = p;
  for (int x = 0; x < p.w; ++x) {
    const std::int64_t rx = ipow(p.r, x);
    for (int z = 1; z < p.r; ++z) {
      Round rd;
      rd.x = x;
      rd.z = z;
      rd.distance = z * rx;
      if (rd.distance >= p.P) break;  // only top-position rounds can be empty
      // labels with digit_x == z ascending: b*r^(x+1) + z*r^x + low, low in [0, r^x)
      for (std::int64_t base = rd.distance; base < p.P; base += rx * p.r) {
        for (std::int64_t low = 0; low < rx && base + low < p.P; ++low) {
          rd.labels.push_back(static_cast<int>(base + low));
        }
      }
      s.rounds.push_back(std::move(rd));
    }
  }
  return s;
}

// K and D without materializing label sets; used by parameter sweeps.
struct ScheduleCounts {
  int K = 0;
  std::uint64_t D = 0;
};

inline ScheduleCounts schedule_counts(int P, int r) {
  const RadixParams p(P, r);
  ScheduleCounts c;
  std::vector<char> seen(static_cast<std::size_t>(p.w) * static_cast<std::size_t>(r), 0);
  for (int i = 1; i < P; ++i) {
    int v = i;
    for (int x = 0; v != 0; ++x, v /= r) {
      const int z = v % r;
      if (z == 0) continue;
      ++c.D;
      auto& cell = seen[static_cast<std::size_t>(x) * static_cast<std::size_t>(r) + static_cast<std::size_t>(z)];
      if (!cell) {
        cell = 1;
        ++c.K;
      }
    }
  }
  return c;
}

// Initial rotation at rank p: the block destined for rank t (stored at index
// t) conceptually moves to index (p + label) mod P, i.e. I[i] = (2p - i) mod P.
inline std::vector<int> rotation_index(const RadixParams& params, int p) {
  if (p < 0 || p >= params.P) throw std::invalid_argument("rotation_index: rank out of range");
  std::vector<int> I(static_cast<std::size_t>(params.P));
  for (int i = 0; i < params.P; ++i) {
    I[static_cast<std::size_t>(i)] = ((2 * p - i) % params.P + params.P) % params.P;
  }
  return I;
}

// Labels with exactly one non-zero digit travel in a single round and never
// touch the temp buffer.  They are exactly each round's smallest label.
inline std::vector<int> direct_labels(const RadixParams& p) {
  std::vector<int> out;
  for (int x = 0; x < p.w; ++x) {
    const std::int64_t rx = ipow(p.r, x);
    for (int z = 1; z < p.r; ++z) {
      const std::int64_t v = z * rx;
      if (v >= p.P) break;
      out.push_back(static_cast<int>(v));
    }
  }
  return out;  // ascending by construction: x major, z minor, values z*r^x
}

inline int nonzero_digit_count(std::int64_t i, int r) {
  int c = 0;
  for (; i != 0; i /= r) {
    if (i % r != 0) ++c;
  }
  return c;
}

// Temp buffer slot count: P - (K + 1) block slots suffice because the K
// direct labels and label 0 never occupy a slot.
inline int temp_capacity(const RadixParams& p) {
  const auto c = schedule_counts(p.P, p.r);
  return p.P - (c.K + 1);
}

// Slot for a non-direct label o: its ascending rank among non-direct labels.
// Closed form: with dx the position of o's highest non-zero digit and
// dz = o / r^dx that digit's value, t = o - 1 - dx*(r - 1) - dz.
inline int temp_slot(const RadixParams& p, int o) {
  if (o < 1 || o >= p.P) throw std::invalid_argument("temp_slot: label out of range");
  if (nonzero_digit_count(o, p.r) < 2)
    throw std::invalid_argument("temp_slot: label " + std::to_string(o) + " travels direct and has no slot");
  int dx = 0;
  std::int64_t v = o;
  while (v >= p.r) {
    v /= p.r;
    ++dx;
  }
  const int dz = static_cast<int>(v);
  return o - 1 - dx * (p.r - 1) - dz;
}

}  // namespace tuna::core
