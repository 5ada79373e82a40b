#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdint>
#include <vector>

#include "tuna/core.hpp"

using namespace tuna;

namespace {

// Independent digit oracle: repeated division, then pad.
std::vector<int> digits_oracle(std::int64_t v, int r, int w) {
  std::vector<int> d;
  while (v != 0) {
    d.push_back(static_cast<int>(v % r));
    v /= r;
  }
  while (static_cast<int>(d.size()) < w) d.push_back(0);
  return d;
}

// Independent slot oracle: ascending rank among labels with >= 2 non-zero digits.
int slot_oracle(const core::RadixParams& p, int o) {
  int rank = 0;
  for (int i = 1; i < o; ++i) {
    if (core::nonzero_digit_count(i, p.r) >= 2) ++rank;
  }
  return rank;
}

}  // namespace

TEST_CASE("digit expansion is little-endian fixed width") {
  CHECK(core::digits_base_r(5, 2, 3) == std::vector<int>{1, 0, 1});
  CHECK(core::digits_base_r(0, 3, 2) == std::vector<int>{0, 0});
  CHECK(core::digits_base_r(7, 3, 2) == std::vector<int>{1, 2});
  CHECK_THROWS_AS(core::digits_base_r(9, 3, 2), std::invalid_argument);
  CHECK_THROWS_AS(core::digits_base_r(-1, 2, 3), std::invalid_argument);

  for (int r = 2; r <= 7; ++r) {
    for (int v = 0; v < 200; ++v) {
      const int w = 5;
      if (v >= core::ipow(r, w)) continue;
      CHECK(core::digits_base_r(v, r, w) == digits_oracle(v, r, w));
    }
  }
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(core::RadixParams(0, 2), std::invalid_argument);
  CHECK_THROWS_AS(core::RadixParams(4, 1), std::invalid_argument);
  CHECK_THROWS_AS(core::RadixParams(4, 5), std::invalid_argument);
  // P = 1 accepts any r >= 2 and yields an empty schedule.
  const core::RadixParams one(1, 2);
  CHECK(one.w == 1);
  CHECK(core::build_schedule(one).K() == 0);
  CHECK(core::temp_capacity(one) == 0);
}

TEST_CASE("digit counts w") {
  CHECK(core::RadixParams(8, 2).w == 3);
  CHECK(core::RadixParams(8, 3).w == 2);
  CHECK(core::RadixParams(8, 4).w == 2);
  CHECK(core::RadixParams(8, 8).w == 1);
  CHECK(core::RadixParams(9, 3).w == 2);
  CHECK(core::RadixParams(5, 2).w == 3);
  CHECK(core::RadixParams(2, 2).w == 1);
}

TEST_CASE("schedule for P=8 r=2") {
  const auto s = core::build_schedule(core::RadixParams(8, 2));
  REQUIRE(s.K() == 3);
  CHECK(s.rounds[0].x == 0);
  CHECK(s.rounds[0].z == 1);
  CHECK(s.rounds[0].distance == 1);
  CHECK(s.rounds[0].labels == std::vector<int>{1, 3, 5, 7});
  CHECK(s.rounds[1].distance == 2);
  CHECK(s.rounds[1].labels == std::vector<int>{2, 3, 6, 7});
  CHECK(s.rounds[2].distance == 4);
  CHECK(s.rounds[2].labels == std::vector<int>{4, 5, 6, 7});
  CHECK(s.D() == 12);
  CHECK(core::direct_labels(s.params) == std::vector<int>{1, 2, 4});
}

TEST_CASE("schedule for P=8 r=3") {
  const auto s = core::build_schedule(core::RadixParams(8, 3));
  REQUIRE(s.K() == 4);
  CHECK(s.rounds[0].labels == std::vector<int>{1, 4, 7});  // (x=0, z=1)
  CHECK(s.rounds[1].labels == std::vector<int>{2, 5});     // (x=0, z=2)
  CHECK(s.rounds[2].labels == std::vector<int>{3, 4, 5});  // (x=1, z=1)
  CHECK(s.rounds[3].labels == std::vector<int>{6, 7});     // (x=1, z=2)
  CHECK(s.D() == 10);
  CHECK(core::direct_labels(s.params) == std::vector<int>{1, 2, 3, 6});
}

TEST_CASE("schedule for P=8 r=4 skips the empty top round") {
  const auto s = core::build_schedule(core::RadixParams(8, 4));
  REQUIRE(s.K() == 4);
  CHECK(s.rounds[0].labels == std::vector<int>{1, 5});
  CHECK(s.rounds[1].labels == std::vector<int>{2, 6});
  CHECK(s.rounds[2].labels == std::vector<int>{3, 7});
  CHECK(s.rounds[3].labels == std::vector<int>{4, 5, 6, 7});
  // (x=1, z=2) would need labels >= 8; it is omitted and does not count toward K.
  for (const auto& rd : s.rounds) CHECK(!rd.labels.empty());
}

TEST_CASE("schedule for P=5 r=2") {
  const auto s = core::build_schedule(core::RadixParams(5, 2));
  REQUIRE(s.K() == 3);
  CHECK(s.rounds[0].labels == std::vector<int>{1, 3});
  CHECK(s.rounds[1].labels == std::vector<int>{2, 3});
  CHECK(s.rounds[2].labels == std::vector<int>{4});
}

TEST_CASE("r = P and r = P-1 collapse to one round per label") {
  for (int P : {4, 8, 13}) {
    for (int r : {P - 1, P}) {
      const auto s = core::build_schedule(core::RadixParams(P, r));
      CHECK(s.K() == P - 1);
      CHECK(s.D() == static_cast<std::uint64_t>(P - 1));
      CHECK(core::temp_capacity(s.params) == 0);
    }
  }
}

TEST_CASE("rotation index examples and involution") {
  const core::RadixParams p4(4, 2);
  CHECK(core::rotation_index(p4, 1) == std::vector<int>{2, 1, 0, 3});
  CHECK(core::rotation_index(p4, 0) == std::vector<int>{0, 3, 2, 1});

  for (int P : {2, 3, 7, 16}) {
    const core::RadixParams p(P, 2);
    for (int rank = 0; rank < P; ++rank) {
      const auto I = core::rotation_index(p, rank);
      for (int i = 0; i < P; ++i) {
        CHECK(I[static_cast<std::size_t>(I[static_cast<std::size_t>(i)])] == i);  // involution
        CHECK((rank + ((rank - I[static_cast<std::size_t>(i)]) % P + P) % P) % P ==
              ((2 * rank - I[static_cast<std::size_t>(i)]) % P + P) % P);
      }
    }
  }
}

TEST_CASE("temp capacity pinned values") {
  CHECK(core::temp_capacity(core::RadixParams(8, 2)) == 4);
  CHECK(core::temp_capacity(core::RadixParams(8, 3)) == 3);
  CHECK(core::temp_capacity(core::RadixParams(8, 4)) == 3);
}

TEST_CASE("temp slot pinned values and errors") {
  CHECK(core::temp_slot(core::RadixParams(9, 3), 7) == 2);
  CHECK(core::temp_slot(core::RadixParams(8, 2), 3) == 0);
  CHECK(core::temp_slot(core::RadixParams(8, 2), 5) == 1);
  CHECK(core::temp_slot(core::RadixParams(8, 2), 6) == 2);
  CHECK(core::temp_slot(core::RadixParams(8, 2), 7) == 3);
  // direct labels have no slot
  CHECK_THROWS_AS(core::temp_slot(core::RadixParams(8, 2), 4), std::invalid_argument);
  CHECK_THROWS_AS(core::temp_slot(core::RadixParams(8, 3), 6), std::invalid_argument);
  CHECK_THROWS_AS(core::temp_slot(core::RadixParams(8, 2), 0), std::invalid_argument);
  CHECK_THROWS_AS(core::temp_slot(core::RadixParams(8, 2), 8), std::invalid_argument);
}

TEST_CASE("temp slot matches ascending-rank oracle exhaustively") {
  // every P up to 256, every radix, every non-direct label; assert only on breakage
  for (int P = 2; P <= 256; ++P) {
    for (int r = 2; r <= P; ++r) {
      const core::RadixParams p(P, r);
      const int B = core::temp_capacity(p);
      std::vector<char> used(static_cast<std::size_t>(B > 0 ? B : 0), 0);
      int nondirect = 0;
      int expected_rank = 0;
      for (int o = 1; o < P; ++o) {
        if (core::nonzero_digit_count(o, r) < 2) continue;
        ++nondirect;
        const int t = core::temp_slot(p, o);
        // ascending-rank oracle, computed incrementally
        const bool ok = t == expected_rank && t >= 0 && t < B && !used[static_cast<std::size_t>(t)];
        if (!ok) {
          INFO("P=" << P << " r=" << r << " o=" << o << " slot=" << t
                    << " oracle=" << slot_oracle(p, o));
          REQUIRE(ok);
        }
        used[static_cast<std::size_t>(t)] = 1;
        ++expected_rank;
      }
      if (nondirect != B) {
        INFO("P=" << P << " r=" << r);
        REQUIRE(nondirect == B);  // slots are a bijection onto [0, B)
      }
    }
  }
  SUCCEED();
}

TEST_CASE("schedule properties across the parameter range") {
  auto check = [](bool ok, int P, int r, const char* what) {
    if (!ok) {
      INFO("P=" << P << " r=" << r << ": " << what);
      REQUIRE(ok);
    }
  };
  for (int P = 2; P <= 512; ++P) {
    for (int r = 2; r <= P; ++r) {
      const core::RadixParams p(P, r);
      const auto s = core::build_schedule(p);
      const auto c = core::schedule_counts(P, r);

      check(c.K == s.K(), P, r, "counts K mismatch");
      check(c.D == s.D(), P, r, "counts D mismatch");
      check(s.K() <= p.w * (r - 1), P, r, "K bound");
      check(s.D() <= static_cast<std::uint64_t>(p.w) * static_cast<std::uint64_t>(r - 1) *
                         static_cast<std::uint64_t>(core::ipow(r, p.w - 1)),
            P, r, "D bound");
      check(core::temp_capacity(p) >= 0, P, r, "negative temp capacity");

      // rounds strictly ordered by (x, z); labels ascending; minima are the direct labels
      std::vector<int> minima;
      for (std::size_t k = 0; k < s.rounds.size(); ++k) {
        const auto& rd = s.rounds[k];
        check(!rd.labels.empty(), P, r, "empty round kept");
        check(std::is_sorted(rd.labels.begin(), rd.labels.end()), P, r, "labels unsorted");
        check(rd.distance == static_cast<std::int64_t>(rd.z) * core::ipow(r, rd.x), P, r,
              "distance formula");
        check(rd.labels.front() == rd.distance, P, r, "round minimum");
        minima.push_back(rd.labels.front());
        if (k > 0) {
          const auto& prev = s.rounds[k - 1];
          check(prev.x < rd.x || (prev.x == rd.x && prev.z < rd.z), P, r, "round order");
        }
      }
      check(minima == core::direct_labels(p), P, r, "direct labels");

      // every label's hops sum to the label itself, and participation count
      // equals its non-zero digit count
      std::vector<std::int64_t> journey(static_cast<std::size_t>(P), 0);
      std::vector<int> hops(static_cast<std::size_t>(P), 0);
      for (const auto& rd : s.rounds) {
        for (int i : rd.labels) {
          journey[static_cast<std::size_t>(i)] += rd.distance;
          hops[static_cast<std::size_t>(i)] += 1;
        }
      }
      for (int i = 1; i < P; ++i) {
        check(journey[static_cast<std::size_t>(i)] == i, P, r, "journey sum");
        check(hops[static_cast<std::size_t>(i)] == core::nonzero_digit_count(i, r), P, r,
              "participation count");
      }
    }
  }
  SUCCEED();
}
