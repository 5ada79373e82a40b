#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "tuna/sim.hpp"

using namespace tuna;
using Bytes = std::vector<std::uint8_t>;

namespace {

sim::Task<Bytes> pingpong(sim::Comm& c) {
  if (c.rank() == 0) {
    auto s = c.post_send(1, 10, sim::Phase::data, 0, Bytes{1, 2, 3});
    auto r = c.post_recv(1, 11);
    co_await c.wait_all({s, r});
    co_return c.take_payload(r);
  }
  auto r = c.post_recv(0, 10);
  co_await c.wait_all({r});
  Bytes got = c.take_payload(r);
  got.push_back(9);
  auto s = c.post_send(0, 11, sim::Phase::data, 1, got);
  co_await c.wait_all({s});
  co_return Bytes{};
}

sim::Task<Bytes> fifo_sender(sim::Comm& c) {
  if (c.rank() == 0) {
    auto s1 = c.post_send(1, 7, sim::Phase::data, 0, Bytes{'A'});
    auto s2 = c.post_send(1, 7, sim::Phase::data, 0, Bytes{'B'});
    co_await c.wait_all({s1, s2});
    co_return Bytes{};
  }
  auto r1 = c.post_recv(0, 7);
  auto r2 = c.post_recv(0, 7);
  co_await c.wait_all({r1, r2});
  Bytes order;
  order.push_back(c.take_payload(r1)[0]);
  order.push_back(c.take_payload(r2)[0]);
  co_return order;
}

sim::Task<int> stuck_receiver(sim::Comm& c) {
  if (c.rank() == 0) {
    auto r = c.post_recv(1, 42);
    co_await c.wait_all({r});
  }
  co_return 0;
}

sim::Task<int> dangling_sender(sim::Comm& c) {
  if (c.rank() == 0) c.post_send(1, 3, sim::Phase::data, 0, Bytes{1});
  co_return 0;
}

sim::Task<int> throwing_rank(sim::Comm& c) {
  if (c.rank() == 2) throw std::runtime_error("boom");
  co_return 0;
}

// rank 0 -> 1 (same node), 0 -> 2 (across nodes), 3 -> 3 (self), with Q = 2
sim::Task<int> link_mix(sim::Comm& c) {
  switch (c.rank()) {
    case 0: {
      auto s1 = c.post_send(1, 1, sim::Phase::metadata, 0, Bytes{1, 2});
      auto s2 = c.post_send(2, 2, sim::Phase::data, 1, Bytes{3, 4, 5});
      co_await c.wait_all({s1, s2});
      break;
    }
    case 1: {
      auto r = c.post_recv(0, 1);
      co_await c.wait_all({r});
      break;
    }
    case 2: {
      auto r = c.post_recv(0, 2);
      co_await c.wait_all({r});
      break;
    }
    case 3: {
      auto r = c.post_recv(3, 5);
      auto s = c.post_send(3, 5, sim::Phase::data, 2, Bytes{7});
      co_await c.wait_all({r, s});
      break;
    }
    default: break;
  }
  co_return 0;
}

sim::Task<int> burst_sender(sim::Comm& c) {
  if (c.rank() == 0) {
    auto s1 = c.post_send(1, 1, sim::Phase::data, 0, Bytes{1});
    auto s2 = c.post_send(1, 2, sim::Phase::data, 0, Bytes{2});
    auto s3 = c.post_send(1, 3, sim::Phase::data, 0, Bytes{3});
    co_await c.wait_all({s1, s2, s3});
    co_return 0;
  }
  auto r1 = c.post_recv(0, 1);
  auto r2 = c.post_recv(0, 2);
  auto r3 = c.post_recv(0, 3);
  co_await c.wait_all({r1, r2, r3});
  co_return 0;
}

// one sub-coroutine per hop, exercising nested task composition
sim::Task<Bytes> relay_hop(sim::Comm& c, int from, int to, Bytes b) {
  if (c.rank() == from) {
    auto s = c.post_send(to, 99, sim::Phase::data, from, std::move(b));
    co_await c.wait_all({s});
    co_return Bytes{};
  }
  auto r = c.post_recv(from, 99);
  co_await c.wait_all({r});
  co_return c.take_payload(r);
}

sim::Task<Bytes> relay(sim::Comm& c) {
  const int P = c.size();
  Bytes token{0};
  for (int hop = 0; hop + 1 < P; ++hop) {
    if (c.rank() == hop) {
      token.push_back(static_cast<std::uint8_t>(hop));
      co_await relay_hop(c, hop, hop + 1, token);
    } else if (c.rank() == hop + 1) {
      token = co_await relay_hop(c, hop, hop + 1, {});
    }
  }
  co_return token;
}

sim::Task<int> one_message(sim::Comm& c) {
  if (c.rank() == 0) {
    auto s = c.post_send(1, 4, sim::Phase::data, 2, Bytes{1, 2, 3});
    co_await c.wait_all({s});
  } else {
    auto r = c.post_recv(0, 4);
    co_await c.wait_all({r});
  }
  co_return 0;
}

sim::Task<int> noop_rank(sim::Comm&) { co_return 0; }

sim::Task<int> guarded_take(sim::Comm& c) {
  if (c.rank() == 0) {
    auto s = c.post_send(1, 1, sim::Phase::data, 0, Bytes{1});
    co_await c.wait_all({s});
  } else {
    auto r = c.post_recv(0, 1);
    co_await c.wait_all({r});
    (void)c.take_payload(r);
  }
  co_return 0;
}

}  // namespace

TEST_CASE("ping pong delivers payloads and records a trace") {
  auto out = sim::run_processes(2, 1, [](sim::Comm& c) { return pingpong(c); });
  CHECK(out.outputs[0] == Bytes{1, 2, 3, 9});
  REQUIRE(out.trace.events.size() == 2);
  const auto& e0 = out.trace.events[0];
  CHECK(e0.ts == 0);
  CHECK(e0.src == 0);
  CHECK(e0.dst == 1);
  CHECK(e0.tag == 10);
  CHECK(e0.bytes == 3);
  CHECK(e0.link == sim::Link::inter_node);  // Q = 1: every rank is its own node
  CHECK(out.trace.events[1].ts == 1);
  CHECK(out.trace.events[1].bytes == 4);
}

TEST_CASE("same-channel messages arrive in FIFO order") {
  auto out = sim::run_processes(2, 2, [](sim::Comm& c) { return fifo_sender(c); });
  CHECK(out.outputs[1] == Bytes{'A', 'B'});
}

TEST_CASE("identical runs produce identical traces") {
  auto serialize = [] {
    auto out = sim::run_processes(4, 2, [](sim::Comm& c) { return link_mix(c); });
    std::ostringstream ss;
    out.trace.to_jsonl(ss);
    return ss.str();
  };
  const std::string a = serialize();
  const std::string b = serialize();
  CHECK(a == b);
  CHECK(!a.empty());
}

TEST_CASE("deadlock reports the stuck tuples") {
  try {
    sim::run_processes(2, 1, [](sim::Comm& c) { return stuck_receiver(c); });
    FAIL("expected DeadlockError");
  } catch (const sim::DeadlockError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("recv src=1 dst=0 tag=42") != std::string::npos);
  }
}

TEST_CASE("dangling sends violate message conservation") {
  try {
    sim::run_processes(2, 1, [](sim::Comm& c) { return dangling_sender(c); });
    FAIL("expected ProtocolError");
  } catch (const sim::ProtocolError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("undelivered send src=0 dst=1 tag=3") != std::string::npos);
  }
}

TEST_CASE("rank failures carry rank attribution") {
  try {
    sim::run_processes(4, 1, [](sim::Comm& c) { return throwing_rank(c); });
    FAIL("expected RankError");
  } catch (const sim::RankError& e) {
    CHECK(e.rank == 2);
    CHECK(std::string(e.what()).find("boom") != std::string::npos);
  }
}

TEST_CASE("links classify by node with Q = 2") {
  auto out = sim::run_processes(4, 2, [](sim::Comm& c) { return link_mix(c); });
  REQUIRE(out.trace.events.size() == 3);
  // delivery order: rank 0 posts both sends first; recvs match in rank order
  CHECK(out.trace.events[0].link == sim::Link::intra_node);
  CHECK(out.trace.events[1].link == sim::Link::inter_node);
  CHECK(out.trace.events[2].link == sim::Link::self);

  const auto m = sim::metrics_from_trace(out.trace);
  CHECK(m.msgs_link(sim::Phase::metadata, sim::Link::intra_node) == 1);
  CHECK(m.msgs_link(sim::Phase::data, sim::Link::inter_node) == 1);
  CHECK(m.msgs_link(sim::Phase::data, sim::Link::self) == 1);
  CHECK(m.bytes_total(sim::Link::intra_node) == 2);
  CHECK(m.bytes_total(sim::Link::inter_node) == 3);
  CHECK(m.rounds == 2);  // data messages in rounds 1 and 2; metadata does not count
}

TEST_CASE("outstanding sends peak when the peer has not posted") {
  auto out = sim::run_processes(2, 1, [](sim::Comm& c) { return burst_sender(c); });
  // rank 0 runs first and posts three sends before rank 1 posts any receive
  CHECK(out.trace.rank_stats[0].peak_outstanding_sends == 3);
  CHECK(out.trace.rank_stats[0].excess_outstanding == 0 + 1 + 2);
  CHECK(sim::metrics_from_trace(out.trace).max_outstanding == 3);
  CHECK(out.trace.rank_stats[0].wait_calls == 1);
}

TEST_CASE("nested task coroutines compose") {
  auto out = sim::run_processes(5, 1, [](sim::Comm& c) { return relay(c); });
  CHECK(out.outputs[4] == Bytes{0, 0, 1, 2, 3});
}

TEST_CASE("jsonl golden line") {
  auto out = sim::run_processes(2, 1, [](sim::Comm& c) { return one_message(c); });
  std::ostringstream ss;
  out.trace.to_jsonl(ss);
  CHECK(ss.str() ==
        "{\"ts\":0,\"src\":0,\"dst\":1,\"tag\":4,\"phase\":\"data\",\"round\":2,"
        "\"bytes\":3,\"link\":\"inter_node\"}\n");
}

TEST_CASE("parameter validation") {
  auto noop = [](sim::Comm& c) { return noop_rank(c); };
  CHECK_THROWS_AS(sim::run_processes(6, 4, noop), std::invalid_argument);
  CHECK_THROWS_AS(sim::run_processes(0, 1, noop), std::invalid_argument);
}

TEST_CASE("take_payload completes after wait") {
  CHECK_NOTHROW(sim::run_processes(2, 1, [](sim::Comm& c) { return guarded_take(c); }));
}
