#pragma once

// Deterministic message-passing simulator.  Each rank runs as a C++20
// coroutine; a round-robin scheduler resumes runnable ranks in rank order, so
// two runs with the same configuration produce byte-identical traces.  Sends
// and receives are matched per (src, dst, tag) channel in FIFO order; a send
// completes when its payload is handed to a matching receive.

#include <coroutine>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <exception>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <type_traits>
#include <utility>
#include <vector>

namespace tuna::sim {

enum class Phase : std::uint8_t { metadata = 0, data = 1 };
enum class Link : std::uint8_t { self = 0, intra_node = 1, inter_node = 2 };

inline const char* to_string(Phase p) { return p == Phase::metadata ? "metadata" : "data"; }
inline const char* to_string(Link l) {
  switch (l) {
    case Link::self: return "self";
    case Link::intra_node: return "intra_node";
    default: return "inter_node";
  }
}

constexpr int phase_index(Phase p) { return static_cast<int>(p); }
constexpr int link_index(Link l) { return static_cast<int>(l); }

// Tags fold the round id and phase together so metadata and payload of the
// same round never cross-match; extra distinguishes concurrent same-round
// messages between one pair (e.g. per-slot exchanges).
inline std::uint64_t tag_for(int round, Phase phase, std::uint64_t extra = 0) {
  return (static_cast<std::uint64_t>(round) << 21) | (extra << 1) |
         static_cast<std::uint64_t>(phase);
}

struct TraceEvent {
  std::uint64_t ts = 0;  // delivery order, 0-based
  int src = 0;
  int dst = 0;
  std::uint64_t tag = 0;
  Phase phase = Phase::data;
  int round = 0;
  std::uint64_t bytes = 0;
  Link link = Link::self;
};

// Post-time counters the delivery log cannot reconstruct.
struct RankStats {
  std::uint32_t peak_outstanding_sends = 0;
  std::uint64_t excess_outstanding = 0;  // sum over send posts of sends already in flight
  std::uint32_t wait_calls = 0;
};

struct Trace {
  std::vector<TraceEvent> events;
  std::vector<RankStats> rank_stats;  // indexed by rank

  void to_jsonl(std::ostream& os) const {
    char buf[256];
    for (const auto& e : events) {
      std::snprintf(buf, sizeof(buf),
                    "{\"ts\":%llu,\"src\":%d,\"dst\":%d,\"tag\":%llu,\"phase\":\"%s\","
                    "\"round\":%d,\"bytes\":%llu,\"link\":\"%s\"}\n",
                    static_cast<unsigned long long>(e.ts), e.src, e.dst,
                    static_cast<unsigned long long>(e.tag), to_string(e.phase), e.round,
                    static_cast<unsigned long long>(e.bytes), to_string(e.link));
      os << buf;
    }
  }
};

struct Metrics {
  int rounds = 0;  // distinct round ids carrying at least one data message
  std::uint64_t msgs[2][3] = {};   // [phase][link]
  std::uint64_t bytes[2][3] = {};  // [phase][link]
  std::uint32_t max_outstanding = 0;

  std::uint64_t msgs_total(Phase p) const {
    const int i = phase_index(p);
    return msgs[i][0] + msgs[i][1] + msgs[i][2];
  }
  std::uint64_t bytes_total(Link l) const {
    const int i = link_index(l);
    return bytes[0][i] + bytes[1][i];
  }
  std::uint64_t msgs_link(Phase p, Link l) const { return msgs[phase_index(p)][link_index(l)]; }
};

inline Metrics metrics_from_trace(const Trace& t) {
  Metrics m;
  std::set<int> data_rounds;
  for (const auto& e : t.events) {
    m.msgs[phase_index(e.phase)][link_index(e.link)] += 1;
    m.bytes[phase_index(e.phase)][link_index(e.link)] += e.bytes;
    if (e.phase == Phase::data) data_rounds.insert(e.round);
  }
  m.rounds = static_cast<int>(data_rounds.size());
  for (const auto& rs : t.rank_stats) {
    if (rs.peak_outstanding_sends > m.max_outstanding) m.max_outstanding = rs.peak_outstanding_sends;
  }
  return m;
}

struct DeadlockError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RankError : std::runtime_error {
  int rank;
  RankError(int rank_, const std::string& what) : std::runtime_error(what), rank(rank_) {}
};

template <class T>
class Task;

namespace detail {

template <class T>
struct promise_storage {
  std::optional<T> value_;
  template <class U>
  void return_value(U&& v) {
    value_.emplace(std::forward<U>(v));
  }
};

template <>
struct promise_storage<void> {
  void return_void() {}
};

}  // namespace detail

// Lazily-started coroutine task.  Awaiting a task starts it and resumes the
// awaiter when it finishes (symmetric transfer), so rank programs compose
// from sub-coroutines without scheduler involvement.
template <class T>
class Task {
 public:
  using value_type = T;

  struct promise_type : detail::promise_storage<T> {
    std::exception_ptr error_;
    std::coroutine_handle<> continuation_;

    Task get_return_object() {
      return Task(std::coroutine_handle<promise_type>::from_promise(*this));
    }
    std::suspend_always initial_suspend() noexcept { return {}; }
    struct FinalAwaiter {
      bool await_ready() noexcept { return false; }
      std::coroutine_handle<> await_suspend(std::coroutine_handle<promise_type> h) noexcept {
        auto c = h.promise().continuation_;
        return c ? c : std::noop_coroutine();
      }
      void await_resume() noexcept {}
    };
    FinalAwaiter final_suspend() noexcept { return {}; }
    void unhandled_exception() { error_ = std::current_exception(); }
  };

  Task() = default;
  explicit Task(std::coroutine_handle<promise_type> h) : h_(h) {}
  Task(Task&& o) noexcept : h_(std::exchange(o.h_, {})) {}
  Task& operator=(Task&& o) noexcept {
    if (this != &o) {
      destroy();
      h_ = std::exchange(o.h_, {});
    }
    return *this;
  }
  Task(const Task&) = delete;
  Task& operator=(const Task&) = delete;
  ~Task() { destroy(); }

  std::coroutine_handle<> handle() const { return h_; }
  bool done() const { return h_ && h_.done(); }
  std::exception_ptr error() const { return h_.promise().error_; }

  // Retrieve the result after completion; rethrows a captured exception.
  T result() {
    if (h_.promise().error_) std::rethrow_exception(h_.promise().error_);
    if constexpr (!std::is_void_v<T>) return std::move(*h_.promise().value_);
  }

  struct Awaiter {
    std::coroutine_handle<promise_type> h;
    bool await_ready() const noexcept { return false; }
    std::coroutine_handle<> await_suspend(std::coroutine_handle<> parent) noexcept {
      h.promise().continuation_ = parent;
      return h;
    }
    T await_resume() {
      if (h.promise().error_) std::rethrow_exception(h.promise().error_);
      if constexpr (!std::is_void_v<T>) return std::move(*h.promise().value_);
    }
  };
  Awaiter operator co_await() const& noexcept { return Awaiter{h_}; }
  Awaiter operator co_await() const&& noexcept { return Awaiter{h_}; }

 private:
  void destroy() {
    if (h_) {
      h_.destroy();
      h_ = {};
    }
  }
  std::coroutine_handle<promise_type> h_{};
};

enum class ReqKind : std::uint8_t { send, recv };

// Opaque per-rank request handle.
struct Req {
  std::uint32_t id = 0;
};

class Runtime;

// Per-rank endpoint handed to rank programs.
class Comm {
 public:
  Comm(Runtime* rt, int rank) : rt_(rt), rank_(rank) {}
  int rank() const { return rank_; }
  int size() const;

  Req post_send(int dst, std::uint64_t tag, Phase phase, int round,
                std::vector<std::uint8_t> payload);
  Req post_recv(int src, std::uint64_t tag);
  std::vector<std::uint8_t> take_payload(Req r);

  struct WaitAll;
  WaitAll wait_all(std::vector<Req> reqs);

 private:
  Runtime* rt_;
  int rank_;
};

class Runtime {
 public:
  struct Request {
    ReqKind kind = ReqKind::send;
    bool done = false;
    int peer = 0;
    std::uint64_t tag = 0;
    Phase phase = Phase::data;
    int round = 0;
    std::vector<std::uint8_t> payload;
  };

  struct RankCtx {
    std::vector<Request> reqs;
    std::vector<Req> wait_set;
    std::coroutine_handle<> resume_point;
    bool done = false;
    std::uint32_t outstanding_sends = 0;
  };

  Runtime(int P, int Q) : P_(P), Q_(Q) {
    if (P < 1) throw std::invalid_argument("run_processes: P must be >= 1");
    if (Q < 1 || P % Q != 0) throw std::invalid_argument("run_processes: Q must divide P");
    ranks_.resize(static_cast<std::size_t>(P));
    trace_.rank_stats.resize(static_cast<std::size_t>(P));
  }

  int size() const { return P_; }

  Link classify(int src, int dst) const {
    if (src == dst) return Link::self;
    return src / Q_ == dst / Q_ ? Link::intra_node : Link::inter_node;
  }

  Req post_send(int rank, int dst, std::uint64_t tag, Phase phase, int round,
                std::vector<std::uint8_t> payload) {
    if (dst < 0 || dst >= P_) throw std::invalid_argument("post_send: dst out of range");
    auto& ctx = ranks_[static_cast<std::size_t>(rank)];
    auto& stats = trace_.rank_stats[static_cast<std::size_t>(rank)];
    stats.excess_outstanding += ctx.outstanding_sends;
    ctx.outstanding_sends += 1;
    if (ctx.outstanding_sends > stats.peak_outstanding_sends)
      stats.peak_outstanding_sends = ctx.outstanding_sends;

    const Req req{static_cast<std::uint32_t>(ctx.reqs.size())};
    Request rec;
    rec.kind = ReqKind::send;
    rec.peer = dst;
    rec.tag = tag;
    rec.phase = phase;
    rec.round = round;
    rec.payload = std::move(payload);
    ctx.reqs.push_back(std::move(rec));

    auto& ch = channels_[std::make_tuple(rank, dst, tag)];
    if (!ch.recvs.empty()) {
      const std::uint32_t rid = ch.recvs.front();
      ch.recvs.pop_front();
      deliver(rank, req.id, dst, rid);
    } else {
      ch.sends.push_back(req.id);
    }
    return req;
  }

  Req post_recv(int rank, int src, std::uint64_t tag) {
    if (src < 0 || src >= P_) throw std::invalid_argument("post_recv: src out of range");
    auto& ctx = ranks_[static_cast<std::size_t>(rank)];
    const Req req{static_cast<std::uint32_t>(ctx.reqs.size())};
    Request rec;
    rec.kind = ReqKind::recv;
    rec.peer = src;
    rec.tag = tag;
    ctx.reqs.push_back(std::move(rec));

    auto& ch = channels_[std::make_tuple(src, rank, tag)];
    if (!ch.sends.empty()) {
      const std::uint32_t sid = ch.sends.front();
      ch.sends.pop_front();
      deliver(src, sid, rank, req.id);
    } else {
      ch.recvs.push_back(req.id);
    }
    return req;
  }

  std::vector<std::uint8_t> take_payload(int rank, Req r) {
    auto& rec = request(rank, r);
    if (rec.kind != ReqKind::recv) throw std::invalid_argument("take_payload: not a receive");
    if (!rec.done) throw std::invalid_argument("take_payload: receive not complete");
    return std::move(rec.payload);
  }

  void note_wait(int rank, const std::vector<Req>& reqs) {
    trace_.rank_stats[static_cast<std::size_t>(rank)].wait_calls += 1;
    for (const Req r : reqs) request(rank, r);  // validates ownership
  }

  bool reqs_done(int rank, const std::vector<Req>& reqs) {
    for (const Req r : reqs) {
      if (!request(rank, r).done) return false;
    }
    return true;
  }

  RankCtx& rank_ctx(int rank) { return ranks_[static_cast<std::size_t>(rank)]; }

  bool runnable(int rank) {
    auto& ctx = ranks_[static_cast<std::size_t>(rank)];
    return reqs_done(rank, ctx.wait_set);
  }

  std::string stuck_report() const {
    std::string out = "deadlock: no rank can make progress; stuck requests:";
    char buf[128];
    for (int p = 0; p < P_; ++p) {
      const auto& ctx = ranks_[static_cast<std::size_t>(p)];
      if (ctx.done) continue;
      for (const Req r : ctx.wait_set) {
        const auto& rec = ctx.reqs[r.id];
        if (rec.done) continue;
        if (rec.kind == ReqKind::send) {
          std::snprintf(buf, sizeof(buf), "\n  send src=%d dst=%d tag=%llu", p, rec.peer,
                        static_cast<unsigned long long>(rec.tag));
        } else {
          std::snprintf(buf, sizeof(buf), "\n  recv src=%d dst=%d tag=%llu", rec.peer, p,
                        static_cast<unsigned long long>(rec.tag));
        }
        out += buf;
      }
    }
    return out;
  }

  // Message conservation: at the end of a run no channel may hold an
  // unmatched posted request.
  void check_conservation() const {
    std::string out;
    char buf[128];
    for (const auto& [key, ch] : channels_) {
      for (const std::uint32_t sid : ch.sends) {
        (void)sid;
        std::snprintf(buf, sizeof(buf), "\n  undelivered send src=%d dst=%d tag=%llu",
                      std::get<0>(key), std::get<1>(key),
                      static_cast<unsigned long long>(std::get<2>(key)));
        out += buf;
      }
      for (const std::uint32_t rid : ch.recvs) {
        (void)rid;
        std::snprintf(buf, sizeof(buf), "\n  unmatched recv src=%d dst=%d tag=%llu",
                      std::get<0>(key), std::get<1>(key),
                      static_cast<unsigned long long>(std::get<2>(key)));
        out += buf;
      }
    }
    if (!out.empty()) throw ProtocolError("run finished with dangling requests:" + out);
  }

  Trace take_trace() { return std::move(trace_); }

 private:
  friend class Comm;

  Request& request(int rank, Req r) {
    auto& ctx = ranks_[static_cast<std::size_t>(rank)];
    if (r.id >= ctx.reqs.size()) throw std::invalid_argument("request handle does not belong to this rank");
    return ctx.reqs[r.id];
  }

  void deliver(int src, std::uint32_t sid, int dst, std::uint32_t rid) {
    auto& sreq = ranks_[static_cast<std::size_t>(src)].reqs[sid];
    auto& rreq = ranks_[static_cast<std::size_t>(dst)].reqs[rid];
    TraceEvent e;
    e.ts = trace_.events.size();
    e.src = src;
    e.dst = dst;
    e.tag = sreq.tag;
    e.phase = sreq.phase;
    e.round = sreq.round;
    e.bytes = sreq.payload.size();
    e.link = classify(src, dst);
    trace_.events.push_back(e);
    rreq.payload = std::move(sreq.payload);
    rreq.phase = sreq.phase;
    rreq.round = sreq.round;
    sreq.payload.clear();
    sreq.done = true;
    rreq.done = true;
    ranks_[static_cast<std::size_t>(src)].outstanding_sends -= 1;
  }

  struct Channel {
    std::deque<std::uint32_t> sends;  // request ids at the src rank
    std::deque<std::uint32_t> recvs;  // request ids at the dst rank
  };

  int P_;
  int Q_;
  std::map<std::tuple<int, int, std::uint64_t>, Channel> channels_;
  std::vector<RankCtx> ranks_;
  Trace trace_;
};

struct Comm::WaitAll {
  Runtime* rt;
  int rank;
  std::vector<Req> reqs;

  bool await_ready() { return rt->reqs_done(rank, reqs); }
  void await_suspend(std::coroutine_handle<> h) {
    auto& ctx = rt->rank_ctx(rank);
    ctx.wait_set = reqs;
    ctx.resume_point = h;
  }
  void await_resume() {}
};

inline int Comm::size() const { return rt_->size(); }
inline Req Comm::post_send(int dst, std::uint64_t tag, Phase phase, int round,
                           std::vector<std::uint8_t> payload) {
  return rt_->post_send(rank_, dst, tag, phase, round, std::move(payload));
}
inline Req Comm::post_recv(int src, std::uint64_t tag) { return rt_->post_recv(rank_, src, tag); }
inline std::vector<std::uint8_t> Comm::take_payload(Req r) { return rt_->take_payload(rank_, r); }
inline Comm::WaitAll Comm::wait_all(std::vector<Req> reqs) {
  rt_->note_wait(rank_, reqs);
  return WaitAll{rt_, rank_, std::move(reqs)};
}

template <class T>
struct RunOutput {
  std::vector<T> outputs;
  Trace trace;
};

// Runs one coroutine per rank under the deterministic round-robin scheduler.
// Q sets the node size for link classification only.  The seed is accepted
// for configuration identity; the deterministic scheduler does not use it.
template <class F>
auto run_processes(int P, int Q, F&& program, std::uint64_t seed = 0) {
  (void)seed;
  using TaskT = std::invoke_result_t<F&, Comm&>;
  using T = typename TaskT::value_type;
  static_assert(!std::is_void_v<T>, "rank programs must return a value");

  Runtime rt(P, Q);
  std::vector<Comm> comms;
  comms.reserve(static_cast<std::size_t>(P));
  std::vector<TaskT> tasks;
  tasks.reserve(static_cast<std::size_t>(P));
  for (int p = 0; p < P; ++p) {
    comms.emplace_back(&rt, p);
    tasks.push_back(program(comms.back()));
    rt.rank_ctx(p).resume_point = tasks.back().handle();
  }

  int remaining = P;
  while (remaining > 0) {
    bool progress = false;
    for (int p = 0; p < P; ++p) {
      auto& ctx = rt.rank_ctx(p);
      if (ctx.done) continue;
      if (!ctx.resume_point) continue;
      if (!rt.runnable(p)) continue;
      auto h = std::exchange(ctx.resume_point, {});
      ctx.wait_set.clear();
      h.resume();
      progress = true;
      if (tasks[static_cast<std::size_t>(p)].done()) {
        ctx.done = true;
        --remaining;
        if (auto err = tasks[static_cast<std::size_t>(p)].error()) {
          try {
            std::rethrow_exception(err);
          } catch (const std::exception& e) {
            throw RankError(p, "rank " + std::to_string(p) + " failed: " + e.what());
          } catch (...) {
            throw RankError(p, "rank " + std::to_string(p) + " failed");
          }
        }
      } else if (!ctx.resume_point) {
        throw ProtocolError("rank " + std::to_string(p) + " suspended outside wait_all");
      }
    }
    if (!progress && remaining > 0) throw DeadlockError(rt.stuck_report());
  }

  RunOutput<T> out;
  out.outputs.reserve(static_cast<std::size_t>(P));
  for (int p = 0; p < P; ++p) {
    auto& task = tasks[static_cast<std::size_t>(p)];
    try {
      out.outputs.push_back(task.result());
    } catch (const std::exception& e) {
      throw RankError(p, "rank " + std::to_string(p) + " failed: " + e.what());
    }
  }
  rt.check_conservation();
  out.trace = rt.take_trace();
  return out;
}

}  // namespace tuna::sim
