// tunacli: verify all-to-all algorithms against the direct oracle, run single
// configurations with metrics, and sweep radix / block_count / message_size.
//
// Exit codes: 0 success or verified, 1 verification or run failure, 2 usage
// or parameter error.  Flags override a JSON config file, which overrides the
// built-in defaults.

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tuna/baselines.hpp"
#include "tuna/costmodel.hpp"
#include "tuna/hier.hpp"
#include "tuna/tuna.hpp"
#include "tuna/workloads.hpp"

namespace {

struct CliConfig {
  std::string algo = "tuna";
  int P = 8;
  int Q = 0;  // 0: defaults to P
  int r = 2;
  int block_count = 1;
  std::string dist = "uniform";
  std::uint64_t S = 1024;
  double mean = 1000.0;
  double stddev = 240.0;
  double exponent = 0.95;
  std::uint64_t seed = 1;
  tuna::CostParams cost;
  double congestion_penalty = 0.0;
  std::string trace_out;
  std::string csv_out;
  std::string sweep = "radix";
  int jobs = 1;

  int node_size() const { return Q == 0 ? P : Q; }
};

// Applies the flat JSON config file; command-line flags override afterwards.
void apply_config_file(const std::string& path, CliConfig& c) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config file not readable: " + path);
  nlohmann::json j;
  in >> j;
  if (!j.is_object()) throw std::invalid_argument("config file must hold a JSON object");
  for (const auto& [key, val] : j.items()) {
    if (key == "algo") c.algo = val.get<std::string>();
    else if (key == "P") c.P = val.get<int>();
    else if (key == "Q") c.Q = val.get<int>();
    else if (key == "r") c.r = val.get<int>();
    else if (key == "block-count") c.block_count = val.get<int>();
    else if (key == "dist") c.dist = val.get<std::string>();
    else if (key == "S") c.S = val.get<std::uint64_t>();
    else if (key == "mean") c.mean = val.get<double>();
    else if (key == "stddev") c.stddev = val.get<double>();
    else if (key == "exponent") c.exponent = val.get<double>();
    else if (key == "seed") c.seed = val.get<std::uint64_t>();
    else if (key == "alpha-intra") c.cost.alpha_intra = val.get<double>();
    else if (key == "beta-intra") c.cost.beta_intra = val.get<double>();
    else if (key == "alpha-inter") c.cost.alpha_inter = val.get<double>();
    else if (key == "beta-inter") c.cost.beta_inter = val.get<double>();
    else if (key == "congestion-penalty") c.congestion_penalty = val.get<double>();
    else if (key == "trace-out") c.trace_out = val.get<std::string>();
    else if (key == "csv-out") c.csv_out = val.get<std::string>();
    else if (key == "sweep") c.sweep = val.get<std::string>();
    else if (key == "jobs") c.jobs = val.get<int>();
    else throw std::invalid_argument("config file: unknown key '" + key + "'");
  }
}

tuna::DistSpec dist_spec(const CliConfig& c) {
  tuna::DistSpec d;
  d.kind = tuna::dist_kind_from_string(c.dist);
  d.S = c.S;
  d.mean = c.mean;
  d.stddev = c.stddev;
  d.exponent = c.exponent;
  d.seed = c.seed;
  return d;
}

// What a single run leaves behind, regardless of algorithm.
struct Outcome {
  tuna::GatheredResult result;
  tuna::sim::Trace trace;
  int peak_temp = 0;
};

// The oracle answer presented as a run: one round of point-to-point sends.
tuna::sim::Trace synthetic_direct_trace(const tuna::Workload& w, int Q) {
  tuna::sim::Trace t;
  t.rank_stats.resize(static_cast<std::size_t>(w.P));
  for (int src = 0; src < w.P; ++src) {
    for (int dst = 0; dst < w.P; ++dst) {
      if (src == dst) continue;
      tuna::sim::TraceEvent e;
      e.ts = t.events.size();
      e.src = src;
      e.dst = dst;
      e.phase = tuna::sim::Phase::data;
      e.round = 0;
      e.bytes = w.send_sizes[static_cast<std::size_t>(src)][static_cast<std::size_t>(dst)];
      e.link = src / Q == dst / Q ? tuna::sim::Link::intra_node : tuna::sim::Link::inter_node;
      t.events.push_back(e);
    }
  }
  return t;
}

// Parameter-domain failures must be diagnosed before the simulation starts;
// inside a rank they would surface as a generic run failure.
void validate_params(const CliConfig& c) {
  if (c.algo == "scattered" && (c.block_count < 1 || (c.P > 1 && c.block_count > c.P - 1)))
    throw std::invalid_argument("scattered: block_count must be in [1, P-1]");
  if (c.algo == "pairwise_xor" && (c.P & (c.P - 1)) != 0)
    throw std::invalid_argument("pairwise_xor: P must be a power of two");
}

Outcome run_algo(const CliConfig& c, const tuna::Workload& w) {
  validate_params(c);
  const int Q = c.node_size();
  Outcome o;
  if (c.algo == "direct") {
    o.result = tuna::oracle_direct(w);
    o.trace = synthetic_direct_trace(w, Q);
  } else if (c.algo == "spread_out") {
    auto run = tuna::run_spread_out(w, Q);
    o.result = std::move(run.result);
    o.trace = std::move(run.trace);
  } else if (c.algo == "scattered") {
    auto run = tuna::run_scattered(w, c.block_count, Q);
    o.result = std::move(run.result);
    o.trace = std::move(run.trace);
  } else if (c.algo == "pairwise") {
    auto run = tuna::run_pairwise(w, tuna::PairOrder::shift, Q);
    o.result = std::move(run.result);
    o.trace = std::move(run.trace);
  } else if (c.algo == "pairwise_xor") {
    auto run = tuna::run_pairwise(w, tuna::PairOrder::xor_, Q);
    o.result = std::move(run.result);
    o.trace = std::move(run.trace);
  } else if (c.algo == "linear") {
    auto run = tuna::run_linear_ascending(w, Q);
    o.result = std::move(run.result);
    o.trace = std::move(run.trace);
  } else if (c.algo == "tuna") {
    auto run = tuna::run_tuna(w, c.r, Q);
    o.result = std::move(run.result);
    o.trace = std::move(run.trace);
    o.peak_temp = run.stats.peak_temp();
  } else if (c.algo == "htuna_coalesced" || c.algo == "htuna_staggered") {
    const auto v = c.algo == "htuna_coalesced" ? tuna::HierVariant::coalesced
                                               : tuna::HierVariant::staggered;
    auto run = tuna::run_htuna(w, tuna::HierParams(c.P, Q, c.r, c.block_count, v));
    o.result = std::move(run.result);
    o.trace = std::move(run.trace);
    o.peak_temp = run.stats.peak_temp();
  } else {
    throw std::invalid_argument("unknown algorithm '" + c.algo + "'");
  }
  return o;
}

// Owns either a file stream or stdout, so commands can write to --csv-out
// transparently.
class OutputTarget {
 public:
  explicit OutputTarget(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw std::invalid_argument("cannot open output file: " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void maybe_write_trace(const CliConfig& c, const tuna::sim::Trace& t) {
  if (c.trace_out.empty()) return;
  std::ofstream out(c.trace_out, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot open trace file: " + c.trace_out);
  t.to_jsonl(out);
}

std::string config_label(const CliConfig& c) {
  std::ostringstream os;
  os << c.algo << " P=" << c.P << " Q=" << c.node_size() << " r=" << c.r
     << " block_count=" << c.block_count << " dist=" << c.dist << " S=" << c.S
     << " seed=" << c.seed;
  return os.str();
}

int cmd_verify(const CliConfig& c) {
  const tuna::Workload w = tuna::generate(c.P, dist_spec(c));
  const Outcome o = run_algo(c, w);
  const tuna::GatheredResult want = tuna::oracle_direct(w);
  const auto div = tuna::first_divergence(o.result, want);
  maybe_write_trace(c, o.trace);
  if (div) {
    std::cout << "FAIL " << config_label(c) << ": " << div->describe() << "\n";
    return 1;
  }
  std::cout << "OK " << config_label(c) << "\n";
  return 0;
}

const char* kCsvHeader =
    "algo,P,Q,N,r,block_count,dist,S,seed,rounds,msgs_meta,msgs_data,bytes_intra,"
    "bytes_inter,max_outstanding,peak_temp_blocks,predicted_seconds,verified,schema_version=1";

int cmd_run(const CliConfig& c) {
  const tuna::Workload w = tuna::generate(c.P, dist_spec(c));
  const Outcome o = run_algo(c, w);
  const tuna::GatheredResult want = tuna::oracle_direct(w);
  const bool verified = !tuna::first_divergence(o.result, want).has_value();
  const tuna::sim::Metrics m = tuna::sim::metrics_from_trace(o.trace);
  const double predicted = tuna::predict_from_trace(o.trace, c.cost).total_seconds;
  maybe_write_trace(c, o.trace);

  const int Q = c.node_size();
  OutputTarget out(c.csv_out);
  out.stream() << kCsvHeader << "\n"
               << c.algo << ',' << c.P << ',' << Q << ',' << c.P / Q << ',' << c.r << ','
               << c.block_count << ',' << c.dist << ',' << c.S << ',' << c.seed << ','
               << m.rounds << ',' << m.msgs_total(tuna::sim::Phase::metadata) << ','
               << m.msgs_total(tuna::sim::Phase::data) << ','
               << m.bytes_total(tuna::sim::Link::intra_node) << ','
               << m.bytes_total(tuna::sim::Link::inter_node) << ',' << m.max_outstanding << ','
               << o.peak_temp << ',' << tuna::detail::format_seconds(predicted) << ','
               << (verified ? "true" : "false") << ",1\n";
  return verified ? 0 : 1;
}

// Caches one trace per block_count, produced in parallel when --jobs > 1.
std::vector<tuna::sim::Trace> scattered_traces(const tuna::Workload& w, int max_bc, int Q,
                                               int jobs) {
  std::vector<tuna::sim::Trace> traces(static_cast<std::size_t>(max_bc));
  if (jobs < 2) {
    for (int bc = 1; bc <= max_bc; ++bc)
      traces[static_cast<std::size_t>(bc - 1)] = tuna::run_scattered(w, bc, Q).trace;
    return traces;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int bc = 1 + t; bc <= max_bc; bc += jobs)
          traces[static_cast<std::size_t>(bc - 1)] = tuna::run_scattered(w, bc, Q).trace;
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return traces;
}

int cmd_sweep(const CliConfig& c) {
  OutputTarget out(c.csv_out);
  if (c.sweep == "radix") {
    const auto [best_r, curve] =
        tuna::sweep_radix(c.P, static_cast<double>(c.S), c.cost);
    tuna::write_radix_curve_csv(out.stream(), c.P, curve);
    out.stream() << "# best r=" << best_r << "\n";
    return 0;
  }
  if (c.sweep == "block_count") {
    const int max_bc = c.P > 1 ? c.P - 1 : 1;
    const tuna::Workload w = tuna::generate(c.P, dist_spec(c));
    const auto traces = scattered_traces(w, max_bc, c.node_size(), c.jobs);
    const auto gen = [&traces](int bc) { return traces[static_cast<std::size_t>(bc - 1)]; };
    const auto [best_bc, curve] =
        tuna::sweep_block_count(gen, max_bc, c.cost, c.congestion_penalty);
    tuna::write_block_count_curve_csv(out.stream(), c.P, curve);
    out.stream() << "# best block_count=" << best_bc << "\n";
    return 0;
  }
  if (c.sweep == "message_size") {
    static const std::uint64_t ladder[] = {16, 64, 256, 1024, 4096, 16384, 65536};
    out.stream() << "P,S,best_r,predicted_seconds\n";
    std::ostringstream summary;
    summary << "# best r by size:";
    for (const std::uint64_t s : ladder) {
      const auto [best_r, curve] = tuna::sweep_radix(c.P, static_cast<double>(s), c.cost);
      double best_cost = 0;
      for (const auto& pt : curve)
        if (pt.r == best_r) best_cost = pt.predicted_seconds;
      out.stream() << c.P << ',' << s << ',' << best_r << ','
                   << tuna::detail::format_seconds(best_cost) << "\n";
      summary << ' ' << s << ':' << best_r;
    }
    out.stream() << summary.str() << "\n";
    return 0;
  }
  throw std::invalid_argument("unknown sweep '" + c.sweep +
                              "' (expected radix, block_count, or message_size)");
}

void add_common_options(CLI::App* cmd, CliConfig& c) {
  cmd->add_option("--algo", c.algo,
                  "algorithm: direct, spread_out, scattered, pairwise, pairwise_xor, linear, "
                  "tuna, htuna_coalesced, htuna_staggered");
  cmd->add_option("--P", c.P, "total rank count");
  cmd->add_option("--Q", c.Q, "ranks per node (default: P, one flat node)");
  cmd->add_option("--r", c.r, "radix of the digit schedule");
  cmd->add_option("--block-count", c.block_count, "batch size for scattered/htuna");
  cmd->add_option("--dist", c.dist, "workload: uniform, normal, powerlaw, fft_n1, fft_n2");
  cmd->add_option("--S", c.S, "size cap in bytes (sweeps: mean block size)");
  cmd->add_option("--mean", c.mean, "normal distribution mean");
  cmd->add_option("--stddev", c.stddev, "normal distribution standard deviation");
  cmd->add_option("--exponent", c.exponent, "powerlaw shape exponent");
  cmd->add_option("--seed", c.seed, "workload generator seed");
  cmd->add_option("--alpha-intra", c.cost.alpha_intra, "intra-node latency, seconds per message");
  cmd->add_option("--alpha-inter", c.cost.alpha_inter, "inter-node latency, seconds per message");
  cmd->add_option("--beta-intra", c.cost.beta_intra, "intra-node cost, seconds per byte");
  cmd->add_option("--beta-inter", c.cost.beta_inter, "inter-node cost, seconds per byte");
  cmd->add_option("--congestion-penalty", c.congestion_penalty,
                  "seconds per outstanding send beyond the first (block_count sweep)");
  cmd->add_option("--trace-out", c.trace_out, "write the delivery trace as JSONL");
  cmd->add_option("--csv-out", c.csv_out, "write CSV here instead of stdout");
  cmd->add_option("--jobs", c.jobs, "concurrent sweep points");
  // recognized for help/validation; the value is consumed by the pre-scan
  cmd->add_option("--config", "JSON config file (flags override its values)")
      ->check(CLI::ExistingFile);
}

// The config file must be applied before CLI11 writes flag values, so the
// path is pulled out of argv by hand first.
std::string find_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CliConfig c;
  CLI::App app{"deterministic all-to-all simulator and cost-model explorer"};
  app.require_subcommand(1);

  CLI::App* verify = app.add_subcommand("verify", "run one algorithm and compare to the oracle");
  CLI::App* run = app.add_subcommand("run", "run one configuration and emit a CSV metrics row");
  CLI::App* sweep = app.add_subcommand("sweep", "sweep radix, block_count, or message_size");
  add_common_options(verify, c);
  add_common_options(run, c);
  add_common_options(sweep, c);
  sweep->add_option("--sweep", c.sweep, "what to sweep: radix, block_count, message_size");

  try {
    const std::string config_path = find_config_path(argc, argv);
    if (!config_path.empty()) apply_config_file(config_path, c);
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    c.cost.validate();
    if (const auto warn = c.cost.warning()) std::cerr << "warning: " << *warn << "\n";
    if (c.jobs < 1) throw std::invalid_argument("--jobs must be >= 1");
    if (verify->parsed()) return cmd_verify(c);
    if (run->parsed()) return cmd_run(c);
    return cmd_sweep(c);
  } catch (const tuna::sim::DeadlockError& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return 1;
  } catch (const tuna::sim::ProtocolError& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return 1;
  } catch (const tuna::sim::RankError& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
