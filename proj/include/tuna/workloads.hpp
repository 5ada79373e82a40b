#pragma once

// Workload generators.  All randomness flows from splitmix64 so any port that
// reproduces the PRNG reproduces every byte of every workload.  Sizes and
// payload bytes live in separate tagged streams keyed by (seed, src, dst).

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "tuna/alltoallv.hpp"

namespace tuna {

// splitmix64 (public-domain algorithm): state advances by the golden-gamma
// constant and the output is a finalizing mix of the new state.
struct SplitMix64 {
  std::uint64_t state = 0;
  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

// One splitmix64 step with xor-folded inputs: a keyed 64-bit hash.
inline std::uint64_t hash3(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  SplitMix64 g{a};
  g.state = g.next() ^ b;
  g.state = g.next() ^ c;
  return g.next();
}

namespace detail {
constexpr std::uint64_t size_tag = 0x53495A45;     // "SIZE"
constexpr std::uint64_t payload_tag = 0x44415441;  // "DATA"

inline double unit_double(std::uint64_t word) {
  return static_cast<double>(word >> 11) * 0x1.0p-53;  // [0, 1)
}
}  // namespace detail

// Deterministic payload byte stream for one (seed, src, dst) block.
inline Bytes make_payload(std::uint64_t seed, int src, int dst, std::uint64_t n) {
  Bytes out(n);
  SplitMix64 g{hash3(seed ^ detail::payload_tag, static_cast<std::uint64_t>(src),
                     static_cast<std::uint64_t>(dst))};
  std::size_t i = 0;
  while (i + 8 <= out.size()) {
    const std::uint64_t w = g.next();
    for (int b = 0; b < 8; ++b) out[i++] = static_cast<std::uint8_t>(w >> (8 * b));
  }
  if (i < out.size()) {
    const std::uint64_t w = g.next();
    for (int b = 0; i < out.size(); ++b) out[i++] = static_cast<std::uint8_t>(w >> (8 * b));
  }
  return out;
}

inline const char* to_string(DistSpec::Kind k) {
  switch (k) {
    case DistSpec::Kind::uniform: return "uniform";
    case DistSpec::Kind::normal: return "normal";
    case DistSpec::Kind::powerlaw: return "powerlaw";
    case DistSpec::Kind::fft_n1: return "fft_n1";
    default: return "fft_n2";
  }
}

inline DistSpec::Kind dist_kind_from_string(const std::string& s) {
  if (s == "uniform") return DistSpec::Kind::uniform;
  if (s == "normal") return DistSpec::Kind::normal;
  if (s == "powerlaw") return DistSpec::Kind::powerlaw;
  if (s == "fft_n1") return DistSpec::Kind::fft_n1;
  if (s == "fft_n2") return DistSpec::Kind::fft_n2;
  throw std::invalid_argument("unknown distribution kind: " + s);
}

inline std::uint64_t draw_size(const DistSpec& d, int src, int dst, int P) {
  const std::uint64_t word = hash3(d.seed ^ detail::size_tag, static_cast<std::uint64_t>(src),
                                   static_cast<std::uint64_t>(dst));
  switch (d.kind) {
    case DistSpec::Kind::uniform: {
      // integer-uniform on [0, S] via fixed-point multiply
      const unsigned __int128 span = static_cast<unsigned __int128>(d.S) + 1;
      return static_cast<std::uint64_t>((static_cast<unsigned __int128>(word) * span) >> 64);
    }
    case DistSpec::Kind::normal: {
      // Irwin-Hall sum of 12 uniforms: unit normal without libm, so every
      // platform rounds identically
      SplitMix64 g{word};
      double acc = 0.0;
      for (int k = 0; k < 12; ++k) acc += detail::unit_double(g.next());
      const double v = d.mean + d.stddev * (acc - 6.0);
      if (v <= 0.0) return 0;
      const double rounded = std::floor(v + 0.5);
      const double cap = static_cast<double>(d.S);
      return rounded >= cap ? d.S : static_cast<std::uint64_t>(rounded);
    }
    case DistSpec::Kind::powerlaw: {
      // bounded Pareto on [1, S] by inverse CDF
      const double a = d.exponent;
      const double u = detail::unit_double(word);
      const double h_pow = std::pow(static_cast<double>(d.S), -a);
      const double x = std::pow(1.0 - u * (1.0 - h_pow), -1.0 / a);
      const auto v = static_cast<std::uint64_t>(x);
      return v < 1 ? 1 : (v > d.S ? d.S : v);
    }
    case DistSpec::Kind::fft_n1: {
      const int workers = (5 * P + 7) / 8;        // ceil(0.625 P)
      const int receivers = (25 * P + 31) / 32;   // ceil(0.78125 P)
      return (src < workers && dst < receivers) ? 64 : 0;
    }
    default:  // fft_n2
      return src == P - 1 ? 128 : 512;
  }
}

inline Workload generate(int P, const DistSpec& d) {
  if (P < 1) throw std::invalid_argument("generate: P must be >= 1");
  if (d.kind == DistSpec::Kind::powerlaw) {
    if (d.S < 1) throw std::invalid_argument("generate: powerlaw needs S >= 1");
    if (!(d.exponent > 0.0)) throw std::invalid_argument("generate: powerlaw needs exponent > 0");
  }
  if (d.kind == DistSpec::Kind::normal && !(d.stddev >= 0.0))
    throw std::invalid_argument("generate: normal needs stddev >= 0");

  Workload w;
  w.P = P;
  w.origin = d;
  const auto p = static_cast<std::size_t>(P);
  w.send_sizes.resize(p);
  w.payloads.resize(p);
  for (int s = 0; s < P; ++s) {
    auto& sizes = w.send_sizes[static_cast<std::size_t>(s)];
    auto& blocks = w.payloads[static_cast<std::size_t>(s)];
    sizes.resize(p);
    blocks.resize(p);
    for (int t = 0; t < P; ++t) {
      const std::uint64_t n = draw_size(d, s, t, P);
      sizes[static_cast<std::size_t>(t)] = n;
      blocks[static_cast<std::size_t>(t)] = make_payload(d.seed, s, t, n);
    }
  }
  return w;
}

// JSON header only; payloads are regenerated on import, never stored.
inline std::string export_workload(const Workload& w) {
  if (!w.origin) throw std::invalid_argument("export_workload: workload has no generator header");
  const DistSpec& d = *w.origin;
  nlohmann::json j;
  j["schema"] = 1;
  j["kind"] = to_string(d.kind);
  j["P"] = w.P;
  j["seed"] = d.seed;
  j["S"] = d.S;
  j["mean"] = d.mean;
  j["stddev"] = d.stddev;
  j["exponent"] = d.exponent;
  return j.dump(2);
}

inline Workload import_workload(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  DistSpec d;
  d.kind = dist_kind_from_string(j.at("kind").get<std::string>());
  d.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("S")) d.S = j.at("S").get<std::uint64_t>();
  if (j.contains("mean")) d.mean = j.at("mean").get<double>();
  if (j.contains("stddev")) d.stddev = j.at("stddev").get<double>();
  if (j.contains("exponent")) d.exponent = j.at("exponent").get<double>();
  return generate(j.at("P").get<int>(), d);
}

}  // namespace tuna
