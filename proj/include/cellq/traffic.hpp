#pragma once

// Traffic sources: plain-text trace ingestion with destination
// classification, synthetic generators (Poisson/exponential for model
// validation, the bimodal empirical length mix, CBR worst cases) and
// utilization scaling.
//
// Trace format: one record per line, `interarrival_us,length_bytes,dest`,
// where dest is either an integer output port or a dotted-quad IPv4 address
// (mapped to a port as addr mod N).  `#` starts a comment.

#include <cstdint>
#include <istream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cellq/quantize.hpp"
#include "cellq/segmenter.hpp"

namespace cellq {

struct parse_error : std::runtime_error {
  int line;
  parse_error(const std::string& what, int line_no)
      : std::runtime_error(what + " (line " + std::to_string(line_no) + ")"),
        line(line_no) {}
};

namespace detail {

// SplitMix64, used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline bool parse_ipv4(const std::string& s, std::uint32_t& out) {
  unsigned a, b, c, d;
  char tail;
  std::istringstream in(s);
  char dot1, dot2, dot3;
  if (!(in >> a >> dot1 >> b >> dot2 >> c >> dot3 >> d)) return false;
  if (dot1 != '.' || dot2 != '.' || dot3 != '.') return false;
  if (in >> tail) return false;
  if (a > 255 || b > 255 || c > 255 || d > 255) return false;
  out = (static_cast<std::uint32_t>(a) << 24) |
        (static_cast<std::uint32_t>(b) << 16) |
        (static_cast<std::uint32_t>(c) << 8) | d;
  return true;
}

}  // namespace detail

struct TraceRecord {
  double interarrival_us = 0.0;
  int length = 0;
  bool dest_is_port = false;
  int port = 0;
  std::uint32_t addr = 0;
};

inline TraceRecord parse_trace_line(const std::string& line, int line_no) {
  std::istringstream in(line);
  std::string f0, f1, f2;
  if (!std::getline(in, f0, ',') || !std::getline(in, f1, ',') ||
      !std::getline(in, f2))
    throw parse_error("trace record needs 3 comma-separated fields", line_no);
  TraceRecord r;
  try {
    r.interarrival_us = std::stod(f0);
    r.length = std::stoi(f1);
  } catch (const std::exception&) {
    throw parse_error("malformed numeric field", line_no);
  }
  if (r.interarrival_us < 0.0)
    throw parse_error("negative interarrival time", line_no);
  if (r.length < 1) throw parse_error("packet length must be >= 1", line_no);
  // Trim whitespace around the dest field.
  const auto b = f2.find_first_not_of(" \t\r");
  const auto e = f2.find_last_not_of(" \t\r");
  if (b == std::string::npos)
    throw parse_error("empty destination field", line_no);
  f2 = f2.substr(b, e - b + 1);
  if (detail::parse_ipv4(f2, r.addr)) {
    r.dest_is_port = false;
  } else {
    try {
      r.port = std::stoi(f2);
      r.dest_is_port = true;
    } catch (const std::exception&) {
      throw parse_error("destination is neither a port nor an address",
                        line_no);
    }
  }
  return r;
}

// Cumulative arrival times (same unit as the interarrivals); destPort is the
// explicit port or addr mod N.
inline std::vector<Packet> parse_trace(std::istream& in, int ports) {
  if (ports < 1) throw std::invalid_argument("parse_trace: need ports >= 1");
  std::vector<Packet> out;
  std::string line;
  int line_no = 0;
  double t = 0.0;
  std::uint64_t id = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const TraceRecord r = parse_trace_line(line, line_no);
    t += r.interarrival_us;
    Packet p;
    p.id = id++;
    p.arrival_time = t;
    p.length = r.length;
    p.dest = r.dest_is_port ? r.port
                            : static_cast<int>(r.addr % static_cast<std::uint32_t>(ports));
    if (p.dest < 0 || p.dest >= ports)
      throw parse_error("destination port out of range", line_no);
    out.push_back(p);
  }
  return out;
}

// --- synthetic generation ---------------------------------------------------

struct PoissonArrivals {
  double mean_interarrival;  // time units per packet
};
struct CbrArrivals {
  double interval;
};
using ArrivalProcess = std::variant<PoissonArrivals, CbrArrivals>;

struct ExponentialLength {
  double mean_bytes;
};
// Empirical bimodal mix: five dominant lengths plus a uniform residual on
// [64, 990] calibrated so the overall mean lands near 764 bytes.
struct BimodalLength {};
struct FixedLength {
  int bytes;
};
struct DistLength {
  ContinuousDist dist;  // sampled value interpreted as bytes, ceiled to >= 1
};
using LengthDist =
    std::variant<ExponentialLength, BimodalLength, FixedLength, DistLength>;

struct UniformDest {};
struct FixedDest {
  int port;
};
using DestRule = std::variant<UniformDest, FixedDest>;

struct SyntheticSpec {
  ArrivalProcess arrival = PoissonArrivals{1.0};
  LengthDist length = ExponentialLength{764.0};
  int ports = 16;
  DestRule dest = UniformDest{};
  int active_inputs = -1;  // -1: every input port generates a stream
};

namespace detail {

constexpr int kBimodalLengths[5] = {1518, 64, 1438, 70, 594};
constexpr double kBimodalProbs[5] = {0.314, 0.287, 0.077, 0.027, 0.014};
constexpr int kBimodalResidualLo = 64;
constexpr int kBimodalResidualHi = 990;

inline int sample_length(const LengthDist& dist, std::mt19937_64& rng) {
  return std::visit(
      [&rng](const auto& d) -> int {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, ExponentialLength>) {
          std::exponential_distribution<double> e(1.0 / d.mean_bytes);
          return std::max(1, static_cast<int>(std::ceil(e(rng))));
        } else if constexpr (std::is_same_v<T, BimodalLength>) {
          std::uniform_real_distribution<double> u(0.0, 1.0);
          double x = u(rng);
          for (int i = 0; i < 5; ++i) {
            if (x < kBimodalProbs[i]) return kBimodalLengths[i];
            x -= kBimodalProbs[i];
          }
          std::uniform_int_distribution<int> r(kBimodalResidualLo,
                                               kBimodalResidualHi);
          return r(rng);
        } else if constexpr (std::is_same_v<T, FixedLength>) {
          return d.bytes;
        } else {
          const double v = std::visit(
              [&rng](const auto& cd) -> double {
                using C = std::decay_t<decltype(cd)>;
                if constexpr (std::is_same_v<C, Exponential>) {
                  std::exponential_distribution<double> e(cd.rate);
                  return e(rng);
                } else if constexpr (std::is_same_v<C, Hyperexp2>) {
                  std::bernoulli_distribution pick(cd.weight1);
                  std::exponential_distribution<double> e(
                      pick(rng) ? cd.rate1 : cd.rate2);
                  return e(rng);
                } else if constexpr (std::is_same_v<C, Erlang2>) {
                  std::exponential_distribution<double> e(cd.rate);
                  return e(rng) + e(rng);
                } else {
                  std::gamma_distribution<double> g(cd.shape, cd.scale);
                  return g(rng);
                }
              },
              d.dist);
          return std::max(1, static_cast<int>(std::ceil(v)));
        }
      },
      dist);
}

}  // namespace detail

// One reproducible stream of `budget` packets.  Arrival times are cumulative
// in the arrival process's own time unit (conventionally microseconds);
// scale_to_utilization converts them to cell times.
inline std::vector<Packet> generate_synthetic(const SyntheticSpec& spec,
                                              std::uint64_t seed,
                                              std::size_t budget) {
  if (spec.ports < 1)
    throw std::invalid_argument("generate_synthetic: need ports >= 1");
  std::mt19937_64 rng(seed);
  std::vector<Packet> out;
  out.reserve(budget);
  double t = 0.0;
  std::uniform_int_distribution<int> udest(0, spec.ports - 1);
  for (std::size_t k = 0; k < budget; ++k) {
    t += std::visit(
        [&rng](const auto& a) -> double {
          using T = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<T, PoissonArrivals>) {
            std::exponential_distribution<double> e(1.0 / a.mean_interarrival);
            return e(rng);
          } else {
            return a.interval;
          }
        },
        spec.arrival);
    Packet p;
    p.id = k;
    p.arrival_time = t;
    p.length = detail::sample_length(spec.length, rng);
    p.dest = std::holds_alternative<FixedDest>(spec.dest)
                 ? std::get<FixedDest>(spec.dest).port
                 : udest(rng);
    if (p.dest < 0 || p.dest >= spec.ports)
      throw std::invalid_argument("generate_synthetic: dest port out of range");
    out.push_back(p);
  }
  return out;
}

// Rescales arrival times (in place) to cell times so that the most loaded
// output port carries exactly `target` of the link rate.  Only the time unit
// changes; order, lengths and destinations are untouched.  Returns the
// realized per-output-port offered loads.
inline std::vector<double> scale_to_utilization(
    std::vector<std::vector<Packet>>& streams, int ports, int cell_size,
    double target) {
  if (target <= 0.0 || target > 1.0)
    throw std::invalid_argument("scale_to_utilization: target not in (0,1]");
  if (cell_size < 1)
    throw std::invalid_argument("scale_to_utilization: cell size must be >= 1");
  std::vector<double> bytes_to(ports, 0.0);
  double duration = 0.0;
  for (const auto& s : streams)
    for (const Packet& p : s) {
      if (p.dest < 0 || p.dest >= ports)
        throw std::invalid_argument("scale_to_utilization: dest out of range");
      bytes_to[p.dest] += p.length;
      duration = std::max(duration, p.arrival_time);
    }
  double max_bytes = 0.0;
  for (double b : bytes_to) max_bytes = std::max(max_bytes, b);
  if (max_bytes <= 0.0 || duration <= 0.0)
    throw std::invalid_argument("scale_to_utilization: no traffic to scale");

  // With c source-time-units per cell time, port load is
  // bytes * c / (duration * S); pin the max port at `target`.
  const double c = target * duration * cell_size / max_bytes;
  for (auto& s : streams)
    for (Packet& p : s) p.arrival_time /= c;
  std::vector<double> loads(ports);
  for (int j = 0; j < ports; ++j) loads[j] = target * bytes_to[j] / max_bytes;
  return loads;
}

inline std::vector<double> scale_to_utilization(std::vector<Packet>& packets,
                                                int ports, int cell_size,
                                                double target) {
  std::vector<std::vector<Packet>> wrap{std::move(packets)};
  auto loads = scale_to_utilization(wrap, ports, cell_size, target);
  packets = std::move(wrap[0]);
  return loads;
}

// Per-input streams with derived seeds, scaled to the target utilization.
inline std::vector<std::vector<Packet>> build_scaled_streams(
    const SyntheticSpec& spec, int cell_size, double utilization,
    std::uint64_t seed, std::size_t packets_per_port,
    std::vector<double>* loads_out = nullptr) {
  const int active =
      spec.active_inputs < 0 ? spec.ports : spec.active_inputs;
  if (active < 1 || active > spec.ports)
    throw std::invalid_argument("build_scaled_streams: bad active_inputs");
  std::vector<std::vector<Packet>> streams(spec.ports);
  for (int i = 0; i < active; ++i)
    streams[i] = generate_synthetic(spec, detail::mix_seed(seed, i),
                                    packets_per_port);
  auto loads =
      scale_to_utilization(streams, spec.ports, cell_size, utilization);
  if (loads_out) *loads_out = std::move(loads);
  return streams;
}

}  // namespace cellq
