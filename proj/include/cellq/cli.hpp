#pragma once

// Command-line harness: flat `key = value` configuration files, --set
// overrides, and the analyze / quantize / simulate / sweep / min-speedup /
// gen-traffic commands with comma-separated output.

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cellq/mg1.hpp"
#include "cellq/simcore.hpp"

namespace cellq {

struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Command { Analyze, Quantize, Simulate, Sweep, MinSpeedup, GenTraffic };

struct RunPlan {
  Command command;
  std::string config_path;  // empty: defaults only
  std::string output_path;  // empty: stdout
  std::vector<std::pair<std::string, std::string>> overrides;
  std::optional<std::uint64_t> seed;
};

namespace detail {

inline const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "ports", "cell_size", "speedup", "islip_iterations", "merge",
      "merge_timeout_cells", "input_mode", "warmup_fraction",
      "instability_threshold",
      "seed", "max_served_cells",
      "L", "S", "rho_list",
      "dist", "mu", "alpha1", "alpha2", "mu1", "mu2",
      "gamma_shape", "gamma_scale", "gamma_m", "gamma_s", "tail_epsilon",
      "utilization_list", "speedup_list", "min_speedup_step",
      "min_speedup_cap",
      "traffic.arrival", "traffic.mean_interarrival_us", "traffic.length",
      "traffic.mean_bytes", "traffic.fixed_bytes", "traffic.dest",
      "traffic.packets_per_port", "traffic.active_inputs",
      "traffic.utilization", "traffic.trace", "traffic.trace_split",
  };
  return keys;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace detail

class Config {
 public:
  void set(const std::string& key, const std::string& value) {
    const auto& known = detail::known_config_keys();
    bool ok = false;
    for (const auto& k : known)
      if (k == key) {
        ok = true;
        break;
      }
    if (!ok) throw usage_error("unknown configuration key: " + key);
    kv_[key] = value;
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string get(const std::string& key, const std::string& dflt) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
  }

  double get_double(const std::string& key, double dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      throw usage_error("key " + key + ": not a number: " + it->second);
    }
  }

  long long get_int(const std::string& key, long long dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    try {
      return std::stoll(it->second);
    } catch (const std::exception&) {
      throw usage_error("key " + key + ": not an integer: " + it->second);
    }
  }

  bool get_bool(const std::string& key, bool dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    const std::string& v = it->second;
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw usage_error("key " + key + ": not a boolean: " + v);
  }

  std::vector<double> get_list(const std::string& key,
                               const std::vector<double>& dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    std::vector<double> out;
    std::istringstream in(it->second);
    std::string item;
    while (std::getline(in, item, ',')) {
      item = detail::trim(item);
      if (item.empty()) continue;
      try {
        out.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw usage_error("key " + key + ": bad list element: " + item);
      }
    }
    if (out.empty()) throw usage_error("key " + key + ": empty list");
    return out;
  }

  static Config parse(std::istream& in) {
    Config cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw usage_error("config line " + std::to_string(line_no) +
                          ": expected key = value");
      cfg.set(detail::trim(line.substr(0, eq)),
              detail::trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

inline RunPlan parse_invocation(const std::vector<std::string>& args) {
  if (args.empty()) throw usage_error("missing command");
  RunPlan plan;
  const std::string& cmd = args[0];
  if (cmd == "analyze")
    plan.command = Command::Analyze;
  else if (cmd == "quantize")
    plan.command = Command::Quantize;
  else if (cmd == "simulate")
    plan.command = Command::Simulate;
  else if (cmd == "sweep")
    plan.command = Command::Sweep;
  else if (cmd == "min-speedup")
    plan.command = Command::MinSpeedup;
  else if (cmd == "gen-traffic")
    plan.command = Command::GenTraffic;
  else
    throw usage_error("unknown command: " + cmd);

  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string& a = args[i];
    auto next = [&](const char* what) -> const std::string& {
      if (++i >= args.size())
        throw usage_error(std::string(what) + " requires an argument");
      return args[i];
    };
    if (a == "--set") {
      const std::string& kvs = next("--set");
      const auto eq = kvs.find('=');
      if (eq == std::string::npos)
        throw usage_error("--set expects key=value, got: " + kvs);
      plan.overrides.emplace_back(detail::trim(kvs.substr(0, eq)),
                                  detail::trim(kvs.substr(eq + 1)));
    } else if (a == "--seed") {
      try {
        plan.seed = std::stoull(next("--seed"));
      } catch (const std::exception&) {
        throw usage_error("--seed expects an integer");
      }
    } else if (a == "-o" || a == "--output") {
      plan.output_path = next("--output");
    } else if (!a.empty() && a[0] == '-') {
      throw usage_error("unknown option: " + a);
    } else if (plan.config_path.empty()) {
      plan.config_path = a;
    } else {
      throw usage_error("unexpected argument: " + a);
    }
  }
  return plan;
}

inline const char* usage_text() {
  return
      "usage: cellq <command> [config-file] [options]\n"
      "\n"
      "commands:\n"
      "  analyze      M/M^D/1 segmentation curves (rho, E(N), speedup)\n"
      "  quantize     pmf and moments of a quantized service distribution\n"
      "  simulate     one switch simulation run\n"
      "  sweep        simulation grid over utilization x speedup\n"
      "  min-speedup  smallest stable speedup at a target utilization\n"
      "  gen-traffic  write a synthetic packet trace\n"
      "\n"
      "options:\n"
      "  --set key=value   override a configuration entry (repeatable)\n"
      "  --seed N          override the RNG seed\n"
      "  -o, --output F    write results to F instead of stdout\n";
}

namespace detail {

inline Config load_config(const RunPlan& plan) {
  Config cfg;
  if (!plan.config_path.empty()) {
    std::ifstream in(plan.config_path);
    if (!in) throw usage_error("cannot open config file: " + plan.config_path);
    cfg = Config::parse(in);
  }
  for (const auto& [k, v] : plan.overrides) cfg.set(k, v);
  if (plan.seed) cfg.set("seed", std::to_string(*plan.seed));
  return cfg;
}

inline void emit_config_header(std::ostream& out, const Config& cfg) {
  for (const auto& [k, v] : cfg.entries()) out << "# " << k << " = " << v << "\n";
}

inline SwitchConfig switch_config_from(const Config& cfg) {
  SwitchConfig sc;
  sc.ports = static_cast<int>(cfg.get_int("ports", 16));
  sc.cell_size = static_cast<int>(cfg.get_int("cell_size", 64));
  sc.speedup = cfg.get_double("speedup", 1.0);
  sc.islip_iterations = static_cast<int>(cfg.get_int("islip_iterations", 0));
  sc.merge_enabled = cfg.get_bool("merge", false);
  sc.merge_timeout_cells = cfg.get_double("merge_timeout_cells", 10.0);
  const std::string mode = cfg.get("input_mode", "line_rate");
  if (mode == "line_rate")
    sc.line_rate_input = true;
  else if (mode == "batch")
    sc.line_rate_input = false;
  else
    throw usage_error("input_mode must be line_rate or batch");
  sc.warmup_fraction = cfg.get_double("warmup_fraction", 0.1);
  sc.instability_threshold = cfg.get_int("instability_threshold", 1000);
  sc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  sc.max_served_cells =
      static_cast<std::uint64_t>(cfg.get_int("max_served_cells", 0));
  return sc;
}

inline SyntheticSpec synthetic_spec_from(const Config& cfg, int ports) {
  SyntheticSpec spec;
  spec.ports = ports;
  const std::string arrival = cfg.get("traffic.arrival", "poisson");
  const double ia = cfg.get_double("traffic.mean_interarrival_us", 66.5);
  if (arrival == "poisson")
    spec.arrival = PoissonArrivals{ia};
  else if (arrival == "cbr")
    spec.arrival = CbrArrivals{ia};
  else
    throw usage_error("traffic.arrival must be poisson or cbr");
  const std::string length = cfg.get("traffic.length", "bimodal");
  if (length == "bimodal")
    spec.length = BimodalLength{};
  else if (length == "exponential")
    spec.length = ExponentialLength{cfg.get_double("traffic.mean_bytes", 764.0)};
  else if (length == "fixed")
    spec.length =
        FixedLength{static_cast<int>(cfg.get_int("traffic.fixed_bytes", 64))};
  else
    throw usage_error("traffic.length must be bimodal, exponential or fixed");
  const std::string dest = cfg.get("traffic.dest", "uniform");
  if (dest == "uniform")
    spec.dest = UniformDest{};
  else
    spec.dest = FixedDest{static_cast<int>(std::stoi(dest))};
  spec.active_inputs =
      static_cast<int>(cfg.get_int("traffic.active_inputs", -1));
  return spec;
}

inline std::vector<std::vector<Packet>> streams_from(const Config& cfg,
                                                     const SwitchConfig& sc) {
  const double util = cfg.get_double("traffic.utilization", 0.9);
  if (cfg.has("traffic.trace")) {
    const std::string path = cfg.get("traffic.trace", "");
    std::ifstream in(path);
    if (!in) throw usage_error("cannot open trace file: " + path);
    auto packets = parse_trace(in, sc.ports);
    const int split =
        static_cast<int>(cfg.get_int("traffic.trace_split", sc.ports));
    if (split < 1 || split > sc.ports)
      throw usage_error("traffic.trace_split must be in [1, ports]");
    // Equal-count contiguous chunks, one per input port, each rebased to
    // start at time zero.
    std::vector<std::vector<Packet>> streams(sc.ports);
    const std::size_t chunk =
        std::max<std::size_t>((packets.size() + split - 1) / split, 1);
    for (std::size_t k = 0; k < packets.size(); ++k) {
      const std::size_t port = std::min<std::size_t>(k / chunk, split - 1);
      Packet p = packets[k];
      p.arrival_time -= packets[port * chunk].arrival_time;
      p.id = k;
      streams[port].push_back(p);
    }
    scale_to_utilization(streams, sc.ports, sc.cell_size, util);
    return streams;
  }
  const auto spec = synthetic_spec_from(cfg, sc.ports);
  const std::size_t per_port = static_cast<std::size_t>(
      cfg.get_int("traffic.packets_per_port", 100000));
  return build_scaled_streams(spec, sc.cell_size, util, sc.seed, per_port);
}

inline void run_analyze(const Config& cfg, std::ostream& out) {
  const double s = cfg.get_double("S", 64.0);
  const auto lengths = cfg.get_list("L", {100.0, 500.0, 1000.0});
  std::vector<double> rho_default;
  for (int i = 50; i <= 99; ++i) rho_default.push_back(i / 100.0);
  const auto rhos = cfg.get_list("rho_list", rho_default);
  emit_config_header(out, cfg);
  out << "L,rho,lambda,mu,rho_quantized,mean_queue,sigma,stable\n";
  for (double l : lengths)
    for (double r : rhos) {
      const auto res = segmentation_scenario_analysis({l, s, r});
      out << fmt6(l) << ',' << fmt6(r) << ',' << fmt6(res.lambda) << ','
          << fmt6(res.mu) << ',' << fmt6(res.rho_quantized) << ','
          << (res.stable ? fmt6(res.mean_queue_length) : std::string("inf"))
          << ',' << fmt6(res.required_speedup) << ','
          << (res.stable ? 1 : 0) << "\n";
    }
}

inline void run_quantize(const Config& cfg, std::ostream& out) {
  const std::string kind = cfg.get("dist", "exponential");
  ContinuousDist dist = Exponential{1.0};
  if (kind == "exponential") {
    dist = Exponential{cfg.get_double("mu", 1.0)};
  } else if (kind == "hyperexp2") {
    dist = Hyperexp2{cfg.get_double("alpha1", 0.5), cfg.get_double("alpha2", 0.5),
                     cfg.get_double("mu1", 1.0), cfg.get_double("mu2", 2.0)};
  } else if (kind == "erlang2") {
    dist = Erlang2{cfg.get_double("mu", 1.0)};
  } else if (kind == "gamma") {
    if (cfg.has("gamma_m") || cfg.has("gamma_s")) {
      const GammaDist g =
          gamma_fit(cfg.get_double("gamma_m", 1.74), cfg.get_double("gamma_s", 0.89));
      dist = g;
    } else {
      dist = GammaDist{cfg.get_double("gamma_shape", 3.82),
                       cfg.get_double("gamma_scale", 0.46)};
    }
  } else {
    throw usage_error("dist must be exponential, hyperexp2, erlang2 or gamma");
  }
  const double eps = cfg.get_double("tail_epsilon", 1e-12);
  const auto pmf = quantize_general(dist, eps);
  const auto m = pmf_moments(pmf);
  emit_config_header(out, cfg);
  if (const auto* g = std::get_if<GammaDist>(&dist))
    out << "# gamma alpha = " << fmt6(g->shape)
        << ", beta = " << fmt6(g->scale) << "\n";
  out << "# moments mean = " << fmt6(m.mean)
      << ", variance = " << fmt6(m.variance)
      << ", tail_mass = " << fmt6(pmf.tail_mass) << "\n";
  out << "k,p_k\n";
  for (std::size_t k = 1; k <= pmf.probs.size(); ++k)
    out << k << ',' << fmt6(pmf.probs[k - 1]) << "\n";
}

inline void emit_stats_row(std::ostream& out, double util, double sigma,
                           const SimStats& st) {
  out << fmt6(util) << ',' << fmt6(sigma) << ',' << fmt6(st.mean_queue_cells)
      << ',' << st.max_port_queue_cells << ',' << (st.unstable ? 1 : 0) << ','
      << fmt6(st.padding_overhead_ratio()) << "\n";
}

inline void run_simulate(const Config& cfg, std::ostream& out) {
  const SwitchConfig sc = switch_config_from(cfg);
  auto streams = streams_from(cfg, sc);
  const auto st = run_simulation(sc, streams);
  emit_config_header(out, cfg);
  out << "utilization,speedup,mean_queue_cells,max_port_queue_cells,unstable,"
         "padding_overhead_ratio\n";
  emit_stats_row(out, cfg.get_double("traffic.utilization", 0.9), sc.speedup,
                 st);
}

inline void run_sweep(const Config& cfg, std::ostream& out) {
  const SwitchConfig sc = switch_config_from(cfg);
  const auto spec = synthetic_spec_from(cfg, sc.ports);
  const std::size_t per_port = static_cast<std::size_t>(
      cfg.get_int("traffic.packets_per_port", 100000));
  const auto utils = cfg.get_list("utilization_list",
                                  {0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99});
  const auto sigmas = cfg.get_list("speedup_list", {1.0, 1.05, 1.1});
  const auto points = sweep_utilization(sc, spec, per_port, utils, sigmas);
  emit_config_header(out, cfg);
  out << "utilization,speedup,mean_queue_cells,max_port_queue_cells,unstable,"
         "padding_overhead_ratio\n";
  for (const auto& p : points)
    emit_stats_row(out, p.utilization, p.speedup, p.stats);
}

inline void run_min_speedup(const Config& cfg, std::ostream& out) {
  const SwitchConfig sc = switch_config_from(cfg);
  const auto spec = synthetic_spec_from(cfg, sc.ports);
  const std::size_t per_port = static_cast<std::size_t>(
      cfg.get_int("traffic.packets_per_port", 100000));
  const double util = cfg.get_double("traffic.utilization", 0.99);
  const double step = cfg.get_double("min_speedup_step", 0.01);
  const double cap = cfg.get_double("min_speedup_cap", 2.0);
  const double sigma = find_min_speedup(sc, spec, per_port, util, step, cap);
  emit_config_header(out, cfg);
  out << "utilization,merge,min_speedup\n";
  out << fmt6(util) << ',' << (sc.merge_enabled ? 1 : 0) << ',' << fmt6(sigma)
      << "\n";
}

inline void run_gen_traffic(const Config& cfg, std::ostream& out) {
  const SwitchConfig sc = switch_config_from(cfg);
  const auto spec = synthetic_spec_from(cfg, sc.ports);
  const std::size_t count = static_cast<std::size_t>(
      cfg.get_int("traffic.packets_per_port", 100000));
  const auto packets = generate_synthetic(spec, sc.seed, count);
  emit_config_header(out, cfg);
  double prev = 0.0;
  for (const Packet& p : packets) {
    out << fmt6(p.arrival_time - prev) << ',' << p.length << ',' << p.dest
        << "\n";
    prev = p.arrival_time;
  }
}

}  // namespace detail

inline void execute(const RunPlan& plan, std::ostream& out) {
  const Config cfg = detail::load_config(plan);
  switch (plan.command) {
    case Command::Analyze: detail::run_analyze(cfg, out); break;
    case Command::Quantize: detail::run_quantize(cfg, out); break;
    case Command::Simulate: detail::run_simulate(cfg, out); break;
    case Command::Sweep: detail::run_sweep(cfg, out); break;
    case Command::MinSpeedup: detail::run_min_speedup(cfg, out); break;
    case Command::GenTraffic: detail::run_gen_traffic(cfg, out); break;
  }
}

// Runs the plan, writing to the output path (or stdout).  Partial output
// files are removed on failure.
inline int run_plan(const RunPlan& plan, std::ostream& console_out,
                    std::ostream& console_err) {
  try {
    if (plan.output_path.empty()) {
      execute(plan, console_out);
    } else {
      std::ofstream out(plan.output_path);
      if (!out)
        throw usage_error("cannot open output file: " + plan.output_path);
      try {
        execute(plan, out);
      } catch (...) {
        out.close();
        std::remove(plan.output_path.c_str());
        throw;
      }
    }
    return 0;
  } catch (const std::exception& e) {
    console_err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace cellq
