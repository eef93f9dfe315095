#pragma once

// Deterministic discrete-event simulation of an N-port VOQ crossbar switch:
// arrivals -> per-VOQ segmentation (optionally with cell merging) -> iSLIP
// matching per internal slot -> one cell per matched pair -> output
// reassembly.  Internal slots tick with period 1/speedup external cell times.
// Ties at equal time are broken arrival < cell release < slot < timer.
//
// A packet's timestamp marks its first byte on the input link; each cell
// joins its VOQ once the payload it carries has been received at line rate
// (padding occupies no link time).  Queues therefore see the input link's
// byte rate plus padding overhead, not whole packets as instantaneous cell
// bursts.

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "cellq/islip.hpp"
#include "cellq/segmenter.hpp"
#include "cellq/traffic.hpp"

namespace cellq {

struct SwitchConfig {
  int ports = 16;
  int cell_size = 64;
  double speedup = 1.0;
  int islip_iterations = 0;  // 0 selects ceil(log2 ports)
  bool merge_enabled = false;
  double merge_timeout_cells = 10.0;
  // true: cells join their VOQ as the packet streams in at line rate;
  // false: the whole packet's cells are enqueued at its timestamp (point
  // arrivals, matching queueing models with instantaneous arrivals).
  bool line_rate_input = true;
  double warmup_fraction = 0.1;  // of the arrival horizon, excluded from stats
  long long instability_threshold = 1000;  // cells queued at one input port
  std::uint64_t seed = 1;
  std::uint64_t max_served_cells = 0;  // 0 = unlimited
  bool stop_on_instability = true;

  void validate() const {
    if (ports < 2) throw std::invalid_argument("SwitchConfig: ports >= 2");
    if (cell_size < 1)
      throw std::invalid_argument("SwitchConfig: cell_size >= 1");
    if (speedup < 1.0)
      throw std::invalid_argument("SwitchConfig: speedup >= 1");
    if (warmup_fraction < 0.0 || warmup_fraction >= 1.0)
      throw std::invalid_argument("SwitchConfig: warmup_fraction in [0,1)");
  }
};

struct SimStats {
  double mean_queue_cells = 0.0;       // time-avg cells queued per input port
  double mean_packets_in_system = 0.0; // time-avg packets not yet delivered
  long long max_port_queue_cells = 0;
  bool unstable = false;
  bool truncated = false;
  long long cells_forwarded = 0;
  long long padding_bytes = 0;
  long long payload_bytes = 0;
  long long packets_in = 0;
  long long packets_delivered = 0;
  long long reassembly_errors = 0;
  double sim_end_time = 0.0;  // external cell times
  std::vector<double> per_port_offered_load;  // per input, bytes-based

  double padding_overhead_ratio() const {
    return payload_bytes > 0
               ? static_cast<double>(payload_bytes + padding_bytes) /
                     static_cast<double>(payload_bytes)
               : 1.0;
  }
};

namespace detail {

struct ReassemblyContext {
  int next_offset = 0;
  int total_length = 0;
};

struct TimerEvent {
  double time;
  int input;
  int dest;
  std::uint64_t generation;
  bool operator>(const TimerEvent& o) const {
    if (time != o.time) return time > o.time;
    if (input != o.input) return input > o.input;
    return dest > o.dest;
  }
};

struct PendingCell {
  double time;  // when the cell's last payload byte has been received
  int dest;
  Cell cell;
};

}  // namespace detail

class Simulator {
 public:
  Simulator(const SwitchConfig& cfg,
            const std::vector<std::vector<Packet>>& per_input_packets)
      : cfg_(cfg), streams_(per_input_packets) {
    cfg_.validate();
    if (static_cast<int>(streams_.size()) != cfg_.ports)
      throw std::invalid_argument("Simulator: need one stream per input port");
    if (cfg_.islip_iterations <= 0)
      cfg_.islip_iterations = default_islip_iterations(cfg_.ports);
  }

  SimStats run() {
    const int n = cfg_.ports;
    voq_.assign(static_cast<std::size_t>(n) * n, {});
    port_cells_.assign(n, 0);
    queue_integral_.assign(n, 0.0);
    bytes_in_.assign(n, 0.0);
    next_idx_.assign(n, 0);
    pending_.assign(n, {});
    pending_voq_.assign(static_cast<std::size_t>(n) * n, 0);
    line_free_.assign(n, 0.0);
    state_ = IslipState(n);
    if (cfg_.merge_enabled) {
      fsms_.clear();
      fsms_.reserve(static_cast<std::size_t>(n) * n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          fsms_.emplace_back(cfg_.cell_size, j, cfg_.merge_timeout_cells);
    }

    double horizon = 0.0;
    for (const auto& s : streams_)
      for (const Packet& p : s) {
        if (p.dest < 0 || p.dest >= n)
          throw std::invalid_argument("Simulator: packet dest out of range");
        horizon = std::max(horizon, p.arrival_time);
      }
    warmup_end_ = cfg_.warmup_fraction * horizon;
    last_time_ = 0.0;
    resync_slots_ = true;  // internal clock starts with the first queued cell

    const double inf = std::numeric_limits<double>::infinity();
    while (true) {
      const double ta = next_arrival_time();
      const double tr = next_release_time();
      const double ts = total_cells_ > 0 ? slot_k_ / cfg_.speedup : inf;
      const double tt = next_timer_time();
      if (ta <= tr && ta <= ts && ta <= tt) {
        if (ta == inf) break;
        advance(ta);
        process_arrival();
      } else if (tr <= ts && tr <= tt) {
        advance(tr);
        process_release();
      } else if (ts <= tt) {
        advance(ts);
        process_slot();
        ++slot_k_;
      } else {
        advance(tt);
        process_timer();
      }
      if (stats_.unstable && cfg_.stop_on_instability) break;
      if (cfg_.max_served_cells &&
          stats_.cells_forwarded >=
              static_cast<long long>(cfg_.max_served_cells)) {
        stats_.truncated = true;
        break;
      }
    }
    finalize(horizon);
    return stats_;
  }

 private:
  std::deque<Cell>& voq(int i, int j) {
    return voq_[static_cast<std::size_t>(i) * cfg_.ports + j];
  }
  SegmenterFsm& fsm(int i, int j) {
    return fsms_[static_cast<std::size_t>(i) * cfg_.ports + j];
  }

  double next_arrival_time() const {
    double t = std::numeric_limits<double>::infinity();
    for (int i = 0; i < cfg_.ports; ++i)
      if (next_idx_[i] < streams_[i].size())
        t = std::min(t, streams_[i][next_idx_[i]].arrival_time);
    return t;
  }

  int next_arrival_input() const {
    double t = std::numeric_limits<double>::infinity();
    int who = -1;
    for (int i = 0; i < cfg_.ports; ++i)
      if (next_idx_[i] < streams_[i].size() &&
          streams_[i][next_idx_[i]].arrival_time < t) {
        t = streams_[i][next_idx_[i]].arrival_time;
        who = i;
      }
    return who;
  }

  double next_timer_time() const {
    return timers_.empty() ? std::numeric_limits<double>::infinity()
                           : timers_.top().time;
  }

  double next_release_time() const {
    double t = std::numeric_limits<double>::infinity();
    for (const auto& q : pending_)
      if (!q.empty()) t = std::min(t, q.front().time);
    return t;
  }

  // Integrates queue statistics over [last_time_, t].
  void advance(double t) {
    if (t > last_time_) {
      const double lo = std::max(last_time_, warmup_end_);
      if (t > lo) {
        const double dt = t - lo;
        for (int i = 0; i < cfg_.ports; ++i)
          queue_integral_[i] += dt * port_cells_[i];
        packets_integral_ += dt * packets_in_system_;
      }
      last_time_ = t;
    }
  }

  void enqueue_cell(int i, int j, const Cell& cell) {
    voq(i, j).push_back(cell);
    ++port_cells_[i];
    ++total_cells_;
    if (resync_slots_) {
      // Slots were idle; restart the internal clock at the first slot
      // boundary at or after now.
      slot_k_ = static_cast<long long>(std::ceil(last_time_ * cfg_.speedup));
      while (slot_k_ / cfg_.speedup < last_time_) ++slot_k_;
      resync_slots_ = false;
    }
    check_instability(i);
  }

  // Schedules cells for VOQ entry as their payload bytes arrive on input
  // link i.  `reused_bytes` is payload already on hand (a held trailer being
  // merged, or a timed-out trailer), which costs no further link time.
  void schedule_cells(int i, int j, const std::vector<Cell>& cells,
                      int reused_bytes) {
    if (cells.empty()) return;
    if (!cfg_.line_rate_input) {
      for (const Cell& c : cells) enqueue_cell(i, j, c);
      return;
    }
    double t = std::max(last_time_, line_free_[i]);
    for (const Cell& c : cells) {
      const int fresh = std::max(c.payload_bytes() - reused_bytes, 0);
      reused_bytes = std::max(reused_bytes - c.payload_bytes(), 0);
      t += static_cast<double>(fresh) / cfg_.cell_size;
      pending_[i].push_back({t, j, c});
      ++pending_voq_[static_cast<std::size_t>(i) * cfg_.ports + j];
    }
    line_free_[i] = t;
  }

  void process_release() {
    double t = std::numeric_limits<double>::infinity();
    int who = -1;
    for (int i = 0; i < cfg_.ports; ++i)
      if (!pending_[i].empty() && pending_[i].front().time < t) {
        t = pending_[i].front().time;
        who = i;
      }
    detail::PendingCell pc = pending_[who].front();
    pending_[who].pop_front();
    --pending_voq_[static_cast<std::size_t>(who) * cfg_.ports + pc.dest];
    enqueue_cell(who, pc.dest, pc.cell);
  }

  bool voq_idle(int i, int j) const {
    return voq_[static_cast<std::size_t>(i) * cfg_.ports + j].empty() &&
           pending_voq_[static_cast<std::size_t>(i) * cfg_.ports + j] == 0;
  }

  void check_instability(int i) {
    stats_.max_port_queue_cells =
        std::max(stats_.max_port_queue_cells, port_cells_[i]);
    if (last_time_ >= warmup_end_ &&
        port_cells_[i] >= cfg_.instability_threshold)
      stats_.unstable = true;
  }

  void process_arrival() {
    const int i = next_arrival_input();
    const Packet& p = streams_[i][next_idx_[i]++];
    ++stats_.packets_in;
    ++packets_in_system_;
    bytes_in_[i] += p.length;
    in_flight_.emplace(p.id | (static_cast<std::uint64_t>(i) << 48),
                       detail::ReassemblyContext{0, p.length});
    if (cfg_.merge_enabled) {
      auto& f = fsm(i, p.dest);
      const int held = f.state() == SegmenterFsm::State::Partial
                           ? f.held_cell()->payload_bytes()
                           : 0;
      auto cells = f.on_packet(p, last_time_);
      schedule_cells(i, p.dest, cells, held);
      // Arrival to an idle VOQ that left only a held trailer behind: the
      // merge timer starts immediately.
      if (f.state() == SegmenterFsm::State::Partial && voq_idle(i, p.dest))
        arm_timer(i, p.dest);
    } else {
      schedule_cells(i, p.dest, segment_packet(p, cfg_.cell_size), 0);
    }
  }

  void arm_timer(int i, int j) {
    auto& f = fsm(i, j);
    f.arm_timer(last_time_);
    if (f.timer_armed())
      timers_.push({f.timer_deadline(), i, j, f.timer_generation()});
  }

  void process_timer() {
    const detail::TimerEvent ev = timers_.top();
    timers_.pop();
    auto& f = fsm(ev.input, ev.dest);
    if (!f.timer_armed() || f.timer_generation() != ev.generation)
      return;  // stale: cancelled or re-armed since it was scheduled
    auto cells = f.on_timer_expiry(ev.time);
    // The trailer's bytes were received long ago; it enters the VOQ now.
    for (const Cell& c : cells) enqueue_cell(ev.input, ev.dest, c);
  }

  void process_slot() {
    const int n = cfg_.ports;
    RequestMatrix req(n);
    bool any = false;
    for (int i = 0; i < n; ++i) {
      if (port_cells_[i] == 0) continue;
      for (int j = 0; j < n; ++j)
        if (!voq(i, j).empty()) {
          req.set(i, j);
          any = true;
        }
    }
    if (!any) {
      resync_slots_ = true;
      return;
    }
    const Matching match = islip_schedule(req, state_, cfg_.islip_iterations);
    for (int i = 0; i < n; ++i) {
      const int j = match.input_to_output[i];
      if (j < 0) continue;
      auto& q = voq(i, j);
      const Cell cell = q.front();
      q.pop_front();
      --port_cells_[i];
      --total_cells_;
      ++stats_.cells_forwarded;
      stats_.padding_bytes += cell.padding;
      stats_.payload_bytes += cell.payload_bytes();
      deliver(i, cell);
      if (cfg_.merge_enabled && voq_idle(i, j) &&
          fsm(i, j).state() == SegmenterFsm::State::Partial)
        arm_timer(i, j);
    }
    if (total_cells_ == 0) resync_slots_ = true;
  }

  // Output-side reassembly; byte ranges of each packet must arrive in order
  // and exactly cover its length.
  void deliver(int input, const Cell& cell) {
    for (int s = 0; s < cell.num_segments; ++s) {
      const CellSegment& seg = cell.segments[s];
      const std::uint64_t key =
          seg.packet_id | (static_cast<std::uint64_t>(input) << 48);
      auto it = in_flight_.find(key);
      if (it == in_flight_.end() || seg.offset != it->second.next_offset) {
        ++stats_.reassembly_errors;
        throw std::logic_error("Simulator: reassembly byte-order violation");
      }
      it->second.next_offset += seg.count;
      if (seg.last) {
        if (it->second.next_offset != it->second.total_length) {
          ++stats_.reassembly_errors;
          throw std::logic_error("Simulator: reassembled length mismatch");
        }
        in_flight_.erase(it);
        ++stats_.packets_delivered;
        --packets_in_system_;
      }
    }
  }

  void finalize(double horizon) {
    stats_.sim_end_time = last_time_;
    const double duration = last_time_ - warmup_end_;
    if (duration > 0.0) {
      double total = 0.0;
      for (double q : queue_integral_) total += q;
      stats_.mean_queue_cells = total / duration / cfg_.ports;
      stats_.mean_packets_in_system = packets_integral_ / duration;
    }
    stats_.per_port_offered_load.assign(cfg_.ports, 0.0);
    if (horizon > 0.0)
      for (int i = 0; i < cfg_.ports; ++i)
        stats_.per_port_offered_load[i] =
            bytes_in_[i] / horizon / cfg_.cell_size;
  }

  SwitchConfig cfg_;
  const std::vector<std::vector<Packet>>& streams_;
  std::vector<std::deque<Cell>> voq_;
  std::vector<SegmenterFsm> fsms_;
  std::vector<long long> port_cells_;
  std::vector<double> queue_integral_;
  std::vector<double> bytes_in_;
  std::vector<std::size_t> next_idx_;
  std::vector<std::deque<detail::PendingCell>> pending_;
  std::vector<long long> pending_voq_;
  std::vector<double> line_free_;
  std::priority_queue<detail::TimerEvent, std::vector<detail::TimerEvent>,
                      std::greater<detail::TimerEvent>>
      timers_;
  std::unordered_map<std::uint64_t, detail::ReassemblyContext> in_flight_;
  IslipState state_{2};
  SimStats stats_;
  long long total_cells_ = 0;
  long long packets_in_system_ = 0;
  double packets_integral_ = 0.0;
  long long slot_k_ = 0;
  bool resync_slots_ = false;
  double last_time_ = 0.0;
  double warmup_end_ = 0.0;
};

inline SimStats run_simulation(const SwitchConfig& cfg,
                               const std::vector<std::vector<Packet>>& traffic) {
  return Simulator(cfg, traffic).run();
}

struct SweepPoint {
  double utilization;
  double speedup;
  SimStats stats;
};

// One independently seeded run per (utilization, speedup) grid point.
inline std::vector<SweepPoint> sweep_utilization(
    const SwitchConfig& cfg, const SyntheticSpec& spec,
    std::size_t packets_per_port, const std::vector<double>& utilizations,
    const std::vector<double>& speedups) {
  std::vector<SweepPoint> out;
  for (std::size_t ui = 0; ui < utilizations.size(); ++ui) {
    for (std::size_t si = 0; si < speedups.size(); ++si) {
      SwitchConfig c = cfg;
      c.speedup = speedups[si];
      const std::uint64_t seed =
          detail::mix_seed(cfg.seed, 1000 * (ui + 1) + si);
      auto streams = build_scaled_streams(spec, c.cell_size, utilizations[ui],
                                          seed, packets_per_port);
      out.push_back({utilizations[ui], speedups[si],
                     run_simulation(c, streams)});
    }
  }
  return out;
}

struct speedup_search_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Smallest speedup in {1.00, 1.00+step, ...} keeping the run stable at the
// given utilization.  The same traffic is replayed at every step.
inline double find_min_speedup(const SwitchConfig& cfg,
                               const SyntheticSpec& spec,
                               std::size_t packets_per_port, double utilization,
                               double step = 0.01, double cap = 2.0) {
  if (step <= 0.0)
    throw std::invalid_argument("find_min_speedup: step must be positive");
  auto streams = build_scaled_streams(spec, cfg.cell_size, utilization,
                                      cfg.seed, packets_per_port);
  for (int k = 0;; ++k) {
    const double sigma = 1.0 + k * step;
    if (sigma > cap + 1e-12)
      throw speedup_search_error(
          "find_min_speedup: no stable speedup found below cap");
    SwitchConfig c = cfg;
    c.speedup = sigma;
    c.stop_on_instability = true;
    if (!run_simulation(c, streams).unstable) return sigma;
  }
}

}  // namespace cellq
