#pragma once

// Packet-to-cell segmentation and the cell-merging state machine.
//
// A cell carries byte ranges of at most two packets; the merging FSM holds
// back a packet's partial trailer cell so the next packet's leading bytes can
// fill it, with a timer to bound how long the trailer may wait.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace cellq {

struct Packet {
  std::uint64_t id = 0;
  double arrival_time = 0.0;  // cell times at link rate (or trace time units)
  int length = 0;             // bytes, >= 1
  int dest = 0;               // output port
};

struct CellSegment {
  std::uint64_t packet_id = 0;
  int offset = 0;  // first byte of the packet carried by this segment
  int count = 0;   // bytes carried
  bool last = false;  // segment carries the packet's final byte
};

struct Cell {
  int capacity = 0;
  int padding = 0;
  int num_segments = 0;
  CellSegment segments[2];  // at most two packets per cell under merging

  int payload_bytes() const { return capacity - padding; }
  bool full() const { return padding == 0; }

  void add_segment(const CellSegment& s) {
    if (num_segments >= 2)
      throw std::logic_error("Cell: more than two segments");
    if (s.count > padding) throw std::logic_error("Cell: segment overflows");
    segments[num_segments++] = s;
    padding -= s.count;
  }
};

inline Cell make_empty_cell(int capacity) {
  Cell c;
  c.capacity = capacity;
  c.padding = capacity;
  return c;
}

// ceil(L/S) cells, all full except possibly the last.
inline std::vector<Cell> segment_packet(const Packet& p, int cell_size) {
  if (cell_size < 1)
    throw std::invalid_argument("segment_packet: cell size must be >= 1");
  if (p.length < 1)
    throw std::invalid_argument("segment_packet: packet length must be >= 1");
  std::vector<Cell> cells;
  cells.reserve((p.length + cell_size - 1) / cell_size);
  int offset = 0;
  while (offset < p.length) {
    const int take = std::min(cell_size, p.length - offset);
    Cell c = make_empty_cell(cell_size);
    c.add_segment({p.id, offset, take, offset + take == p.length});
    cells.push_back(c);
    offset += take;
  }
  return cells;
}

struct OverheadStats {
  long long payload_bytes = 0;
  long long padding_bytes = 0;
  long long cell_count = 0;
  double implied_speedup = 1.0;  // (payload + padding) / payload
};

template <typename CellRange>
OverheadStats overhead_stats(const CellRange& cells) {
  OverheadStats s;
  for (const Cell& c : cells) {
    s.payload_bytes += c.payload_bytes();
    s.padding_bytes += c.padding;
    ++s.cell_count;
  }
  if (s.payload_bytes > 0)
    s.implied_speedup = static_cast<double>(s.payload_bytes + s.padding_bytes) /
                        static_cast<double>(s.payload_bytes);
  return s;
}

// Per-VOQ merging FSM.  States follow the hold-back design: EMPTY (nothing
// held), SEGMENTING (transient, within a single event), PARTIAL (a trailer
// cell is held back).  The owning queue arms the timer when it drains while a
// cell is held; any arrival cancels it.
class SegmenterFsm {
 public:
  enum class State { Empty, Segmenting, Partial };

  SegmenterFsm(int cell_size, int owner_dest, double timeout_cells = 10.0)
      : cell_size_(cell_size), dest_(owner_dest), timeout_(timeout_cells) {
    if (cell_size < 1)
      throw std::invalid_argument("SegmenterFsm: cell size must be >= 1");
    if (timeout_cells <= 0.0)
      throw std::invalid_argument("SegmenterFsm: timeout must be positive");
  }

  State state() const { return held_ ? State::Partial : State::Empty; }
  const std::optional<Cell>& held_cell() const { return held_; }
  bool timer_armed() const { return deadline_.has_value(); }
  double timer_deadline() const { return *deadline_; }
  std::uint64_t timer_generation() const { return generation_; }

  // T0/T3 into SEGMENTING, then T1 (trailer held) or T2 (exact fit) out.
  // A held cell, if any, is filled with the arriving packet's leading bytes
  // first.  Returns the cells to enqueue, in order.
  std::vector<Cell> on_packet(const Packet& p, double /*now*/) {
    if (p.dest != dest_)
      throw std::invalid_argument("SegmenterFsm: packet routed to wrong VOQ");
    if (p.length < 1)
      throw std::invalid_argument("SegmenterFsm: packet length must be >= 1");
    cancel_timer();
    std::vector<Cell> out;
    int offset = 0;
    if (held_) {
      const int take = std::min(held_->padding, p.length);
      held_->add_segment({p.id, 0, take, take == p.length});
      offset = take;
      // A merged cell that is still partial cannot stay held (it already
      // carries two packets); it goes out padded.
      out.push_back(*held_);
      held_.reset();
    }
    while (p.length - offset >= cell_size_) {
      Cell c = make_empty_cell(cell_size_);
      c.add_segment(
          {p.id, offset, cell_size_, offset + cell_size_ == p.length});
      out.push_back(c);
      offset += cell_size_;
    }
    if (offset < p.length) {
      Cell c = make_empty_cell(cell_size_);
      c.add_segment({p.id, offset, p.length - offset, true});
      held_ = c;  // T1
    }
    return out;
  }

  // T4: the held cell goes out with its padding.  Expiries for cancelled or
  // re-armed timers are benign no-ops.
  std::vector<Cell> on_timer_expiry(double now) {
    if (!held_ || !deadline_ || now < *deadline_) return {};
    std::vector<Cell> out{*held_};
    held_.reset();
    cancel_timer();
    return out;
  }

  // Idempotent; call when the owning VOQ is (or becomes) empty in PARTIAL.
  void arm_timer(double now) {
    if (!held_ || deadline_) return;
    deadline_ = now + timeout_;
    ++generation_;
  }

  double timeout() const { return timeout_; }

 private:
  void cancel_timer() {
    if (deadline_) {
      deadline_.reset();
      ++generation_;
    }
  }

  int cell_size_;
  int dest_;
  double timeout_;
  std::optional<Cell> held_;
  std::optional<double> deadline_;
  std::uint64_t generation_ = 0;
};

}  // namespace cellq
