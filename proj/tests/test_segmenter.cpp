#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <random>
#include <vector>

#include "cellq/segmenter.hpp"

using namespace cellq;

namespace {

long long total_payload(const std::vector<Cell>& cells) {
  long long sum = 0;
  for (const Cell& c : cells) sum += c.payload_bytes();
  return sum;
}

void check_cell_valid(const Cell& c) {
  int bytes = 0;
  for (int s = 0; s < c.num_segments; ++s) bytes += c.segments[s].count;
  REQUIRE(bytes + c.padding == c.capacity);
  REQUIRE(c.num_segments <= 2);
}

Packet make_packet(std::uint64_t id, int length, int dest = 0) {
  return {id, 0.0, length, dest};
}

// Drives a sequence through the FSM and returns all emitted cells plus the
// final held cell, if any.
std::vector<Cell> run_merge(SegmenterFsm& fsm, const std::vector<int>& lengths,
                            bool flush) {
  std::vector<Cell> out;
  std::uint64_t id = 0;
  for (int len : lengths) {
    auto cells = fsm.on_packet(make_packet(id++, len), 0.0);
    out.insert(out.end(), cells.begin(), cells.end());
  }
  if (flush && fsm.state() == SegmenterFsm::State::Partial) {
    fsm.arm_timer(100.0);
    auto cells = fsm.on_timer_expiry(fsm.timer_deadline());
    out.insert(out.end(), cells.begin(), cells.end());
  }
  return out;
}

}  // namespace

TEST_CASE("segment_packet arithmetic") {
  SECTION("1518-byte Ethernet maximum") {
    const auto cells = segment_packet(make_packet(1, 1518), 64);
    REQUIRE(cells.size() == 24);
    for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
      CHECK(cells[i].padding == 0);
      check_cell_valid(cells[i]);
    }
    CHECK(cells.back().padding == 18);
    CHECK(total_payload(cells) == 1518);
    CHECK(cells.back().segments[0].last);
  }
  SECTION("exact fit") {
    const auto cells = segment_packet(make_packet(1, 64), 64);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].padding == 0);
  }
  SECTION("worst case S+1") {
    const auto cells = segment_packet(make_packet(1, 65), 64);
    REQUIRE(cells.size() == 2);
    CHECK(cells[1].padding == 63);
    const auto stats = overhead_stats(cells);
    CHECK(stats.implied_speedup == Catch::Approx(128.0 / 65.0).margin(1e-12));
  }
  SECTION("byte ranges appear in packet order") {
    const auto cells = segment_packet(make_packet(7, 300), 64);
    int expect = 0;
    for (const Cell& c : cells) {
      REQUIRE(c.num_segments == 1);
      CHECK(c.segments[0].offset == expect);
      expect += c.segments[0].count;
    }
    CHECK(expect == 300);
  }
  CHECK_THROWS_AS(segment_packet(make_packet(1, 0), 64), std::invalid_argument);
  CHECK_THROWS_AS(segment_packet(make_packet(1, 10), 0), std::invalid_argument);
}

TEST_CASE("overhead_stats") {
  SECTION("empty input") {
    const auto s = overhead_stats(std::vector<Cell>{});
    CHECK(s.cell_count == 0);
    CHECK(s.implied_speedup == 1.0);
  }
  SECTION("full cell only") {
    const auto s = overhead_stats(segment_packet(make_packet(1, 64), 64));
    CHECK(s.implied_speedup == 1.0);
  }
}

TEST_CASE("FSM basic transitions") {
  SECTION("T0/T1: trailer is held back") {
    SegmenterFsm fsm(64, 0);
    const auto cells = fsm.on_packet(make_packet(1, 65), 0.0);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].padding == 0);
    REQUIRE(fsm.state() == SegmenterFsm::State::Partial);
    REQUIRE(fsm.held_cell());
    CHECK(fsm.held_cell()->payload_bytes() == 1);
    CHECK(fsm.held_cell()->num_segments == 1);
  }
  SECTION("T3: merge into the held cell") {
    SegmenterFsm fsm(64, 0);
    fsm.on_packet(make_packet(1, 65), 0.0);
    const auto cells = fsm.on_packet(make_packet(2, 65), 1.0);
    REQUIRE(cells.size() == 1);  // merged cell: 1 trailer byte + 63 header bytes
    CHECK(cells[0].padding == 0);
    CHECK(cells[0].num_segments == 2);
    CHECK(cells[0].segments[0].packet_id == 1);
    CHECK(cells[0].segments[0].count == 1);
    CHECK(cells[0].segments[1].packet_id == 2);
    CHECK(cells[0].segments[1].count == 63);
    REQUIRE(fsm.state() == SegmenterFsm::State::Partial);
    CHECK(fsm.held_cell()->payload_bytes() == 2);  // 65 - 63 held
  }
  SECTION("T2: exact division goes straight back to EMPTY") {
    SegmenterFsm fsm(64, 0);
    const auto cells = fsm.on_packet(make_packet(1, 128), 0.0);
    REQUIRE(cells.size() == 2);
    CHECK(fsm.state() == SegmenterFsm::State::Empty);
  }
  SECTION("wrong VOQ is rejected") {
    SegmenterFsm fsm(64, 3);
    CHECK_THROWS_AS(fsm.on_packet(make_packet(1, 65, 2), 0.0),
                    std::invalid_argument);
  }
}

TEST_CASE("FSM timer") {
  SECTION("T4: expiry emits the held cell with padding") {
    SegmenterFsm fsm(64, 0, 10.0);
    fsm.on_packet(make_packet(1, 65), 0.0);
    fsm.arm_timer(2.0);
    REQUIRE(fsm.timer_armed());
    CHECK(fsm.timer_deadline() == Catch::Approx(12.0));
    const auto cells = fsm.on_timer_expiry(12.0);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].padding == 63);
    CHECK(fsm.state() == SegmenterFsm::State::Empty);
    CHECK_FALSE(fsm.timer_armed());
  }
  SECTION("arrival cancels the timer; no padding emitted") {
    SegmenterFsm fsm(64, 0, 10.0);
    fsm.on_packet(make_packet(1, 65), 0.0);
    fsm.arm_timer(2.0);
    const auto gen = fsm.timer_generation();
    fsm.on_packet(make_packet(2, 63), 3.0);  // fills the held cell exactly
    CHECK_FALSE(fsm.timer_armed());
    CHECK(fsm.timer_generation() != gen);
    // A stale expiry is a benign no-op.
    CHECK(fsm.on_timer_expiry(12.0).empty());
  }
  SECTION("arming is idempotent") {
    SegmenterFsm fsm(64, 0, 10.0);
    fsm.on_packet(make_packet(1, 65), 0.0);
    fsm.arm_timer(2.0);
    fsm.arm_timer(5.0);
    CHECK(fsm.timer_deadline() == Catch::Approx(12.0));
  }
  SECTION("expiry in EMPTY is a no-op") {
    SegmenterFsm fsm(64, 0);
    CHECK(fsm.on_timer_expiry(50.0).empty());
  }
}

TEST_CASE("FSM edge case: merged cell still partial") {
  // A sub-cell packet merged behind a held trailer cannot stay held (two
  // packets may not share a held cell), so the merged cell goes out padded.
  SegmenterFsm fsm(64, 0);
  fsm.on_packet(make_packet(1, 65), 0.0);
  const auto cells = fsm.on_packet(make_packet(2, 10), 1.0);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].num_segments == 2);
  CHECK(cells[0].padding == 64 - 1 - 10);
  CHECK(fsm.state() == SegmenterFsm::State::Empty);
}

TEST_CASE("byte conservation over random packet sequences") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> len(1, 2000);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> lengths(50);
    for (int& l : lengths) l = len(rng);
    long long total = std::accumulate(lengths.begin(), lengths.end(), 0LL);

    SegmenterFsm fsm(64, 0);
    const auto cells = run_merge(fsm, lengths, /*flush=*/true);
    for (const Cell& c : cells) check_cell_valid(c);
    CHECK(total_payload(cells) == total);

    // Per-packet byte ranges stay contiguous and ordered.
    std::vector<int> next_offset(lengths.size(), 0);
    for (const Cell& c : cells)
      for (int s = 0; s < c.num_segments; ++s) {
        const auto& seg = c.segments[s];
        REQUIRE(seg.offset == next_offset[seg.packet_id]);
        next_offset[seg.packet_id] += seg.count;
        if (seg.last) CHECK(next_offset[seg.packet_id] == lengths[seg.packet_id]);
      }
  }
}

TEST_CASE("merging never produces more cells or padding") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(1, 1600);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int> lengths(80);
    for (std::size_t i = 0; i < lengths.size(); ++i) lengths[i] = len(rng);

    SegmenterFsm fsm(64, 0);
    const auto merged = run_merge(fsm, lengths, /*flush=*/true);

    std::vector<Cell> plain;
    std::uint64_t id = 0;
    for (int l : lengths) {
      auto cells = segment_packet(make_packet(id++, l), 64);
      plain.insert(plain.end(), cells.begin(), cells.end());
    }
    const auto ms = overhead_stats(merged);
    const auto ps = overhead_stats(plain);
    CHECK(ms.cell_count <= ps.cell_count);
    CHECK(ms.padding_bytes <= ps.padding_bytes);
  }
}

TEST_CASE("timer before every arrival degenerates to plain segmentation") {
  const std::vector<int> lengths = {65, 130, 64, 1, 1518, 70};
  SegmenterFsm fsm(64, 0, 0.5);
  std::vector<Cell> merged;
  std::uint64_t id = 0;
  double now = 0.0;
  for (int l : lengths) {
    auto cells = fsm.on_packet(make_packet(id++, l), now);
    merged.insert(merged.end(), cells.begin(), cells.end());
    if (fsm.state() == SegmenterFsm::State::Partial) {
      fsm.arm_timer(now);
      auto flushed = fsm.on_timer_expiry(fsm.timer_deadline());
      merged.insert(merged.end(), flushed.begin(), flushed.end());
    }
    now += 10.0;
  }
  std::vector<Cell> plain;
  id = 0;
  for (int l : lengths) {
    auto cells = segment_packet(make_packet(id++, l), 64);
    plain.insert(plain.end(), cells.begin(), cells.end());
  }
  REQUIRE(merged.size() == plain.size());
  for (std::size_t i = 0; i < merged.size(); ++i) {
    CHECK(merged[i].payload_bytes() == plain[i].payload_bytes());
    CHECK(merged[i].padding == plain[i].padding);
  }
}

TEST_CASE("long back-to-back 65-byte stream: implied speed-up tends to 1") {
  SegmenterFsm fsm(64, 0);
  std::vector<int> lengths(1000, 65);
  const auto cells = run_merge(fsm, lengths, /*flush=*/true);
  const auto s = overhead_stats(cells);
  CHECK(s.implied_speedup < 1.01);
  CHECK(s.payload_bytes == 65000);
}
