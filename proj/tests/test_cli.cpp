#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <string>
#include <vector>

#include "cellq/cli.hpp"
#include "cellq/traffic.hpp"

using namespace cellq;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::vector<std::string> fields_of(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string f;
  while (std::getline(in, f, ',')) out.push_back(f);
  return out;
}

// Data rows only: comment and header lines stripped.
std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  bool seen_header = false;
  for (const auto& line : lines_of(text)) {
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header) {
      seen_header = true;  // column header
      continue;
    }
    rows.push_back(fields_of(line));
  }
  return rows;
}

std::string run_to_string(const std::vector<std::string>& args) {
  std::ostringstream out;
  execute(parse_invocation(args), out);
  return out.str();
}

}  // namespace

TEST_CASE("parse_invocation") {
  SECTION("commands map correctly") {
    CHECK(parse_invocation({"analyze"}).command == Command::Analyze);
    CHECK(parse_invocation({"quantize"}).command == Command::Quantize);
    CHECK(parse_invocation({"simulate"}).command == Command::Simulate);
    CHECK(parse_invocation({"sweep"}).command == Command::Sweep);
    CHECK(parse_invocation({"min-speedup"}).command == Command::MinSpeedup);
    CHECK(parse_invocation({"gen-traffic"}).command == Command::GenTraffic);
  }
  SECTION("options") {
    const auto plan = parse_invocation(
        {"simulate", "run.cfg", "--set", "speedup=1.1", "--seed", "7", "-o",
         "out.csv", "--set", "merge = on"});
    CHECK(plan.config_path == "run.cfg");
    CHECK(plan.output_path == "out.csv");
    REQUIRE(plan.seed);
    CHECK(*plan.seed == 7);
    REQUIRE(plan.overrides.size() == 2);
    CHECK(plan.overrides[0] == std::pair<std::string, std::string>{"speedup", "1.1"});
    CHECK(plan.overrides[1] == std::pair<std::string, std::string>{"merge", "on"});
  }
  SECTION("errors") {
    CHECK_THROWS_AS(parse_invocation({}), usage_error);
    CHECK_THROWS_AS(parse_invocation({"bogus"}), usage_error);
    CHECK_THROWS_AS(parse_invocation({"analyze", "--set"}), usage_error);
    CHECK_THROWS_AS(parse_invocation({"analyze", "--set", "noequals"}),
                    usage_error);
    CHECK_THROWS_AS(parse_invocation({"analyze", "--seed", "abc"}), usage_error);
    CHECK_THROWS_AS(parse_invocation({"analyze", "--frob"}), usage_error);
    CHECK_THROWS_AS(parse_invocation({"analyze", "a.cfg", "b.cfg"}), usage_error);
  }
}

TEST_CASE("config parsing") {
  SECTION("key = value with comments and blanks") {
    std::istringstream in(
        "# a switch\n"
        "ports = 8\n"
        "speedup=1.25   # inline comment\n"
        "\n"
        "merge = true\n"
        "rho_list = 0.5, 0.7, 0.9\n");
    const auto cfg = Config::parse(in);
    CHECK(cfg.get_int("ports", 16) == 8);
    CHECK(cfg.get_double("speedup", 1.0) == Catch::Approx(1.25));
    CHECK(cfg.get_bool("merge", false));
    const auto list = cfg.get_list("rho_list", {});
    REQUIRE(list.size() == 3);
    CHECK(list[1] == Catch::Approx(0.7));
  }
  SECTION("unknown keys and malformed values are rejected") {
    Config cfg;
    CHECK_THROWS_AS(cfg.set("portz", "8"), usage_error);
    cfg.set("ports", "eight");
    CHECK_THROWS_AS(cfg.get_int("ports", 16), usage_error);
    cfg.set("merge", "maybe");
    CHECK_THROWS_AS(cfg.get_bool("merge", false), usage_error);
    std::istringstream in("ports 8\n");
    CHECK_THROWS_AS(Config::parse(in), usage_error);
  }
}

TEST_CASE("analyze reports the closed-form speed-ups") {
  const auto text = run_to_string({"analyze", "--set", "rho_list=0.5,0.9"});
  const auto rows = csv_rows(text);
  REQUIRE(rows.size() == 6);  // 3 lengths x 2 loads
  double sig100 = 0.0, sig500 = 0.0, sig1000 = 0.0;
  for (const auto& row : rows) {
    REQUIRE(row.size() == 8);
    const double l = std::stod(row[0]);
    const double sigma = std::stod(row[6]);
    if (l == 100.0) sig100 = sigma;
    if (l == 500.0) sig500 = sigma;
    if (l == 1000.0) sig1000 = sigma;
  }
  CHECK(sig100 == Catch::Approx(1.354).margin(0.001));
  CHECK(sig500 == Catch::Approx(1.065).margin(0.001));
  CHECK(sig1000 == Catch::Approx(1.032).margin(0.001));
  // L = 100 at rho 0.9 exceeds capacity once quantized.
  bool found_unstable = false;
  for (const auto& row : rows)
    if (std::stod(row[0]) == 100.0 && std::stod(row[1]) == 0.9) {
      CHECK(row[5] == "inf");
      CHECK(row[7] == "0");
      found_unstable = true;
    }
  CHECK(found_unstable);
}

TEST_CASE("quantize fits the measured packet-length statistics") {
  const auto text = run_to_string(
      {"quantize", "--set", "dist=gamma", "--set", "gamma_m=1.74", "--set",
       "gamma_s=0.89"});
  double alpha = 0.0, beta = 0.0, mean = 0.0, variance = 0.0;
  for (const auto& line : lines_of(text)) {
    std::size_t pos;
    if ((pos = line.find("gamma alpha = ")) != std::string::npos) {
      alpha = std::stod(line.substr(pos + 14));
      beta = std::stod(line.substr(line.find("beta = ") + 7));
    }
    if ((pos = line.find("moments mean = ")) != std::string::npos) {
      mean = std::stod(line.substr(pos + 15));
      variance = std::stod(line.substr(line.find("variance = ") + 11));
    }
  }
  CHECK(alpha == Catch::Approx(3.822).margin(0.005));
  CHECK(beta == Catch::Approx(0.4553).margin(0.005));
  CHECK(mean == Catch::Approx(2.24).margin(0.02));
  CHECK(variance == Catch::Approx(0.90).margin(0.02));
  // The pmf itself is a valid distribution over k >= 1.
  const auto rows = csv_rows(text);
  REQUIRE(rows.size() >= 5);
  double total = 0.0;
  for (const auto& row : rows) {
    REQUIRE(row.size() == 2);
    const double p = std::stod(row[1]);
    CHECK(p >= 0.0);
    total += p;
  }
  CHECK(total == Catch::Approx(1.0).margin(1e-6));
  CHECK(rows.front()[0] == "1");
}

TEST_CASE("gen-traffic output round-trips through the trace parser") {
  const auto text = run_to_string(
      {"gen-traffic", "--set", "traffic.packets_per_port=500", "--seed", "11"});
  std::istringstream in(text);
  const auto packets = parse_trace(in, 16);
  REQUIRE(packets.size() == 500);
  for (std::size_t i = 1; i < packets.size(); ++i)
    CHECK(packets[i].arrival_time >= packets[i - 1].arrival_time);
  for (const Packet& p : packets) {
    CHECK(p.length >= 64);
    CHECK(p.length <= 1518);
    CHECK(p.dest >= 0);
    CHECK(p.dest < 16);
  }
}

TEST_CASE("simulate emits one summary row and is reproducible") {
  const std::vector<std::string> args = {
      "simulate",
      "--set", "ports=4",
      "--set", "traffic.packets_per_port=2000",
      "--set", "traffic.utilization=0.7",
      "--seed", "3"};
  const auto a = run_to_string(args);
  const auto b = run_to_string(args);
  CHECK(a == b);
  const auto rows = csv_rows(a);
  REQUIRE(rows.size() == 1);
  REQUIRE(rows[0].size() == 6);
  CHECK(std::stod(rows[0][0]) == Catch::Approx(0.7));
  CHECK(std::stod(rows[0][1]) == Catch::Approx(1.0));
  CHECK(rows[0][4] == "0");                    // stable at this load
  CHECK(std::stod(rows[0][5]) >= 1.0);         // padding never helps
  // The configuration is echoed as comments for provenance.
  CHECK(a.find("# ports = 4") != std::string::npos);
  CHECK(a.find("# seed = 3") != std::string::npos);
}

TEST_CASE("sweep emits the full grid") {
  const auto text = run_to_string(
      {"sweep",
       "--set", "ports=4",
       "--set", "traffic.packets_per_port=800",
       "--set", "utilization_list=0.5,0.8",
       "--set", "speedup_list=1.0,1.2"});
  const auto rows = csv_rows(text);
  REQUIRE(rows.size() == 4);
  CHECK(std::stod(rows[0][0]) == Catch::Approx(0.5));
  CHECK(std::stod(rows[0][1]) == Catch::Approx(1.0));
  CHECK(std::stod(rows[3][0]) == Catch::Approx(0.8));
  CHECK(std::stod(rows[3][1]) == Catch::Approx(1.2));
}

TEST_CASE("min-speedup finds the worst-case bound from the CLI") {
  const auto text = run_to_string(
      {"min-speedup",
       "--set", "ports=2",
       "--set", "traffic.arrival=cbr",
       "--set", "traffic.mean_interarrival_us=65",
       "--set", "traffic.length=fixed",
       "--set", "traffic.fixed_bytes=65",
       "--set", "traffic.dest=0",
       "--set", "traffic.active_inputs=1",
       "--set", "traffic.utilization=1.0",
       "--set", "traffic.packets_per_port=60000",
       "--set", "min_speedup_step=0.05",
       "--set", "warmup_fraction=0"});
  const auto rows = csv_rows(text);
  REQUIRE(rows.size() == 1);
  REQUIRE(rows[0].size() == 3);
  CHECK(std::stod(rows[0][2]) == Catch::Approx(2.0).margin(0.051));
}

TEST_CASE("simulate replays a trace file") {
  const std::string path = "cellq_test_trace.csv";
  {
    std::ofstream out(path);
    out << "# generated for the replay test\n";
    for (int i = 0; i < 4000; ++i)
      out << "66.5," << (i % 2 ? 64 : 1518) << ',' << i % 4 << "\n";
  }
  const auto text = run_to_string(
      {"simulate",
       "--set", "ports=4",
       "--set", "traffic.trace=" + path,
       "--set", "traffic.utilization=0.8",
       "--set", "speedup=1.1"});
  std::remove(path.c_str());
  const auto rows = csv_rows(text);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0][4] == "0");  // stable
  // 1518/64 and 64/64 alternating: padding ratio (24*64+64)/(1518+64).
  CHECK(std::stod(rows[0][5]) == Catch::Approx(1600.0 / 1582.0).margin(1e-4));
}

TEST_CASE("run_plan reports errors and exit status") {
  std::ostringstream out, err;
  RunPlan plan = parse_invocation({"simulate", "/nonexistent/run.cfg"});
  CHECK(run_plan(plan, out, err) == 1);
  CHECK(err.str().find("error:") != std::string::npos);

  std::ostringstream out2, err2;
  RunPlan ok = parse_invocation({"analyze", "--set", "rho_list=0.5"});
  CHECK(run_plan(ok, out2, err2) == 0);
  CHECK(err2.str().empty());
  CHECK(csv_rows(out2.str()).size() == 3);
}
