#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "chimera/mock_device.hpp"
#include "chimera/orchestrator.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace chimera;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("chimera-orch-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

MockConfig mock_config(double time_scale) {
  MockConfig cfg;
  cfg.time_scale = time_scale;
  cfg.restart_s = 2.0;
  return cfg;
}

GhostClient client_for(const MockServer& server) {
  DeviceEndpoint ep;
  ep.base_url = server.base_url();
  ep.timeout_s = 2.0;
  return GhostClient(ep);
}

SweepPlan short_plan(std::vector<int> mvs, double dwell) {
  SweepPlan p;
  p.axis = SweepAxis::Voltage;
  p.dwell_s = dwell;
  for (int mv : mvs) p.points.push_back({400, mv});
  return p;
}

std::vector<nlohmann::json> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<nlohmann::json> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

std::size_t count_kind(const std::vector<nlohmann::json>& lines, const std::string& kind) {
  std::size_t n = 0;
  for (const auto& j : lines) n += j.at("kind") == kind;
  return n;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

SweepRecord synthetic_record(std::size_t index, int mv, std::uint64_t seed) {
  PointCapture cap;
  cap.index = index;
  cap.op = {400, mv};
  cap.window_start = 0.0;
  cap.window_end = 60.0;
  Rng rng(seed);
  std::exponential_distribution<double> gap(50.0);
  for (double t = gap(rng); t <= 60.0; t += gap(rng)) {
    ShareEvent ev;
    ev.t = t;
    ev.source = "x";
    cap.events.push_back(ev);
  }
  for (int k = 0; k < 20; ++k) {
    Telemetry tel;
    tel.t = 3.0 * k;
    tel.core_mv_actual = mv;
    tel.temp_c = 50.0 + 0.1 * k;
    tel.power_w = 10.0;
    tel.hashrate_ghs = 480.0;
    tel.frequency_mhz = 400;
    tel.device_uptime_s = tel.t;
    cap.telemetry.push_back(tel);
  }
  return compute_record(cap);
}

}  // namespace

TEST_SUITE("orchestrator") {
  TEST_CASE("default plans") {
    const auto v = default_voltage_plan();
    REQUIRE(v.points.size() == 15);
    CHECK(v.points.front() == OperatingPoint{400, 990});
    CHECK(v.points.back() == OperatingPoint{400, 850});
    CHECK(v.direction() == "descending");
    CHECK(v.dwell_s == 60.0);
    CHECK_NOTHROW(v.validate());

    const auto f = default_frequency_plan();
    REQUIRE(f.points.size() == 11);
    CHECK(f.points.front() == OperatingPoint{300, 900});
    CHECK(f.points.back() == OperatingPoint{500, 900});
    CHECK(f.direction() == "ascending");
    CHECK(f.dwell_s == 40.0);

    auto mixed = short_plan({900, 880, 890}, 10);
    CHECK(mixed.direction() == "mixed");
    CHECK(SweepPlan::from_json(v.to_json()).to_json() == v.to_json());
    CHECK_THROWS_AS(default_voltage_plan(0), InvalidArgument);
  }

  TEST_CASE("invalid plans are refused before any request") {
    TempDir dir;
    DeviceEndpoint ep;
    ep.base_url = "http://127.0.0.1:1";
    GhostClient client(ep);
    auto plan = short_plan({900, 840, 880}, 10);
    try {
      run_sweep(plan, client, dir.path / "log.jsonl");
      FAIL("expected InvalidPlan");
    } catch (const InvalidPlan& e) {
      CHECK(std::string(e.what()).find("point 1") != std::string::npos);
    }
    CHECK(!fs::exists(dir.path / "log.jsonl"));
    plan.points.clear();
    CHECK_THROWS_AS(run_sweep(plan, client, dir.path / "log.jsonl"), InvalidPlan);
    plan = short_plan({900}, 0.0);
    CHECK_THROWS_AS(run_sweep(plan, client, dir.path / "log.jsonl"), InvalidPlan);
  }

  TEST_CASE("short sweep logs and replays identically") {
    TempDir dir;
    MockServer server(mock_config(100.0));
    auto client = client_for(server);
    const auto plan = short_plan({900, 880, 860}, 30.0);
    const auto log = dir.path / "sweep.jsonl";
    std::size_t callbacks = 0;
    SweepOptions opts;
    opts.on_record = [&](const SweepRecord&) { ++callbacks; };
    const auto records = run_sweep(plan, client, log, opts);
    REQUIRE(records.size() == 3);
    CHECK(callbacks == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(records[i].index == i);
      CHECK(records[i].op == plan.points[i]);
      CHECK(records[i].window_s == 30.0);
      CHECK(records[i].event_count > 500);
      CHECK(!records[i].low_confidence);
      REQUIRE(records[i].timing);
      CHECK(records[i].telemetry.samples >= 2);
    }
    CHECK(records[2].regime == Regime::ResonantCandidate);

    const auto lines = read_lines(log);
    for (const auto& j : lines) CHECK(j.at("schema_version") == kLogSchemaVersion);
    CHECK(lines.front().at("kind") == "sweep_begin");
    CHECK(lines.back().at("kind") == "sweep_end");
    CHECK(count_kind(lines, "record") == 3);
    CHECK(count_kind(lines, "share") == records[0].event_count + records[1].event_count + records[2].event_count);

    // every logged share lies inside its window
    double lo = 0, hi = 0;
    for (const auto& j : lines) {
      if (j.at("kind") == "window") {
        lo = j.at("t_start");
        hi = j.at("t_end");
      } else if (j.at("kind") == "share") {
        CHECK(j.at("t").get<double>() > lo);
        CHECK(j.at("t").get<double>() <= hi);
      }
    }

    const auto replay = replay_log(log);
    CHECK(replay.identical());
    CHECK(replay.incomplete_attempts == 0);
    REQUIRE(replay.recomputed.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(replay.recomputed[i].to_json().dump() == records[i].to_json().dump());
    }

    // a second run onto the same log must not silently append
    CHECK_THROWS_AS(run_sweep(plan, client, log), InvalidArgument);
    SweepOptions other;
    other.resume = true;
    CHECK_THROWS_AS(run_sweep(short_plan({900, 870}, 20.0), client, log, other), InvalidPlan);
  }

  TEST_CASE("tampered logs are caught by replay") {
    TempDir dir;
    MockServer server(mock_config(100.0));
    auto client = client_for(server);
    const auto log = dir.path / "sweep.jsonl";
    run_sweep(short_plan({900}, 10.0), client, log);
    std::vector<std::string> raw;
    {
      std::ifstream in(log);
      for (std::string line; std::getline(in, line);) raw.push_back(line);
    }
    bool dropped = false;
    {
      std::ofstream out(log, std::ios::trunc);
      for (const auto& line : raw) {
        if (!dropped && line.find("\"kind\":\"share\"") != std::string::npos) {
          dropped = true;
          continue;
        }
        out << line << '\n';
      }
    }
    REQUIRE(dropped);
    const auto replay = replay_log(log);
    CHECK(!replay.identical());
    CHECK(replay.mismatched == std::vector<std::size_t>{0});
  }

  TEST_CASE("heartbeat shows up only where the device injects it") {
    TempDir dir;
    MockConfig cfg = mock_config(200.0);
    cfg.heartbeat = Heartbeat{2.4, 0.8};
    cfg.heartbeat_below_mv = 870;
    MockServer server(cfg);
    auto client = client_for(server);
    const auto records = run_sweep(short_plan({920, 880, 860, 850}, 60.0), client, dir.path / "hb.jsonl");
    REQUIRE(records.size() == 4);
    for (const auto& r : records) {
      REQUIRE(r.spectrum);
      const bool injected = r.op.core_mv < 870;
      CHECK(injected == (r.regime == Regime::ResonantCandidate));
      CHECK(r.spectrum->heartbeat.has_value() == injected);
      if (r.spectrum->heartbeat) CHECK(std::abs(r.spectrum->heartbeat->freq_hz - 2.4) <= 0.1);
    }
  }

  TEST_CASE("interrupted sweeps resume without duplicates") {
    TempDir dir;
    const auto log = dir.path / "sweep.jsonl";
    const auto plan = short_plan({900, 890, 880}, 10.0);
    auto first = std::make_unique<MockServer>(mock_config(100.0));
    {
      auto client = client_for(*first);
      SweepOptions opts;
      opts.on_record = [&](const SweepRecord&) { first->stop(); };
      try {
        run_sweep(plan, client, log, opts);
        FAIL("expected SweepInterrupted");
      } catch (const SweepInterrupted& e) {
        CHECK(e.completed() == 1);
      }
    }
    first.reset();
    auto lines = read_lines(log);
    CHECK(count_kind(lines, "record") == 1);
    CHECK(count_kind(lines, "point_interrupted") == 1);

    MockServer second(mock_config(100.0));
    auto client = client_for(second);
    SweepOptions opts;
    opts.resume = true;
    const auto records = run_sweep(plan, client, log, opts);
    REQUIRE(records.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(records[i].index == i);

    lines = read_lines(log);
    CHECK(count_kind(lines, "record") == 3);
    std::set<std::size_t> seen;
    for (const auto& j : lines) {
      if (j.at("kind") == "record") CHECK(seen.insert(j.at("point").get<std::size_t>()).second);
    }
    // the retried point carries attempt 2
    bool retried = false;
    for (const auto& j : lines) {
      if (j.at("kind") == "point_begin" && j.at("point") == 1 && j.at("attempt") == 2) retried = true;
    }
    CHECK(retried);

    const auto replay = replay_log(log);
    CHECK(replay.identical());
    CHECK(replay.incomplete_attempts == 1);
    CHECK(replay.recomputed.size() == 3);
  }

  TEST_CASE("unreachable endpoint interrupts with nothing completed") {
    TempDir dir;
    DeviceEndpoint ep;
    ep.base_url = "http://127.0.0.1:1";
    ep.timeout_s = 0.5;
    GhostClient client(ep);
    try {
      run_sweep(short_plan({900}, 10.0), client, dir.path / "x.jsonl");
      FAIL("expected SweepInterrupted");
    } catch (const SweepInterrupted& e) {
      CHECK(e.completed() == 0);
    }
  }

  TEST_CASE("record thresholds") {
    PointCapture cap;
    cap.op = {400, 900};
    cap.window_end = 10.0;
    for (int i = 1; i <= 999; ++i) {
      ShareEvent ev;
      ev.t = i * 0.01;
      cap.events.push_back(ev);
    }
    auto r = compute_record(cap);
    CHECK(r.low_confidence);
    REQUIRE(r.timing);
    CHECK(r.timing->cv == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(!r.spectrum);  // 100 bins is too short for the spectral estimate
    ShareEvent extra;
    extra.t = 9.995;
    cap.events.push_back(extra);
    CHECK(!compute_record(cap).low_confidence);
    cap.events.clear();
    r = compute_record(cap);
    CHECK(r.low_confidence);
    CHECK(!r.timing);
    CHECK(SweepRecord::from_json(r.to_json()).to_json() == r.to_json());
  }

  TEST_CASE("report export") {
    std::vector<SweepRecord> records;
    const auto plan = default_voltage_plan();
    for (std::size_t i = 0; i < plan.points.size(); ++i) {
      records.push_back(synthetic_record(i, plan.points[i].core_mv, 100 + i));
    }
    const auto a = export_report(records);
    const auto b = export_report(records);
    CHECK(a.csv == b.csv);
    CHECK(a.table == b.table);

    const auto rows = split(a.csv, '\n');
    REQUIRE(rows.size() == 17);  // header, 15 rows, trailing empty
    CHECK(rows.back().empty());
    const auto header = split(rows[0], ',');
    CHECK(header.size() == 15);
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto cells = split(rows[i + 1], ',');
      REQUIRE(cells.size() == header.size());
      CHECK(std::stoul(cells[0]) == i);
      CHECK(std::stoi(cells[2]) == records[i].op.core_mv);
      CHECK(cells[3] == regime_name(records[i].regime));
      CHECK(std::stoul(cells[4]) == records[i].event_count);
      CHECK(std::abs(std::stod(cells[5]) - records[i].timing->cv) <= 1e-9 * records[i].timing->cv);
      CHECK(std::abs(std::stod(cells[6]) - records[i].timing->paper_entropy) <=
            1e-9 * std::abs(records[i].timing->paper_entropy));
      CHECK(std::abs(std::stod(cells[10]) - records[i].telemetry.temp_mean_c) <= 1e-9 * 60);
    }
    CHECK(split(a.table, '\n').size() == 17);
    CHECK_THROWS_AS(export_report(std::span<const SweepRecord>{}), InvalidArgument);
  }
}
