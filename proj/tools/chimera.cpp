#include <fmt/format.h>

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "chimera/benchmarks.hpp"
#include "chimera/energetics.hpp"
#include "chimera/ghost.hpp"
#include "chimera/mock_device.hpp"
#include "chimera/orchestrator.hpp"

using namespace chimera;

namespace {

constexpr int kExitInterrupted = 2;
constexpr int kExitReplayMismatch = 3;

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

int cmd_sweep(const std::string& axis, const std::string& endpoint, double time_scale,
              const std::filesystem::path& out_dir, bool resume, std::optional<double> dwell,
              int step_mv, std::uint64_t seed) {
  SweepPlan plan = *parse_axis(axis) == SweepAxis::Voltage ? default_voltage_plan(step_mv)
                                                          : default_frequency_plan();
  plan.time_scale = time_scale;
  plan.seed = seed;
  if (dwell) plan.dwell_s = *dwell;

  DeviceEndpoint ep = DeviceEndpoint::from_env();
  if (!endpoint.empty()) ep.base_url = endpoint;
  GhostClient client(ep);
  try {
    // the mock's own clock decides the pace; the plan value is only recorded
    const auto info = client.system_info();
    if (info.simulated && info.time_scale != time_scale) {
      fmt::print(stderr, "note: endpoint runs at time scale {}, not the requested {}\n", info.time_scale,
                 time_scale);
    }
  } catch (const TransportError&) {
    // run_sweep reports the unreachable endpoint
  }

  std::filesystem::create_directories(out_dir);
  SweepOptions opts;
  opts.resume = resume;
  opts.on_record = [](const SweepRecord& r) {
    fmt::print(stderr, "point {:>2}: {} MHz {} mV {} events={}{}\n", r.index, r.op.frequency_mhz,
               r.op.core_mv, regime_name(r.regime), r.event_count, r.aborted ? " (aborted)" : "");
  };
  std::vector<SweepRecord> records;
  try {
    records = run_sweep(plan, client, out_dir / "sweep.jsonl", opts);
  } catch (const SweepInterrupted& e) {
    fmt::print(stderr, "{}\n{} point(s) complete; rerun with --resume to continue\n", e.what(),
               e.completed());
    return kExitInterrupted;
  }
  const auto report = export_report(records);
  write_file(out_dir / "report.csv", report.csv);
  write_file(out_dir / "report.txt", report.table);
  std::cout << report.table;
  return 0;
}

int cmd_analyze(const std::filesystem::path& log, const std::string& csv_out) {
  const auto replay = replay_log(log);
  if (replay.recomputed.empty()) {
    fmt::print(stderr, "no completed points in {}\n", log.string());
    return 1;
  }
  const auto report = export_report(replay.recomputed);
  std::cout << report.table;
  if (!csv_out.empty()) write_file(csv_out, report.csv);
  fmt::print("replay: {} record(s), {} mismatched, {} incomplete attempt(s)\n", replay.recomputed.size(),
             replay.mismatched.size(), replay.incomplete_attempts);
  return replay.identical() ? 0 : kExitReplayMismatch;
}

int cmd_benchmark(const std::string& task, std::uint64_t seed) {
  BenchmarkReport rep;
  if (task == "narma10") {
    rep = run_narma10_benchmark(seed);
  } else if (task == "mackey-glass") {
    rep = run_mackey_glass_benchmark(seed);
  } else if (task == "esp") {
    rep = run_esp_benchmark(seed);
  } else {
    rep = run_separation_benchmark(seed);
  }
  std::cout << rep.to_json() << '\n';
  return 0;
}

int cmd_serve_mock(const std::string& config_path, int port, const std::string& host) {
  MockConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw Error("cannot read " + config_path);
    cfg = MockConfig::from_json(nlohmann::json::parse(in));
  }
  MockServer server(cfg, host, port);
  fmt::print("mock device listening on {} (time scale {})\n", server.base_url(), cfg.time_scale);
  std::fflush(stdout);
  server.wait();
  return 0;
}

int cmd_efficiency(double n, const std::string& base, double k, double k_prime, double e_switch) {
  EnergeticsParams p;
  p.n = n;
  p.k = k;
  p.k_prime = k_prime;
  p.e_switch = e_switch;
  p.log_base = *parse_log_base(base);
  std::cout << efficiency_report_json(efficiency_report(p)) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"share-timing experiments on mining hardware and its simulator"};
  app.require_subcommand(1);

  auto* sweep = app.add_subcommand("sweep", "run a voltage or frequency sweep against an endpoint");
  std::string axis = "voltage";
  std::string endpoint;
  double time_scale = 1.0;
  std::string out_dir = "sweep-out";
  bool resume = false;
  std::optional<double> dwell;
  int step_mv = 10;
  std::uint64_t sweep_seed = 1;
  sweep->add_option("--axis", axis)->check(CLI::IsMember({"voltage", "frequency"}));
  sweep->add_option("--endpoint", endpoint, "base URL; defaults to CHIMERA_ENDPOINT");
  sweep->add_option("--time-scale", time_scale, "simulation acceleration (simulated endpoints only)")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--out", out_dir);
  sweep->add_flag("--resume", resume, "continue an interrupted sweep in --out");
  sweep->add_option("--dwell", dwell, "seconds per point");
  sweep->add_option("--step-mv", step_mv)->check(CLI::PositiveNumber);
  sweep->add_option("--seed", sweep_seed);

  auto* analyze = app.add_subcommand("analyze", "recompute records from a sweep log");
  std::string log_file;
  std::string csv_out;
  analyze->add_option("--log", log_file)->required()->check(CLI::ExistingFile);
  analyze->add_option("--csv", csv_out, "write the CSV report here");

  auto* bench = app.add_subcommand("benchmark", "reservoir benchmarks on the surrogate");
  std::string task;
  std::uint64_t bench_seed = 1;
  bench->add_option("--task", task)
      ->required()
      ->check(CLI::IsMember({"narma10", "mackey-glass", "esp", "separation"}));
  bench->add_option("--seed", bench_seed);

  auto* serve = app.add_subcommand("serve-mock", "serve a simulated device over HTTP");
  std::string config_path;
  int port = 8080;
  std::string host = "127.0.0.1";
  serve->add_option("--config", config_path)->check(CLI::ExistingFile);
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve->add_option("--host", host);

  auto* eff = app.add_subcommand("efficiency", "energy-ratio report in the log domain");
  double n = 16;
  std::string base = "2";
  double k = 1.0;
  double k_prime = 1.0;
  double e_switch = 1.0;
  eff->add_option("--n", n)->required();
  eff->add_option("--base", base)->check(CLI::IsMember({"2", "e", "10"}));
  eff->add_option("--k", k);
  eff->add_option("--k-prime", k_prime);
  eff->add_option("--e-switch", e_switch);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sweep) {
      return cmd_sweep(axis, endpoint, time_scale, out_dir, resume, dwell, step_mv, sweep_seed);
    }
    if (*analyze) return cmd_analyze(log_file, csv_out);
    if (*bench) return cmd_benchmark(task, bench_seed);
    if (*serve) return cmd_serve_mock(config_path, port, host);
    if (*eff) return cmd_efficiency(n, base, k, k_prime, e_switch);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
