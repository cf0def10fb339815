// Sweep runner and trace verifier for the sensor-network simulator.
//
//   wsnr_sim --preset fig-1x --seeds 20 --out results/
//   wsnr_sim --config run.json --emit both
//   wsnr_sim --verify-only results/traces
//
// Exit status: 0 success, 1 configuration error, 2 verifier failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "wsnr/sweep.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kVerifierFailure = 2;

int verify_only(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    std::cerr << "error: no such file or directory: " << path << '\n';
    return kConfigError;
  }
  const auto rows = wsnr::verify(wsnr::trace_files(path));
  std::size_t failed = 0;
  for (const auto& r : rows) {
    if (r.ok()) {
      std::cout << "PASS " << r.file << '\n';
      continue;
    }
    ++failed;
    std::cout << "FAIL " << r.file << ": " << (r.parsed ? wsnr::violations(r.summary) : "parse error: " + r.error)
              << '\n';
  }
  std::cout << rows.size() << " traces, " << failed << " failed\n";
  return failed == 0 ? kOk : kVerifierFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sensor-network fault-tolerance simulator"};

  std::optional<std::string> config_path;
  std::optional<std::string> preset;
  std::optional<std::string> out_dir;
  std::optional<std::uint32_t> seeds;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  std::string emit = "csv";
  std::optional<std::string> verify_path;

  app.add_option("--config", config_path, "JSON config (SimConfig fields, optional \"sweep\" object)");
  app.add_option("--preset", preset, "Built-in sweep")->check(CLI::IsMember({"fig-1x", "fig-4x"}));
  app.add_option("--out", out_dir, "Output directory (default: $WSNR_OUT_DIR or ./out)");
  app.add_option("--seeds", seeds, "Repeats per grid point")->check(CLI::PositiveNumber);
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--emit", emit, "csv: results.csv; jsonl: per-run traces; both")
      ->check(CLI::IsMember({"csv", "jsonl", "both"}));
  app.add_option("--verify-only", verify_path, "Verify a trace file or a directory of traces");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  if (verify_path) return verify_only(*verify_path);

  try {
    std::optional<nlohmann::json> file;
    if (config_path) file = wsnr::read_json_file(*config_path);
    wsnr::SweepSpec spec = wsnr::make_spec(preset, file);
    if (seeds) spec.repeats = *seeds;

    wsnr::SweepOptions opt;
    if (out_dir) {
      opt.out_dir = *out_dir;
    } else if (const char* env = std::getenv("WSNR_OUT_DIR"); env && *env) {
      opt.out_dir = env;
    } else {
      opt.out_dir = "out";
    }
    opt.emit = wsnr::emit_from_string(emit);
    opt.jobs = jobs;

    const wsnr::SweepReport report = wsnr::run_sweep(spec, opt);
    for (const auto& r : report.results) {
      if (!r.summary.verifiers_ok()) {
        std::cout << "run " << r.row.run_id << " (seed " << r.row.seed << "): " << wsnr::violations(r.summary)
                  << '\n';
      }
    }
    const std::size_t failed = report.verifier_failures();
    std::cout << report.results.size() << " runs written to " << opt.out_dir->string() << ", " << failed
              << " with verifier violations\n";
    return failed == 0 ? kOk : kVerifierFailure;
  } catch (const wsnr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
}
