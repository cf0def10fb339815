#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "wsnr/config.hpp"
#include "wsnr/engine.hpp"
#include "wsnr/metrics.hpp"
#include "wsnr/trace.hpp"

namespace wsnr {

struct SweepSpec {
  SimConfig base;
  std::vector<std::uint32_t> n_sensors;
  std::vector<double> p_fail;
  std::vector<std::uint32_t> wake_multiplier;
  std::vector<RecoveryMode> recovery_mode;
  std::uint32_t repeats = 1;
  std::uint64_t seed_base = 0;

  std::size_t total_runs() const noexcept {
    return n_sensors.size() * p_fail.size() * wake_multiplier.size() * recovery_mode.size() * repeats;
  }
};

// A spec whose grid is the single point described by `base`.
inline SweepSpec single_point(const SimConfig& base) {
  return {base, {base.n_sensors}, {base.p_fail}, {base.wake_multiplier}, {base.recovery_mode}, 1, base.seed};
}

/// Run configurations in run-index order: n_sensors outermost, then
/// p_fail, wake_multiplier, recovery_mode, repeat.
inline std::vector<SimConfig> expand(const SweepSpec& spec) {
  if (spec.total_runs() == 0) throw ConfigError("sweep grid is empty");
  std::vector<SimConfig> runs;
  runs.reserve(spec.total_runs());
  for (std::uint32_t n : spec.n_sensors) {
    for (double p : spec.p_fail) {
      for (std::uint32_t w : spec.wake_multiplier) {
        for (RecoveryMode mode : spec.recovery_mode) {
          for (std::uint32_t rep = 0; rep < spec.repeats; ++rep) {
            SimConfig c = spec.base;
            c.n_sensors = n;
            c.p_fail = p;
            c.wake_multiplier = w;
            c.recovery_mode = mode;
            c.seed = spec.seed_base + runs.size();
            validate(c);
            runs.push_back(std::move(c));
          }
        }
      }
    }
  }
  return runs;
}

inline SweepSpec preset(const std::string& name) {
  SweepSpec s;
  s.n_sensors = {200, 400, 600, 800, 1000, 1200, 1400, 1600};
  if (name == "fig-1x") {
    s.p_fail = {0.0, 0.02, 0.04, 0.06, 0.08};
    s.wake_multiplier = {1};
    s.recovery_mode = {RecoveryMode::MultiRegister};
  } else if (name == "fig-4x") {
    s.p_fail = {0.0, 0.08};
    s.wake_multiplier = {4};
    s.recovery_mode = {RecoveryMode::MultiRegister, RecoveryMode::XorParity};
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return s;
}

/// Config files hold SimConfig fields at top level plus an optional
/// "sweep" object with the grid axes, repeats and seed_base.
inline SweepSpec sweep_from_json(const nlohmann::json& j, SweepSpec spec) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  nlohmann::json fields = j;
  fields.erase("sweep");
  spec.base = apply_json(spec.base, fields);
  if (!j.contains("sweep")) return spec;
  const nlohmann::json& sw = j.at("sweep");
  if (!sw.is_object()) throw ConfigError("sweep must be a JSON object");
  try {
    for (const auto& [key, v] : sw.items()) {
      if (key == "n_sensors") spec.n_sensors = v.get<std::vector<std::uint32_t>>();
      else if (key == "p_fail") spec.p_fail = v.get<std::vector<double>>();
      else if (key == "wake_multiplier") spec.wake_multiplier = v.get<std::vector<std::uint32_t>>();
      else if (key == "recovery_mode") {
        spec.recovery_mode.clear();
        for (const auto& m : v) spec.recovery_mode.push_back(recovery_mode_from_string(m.get<std::string>()));
      } else if (key == "repeats") spec.repeats = v.get<std::uint32_t>();
      else if (key == "seed_base") spec.seed_base = v.get<std::uint64_t>();
      else throw ConfigError("unknown sweep field '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad sweep value: ") + e.what());
  }
  return spec;
}

/// Builds the spec from an optional preset overlaid by an optional config
/// document. Without a preset, axes the document does not set collapse to
/// the base config's value and seeds start at its seed.
inline SweepSpec make_spec(const std::optional<std::string>& preset_name,
                           const std::optional<nlohmann::json>& file) {
  SweepSpec s = preset_name ? preset(*preset_name) : SweepSpec{};
  if (file) s = sweep_from_json(*file, std::move(s));
  if (preset_name) return s;
  const nlohmann::json none = nlohmann::json::object();
  const nlohmann::json& sw = file && file->contains("sweep") ? file->at("sweep") : none;
  if (!sw.contains("n_sensors")) s.n_sensors = {s.base.n_sensors};
  if (!sw.contains("p_fail")) s.p_fail = {s.base.p_fail};
  if (!sw.contains("wake_multiplier")) s.wake_multiplier = {s.base.wake_multiplier};
  if (!sw.contains("recovery_mode")) s.recovery_mode = {s.base.recovery_mode};
  if (!sw.contains("seed_base")) s.seed_base = s.base.seed;
  return s;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline SweepSpec load_sweep(const std::filesystem::path& path, SweepSpec spec) {
  return sweep_from_json(read_json_file(path), std::move(spec));
}

struct RunRow {
  std::size_t run_id = 0;
  std::uint64_t seed = 0;
  std::uint32_t n_sensors = 0;
  double p_fail = 0.0;
  std::uint32_t wake_multiplier = 1;
  RecoveryMode recovery_mode = RecoveryMode::MultiRegister;
  double lifetime = 0.0;
  double coverage_rate = 0.0;
  double recovery_failure_rate = 0.0;
  std::uint64_t msgs_probe = 0;
  std::uint64_t msgs_reply = 0;
  std::uint64_t msgs_replica = 0;
  std::uint64_t msgs_fresh = 0;
  std::uint64_t wakeups_total = 0;
  std::size_t moves_max_segment = 0;
  bool bound_ok = true;
};

struct RunResult {
  RunRow row;
  RunSummary summary;
  std::uint64_t digest = 0;
};

inline constexpr const char* kCsvHeader =
    "run_id,seed,n_sensors,p_fail,wake_multiplier,recovery_mode,lifetime,coverage_rate,"
    "recovery_failure_rate,msgs_probe,msgs_reply,msgs_replica,msgs_fresh,wakeups_total,"
    "moves_max_segment,bound_ok";

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string csv_row(const RunRow& r) {
  std::ostringstream os;
  os << r.run_id << ',' << r.seed << ',' << r.n_sensors << ',' << format_double(r.p_fail) << ','
     << r.wake_multiplier << ',' << (r.recovery_mode == RecoveryMode::MultiRegister ? "SUM" : "XOR") << ','
     << format_double(r.lifetime) << ',' << format_double(r.coverage_rate) << ','
     << format_double(r.recovery_failure_rate) << ',' << r.msgs_probe << ',' << r.msgs_reply << ','
     << r.msgs_replica << ',' << r.msgs_fresh << ',' << r.wakeups_total << ',' << r.moves_max_segment << ','
     << (r.bound_ok ? "true" : "false");
  return os.str();
}

inline RunRow make_row(std::size_t run_id, const SimConfig& c, const RunSummary& s) {
  auto msg = [&](MsgKind k) { return s.messages[static_cast<std::size_t>(k)]; };
  RunRow r;
  r.run_id = run_id;
  r.seed = c.seed;
  r.n_sensors = c.n_sensors;
  r.p_fail = c.p_fail;
  r.wake_multiplier = c.wake_multiplier;
  r.recovery_mode = c.recovery_mode;
  r.lifetime = s.lifetime;
  r.coverage_rate = s.coverage_rate;
  r.recovery_failure_rate = s.recovery_failure_rate;
  r.msgs_probe = msg(MsgKind::ProbeRequest);
  r.msgs_reply = msg(MsgKind::ProbeReply);
  r.msgs_replica = msg(MsgKind::Replica);
  r.msgs_fresh = msg(MsgKind::FreshDataRequest) + msg(MsgKind::FreshDataReply);
  r.wakeups_total = s.wakeups_total;
  r.moves_max_segment = s.moves_max_segment;
  r.bound_ok = s.bound_ok;
  return r;
}

inline std::string violations(const RunSummary& s) {
  std::string out;
  auto add = [&](bool bad, const char* what) {
    if (!bad) return;
    if (!out.empty()) out += ' ';
    out += what;
  };
  add(!s.convergence_ok, "convergence");
  add(!s.bound_ok, "message-bound");
  add(!s.sigma.ok(), "sigma");
  add(!s.audits.ok(), "node audits");
  add(!s.energy.ok(), "energy");
  return out;
}

enum class Emit : std::uint8_t { Csv, Jsonl, Both };

inline Emit emit_from_string(const std::string& s) {
  if (s == "csv") return Emit::Csv;
  if (s == "jsonl") return Emit::Jsonl;
  if (s == "both") return Emit::Both;
  throw ConfigError("unknown emit format '" + s + "'");
}

struct SweepOptions {
  std::optional<std::filesystem::path> out_dir;  // nothing written when empty
  Emit emit = Emit::Csv;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
};

struct SweepReport {
  std::vector<RunResult> results;  // run-index order

  std::size_t verifier_failures() const {
    return static_cast<std::size_t>(std::count_if(results.begin(), results.end(),
                                                  [](const RunResult& r) { return !r.summary.verifiers_ok(); }));
  }
};

inline std::filesystem::path trace_path(const std::filesystem::path& out_dir, std::size_t run_id) {
  char name[32];
  std::snprintf(name, sizeof name, "run_%06zu.jsonl", run_id);
  return out_dir / "traces" / name;
}

/// Runs every grid point on a pool of `jobs` workers. Traces are written
/// by the worker that produced them; CSV rows are appended in run-index
/// order as soon as the prefix before them is complete.
inline SweepReport run_sweep(const SweepSpec& spec, const SweepOptions& opt = {}) {
  const std::vector<SimConfig> runs = expand(spec);
  const bool csv = opt.emit != Emit::Jsonl;
  const bool jsonl = opt.emit != Emit::Csv;

  std::ofstream csv_out;
  if (opt.out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*opt.out_dir, ec);
    if (jsonl) std::filesystem::create_directories(*opt.out_dir / "traces", ec);
    if (ec) throw ConfigError("cannot create output directory '" + opt.out_dir->string() + "'");
    if (csv) {
      csv_out.open(*opt.out_dir / "results.csv", std::ios::trunc);
      if (!csv_out) throw ConfigError("cannot write to '" + opt.out_dir->string() + "'");
      csv_out << kCsvHeader << '\n';
    }
  }

  std::vector<std::optional<RunResult>> slots(runs.size());
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;

  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      try {
        Trace t = run(runs[i]);
        RunResult res;
        res.summary = summarize(t);
        res.row = make_row(i, runs[i], res.summary);
        res.digest = trace_digest(t);
        if (opt.out_dir && jsonl) {
          std::ofstream tf(trace_path(*opt.out_dir, i), std::ios::trunc);
          if (!tf) throw ConfigError("cannot write trace for run " + std::to_string(i));
          write_jsonl(tf, t);
        }
        std::lock_guard lock(mu);
        slots[i] = std::move(res);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        next = runs.size();
      }
      cv.notify_one();
    }
  };

  const std::size_t pool = std::clamp<std::size_t>(opt.jobs, 1, runs.size());
  std::vector<std::jthread> threads;
  threads.reserve(pool);
  for (std::size_t w = 0; w < pool; ++w) threads.emplace_back(worker);

  SweepReport report;
  report.results.reserve(runs.size());
  {
    std::unique_lock lock(mu);
    for (std::size_t i = 0; i < runs.size(); ++i) {
      cv.wait(lock, [&] { return slots[i].has_value() || error; });
      if (error) break;
      if (csv_out.is_open()) csv_out << csv_row(slots[i]->row) << '\n';
      report.results.push_back(std::move(*slots[i]));
      slots[i].reset();
    }
  }
  threads.clear();
  if (error) std::rethrow_exception(error);
  return report;
}

struct VerifyRow {
  std::string file;
  bool parsed = false;
  std::string error;
  RunSummary summary;

  bool ok() const noexcept { return parsed && summary.verifiers_ok(); }
};

/// Re-runs the verifiers on exported traces; a file that fails to parse
/// is reported and the rest are still checked.
inline std::vector<VerifyRow> verify(const std::vector<std::filesystem::path>& files) {
  std::vector<VerifyRow> rows;
  rows.reserve(files.size());
  for (const auto& f : files) {
    VerifyRow row;
    row.file = f.string();
    try {
      std::ifstream in(f);
      if (!in) throw TraceParseError("cannot open file");
      row.summary = summarize(read_jsonl(in));
      row.parsed = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// A single trace file, or every *.jsonl directly inside a directory.
inline std::vector<std::filesystem::path> trace_files(const std::filesystem::path& p) {
  std::vector<std::filesystem::path> out;
  if (std::filesystem::is_directory(p)) {
    for (const auto& e : std::filesystem::directory_iterator(p)) {
      if (e.is_regular_file() && e.path().extension() == ".jsonl") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
  } else {
    out.push_back(p);
  }
  return out;
}

}  // namespace wsnr
