#include "meher/lab/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "meher/errors.hpp"
#include "meher/metrics/metrics.hpp"

namespace meher::lab {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Write-then-rename so a crash never leaves a torn file behind.
void write_file(const fs::path& path, const std::string& body) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << body;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::optional<RunRecord> reusable_record(const fs::path& dir, const std::string& hash) {
  std::ifstream in(dir / kRecordFile);
  if (!in) return std::nullopt;
  try {
    RunRecord r = record_from_json(nlohmann::json::parse(in));
    if (r.config_hash == hash && succeeded(r.status)) return r;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

// Plays one deterministic evaluation episode and returns its trajectory records.
std::vector<nlohmann::json> trajectory(const ppo::PolicyNet& policy, const env::EnvConfig& config,
                                       std::uint64_t seed) {
  env::PredatorPreyEnv environment(config);
  env::Observation obs = environment.reset(seed);
  std::vector<nlohmann::json> out;
  out.push_back(env::trajectory_record(0, environment.state(), env::Action{}, 0.0, false));
  while (!environment.done()) {
    const env::Action a = ppo::deterministic_action(policy, obs);
    const env::StepResult r = environment.step(a);
    obs = r.observation;
    out.push_back(env::trajectory_record(environment.elapsed_steps(), environment.state(), a, r.reward, r.done));
  }
  return out;
}

}  // namespace

std::string_view to_string(CellStatus s) {
  switch (s) {
    case CellStatus::kCompleted: return "completed";
    case CellStatus::kEarlyStopped: return "early-stopped";
    case CellStatus::kFailed: return "failed";
    case CellStatus::kInfeasible: return "infeasible-s-ratio";
  }
  return "failed";
}

CellStatus parse_cell_status(std::string_view tag) {
  for (CellStatus s : {CellStatus::kCompleted, CellStatus::kEarlyStopped, CellStatus::kFailed, CellStatus::kInfeasible}) {
    if (to_string(s) == tag) return s;
  }
  throw ConfigError("unknown cell status '" + std::string(tag) + "'");
}

nlohmann::json to_json(const RunRecord& r) {
  return {{"condition", r.condition},
          {"group", r.group},
          {"spawner", r.spawner},
          {"prey_policy", r.prey_policy},
          {"algorithm", r.algorithm},
          {"s_ratio", r.s_ratio ? nlohmann::json(*r.s_ratio) : nlohmann::json()},
          {"seed", r.seed},
          {"config_hash", r.config_hash},
          {"config", r.config},
          {"status", to_string(r.status)},
          {"error", r.error},
          {"curve_path", r.curve_path},
          {"timing_path", r.timing_path},
          {"events_path", r.events_path},
          {"checkpoint_path", r.checkpoint_path},
          {"steps", r.steps},
          {"iterations", r.iterations},
          {"updates", r.updates},
          {"wallclock",
           {{"env_s", r.wallclock.env_s},
            {"relabel_s", r.wallclock.relabel_s},
            {"annotate_s", r.wallclock.annotate_s},
            {"update_s", r.wallclock.update_s},
            {"eval_s", r.wallclock.eval_s},
            {"total_s", r.wallclock.total_s}}},
          {"max_s_ratio_deviation", r.max_s_ratio_deviation},
          {"s_ratio_within_bound", r.s_ratio_within_bound},
          {"switch_events", r.switch_events}};
}

RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.condition = j.at("condition").get<std::string>();
  r.group = j.at("group").get<std::string>();
  r.spawner = j.at("spawner").get<std::string>();
  r.prey_policy = j.at("prey_policy").get<std::string>();
  r.algorithm = j.at("algorithm").get<std::string>();
  if (!j.at("s_ratio").is_null()) r.s_ratio = j.at("s_ratio").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.config = j.at("config");
  r.status = parse_cell_status(j.at("status").get<std::string>());
  r.error = j.at("error").get<std::string>();
  r.curve_path = j.at("curve_path").get<std::string>();
  r.timing_path = j.at("timing_path").get<std::string>();
  r.events_path = j.at("events_path").get<std::string>();
  r.checkpoint_path = j.at("checkpoint_path").get<std::string>();
  r.steps = j.at("steps").get<std::uint64_t>();
  r.iterations = j.at("iterations").get<std::uint64_t>();
  r.updates = j.at("updates").get<std::uint64_t>();
  const nlohmann::json& w = j.at("wallclock");
  r.wallclock = {w.at("env_s"), w.at("relabel_s"), w.at("annotate_s"), w.at("update_s"), w.at("eval_s"), w.at("total_s")};
  r.max_s_ratio_deviation = j.at("max_s_ratio_deviation").get<double>();
  r.s_ratio_within_bound = j.at("s_ratio_within_bound").get<bool>();
  r.switch_events = j.at("switch_events");
  return r;
}

RunRecord run_cell(const Cell& cell, const fs::path& results_dir) {
  const fs::path rel = cell.relative_dir();
  const fs::path dir = results_dir / rel;
  fs::create_directories(dir);

  RunRecord record;
  record.condition = cell.condition;
  record.group = cell.group;
  record.spawner = env::to_string(cell.trainer.env.spawner);
  record.prey_policy = env::to_string(cell.trainer.env.prey_policy);
  record.algorithm = control::to_string(cell.trainer.mode.kind);
  record.s_ratio = cell.s_ratio();
  record.seed = cell.seed;
  record.config = cell_json(cell);
  record.config_hash = content_hash(record.config);
  record.curve_path = (rel / "curve.csv").generic_string();
  record.timing_path = (rel / "timing.csv").generic_string();
  record.events_path = (rel / "events.jsonl").generic_string();
  record.checkpoint_path = (rel / "checkpoint.json").generic_string();

  if (auto done = reusable_record(dir, record.config_hash)) {
    done->skipped = true;
    return *done;
  }
  fs::remove(dir / kRecordFile);

  const ExperimentConfig& e = cell.experiment;
  const Clock::time_point start = Clock::now();
  std::ofstream events(dir / "events.jsonl", std::ios::trunc);
  if (!events) throw std::runtime_error("cannot write " + (dir / "events.jsonl").string());
  std::ofstream audits;
  if (e.audit_log) audits.open(dir / "audits.jsonl", std::ios::trunc);
  std::ofstream trajectories;
  if (e.record_trajectories) trajectories.open(dir / "trajectories.jsonl", std::ios::trunc);

  try {
    ppo::Trainer trainer(cell.trainer);
    const std::uint64_t eval_seed = ppo::derive_stream(cell.seed, 4)();
    metrics::LearningCurve curve;
    double last_ratio = 0.0;
    int streak = 0;

    auto checkpoint_eval = [&] {
      const Clock::time_point t0 = Clock::now();
      const double rate = trainer.evaluate(e.eval_episodes, eval_seed);
      if (e.record_trajectories) {
        for (nlohmann::json& rec : trajectory(trainer.policy(), cell.trainer.env, eval_seed)) {
          rec["step"] = trainer.step();
          trajectories << rec.dump() << '\n';
        }
      }
      record.wallclock.eval_s += seconds_since(t0);
      curve.points.push_back({trainer.step(), rate, trainer.tracker().rate(),
                              seconds_since(start) - record.wallclock.eval_s, trainer.controller().effective_mode(),
                              last_ratio});
      std::ostringstream c;
      metrics::write_curve_csv(c, curve);
      write_file(dir / "curve.csv", c.str());
      std::ostringstream t;
      metrics::write_timing_csv(t, curve);
      write_file(dir / "timing.csv", t.str());
      streak = e.early_stop_threshold && rate >= *e.early_stop_threshold ? streak + 1 : 0;
    };

    record.status = CellStatus::kCompleted;
    checkpoint_eval();
    std::uint64_t next_eval = e.eval_interval;
    while (trainer.step() < e.total_steps) {
      ppo::IterationStats s = trainer.train_iteration();
      record.wallclock.env_s += s.env_seconds;
      record.wallclock.relabel_s += s.relabel_seconds;
      record.wallclock.annotate_s += s.annotate_seconds;
      record.wallclock.update_s += s.update_seconds;
      record.updates += s.updated;
      nlohmann::json line = ppo::to_json(s);
      line["event"] = "iteration";
      events << line.dump() << '\n';
      if (s.switch_event) {
        nlohmann::json ev = control::to_json(*s.switch_event);
        events << ev.dump() << '\n';
        record.switch_events.push_back(ev);
      }
      if (e.audit_log) {
        for (const her::RelabelAudit& a : s.audits) audits << her::to_json(a).dump() << '\n';
      }
      events.flush();
      if (s.updated) last_ratio = s.achieved_s_ratio;

      bool stop = false;
      if (cell.trainer.mode.is_meher() && s.buffer_size > 0) {
        if (s.infeasible) {
          record.status = CellStatus::kInfeasible;
          record.error = "S-ratio " + std::to_string(cell.trainer.mode.s_ratio) + " unreachable at step " +
                         std::to_string(s.step);
          stop = true;
        } else {
          const double dev = std::abs(s.achieved_s_ratio - cell.trainer.mode.s_ratio);
          record.max_s_ratio_deviation = std::max(record.max_s_ratio_deviation, dev);
          if (dev > 1.0 / static_cast<double>(s.buffer_size)) record.s_ratio_within_bound = false;
        }
      }
      if (stop || trainer.step() >= next_eval || trainer.step() >= e.total_steps) {
        checkpoint_eval();
        while (next_eval <= trainer.step()) next_eval += e.eval_interval;
      }
      if (stop) break;
      if (e.early_stop_threshold && streak >= e.early_stop_patience) {
        record.status = CellStatus::kEarlyStopped;
        break;
      }
    }
    record.steps = trainer.step();
    record.iterations = trainer.iteration();
    write_file(dir / "checkpoint.json", trainer.checkpoint().dump());
  } catch (const std::exception& ex) {
    record.status = CellStatus::kFailed;
    record.error = ex.what();
  }
  record.wallclock.total_s = seconds_since(start);
  write_file(dir / kRecordFile, to_json(record).dump(2) + "\n");
  return record;
}

std::vector<RunRecord> run_experiment(const RunConfig& config, const fs::path& results_dir, int workers,
                                      std::ostream* log) {
  config.validate();
  if (workers < 1) throw ConfigError("need at least one worker");
  fs::create_directories(results_dir);
  write_file(results_dir / "config.json", to_json(config).dump(2) + "\n");

  const std::vector<Cell> cells = expand_cells(config);
  std::vector<RunRecord> records(cells.size());
  std::vector<std::exception_ptr> fatal(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        records[i] = run_cell(cells[i], results_dir);
      } catch (...) {
        fatal[i] = std::current_exception();
        continue;
      }
      if (log) {
        const RunRecord& r = records[i];
        std::lock_guard lock(log_mutex);
        *log << "[" << i + 1 << "/" << cells.size() << "] " << r.group << " seed " << r.seed << ": "
             << to_string(r.status) << (r.skipped ? " (reused)" : "") << " steps " << r.steps;
        if (!r.error.empty()) *log << " (" << r.error << ")";
        *log << std::endl;
      }
    }
  };
  const int n = std::min<int>(workers, static_cast<int>(cells.size()));
  if (n <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n; ++w) pool.emplace_back(work);
  }
  for (const auto& f : fatal) {
    if (f) std::rethrow_exception(f);
  }
  return records;
}

std::vector<RunRecord> load_records(const fs::path& results_dir) {
  if (!fs::is_directory(results_dir)) throw ConfigError("no results directory " + results_dir.string());
  std::vector<RunRecord> out;
  for (const auto& entry : fs::recursive_directory_iterator(results_dir)) {
    if (!entry.is_regular_file() || entry.path().filename() != kRecordFile) continue;
    std::ifstream in(entry.path());
    try {
      out.push_back(record_from_json(nlohmann::json::parse(in)));
    } catch (const std::exception& ex) {
      throw ConfigError(entry.path().string() + ": " + ex.what());
    }
  }
  std::sort(out.begin(), out.end(), [](const RunRecord& a, const RunRecord& b) {
    return std::tie(a.group, a.seed) < std::tie(b.group, b.seed);
  });
  return out;
}

}  // namespace meher::lab
