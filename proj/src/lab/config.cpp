#include "meher/lab/config.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "meher/errors.hpp"

namespace meher::lab {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

std::vector<std::string> tags(const nlohmann::json& j) {
  if (j.is_string()) return {j.get<std::string>()};
  return j.get<std::vector<std::string>>();
}

template <typename T>
T get(const nlohmann::json& j, const char* key, T fallback) {
  try {
    return j.value(key, fallback);
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

std::string format_ratio(double s) {
  std::ostringstream out;
  out << s;
  return out.str();
}

}  // namespace

void RunConfig::validate() const {
  if (spawners.empty() || prey_policies.empty()) throw ConfigError("environment needs a spawner and a prey policy");
  if (modes.empty()) throw ConfigError("algorithm.modes must not be empty");
  if (s_ratios.empty()) throw ConfigError("algorithm.s_ratios must not be empty");
  env.validate();
  ppo.validate();
  for (double s : s_ratios) {
    control::AlgorithmMode m = mode_template;
    m.s_ratio = s;
    m.validate();
  }
  const ExperimentConfig& e = experiment;
  if (e.seeds.empty()) throw ConfigError("experiment.seeds must not be empty");
  if (e.total_steps < ppo.n_steps) throw ConfigError("experiment.total_steps must cover at least one rollout");
  if (e.eval_interval == 0) throw ConfigError("experiment.eval_interval must be positive");
  if (e.eval_episodes < 1) throw ConfigError("experiment.eval_episodes must be at least 1");
  if (e.workers < 1) throw ConfigError("experiment.workers must be at least 1");
  if (e.early_stop_patience < 1) throw ConfigError("experiment.early_stop_patience must be at least 1");
  if (e.success_window == 0) throw ConfigError("experiment.success_window must be positive");
  if (e.early_stop_threshold && !(*e.early_stop_threshold > 0.0 && *e.early_stop_threshold <= 1.0)) {
    throw ConfigError("experiment.early_stop_threshold must lie in (0, 1]");
  }
}

RunConfig parse_run_config(const nlohmann::json& j) {
  reject_unknown(j, {"name", "environment", "algorithm", "experiment"}, "config");
  RunConfig c;
  c.name = get<std::string>(j, "name", c.name);

  const nlohmann::json envj = j.value("environment", nlohmann::json::object());
  reject_unknown(envj,
                 {"spawner", "prey_policy", "arena_half_extent", "predator_max_speed", "prey_max_speed",
                  "interception_radius", "timeout"},
                 "environment");
  try {
    for (const std::string& t : tags(envj.value("spawner", nlohmann::json("SpawnApart")))) {
      c.spawners.push_back(env::parse_spawner(t));
    }
    for (const std::string& t : tags(envj.value("prey_policy", nlohmann::json("Attract")))) {
      c.prey_policies.push_back(env::parse_prey_policy(t));
    }
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("spawner and prey_policy take a tag or a list of tags");
  }
  c.env.arena_half_extent = get(envj, "arena_half_extent", c.env.arena_half_extent);
  c.env.predator_max_speed = get(envj, "predator_max_speed", c.env.predator_max_speed);
  c.env.prey_max_speed = get(envj, "prey_max_speed", c.env.prey_max_speed);
  c.env.interception_radius = get(envj, "interception_radius", c.env.interception_radius);
  c.env.timeout = get(envj, "timeout", c.env.timeout);

  const nlohmann::json algj = j.value("algorithm", nlohmann::json::object());
  reject_unknown(algj, {"modes", "s_ratios", "switch_threshold", "targeted_multiplier", "max_rejection_attempts", "ppo"},
                 "algorithm");
  try {
    for (const std::string& t : tags(algj.value("modes", nlohmann::json("MEHER_Uniform")))) {
      c.modes.push_back(control::parse_algorithm(t));
    }
    if (algj.contains("s_ratios")) c.s_ratios = algj.at("s_ratios").get<std::vector<double>>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("algorithm.modes and algorithm.s_ratios must be lists");
  }
  c.mode_template.switch_threshold = get(algj, "switch_threshold", c.mode_template.switch_threshold);
  c.mode_template.targeted_multiplier = get(algj, "targeted_multiplier", c.mode_template.targeted_multiplier);
  c.mode_template.max_rejection_attempts =
      get(algj, "max_rejection_attempts", c.mode_template.max_rejection_attempts);
  try {
    c.ppo = ppo::ppo_config_from_json(algj.value("ppo", nlohmann::json::object()));
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("bad value in algorithm.ppo");
  }

  const nlohmann::json expj = j.value("experiment", nlohmann::json::object());
  reject_unknown(expj,
                 {"seeds", "total_steps", "eval_interval", "eval_episodes", "output_dir", "workers",
                  "early_stop_threshold", "early_stop_patience", "success_window", "audit_log",
                  "record_trajectories"},
                 "experiment");
  ExperimentConfig& e = c.experiment;
  try {
    e.seeds = expj.value("seeds", std::vector<std::uint64_t>{});
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("experiment.seeds must be a list of non-negative integers");
  }
  e.total_steps = get(expj, "total_steps", e.total_steps);
  e.eval_interval = get(expj, "eval_interval", e.eval_interval);
  e.eval_episodes = get(expj, "eval_episodes", e.eval_episodes);
  e.output_dir = get(expj, "output_dir", e.output_dir);
  e.workers = get(expj, "workers", e.workers);
  if (expj.contains("early_stop_threshold") && !expj.at("early_stop_threshold").is_null()) {
    e.early_stop_threshold = get(expj, "early_stop_threshold", 1.0);
  }
  e.early_stop_patience = get(expj, "early_stop_patience", e.early_stop_patience);
  e.success_window = get(expj, "success_window", e.success_window);
  e.audit_log = get(expj, "audit_log", e.audit_log);
  e.record_trajectories = get(expj, "record_trajectories", e.record_trajectories);

  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json spawners = nlohmann::json::array();
  for (env::Spawner s : c.spawners) spawners.push_back(env::to_string(s));
  nlohmann::json prey = nlohmann::json::array();
  for (env::PreyPolicy p : c.prey_policies) prey.push_back(env::to_string(p));
  nlohmann::json modes = nlohmann::json::array();
  for (control::AlgorithmKind k : c.modes) modes.push_back(control::to_string(k));
  const ExperimentConfig& e = c.experiment;
  return {{"name", c.name},
          {"environment",
           {{"spawner", spawners},
            {"prey_policy", prey},
            {"arena_half_extent", c.env.arena_half_extent},
            {"predator_max_speed", c.env.predator_max_speed},
            {"prey_max_speed", c.env.prey_max_speed},
            {"interception_radius", c.env.interception_radius},
            {"timeout", c.env.timeout}}},
          {"algorithm",
           {{"modes", modes},
            {"s_ratios", c.s_ratios},
            {"switch_threshold", c.mode_template.switch_threshold},
            {"targeted_multiplier", c.mode_template.targeted_multiplier},
            {"max_rejection_attempts", c.mode_template.max_rejection_attempts},
            {"ppo", ppo::to_json(c.ppo)}}},
          {"experiment",
           {{"seeds", e.seeds},
            {"total_steps", e.total_steps},
            {"eval_interval", e.eval_interval},
            {"eval_episodes", e.eval_episodes},
            {"output_dir", e.output_dir},
            {"workers", e.workers},
            {"early_stop_threshold", e.early_stop_threshold ? nlohmann::json(*e.early_stop_threshold) : nlohmann::json()},
            {"early_stop_patience", e.early_stop_patience},
            {"success_window", e.success_window},
            {"audit_log", e.audit_log},
            {"record_trajectories", e.record_trajectories}}}};
}

std::optional<double> Cell::s_ratio() const {
  if (!trainer.mode.is_meher()) return std::nullopt;
  return trainer.mode.s_ratio;
}

std::filesystem::path Cell::relative_dir() const {
  return std::filesystem::path(group) / ("seed_" + std::to_string(seed));
}

std::vector<Cell> expand_cells(const RunConfig& config) {
  std::vector<Cell> cells;
  for (env::Spawner spawner : config.spawners) {
    for (env::PreyPolicy prey : config.prey_policies) {
      const std::string condition = std::string(env::to_string(spawner)) + "/" + std::string(env::to_string(prey));
      for (control::AlgorithmKind kind : config.modes) {
        control::AlgorithmMode mode = config.mode_template;
        mode.kind = kind;
        const std::vector<double> ratios = mode.is_meher() ? config.s_ratios : std::vector<double>{mode.s_ratio};
        for (double s : ratios) {
          mode.s_ratio = s;
          std::string group = condition + "/" + std::string(control::to_string(kind));
          if (mode.is_meher()) group += "/s" + format_ratio(s);
          for (std::uint64_t seed : config.experiment.seeds) {
            Cell cell;
            cell.condition = condition;
            cell.group = group;
            cell.seed = seed;
            cell.experiment = config.experiment;
            cell.trainer.env = config.env;
            cell.trainer.env.spawner = spawner;
            cell.trainer.env.prey_policy = prey;
            cell.trainer.ppo = config.ppo;
            cell.trainer.mode = mode;
            cell.trainer.seed = seed;
            cell.trainer.success_window = config.experiment.success_window;
            cell.trainer.keep_audits = config.experiment.audit_log;
            cells.push_back(std::move(cell));
          }
        }
      }
    }
  }
  return cells;
}

nlohmann::json cell_json(const Cell& cell) {
  const ppo::TrainerConfig& t = cell.trainer;
  const ExperimentConfig& e = cell.experiment;
  nlohmann::json j = {
      {"environment",
       {{"spawner", env::to_string(t.env.spawner)},
        {"prey_policy", env::to_string(t.env.prey_policy)},
        {"arena_half_extent", t.env.arena_half_extent},
        {"predator_max_speed", t.env.predator_max_speed},
        {"prey_max_speed", t.env.prey_max_speed},
        {"interception_radius", t.env.interception_radius},
        {"timeout", t.env.timeout}}},
      {"algorithm", control::to_string(t.mode.kind)},
      {"ppo", ppo::to_json(t.ppo)},
      {"seed", cell.seed},
      {"total_steps", e.total_steps},
      {"eval_interval", e.eval_interval},
      {"eval_episodes", e.eval_episodes},
      {"early_stop_threshold", e.early_stop_threshold ? nlohmann::json(*e.early_stop_threshold) : nlohmann::json()},
      {"early_stop_patience", e.early_stop_patience},
      {"success_window", t.success_window}};
  if (t.mode.is_meher()) {
    j["s_ratio"] = t.mode.s_ratio;
    j["max_rejection_attempts"] = t.mode.max_rejection_attempts;
    if (t.mode.kind == control::AlgorithmKind::kMeherTargeted) j["targeted_multiplier"] = t.mode.targeted_multiplier;
  }
  if (t.mode.kind == control::AlgorithmKind::kPPOHer2PPO) j["switch_threshold"] = t.mode.switch_threshold;
  return j;
}

std::string content_hash(const nlohmann::json& j) {
  const std::string body = j.dump();
  const std::string blob = "blob " + std::to_string(body.size()) + std::string(1, '\0') + body;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &length, EVP_sha1(), nullptr) != 1) {
    throw std::runtime_error("SHA-1 digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

std::filesystem::path resolve_output_dir(const std::string& output_dir) {
  const std::filesystem::path dir(output_dir);
  const char* root = std::getenv(kOutputRootEnv);
  if (root == nullptr || *root == '\0' || dir.is_absolute()) return dir;
  return std::filesystem::path(root) / dir;
}

}  // namespace meher::lab
