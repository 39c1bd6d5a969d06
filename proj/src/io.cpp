#include "tom/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace tom::io {

json to_json(const Cell& c) { return json::array({c.x, c.y}); }

Cell cell_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw FormatError("cell must be a two-element integer array, got " + j.dump());
  }
  return {j[0].get<int>(), j[1].get<int>()};
}

namespace {

json cells_to_json(const std::vector<Cell>& cs) {
  json out = json::array();
  for (const Cell& c : cs) out.push_back(to_json(c));
  return out;
}

std::vector<Cell> cells_from_json(const json& j, const char* key) {
  std::vector<Cell> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_array()) throw FormatError(std::string(key) + " must be a list of cells");
  for (const json& c : j[key]) out.push_back(cell_from_json(c));
  return out;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

} // namespace

json to_json(const GridConfig& g) {
  return {{"width", g.width},
          {"height", g.height},
          {"goal_cells", cells_to_json(g.goal_cells)},
          {"human_start_cells", cells_to_json(g.human_start_cells)},
          {"agent_spawn_region", cells_to_json(g.agent_spawn_region)},
          {"blocked_cells", cells_to_json(g.blocked_cells)}};
}

GridConfig grid_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("grid config must be an object");
  GridConfig g;
  try {
    g.width = j.at("width").get<int>();
    g.height = j.at("height").get<int>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("grid config: ") + e.what());
  }
  g.goal_cells = cells_from_json(j, "goal_cells");
  g.human_start_cells = cells_from_json(j, "human_start_cells");
  g.agent_spawn_region = cells_from_json(j, "agent_spawn_region");
  g.blocked_cells = cells_from_json(j, "blocked_cells");
  g.validate();
  return g;
}

GridConfig load_grid(const std::filesystem::path& path) { return grid_from_json(read_json_file(path)); }

json to_json(const RewardParams& p) {
  return {{"goal_reward", p.goal_reward},
          {"action_cost", p.action_cost},
          {"discount", p.discount},
          {"collision_penalty", p.collision_penalty},
          {"beta", p.beta}};
}

RewardParams params_from_json(const json& j, const RewardParams& base) {
  RewardParams p = base;
  if (j.is_null()) return p;
  if (!j.is_object()) throw FormatError("reward params must be an object");
  p.goal_reward = j.value("goal_reward", p.goal_reward);
  p.action_cost = j.value("action_cost", p.action_cost);
  p.discount = j.value("discount", p.discount);
  p.collision_penalty = j.value("collision_penalty", p.collision_penalty);
  p.beta = j.value("beta", p.beta);
  p.validate();
  return p;
}

json to_json(const AgentModel& m) {
  json out = {{"variant", std::string(to_string(m.kind))}};
  if (m.kind == ModelKind::FixedGoal) out["target"] = to_json(m.target);
  return out;
}

ExperimentPlan plan_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw FormatError("plan must be an object");
  ExperimentPlan plan;
  plan.grid = default_grid();
  if (j.contains("grid")) {
    const json& g = j["grid"];
    if (g.is_string()) {
      plan.grid = load_grid(base_dir / g.get<std::string>());
    } else {
      plan.grid = grid_from_json(g);
    }
  }
  if (j.contains("conditions")) {
    plan.conditions.clear();
    for (const json& c : j["conditions"]) plan.conditions.push_back(parse_model_kind(c.get<std::string>()));
  }
  plan.trials_per_condition = j.value("trials_per_condition", plan.trials_per_condition);
  plan.participants = j.value("participants", plan.participants);
  plan.human_beta = j.value("human_beta", plan.human_beta);
  plan.seed = j.value("seed", plan.seed);
  plan.step_cap = j.value("step_cap", plan.step_cap);
  plan.max_attempts = j.value("max_attempts", plan.max_attempts);
  plan.force_uniform_likelihood = j.value("force_uniform_likelihood", plan.force_uniform_likelihood);
  if (j.contains("params")) plan.params = params_from_json(j["params"]);
  plan.validate();
  return plan;
}

ExperimentPlan load_plan(const std::filesystem::path& path) {
  return plan_from_json(read_json_file(path), path.parent_path());
}

json to_json(const TrajectoryMeta& m) {
  return {{"trialId", m.trial_id},
          {"condition", std::string(to_string(m.condition))},
          {"goal", to_json(m.goal)},
          {"humanStart", to_json(m.human_start)},
          {"agentStart", to_json(m.agent_start)},
          {"seed", m.seed},
          {"outcome", std::string(to_string(m.outcome))},
          {"success", m.outcome == Outcome::GoalReached}};
}

TrajectoryMeta meta_from_json(const json& j) {
  TrajectoryMeta m;
  try {
    m.trial_id = j.at("trialId").get<std::string>();
    m.condition = parse_model_kind(j.at("condition").get<std::string>());
    m.goal = cell_from_json(j.at("goal"));
    m.human_start = cell_from_json(j.at("humanStart"));
    m.agent_start = cell_from_json(j.at("agentStart"));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.outcome = parse_outcome(j.at("outcome").get<std::string>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("trajectory header: ") + e.what());
  }
  return m;
}

json to_json(const TrajectoryStep& s, std::size_t index) {
  json out = {{"step", index},
              {"human", to_json(s.state.human)},
              {"agent", to_json(s.state.agent)},
              {"action", std::string(to_string(s.human))}};
  if (s.agent) out["agentAction"] = std::string(to_string(*s.agent));
  return out;
}

TrajectoryStep step_from_json(const json& j) {
  TrajectoryStep s;
  try {
    s.state.human = cell_from_json(j.at("human"));
    s.state.agent = cell_from_json(j.at("agent"));
    s.state.status = Status::Active;
    s.human = parse_action(j.at("action").get<std::string>());
    if (j.contains("agentAction")) s.agent = parse_action(j["agentAction"].get<std::string>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("trajectory step: ") + e.what());
  }
  return s;
}

void write_trajectory(std::ostream& out, const Trajectory& traj) {
  const json header = {{"schema", kTrajectorySchema}, {"version", kTrajectoryVersion}, {"trial", to_json(traj.meta)}};
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < traj.steps.size(); ++i) out << to_json(traj.steps[i], i).dump() << '\n';
}

std::string trajectory_to_string(const Trajectory& traj) {
  std::ostringstream out;
  write_trajectory(out, traj);
  return out.str();
}

Trajectory read_trajectory(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty trajectory file");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("trajectory header: ") + e.what());
  }
  if (header.value("schema", "") != kTrajectorySchema) throw FormatError("not a trajectory file");
  if (header.value("version", -1) != kTrajectoryVersion) {
    throw FormatError("unsupported trajectory schema version " + header.value("version", json()).dump());
  }
  Trajectory traj;
  traj.meta = meta_from_json(header.at("trial"));
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      traj.steps.push_back(step_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const std::exception& e) {
      throw FormatError("step " + std::to_string(traj.steps.size()) + ": " + e.what());
    }
  }
  return traj;
}

void save_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  write_trajectory(out, traj);
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_trajectory(in);
}

std::string label(const AgentModel& m) { return std::string(to_string(m.kind)); }
std::string label(const Cell& goal) { return "goal" + to_string(goal); }
std::string label(const Hypothesis& h) { return label(h.model) + "/" + label(h.goal); }

json report_summary(const ExperimentReport& report) {
  json confusion = json::array();
  for (const auto& row : report.confusion) confusion.push_back(row);
  json labels = json::array();
  for (ModelKind k : kAllModelKinds) labels.push_back(std::string(to_string(k)));
  json curves = json::object();
  for (const auto& [method, curve] : report.goal_curves) curves[method] = curve;
  return {{"trials", report.trials},
          {"top1Accuracy", report.top1_accuracy},
          {"top2Accuracy", report.top2_accuracy},
          {"confusionLabels", labels},
          {"confusion", confusion},
          {"withinClusterConfusion", report.within_cluster_confusion()},
          {"crossClusterConfusion", report.cross_cluster_confusion()},
          {"goalCurves", curves}};
}

void write_report(const std::filesystem::path& dir, const ExperimentReport& report, const std::string& name) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / (name + ".json"), std::ios::binary | std::ios::trunc);
    out << report_summary(report).dump(2) << '\n';
  }
  {
    std::ofstream out(dir / (name + "_trials.csv"), std::ios::binary | std::ios::trunc);
    out << std::setprecision(17);
    out << "trial,participant,condition,goal_x,goal_y,start_x,start_y,agent_x,agent_y,steps,attempts,"
           "top1_credit,top2_credit";
    for (ModelKind k : kAllModelKinds) out << ",p_" << to_string(k);
    out << '\n';
    for (const TrialResult& r : report.trial_results) {
      const TrajectoryMeta& m = r.trajectory.meta;
      out << r.index << ',' << r.participant << ',' << to_string(m.condition) << ',' << m.goal.x << ','
          << m.goal.y << ',' << m.human_start.x << ',' << m.human_start.y << ',' << m.agent_start.x << ','
          << m.agent_start.y << ',' << r.trajectory.steps.size() << ',' << r.attempts << ',' << r.top1_credit
          << ',' << r.top2_credit;
      for (double p : r.model_posterior) out << ',' << p;
      out << '\n';
    }
  }
  if (!report.goal_curves.empty()) {
    std::ofstream out(dir / (name + "_curves.csv"), std::ios::binary | std::ios::trunc);
    out << std::setprecision(17);
    out << "percent";
    for (const auto& [method, _] : report.goal_curves) out << ',' << method;
    out << '\n';
    for (int b = 0; b < kCurveBuckets; ++b) {
      out << b * 5;
      for (const auto& [_, curve] : report.goal_curves) out << ',' << curve[static_cast<std::size_t>(b)];
      out << '\n';
    }
  }
}

} // namespace tom::io
