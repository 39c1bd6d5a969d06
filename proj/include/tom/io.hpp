#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "tom/inference.hpp"
#include "tom/simulation.hpp"
#include "tom/trajectory.hpp"

namespace tom::io {

using nlohmann::json;

inline constexpr const char* kTrajectorySchema = "tom.trajectory";
inline constexpr int kTrajectoryVersion = 1;

class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

json to_json(const Cell& c);
Cell cell_from_json(const json& j);

json to_json(const GridConfig& g);
GridConfig grid_from_json(const json& j);
GridConfig load_grid(const std::filesystem::path& path);

json to_json(const RewardParams& p);
// Missing keys keep their defaults from `base`.
RewardParams params_from_json(const json& j, const RewardParams& base = {});

json to_json(const AgentModel& m);

// Plan files may inline the grid or name a grid file relative to the plan.
ExperimentPlan plan_from_json(const json& j, const std::filesystem::path& base_dir = {});
ExperimentPlan load_plan(const std::filesystem::path& path);

json to_json(const TrajectoryMeta& m);
TrajectoryMeta meta_from_json(const json& j);
json to_json(const TrajectoryStep& s, std::size_t index);
TrajectoryStep step_from_json(const json& j);

// Line-delimited: one header record carrying the schema version and trial
// metadata, then one record per human step.
void write_trajectory(std::ostream& out, const Trajectory& traj);
std::string trajectory_to_string(const Trajectory& traj);
Trajectory read_trajectory(std::istream& in);
void save_trajectory(const std::filesystem::path& path, const Trajectory& traj);
Trajectory load_trajectory(const std::filesystem::path& path);

std::string label(const AgentModel& m);
std::string label(const Cell& goal);
std::string label(const Hypothesis& h);

// One line per step (step 0 is the prior) with the full weight vector.
template <class H>
json trace_record(const std::string& trial_id, const std::string& track, std::size_t step, const Belief<H>& b) {
  json labels = json::array();
  json weights = json::array();
  for (std::size_t i = 0; i < b.size(); ++i) {
    labels.push_back(label(b.support()[i]));
    weights.push_back(b.prob(i));
  }
  return {{"trialId", trial_id}, {"track", track}, {"step", step}, {"hypotheses", labels}, {"weights", weights}};
}

template <class H>
json belief_to_json(const Belief<H>& b) {
  json out = json::object();
  for (std::size_t i = 0; i < b.size(); ++i) out[label(b.support()[i])] = b.prob(i);
  return out;
}

// report.json, trials.csv and curves.csv under `dir`.
void write_report(const std::filesystem::path& dir, const ExperimentReport& report, const std::string& name);
json report_summary(const ExperimentReport& report);

} // namespace tom::io
