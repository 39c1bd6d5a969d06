#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tom/agent_models.hpp"
#include "tom/gridworld.hpp"

namespace tom {

enum class Outcome : std::uint8_t { InProgress, GoalReached, Collided, Truncated };

std::string_view to_string(Outcome o);
Outcome parse_outcome(std::string_view name);

// One observed human decision: the state the human acted in and the action
// taken. The agent's reply is kept when known so that runs can be replayed.
struct TrajectoryStep {
  EnvState state;
  Action human = Action::Stay;
  std::optional<Action> agent;

  friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

struct TrajectoryMeta {
  std::string trial_id;
  ModelKind condition = ModelKind::Stationary;
  Cell goal;
  Cell human_start;
  Cell agent_start;
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::InProgress;

  friend bool operator==(const TrajectoryMeta&, const TrajectoryMeta&) = default;
};

struct Trajectory {
  TrajectoryMeta meta;
  std::vector<TrajectoryStep> steps;

  bool success() const { return meta.outcome == Outcome::GoalReached; }
  // The condition instantiated for this trial (FixedGoal targets the start).
  AgentModel true_model() const { return AgentModel::for_trial(meta.condition, meta.human_start); }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

class TrajectoryError : public std::runtime_error {
public:
  TrajectoryError(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

private:
  std::size_t step_;
};

// Checks that every step is Active with a legal action and that each state
// follows from its predecessor by the human move plus one legal agent move.
// Throws TrajectoryError naming the first offending step.
void validate_trajectory(const GridConfig& config, const Trajectory& traj);

} // namespace tom
