#include "tom/trajectory.hpp"

namespace tom {

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::InProgress: return "in_progress";
    case Outcome::GoalReached: return "goal_reached";
    case Outcome::Collided: return "collided";
    case Outcome::Truncated: return "truncated";
  }
  return "?";
}

Outcome parse_outcome(std::string_view name) {
  for (Outcome o : {Outcome::InProgress, Outcome::GoalReached, Outcome::Collided, Outcome::Truncated}) {
    if (to_string(o) == name) return o;
  }
  throw DomainError("unknown outcome '" + std::string(name) + "'");
}

void validate_trajectory(const GridConfig& config, const Trajectory& traj) {
  const auto fail = [](std::size_t i, const std::string& why) {
    throw TrajectoryError("step " + std::to_string(i) + ": " + why, i);
  };
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const TrajectoryStep& st = traj.steps[i];
    if (st.state.status != Status::Active) fail(i, "state is not active");
    if (!config.is_free(st.state.human) || !config.is_free(st.state.agent)) fail(i, "cell outside the free grid");
    if (st.state.human == st.state.agent) fail(i, "human and agent share a cell");
    if (!legal_actions(config, st.state.human).contains(st.human)) {
      fail(i, "illegal human action '" + std::string(to_string(st.human)) + "' at " + to_string(st.state.human));
    }
    const EnvState mid = apply_human_move(config, st.state, st.human, traj.meta.goal);
    if (i + 1 == traj.steps.size()) break;

    const TrajectoryStep& next = traj.steps[i + 1];
    if (mid.status != Status::Active) fail(i + 1, "trajectory continues after a terminal move");
    if (next.state.human != mid.human) fail(i + 1, "human cell does not follow from the previous action");
    const ActionSet agent_moves = legal_actions(config, mid.agent);
    if (st.agent) {
      if (!agent_moves.contains(*st.agent)) fail(i, "illegal agent action");
      if (step(mid.agent, *st.agent) != next.state.agent) fail(i + 1, "agent cell does not follow from the recorded agent action");
    } else {
      bool reachable = false;
      for (Action a : agent_moves.to_vector()) reachable = reachable || step(mid.agent, a) == next.state.agent;
      if (!reachable) fail(i + 1, "agent cell is not one move from its previous cell");
    }
  }
}

} // namespace tom
