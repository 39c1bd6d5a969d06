#include "tom/agent_models.hpp"

#include <limits>

namespace tom {

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Stationary: return "stationary";
    case ModelKind::Random: return "random";
    case ModelKind::FixedGoal: return "fixed_goal";
    case ModelKind::Chasing: return "chasing";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (ModelKind k : kAllModelKinds) {
    if (to_string(k) == name) return k;
  }
  throw DomainError("unknown agent model '" + std::string(name) + "'");
}

AgentModel AgentModel::for_trial(ModelKind kind, Cell human_start) {
  return {kind, kind == ModelKind::FixedGoal ? human_start : Cell{}};
}

std::string to_string(const AgentModel& m) {
  std::string out(to_string(m.kind));
  if (m.kind == ModelKind::FixedGoal) out += "@" + to_string(m.target);
  return out;
}

std::vector<AgentModel> trial_models(Cell human_start) {
  std::vector<AgentModel> out;
  for (ModelKind k : kAllModelKinds) out.push_back(AgentModel::for_trial(k, human_start));
  return out;
}

namespace {

ActionDistribution point_mass(Action a) {
  ActionDistribution d{};
  d[static_cast<std::size_t>(a)] = 1.0;
  return d;
}

ActionDistribution uniform_over(const std::vector<Action>& actions) {
  ActionDistribution d{};
  const double p = 1.0 / static_cast<double>(actions.size());
  for (Action a : actions) d[static_cast<std::size_t>(a)] = p;
  return d;
}

// Uniform over the legal moves whose successor is closest to `target`.
ActionDistribution greedy_toward(const GridConfig& config, const Cell& from, const Cell& target) {
  if (from == target) return point_mass(Action::Stay);
  const ActionSet legal = legal_actions(config, from);
  int best = std::numeric_limits<int>::max();
  std::vector<Action> argmin;
  for (Action a : kAllActions) {
    if (a == Action::Stay || !legal.contains(a)) continue;
    const int d = manhattan(step(from, a), target);
    if (d < best) {
      best = d;
      argmin.clear();
    }
    if (d == best) argmin.push_back(a);
  }
  if (argmin.empty()) return point_mass(Action::Stay); // boxed in
  return uniform_over(argmin);
}

} // namespace

ActionDistribution agent_policy(const GridConfig& config, const AgentModel& model,
                                const EnvState& s) {
  if (s.status != Status::Active) throw StateError("agent policy queried at a terminal state");
  switch (model.kind) {
    case ModelKind::Stationary: return point_mass(Action::Stay);
    case ModelKind::Random: return uniform_over(legal_actions(config, s.agent).to_vector());
    case ModelKind::FixedGoal: return greedy_toward(config, s.agent, model.target);
    case ModelKind::Chasing: return greedy_toward(config, s.agent, s.human);
  }
  return point_mass(Action::Stay);
}

Action sample_action(const ActionDistribution& dist, std::mt19937_64& rng) {
  const double u = unit_draw(rng);
  double acc = 0.0;
  Action last = Action::Stay;
  for (Action a : kAllActions) {
    const double p = dist[static_cast<std::size_t>(a)];
    if (p <= 0.0) continue;
    acc += p;
    last = a;
    if (u < acc) return a;
  }
  return last; // rounding left u just above the accumulated mass
}

Action sample_agent_action(const GridConfig& config, const AgentModel& model, const EnvState& s,
                           std::mt19937_64& rng) {
  return sample_action(agent_policy(config, model, s), rng);
}

} // namespace tom
