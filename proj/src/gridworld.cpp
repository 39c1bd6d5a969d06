#include "tom/gridworld.hpp"

#include <algorithm>
#include <set>

namespace tom {

std::string to_string(const Cell& c) {
  return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + ")";
}

std::string_view to_string(Action a) {
  switch (a) {
    case Action::Up: return "up";
    case Action::Down: return "down";
    case Action::Left: return "left";
    case Action::Right: return "right";
    case Action::Stay: return "stay";
  }
  return "?";
}

Action parse_action(std::string_view name) {
  for (Action a : kAllActions) {
    if (to_string(a) == name) return a;
  }
  throw DomainError("unknown action '" + std::string(name) + "'");
}

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Active: return "active";
    case Status::GoalReached: return "goal_reached";
    case Status::Collided: return "collided";
  }
  return "?";
}

Cell step(const Cell& c, Action a) {
  switch (a) {
    case Action::Up: return {c.x, c.y - 1};
    case Action::Down: return {c.x, c.y + 1};
    case Action::Left: return {c.x - 1, c.y};
    case Action::Right: return {c.x + 1, c.y};
    case Action::Stay: return c;
  }
  return c;
}

std::vector<Action> ActionSet::to_vector() const {
  std::vector<Action> out;
  for (Action a : kAllActions) {
    if (contains(a)) out.push_back(a);
  }
  return out;
}

bool GridConfig::is_blocked(const Cell& c) const {
  return std::find(blocked_cells.begin(), blocked_cells.end(), c) != blocked_cells.end();
}

void GridConfig::validate() const {
  if (width < 3 || height < 3) {
    throw DomainError("grid must be at least 3x3, got " + std::to_string(width) + "x" +
                      std::to_string(height));
  }
  auto check_cells = [&](const std::vector<Cell>& cells, const char* what, bool non_empty) {
    if (non_empty && cells.empty()) throw DomainError(std::string(what) + " must not be empty");
    std::set<Cell> seen;
    for (const Cell& c : cells) {
      if (!in_bounds(c)) throw DomainError(std::string(what) + " cell " + to_string(c) + " out of bounds");
      if (!seen.insert(c).second) throw DomainError(std::string(what) + " cell " + to_string(c) + " listed twice");
    }
  };
  check_cells(blocked_cells, "blocked", false);
  check_cells(goal_cells, "goal", true);
  check_cells(human_start_cells, "human start", true);
  check_cells(agent_spawn_region, "agent spawn", true);
  for (const auto* list : {&goal_cells, &human_start_cells, &agent_spawn_region}) {
    for (const Cell& c : *list) {
      if (is_blocked(c)) throw DomainError("cell " + to_string(c) + " is blocked");
    }
  }
  for (const Cell& g : goal_cells) {
    if (g.y != 0) throw DomainError("goal " + to_string(g) + " is not on the top row");
  }
  for (const Cell& s : human_start_cells) {
    if (std::find(goal_cells.begin(), goal_cells.end(), s) != goal_cells.end()) {
      throw DomainError("human start " + to_string(s) + " coincides with a goal");
    }
  }
  if (num_cells() - static_cast<int>(blocked_cells.size()) < 2) {
    throw DomainError("grid needs at least two free cells");
  }
}

GridConfig default_grid() {
  GridConfig g;
  g.width = 9;
  g.height = 9;
  g.goal_cells = {{0, 0}, {4, 0}, {8, 0}};
  g.human_start_cells = {{0, 8}, {4, 8}, {8, 8}};
  for (int y = 3; y <= 5; ++y) {
    for (int x = 3; x <= 5; ++x) g.agent_spawn_region.push_back({x, y});
  }
  return g;
}

ActionSet legal_actions(const GridConfig& config, const Cell& pos) {
  if (!config.in_bounds(pos)) throw DomainError("position " + to_string(pos) + " out of bounds");
  ActionSet out;
  for (Action a : kAllActions) {
    if (a == Action::Stay || config.is_free(step(pos, a))) out.insert(a);
  }
  return out;
}

namespace {

void require_active(const EnvState& s) {
  if (s.status != Status::Active) {
    throw StateError("state is terminal (" + std::string(to_string(s.status)) + ")");
  }
}

} // namespace

EnvState apply_human_move(const GridConfig& config, const EnvState& s, Action a_h,
                          const Cell& goal) {
  require_active(s);
  if (!legal_actions(config, s.human).contains(a_h)) {
    throw DomainError("illegal human action '" + std::string(to_string(a_h)) + "' at " +
                      to_string(s.human));
  }
  EnvState next = s;
  next.human = step(s.human, a_h);
  if (next.human == next.agent) {
    next.status = Status::Collided;
  } else if (next.human == goal) {
    next.status = Status::GoalReached;
  }
  return next;
}

EnvState apply_agent_move(const GridConfig& config, const EnvState& s, Action a_r) {
  require_active(s);
  if (!legal_actions(config, s.agent).contains(a_r)) {
    throw DomainError("illegal agent action '" + std::string(to_string(a_r)) + "' at " +
                      to_string(s.agent));
  }
  EnvState next = s;
  next.agent = step(s.agent, a_r);
  if (next.agent == next.human) next.status = Status::Collided;
  return next;
}

StateIndex::StateIndex(const GridConfig& config)
    : width_(config.width), cells_(config.num_cells()),
      lookup_(static_cast<std::size_t>(cells_) * cells_, -1) {
  for (int h = 0; h < cells_; ++h) {
    const Cell hc = config.cell_at(h);
    if (config.is_blocked(hc)) continue;
    for (int a = 0; a < cells_; ++a) {
      const Cell ac = config.cell_at(a);
      if (a == h || config.is_blocked(ac)) continue;
      lookup_[static_cast<std::size_t>(h) * cells_ + a] = static_cast<std::int32_t>(states_.size());
      states_.push_back({hc, ac, Status::Active});
    }
  }
}

std::optional<std::size_t> StateIndex::find(const Cell& human, const Cell& agent) const {
  const int height = cells_ / width_;
  auto inside = [&](const Cell& c) { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height; };
  if (!inside(human) || !inside(agent)) return std::nullopt;
  const int h = human.y * width_ + human.x;
  const int a = agent.y * width_ + agent.x;
  const std::int32_t idx = lookup_[static_cast<std::size_t>(h) * cells_ + a];
  if (idx < 0) return std::nullopt;
  return static_cast<std::size_t>(idx);
}

std::size_t StateIndex::at(const Cell& human, const Cell& agent) const {
  auto idx = find(human, agent);
  if (!idx) throw DomainError("no active state for human " + to_string(human) + ", agent " + to_string(agent));
  return *idx;
}

std::vector<EnvState> enumerate_states(const GridConfig& config) {
  return StateIndex(config).states();
}

} // namespace tom
