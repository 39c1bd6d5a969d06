#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tom {

// Raised when an argument falls outside the environment's domain
// (out-of-bounds cells, illegal actions, malformed configs).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Raised when an operation is applied to a terminal state.
class StateError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

struct Cell {
  int x = 0; // column, left to right
  int y = 0; // row, top to bottom

  friend constexpr bool operator==(const Cell&, const Cell&) = default;
  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

std::string to_string(const Cell& c);

inline int manhattan(const Cell& a, const Cell& b) {
  return std::abs(a.x - b.x) + std::abs(a.y - b.y);
}

// Shared by human and agent. The numeric order is the canonical order used
// for Q-table columns and distribution arrays.
enum class Action : std::uint8_t { Up = 0, Down = 1, Left = 2, Right = 3, Stay = 4 };

inline constexpr std::size_t kNumActions = 5;
inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::Up, Action::Down, Action::Left, Action::Right, Action::Stay};

std::string_view to_string(Action a);
Action parse_action(std::string_view name);

Cell step(const Cell& c, Action a);

// Bitmask over kAllActions, bit i set iff action i is legal.
class ActionSet {
public:
  constexpr ActionSet() = default;

  constexpr void insert(Action a) { bits_ |= bit(a); }
  constexpr bool contains(Action a) const { return (bits_ & bit(a)) != 0; }
  constexpr int size() const { return __builtin_popcount(bits_); }
  constexpr bool empty() const { return bits_ == 0; }
  std::vector<Action> to_vector() const;

  friend constexpr bool operator==(const ActionSet&, const ActionSet&) = default;

private:
  static constexpr std::uint8_t bit(Action a) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(a));
  }
  std::uint8_t bits_ = 0;
};

struct GridConfig {
  int width = 9;
  int height = 9;
  std::vector<Cell> goal_cells;
  std::vector<Cell> human_start_cells;
  std::vector<Cell> agent_spawn_region;
  std::vector<Cell> blocked_cells;

  bool in_bounds(const Cell& c) const {
    return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height;
  }
  bool is_blocked(const Cell& c) const;
  bool is_free(const Cell& c) const { return in_bounds(c) && !is_blocked(c); }
  int num_cells() const { return width * height; }
  int cell_index(const Cell& c) const { return c.y * width + c.x; }
  Cell cell_at(int index) const { return {index % width, index / width}; }

  // Throws DomainError describing the first violated invariant.
  void validate() const;

  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

// 9x9 grid, goals along the top row, starts along the bottom row and the
// agent spawning in the central 3x3 block.
GridConfig default_grid();

enum class Status : std::uint8_t { Active, GoalReached, Collided };

std::string_view to_string(Status s);

struct EnvState {
  Cell human;
  Cell agent;
  Status status = Status::Active;

  friend constexpr bool operator==(const EnvState&, const EnvState&) = default;
};

ActionSet legal_actions(const GridConfig& config, const Cell& pos);

// Human half-turn. Collision takes precedence over goal arrival: stepping
// onto an agent parked on the goal cell is a collision.
EnvState apply_human_move(const GridConfig& config, const EnvState& s, Action a_h,
                          const Cell& goal);

// Agent half-turn.
EnvState apply_agent_move(const GridConfig& config, const EnvState& s, Action a_r);

// Dense index over the Active (human, agent) pairs of a grid. Indices are
// assigned in row-major order of the human cell, then of the agent cell.
class StateIndex {
public:
  explicit StateIndex(const GridConfig& config);

  std::size_t size() const { return states_.size(); }
  const EnvState& state(std::size_t i) const { return states_[i]; }
  const std::vector<EnvState>& states() const { return states_; }

  // Index of the Active state (human, agent); nullopt if the pair is not an
  // Active configuration (coincident or blocked cells).
  std::optional<std::size_t> find(const Cell& human, const Cell& agent) const;
  std::size_t at(const Cell& human, const Cell& agent) const;

private:
  int width_;
  int cells_;
  std::vector<EnvState> states_;
  std::vector<std::int32_t> lookup_; // cells_*cells_, -1 for non-states
};

std::vector<EnvState> enumerate_states(const GridConfig& config);

} // namespace tom
