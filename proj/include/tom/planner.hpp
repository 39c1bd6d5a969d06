#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tom/agent_models.hpp"
#include "tom/gridworld.hpp"

namespace tom {

// Human reward parameterization. Goal reward and collision penalty are
// earned on the transition that enters the terminal state.
struct RewardParams {
  double goal_reward = 30.0;
  double action_cost = -3.0;
  double discount = 0.95;
  double collision_penalty = -60.0;
  double beta = 1.0; // Boltzmann inverse temperature; not used by the solver

  void validate() const;

  friend bool operator==(const RewardParams&, const RewardParams&) = default;
};

enum class Execution { Serial, Parallel };

struct SolveOptions {
  double tol = 1e-6;
  int max_sweeps = 10000;
  Execution execution = Execution::Parallel;
  bool record_residuals = false;
};

class ConvergenceError : public std::runtime_error {
public:
  ConvergenceError(const std::string& what, double residual, int sweeps)
      : std::runtime_error(what), residual_(residual), sweeps_(sweeps) {}
  double residual() const { return residual_; }
  int sweeps() const { return sweeps_; }

private:
  double residual_;
  int sweeps_;
};

// Flattened one-turn dynamics for a fixed (grid, agent model, goal).
// Entry [i * kNumActions + k] describes action k at state i. A successor
// index of -1 marks a terminal (or, for the human half, illegal) outcome.
struct TurnDynamics {
  std::size_t num_states = 0;
  std::vector<std::uint8_t> human_legal;
  std::vector<std::int32_t> human_next;
  std::vector<double> human_reward;
  std::vector<double> agent_prob;
  std::vector<std::int32_t> agent_next;
  std::vector<double> agent_reward;

  static TurnDynamics build(const GridConfig& config, const StateIndex& index,
                            const AgentModel& model, const Cell& goal, const RewardParams& params);
};

// One synchronous Bellman update V_old -> (RV, Q, V_new):
//   RV(s) = sum_r p(r|s) [R(s,NULL,r) + discount * V_old(s'')]
//   Q(s,h) = R(s,h,NULL) + discount * RV(s')
//   V_new(s) = max_h Q(s,h)
// Returns max |V_new - V_old|. Illegal Q entries are -inf.
double composite_sweep_serial(const TurnDynamics& dyn, double discount,
                              std::span<const double> v_old, std::span<double> rv,
                              std::span<double> q, std::span<double> v_new);
double composite_sweep_parallel(const TurnDynamics& dyn, double discount,
                                std::span<const double> v_old, std::span<double> rv,
                                std::span<double> q, std::span<double> v_new);

struct ValueTables {
  GridConfig config;
  std::shared_ptr<const StateIndex> index;
  AgentModel model;
  Cell goal;
  RewardParams params;
  double tol = 0.0;
  std::vector<double> v;
  std::vector<double> rv;
  std::vector<double> q; // num_states * kNumActions, -inf where illegal
  double residual = 0.0;
  int sweeps = 0;
  std::vector<double> residual_history; // filled when requested

  std::size_t state_index(const EnvState& s) const;
  std::span<const double> q_row(std::size_t state) const {
    return {q.data() + state * kNumActions, kNumActions};
  }
  double value(const EnvState& s) const { return v[state_index(s)]; }
  double agent_turn_value(const EnvState& s) const { return rv[state_index(s)]; }
  double q_value(const EnvState& s, Action a) const {
    return q[state_index(s) * kNumActions + static_cast<std::size_t>(a)];
  }
};

ValueTables solve(const GridConfig& config, const AgentModel& model, const Cell& goal,
                  const RewardParams& params, const SolveOptions& options = {});

// Softmax of beta * q over the legal entries, with max subtraction.
ActionDistribution softmax_legal(std::span<const double> q_row, const ActionSet& legal, double beta);

ActionDistribution boltzmann_policy(const ValueTables& tables, const EnvState& s, double beta);

struct Hypothesis {
  AgentModel model;
  Cell goal;

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
  friend bool operator<(const Hypothesis& a, const Hypothesis& b) {
    if (a.model < b.model) return true;
    if (b.model < a.model) return false;
    return a.goal < b.goal;
  }
};

std::string to_string(const Hypothesis& h);

// Content hash of everything that determines a solved table.
std::uint64_t table_key(const GridConfig& config, const AgentModel& model, const Cell& goal,
                        const RewardParams& params, double tol);

void save_tables(const std::filesystem::path& path, const ValueTables& tables);
// Returns nullptr if the file is missing; throws on a corrupt or mismatched file.
std::unique_ptr<ValueTables> load_tables(const std::filesystem::path& path, const GridConfig& config,
                                         const AgentModel& model, const Cell& goal,
                                         const RewardParams& params, double tol);

// Solved tables for a fixed grid and reward, keyed by hypothesis. Solves
// lazily, memoizes in memory and optionally persists to a cache directory.
class TableBank {
public:
  TableBank(GridConfig config, RewardParams params, SolveOptions options = {},
            std::filesystem::path cache_dir = {});

  const GridConfig& config() const { return config_; }
  const RewardParams& params() const { return params_; }
  const SolveOptions& options() const { return options_; }

  // Solves (or loads) every missing pair. Pairs are solved in parallel.
  void ensure(const std::vector<AgentModel>& models, const std::vector<Cell>& goals);

  bool contains(const Hypothesis& h) const;
  // Throws std::out_of_range when the pair has not been solved.
  const ValueTables& at(const Hypothesis& h) const;
  const ValueTables& at(const AgentModel& m, const Cell& goal) const { return at({m, goal}); }
  std::shared_ptr<const ValueTables> share(const Hypothesis& h) const;

  std::size_t size() const;
  std::vector<Hypothesis> hypotheses() const;

  enum class Origin { Solved, Loaded };
  // How a held pair entered the bank; throws std::out_of_range if absent.
  Origin origin(const Hypothesis& h) const;

  struct Stats {
    int solved = 0;
    int loaded = 0;
    int reused = 0;
  };
  Stats stats() const;

private:
  GridConfig config_;
  RewardParams params_;
  SolveOptions options_;
  std::filesystem::path cache_dir_;
  mutable std::mutex mutex_;
  std::map<Hypothesis, std::shared_ptr<const ValueTables>> tables_;
  std::map<Hypothesis, Origin> origins_;
  Stats stats_;
};

std::map<Hypothesis, std::shared_ptr<const ValueTables>> solve_bank(
    const GridConfig& config, const std::vector<AgentModel>& models, const std::vector<Cell>& goals,
    const RewardParams& params, const SolveOptions& options = {});

// Every model hypothesis any trial on this grid can use: the three
// start-independent models plus one FixedGoal per human start.
std::vector<AgentModel> all_trial_models(const GridConfig& config);

} // namespace tom
