#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tom/inference.hpp"
#include "tom/planner.hpp"
#include "tom/trajectory.hpp"

namespace tom {

class PlanError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Stateless 64-bit mixer used to derive independent per-trial seeds.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

inline constexpr int kDefaultStepCap = 200;

// Rolls out a Boltzmann-rational human who holds `truth` as their mental
// model and goal, alternating with an agent that actually behaves like
// truth.model. Only human decisions are recorded as steps.
Trajectory simulate_human_trajectory(const TableBank& bank, const Hypothesis& truth, const Cell& human_start,
                                     const Cell& agent_start, double beta, std::uint64_t seed,
                                     int step_cap = kDefaultStepCap);

struct ExperimentPlan {
  GridConfig grid = default_grid();
  std::vector<ModelKind> conditions{kAllModelKinds.begin(), kAllModelKinds.end()};
  int trials_per_condition = 5;
  int participants = 25;
  double human_beta = 1.0;
  std::uint64_t seed = 1;
  RewardParams params;
  int step_cap = kDefaultStepCap;
  int max_attempts = 1000; // re-simulations per trial before giving up
  // Replaces every step likelihood with a constant (chance classifier).
  bool force_uniform_likelihood = false;

  void validate() const;
  int num_trials() const { return participants * static_cast<int>(conditions.size()) * trials_per_condition; }
};

inline constexpr int kCurveBuckets = 21; // 0%, 5%, ..., 100%

struct TrialResult {
  int index = 0;
  int participant = 0;
  Trajectory trajectory;
  int attempts = 1;
  // classification
  double top1_credit = 0.0;
  double top2_credit = 0.0;
  std::array<double, kNumModelKinds> top1_split{};
  std::array<double, kNumModelKinds> model_posterior{};
  // goal inference: correct-goal probability per bucket, by method
  std::map<std::string, std::array<double, kCurveBuckets>> goal_curve;
};

struct ExperimentReport {
  int trials = 0;
  double top1_accuracy = 0.0;
  double top2_accuracy = 0.0;
  // confusion[true][predicted], fractional counts after tie splitting
  std::array<std::array<double, kNumModelKinds>, kNumModelKinds> confusion{};
  std::map<std::string, std::array<double, kCurveBuckets>> goal_curves;
  std::vector<TrialResult> trial_results;

  // Off-diagonal mass inside {Stationary, FixedGoal} and {Random, Chasing}.
  double within_cluster_confusion() const;
  // Off-diagonal mass between the two clusters.
  double cross_cluster_confusion() const;
};

// Draws the trial layouts and simulates until each trial succeeds. Trials
// are simulated in parallel and returned in index order.
std::vector<TrialResult> simulate_plan(const ExperimentPlan& plan, const TableBank& bank);

// Known-goal model classification over the plan's successful trials.
ExperimentReport run_classification_experiment(const ExperimentPlan& plan, const TableBank& bank);

// Correct-goal probability curves. Methods: "joint" (uniform over
// model x goal, marginalized), "baseline" (Stationary tables only) and
// "known_model" (point mass on the true model).
ExperimentReport run_goal_inference_experiment(const ExperimentPlan& plan, const TableBank& bank);

// Step count after which bucket b (b * 5%) of a T-step trajectory is read.
int bucket_step(int bucket, int total_steps);

// Ensures the bank holds every table the plan can touch.
void prepare_bank(TableBank& bank);

struct TuningGrid {
  std::vector<double> goal_rewards;
  std::vector<double> action_costs;
  std::vector<double> discounts;
};

struct TuningPoint {
  RewardParams params;
  double log_likelihood = 0.0;
};

struct TuningResult {
  RewardParams best;
  std::vector<TuningPoint> scores; // grid order: goal reward, action cost, discount
};

// Returns the grid point maximizing the summed log-likelihood of the held-out
// trajectories under their labelled (model, goal). Collision penalty and beta
// come from `base`. Ties go to the first point in grid order.
TuningResult grid_search_tune(const GridConfig& config, const std::vector<Trajectory>& held_out,
                              const TuningGrid& grid, const RewardParams& base,
                              const SolveOptions& options = {});

} // namespace tom
