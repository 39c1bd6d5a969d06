#include "tom/simulation.hpp"

#include <exception>
#include <random>
#include <set>

namespace tom {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(base) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

Trajectory simulate_human_trajectory(const TableBank& bank, const Hypothesis& truth, const Cell& human_start,
                                     const Cell& agent_start, double beta, std::uint64_t seed, int step_cap) {
  const GridConfig& config = bank.config();
  if (human_start == agent_start) throw DomainError("human and agent must start on distinct cells");
  if (!config.is_free(human_start) || !config.is_free(agent_start)) throw DomainError("start cell is not free");
  const ValueTables& tables = bank.at(truth);

  Trajectory traj;
  traj.meta.condition = truth.model.kind;
  traj.meta.goal = truth.goal;
  traj.meta.human_start = human_start;
  traj.meta.agent_start = agent_start;
  traj.meta.seed = seed;

  std::mt19937_64 rng(seed);
  EnvState s{human_start, agent_start, Status::Active};
  if (s.human == truth.goal) {
    traj.meta.outcome = Outcome::GoalReached;
    return traj;
  }
  for (int t = 0; t < step_cap; ++t) {
    const ActionSet legal = legal_actions(config, s.human);
    const Action a_h = sample_action(softmax_legal(tables.q_row(tables.state_index(s)), legal, beta), rng);
    const EnvState mid = apply_human_move(config, s, a_h, truth.goal);
    if (mid.status != Status::Active) {
      traj.steps.push_back({s, a_h, std::nullopt});
      traj.meta.outcome = mid.status == Status::GoalReached ? Outcome::GoalReached : Outcome::Collided;
      return traj;
    }
    const Action a_r = sample_agent_action(config, truth.model, mid, rng);
    traj.steps.push_back({s, a_h, a_r});
    s = apply_agent_move(config, mid, a_r);
    if (s.status == Status::Collided) {
      traj.meta.outcome = Outcome::Collided;
      return traj;
    }
  }
  traj.meta.outcome = Outcome::Truncated;
  return traj;
}

void ExperimentPlan::validate() const {
  grid.validate();
  params.validate();
  if (conditions.empty()) throw PlanError("plan needs at least one condition");
  if (trials_per_condition < 1) throw PlanError("trials_per_condition must be >= 1");
  if (participants < 1) throw PlanError("participants must be >= 1");
  if (!(human_beta >= 0.0)) throw PlanError("human beta must be >= 0");
  if (step_cap < 1) throw PlanError("step cap must be >= 1");
  if (max_attempts < 1) throw PlanError("max_attempts must be >= 1");
  std::set<ModelKind> seen(conditions.begin(), conditions.end());
  if (seen.size() != conditions.size()) throw PlanError("conditions listed twice");
}

double ExperimentReport::within_cluster_confusion() const {
  const auto s = static_cast<std::size_t>(ModelKind::Stationary);
  const auto f = static_cast<std::size_t>(ModelKind::FixedGoal);
  const auto r = static_cast<std::size_t>(ModelKind::Random);
  const auto c = static_cast<std::size_t>(ModelKind::Chasing);
  return confusion[s][f] + confusion[f][s] + confusion[r][c] + confusion[c][r];
}

double ExperimentReport::cross_cluster_confusion() const {
  double off = 0.0;
  for (std::size_t i = 0; i < kNumModelKinds; ++i) {
    for (std::size_t j = 0; j < kNumModelKinds; ++j) {
      if (i != j) off += confusion[i][j];
    }
  }
  return off - within_cluster_confusion();
}

int bucket_step(int bucket, int total_steps) {
  // round(bucket * T / 20), halves rounded up
  return (2 * bucket * total_steps + kCurveBuckets - 1) / (2 * (kCurveBuckets - 1));
}

void prepare_bank(TableBank& bank) {
  bank.ensure(all_trial_models(bank.config()), bank.config().goal_cells);
}

namespace {

template <class Fn>
void parallel_trials(int count, Fn&& fn) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) {
    try {
      fn(i);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <class T>
const T& pick(const std::vector<T>& xs, std::mt19937_64& rng) {
  return xs[static_cast<std::size_t>(rng() % xs.size())];
}

} // namespace

std::vector<TrialResult> simulate_plan(const ExperimentPlan& plan, const TableBank& bank) {
  plan.validate();
  if (!(bank.config() == plan.grid)) throw PlanError("table bank was solved for a different grid");
  const int per_participant = static_cast<int>(plan.conditions.size()) * plan.trials_per_condition;
  std::vector<TrialResult> results(static_cast<std::size_t>(plan.num_trials()));

  parallel_trials(plan.num_trials(), [&](int i) {
    TrialResult& r = results[static_cast<std::size_t>(i)];
    r.index = i;
    r.participant = i / per_participant;
    const ModelKind kind = plan.conditions[static_cast<std::size_t>((i / plan.trials_per_condition) %
                                                                    static_cast<int>(plan.conditions.size()))];
    std::mt19937_64 layout_rng(derive_seed(plan.seed, static_cast<std::uint64_t>(i)));
    const Cell goal = pick(plan.grid.goal_cells, layout_rng);
    const Cell human_start = pick(plan.grid.human_start_cells, layout_rng);
    Cell agent_start = pick(plan.grid.agent_spawn_region, layout_rng);
    for (int redraw = 0; agent_start == human_start; ++redraw) {
      if (redraw > 1000) throw PlanError("agent spawn region only contains the human start");
      agent_start = pick(plan.grid.agent_spawn_region, layout_rng);
    }
    const Hypothesis truth{AgentModel::for_trial(kind, human_start), goal};

    for (int attempt = 0; attempt < plan.max_attempts; ++attempt) {
      const std::uint64_t seed = derive_seed(plan.seed, static_cast<std::uint64_t>(i),
                                             static_cast<std::uint64_t>(attempt) + 1);
      Trajectory t = simulate_human_trajectory(bank, truth, human_start, agent_start, plan.human_beta, seed,
                                               plan.step_cap);
      if (t.success()) {
        t.meta.trial_id = "trial-" + std::to_string(i);
        r.trajectory = std::move(t);
        r.attempts = attempt + 1;
        return;
      }
    }
    throw PlanError("trial " + std::to_string(i) + " (" + to_string(truth) + ") never succeeded in " +
                    std::to_string(plan.max_attempts) + " attempts");
  });
  return results;
}

ExperimentReport run_classification_experiment(const ExperimentPlan& plan, const TableBank& bank) {
  ExperimentReport report;
  report.trial_results = simulate_plan(plan, bank);
  const int n = static_cast<int>(report.trial_results.size());

  parallel_trials(n, [&](int i) {
    TrialResult& r = report.trial_results[static_cast<std::size_t>(i)];
    const Trajectory& traj = r.trajectory;
    ModelBelief belief = ModelBelief::uniform(trial_models(traj.meta.human_start));
    if (!plan.force_uniform_likelihood) {
      for (const TrajectoryStep& st : traj.steps) {
        belief = update_model_posterior(belief, bank, traj.meta.goal, st.state, st.human);
      }
    }
    const Classification c = rank_models(belief);
    const AgentModel truth = traj.true_model();
    r.top1_credit = c.top_k_credit(truth, 1);
    r.top2_credit = c.top_k_credit(truth, 2);
    for (std::size_t k = 0; k < belief.size(); ++k) {
      const AgentModel& m = belief.support()[k];
      const auto kind = static_cast<std::size_t>(m.kind);
      r.top1_split[kind] = c.top1_share(m);
      r.model_posterior[kind] = belief.prob(k);
    }
  });

  for (const TrialResult& r : report.trial_results) {
    report.top1_accuracy += r.top1_credit;
    report.top2_accuracy += r.top2_credit;
    const auto row = static_cast<std::size_t>(r.trajectory.meta.condition);
    for (std::size_t k = 0; k < kNumModelKinds; ++k) report.confusion[row][k] += r.top1_split[k];
  }
  report.trials = n;
  if (n > 0) {
    report.top1_accuracy /= n;
    report.top2_accuracy /= n;
  }
  return report;
}

ExperimentReport run_goal_inference_experiment(const ExperimentPlan& plan, const TableBank& bank) {
  ExperimentReport report;
  report.trial_results = simulate_plan(plan, bank);
  const int n = static_cast<int>(report.trial_results.size());
  const std::vector<Cell>& goals = plan.grid.goal_cells;

  parallel_trials(n, [&](int i) {
    TrialResult& r = report.trial_results[static_cast<std::size_t>(i)];
    const Trajectory& traj = r.trajectory;
    const std::vector<AgentModel> models = trial_models(traj.meta.human_start);
    const std::vector<Hypothesis> support = joint_support(models, goals);

    JointBelief joint = JointBelief::uniform(support);
    std::vector<double> known_lw;
    for (const Hypothesis& h : support) {
      known_lw.push_back(h.model == traj.true_model() ? 0.0 : -std::numeric_limits<double>::infinity());
    }
    JointBelief known = JointBelief::from_log_weights(support, known_lw);
    GoalBelief baseline = GoalBelief::uniform(goals);

    const std::size_t steps = traj.steps.size();
    std::vector<double> p_joint{goal_posterior(joint).prob_of(traj.meta.goal)};
    std::vector<double> p_base{baseline.prob_of(traj.meta.goal)};
    std::vector<double> p_known{goal_posterior(known).prob_of(traj.meta.goal)};
    for (const TrajectoryStep& st : traj.steps) {
      joint = update_joint_posterior(joint, bank, st.state, st.human);
      known = update_joint_posterior(known, bank, st.state, st.human);
      baseline = baseline_goal_posterior(bank, baseline, st.state, st.human);
      p_joint.push_back(goal_posterior(joint).prob_of(traj.meta.goal));
      p_known.push_back(goal_posterior(known).prob_of(traj.meta.goal));
      p_base.push_back(baseline.prob_of(traj.meta.goal));
    }
    for (int b = 0; b < kCurveBuckets; ++b) {
      const auto t = static_cast<std::size_t>(bucket_step(b, static_cast<int>(steps)));
      r.goal_curve["joint"][static_cast<std::size_t>(b)] = p_joint[t];
      r.goal_curve["baseline"][static_cast<std::size_t>(b)] = p_base[t];
      r.goal_curve["known_model"][static_cast<std::size_t>(b)] = p_known[t];
    }
  });

  for (const TrialResult& r : report.trial_results) {
    for (const auto& [method, curve] : r.goal_curve) {
      auto& acc = report.goal_curves[method];
      for (int b = 0; b < kCurveBuckets; ++b) acc[static_cast<std::size_t>(b)] += curve[static_cast<std::size_t>(b)];
    }
  }
  report.trials = n;
  for (auto& [_, curve] : report.goal_curves) {
    for (double& v : curve) v /= n;
  }
  return report;
}

TuningResult grid_search_tune(const GridConfig& config, const std::vector<Trajectory>& held_out,
                              const TuningGrid& grid, const RewardParams& base, const SolveOptions& options) {
  if (grid.goal_rewards.empty() || grid.action_costs.empty() || grid.discounts.empty()) {
    throw DomainError("tuning grid has an empty axis");
  }
  if (held_out.empty()) throw DomainError("tuning needs at least one held-out trajectory");

  std::vector<AgentModel> models;
  std::vector<Cell> goals;
  for (const Trajectory& t : held_out) {
    validate_trajectory(config, t);
    if (std::find(models.begin(), models.end(), t.true_model()) == models.end()) models.push_back(t.true_model());
    if (std::find(goals.begin(), goals.end(), t.meta.goal) == goals.end()) goals.push_back(t.meta.goal);
  }

  TuningResult result;
  bool have_best = false;
  double best_ll = 0.0;
  for (double g : grid.goal_rewards) {
    for (double c : grid.action_costs) {
      for (double d : grid.discounts) {
        RewardParams p = base;
        p.goal_reward = g;
        p.action_cost = c;
        p.discount = d;
        TableBank bank(config, p, options);
        bank.ensure(models, goals);
        double ll = 0.0;
        for (const Trajectory& t : held_out) {
          ll += trajectory_log_likelihood(bank, {t.true_model(), t.meta.goal}, t, base.beta);
        }
        result.scores.push_back({p, ll});
        if (!have_best || ll > best_ll) {
          have_best = true;
          best_ll = ll;
          result.best = p;
        }
      }
    }
  }
  return result;
}

} // namespace tom
