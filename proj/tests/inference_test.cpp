#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "test_support.hpp"
#include "tom/inference.hpp"
#include "tom/simulation.hpp"

namespace tom {
namespace {

double total(const std::vector<double>& p) { return std::accumulate(p.begin(), p.end(), 0.0); }

const TableBank& small_bank() {
  static const TableBank* bank = [] {
    auto* b = new TableBank(testing::small_grid(), RewardParams{});
    b->ensure(all_trial_models(b->config()), b->config().goal_cells);
    return b;
  }();
  return *bank;
}

const TableBank& default_bank() {
  static const TableBank* bank = [] {
    auto* b = new TableBank(default_grid(), RewardParams{});
    b->ensure(all_trial_models(b->config()), b->config().goal_cells);
    return b;
  }();
  return *bank;
}

Trajectory stationary_run(Cell start, Cell agent, Cell goal, const std::vector<Action>& moves) {
  Trajectory t;
  t.meta = {"fixture", ModelKind::Stationary, goal, start, agent, 0, Outcome::InProgress};
  EnvState s{start, agent, Status::Active};
  for (Action a : moves) {
    t.steps.push_back({s, a, Action::Stay});
    s = apply_human_move(default_grid(), s, a, goal);
  }
  t.meta.outcome = s.status == Status::GoalReached ? Outcome::GoalReached : Outcome::InProgress;
  return t;
}

TEST(LogSumExp, Basics) {
  const std::vector<double> xs{std::log(1.0), std::log(2.0), std::log(3.0)};
  EXPECT_NEAR(log_sum_exp(xs), std::log(6.0), 1e-15);
  const std::vector<double> big{1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(big), 1000.0 + std::log(2.0), 1e-12);
  EXPECT_EQ(log_sum_exp(std::vector<double>{}), -std::numeric_limits<double>::infinity());
}

TEST(Belief, ConstructionRules) {
  EXPECT_THROW(ModelBelief::uniform({}), std::invalid_argument);
  EXPECT_THROW(ModelBelief::uniform({AgentModel::random(), AgentModel::random()}), std::invalid_argument);
  const double ninf = -std::numeric_limits<double>::infinity();
  EXPECT_THROW(GoalBelief::from_log_weights({{0, 0}, {1, 0}}, {ninf, ninf}), std::domain_error);
  const auto b = GoalBelief::from_log_weights({{0, 0}, {1, 0}}, {5.0, 5.0});
  EXPECT_NEAR(b.prob(0), 0.5, 1e-15);
}

TEST(StepLikelihood, ZeroBetaIsUniformOverLegal) {
  const TableBank& bank = small_bank();
  for (const EnvState& s : enumerate_states(bank.config())) {
    const ActionSet legal = legal_actions(bank.config(), s.human);
    for (Action a : legal.to_vector()) {
      EXPECT_NEAR(step_log_likelihood(bank, {AgentModel::chasing(), {1, 0}}, s, a, 0.0),
                  -std::log(static_cast<double>(legal.size())), 1e-12);
    }
  }
}

TEST(StepLikelihood, TwoActionExample) {
  const std::array<double, kNumActions> q{3.0, 0.0, -std::numeric_limits<double>::infinity(),
                                          -std::numeric_limits<double>::infinity(),
                                          -std::numeric_limits<double>::infinity()};
  ActionSet legal;
  legal.insert(Action::Up);
  legal.insert(Action::Down);
  EXPECT_NEAR(std::log(softmax_legal(q, legal, 1.0)[0]), std::log(0.9525741268224334), 1e-12);
}

TEST(StepLikelihood, FiniteForVeryPoorActionsAtHighBeta) {
  // Walking into the agent costs far more than exp can resolve at beta = 50.
  const TableBank& bank = small_bank();
  const EnvState s{{1, 2}, {1, 1}, Status::Active};
  const double lp = step_log_likelihood(bank, {AgentModel::stationary(), {1, 0}}, s, Action::Up, 50.0);
  EXPECT_TRUE(std::isfinite(lp));
  EXPECT_LT(lp, -1000.0);
}

TEST(StepLikelihood, IllegalActionAndMissingHypothesis) {
  const TableBank& bank = small_bank();
  const EnvState s{{0, 2}, {1, 1}, Status::Active};
  EXPECT_THROW(step_log_likelihood(bank, {AgentModel::random(), {0, 0}}, s, Action::Left), DomainError);
  EXPECT_THROW(step_log_likelihood(bank, {AgentModel::fixed_goal({1, 1}), {0, 0}}, s, Action::Up),
               std::out_of_range);
}

// Posterior over {Stationary, Random} after three steps, recomputed in linear
// space straight from the solved Q tables.
struct Fixture {
  Cell goal{1, 0};
  std::vector<std::pair<EnvState, Action>> steps{
      {{{2, 2}, {0, 2}, Status::Active}, Action::Up},
      {{{2, 1}, {0, 2}, Status::Active}, Action::Left},
      {{{1, 1}, {0, 2}, Status::Active}, Action::Up},
  };
  std::vector<AgentModel> models{AgentModel::stationary(), AgentModel::random()};
};

double linear_prob(const ValueTables& t, const GridConfig& g, const EnvState& s, Action a) {
  double z = 0.0;
  for (Action b : legal_actions(g, s.human).to_vector()) z += std::exp(t.q_value(s, b));
  return std::exp(t.q_value(s, a)) / z;
}

TEST(ModelPosterior, ThreeStepHandFixture) {
  const TableBank& bank = small_bank();
  const Fixture f;
  std::vector<double> unnorm(f.models.size(), 0.5);
  for (std::size_t m = 0; m < f.models.size(); ++m) {
    for (const auto& [s, a] : f.steps) unnorm[m] *= linear_prob(bank.at(f.models[m], f.goal), bank.config(), s, a);
  }
  const double z = total(unnorm);

  ModelBelief b = ModelBelief::uniform(f.models);
  for (const auto& [s, a] : f.steps) b = update_model_posterior(b, bank, f.goal, s, a);
  for (std::size_t m = 0; m < f.models.size(); ++m) EXPECT_NEAR(b.prob(m), unnorm[m] / z, 1e-9);
  // Frozen from the first verified run; guards against silent table drift.
  EXPECT_NEAR(b.prob(0), 0.33330156, 1e-8);
}

TEST(ModelPosterior, EmptyObservationReturnsPriorExactly) {
  const auto prior = ModelBelief::from_log_weights(trial_models({0, 2}), {-1.0, -2.0, -0.5, -3.0});
  const std::vector<double> none(prior.size(), 0.0);
  const auto post = prior.updated(none);
  for (std::size_t i = 0; i < prior.size(); ++i) EXPECT_NEAR(post.log_weights()[i], prior.log_weights()[i], 1e-15);
}

TEST(ModelPosterior, EqualGapsLeavePrior) {
  // With beta = 0 every hypothesis assigns the same likelihood.
  const TableBank& bank = small_bank();
  const auto prior = ModelBelief::uniform(trial_models({0, 2}));
  const EnvState s{{0, 2}, {1, 1}, Status::Active};
  std::vector<double> ll;
  for (const AgentModel& m : prior.support()) ll.push_back(step_log_likelihood(bank, {m, {0, 0}}, s, Action::Up, 0.0));
  const auto post = prior.updated(ll);
  for (std::size_t i = 0; i < post.size(); ++i) EXPECT_NEAR(post.prob(i), 0.25, 1e-15);
}

Trajectory simulated(const TableBank& bank, Hypothesis truth, Cell start, Cell agent, double beta,
                     std::uint64_t seed) {
  return simulate_human_trajectory(bank, truth, start, agent, beta, seed);
}

TEST(PosteriorProperties, OrderBatchEquivalenceAndNormalization) {
  const TableBank& bank = default_bank();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Cell start = default_grid().human_start_cells[seed % 3];
    const Hypothesis truth{AgentModel::for_trial(kAllModelKinds[seed % 4], start),
                           default_grid().goal_cells[(seed / 3) % 3]};
    const Trajectory t = simulated(bank, truth, start, {4, 4}, 1.0, seed);
    const auto support = joint_support(trial_models(start), bank.config().goal_cells);

    JointBelief step = JointBelief::uniform(support);
    std::vector<double> summed(support.size(), 0.0);
    for (const TrajectoryStep& st : t.steps) {
      step = update_joint_posterior(step, bank, st.state, st.human);
      EXPECT_NEAR(total(step.probabilities()), 1.0, 1e-9);
      for (std::size_t i = 0; i < support.size(); ++i) summed[i] += step_log_likelihood(bank, support[i], st.state, st.human);
    }
    const JointBelief batch = JointBelief::uniform(support).updated(summed);

    JointBelief reversed = JointBelief::uniform(support);
    for (auto it = t.steps.rbegin(); it != t.steps.rend(); ++it) {
      reversed = update_joint_posterior(reversed, bank, it->state, it->human);
    }
    for (std::size_t i = 0; i < support.size(); ++i) {
      EXPECT_NEAR(step.prob(i), batch.prob(i), 1e-9);
      EXPECT_NEAR(step.prob(i), reversed.prob(i), 1e-9);
    }
  }
}

TEST(PosteriorProperties, CommonLikelihoodFactorIsIrrelevant) {
  const auto prior = ModelBelief::uniform(trial_models({4, 8}));
  const std::vector<double> ll{-0.3, -1.2, -2.5, -0.7};
  std::vector<double> shifted = ll;
  for (double& x : shifted) x += std::log(0.01);
  const auto a = prior.updated(ll);
  const auto b = prior.updated(shifted);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.prob(i), b.prob(i), 1e-12);
}

TEST(PosteriorProperties, GoalMarginalMatchesPerGoalBatchSums) {
  const TableBank& bank = default_bank();
  const Cell start{0, 8};
  const Trajectory t = simulated(bank, {AgentModel::random(), {4, 0}}, start, {3, 5}, 1.0, 77);
  const auto support = joint_support(trial_models(start), bank.config().goal_cells);

  JointBelief joint = JointBelief::uniform(support);
  for (const TrajectoryStep& st : t.steps) joint = update_joint_posterior(joint, bank, st.state, st.human);
  const GoalBelief marginal = goal_posterior(joint);

  std::map<Cell, double> per_goal;
  for (const Hypothesis& h : support) {
    double lp = 0.0;
    for (const TrajectoryStep& st : t.steps) lp += step_log_likelihood(bank, h, st.state, st.human);
    per_goal[h.goal] += std::exp(lp);
  }
  double z = 0.0;
  for (const auto& [g, w] : per_goal) z += w;
  for (const auto& [g, w] : per_goal) EXPECT_NEAR(marginal.prob_of(g), w / z, 1e-9);
  EXPECT_NEAR(total(marginal.probabilities()), 1.0, 1e-9);
  EXPECT_NEAR(total(model_posterior_marginal(joint).probabilities()), 1.0, 1e-9);
}

TEST(PosteriorProperties, ConditioningJointOnGoalGivesKnownGoalTrack) {
  const TableBank& bank = default_bank();
  const Cell start{8, 8};
  const Trajectory t = simulated(bank, {AgentModel::chasing(), {8, 0}}, start, {5, 4}, 1.0, 5);
  const BeliefTrace trace = replay_trajectory(bank, t);
  const JointBelief& joint = trace.joint.back();
  const ModelBelief& known = trace.model.back();
  double z = 0.0;
  for (const AgentModel& m : known.support()) z += joint.prob_of({m, t.meta.goal});
  for (const AgentModel& m : known.support()) EXPECT_NEAR(known.prob_of(m), joint.prob_of({m, t.meta.goal}) / z, 1e-9);
}

TEST(Marginals, Examples) {
  const auto models = trial_models({4, 8});
  const auto goals = default_grid().goal_cells;
  const auto uniform = JointBelief::uniform(joint_support(models, goals));
  for (std::size_t i = 0; i < uniform.size(); ++i) EXPECT_NEAR(uniform.prob(i), 1.0 / 12.0, 1e-15);
  for (double p : goal_posterior(uniform).probabilities()) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
  for (double p : model_posterior_marginal(uniform).probabilities()) EXPECT_NEAR(p, 0.25, 1e-15);

  const auto point = JointBelief::point_mass(joint_support(models, goals), {AgentModel::random(), goals[1]});
  EXPECT_NEAR(goal_posterior(point).prob_of(goals[1]), 1.0, 1e-15);

  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> w(12, ninf);
  w[0] = 0.0;  // (stationary, goal 0)
  w[10] = 0.0; // (chasing, goal 1)
  const auto two = JointBelief::from_log_weights(joint_support(models, goals), w);
  const auto m = model_posterior_marginal(two);
  EXPECT_NEAR(m.prob_of(AgentModel::stationary()), 0.5, 1e-15);
  EXPECT_NEAR(m.prob_of(AgentModel::chasing()), 0.5, 1e-15);
  EXPECT_EQ(m.prob_of(AgentModel::random()), 0.0);
}

TEST(BaselineGoal, MatchesJointWithStationaryPointMass) {
  const TableBank& bank = default_bank();
  const Cell start{4, 8};
  const Trajectory t = simulated(bank, {AgentModel::stationary(), {0, 0}}, start, {4, 5}, 1.0, 9);
  const auto goals = bank.config().goal_cells;
  GoalBelief base = GoalBelief::uniform(goals);
  JointBelief joint = JointBelief::point_mass(joint_support(trial_models(start), goals), {AgentModel::stationary(), goals[0]});
  // Spread the point mass across goals on the Stationary row.
  {
    const double ninf = -std::numeric_limits<double>::infinity();
    std::vector<double> w(joint.size(), ninf);
    for (std::size_t i = 0; i < joint.size(); ++i) {
      if (joint.support()[i].model == AgentModel::stationary()) w[i] = 0.0;
    }
    joint = JointBelief::from_log_weights(joint.support(), w);
  }
  for (double p : base.probabilities()) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
  for (const TrajectoryStep& st : t.steps) {
    base = baseline_goal_posterior(bank, base, st.state, st.human);
    joint = update_joint_posterior(joint, bank, st.state, st.human);
    const GoalBelief g = goal_posterior(joint);
    for (const Cell& c : goals) EXPECT_NEAR(base.prob_of(c), g.prob_of(c), 1e-9);
  }
}

TEST(BaselineGoal, NearGreedyHumanIsRecognized) {
  const TableBank& bank = default_bank();
  const Trajectory t = simulated(bank, {AgentModel::stationary(), {8, 0}}, {4, 8}, {4, 4}, 10.0, 3);
  ASSERT_TRUE(t.success());
  GoalBelief b = GoalBelief::uniform(bank.config().goal_cells);
  for (const TrajectoryStep& st : t.steps) b = baseline_goal_posterior(bank, b, st.state, st.human);
  EXPECT_GT(b.prob_of({8, 0}), 0.9);
}

TEST(JointPosterior, NearGreedyChasingMiddleGoalIsArgmax) {
  const TableBank& bank = default_bank();
  const Cell start{4, 8};
  const Hypothesis truth{AgentModel::chasing(), {4, 0}};
  const Trajectory t = simulated(bank, truth, start, {4, 4}, 10.0, 11);
  ASSERT_TRUE(t.success());
  const JointBelief joint = replay_trajectory(bank, t).joint.back();
  const auto p = joint.probabilities();
  const std::size_t best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  EXPECT_EQ(joint.support()[best], truth) << to_string(joint.support()[best]);
}

TEST(Classify, EmptyTrajectoryIsFourWayTie) {
  const TableBank& bank = default_bank();
  Trajectory t;
  t.meta = {"empty", ModelKind::Random, {0, 0}, {0, 8}, {4, 4}, 0, Outcome::InProgress};
  const Classification c = classify_model(t, bank, {0, 0});
  ASSERT_EQ(c.ranking.size(), 4u);
  for (const RankedModel& r : c.ranking) {
    EXPECT_NEAR(r.posterior, 0.25, 1e-15);
    EXPECT_EQ(r.rank_first, 0u);
    EXPECT_EQ(r.rank_last, 3u);
    EXPECT_NEAR(c.top1_share(r.model), 0.25, 1e-15);
    EXPECT_NEAR(c.top_k_credit(r.model, 2), 0.5, 1e-15);
  }
}

TEST(Classify, HuggingRouteFavoursStaticModels) {
  using enum Action;
  const Trajectory t = stationary_run({4, 8}, {4, 4}, {4, 0}, {Up, Up, Up, Left, Up, Up, Right, Up, Up, Up});
  ASSERT_TRUE(t.success());
  const ModelBelief b = replay_trajectory(default_bank(), t).model.back();
  const double stat = std::max(b.prob_of(AgentModel::stationary()), b.prob_of(AgentModel::fixed_goal({4, 8})));
  EXPECT_GT(stat, b.prob_of(AgentModel::random()));
  EXPECT_GT(stat, b.prob_of(AgentModel::chasing()));
}

TEST(Classify, WallRouteFavoursMovingModels) {
  using enum Action;
  std::vector<Action> moves(4, Left);
  moves.insert(moves.end(), 7, Up);
  moves.insert(moves.end(), 4, Right);
  moves.push_back(Up);
  const Trajectory t = stationary_run({4, 8}, {4, 4}, {4, 0}, moves);
  ASSERT_TRUE(t.success());
  const ModelBelief b = replay_trajectory(default_bank(), t).model.back();
  const double moving = std::max(b.prob_of(AgentModel::random()), b.prob_of(AgentModel::chasing()));
  EXPECT_GT(moving, b.prob_of(AgentModel::stationary()));
}

TEST(Classify, TiesSplitFractionally) {
  const double ninf = -std::numeric_limits<double>::infinity();
  const auto b = ModelBelief::from_log_weights(trial_models({0, 8}), {0.0, 0.0, -1.0, ninf});
  const Classification c = rank_models(b);
  EXPECT_NEAR(c.top1_share(AgentModel::stationary()), 0.5, 1e-15);
  EXPECT_NEAR(c.top1_share(AgentModel::random()), 0.5, 1e-15);
  EXPECT_EQ(c.top1_share(AgentModel::fixed_goal({0, 8})), 0.0);
  EXPECT_NEAR(c.top_k_credit(AgentModel::random(), 2), 1.0, 1e-15);
  EXPECT_NEAR(c.top_k_credit(AgentModel::fixed_goal({0, 8}), 2), 0.0, 1e-15);
  EXPECT_NEAR(c.top_k_credit(AgentModel::fixed_goal({0, 8}), 3), 1.0, 1e-15);
}

// Mean posterior on the generating model grows with the generating human's beta.
TEST(BayesConsistency, MoreRationalHumansAreEasierToRead) {
  const TableBank& bank = default_bank();
  const GridConfig& g = bank.config();
  std::vector<double> means;
  for (double beta : {0.5, 1.0, 10.0}) {
    double acc = 0.0;
    int n = 0;
    for (std::uint64_t seed = 0; seed < 600; ++seed) {
      const Cell start = g.human_start_cells[seed % 3];
      const AgentModel truth = AgentModel::for_trial(kAllModelKinds[(seed / 3) % 4], start);
      const Cell goal = g.goal_cells[(seed / 12) % 3];
      const Cell agent = g.agent_spawn_region[(seed * 7) % g.agent_spawn_region.size()];
      Trajectory t;
      std::uint64_t s = derive_seed(seed, 1);
      do {
        t = simulated(bank, {truth, goal}, start, agent, beta, s++);
      } while (!t.success());
      acc += replay_trajectory(bank, t).model.back().prob_of(truth);
      ++n;
    }
    means.push_back(acc / n);
  }
  EXPECT_LE(means[0], means[1]);
  EXPECT_LE(means[1], means[2]);
}

} // namespace
} // namespace tom
