#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "tom/planner.hpp"
#include "tom/trajectory.hpp"

namespace tom {

// Natural-log sum of exponentials; -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> xs);

// Normalized distribution over a finite, duplicate-free hypothesis list,
// stored as log probabilities. Zero-mass hypotheses hold -inf.
template <class H>
class Belief {
public:
  Belief() = default;

  static Belief uniform(std::vector<H> support) {
    const double lw = -std::log(static_cast<double>(support.size()));
    std::vector<double> w(support.size(), lw);
    return Belief(std::move(support), std::move(w));
  }

  static Belief from_log_weights(std::vector<H> support, std::vector<double> log_weights) {
    return Belief(std::move(support), std::move(log_weights));
  }

  static Belief point_mass(std::vector<H> support, const H& at) {
    std::vector<double> w(support.size(), -std::numeric_limits<double>::infinity());
    auto it = std::find(support.begin(), support.end(), at);
    if (it == support.end()) throw std::invalid_argument("point mass outside the support");
    w[static_cast<std::size_t>(it - support.begin())] = 0.0;
    return Belief(std::move(support), std::move(w));
  }

  const std::vector<H>& support() const { return support_; }
  const std::vector<double>& log_weights() const { return log_weights_; }
  std::size_t size() const { return support_.size(); }

  double prob(std::size_t i) const { return std::exp(log_weights_[i]); }
  std::vector<double> probabilities() const {
    std::vector<double> p(size());
    for (std::size_t i = 0; i < size(); ++i) p[i] = prob(i);
    return p;
  }
  std::size_t index_of(const H& h) const {
    auto it = std::find(support_.begin(), support_.end(), h);
    if (it == support_.end()) throw std::out_of_range("hypothesis not in belief support");
    return static_cast<std::size_t>(it - support_.begin());
  }
  double prob_of(const H& h) const { return prob(index_of(h)); }

  // Bayes update: posterior proportional to prior times exp(log_likelihood).
  Belief updated(std::span<const double> log_likelihoods) const {
    if (log_likelihoods.size() != size()) throw std::invalid_argument("likelihood vector size mismatch");
    std::vector<double> w(size());
    for (std::size_t i = 0; i < size(); ++i) w[i] = log_weights_[i] + log_likelihoods[i];
    return Belief(support_, std::move(w));
  }

private:
  Belief(std::vector<H> support, std::vector<double> log_weights)
      : support_(std::move(support)), log_weights_(std::move(log_weights)) {
    if (support_.empty()) throw std::invalid_argument("belief support must be non-empty");
    if (support_.size() != log_weights_.size()) throw std::invalid_argument("support/weight size mismatch");
    for (std::size_t i = 0; i < support_.size(); ++i) {
      for (std::size_t j = i + 1; j < support_.size(); ++j) {
        if (support_[i] == support_[j]) throw std::invalid_argument("belief support has duplicates");
      }
    }
    const double z = log_sum_exp(log_weights_);
    if (!std::isfinite(z)) throw std::domain_error("belief has no finite mass");
    for (double& w : log_weights_) w -= z;
  }

  std::vector<H> support_;
  std::vector<double> log_weights_;
};

using ModelBelief = Belief<AgentModel>;
using GoalBelief = Belief<Cell>;
using JointBelief = Belief<Hypothesis>;

// All (model, goal) pairs for one trial, model-major.
std::vector<Hypothesis> joint_support(const std::vector<AgentModel>& models, const std::vector<Cell>& goals);

// log p(a_h | s, hypothesis) under the Boltzmann policy with the given beta.
double step_log_likelihood(const TableBank& bank, const Hypothesis& h, const EnvState& s, Action a_h,
                           double beta);
// Same with the bank's configured beta.
double step_log_likelihood(const TableBank& bank, const Hypothesis& h, const EnvState& s, Action a_h);

ModelBelief update_model_posterior(const ModelBelief& belief, const TableBank& bank, const Cell& goal,
                                   const EnvState& s, Action a_h);
JointBelief update_joint_posterior(const JointBelief& belief, const TableBank& bank, const EnvState& s,
                                   Action a_h);
// Goal-only update that treats the agent as a fixed obstacle, i.e. scores
// every goal with the Stationary-model tables.
GoalBelief baseline_goal_posterior(const TableBank& bank, const GoalBelief& belief, const EnvState& s,
                                   Action a_h);

GoalBelief goal_posterior(const JointBelief& joint);
ModelBelief model_posterior_marginal(const JointBelief& joint);

// Summed step log-likelihood of a trajectory under one hypothesis.
double trajectory_log_likelihood(const TableBank& bank, const Hypothesis& h, const Trajectory& traj,
                                 double beta);

// Posterior entry with its tie group: positions [rank_first, rank_last] in
// the descending order are shared by hypotheses with exactly equal weight.
struct RankedModel {
  AgentModel model;
  double posterior = 0.0;
  std::size_t rank_first = 0;
  std::size_t rank_last = 0;
};

struct Classification {
  std::vector<RankedModel> ranking; // descending posterior

  // Fractional credit that `truth` falls within the top k, splitting tied
  // ranks evenly across the tied models.
  double top_k_credit(const AgentModel& truth, std::size_t k) const;
  // Top-1 classification mass for `model` after tie splitting.
  double top1_share(const AgentModel& model) const;
};

Classification rank_models(const ModelBelief& belief);

// Per-step beliefs of both tracks for a trajectory, starting from uniform
// priors over the trial's hypotheses; entry t holds the belief after t steps.
struct BeliefTrace {
  std::vector<ModelBelief> model; // known goal (the trajectory's label)
  std::vector<JointBelief> joint;
};

BeliefTrace replay_trajectory(const TableBank& bank, const Trajectory& traj);

// Known-goal model classification of a whole trajectory from a uniform prior
// over the trial's four model hypotheses.
Classification classify_model(const Trajectory& traj, const TableBank& bank, const Cell& known_goal);

} // namespace tom
