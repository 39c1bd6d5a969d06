#include "tom/inference.hpp"

#include <array>
#include <map>

namespace tom {

double log_sum_exp(std::span<const double> xs) {
  double top = -std::numeric_limits<double>::infinity();
  for (double x : xs) top = std::max(top, x);
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - top);
  return top + std::log(acc);
}

std::vector<Hypothesis> joint_support(const std::vector<AgentModel>& models, const std::vector<Cell>& goals) {
  std::vector<Hypothesis> out;
  out.reserve(models.size() * goals.size());
  for (const AgentModel& m : models) {
    for (const Cell& g : goals) out.push_back({m, g});
  }
  return out;
}

double step_log_likelihood(const TableBank& bank, const Hypothesis& h, const EnvState& s, Action a_h,
                           double beta) {
  const ValueTables& t = bank.at(h);
  const ActionSet legal = legal_actions(bank.config(), s.human);
  if (!legal.contains(a_h)) {
    throw DomainError("illegal human action '" + std::string(to_string(a_h)) + "' at " + to_string(s.human));
  }
  // Log-softmax evaluated directly so that large gaps stay finite.
  const auto q = t.q_row(t.state_index(s));
  std::array<double, kNumActions> scaled{};
  std::size_t n = 0;
  for (Action a : legal.to_vector()) scaled[n++] = beta * q[static_cast<std::size_t>(a)];
  const double lp = beta * q[static_cast<std::size_t>(a_h)] - log_sum_exp(std::span<const double>(scaled.data(), n));
  if (!std::isfinite(lp)) throw std::domain_error("non-finite step likelihood for " + to_string(h));
  return lp;
}

double step_log_likelihood(const TableBank& bank, const Hypothesis& h, const EnvState& s, Action a_h) {
  return step_log_likelihood(bank, h, s, a_h, bank.params().beta);
}

ModelBelief update_model_posterior(const ModelBelief& belief, const TableBank& bank, const Cell& goal,
                                   const EnvState& s, Action a_h) {
  std::vector<double> ll(belief.size());
  for (std::size_t i = 0; i < belief.size(); ++i) {
    ll[i] = step_log_likelihood(bank, {belief.support()[i], goal}, s, a_h);
  }
  return belief.updated(ll);
}

JointBelief update_joint_posterior(const JointBelief& belief, const TableBank& bank, const EnvState& s,
                                   Action a_h) {
  std::vector<double> ll(belief.size());
  for (std::size_t i = 0; i < belief.size(); ++i) {
    ll[i] = step_log_likelihood(bank, belief.support()[i], s, a_h);
  }
  return belief.updated(ll);
}

GoalBelief baseline_goal_posterior(const TableBank& bank, const GoalBelief& belief, const EnvState& s,
                                   Action a_h) {
  std::vector<double> ll(belief.size());
  for (std::size_t i = 0; i < belief.size(); ++i) {
    ll[i] = step_log_likelihood(bank, {AgentModel::stationary(), belief.support()[i]}, s, a_h);
  }
  return belief.updated(ll);
}

namespace {

// Groups joint log-weights by a key in first-seen order and sums them.
template <class K, class KeyFn>
Belief<K> marginalize(const JointBelief& joint, KeyFn key_of) {
  std::vector<K> keys;
  std::vector<std::vector<double>> parts;
  for (std::size_t i = 0; i < joint.size(); ++i) {
    const K k = key_of(joint.support()[i]);
    auto it = std::find(keys.begin(), keys.end(), k);
    if (it == keys.end()) {
      keys.push_back(k);
      parts.push_back({joint.log_weights()[i]});
    } else {
      parts[static_cast<std::size_t>(it - keys.begin())].push_back(joint.log_weights()[i]);
    }
  }
  std::vector<double> w;
  w.reserve(parts.size());
  for (const auto& p : parts) w.push_back(log_sum_exp(p));
  return Belief<K>::from_log_weights(std::move(keys), std::move(w));
}

} // namespace

GoalBelief goal_posterior(const JointBelief& joint) {
  return marginalize<Cell>(joint, [](const Hypothesis& h) { return h.goal; });
}

ModelBelief model_posterior_marginal(const JointBelief& joint) {
  return marginalize<AgentModel>(joint, [](const Hypothesis& h) { return h.model; });
}

double trajectory_log_likelihood(const TableBank& bank, const Hypothesis& h, const Trajectory& traj,
                                 double beta) {
  double total = 0.0;
  for (const TrajectoryStep& st : traj.steps) total += step_log_likelihood(bank, h, st.state, st.human, beta);
  return total;
}

double Classification::top_k_credit(const AgentModel& truth, std::size_t k) const {
  for (const RankedModel& r : ranking) {
    if (!(r.model == truth)) continue;
    const std::size_t group = r.rank_last - r.rank_first + 1;
    const std::size_t inside = r.rank_first >= k ? 0 : std::min(k, r.rank_last + 1) - r.rank_first;
    return static_cast<double>(inside) / static_cast<double>(group);
  }
  return 0.0;
}

double Classification::top1_share(const AgentModel& model) const {
  return top_k_credit(model, 1);
}

Classification rank_models(const ModelBelief& belief) {
  Classification c;
  for (std::size_t i = 0; i < belief.size(); ++i) {
    c.ranking.push_back({belief.support()[i], belief.prob(i), 0, 0});
  }
  // Exact comparison on the stored log weights: equal likelihood products
  // give bit-identical weights.
  std::vector<double> lw = belief.log_weights();
  std::vector<std::size_t> order(belief.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lw[a] > lw[b]; });
  std::vector<RankedModel> sorted;
  for (std::size_t pos = 0; pos < order.size();) {
    std::size_t end = pos;
    while (end + 1 < order.size() && lw[order[end + 1]] == lw[order[pos]]) ++end;
    for (std::size_t j = pos; j <= end; ++j) {
      RankedModel r = c.ranking[order[j]];
      r.rank_first = pos;
      r.rank_last = end;
      sorted.push_back(r);
    }
    pos = end + 1;
  }
  c.ranking = std::move(sorted);
  return c;
}

BeliefTrace replay_trajectory(const TableBank& bank, const Trajectory& traj) {
  validate_trajectory(bank.config(), traj);
  const std::vector<AgentModel> models = trial_models(traj.meta.human_start);
  BeliefTrace out;
  out.model.push_back(ModelBelief::uniform(models));
  out.joint.push_back(JointBelief::uniform(joint_support(models, bank.config().goal_cells)));
  for (const TrajectoryStep& st : traj.steps) {
    out.model.push_back(update_model_posterior(out.model.back(), bank, traj.meta.goal, st.state, st.human));
    out.joint.push_back(update_joint_posterior(out.joint.back(), bank, st.state, st.human));
  }
  return out;
}

Classification classify_model(const Trajectory& traj, const TableBank& bank, const Cell& known_goal) {
  validate_trajectory(bank.config(), traj);
  ModelBelief belief = ModelBelief::uniform(trial_models(traj.meta.human_start));
  for (const TrajectoryStep& st : traj.steps) {
    belief = update_model_posterior(belief, bank, known_goal, st.state, st.human);
  }
  return rank_models(belief);
}

} // namespace tom
