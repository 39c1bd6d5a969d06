#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "tom/gridworld.hpp"

namespace tom {

// Probability per action, indexed by static_cast<size_t>(Action).
using ActionDistribution = std::array<double, kNumActions>;

enum class ModelKind : std::uint8_t { Stationary = 0, Random = 1, FixedGoal = 2, Chasing = 3 };

inline constexpr std::size_t kNumModelKinds = 4;
inline constexpr std::array<ModelKind, kNumModelKinds> kAllModelKinds = {
    ModelKind::Stationary, ModelKind::Random, ModelKind::FixedGoal, ModelKind::Chasing};

std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view name);

// Subintentional agent model: a fixed map from environment state to a
// distribution over agent actions. `target` is meaningful for FixedGoal only.
struct AgentModel {
  ModelKind kind = ModelKind::Stationary;
  Cell target{};

  static AgentModel stationary() { return {ModelKind::Stationary, {}}; }
  static AgentModel random() { return {ModelKind::Random, {}}; }
  static AgentModel fixed_goal(Cell target) { return {ModelKind::FixedGoal, target}; }
  static AgentModel chasing() { return {ModelKind::Chasing, {}}; }

  // Instantiates a condition for a trial whose human starts at `human_start`.
  static AgentModel for_trial(ModelKind kind, Cell human_start);

  friend bool operator==(const AgentModel& a, const AgentModel& b) {
    return a.kind == b.kind && (a.kind != ModelKind::FixedGoal || a.target == b.target);
  }
  friend bool operator<(const AgentModel& a, const AgentModel& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    if (a.kind != ModelKind::FixedGoal) return false;
    return a.target < b.target;
  }
};

std::string to_string(const AgentModel& m);

// The four model hypotheses of a trial, in kAllModelKinds order.
std::vector<AgentModel> trial_models(Cell human_start);

ActionDistribution agent_policy(const GridConfig& config, const AgentModel& model,
                                const EnvState& s);

// Uniform double in [0, 1) from the top 53 bits of one 64-bit draw.
inline double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Inverse-CDF sample from a distribution; zero-probability entries are never
// returned.
Action sample_action(const ActionDistribution& dist, std::mt19937_64& rng);

Action sample_agent_action(const GridConfig& config, const AgentModel& model, const EnvState& s,
                           std::mt19937_64& rng);

} // namespace tom
