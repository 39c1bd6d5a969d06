#include "tom/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <limits>

namespace tom {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

} // namespace

void RewardParams::validate() const {
  if (!(discount > 0.0 && discount < 1.0)) {
    throw DomainError("discount must lie in (0, 1), got " + std::to_string(discount));
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw DomainError("beta must be finite and >= 0");
  if (!(action_cost <= 0.0)) throw DomainError("action cost must be <= 0");
  if (!(collision_penalty <= 0.0)) throw DomainError("collision penalty must be <= 0");
  if (!(goal_reward > 0.0) || !std::isfinite(goal_reward)) throw DomainError("goal reward must be > 0");
}

TurnDynamics TurnDynamics::build(const GridConfig& config, const StateIndex& index,
                                 const AgentModel& model, const Cell& goal,
                                 const RewardParams& params) {
  const std::size_t n = index.size();
  TurnDynamics dyn;
  dyn.num_states = n;
  dyn.human_legal.assign(n * kNumActions, 0);
  dyn.human_next.assign(n * kNumActions, -1);
  dyn.human_reward.assign(n * kNumActions, 0.0);
  dyn.agent_prob.assign(n * kNumActions, 0.0);
  dyn.agent_next.assign(n * kNumActions, -1);
  dyn.agent_reward.assign(n * kNumActions, 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    const EnvState& s = index.state(i);
    const ActionSet human_moves = legal_actions(config, s.human);
    const ActionDistribution agent_dist = agent_policy(config, model, s);
    for (Action a : kAllActions) {
      const std::size_t k = i * kNumActions + static_cast<std::size_t>(a);
      if (human_moves.contains(a)) {
        const EnvState next = apply_human_move(config, s, a, goal);
        double r = params.action_cost;
        if (next.status == Status::Collided) r += params.collision_penalty;
        if (next.status == Status::GoalReached) r += params.goal_reward;
        dyn.human_legal[k] = 1;
        dyn.human_reward[k] = r;
        if (next.status == Status::Active) {
          dyn.human_next[k] = static_cast<std::int32_t>(index.at(next.human, next.agent));
        }
      }
      const double p = agent_dist[static_cast<std::size_t>(a)];
      if (p > 0.0) {
        const EnvState next = apply_agent_move(config, s, a);
        dyn.agent_prob[k] = p;
        dyn.agent_reward[k] = next.status == Status::Collided ? params.collision_penalty : 0.0;
        if (next.status == Status::Active) {
          dyn.agent_next[k] = static_cast<std::int32_t>(index.at(next.human, next.agent));
        }
      }
    }
  }
  return dyn;
}

namespace {

inline double agent_turn_value(const TurnDynamics& dyn, double discount,
                               std::span<const double> v, std::size_t i) {
  double acc = 0.0;
  for (std::size_t a = 0; a < kNumActions; ++a) {
    const std::size_t k = i * kNumActions + a;
    const double p = dyn.agent_prob[k];
    if (p == 0.0) continue;
    const std::int32_t next = dyn.agent_next[k];
    const double future = next >= 0 ? v[static_cast<std::size_t>(next)] : 0.0;
    acc += p * (dyn.agent_reward[k] + discount * future);
  }
  return acc;
}

inline double human_turn_update(const TurnDynamics& dyn, double discount,
                                std::span<const double> rv, std::span<double> q, std::size_t i) {
  double best = kNegInf;
  for (std::size_t a = 0; a < kNumActions; ++a) {
    const std::size_t k = i * kNumActions + a;
    if (!dyn.human_legal[k]) {
      q[k] = kNegInf;
      continue;
    }
    const std::int32_t next = dyn.human_next[k];
    const double future = next >= 0 ? rv[static_cast<std::size_t>(next)] : 0.0;
    q[k] = dyn.human_reward[k] + discount * future;
    best = std::max(best, q[k]);
  }
  return best;
}

} // namespace

double composite_sweep_serial(const TurnDynamics& dyn, double discount,
                              std::span<const double> v_old, std::span<double> rv,
                              std::span<double> q, std::span<double> v_new) {
  const std::size_t n = dyn.num_states;
  for (std::size_t i = 0; i < n; ++i) rv[i] = agent_turn_value(dyn, discount, v_old, i);
  double residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    v_new[i] = human_turn_update(dyn, discount, rv, q, i);
    residual = std::max(residual, std::abs(v_new[i] - v_old[i]));
  }
  return residual;
}

double composite_sweep_parallel(const TurnDynamics& dyn, double discount,
                                std::span<const double> v_old, std::span<double> rv,
                                std::span<double> q, std::span<double> v_new) {
  const std::int64_t n = static_cast<std::int64_t>(dyn.num_states);
  double residual = 0.0;
#pragma omp parallel
  {
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      rv[static_cast<std::size_t>(i)] = agent_turn_value(dyn, discount, v_old, static_cast<std::size_t>(i));
    }
    // implicit barrier: every RV entry is final before Q reads it
#pragma omp for schedule(static) reduction(max : residual)
    for (std::int64_t i = 0; i < n; ++i) {
      const auto s = static_cast<std::size_t>(i);
      v_new[s] = human_turn_update(dyn, discount, rv, q, s);
      residual = std::max(residual, std::abs(v_new[s] - v_old[s]));
    }
  }
  return residual;
}

std::size_t ValueTables::state_index(const EnvState& s) const {
  if (s.status != Status::Active) throw StateError("value tables are indexed by active states only");
  return index->at(s.human, s.agent);
}

ValueTables solve(const GridConfig& config, const AgentModel& model, const Cell& goal,
                  const RewardParams& params, const SolveOptions& options) {
  config.validate();
  params.validate();
  if (std::find(config.goal_cells.begin(), config.goal_cells.end(), goal) == config.goal_cells.end()) {
    throw DomainError("goal " + to_string(goal) + " is not one of the configured goals");
  }
  if (!(options.tol > 0.0)) throw DomainError("tolerance must be > 0");
  if (model.kind == ModelKind::FixedGoal && !config.is_free(model.target)) {
    throw DomainError("fixed-goal target " + to_string(model.target) + " is not a free cell");
  }

  ValueTables t;
  t.config = config;
  t.index = std::make_shared<const StateIndex>(config);
  t.model = model;
  t.goal = goal;
  t.params = params;
  t.tol = options.tol;

  const TurnDynamics dyn = TurnDynamics::build(config, *t.index, model, goal, params);
  const std::size_t n = dyn.num_states;
  std::vector<double> v_old(n, 0.0);
  t.v.assign(n, 0.0);
  t.rv.assign(n, 0.0);
  t.q.assign(n * kNumActions, kNegInf);

  auto sweep = options.execution == Execution::Parallel ? composite_sweep_parallel
                                                        : composite_sweep_serial;
  double residual = std::numeric_limits<double>::infinity();
  int sweeps = 0;
  while (sweeps < options.max_sweeps) {
    v_old.swap(t.v);
    residual = sweep(dyn, params.discount, v_old, t.rv, t.q, t.v);
    ++sweeps;
    if (options.record_residuals) t.residual_history.push_back(residual);
    if (residual <= options.tol) break;
  }
  t.residual = residual;
  t.sweeps = sweeps;
  if (residual > options.tol) {
    throw ConvergenceError("value iteration for " + to_string(Hypothesis{model, goal}) +
                               " did not converge after " + std::to_string(sweeps) +
                               " sweeps (residual " + std::to_string(residual) + ")",
                           residual, sweeps);
  }
  return t;
}

ActionDistribution softmax_legal(std::span<const double> q_row, const ActionSet& legal, double beta) {
  ActionDistribution out{};
  double top = kNegInf;
  for (Action a : kAllActions) {
    if (legal.contains(a)) top = std::max(top, beta * q_row[static_cast<std::size_t>(a)]);
  }
  double z = 0.0;
  for (Action a : kAllActions) {
    if (!legal.contains(a)) continue;
    const auto k = static_cast<std::size_t>(a);
    out[k] = std::exp(beta * q_row[k] - top);
    z += out[k];
  }
  for (double& p : out) p /= z;
  return out;
}

ActionDistribution boltzmann_policy(const ValueTables& tables, const EnvState& s, double beta) {
  const std::size_t i = tables.state_index(s);
  return softmax_legal(tables.q_row(i), legal_actions(tables.config, s.human), beta);
}

std::string to_string(const Hypothesis& h) {
  return to_string(h.model) + "/goal" + to_string(h.goal);
}

namespace {

class Fnv1a {
public:
  void bytes(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void i64(std::int64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void cell(const Cell& c) {
    i64(c.x);
    i64(c.y);
  }
  void cells(const std::vector<Cell>& cs) {
    i64(static_cast<std::int64_t>(cs.size()));
    for (const Cell& c : cs) cell(c);
  }
  std::uint64_t value() const { return hash_; }

private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

constexpr char kMagic[8] = {'T', 'O', 'M', 'V', 'T', '0', '0', '1'};

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("truncated value-table cache file");
  return v;
}

} // namespace

std::uint64_t table_key(const GridConfig& config, const AgentModel& model, const Cell& goal,
                        const RewardParams& params, double tol) {
  Fnv1a h;
  h.i64(config.width);
  h.i64(config.height);
  h.cells(config.goal_cells);
  h.cells(config.human_start_cells);
  h.cells(config.agent_spawn_region);
  std::vector<Cell> blocked = config.blocked_cells;
  std::sort(blocked.begin(), blocked.end());
  h.cells(blocked);
  h.i64(static_cast<std::int64_t>(model.kind));
  if (model.kind == ModelKind::FixedGoal) h.cell(model.target);
  h.cell(goal);
  h.f64(params.goal_reward);
  h.f64(params.action_cost);
  h.f64(params.discount);
  h.f64(params.collision_penalty);
  h.f64(tol);
  return h.value();
}

void save_tables(const std::filesystem::path& path, const ValueTables& t) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write cache file " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    write_pod(out, table_key(t.config, t.model, t.goal, t.params, t.tol));
    write_pod(out, static_cast<std::uint64_t>(t.v.size()));
    write_pod(out, static_cast<std::int32_t>(t.sweeps));
    write_pod(out, t.residual);
    out.write(reinterpret_cast<const char*>(t.v.data()), static_cast<std::streamsize>(t.v.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(t.rv.data()), static_cast<std::streamsize>(t.rv.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(t.q.data()), static_cast<std::streamsize>(t.q.size() * sizeof(double)));
    if (!out) throw std::runtime_error("failed writing cache file " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::unique_ptr<ValueTables> load_tables(const std::filesystem::path& path, const GridConfig& config,
                                         const AgentModel& model, const Cell& goal,
                                         const RewardParams& params, double tol) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return nullptr;
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("bad magic in cache file " + path.string());
  }
  const auto key = read_pod<std::uint64_t>(in);
  if (key != table_key(config, model, goal, params, tol)) {
    throw std::runtime_error("cache file " + path.string() + " was written for different inputs");
  }
  auto t = std::make_unique<ValueTables>();
  t->config = config;
  t->index = std::make_shared<const StateIndex>(config);
  t->model = model;
  t->goal = goal;
  t->params = params;
  t->tol = tol;
  const auto n = read_pod<std::uint64_t>(in);
  if (n != t->index->size()) throw std::runtime_error("state count mismatch in " + path.string());
  t->sweeps = read_pod<std::int32_t>(in);
  t->residual = read_pod<double>(in);
  t->v.resize(n);
  t->rv.resize(n);
  t->q.resize(n * kNumActions);
  in.read(reinterpret_cast<char*>(t->v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  in.read(reinterpret_cast<char*>(t->rv.data()), static_cast<std::streamsize>(n * sizeof(double)));
  in.read(reinterpret_cast<char*>(t->q.data()), static_cast<std::streamsize>(n * kNumActions * sizeof(double)));
  if (!in) throw std::runtime_error("truncated cache file " + path.string());
  return t;
}

TableBank::TableBank(GridConfig config, RewardParams params, SolveOptions options,
                     std::filesystem::path cache_dir)
    : config_(std::move(config)), params_(params), options_(options), cache_dir_(std::move(cache_dir)) {
  config_.validate();
  params_.validate();
}

void TableBank::ensure(const std::vector<AgentModel>& models, const std::vector<Cell>& goals) {
  if (models.empty() || goals.empty()) throw DomainError("solve_bank needs at least one model and one goal");
  std::vector<Hypothesis> missing;
  {
    std::lock_guard lock(mutex_);
    for (const AgentModel& m : models) {
      for (const Cell& g : goals) {
        const Hypothesis h{m, g};
        if (tables_.count(h)) {
          ++stats_.reused;
        } else if (std::find(missing.begin(), missing.end(), h) == missing.end()) {
          missing.push_back(h);
        }
      }
    }
  }
  if (missing.empty()) return;

  std::vector<std::shared_ptr<const ValueTables>> results(missing.size());
  std::vector<char> from_disk(missing.size(), 0);
  std::vector<std::exception_ptr> errors(missing.size());
  SolveOptions inner = options_;
  inner.execution = Execution::Serial;
  const auto count = static_cast<std::int64_t>(missing.size());

#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Hypothesis& h = missing[k];
    try {
      std::filesystem::path file;
      if (!cache_dir_.empty()) {
        char name[32];
        std::snprintf(name, sizeof name, "%016llx.vt",
                      static_cast<unsigned long long>(table_key(config_, h.model, h.goal, params_, inner.tol)));
        file = cache_dir_ / name;
        if (auto loaded = load_tables(file, config_, h.model, h.goal, params_, inner.tol)) {
          results[k] = std::move(loaded);
          from_disk[k] = 1;
          continue;
        }
      }
      auto solved = std::make_shared<ValueTables>(solve(config_, h.model, h.goal, params_, inner));
      if (!file.empty()) save_tables(file, *solved);
      results[k] = std::move(solved);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }

  for (std::size_t k = 0; k < missing.size(); ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("hypothesis " + to_string(missing[k]) + ": " + e.what(), e.residual(), e.sweeps());
    }
  }

  std::lock_guard lock(mutex_);
  for (std::size_t k = 0; k < missing.size(); ++k) {
    tables_[missing[k]] = results[k];
    origins_[missing[k]] = from_disk[k] ? Origin::Loaded : Origin::Solved;
    if (from_disk[k]) {
      ++stats_.loaded;
    } else {
      ++stats_.solved;
    }
  }
}

bool TableBank::contains(const Hypothesis& h) const {
  std::lock_guard lock(mutex_);
  return tables_.count(h) != 0;
}

const ValueTables& TableBank::at(const Hypothesis& h) const {
  std::lock_guard lock(mutex_);
  auto it = tables_.find(h);
  if (it == tables_.end()) throw std::out_of_range("no value tables for hypothesis " + to_string(h));
  return *it->second;
}

std::shared_ptr<const ValueTables> TableBank::share(const Hypothesis& h) const {
  std::lock_guard lock(mutex_);
  auto it = tables_.find(h);
  if (it == tables_.end()) throw std::out_of_range("no value tables for hypothesis " + to_string(h));
  return it->second;
}

TableBank::Origin TableBank::origin(const Hypothesis& h) const {
  std::lock_guard lock(mutex_);
  return origins_.at(h);
}

std::size_t TableBank::size() const {
  std::lock_guard lock(mutex_);
  return tables_.size();
}

std::vector<Hypothesis> TableBank::hypotheses() const {
  std::lock_guard lock(mutex_);
  std::vector<Hypothesis> out;
  for (const auto& [h, _] : tables_) out.push_back(h);
  return out;
}

TableBank::Stats TableBank::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

std::map<Hypothesis, std::shared_ptr<const ValueTables>> solve_bank(
    const GridConfig& config, const std::vector<AgentModel>& models, const std::vector<Cell>& goals,
    const RewardParams& params, const SolveOptions& options) {
  TableBank bank(config, params, options);
  bank.ensure(models, goals);
  std::map<Hypothesis, std::shared_ptr<const ValueTables>> out;
  for (const Hypothesis& h : bank.hypotheses()) {
    out[h] = bank.share(h);
  }
  return out;
}

std::vector<AgentModel> all_trial_models(const GridConfig& config) {
  std::vector<AgentModel> out = {AgentModel::stationary(), AgentModel::random(), AgentModel::chasing()};
  for (const Cell& start : config.human_start_cells) out.push_back(AgentModel::fixed_goal(start));
  return out;
}

} // namespace tom
