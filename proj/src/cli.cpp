#include "tom/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>

#include "tom/io.hpp"
#include "tom/service.hpp"
#include "tom/simulation.hpp"

namespace tom {

namespace {

struct CommonFlags {
  std::string config;
  std::string cache;
  double goal_reward = RewardParams{}.goal_reward;
  double action_cost = RewardParams{}.action_cost;
  double discount = RewardParams{}.discount;
  double collision_penalty = RewardParams{}.collision_penalty;
  double beta = RewardParams{}.beta;
  double tol = SolveOptions{}.tol;

  void add_grid(CLI::App* app) {
    app->add_option("--config", config, "Grid config file (JSON); built-in 9x9 default if omitted");
    app->add_option("--cache", cache, "Value-table cache directory");
  }
  void add_params(CLI::App* app) {
    app->add_option("--goal-reward", goal_reward, "Goal reward G");
    app->add_option("--action-cost", action_cost, "Per-action cost C_a (<= 0)");
    app->add_option("--discount", discount, "Discount factor in (0, 1)");
    app->add_option("--collision-penalty", collision_penalty, "Collision penalty (<= 0)");
    app->add_option("--beta", beta, "Inference rationality (inverse temperature)");
    app->add_option("--tol", tol, "Value-iteration tolerance");
  }
  GridConfig grid() const { return config.empty() ? default_grid() : io::load_grid(config); }
  RewardParams params() const {
    RewardParams p{goal_reward, action_cost, discount, collision_penalty, beta};
    p.validate();
    return p;
  }
  SolveOptions options() const {
    SolveOptions o;
    o.tol = tol;
    return o;
  }
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

template <class H>
void print_belief(std::ostream& out, const Belief<H>& b) {
  for (std::size_t i = 0; i < b.size(); ++i) {
    out << (i ? "  " : "") << io::label(b.support()[i]) << '=' << fmt(b.prob(i));
  }
  out << '\n';
}

int cmd_solve(const CommonFlags& f, std::ostream& out) {
  const RewardParams params = f.params();
  const GridConfig grid = f.grid();
  if (f.cache.empty()) throw CLI::ValidationError("--cache", "solve needs a cache directory");
  TableBank bank(grid, params, f.options(), f.cache);
  bank.ensure(all_trial_models(grid), grid.goal_cells);
  for (const Hypothesis& h : bank.hypotheses()) {
    const ValueTables& t = bank.at(h);
    if (bank.origin(h) == TableBank::Origin::Loaded) {
      out << to_string(h) << ": skipped (cached)\n";
    } else {
      out << to_string(h) << ": solved in " << t.sweeps << " sweeps, residual " << std::scientific
          << std::setprecision(3) << t.residual << std::defaultfloat << '\n';
    }
  }
  const auto stats = bank.stats();
  out << bank.size() << " tables (" << stats.solved << " solved, " << stats.loaded << " cached)\n";
  return 0;
}

int cmd_experiment(const std::string& plan_path, const std::string& cache, const std::string& out_dir,
                   std::ostream& out) {
  const ExperimentPlan plan = io::load_plan(plan_path);
  TableBank bank(plan.grid, plan.params, SolveOptions{}, cache);
  prepare_bank(bank);
  const auto stats = bank.stats();
  if (stats.solved > 0) out << "solved " << stats.solved << " missing tables\n";

  const ExperimentReport cls = run_classification_experiment(plan, bank);
  io::write_report(out_dir, cls, "classification");
  out << "trials: " << cls.trials << '\n';
  out << "top-1 accuracy: " << fmt(100.0 * cls.top1_accuracy, 1) << "%\n";
  out << "top-2 accuracy: " << fmt(100.0 * cls.top2_accuracy, 1) << "%\n";
  out << "confusion (rows true, cols predicted: stationary random fixed_goal chasing):\n";
  for (std::size_t i = 0; i < kNumModelKinds; ++i) {
    out << "  " << std::setw(10) << to_string(kAllModelKinds[i]);
    for (double v : cls.confusion[i]) out << ' ' << std::setw(8) << fmt(v, 2);
    out << '\n';
  }
  const double within = cls.within_cluster_confusion();
  const double cross = cls.cross_cluster_confusion();
  out << "cluster check: within " << fmt(within, 2) << " vs cross " << fmt(cross, 2) << " -> "
      << (within > cross ? "clustered" : "not clustered") << '\n';

  const ExperimentReport goals = run_goal_inference_experiment(plan, bank);
  io::write_report(out_dir, goals, "goal_inference");
  for (const auto& [method, curve] : goals.goal_curves) {
    out << "goal curve " << method << ": 0% " << fmt(curve.front()) << ", 100% " << fmt(curve.back()) << '\n';
  }
  return 0;
}

int cmd_infer(const CommonFlags& f, const std::string& traj_path, bool known_goal, std::string trace_path,
              std::ostream& out) {
  const Trajectory traj = io::load_trajectory(traj_path);
  const GridConfig grid = f.grid();
  TableBank bank(grid, f.params(), f.options(), f.cache);
  validate_trajectory(grid, traj);
  bank.ensure(trial_models(traj.meta.human_start), grid.goal_cells);
  const BeliefTrace trace = replay_trajectory(bank, traj);

  if (trace_path.empty()) trace_path = traj_path + ".trace.jsonl";
  std::ofstream trace_file(trace_path, std::ios::binary | std::ios::trunc);
  const std::string& id = traj.meta.trial_id;
  for (std::size_t t = 0; t < trace.model.size(); ++t) {
    const auto rec = known_goal ? io::trace_record(id, "model", t, trace.model[t])
                                : io::trace_record(id, "joint", t, trace.joint[t]);
    trace_file << rec.dump() << '\n';
    out << "step " << t << ": ";
    if (known_goal) {
      print_belief(out, trace.model[t]);
    } else {
      print_belief(out, model_posterior_marginal(trace.joint[t]));
    }
  }
  const ModelBelief final_models = known_goal ? trace.model.back() : model_posterior_marginal(trace.joint.back());
  out << "final ranking" << (known_goal ? " (known goal " + to_string(traj.meta.goal) + ")" : "") << ":\n";
  for (const RankedModel& r : rank_models(final_models).ranking) {
    out << "  " << r.rank_first + 1 << ". " << to_string(r.model.kind) << ' ' << fmt(r.posterior, 6)
        << (r.rank_first != r.rank_last ? " (tied)" : "") << '\n';
  }
  if (!known_goal) {
    out << "goal posterior: ";
    print_belief(out, goal_posterior(trace.joint.back()));
  }
  out << "trace written to " << trace_path << '\n';
  return 0;
}

struct SimulateFlags {
  std::string condition = "stationary";
  int goal = -1;
  int start = -1;
  std::vector<int> agent_start;
  double human_beta = 1.0;
  std::uint64_t seed = 1;
  int step_cap = kDefaultStepCap;
  std::string output;
};

int cmd_simulate(const CommonFlags& f, const SimulateFlags& s, std::ostream& out) {
  const GridConfig grid = f.grid();
  TableBank bank(grid, f.params(), f.options(), f.cache);
  std::mt19937_64 rng(s.seed);
  auto pick = [&](const std::vector<Cell>& xs, int requested) {
    const std::size_t drawn = static_cast<std::size_t>(rng() % xs.size());
    if (requested < 0) return xs[drawn];
    if (requested >= static_cast<int>(xs.size())) throw CLI::ValidationError("index out of range");
    return xs[static_cast<std::size_t>(requested)];
  };
  const Cell goal = pick(grid.goal_cells, s.goal);
  const Cell start = pick(grid.human_start_cells, s.start);
  Cell agent = grid.agent_spawn_region[static_cast<std::size_t>(rng() % grid.agent_spawn_region.size())];
  if (s.agent_start.size() == 2) agent = {s.agent_start[0], s.agent_start[1]};
  const Hypothesis truth{AgentModel::for_trial(parse_model_kind(s.condition), start), goal};
  bank.ensure({truth.model}, {goal});
  Trajectory traj = simulate_human_trajectory(bank, truth, start, agent, s.human_beta, s.seed, s.step_cap);
  traj.meta.trial_id = "sim-" + std::to_string(s.seed);
  if (s.output.empty()) {
    io::write_trajectory(out, traj);
  } else {
    io::save_trajectory(s.output, traj);
    out << traj.steps.size() << " steps, outcome " << to_string(traj.meta.outcome) << ", written to " << s.output
        << '\n';
  }
  return 0;
}

int cmd_serve(const CommonFlags& f, int port, std::string data_dir, const std::string& host, std::ostream& out) {
  if (const char* env = std::getenv("TOM_PORT")) port = std::atoi(env);
  if (const char* env = std::getenv("TOM_DATA_DIR")) data_dir = env;
  const GridConfig grid = f.grid();
  auto bank = std::make_shared<TableBank>(grid, f.params(), f.options(), f.cache);
  prepare_bank(*bank);
  SessionService service(bank, data_dir);
  httplib::Server server;
  service.mount(server);
  out << "serving on http://" << host << ':' << port << std::endl;
  if (!server.listen(host, port)) throw std::runtime_error("cannot listen on port " + std::to_string(port));
  return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mental-model and goal inference from human actions around an agent", "tomctl"};
  app.require_subcommand(1);
  CommonFlags common;

  auto* solve = app.add_subcommand("solve", "Solve and cache value tables for every hypothesis");
  common.add_grid(solve);
  common.add_params(solve);

  std::string plan_path, out_dir = "results";
  auto* experiment = app.add_subcommand("experiment", "Run the synthetic classification and goal-inference study");
  experiment->add_option("--plan", plan_path, "Experiment plan (JSON)")->required();
  experiment->add_option("--cache", common.cache, "Value-table cache directory");
  experiment->add_option("--out", out_dir, "Output directory for report files");

  std::string traj_path, trace_path;
  bool known_goal = false;
  auto* infer = app.add_subcommand("infer", "Posterior trace and model ranking for a recorded trajectory");
  infer->add_option("trajectory", traj_path, "Trajectory file (JSONL)")->required();
  infer->add_flag("--known-goal", known_goal, "Condition on the recorded goal (model track only)");
  infer->add_option("--trace", trace_path, "Trace output file (default: <trajectory>.trace.jsonl)");
  common.add_grid(infer);
  common.add_params(infer);

  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate one Boltzmann-rational human trajectory");
  simulate->add_option("--condition", sim.condition, "stationary | random | fixed_goal | chasing");
  simulate->add_option("--goal", sim.goal, "Goal index (random if omitted)");
  simulate->add_option("--start", sim.start, "Human start index (random if omitted)");
  simulate->add_option("--agent-start", sim.agent_start, "Agent start cell x y")->expected(2);
  simulate->add_option("--human-beta", sim.human_beta, "Rationality of the simulated human");
  simulate->add_option("--seed", sim.seed, "Random seed");
  simulate->add_option("--step-cap", sim.step_cap, "Maximum human moves");
  simulate->add_option("-o,--out", sim.output, "Output trajectory file (stdout if omitted)");
  common.add_grid(simulate);
  common.add_params(simulate);

  int port = 8080;
  std::string data_dir, host = "127.0.0.1";
  auto* serve = app.add_subcommand("serve", "HTTP session service for live play");
  serve->add_option("--port", port, "Listen port (env TOM_PORT overrides)");
  serve->add_option("--data-dir", data_dir, "Directory for finished trajectories (env TOM_DATA_DIR overrides)");
  serve->add_option("--host", host, "Bind address");
  common.add_grid(serve);
  common.add_params(serve);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    if (*solve) return cmd_solve(common, out);
    if (*experiment) return cmd_experiment(plan_path, common.cache, out_dir, out);
    if (*infer) return cmd_infer(common, traj_path, known_goal, trace_path, out);
    if (*simulate) return cmd_simulate(common, sim, out);
    if (*serve) return cmd_serve(common, port, data_dir, host, out);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  } catch (const TrajectoryError& e) {
    err << "error: invalid trajectory at step " << e.step() << ": " << e.what() << '\n';
    return 3;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

} // namespace tom
