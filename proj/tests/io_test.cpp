#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "test_support.hpp"
#include "tom/io.hpp"

namespace tom {
namespace {

const std::filesystem::path kConfigs = std::filesystem::path(TOM_SOURCE_DIR) / "configs";

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const TableBank& default_bank() {
  static const TableBank* bank = [] {
    auto* b = new TableBank(default_grid(), RewardParams{});
    prepare_bank(*b);
    return b;
  }();
  return *bank;
}

TEST(GridIo, CheckedInDefaultMatchesBuiltIn) {
  const GridConfig g = io::load_grid(kConfigs / "default_grid.json");
  const GridConfig d = default_grid();
  EXPECT_EQ(g.width, d.width);
  EXPECT_EQ(g.height, d.height);
  EXPECT_EQ(g.goal_cells, d.goal_cells);
  EXPECT_EQ(g.human_start_cells, d.human_start_cells);
  EXPECT_EQ(g.agent_spawn_region, d.agent_spawn_region);
  EXPECT_EQ(g.blocked_cells, d.blocked_cells);
}

TEST(GridIo, RoundTripAndValidation) {
  GridConfig g = testing::small_grid();
  g.blocked_cells = {{1, 1}};
  g.agent_spawn_region = {{2, 1}};
  const GridConfig back = io::grid_from_json(io::to_json(g));
  EXPECT_EQ(back.blocked_cells, g.blocked_cells);
  EXPECT_EQ(back.agent_spawn_region, g.agent_spawn_region);

  io::json bad = io::to_json(g);
  bad["goal_cells"] = io::json::array({io::json::array({1, 2})});
  EXPECT_THROW(io::grid_from_json(bad), std::exception);
  EXPECT_THROW(io::cell_from_json(io::json::array({1})), io::FormatError);
  EXPECT_THROW(io::load_grid("/nonexistent/grid.json"), io::FormatError);
}

TEST(PlanIo, StudyPlanLoadsWithRelativeGrid) {
  const ExperimentPlan plan = io::load_plan(kConfigs / "study_plan.json");
  EXPECT_EQ(plan.num_trials(), 500);
  EXPECT_EQ(plan.conditions.size(), 4u);
  EXPECT_EQ(plan.params, RewardParams{});
  EXPECT_EQ(plan.grid.goal_cells, default_grid().goal_cells);

  const ExperimentPlan chance = io::load_plan(kConfigs / "chance_plan.json");
  EXPECT_TRUE(chance.force_uniform_likelihood);
  EXPECT_GE(chance.num_trials(), 1000);
}

TEST(PlanIo, InvalidPlansRejected) {
  EXPECT_THROW(io::plan_from_json({{"trials_per_condition", 0}}), PlanError);
  EXPECT_THROW(io::plan_from_json({{"conditions", {"teleporting"}}}), DomainError);
  EXPECT_THROW(io::plan_from_json({{"params", {{"discount", 1.2}}}}), DomainError);
}

TEST(ParamsIo, DefaultsAndOverrides) {
  const RewardParams p = io::params_from_json({{"goal_reward", 40}});
  EXPECT_EQ(p.goal_reward, 40.0);
  EXPECT_EQ(p.action_cost, -3.0);
  EXPECT_EQ(io::params_from_json(io::to_json(RewardParams{})), RewardParams{});
}

Trajectory sample(std::uint64_t seed) {
  const Cell start = default_grid().human_start_cells[seed % 3];
  const Hypothesis h{AgentModel::for_trial(kAllModelKinds[seed % 4], start), default_grid().goal_cells[seed % 3]};
  Trajectory t = simulate_human_trajectory(default_bank(), h, start, {3, 4}, 1.0, seed);
  t.meta.trial_id = "t" + std::to_string(seed);
  return t;
}

TEST(TrajectoryIo, SaveLoadSaveIsByteIdentical) {
  const auto dir = testing::temp_dir("io");
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Trajectory t = sample(seed);
    io::save_trajectory(dir / "a.jsonl", t);
    const Trajectory back = io::load_trajectory(dir / "a.jsonl");
    EXPECT_EQ(back, t);
    io::save_trajectory(dir / "b.jsonl", back);
    EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
  }
  std::filesystem::remove_all(dir);
}

TEST(TrajectoryIo, HeaderCarriesSchemaAndMetadata) {
  const Trajectory t = sample(3);
  std::istringstream in(io::trajectory_to_string(t));
  std::string line;
  std::getline(in, line);
  const io::json header = io::json::parse(line);
  EXPECT_EQ(header["schema"], "tom.trajectory");
  EXPECT_EQ(header["version"], 1);
  EXPECT_EQ(header["trial"]["condition"], std::string(to_string(t.meta.condition)));
  EXPECT_EQ(header["trial"]["success"], t.success());
}

TEST(TrajectoryIo, VersionAndCorruptionErrors) {
  const Trajectory t = sample(1);
  std::string text = io::trajectory_to_string(t);

  std::string wrong = text;
  wrong.replace(wrong.find("\"version\":1"), 11, "\"version\":9");
  std::istringstream a(wrong);
  EXPECT_THROW(io::read_trajectory(a), io::FormatError);

  std::istringstream empty("");
  EXPECT_THROW(io::read_trajectory(empty), io::FormatError);

  std::istringstream garbage(text + "{not json\n");
  EXPECT_THROW(io::read_trajectory(garbage), io::FormatError);

  std::istringstream bad_action(text + R"({"step":99,"human":[0,0],"agent":[1,1],"action":"jump"})" + "\n");
  try {
    io::read_trajectory(bad_action);
    FAIL() << "expected FormatError";
  } catch (const io::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("step " + std::to_string(t.steps.size())), std::string::npos) << e.what();
  }
}

TEST(TrajectoryIo, HeaderOnlyFileHasNoSteps) {
  Trajectory t;
  t.meta = {"empty", ModelKind::Chasing, {4, 0}, {4, 8}, {4, 4}, 0, Outcome::InProgress};
  std::istringstream in(io::trajectory_to_string(t));
  const Trajectory back = io::read_trajectory(in);
  EXPECT_TRUE(back.steps.empty());
  EXPECT_EQ(back.meta, t.meta);
}

TEST(Labels, Stable) {
  EXPECT_EQ(io::label(AgentModel::fixed_goal({0, 8})), "fixed_goal");
  EXPECT_EQ(io::label(Cell{4, 0}), "goal(4,0)");
  EXPECT_EQ(io::label(Hypothesis{AgentModel::random(), {8, 0}}), "random/goal(8,0)");
}

TEST(ReportIo, WritesSummaryAndTables) {
  ExperimentPlan plan;
  plan.grid = default_grid();
  plan.participants = 1;
  const ExperimentReport r = run_classification_experiment(plan, default_bank());
  const auto dir = testing::temp_dir("report");
  io::write_report(dir, r, "classification");
  EXPECT_TRUE(std::filesystem::exists(dir / "classification.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "classification_trials.csv"));
  const io::json summary = io::json::parse(slurp(dir / "classification.json"));
  EXPECT_EQ(summary["trials"], 20);
  EXPECT_EQ(summary["confusion"].size(), 4u);
  std::ifstream csv(dir / "classification_trials.csv");
  int lines = 0;
  for (std::string l; std::getline(csv, l);) ++lines;
  EXPECT_EQ(lines, 21);
  std::filesystem::remove_all(dir);
}

} // namespace
} // namespace tom
