#include "tom/service.hpp"

#include <cstdio>
#include <fstream>
#include <mutex>

#include <httplib.h>

#include "tom/io.hpp"
#include "tom/simulation.hpp"

namespace tom {

using nlohmann::json;

namespace {

json state_json(const EnvState& s) {
  return {{"human", io::to_json(s.human)}, {"agent", io::to_json(s.agent)}, {"status", std::string(to_string(s.status))}};
}

json cells_json(const std::vector<Cell>& cs) {
  json out = json::array();
  for (const Cell& c : cs) out.push_back(io::to_json(c));
  return out;
}

json grid_json(const GridConfig& g) {
  return {{"width", g.width},
          {"height", g.height},
          {"goalCells", cells_json(g.goal_cells)},
          {"humanStartCells", cells_json(g.human_start_cells)},
          {"agentSpawnRegion", cells_json(g.agent_spawn_region)},
          {"blockedCells", cells_json(g.blocked_cells)}};
}

json legal_json(const ActionSet& legal) {
  json out = json::array();
  for (Action a : legal.to_vector()) out.push_back(std::string(to_string(a)));
  return out;
}

template <class T>
const T& pick(const std::vector<T>& xs, std::mt19937_64& rng) {
  return xs[static_cast<std::size_t>(rng() % xs.size())];
}

Cell parse_cell_field(const json& body, const char* key) {
  try {
    return io::cell_from_json(body.at(key));
  } catch (const std::exception& e) {
    throw ApiError(400, std::string("bad '") + key + "': " + e.what());
  }
}

} // namespace

SessionService::SessionService(std::shared_ptr<const TableBank> bank, std::filesystem::path data_dir)
    : bank_(std::move(bank)), data_dir_(std::move(data_dir)), instance_salt_(std::random_device{}()) {}

std::shared_ptr<Session> SessionService::find(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ApiError(404, "unknown session '" + id + "'");
  return it->second;
}

json SessionService::beliefs_json(const Session& s) const {
  return {{"joint", io::belief_to_json(s.joint)},
          {"goal", io::belief_to_json(goal_posterior(s.joint))},
          {"modelMarginal", io::belief_to_json(model_posterior_marginal(s.joint))},
          {"model", io::belief_to_json(s.model)}};
}

void SessionService::record_trace(Session& s) {
  const std::size_t step = s.trajectory.steps.size();
  s.trace.push_back(
      {{"step", step}, {"joint", io::trace_record(s.id, "joint", step, s.joint)}, {"model", io::trace_record(s.id, "model", step, s.model)}});
}

json SessionService::snapshot_locked(const Session& s) const {
  return {{"id", s.id},
          {"seed", s.seed},
          {"condition", std::string(to_string(s.condition.kind))},
          {"goal", io::to_json(s.goal)},
          {"grid", grid_json(bank_->config())},
          {"state", state_json(s.state)},
          {"status", s.finished ? "finished" : "active"},
          {"outcome", std::string(to_string(s.trajectory.meta.outcome))},
          {"steps", s.trajectory.steps.size()},
          {"legalActions", s.finished ? json::array() : legal_json(legal_actions(bank_->config(), s.state.human))},
          {"beliefs", beliefs_json(s)}};
}

json SessionService::create(const json& body) {
  if (!body.is_object()) throw ApiError(400, "request body must be a JSON object");
  const GridConfig& config = bank_->config();
  auto s = std::make_shared<Session>();

  if (!body.contains("condition") || !body["condition"].is_string()) throw ApiError(400, "missing 'condition'");
  ModelKind kind;
  try {
    kind = parse_model_kind(body["condition"].get<std::string>());
  } catch (const DomainError& e) {
    throw ApiError(400, e.what());
  }
  const std::uint64_t n = counter_.fetch_add(1);
  if (body.contains("seed")) {
    const json& seed = body["seed"];
    if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0)) {
      throw ApiError(400, "'seed' must be a non-negative integer");
    }
    s->seed = body["seed"].get<std::uint64_t>();
  } else {
    s->seed = derive_seed(instance_salt_, n);
  }
  char id[24];
  std::snprintf(id, sizeof id, "s%016llx", static_cast<unsigned long long>(derive_seed(instance_salt_, n, 7)));
  s->id = id;

  // Layout draws come first so that (seed, human actions) replays a session.
  s->rng.seed(s->seed);
  Cell goal = pick(config.goal_cells, s->rng);
  Cell human_start = pick(config.human_start_cells, s->rng);
  Cell agent_start = pick(config.agent_spawn_region, s->rng);
  while (agent_start == human_start) agent_start = pick(config.agent_spawn_region, s->rng);
  if (body.contains("goal")) goal = parse_cell_field(body, "goal");
  if (body.contains("humanStart")) human_start = parse_cell_field(body, "humanStart");
  if (body.contains("agentStart")) agent_start = parse_cell_field(body, "agentStart");
  if (std::find(config.goal_cells.begin(), config.goal_cells.end(), goal) == config.goal_cells.end()) {
    throw ApiError(400, "goal " + to_string(goal) + " is not a configured goal");
  }
  if (!config.is_free(human_start) || !config.is_free(agent_start) || human_start == agent_start ||
      human_start == goal) {
    throw ApiError(400, "invalid start cells");
  }

  s->condition = AgentModel::for_trial(kind, human_start);
  s->goal = goal;
  s->state = {human_start, agent_start, Status::Active};
  const std::vector<AgentModel> models = trial_models(human_start);
  for (const AgentModel& m : models) {
    for (const Cell& g : config.goal_cells) {
      if (!bank_->contains({m, g})) throw ApiError(500, "value tables missing for " + to_string(Hypothesis{m, g}));
    }
  }
  s->joint = JointBelief::uniform(joint_support(models, config.goal_cells));
  s->model = ModelBelief::uniform(models);
  s->trajectory.meta = {s->id, kind, goal, human_start, agent_start, s->seed, Outcome::InProgress};
  record_trace(*s);

  json out = snapshot_locked(*s);
  std::unique_lock lock(sessions_mutex_);
  sessions_[s->id] = s;
  return out;
}

json SessionService::move(const std::string& id, const json& body) {
  auto s = find(id);
  std::unique_lock lock(s->mutex, std::try_to_lock);
  if (!lock.owns_lock()) throw ApiError(409, "another move is in progress for session " + id);
  if (s->finished) throw ApiError(409, "session " + id + " is finished");
  if (!body.is_object() || !body.contains("action") || !body["action"].is_string()) {
    throw ApiError(400, "missing 'action'");
  }
  const GridConfig& config = bank_->config();
  const ActionSet legal = legal_actions(config, s->state.human);
  Action a_h;
  try {
    a_h = parse_action(body["action"].get<std::string>());
  } catch (const DomainError& e) {
    throw ApiError(422, e.what(), {{"legalActions", legal_json(legal)}});
  }
  if (!legal.contains(a_h)) {
    throw ApiError(422, "illegal action '" + std::string(to_string(a_h)) + "'", {{"legalActions", legal_json(legal)}});
  }

  const EnvState before = s->state;
  s->joint = update_joint_posterior(s->joint, *bank_, before, a_h);
  s->model = update_model_posterior(s->model, *bank_, s->goal, before, a_h);

  const EnvState mid = apply_human_move(config, before, a_h, s->goal);
  json agent_action = nullptr;
  TrajectoryStep st{before, a_h, std::nullopt};
  if (mid.status == Status::Active) {
    const Action a_r = sample_agent_action(config, s->condition, mid, s->rng);
    st.agent = a_r;
    agent_action = std::string(to_string(a_r));
    s->state = apply_agent_move(config, mid, a_r);
  } else {
    s->state = mid;
  }
  s->trajectory.steps.push_back(st);
  record_trace(*s);

  if (s->state.status != Status::Active) {
    s->finished = true;
    s->trajectory.meta.outcome =
        s->state.status == Status::GoalReached ? Outcome::GoalReached : Outcome::Collided;
  }
  return {{"humanState", state_json(mid)},
          {"agentAction", agent_action},
          {"state", state_json(s->state)},
          {"beliefs", beliefs_json(*s)},
          {"status", s->finished ? "finished" : "active"},
          {"outcome", std::string(to_string(s->trajectory.meta.outcome))},
          {"success", s->trajectory.meta.outcome == Outcome::GoalReached},
          {"legalActions", s->finished ? json::array() : legal_json(legal_actions(config, s->state.human))}};
}

json SessionService::snapshot(const std::string& id) const {
  auto s = find(id);
  std::shared_lock lock(s->mutex);
  return snapshot_locked(*s);
}

json SessionService::trace(const std::string& id) const {
  auto s = find(id);
  std::shared_lock lock(s->mutex);
  return {{"id", s->id}, {"trace", s->trace}};
}

json SessionService::finish(const std::string& id) {
  auto s = find(id);
  std::unique_lock lock(s->mutex, std::try_to_lock);
  if (!lock.owns_lock()) throw ApiError(409, "a move is in progress for session " + id);
  s->finished = true;
  const std::string record = io::trajectory_to_string(s->trajectory);
  json out = {{"id", s->id},
              {"outcome", std::string(to_string(s->trajectory.meta.outcome))},
              {"success", s->trajectory.success()},
              {"record", record}};
  if (!data_dir_.empty()) {
    const auto path = data_dir_ / (s->id + ".jsonl");
    std::filesystem::create_directories(data_dir_);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << record;
    out["path"] = path.string();
  }
  return out;
}

void SessionService::mount(httplib::Server& server) {
  auto handle = [](httplib::Response& res, auto&& fn) {
    try {
      res.set_content(fn().dump(), "application/json");
    } catch (const ApiError& e) {
      json body = {{"error", e.what()}};
      body.update(e.details());
      res.status = e.status();
      res.set_content(body.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  };
  auto parse_body = [](const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
      return json::parse(req.body);
    } catch (const json::parse_error& e) {
      throw ApiError(400, std::string("malformed JSON: ") + e.what());
    }
  };

  server.Post("/sessions", [=, this](const httplib::Request& req, httplib::Response& res) {
    handle(res, [&] { return create(parse_body(req)); });
  });
  server.Post(R"(/sessions/([^/]+)/move)", [=, this](const httplib::Request& req, httplib::Response& res) {
    handle(res, [&] { return move(req.matches[1], parse_body(req)); });
  });
  server.Post(R"(/sessions/([^/]+)/finish)", [=, this](const httplib::Request& req, httplib::Response& res) {
    handle(res, [&] { return finish(req.matches[1]); });
  });
  server.Get(R"(/sessions/([^/]+)/trace)", [=, this](const httplib::Request& req, httplib::Response& res) {
    handle(res, [&] { return trace(req.matches[1]); });
  });
  server.Get(R"(/sessions/([^/]+))", [=, this](const httplib::Request& req, httplib::Response& res) {
    handle(res, [&] { return snapshot(req.matches[1]); });
  });
}

} // namespace tom
