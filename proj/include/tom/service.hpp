#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "tom/inference.hpp"
#include "tom/planner.hpp"
#include "tom/trajectory.hpp"

namespace httplib {
class Server;
}

namespace tom {

// Error surfaced to HTTP clients with its status code.
class ApiError : public std::runtime_error {
public:
  ApiError(int status, const std::string& what, nlohmann::json details = nlohmann::json::object())
      : std::runtime_error(what), status_(status), details_(std::move(details)) {}
  int status() const { return status_; }
  const nlohmann::json& details() const { return details_; }

private:
  int status_;
  nlohmann::json details_;
};

struct Session {
  std::string id;
  std::uint64_t seed = 0;
  AgentModel condition;
  Cell goal;
  EnvState state;
  JointBelief joint;
  ModelBelief model; // known-goal track
  Trajectory trajectory;
  std::mt19937_64 rng;
  bool finished = false;
  std::vector<nlohmann::json> trace;
  mutable std::shared_mutex mutex;
};

// In-memory live-play sessions with per-move inference. Every method takes
// and returns JSON bodies of the HTTP API.
class SessionService {
public:
  explicit SessionService(std::shared_ptr<const TableBank> bank, std::filesystem::path data_dir = {});

  nlohmann::json create(const nlohmann::json& body);
  nlohmann::json move(const std::string& id, const nlohmann::json& body);
  nlohmann::json snapshot(const std::string& id) const;
  nlohmann::json trace(const std::string& id) const;
  nlohmann::json finish(const std::string& id);

  // Registers the routes on an httplib server.
  void mount(httplib::Server& server);

  const TableBank& bank() const { return *bank_; }

private:
  std::shared_ptr<Session> find(const std::string& id) const;
  nlohmann::json beliefs_json(const Session& s) const;
  nlohmann::json snapshot_locked(const Session& s) const;
  void record_trace(Session& s);

  std::shared_ptr<const TableBank> bank_;
  std::filesystem::path data_dir_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::atomic<std::uint64_t> counter_{0};
  std::uint64_t instance_salt_;
};

} // namespace tom
