#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "feedlens/corpus.hpp"
#include "feedlens/harness.hpp"
#include "feedlens/provider.hpp"
#include "feedlens/session.hpp"

namespace feedlens {

struct ServiceOptions {
  std::filesystem::path log_dir = "logs";
  SessionConfig config;
  std::string provider_mode = "template";
  RemoteConfig remote;
  // Read PROVIDER_MODE and friends from the environment instead.
  bool use_env_provider = false;
  std::size_t max_sessions = 64;
  // Sessions may be created by (participant_id, position) from these plans.
  std::vector<SessionPlan> plans;
  std::string wall_clock_start;
};

// HTTP front end over LiveSession. Routes and bodies are documented in
// docs/api.md.
class Service {
 public:
  Service(const Corpus& corpus, ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Blocking.
  bool listen(const std::string& host, int port);
  // Binds to an ephemeral port and returns it; then call run().
  int bind_any_port(const std::string& host);
  bool run();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace feedlens
