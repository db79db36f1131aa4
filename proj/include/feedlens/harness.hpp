#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "feedlens/corpus.hpp"
#include "feedlens/metrics.hpp"
#include "feedlens/provider.hpp"
#include "feedlens/session.hpp"

namespace feedlens {

struct SessionPlan {
  std::string participant_id;
  Condition group = Condition::ai_init;
  std::array<Condition, 3> conditions{};
  std::array<char, 3> feeds{};
  std::uint64_t seed = 0;
};

nlohmann::ordered_json to_json(const SessionPlan& plan);

// Half the participants per experimental group; baseline order and feed
// permutation chosen greedily to keep every (condition, feed, position) cell
// and every baseline order balanced. Throws ValidationError for odd or
// non-positive n.
std::vector<SessionPlan> plan_study(int n_participants, std::uint64_t master_seed);

// Seed of the session run for position `position` of a plan.
std::uint64_t session_seed(const SessionPlan& plan, std::size_t position);
std::string session_id(const SessionPlan& plan, std::size_t position);

enum class AgentKind { passive_scroller, searcher, chat_initiator, option_clicker };

std::string_view to_string(AgentKind kind);
AgentKind default_agent(Condition condition);

struct AgentPolicy {
  AgentKind kind = AgentKind::passive_scroller;
  std::map<std::string, double> interest;
  std::string latent;
  double engage_probability = 0.5;
  int boredom_threshold = 30;
};

// Interest weights for a feed: dominant categories low, one scattered
// category as the latent interest, everything else lower still.
AgentPolicy make_policy(AgentKind kind, const std::vector<ContentItem>& feed,
                        const FeedSpec& spec, const std::vector<std::string>& categories,
                        std::uint64_t seed, double engage_probability);

// Message templates of the simulated agents: "specific", "vague", or
// "variety". "{c}" stands for a category display name.
std::vector<std::string_view> agent_message_templates(std::string_view pool);

struct Durations {
  std::int64_t warmup_ms = 5 * 60 * 1000;
  std::int64_t exploration_ms = 15 * 60 * 1000;
};

// "warmup=5m,explore=15m"; units ms, s, m.
Durations parse_durations(std::string_view text);

struct HarnessConfig {
  SessionConfig session;
  Durations durations;
  double engage_probability = 0.5;
  std::string provider_mode = "template";
  RemoteConfig remote;
  MetricsConfig metrics;
  std::string wall_clock_start = "2000-01-01T00:00:00Z";

  HarnessConfig();
};

// key = value lines; '#' starts a comment. Unknown keys and bad values throw
// ValidationError naming the line.
HarnessConfig parse_config(std::istream& in, HarnessConfig base = {});
HarnessConfig load_config_file(const std::filesystem::path& path, HarnessConfig base = {});

std::unique_ptr<AssistantProvider> make_provider(const HarnessConfig& config,
                                                 const std::vector<Category>& categories);

struct SessionOutcome {
  std::string participant_id;
  Condition condition = Condition::feed;
  char feed = 'A';
  AgentPolicy policy;
  LogHeader header;
  EventStream log;
  FeedState final_feed;
  DialogueSession final_dialogue;
  SessionMetrics metrics;
  std::optional<std::filesystem::path> log_path;
};

// Runs one simulated session: warm-up then exploration with phase marks,
// driven by the agent on a simulated clock.
SessionOutcome run_condition(const Corpus& corpus, const SessionSetup& setup,
                             const AgentPolicy& policy, const Durations& durations,
                             std::unique_ptr<AssistantProvider> provider,
                             const MetricsConfig& metrics = {});

SessionSetup make_setup(const SessionPlan& plan, std::size_t position, const HarnessConfig& config);

// The three sessions of one participant. Logs are written under out_dir when
// given.
std::vector<SessionOutcome> run_session(const Corpus& corpus, const SessionPlan& plan,
                                        const HarnessConfig& config,
                                        const std::optional<std::filesystem::path>& out_dir = {});

struct StudyResult {
  std::vector<SessionPlan> plans;
  std::vector<SessionOutcome> sessions;
  ConditionTable table;
};

StudyResult run_study(const Corpus& corpus, int n_participants, std::uint64_t master_seed,
                      const HarnessConfig& config,
                      const std::optional<std::filesystem::path>& out_dir = {});

// Writes results.json, results.txt, and sessions.jsonl into out_dir.
void export_results(const StudyResult& result, const std::filesystem::path& out_dir);

}  // namespace feedlens
