#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "feedlens/analyzer.hpp"
#include "feedlens/corpus.hpp"
#include "feedlens/dialogue.hpp"
#include "feedlens/event_log.hpp"
#include "feedlens/feed_engine.hpp"
#include "feedlens/provider.hpp"

namespace feedlens {

enum class Condition { feed, search, user_chat, ai_init };

std::string_view to_string(Condition c);
// Accepts FEED, SEARCH, USER_CHAT, AI_INIT (and the hyphenated forms).
Condition parse_condition(std::string_view text);

struct Capabilities {
  bool search = false;
  bool chat = false;
  bool options = false;
  bool ai_trigger = false;
};

Capabilities capabilities_of(Condition c);

struct SessionConfig {
  double blend_rate = 0.25;
  BlendOptions blend;
  AnalyzerConfig analyzer;
  TriggerConfig trigger;
  ProactivityLevel proactivity = ProactivityLevel::moderate;
  SearchPlacement search_placement = SearchPlacement::prepend;
  std::size_t search_max_items = 10;

  nlohmann::ordered_json to_json() const;
  static SessionConfig from_json(const nlohmann::ordered_json& j);
};

nlohmann::ordered_json to_json(const FeedSpec& spec);
FeedSpec feed_spec_from_json(const nlohmann::ordered_json& j);

struct SessionSetup {
  std::string session_id;
  Condition condition = Condition::feed;
  FeedSpec feed_spec;
  std::uint64_t seed = 0;
  std::string wall_clock_start;
  SessionConfig config;
};

// Server-push messages: "trigger" (the assistant has something to show) and
// "blend_confirmed".
struct Notification {
  std::string type;
  nlohmann::ordered_json body;
};

// One participant session under one condition: feed, dialogue, and log,
// with condition capabilities enforced. Not thread-safe; callers serialize.
class LiveSession {
 public:
  LiveSession(const Corpus& corpus, SessionSetup setup, std::unique_ptr<AssistantProvider> provider);

  const LogHeader& header() const { return header_; }
  const EventStream& log() const { return log_; }
  const FeedState& feed() const { return feed_; }
  const DialogueSession& dialogue() const { return dialogue_.session(); }
  Condition condition() const { return setup_.condition; }
  const SessionConfig& config() const { return setup_.config; }
  std::optional<std::string> phase() const { return log_.open_phase(); }

  // Writes the events logged so far, then every later event as it is logged.
  void attach_writer(std::shared_ptr<LogWriter> writer);

  void begin_phase(std::string_view phase, std::int64_t t_ms);
  void end_phase(std::string_view phase, std::int64_t t_ms);

  void impression_enter(const std::string& item_id, std::int64_t t_ms);
  ImpressionRecord impression_exit(const std::string& item_id, std::int64_t t_ms);
  void scroll(std::int64_t position_px, std::int64_t t_ms);
  // A click on kAnalyzeRequestTarget is an explicit analysis request.
  void click(const std::string& target, std::int64_t t_ms);
  RefreshResult pull_refresh(std::int64_t t_ms);

  std::vector<ContentItem> search(std::string_view query, std::int64_t t_ms);

  void open_chat(std::string_view text, std::int64_t t_ms);
  void select_option(std::string option_id, std::int64_t t_ms);
  void send_text(std::string_view text, std::int64_t t_ms);
  void dismiss(std::int64_t t_ms);

  void survey(const nlohmann::ordered_json& answers, std::int64_t t_ms);

  std::vector<Notification> drain_notifications();

 private:
  void require_tool(bool allowed, std::string_view what) const;
  void maybe_trigger(std::int64_t t_ms, bool explicit_request);
  void after_dialogue_action(std::int64_t t_ms);
  std::uint64_t refresh_seed() const;

  const Corpus& corpus_;
  SessionSetup setup_;
  std::unique_ptr<AssistantProvider> provider_;
  LogHeader header_;
  EventStream log_;
  FeedState feed_;
  DialogueOrchestrator dialogue_;
  std::uint64_t refresh_base_seed_ = 0;
  bool ai_fired_this_phase_ = false;
  bool dismissed_this_phase_ = false;
  std::vector<Notification> pending_;
};

// Header seeds used by a session created from `setup`.
std::uint64_t feed_seed_of(std::uint64_t session_seed);

struct ReplayedSession {
  FeedState feed;
  DialogueSession dialogue;
};

// Rebuilds feed and dialogue state from a log: the initial feed is regenerated
// from the header, feed events are re-executed against the engine (each
// re-derived event must match the logged one byte for byte), and dialogue
// state is restored from the logged snapshots. Throws ParseError on
// divergence.
ReplayedSession replay_session(const Corpus& corpus, const LogHeader& header,
                               const EventStream& stream);

}  // namespace feedlens
