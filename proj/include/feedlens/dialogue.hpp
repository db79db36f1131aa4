#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "feedlens/analyzer.hpp"
#include "feedlens/corpus.hpp"
#include "feedlens/event_log.hpp"
#include "feedlens/exploration.hpp"
#include "feedlens/feed_engine.hpp"
#include "feedlens/provider.hpp"

namespace feedlens {

enum class Stage { idle, insight_shown, awaiting_response, narrowing, blending, dismissed };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view text);

enum class Initiation { ai_initiated, user_initiated };

std::string_view to_string(Initiation initiation);
Initiation parse_initiation(std::string_view text);

struct DialogueSession {
  std::string session_id;
  Stage stage = Stage::idle;
  std::optional<InsightReport> insight;
  std::vector<ExplorationOption> presented_options;
  int narrowing_rounds_used = 0;
  std::optional<Direction> chosen_direction;
  int turn_count = 0;
  Initiation initiation = Initiation::ai_initiated;
  int cycles_completed = 0;

  bool operator==(const DialogueSession&) const = default;
};

nlohmann::ordered_json to_json(const DialogueSession& session);
DialogueSession dialogue_from_json(const nlohmann::ordered_json& j);

// Drives one DialogueSession. Every action logs its events to the session
// stream; the last event of each action carries a "dialogue" snapshot. Only
// confirm_blend touches the feed.
class DialogueOrchestrator {
 public:
  DialogueOrchestrator(std::string session_id, AssistantProvider& provider, EventStream& log);

  const DialogueSession& session() const { return session_; }

  // Idle or Dismissed -> AwaitingResponse with 3-4 options.
  void open_ai(const InsightReport& insight, std::int64_t t_ms);

  // Idle or Dismissed -> AwaitingResponse, or Blending when the message maps
  // to a direction. No options are generated.
  void open_user(std::string_view text, std::int64_t t_ms);

  void select_option(std::string option_id, std::int64_t t_ms);

  // Allowed in AwaitingResponse, Narrowing, Blending, and in Idle once a
  // cycle has completed (re-engagement).
  void submit_free_text(std::string_view text, std::int64_t t_ms);

  void confirm_blend(FeedState& feed, const Corpus& corpus, std::int64_t t_ms);

  // Any stage except Idle. A second dismiss is a no-op.
  void dismiss(std::int64_t t_ms);

  // Restores a session from a snapshot (replay).
  void restore(DialogueSession session) { session_ = std::move(session); }

 private:
  ProviderResponse ask(ProviderRequest request, std::int64_t t_ms);
  void start_cycle(Initiation initiation);
  void assistant_turn(std::string_view kind, const ProviderResponse& reply, std::int64_t t_ms);
  void handle_text_reply(const ProviderResponse& reply, std::int64_t t_ms);

  DialogueSession session_;
  AssistantProvider& provider_;
  EventStream& log_;
};

}  // namespace feedlens
