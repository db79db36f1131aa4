#include "feedlens/dialogue.hpp"

#include <algorithm>
#include <cctype>

#include "feedlens/error.hpp"

namespace feedlens {

using nlohmann::ordered_json;

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::idle: return "Idle";
    case Stage::insight_shown: return "InsightShown";
    case Stage::awaiting_response: return "AwaitingResponse";
    case Stage::narrowing: return "Narrowing";
    case Stage::blending: return "Blending";
    case Stage::dismissed: return "Dismissed";
  }
  return "Idle";
}

Stage parse_stage(std::string_view text) {
  for (auto s : {Stage::idle, Stage::insight_shown, Stage::awaiting_response, Stage::narrowing,
                 Stage::blending, Stage::dismissed}) {
    if (to_string(s) == text) return s;
  }
  throw ValidationError("unknown dialogue stage '" + std::string(text) + "'");
}

std::string_view to_string(Initiation initiation) {
  return initiation == Initiation::ai_initiated ? "ai_initiated" : "user_initiated";
}

Initiation parse_initiation(std::string_view text) {
  if (text == "ai_initiated") return Initiation::ai_initiated;
  if (text == "user_initiated") return Initiation::user_initiated;
  throw ValidationError("unknown initiation '" + std::string(text) + "'");
}

ordered_json to_json(const DialogueSession& s) {
  ordered_json j;
  j["session_id"] = s.session_id;
  j["stage"] = to_string(s.stage);
  j["insight"] = s.insight ? to_json(*s.insight) : ordered_json(nullptr);
  ordered_json opts = ordered_json::array();
  for (const auto& o : s.presented_options) opts.push_back(to_json(o));
  j["presented_options"] = std::move(opts);
  j["narrowing_rounds_used"] = s.narrowing_rounds_used;
  j["chosen_direction"] = s.chosen_direction ? to_json(*s.chosen_direction) : ordered_json(nullptr);
  j["turn_count"] = s.turn_count;
  j["initiation"] = to_string(s.initiation);
  j["cycles_completed"] = s.cycles_completed;
  return j;
}

DialogueSession dialogue_from_json(const ordered_json& j) {
  try {
    DialogueSession s;
    s.session_id = j.at("session_id").get<std::string>();
    s.stage = parse_stage(j.at("stage").get<std::string>());
    if (!j.at("insight").is_null()) s.insight = insight_from_json(j.at("insight"));
    for (const auto& o : j.at("presented_options")) s.presented_options.push_back(option_from_json(o));
    s.narrowing_rounds_used = j.at("narrowing_rounds_used").get<int>();
    if (!j.at("chosen_direction").is_null()) {
      s.chosen_direction = direction_from_json(j.at("chosen_direction"));
    }
    s.turn_count = j.at("turn_count").get<int>();
    s.initiation = parse_initiation(j.at("initiation").get<std::string>());
    s.cycles_completed = j.at("cycles_completed").get<int>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed dialogue snapshot: ") + e.what());
  }
}

namespace {

ordered_json options_json(const std::vector<ExplorationOption>& options) {
  ordered_json out = ordered_json::array();
  for (const auto& o : options) out.push_back(to_json(o));
  return out;
}

std::string require_text(std::string_view text) {
  const bool blank = std::all_of(text.begin(), text.end(),
                                 [](unsigned char c) { return std::isspace(c) != 0; });
  if (blank) throw ValidationError("message text is empty");
  return std::string(text);
}

}  // namespace

DialogueOrchestrator::DialogueOrchestrator(std::string session_id, AssistantProvider& provider,
                                           EventStream& log)
    : provider_(provider), log_(log) {
  session_.session_id = std::move(session_id);
}

ProviderResponse DialogueOrchestrator::ask(ProviderRequest request, std::int64_t t_ms) {
  ProviderResponse r = provider_.generate(request);
  if (r.fallback_reason) {
    log_.append(EventKind::provider_fallback, t_ms,
                {{"reason", *r.fallback_reason}, {"request_kind", to_string(request.kind)}});
  }
  return r;
}

void DialogueOrchestrator::start_cycle(Initiation initiation) {
  session_.initiation = initiation;
  session_.narrowing_rounds_used = 0;
  session_.chosen_direction.reset();
  session_.presented_options.clear();
}

void DialogueOrchestrator::assistant_turn(std::string_view kind, const ProviderResponse& reply,
                                          std::int64_t t_ms) {
  ordered_json payload;
  payload["role"] = "assistant";
  payload["text"] = reply.text;
  payload["turn_kind"] = kind;
  payload["provider"] = to_string(reply.provider_tag);
  payload["options"] = options_json(session_.presented_options);
  payload["direction"] = reply.direction ? to_json(*reply.direction) : ordered_json(nullptr);
  payload["dialogue"] = to_json(session_);
  log_.append(EventKind::dialogue_turn, t_ms, std::move(payload));
}

void DialogueOrchestrator::open_ai(const InsightReport& insight, std::int64_t t_ms) {
  if (session_.stage != Stage::idle && session_.stage != Stage::dismissed) {
    throw StateError("cannot open a dialogue in stage " + std::string(to_string(session_.stage)));
  }
  const DialogueSession prior = session_;
  start_cycle(Initiation::ai_initiated);
  session_.insight = insight;
  session_.stage = Stage::insight_shown;
  const auto text = ask({RequestKind::insight_text, InsightPayload{insight}}, t_ms);
  auto opts = ask({RequestKind::option_set, InsightPayload{insight}}, t_ms);
  if (!opts.options || opts.options->size() < 3 || opts.options->size() > 4) {
    session_ = prior;
    throw CapabilityError("provider returned an invalid option set");
  }
  session_.presented_options = *opts.options;
  session_.stage = Stage::awaiting_response;
  ++session_.turn_count;
  assistant_turn("insight", text, t_ms);
}

void DialogueOrchestrator::open_user(std::string_view text, std::int64_t t_ms) {
  if (session_.stage != Stage::idle && session_.stage != Stage::dismissed) {
    throw StateError("cannot open a dialogue in stage " + std::string(to_string(session_.stage)));
  }
  const std::string msg = require_text(text);
  start_cycle(Initiation::user_initiated);
  session_.insight.reset();
  session_.stage = Stage::awaiting_response;
  ++session_.turn_count;
  log_.append(EventKind::free_text, t_ms,
              {{"text", msg}, {"chars", char_count(msg)}, {"opening", true}});
  handle_text_reply(ask({RequestKind::map_free_text, FreeTextPayload{msg}}, t_ms), t_ms);
}

void DialogueOrchestrator::select_option(std::string option_id, std::int64_t t_ms) {
  if (session_.stage != Stage::awaiting_response && session_.stage != Stage::narrowing) {
    throw StateError("cannot select an option in stage " + std::string(to_string(session_.stage)));
  }
  const auto it = std::find_if(session_.presented_options.begin(), session_.presented_options.end(),
                               [&](const ExplorationOption& o) { return o.option_id == option_id; });
  if (it == session_.presented_options.end()) {
    throw ValidationError("option '" + option_id + "' is not among the presented options");
  }
  const ExplorationOption chosen = *it;
  const bool was_narrowing = session_.stage == Stage::narrowing;
  ++session_.turn_count;

  const bool can_narrow = !was_narrowing && session_.narrowing_rounds_used == 0 &&
                          chosen.direction.mode != DirectionMode::surprise &&
                          !chosen.direction.refinement;
  if (can_narrow) {
    auto reply = ask({RequestKind::narrowing_set, NarrowingPayload{chosen.direction, session_.insight}},
                     t_ms);
    if (reply.options && reply.options->size() >= 2 && reply.options->size() <= 4) {
      session_.stage = Stage::narrowing;
      session_.narrowing_rounds_used = 1;
      session_.chosen_direction = chosen.direction;
      session_.presented_options = *reply.options;
      log_.append(EventKind::option_select, t_ms,
                  {{"option_id", option_id},
                   {"chars", 0},
                   {"kind", to_string(chosen.kind)},
                   {"direction", to_json(chosen.direction)}});
      assistant_turn("narrowing", reply, t_ms);
      return;
    }
  }
  session_.chosen_direction = chosen.direction;
  session_.presented_options.clear();
  session_.stage = Stage::blending;
  log_.append(EventKind::option_select, t_ms,
              {{"option_id", option_id},
               {"chars", 0},
               {"kind", to_string(chosen.kind)},
               {"direction", to_json(chosen.direction)},
               {"dialogue", to_json(session_)}});
}

void DialogueOrchestrator::handle_text_reply(const ProviderResponse& reply, std::int64_t t_ms) {
  if (reply.direction) {
    session_.chosen_direction = reply.direction;
    session_.presented_options.clear();
    session_.stage = Stage::blending;
  }
  assistant_turn(reply.direction ? "mapped" : "clarify", reply, t_ms);
}

void DialogueOrchestrator::submit_free_text(std::string_view text, std::int64_t t_ms) {
  const Stage st = session_.stage;
  const bool reengage = st == Stage::idle && session_.cycles_completed > 0;
  if (st != Stage::awaiting_response && st != Stage::narrowing && st != Stage::blending && !reengage) {
    throw StateError("cannot send text in stage " + std::string(to_string(st)));
  }
  const std::string msg = require_text(text);
  if (reengage) {
    start_cycle(session_.initiation);
    session_.stage = Stage::awaiting_response;
  }
  ++session_.turn_count;
  log_.append(EventKind::free_text, t_ms,
              {{"text", msg}, {"chars", char_count(msg)}});
  handle_text_reply(ask({RequestKind::map_free_text, FreeTextPayload{msg}}, t_ms), t_ms);
}

void DialogueOrchestrator::confirm_blend(FeedState& feed, const Corpus& corpus, std::int64_t t_ms) {
  if (session_.stage != Stage::blending || !session_.chosen_direction) {
    throw StateError("nothing to confirm in stage " + std::string(to_string(session_.stage)));
  }
  const Direction dir = *session_.chosen_direction;
  set_direction(feed, log_, corpus, dir, t_ms);
  auto reply = ask({RequestKind::confirmation_text, ConfirmationPayload{dir}}, t_ms);
  session_.stage = Stage::idle;
  session_.presented_options.clear();
  session_.narrowing_rounds_used = 0;
  ++session_.cycles_completed;
  reply.direction = dir;
  assistant_turn("confirmation", reply, t_ms);
}

void DialogueOrchestrator::dismiss(std::int64_t t_ms) {
  if (session_.stage == Stage::dismissed) return;
  if (session_.stage == Stage::idle) throw StateError("no open dialogue to dismiss");
  const Stage from = session_.stage;
  session_.stage = Stage::dismissed;
  session_.chosen_direction.reset();
  session_.presented_options.clear();
  log_.append(EventKind::dismiss, t_ms,
              {{"from_stage", to_string(from)}, {"dialogue", to_json(session_)}});
}

}  // namespace feedlens
