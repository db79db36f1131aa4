#include "feedlens/session.hpp"

#include <algorithm>

#include "feedlens/error.hpp"
#include "feedlens/metrics.hpp"
#include "feedlens/rng.hpp"
#include "feedlens/search.hpp"

namespace feedlens {

using nlohmann::ordered_json;

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::feed: return "FEED";
    case Condition::search: return "SEARCH";
    case Condition::user_chat: return "USER_CHAT";
    case Condition::ai_init: return "AI_INIT";
  }
  return "FEED";
}

Condition parse_condition(std::string_view text) {
  if (text == "FEED") return Condition::feed;
  if (text == "SEARCH") return Condition::search;
  if (text == "USER_CHAT" || text == "USER-CHAT") return Condition::user_chat;
  if (text == "AI_INIT" || text == "AI-INIT") return Condition::ai_init;
  throw ValidationError("unknown condition '" + std::string(text) + "'");
}

Capabilities capabilities_of(Condition c) {
  switch (c) {
    case Condition::feed: return {};
    case Condition::search: return {true, false, false, false};
    case Condition::user_chat: return {false, true, false, false};
    case Condition::ai_init: return {false, true, true, true};
  }
  return {};
}

ordered_json SessionConfig::to_json() const {
  ordered_json j;
  j["blend_rate"] = blend_rate;
  j["target_purity"] = blend.target_purity;
  j["underrep_threshold"] = blend.underrep_threshold;
  j["undirected_sampling"] = feedlens::to_string(blend.undirected);
  j["min_impressions"] = analyzer.signals.min_impressions;
  j["min_evidence"] = analyzer.signals.min_evidence;
  j["signal_multiplier"] = analyzer.signals.signal_multiplier;
  j["dominance_top_n"] = analyzer.signals.dominance_top_n;
  j["trigger_items"] = trigger.trigger_items;
  j["eager_scroll_px"] = trigger.eager_scroll_px;
  j["min_elapsed_ms"] = trigger.min_elapsed_ms ? ordered_json(*trigger.min_elapsed_ms) : ordered_json(nullptr);
  j["proactivity"] = feedlens::to_string(proactivity);
  j["search_placement"] = search_placement == SearchPlacement::prepend ? "prepend" : "replace";
  j["search_max_items"] = search_max_items;
  return j;
}

SessionConfig SessionConfig::from_json(const ordered_json& j) {
  try {
    SessionConfig c;
    c.blend_rate = j.at("blend_rate").get<double>();
    c.blend.target_purity = j.at("target_purity").get<double>();
    c.blend.underrep_threshold = j.at("underrep_threshold").get<double>();
    c.analyzer.underrep_threshold = c.blend.underrep_threshold;
    c.blend.undirected = parse_undirected_sampling(j.at("undirected_sampling").get<std::string>());
    c.analyzer.signals.min_impressions = j.at("min_impressions").get<int>();
    c.analyzer.signals.min_evidence = j.at("min_evidence").get<int>();
    c.analyzer.signals.signal_multiplier = j.at("signal_multiplier").get<double>();
    c.analyzer.signals.dominance_top_n = j.at("dominance_top_n").get<int>();
    c.trigger.trigger_items = j.at("trigger_items").get<int>();
    c.trigger.eager_scroll_px = j.at("eager_scroll_px").get<std::int64_t>();
    if (!j.at("min_elapsed_ms").is_null()) c.trigger.min_elapsed_ms = j.at("min_elapsed_ms").get<std::int64_t>();
    c.proactivity = parse_proactivity(j.at("proactivity").get<std::string>());
    const auto placement = j.at("search_placement").get<std::string>();
    if (placement != "prepend" && placement != "replace") {
      throw ValidationError("unknown search placement '" + placement + "'");
    }
    c.search_placement = placement == "prepend" ? SearchPlacement::prepend : SearchPlacement::replace;
    c.search_max_items = j.at("search_max_items").get<std::size_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed session config: ") + e.what());
  }
}

ordered_json to_json(const FeedSpec& spec) {
  return {{"dominant_categories", spec.dominant_categories},
          {"concentration", spec.concentration},
          {"length", spec.length}};
}

FeedSpec feed_spec_from_json(const ordered_json& j) {
  try {
    FeedSpec s;
    s.dominant_categories = j.at("dominant_categories").get<std::vector<std::string>>();
    s.concentration = j.at("concentration").get<double>();
    s.length = j.at("length").get<int>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed feed spec: ") + e.what());
  }
}

std::uint64_t feed_seed_of(std::uint64_t session_seed) { return derive_seed(session_seed, "feed"); }

namespace {

std::uint64_t refresh_base_of(std::uint64_t session_seed) {
  return derive_seed(session_seed, "refresh");
}

FeedState initial_state(const Corpus& corpus, const std::string& session_id, const FeedSpec& spec,
                        std::uint64_t feed_seed, const SessionConfig& config) {
  const auto items = generate_biased_feed(corpus, spec, feed_seed, config.blend.underrep_threshold);
  return initialize_feed(session_id, items, config.blend_rate, config.blend);
}

}  // namespace

LiveSession::LiveSession(const Corpus& corpus, SessionSetup setup,
                         std::unique_ptr<AssistantProvider> provider)
    : corpus_(corpus),
      setup_(std::move(setup)),
      provider_(std::move(provider)),
      log_(setup_.session_id),
      dialogue_(setup_.session_id, *provider_, log_) {
  if (setup_.session_id.empty()) throw ValidationError("session_id is empty");
  if (!provider_) throw ValidationError("session needs a provider");
  setup_.feed_spec.validate();
  setup_.config.analyzer.underrep_threshold = setup_.config.blend.underrep_threshold;
  refresh_base_seed_ = refresh_base_of(setup_.seed);

  header_.session_id = setup_.session_id;
  header_.condition = std::string(to_string(setup_.condition));
  header_.feed_spec = to_json(setup_.feed_spec);
  header_.seeds = {{"session", setup_.seed},
                   {"feed", feed_seed_of(setup_.seed)},
                   {"refresh", refresh_base_seed_}};
  header_.wall_clock_start = setup_.wall_clock_start;
  header_.categories = corpus.category_ids();
  header_.config = setup_.config.to_json();

  feed_ = initial_state(corpus, setup_.session_id, setup_.feed_spec, feed_seed_of(setup_.seed),
                        setup_.config);
  log_initial_composition(feed_, log_, 0);
}

void LiveSession::attach_writer(std::shared_ptr<LogWriter> writer) {
  for (const auto& ev : log_.events()) writer->write(ev);
  log_.set_sink([writer](const BehaviorEvent& ev) { writer->write(ev); });
}

void LiveSession::begin_phase(std::string_view phase, std::int64_t t_ms) {
  log_.append(EventKind::phase_mark, t_ms, {{"phase", phase}, {"edge", "start"}});
  ai_fired_this_phase_ = false;
  dismissed_this_phase_ = false;
}

void LiveSession::end_phase(std::string_view phase, std::int64_t t_ms) {
  log_.append(EventKind::phase_mark, t_ms, {{"phase", phase}, {"edge", "end"}});
}

void LiveSession::require_tool(bool allowed, std::string_view what) const {
  if (!allowed) {
    throw CapabilityError(std::string(what) + " is not available under " +
                          std::string(to_string(setup_.condition)));
  }
  if (phase() && *phase() == kWarmupPhase) {
    throw CapabilityError(std::string(what) + " is not available during warm-up");
  }
}

void LiveSession::impression_enter(const std::string& item_id, std::int64_t t_ms) {
  record_impression(feed_, log_, item_id, t_ms);
  maybe_trigger(t_ms, false);
}

ImpressionRecord LiveSession::impression_exit(const std::string& item_id, std::int64_t t_ms) {
  return close_impression(feed_, log_, item_id, t_ms);
}

void LiveSession::scroll(std::int64_t position_px, std::int64_t t_ms) {
  record_scroll(feed_, log_, position_px, t_ms);
  maybe_trigger(t_ms, false);
}

void LiveSession::click(const std::string& target, std::int64_t t_ms) {
  if (target.empty()) throw ValidationError("click target is empty");
  log_.append(EventKind::click, t_ms, {{"target", target}});
  if (target == kAnalyzeRequestTarget) maybe_trigger(t_ms, true);
}

std::uint64_t LiveSession::refresh_seed() const {
  return derive_seed(refresh_base_seed_, static_cast<std::uint64_t>(feed_.refresh_count));
}

RefreshResult LiveSession::pull_refresh(std::int64_t t_ms) {
  log_.append(EventKind::refresh, t_ms, {{"rewind", true}});
  rewind(feed_);
  auto result = refresh_feed(feed_, corpus_, refresh_seed(), log_, t_ms);
  maybe_trigger(t_ms, false);
  return result;
}

std::vector<ContentItem> LiveSession::search(std::string_view query, std::int64_t t_ms) {
  require_tool(capabilities_of(setup_.condition).search, "search");
  const auto results = search_corpus(corpus_, query);
  log_.append(EventKind::search_query, t_ms,
              {{"query", query}, {"chars", char_count(query)}, {"result_count", results.size()}});
  const auto ids = apply_search_results(feed_, log_, results, setup_.config.search_placement,
                                        setup_.config.search_max_items, t_ms);
  std::vector<ContentItem> shown;
  for (const auto& id : ids) shown.push_back(*corpus_.find_item(id));
  return shown;
}

void LiveSession::open_chat(std::string_view text, std::int64_t t_ms) {
  require_tool(setup_.condition == Condition::user_chat, "opening a chat");
  dialogue_.open_user(text, t_ms);
  after_dialogue_action(t_ms);
}

void LiveSession::select_option(std::string option_id, std::int64_t t_ms) {
  require_tool(capabilities_of(setup_.condition).options, "option selection");
  dialogue_.select_option(std::move(option_id), t_ms);
  after_dialogue_action(t_ms);
}

void LiveSession::send_text(std::string_view text, std::int64_t t_ms) {
  require_tool(capabilities_of(setup_.condition).chat, "chat");
  dialogue_.submit_free_text(text, t_ms);
  after_dialogue_action(t_ms);
}

void LiveSession::dismiss(std::int64_t t_ms) {
  require_tool(capabilities_of(setup_.condition).chat, "dismiss");
  dialogue_.dismiss(t_ms);
  dismissed_this_phase_ = true;
}

void LiveSession::survey(const ordered_json& answers, std::int64_t t_ms) {
  log_.append(EventKind::survey_response, t_ms, answers);
}

std::vector<Notification> LiveSession::drain_notifications() {
  std::vector<Notification> out;
  out.swap(pending_);
  return out;
}

void LiveSession::after_dialogue_action(std::int64_t t_ms) {
  if (dialogue_.session().stage != Stage::blending) return;
  dialogue_.confirm_blend(feed_, corpus_, t_ms);
  const auto& last = log_.events().back();
  pending_.push_back({"blend_confirmed",
                      {{"direction", to_json(*feed_.direction)},
                       {"text", last.payload["text"]},
                       {"dialogue", to_json(dialogue_.session())}}});
}

void LiveSession::maybe_trigger(std::int64_t t_ms, bool explicit_request) {
  if (!capabilities_of(setup_.condition).ai_trigger) return;
  if (phase() && *phase() == kWarmupPhase) return;
  const Stage stage = dialogue_.session().stage;
  if (stage != Stage::idle && stage != Stage::dismissed) return;
  if (!explicit_request) {
    if (dismissed_this_phase_) return;
    if (setup_.config.proactivity == ProactivityLevel::reactive) return;
    if (setup_.config.proactivity == ProactivityLevel::moderate && ai_fired_this_phase_) return;
  }
  const auto decision = should_trigger(log_.view(), setup_.config.proactivity, setup_.config.trigger);
  if (!decision.fire) return;
  const bool ai = !explicit_request;
  log_.append(EventKind::trigger, t_ms,
              {{"source", ai ? "ai" : "user_request"},
               {"reason", decision.reason},
               {"policy", to_string(setup_.config.proactivity)}});
  if (ai) ai_fired_this_phase_ = true;
  const auto insight =
      build_insight(feed_, log_.view(), header_.categories, setup_.config.analyzer);
  dialogue_.open_ai(insight, t_ms);
  const auto& last = log_.events().back();
  pending_.push_back({"trigger",
                      {{"source", ai ? "ai" : "user_request"},
                       {"text", last.payload["text"]},
                       {"options", last.payload["options"]},
                       {"dialogue", to_json(dialogue_.session())}}});
}

namespace {

class FeedReplayer final : public EventConsumer {
 public:
  FeedReplayer(const Corpus& corpus, FeedState state, std::string session_id)
      : corpus_(corpus), state_(std::move(state)), scratch_(std::move(session_id)) {}

  void consume(const BehaviorEvent& ev) override {
    const auto& p = ev.payload;
    switch (ev.kind) {
      case EventKind::impression_enter:
        record_impression(state_, scratch_, p["item_id"].get<std::string>(), ev.t_ms);
        break;
      case EventKind::impression_exit:
        close_impression(state_, scratch_, p["item_id"].get<std::string>(), ev.t_ms);
        break;
      case EventKind::scroll:
        record_scroll(state_, scratch_, p["position_px"].get<std::int64_t>(), ev.t_ms);
        break;
      case EventKind::refresh:
        scratch_.append(ev.kind, ev.t_ms, p);
        if (p["rewind"].get<bool>()) rewind(state_);
        break;
      case EventKind::composition_change: {
        const auto reason = p["reason"].get<std::string>();
        if (reason == "initial") {
          log_initial_composition(state_, scratch_, ev.t_ms);
        } else if (reason == "refresh") {
          refresh_feed(state_, corpus_, p["seed"].get<std::uint64_t>(), scratch_, ev.t_ms);
        } else if (reason == "direction") {
          set_direction(state_, scratch_, corpus_, direction_from_json(p["direction"]), ev.t_ms);
        } else if (reason == "search") {
          std::vector<ContentItem> items;
          for (const auto& id : p["inserted"]) {
            const auto* item = corpus_.find_item(id.get<std::string>());
            if (item == nullptr) throw ParseError("search inserted unknown item " + id.dump());
            items.push_back(*item);
          }
          const auto placement =
              p["placement"] == "prepend" ? SearchPlacement::prepend : SearchPlacement::replace;
          apply_search_results(state_, scratch_, items, placement, items.size(), ev.t_ms);
        } else {
          throw ParseError("unknown composition_change reason '" + reason + "'");
        }
        break;
      }
      default:
        scratch_.append(ev.kind, ev.t_ms, p);
        break;
    }
    if (to_line(scratch_.events().back()) != to_line(ev)) {
      throw ParseError("replay diverged at seq " + std::to_string(ev.seq) + ": expected " +
                       to_line(ev) + " got " + to_line(scratch_.events().back()));
    }
  }

  FeedState& state() { return state_; }

 private:
  const Corpus& corpus_;
  FeedState state_;
  EventStream scratch_;
};

class DialogueReplayer final : public EventConsumer {
 public:
  explicit DialogueReplayer(std::string session_id) { session_.session_id = std::move(session_id); }

  void consume(const BehaviorEvent& ev) override {
    if (ev.payload.is_object() && ev.payload.contains("dialogue")) {
      session_ = dialogue_from_json(ev.payload["dialogue"]);
    }
  }

  DialogueSession& session() { return session_; }

 private:
  DialogueSession session_;
};

}  // namespace

ReplayedSession replay_session(const Corpus& corpus, const LogHeader& header,
                               const EventStream& stream) {
  const auto spec = feed_spec_from_json(header.feed_spec);
  const auto config = SessionConfig::from_json(header.config);
  const auto feed_seed = header.seeds.at("feed").get<std::uint64_t>();
  FeedReplayer feed(corpus, initial_state(corpus, header.session_id, spec, feed_seed, config),
                    header.session_id);
  DialogueReplayer dialogue(header.session_id);
  EventConsumer* consumers[] = {&feed, &dialogue};
  try {
    replay(stream, consumers);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(std::string("replay failed: ") + e.what());
  }
  return {std::move(feed.state()), std::move(dialogue.session())};
}

}  // namespace feedlens
