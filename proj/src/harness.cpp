#include "feedlens/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include "feedlens/error.hpp"
#include "feedlens/rng.hpp"

namespace feedlens {

using nlohmann::ordered_json;

ordered_json to_json(const SessionPlan& plan) {
  ordered_json conds = ordered_json::array();
  ordered_json feeds = ordered_json::array();
  for (std::size_t i = 0; i < 3; ++i) {
    conds.push_back(to_string(plan.conditions[i]));
    feeds.push_back(std::string(1, plan.feeds[i]));
  }
  return {{"participant_id", plan.participant_id},
          {"group", to_string(plan.group)},
          {"conditions", conds},
          {"feeds", feeds},
          {"seed", plan.seed}};
}

std::vector<SessionPlan> plan_study(int n, std::uint64_t master_seed) {
  if (n <= 0 || n % 2 != 0) {
    throw ValidationError("participant count must be positive and even, got " + std::to_string(n));
  }
  Rng rng(derive_seed(master_seed, "plan"));
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(std::span<int>(order));
  std::vector<Condition> group(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    group[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] =
        k < n / 2 ? Condition::ai_init : Condition::user_chat;
  }

  struct Pattern {
    int baseline_order;
    std::array<char, 3> feeds;
  };
  std::vector<Pattern> patterns;
  for (int o = 0; o < 2; ++o) {
    std::array<char, 3> perm{'A', 'B', 'C'};
    do {
      patterns.push_back({o, perm});
    } while (std::next_permutation(perm.begin(), perm.end()));
  }

  std::map<std::tuple<Condition, char, int>, int> cells;
  std::map<std::pair<Condition, int>, int> orders;
  const int width = std::max(2, static_cast<int>(std::to_string(n).size()));
  std::vector<SessionPlan> plans;
  for (int p = 0; p < n; ++p) {
    const Condition g = group[static_cast<std::size_t>(p)];
    auto layout = [&](const Pattern& pat) {
      std::array<Condition, 3> c{};
      c[0] = pat.baseline_order == 0 ? Condition::feed : Condition::search;
      c[1] = pat.baseline_order == 0 ? Condition::search : Condition::feed;
      c[2] = g;
      return c;
    };
    std::vector<std::size_t> candidates(patterns.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = i;
    rng.shuffle(std::span<std::size_t>(candidates));
    std::size_t best = candidates.front();
    long best_cost = -1;
    for (const auto ci : candidates) {
      const auto& pat = patterns[ci];
      const auto conds = layout(pat);
      long cost = 0;
      for (int pos = 0; pos < 3; ++pos) {
        const auto it = cells.find({conds[static_cast<std::size_t>(pos)], pat.feeds[static_cast<std::size_t>(pos)], pos});
        const long c = it == cells.end() ? 0 : it->second;
        cost += 2 * c + 1;
      }
      const auto oit = orders.find({g, pat.baseline_order});
      const long oc = oit == orders.end() ? 0 : oit->second;
      cost += 3 * (2 * oc + 1);
      if (best_cost < 0 || cost < best_cost) {
        best_cost = cost;
        best = ci;
      }
    }
    const auto& pat = patterns[best];
    SessionPlan plan;
    std::string id = std::to_string(p + 1);
    plan.participant_id = "P" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
    plan.group = g;
    plan.conditions = layout(pat);
    plan.feeds = pat.feeds;
    plan.seed = derive_seed(master_seed, static_cast<std::uint64_t>(p));
    for (int pos = 0; pos < 3; ++pos) {
      ++cells[{plan.conditions[static_cast<std::size_t>(pos)], plan.feeds[static_cast<std::size_t>(pos)], pos}];
    }
    ++orders[{g, pat.baseline_order}];
    plans.push_back(std::move(plan));
  }
  return plans;
}

std::uint64_t session_seed(const SessionPlan& plan, std::size_t position) {
  return derive_seed(plan.seed, static_cast<std::uint64_t>(position));
}

std::string session_id(const SessionPlan& plan, std::size_t position) {
  return plan.participant_id + "-" + std::string(to_string(plan.conditions.at(position)));
}

std::string_view to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::passive_scroller: return "passive_scroller";
    case AgentKind::searcher: return "searcher";
    case AgentKind::chat_initiator: return "chat_initiator";
    case AgentKind::option_clicker: return "option_clicker";
  }
  return "passive_scroller";
}

AgentKind default_agent(Condition condition) {
  switch (condition) {
    case Condition::feed: return AgentKind::passive_scroller;
    case Condition::search: return AgentKind::searcher;
    case Condition::user_chat: return AgentKind::chat_initiator;
    case Condition::ai_init: return AgentKind::option_clicker;
  }
  return AgentKind::passive_scroller;
}

AgentPolicy make_policy(AgentKind kind, const std::vector<ContentItem>& feed, const FeedSpec& spec,
                        const std::vector<std::string>& categories, std::uint64_t seed,
                        double engage_probability) {
  Rng rng(derive_seed(seed, "policy"));
  AgentPolicy p;
  p.kind = kind;
  p.engage_probability = engage_probability;
  std::set<std::string> scattered;
  for (const auto& item : feed) {
    if (std::find(spec.dominant_categories.begin(), spec.dominant_categories.end(), item.category) ==
        spec.dominant_categories.end()) {
      scattered.insert(item.category);
    }
  }
  if (scattered.empty()) throw ValidationError("feed has no scattered category for a latent interest");
  std::vector<std::string> pool(scattered.begin(), scattered.end());
  p.latent = pool[rng.below(pool.size())];
  for (const auto& c : categories) {
    const bool dominant = std::find(spec.dominant_categories.begin(), spec.dominant_categories.end(),
                                    c) != spec.dominant_categories.end();
    if (c == p.latent) {
      p.interest[c] = 0.8;
    } else if (dominant) {
      p.interest[c] = rng.uniform(0.2, 0.24);
    } else {
      p.interest[c] = rng.uniform(0.05, 0.2);
    }
  }
  p.boredom_threshold = 25 + static_cast<int>(rng.below(16));
  return p;
}

Durations parse_durations(std::string_view text) {
  Durations d;
  std::string s(text);
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ValidationError("duration '" + part + "' needs key=value");
    const std::string key = part.substr(0, eq);
    const std::string value = part.substr(eq + 1);
    std::size_t used = 0;
    double amount = 0.0;
    try {
      amount = std::stod(value, &used);
    } catch (const std::exception&) {
      throw ValidationError("bad duration value '" + value + "'");
    }
    const std::string unit = value.substr(used);
    double scale = 0.0;
    if (unit == "ms") scale = 1.0;
    else if (unit == "s") scale = 1000.0;
    else if (unit == "m" || unit.empty()) scale = 60000.0;
    else throw ValidationError("unknown duration unit '" + unit + "'");
    const auto ms = static_cast<std::int64_t>(std::llround(amount * scale));
    if (ms <= 0) throw ValidationError("duration must be positive: '" + part + "'");
    if (key == "warmup") d.warmup_ms = ms;
    else if (key == "explore" || key == "exploration") d.exploration_ms = ms;
    else throw ValidationError("unknown duration key '" + key + "'");
  }
  return d;
}

HarnessConfig::HarnessConfig() {
  session.blend.undirected = UndirectedSampling::composition_matched;
}

namespace {

double parse_double(const std::string& v, const std::string& where) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ValidationError(where + ": expected a number, got '" + v + "'");
  }
  return out;
}

std::int64_t parse_int(const std::string& v, const std::string& where) {
  std::int64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ValidationError(where + ": expected an integer, got '" + v + "'");
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

HarnessConfig parse_config(std::istream& in, HarnessConfig c) {
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(no);
    if (eq == std::string::npos) throw ValidationError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string v = trim(line.substr(eq + 1));
    try {
      if (key == "blend_rate") c.session.blend_rate = parse_double(v, where);
      else if (key == "target_purity") c.session.blend.target_purity = parse_double(v, where);
      else if (key == "underrep_threshold") {
        c.session.blend.underrep_threshold = parse_double(v, where);
        c.session.analyzer.underrep_threshold = c.session.blend.underrep_threshold;
        c.metrics.underrep_threshold = c.session.blend.underrep_threshold;
      } else if (key == "undirected_sampling") c.session.blend.undirected = parse_undirected_sampling(v);
      else if (key == "trigger_items") c.session.trigger.trigger_items = static_cast<int>(parse_int(v, where));
      else if (key == "eager_scroll_px") c.session.trigger.eager_scroll_px = parse_int(v, where);
      else if (key == "min_elapsed_ms") c.session.trigger.min_elapsed_ms = parse_int(v, where);
      else if (key == "proactivity") c.session.proactivity = parse_proactivity(v);
      else if (key == "min_impressions") c.session.analyzer.signals.min_impressions = static_cast<int>(parse_int(v, where));
      else if (key == "min_evidence") c.session.analyzer.signals.min_evidence = static_cast<int>(parse_int(v, where));
      else if (key == "signal_multiplier") c.session.analyzer.signals.signal_multiplier = parse_double(v, where);
      else if (key == "dominance_top_n") c.session.analyzer.signals.dominance_top_n = static_cast<int>(parse_int(v, where));
      else if (key == "search_placement") {
        if (v != "prepend" && v != "replace") throw ValidationError("unknown search placement '" + v + "'");
        c.session.search_placement = v == "prepend" ? SearchPlacement::prepend : SearchPlacement::replace;
      } else if (key == "search_max_items") c.session.search_max_items = static_cast<std::size_t>(parse_int(v, where));
      else if (key == "engage_probability") c.engage_probability = parse_double(v, where);
      else if (key == "provider_mode") {
        if (v != "template" && v != "remote") throw ValidationError("provider_mode must be template or remote");
        c.provider_mode = v;
      } else if (key == "remote_base_url") c.remote.base_url = v;
      else if (key == "remote_model") c.remote.model = v;
      else if (key == "remote_timeout_ms") c.remote.timeout = std::chrono::milliseconds(parse_int(v, where));
      else if (key == "warmup") c.durations.warmup_ms = parse_durations("warmup=" + v).warmup_ms;
      else if (key == "explore") c.durations.exploration_ms = parse_durations("explore=" + v).exploration_ms;
      else if (key == "discovery_min_dwell_ms") c.metrics.discovery_min_dwell_ms = parse_int(v, where);
      else if (key == "browse_min_dwell_ms") c.metrics.browse_min_dwell_ms = parse_int(v, where);
      else if (key == "wall_clock_start") c.wall_clock_start = v;
      else throw ValidationError("unknown key '" + key + "'");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      if (msg.starts_with(where)) throw;
      throw ValidationError(where + ": " + msg);
    }
  }
  if (!(c.engage_probability >= 0.0 && c.engage_probability <= 1.0)) {
    throw ValidationError("engage_probability must lie in [0,1]");
  }
  return c;
}

HarnessConfig load_config_file(const std::filesystem::path& path, HarnessConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in, std::move(base));
}

std::unique_ptr<AssistantProvider> make_provider(const HarnessConfig& config,
                                                 const std::vector<Category>& categories) {
  if (config.provider_mode == "remote") {
    return std::make_unique<RemoteProvider>(config.remote, categories);
  }
  return std::make_unique<TemplateProvider>(categories);
}

namespace {

constexpr const char* kSpecificMessages[] = {
    "I keep lingering on {c} posts lately, could you show me more of that kind of thing?",
    "Could you mix some {c} content into my feed? I think I'd enjoy seeing more of it.",
    "My feed feels a bit repetitive and I would like to see more {c} posts in there please.",
    "I've been curious about {c} recently, can you add more of it to what I'm seeing?",
};

constexpr const char* kVagueMessages[] = {
    "make my feed better",
    "can you change things up a bit?",
    "I want my feed to feel different",
};

constexpr const char* kVarietyMessages[] = {
    "Could you also mix in some {c} posts? I'd like a little more variety now.",
    "Add a few {c} posts as well please, I'm curious what else is out there.",
};

}  // namespace

std::vector<std::string_view> agent_message_templates(std::string_view pool) {
  if (pool == "specific") return {std::begin(kSpecificMessages), std::end(kSpecificMessages)};
  if (pool == "vague") return {std::begin(kVagueMessages), std::end(kVagueMessages)};
  if (pool == "variety") return {std::begin(kVarietyMessages), std::end(kVarietyMessages)};
  throw ValidationError("unknown message pool '" + std::string(pool) + "'");
}

namespace {

std::string fill(std::string_view pattern, const std::string& name) {
  std::string s(pattern);
  const auto at = s.find("{c}");
  if (at != std::string::npos) s.replace(at, 3, name);
  return s;
}

std::string display(const Corpus& corpus, const std::string& id) {
  std::string name = corpus.category(id).display_name;
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return name;
}

class Simulation {
 public:
  Simulation(const Corpus& corpus, LiveSession& session, const AgentPolicy& policy,
             const Durations& durations, std::uint64_t seed)
      : corpus_(corpus), s_(session), policy_(policy), durations_(durations), rng_(seed) {
    const auto& dom = dominant_cache();
    for (const auto& c : corpus.category_ids()) {
      if (std::find(dom.begin(), dom.end(), c) == dom.end() && c != policy_.latent) others_.push_back(c);
    }
  }

  void run() {
    const std::int64_t warm_end = durations_.warmup_ms;
    const std::int64_t explore_end = warm_end + durations_.exploration_ms;
    s_.begin_phase(kWarmupPhase, 0);
    browse(warm_end, false);
    s_.end_phase(kWarmupPhase, warm_end);
    t_ = warm_end;
    s_.begin_phase(kExplorationPhase, t_);
    explore_start_ = t_;
    schedule();
    idx_ = 0;
    pos_ = 0;
    s_.scroll(pos_, t_);
    browse(explore_end, true);
    s_.end_phase(kExplorationPhase, explore_end);
  }

 private:
  const std::vector<std::string>& dominant_cache() const {
    if (dominant_.empty()) {
      dominant_ = s_.header().feed_spec["dominant_categories"].get<std::vector<std::string>>();
    }
    return dominant_;
  }

  bool is_dominant(const std::string& c) const {
    const auto& d = dominant_cache();
    return std::find(d.begin(), d.end(), c) != d.end();
  }

  std::int64_t dwell(const std::string& category) {
    const double w = policy_.interest.count(category) ? policy_.interest.at(category) : 0.1;
    const bool attentive = committed_ && !is_dominant(category);
    const double base = attentive ? 2000.0 + 3500.0 * w : 400.0 + 1700.0 * w;
    return static_cast<std::int64_t>(std::llround(base * rng_.uniform(0.95, 1.05)));
  }

  void schedule() {
    const std::int64_t s = explore_start_;
    switch (policy_.kind) {
      case AgentKind::searcher:
        if (rng_.chance(0.7)) {
          search_at_ = s + static_cast<std::int64_t>(rng_.uniform(20000, 280000));
        } else {
          search_at_ = s + static_cast<std::int64_t>(rng_.uniform(300000, 700000));
        }
        if (rng_.chance(0.5)) {
          second_search_at_ = *search_at_ + static_cast<std::int64_t>(rng_.uniform(60000, 240000));
        }
        break;
      case AgentKind::chat_initiator:
        if (rng_.chance(policy_.engage_probability)) {
          chat_at_ = s + static_cast<std::int64_t>(rng_.uniform(30000, 280000));
        } else if (rng_.chance(0.6)) {
          chat_at_ = s + static_cast<std::int64_t>(rng_.uniform(320000, 800000));
        }
        vague_first_ = rng_.chance(0.35);
        break;
      default:
        break;
    }
  }

  bool fits(std::int64_t t, std::int64_t end) const { return t < end; }

  void browse(std::int64_t end, bool exploring) {
    while (t_ < end) {
      const auto& items = s_.feed().items;
      if (idx_ >= items.size()) {
        t_ += 800;
        if (!fits(t_, end)) break;
        s_.pull_refresh(t_);
        idx_ = 0;
        pos_ = 0;
        s_.scroll(pos_, t_);
        if (exploring) act(end);
        continue;
      }
      const FeedEntry entry = items[idx_];
      s_.impression_enter(entry.item.item_id, t_);
      const std::int64_t exit = std::min(t_ + dwell(entry.item.category), end);
      s_.impression_exit(entry.item.item_id, exit);
      t_ = exit;
      if (committed_) ++items_since_commit_;
      if (exploring) act(end);
      if (t_ + 300 >= end) break;
      t_ += 300;
      pos_ += 170;
      ++idx_;
      s_.scroll(pos_, t_);
    }
    t_ = std::max(t_, end);
  }

  // Reading or typing pause; false when the phase would end first.
  bool pause(std::int64_t lo, std::int64_t hi, std::int64_t end) {
    const auto next = t_ + static_cast<std::int64_t>(rng_.uniform(static_cast<double>(lo), static_cast<double>(hi)));
    if (next >= end) return false;
    t_ = next;
    return true;
  }

  void act(std::int64_t end) {
    for (const auto& n : s_.drain_notifications()) {
      if (n.type == "trigger") respond_to_trigger(end);
      if (n.type == "blend_confirmed") commit();
    }
    switch (policy_.kind) {
      case AgentKind::option_clicker: reengage(end); break;
      case AgentKind::searcher: maybe_search(end); break;
      case AgentKind::chat_initiator: maybe_chat(end); break;
      case AgentKind::passive_scroller: break;
    }
    for (const auto& n : s_.drain_notifications()) {
      if (n.type == "blend_confirmed") commit();
    }
  }

  void commit() {
    committed_ = true;
    items_since_commit_ = 0;
  }

  void respond_to_trigger(std::int64_t end) {
    if (policy_.kind != AgentKind::option_clicker) return;
    if (!pause(3000, 8000, end)) return;
    const auto& opts = s_.dialogue().presented_options;
    std::string pick;
    if (cycle_ == 0) {
      for (const auto& o : opts) {
        if (o.option_id == "pursue:" + policy_.latent) pick = o.option_id;
      }
      if (pick.empty()) {
        for (const auto& o : opts) {
          if (o.kind == OptionKind::pursue_signal) {
            pick = o.option_id;
            break;
          }
        }
      }
    }
    if (pick.empty()) {
      for (const auto& o : opts) {
        if (o.kind == OptionKind::surprise) pick = o.option_id;
      }
    }
    if (pick.empty() && !opts.empty()) pick = opts.front().option_id;
    s_.select_option(pick, t_);
    if (s_.dialogue().stage == Stage::narrowing && pause(2000, 4000, end)) {
      s_.select_option(s_.dialogue().presented_options.front().option_id, t_);
    }
    ++cycle_;
  }

  void reengage(std::int64_t end) {
    if (!committed_ || items_since_commit_ < policy_.boredom_threshold) return;
    if (s_.dialogue().stage != Stage::idle) return;
    if (cycle_ == 1 && !declined_) {
      if (!rng_.chance(0.64)) {
        declined_ = true;
        return;
      }
      if (!pause(1000, 3000, end)) return;
      s_.click(std::string(kAnalyzeRequestTarget), t_);
      for (const auto& n : s_.drain_notifications()) {
        if (n.type == "trigger") respond_to_trigger(end);
        if (n.type == "blend_confirmed") commit();
      }
    } else if (cycle_ == 2 && !declined_) {
      if (!rng_.chance(0.45)) {
        declined_ = true;
        return;
      }
      const auto& c = others_[rng_.below(others_.size())];
      const auto msg = fill(kVarietyMessages[rng_.below(std::size(kVarietyMessages))], display(corpus_, c));
      if (!pause(5000, 15000, end)) return;
      s_.send_text(msg, t_);
      ++cycle_;
    }
  }

  void maybe_search(std::int64_t end) {
    if (search_at_ && t_ >= *search_at_) {
      search_at_.reset();
      const auto q = display(corpus_, policy_.latent);
      if (!pause(3000, 6000, end)) return;
      s_.search(q, t_);
      commit();
    } else if (!search_at_ && second_search_at_ && t_ >= *second_search_at_) {
      second_search_at_.reset();
      const auto q = display(corpus_, others_[rng_.below(others_.size())]);
      if (!pause(3000, 6000, end)) return;
      s_.search(q, t_);
    }
  }

  void maybe_chat(std::int64_t end) {
    if (chat_at_ && t_ >= *chat_at_) {
      chat_at_.reset();
      const auto specific =
          fill(kSpecificMessages[rng_.below(std::size(kSpecificMessages))], display(corpus_, policy_.latent));
      if (vague_first_) {
        if (!pause(4000, 8000, end)) return;
        s_.open_chat(kVagueMessages[rng_.below(std::size(kVagueMessages))], t_);
        pending_specific_ = specific;
        specific_after_ = 3 + static_cast<int>(rng_.below(4));
      } else {
        if (!pause(8000, 20000, end)) return;
        s_.open_chat(specific, t_);
      }
    } else if (pending_specific_) {
      if (--specific_after_ > 0) return;
      const auto msg = *pending_specific_;
      pending_specific_.reset();
      if (!pause(8000, 20000, end)) return;
      s_.send_text(msg, t_);
    }
  }

  const Corpus& corpus_;
  LiveSession& s_;
  const AgentPolicy& policy_;
  Durations durations_;
  Rng rng_;
  std::vector<std::string> others_;
  mutable std::vector<std::string> dominant_;

  std::int64_t t_ = 0;
  std::int64_t explore_start_ = 0;
  std::size_t idx_ = 0;
  std::int64_t pos_ = 0;
  bool committed_ = false;
  int items_since_commit_ = 0;
  int cycle_ = 0;
  bool declined_ = false;
  std::optional<std::int64_t> search_at_;
  std::optional<std::int64_t> second_search_at_;
  std::optional<std::int64_t> chat_at_;
  bool vague_first_ = false;
  std::optional<std::string> pending_specific_;
  int specific_after_ = 0;
};

}  // namespace

SessionOutcome run_condition(const Corpus& corpus, const SessionSetup& setup,
                             const AgentPolicy& policy, const Durations& durations,
                             std::unique_ptr<AssistantProvider> provider,
                             const MetricsConfig& metrics) {
  LiveSession session(corpus, setup, std::move(provider));
  Simulation sim(corpus, session, policy, durations, derive_seed(setup.seed, "agent"));
  sim.run();
  SessionOutcome out;
  out.condition = setup.condition;
  out.policy = policy;
  out.header = session.header();
  out.log = session.log();
  out.final_feed = session.feed();
  out.final_dialogue = session.dialogue();
  out.metrics = compute_metrics(out.header, out.log.view(), metrics);
  return out;
}

SessionSetup make_setup(const SessionPlan& plan, std::size_t position, const HarnessConfig& config) {
  SessionSetup s;
  s.session_id = session_id(plan, position);
  s.condition = plan.conditions.at(position);
  s.feed_spec = feed_preset(plan.feeds.at(position));
  s.seed = session_seed(plan, position);
  s.wall_clock_start = config.wall_clock_start;
  s.config = config.session;
  return s;
}

std::vector<SessionOutcome> run_session(const Corpus& corpus, const SessionPlan& plan,
                                        const HarnessConfig& config,
                                        const std::optional<std::filesystem::path>& out_dir) {
  std::vector<SessionOutcome> outcomes;
  for (std::size_t pos = 0; pos < 3; ++pos) {
    const auto setup = make_setup(plan, pos, config);
    const auto feed = generate_biased_feed(corpus, setup.feed_spec, feed_seed_of(setup.seed),
                                           setup.config.blend.underrep_threshold);
    const auto policy = make_policy(default_agent(setup.condition), feed, setup.feed_spec,
                                    corpus.category_ids(), setup.seed, config.engage_probability);
    auto out = run_condition(corpus, setup, policy, config.durations,
                             make_provider(config, corpus.categories()), config.metrics);
    out.participant_id = plan.participant_id;
    out.feed = plan.feeds[pos];
    if (out_dir) {
      std::filesystem::create_directories(*out_dir);
      const auto path = *out_dir / (setup.session_id + ".jsonl");
      std::ofstream f(path, std::ios::binary);
      if (!f) throw IoError("cannot write " + path.string());
      write_log(f, out.header, out.log);
      if (!f) throw IoError("failed writing " + path.string());
      out.log_path = path;
    }
    outcomes.push_back(std::move(out));
  }
  return outcomes;
}

StudyResult run_study(const Corpus& corpus, int n, std::uint64_t master_seed,
                      const HarnessConfig& config,
                      const std::optional<std::filesystem::path>& out_dir) {
  StudyResult r;
  r.plans = plan_study(n, master_seed);
  std::vector<std::future<std::vector<SessionOutcome>>> jobs;
  for (const auto& plan : r.plans) {
    jobs.push_back(std::async(std::launch::async, [&corpus, &config, &out_dir, plan] {
      return run_session(corpus, plan, config, out_dir);
    }));
  }
  for (auto& job : jobs) {
    for (auto& o : job.get()) r.sessions.push_back(std::move(o));
  }
  std::vector<SessionMetrics> metrics;
  for (const auto& s : r.sessions) metrics.push_back(s.metrics);
  r.table = summarize(metrics);
  return r;
}

void export_results(const StudyResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream f(out_dir / "plan.json");
    ordered_json plans = ordered_json::array();
    for (const auto& p : result.plans) plans.push_back(to_json(p));
    f << plans.dump(2) << '\n';
  }
  {
    std::ofstream f(out_dir / "sessions.jsonl");
    for (const auto& s : result.sessions) {
      ordered_json j;
      j["participant_id"] = s.participant_id;
      j["condition"] = to_string(s.condition);
      j["feed"] = std::string(1, s.feed);
      j["agent"] = to_string(s.policy.kind);
      j["latent"] = s.policy.latent;
      j["log"] = s.log_path ? ordered_json(s.log_path->filename().string()) : ordered_json(nullptr);
      j["metrics"] = to_json(s.metrics);
      f << j.dump() << '\n';
    }
  }
  {
    std::ofstream f(out_dir / "results.json");
    f << to_json(result.table).dump(2) << '\n';
  }
  {
    std::ofstream f(out_dir / "results.txt");
    f << format_table(result.table);
  }
  if (!std::filesystem::exists(out_dir / "results.txt")) {
    throw IoError("failed writing results into " + out_dir.string());
  }
}

}  // namespace feedlens
