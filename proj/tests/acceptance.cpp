#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include <httplib.h>

#include "feedlens/analyzer.hpp"
#include "feedlens/corpus.hpp"
#include "feedlens/dialogue.hpp"
#include "feedlens/error.hpp"
#include "feedlens/feed_engine.hpp"
#include "feedlens/harness.hpp"
#include "feedlens/metrics.hpp"
#include "feedlens/rng.hpp"
#include "feedlens/service.hpp"
#include "feedlens/session.hpp"
#include "metrics_oracle.hpp"
#include "support.hpp"

using namespace feedlens;
using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const Corpus& corpus() {
  static const Corpus c = synthetic_corpus();
  return c;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("feedlens_acc_" + std::to_string(::getpid()) + "_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

// 1 ------------------------------------------------------------------------
Outcome entropy_oracle() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(20240611);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(13));
    std::vector<double> w(static_cast<std::size_t>(k));
    double total = 0.0;
    for (auto& x : w) {
      x = rng.unit() + 1e-6;
      total += x;
    }
    std::map<std::string, double> props;
    std::vector<double> p;
    for (int i = 0; i < k; ++i) {
      const double share = w[static_cast<std::size_t>(i)] / total;
      props["c" + std::to_string(i)] = share;
      p.push_back(share);
    }
    const double h = shannon_entropy(CategoryDistribution(props));
    const double ref = testing_support::entropy_oracle(p);
    worst = std::max(worst, std::fabs(h - ref));
  }
  if (worst > 1e-9) o.fail("max deviation " + std::to_string(worst));
  double boundary = 0.0;
  for (int k = 1; k <= 14; ++k) {
    std::map<std::string, double> uniform;
    for (int i = 0; i < k; ++i) uniform["c" + std::to_string(i)] = 1.0 / k;
    boundary = std::max(boundary, std::fabs(shannon_entropy(CategoryDistribution(uniform)) - std::log2(k)));
    const double degenerate = shannon_entropy(CategoryDistribution({{"c" + std::to_string(k), 1.0}}));
    boundary = std::max(boundary, std::fabs(degenerate));
  }
  if (boundary > 1e-12) o.fail("boundary deviation " + std::to_string(boundary));
  const double took = seconds_since(t0);
  if (took >= 1.0) o.fail("took " + std::to_string(took) + " s");
  if (o.pass) {
    std::ostringstream d;
    d << "1000 distributions, max |dH| " << worst << ", boundary max " << boundary << ", " << took << " s";
    o.detail = d.str();
  }
  return o;
}

// 2 ------------------------------------------------------------------------
Outcome biased_feed() {
  Outcome o;
  const auto ids = corpus().category_ids();
  int passed = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    FeedSpec spec;
    if (seed < 30) {
      spec = feed_preset("ABC"[seed % 3]);
    } else {
      Rng r(seed);
      const auto a = ids[r.below(ids.size())];
      auto b = a;
      while (b == a) b = ids[r.below(ids.size())];
      spec = FeedSpec{{a, b}, 0.8, 35};
    }
    const auto feed = generate_biased_feed(corpus(), spec, seed);
    std::map<std::string, int> counts;
    for (const auto& item : feed) ++counts[item.category];
    int dominant = 0;
    bool ok = feed.size() == 35;
    for (const auto& [c, k] : counts) {
      const bool is_dom = std::find(spec.dominant_categories.begin(), spec.dominant_categories.end(), c) !=
                          spec.dominant_categories.end();
      if (is_dom) {
        dominant += k;
      } else if (20 * k >= 35) {
        ok = false;
      }
    }
    ok = ok && dominant == 28 && static_cast<int>(feed.size()) - dominant == 7;
    if (ok) {
      ++passed;
    } else {
      o.fail("seed " + std::to_string(seed) + " has " + std::to_string(dominant) + " dominant items");
    }
  }
  if (o.pass) o.detail = std::to_string(passed) + "/100 seeds give 28 dominant + 7 scattered, scattered < 5% each";
  return o;
}

// 3 ------------------------------------------------------------------------
Outcome blend_rate() {
  Outcome o;
  const SessionConfig defaults;
  const auto ids = corpus().category_ids();
  double lo = 1.0;
  double hi = 0.0;
  int cycles = 0;
  int deep_cycles = 0;
  Rng rng(77);
  auto random_direction = [&]() -> std::optional<Direction> {
    const auto c = ids[rng.below(ids.size())];
    switch (rng.below(6)) {
      case 0: return std::nullopt;
      case 1: return Direction::increase(c);
      case 2: return Direction::increase("travel", "weekend");
      case 3: return Direction::decrease(c);
      case 4: return Direction::decrease(c, "fill:" + ids[rng.below(ids.size())]);
      default: return Direction::surprise();
    }
  };
  for (int feed_no = 0; feed_no < 140 && (cycles < 500 || deep_cycles < 200); ++feed_no) {
    BlendOptions opts = defaults.blend;
    if (rng.chance(0.5)) opts.undirected = UndirectedSampling::composition_matched;
    auto state = initialize_feed("acc", generate_biased_feed(corpus(), feed_preset("ABC"[feed_no % 3]), feed_no),
                                 defaults.blend_rate, opts);
    EventStream log("acc");
    std::int64_t t = 0;
    for (int round = 0; round < 5; ++round) {
      const std::size_t n = state.items.size();
      const std::size_t k = replacement_count(n, state.blend_rate);
      const bool deep = cycles >= 500 || (deep_cycles < 200 && rng.chance(0.25));
      rewind(state);
      const std::size_t depth = deep ? n - k + 1 + rng.below(k - 1) : rng.below(n - k + 1);
      if (depth > 0) {
        const auto id = state.items[depth - 1].item.item_id;
        record_impression(state, log, id, ++t);
        if (rng.chance(0.5)) close_impression(state, log, id, ++t);
      }
      if (const auto d = random_direction()) set_direction(state, log, corpus(), *d, ++t);
      const auto before = state.items;
      const auto r = refresh_feed(state, corpus(), rng.next(), log, ++t);
      for (std::size_t i = 0; i < depth; ++i) {
        if (state.items[i] != before[i]) o.fail("surfaced slot " + std::to_string(i) + " changed");
      }
      for (const auto& rep : r.replaced) {
        if (rep.index < depth) o.fail("replacement above the cursor");
      }
      std::size_t changed = 0;
      for (std::size_t i = 0; i < n; ++i) changed += state.items[i] != before[i];
      if (changed != r.replaced.size()) o.fail("replacement list disagrees with the feed");
      for (const auto& [id, rec] : state.open_impressions) {
        if (!state.index_of(id)) o.fail("visible item removed");
      }
      if (!state.open_impressions.empty()) close_impression(state, log, state.open_impressions.begin()->first, ++t);
      if (deep) {
        ++deep_cycles;
        if (changed != n - depth) o.fail("deep cursor did not use every free slot");
      } else {
        ++cycles;
        const double fraction = static_cast<double>(changed) / static_cast<double>(n);
        lo = std::min(lo, fraction);
        hi = std::max(hi, fraction);
        const double slack = 1.0 / static_cast<double>(n);
        if (fraction < 0.20 - slack || fraction > 0.30 + slack) {
          o.fail("fraction " + std::to_string(fraction) + " out of band");
        }
      }
    }
  }
  if (cycles < 500) o.fail("only " + std::to_string(cycles) + " cycles ran");
  if (o.pass) {
    std::ostringstream d;
    d << cycles << " cycles, fraction in [" << lo << ", " << hi << "]; " << cycles + deep_cycles
      << " cycles (incl. " << deep_cycles << " with fewer than k free slots) mutated no surfaced item";
    o.detail = d.str();
  }
  return o;
}

// 4 ------------------------------------------------------------------------
std::unique_ptr<LiveSession> ai_session(std::uint64_t seed, ProactivityLevel level) {
  SessionSetup s;
  s.session_id = "trig" + std::to_string(seed);
  s.condition = Condition::ai_init;
  s.feed_spec = feed_preset("ABC"[seed % 3]);
  s.seed = seed;
  s.config.proactivity = level;
  return std::make_unique<LiveSession>(corpus(), s, std::make_unique<TemplateProvider>(corpus().categories()));
}

int ai_triggers(const LiveSession& s) {
  int n = 0;
  for (const auto& e : s.log().events()) n += e.kind == EventKind::trigger && e.payload["source"] == "ai";
  return n;
}

Outcome trigger_exactness() {
  Outcome o;
  int moderate_ok = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    auto s = ai_session(seed, ProactivityLevel::moderate);
    Rng rng(seed);
    s->begin_phase(kExplorationPhase, 0);
    std::int64_t t = 1;
    std::set<std::string> surfaced;
    std::optional<std::size_t> fired_at;
    std::size_t next = 0;
    while (surfaced.size() < 35) {
      // Revisit an earlier item now and then; only new items count.
      const bool revisit = !surfaced.empty() && rng.chance(0.3);
      const std::size_t idx = revisit ? rng.below(next) : next++;
      const auto id = s->feed().items[idx].item.item_id;
      s->impression_enter(id, t);
      surfaced.insert(id);
      if (!fired_at && ai_triggers(*s) == 1) fired_at = surfaced.size();
      if (s->dialogue().stage == Stage::awaiting_response) s->select_option("surprise", t);
      t += 300;
      s->impression_exit(id, t);
      s->scroll(static_cast<std::int64_t>(idx) * 170, t);
      t += 100;
    }
    for (int r = 0; r < 3; ++r) {
      s->pull_refresh(t += 500);
    }
    if (fired_at == 20 && ai_triggers(*s) == 1) {
      ++moderate_ok;
    } else {
      o.fail("moderate seed " + std::to_string(seed) + " fired at " +
             (fired_at ? std::to_string(*fired_at) : std::string("never")) + " with " +
             std::to_string(ai_triggers(*s)) + " triggers");
    }
  }
  int reactive_quiet = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = ai_session(seed, ProactivityLevel::reactive);
    s->begin_phase(kExplorationPhase, 0);
    std::int64_t t = 1;
    for (int round = 0; round < 3; ++round) {
      for (std::size_t i = 0; i < s->feed().items.size(); ++i) {
        const auto id = s->feed().items[i].item.item_id;
        s->impression_enter(id, t);
        s->scroll(static_cast<std::int64_t>(i) * 170, t);
        s->impression_exit(id, t += 200);
      }
      s->pull_refresh(t += 100);
    }
    if (ai_triggers(*s) == 0) {
      ++reactive_quiet;
    } else {
      o.fail("reactive fired on its own");
    }
  }
  int eager_refreshes = 0;
  int eager_fires = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = ai_session(seed, ProactivityLevel::eager);
    s->begin_phase(kExplorationPhase, 0);
    std::int64_t t = 1;
    for (int r = 0; r < 6; ++r) {
      const int before = ai_triggers(*s);
      for (std::size_t i = 0; i < 5; ++i) {
        const auto id = s->feed().items[i].item.item_id;
        s->impression_enter(id, t);
        s->impression_exit(id, t += 200);
      }
      s->pull_refresh(t += 100);
      ++eager_refreshes;
      const int fired = ai_triggers(*s) - before;
      eager_fires += fired;
      if (fired != 1) o.fail("eager refresh produced " + std::to_string(fired) + " triggers");
      if (s->dialogue().stage == Stage::awaiting_response) s->select_option("surprise", t += 10);
    }
  }
  if (o.pass) {
    o.detail = "moderate fired at item 20 and once per phase in " + std::to_string(moderate_ok) +
               "/60 sessions; reactive silent in " + std::to_string(reactive_quiet) + "/20; eager fired on " +
               std::to_string(eager_fires) + "/" + std::to_string(eager_refreshes) + " refreshes";
  }
  return o;
}

// 5 ------------------------------------------------------------------------
struct Machine {
  DialogueSession session;
  EventStream log{"sm"};
  FeedState feed;
  int cycle = 0;
  int narrowing_in_cycle = 0;
};

InsightReport insight_variant(bool with_signal) {
  InsightReport r;
  r.distribution = CategoryDistribution({{"food", 0.4}, {"fashion", 0.4}, {"travel", 0.2}});
  r.dominant = {{"food", 0.4}, {"fashion", 0.4}};
  r.underrepresented = {"music", "pets"};
  if (with_signal) r.signals = {{"travel", 3, 4000.0, 1000.0}};
  return r;
}

Outcome state_machine() {
  Outcome o;
  TemplateProvider provider(corpus().categories());
  using Action = std::function<void(DialogueOrchestrator&, FeedState&, std::int64_t)>;
  std::vector<std::pair<std::string, Action>> actions{
      {"open_ai+signal", [](auto& d, auto&, auto t) { d.open_ai(insight_variant(true), t); }},
      {"open_ai", [](auto& d, auto&, auto t) { d.open_ai(insight_variant(false), t); }},
      {"open_user vague", [](auto& d, auto&, auto t) { d.open_user("make my feed better", t); }},
      {"open_user specific", [](auto& d, auto&, auto t) { d.open_user("more travel please", t); }},
      {"text vague", [](auto& d, auto&, auto t) { d.submit_free_text("hmm not sure", t); }},
      {"text specific", [](auto& d, auto&, auto t) { d.submit_free_text("less food", t); }},
      {"stale option", [](auto& d, auto&, auto t) { d.select_option("nope", t); }},
      {"confirm", [](auto& d, auto& f, auto t) { d.confirm_blend(f, corpus(), t); }},
      {"dismiss", [](auto& d, auto&, auto t) { d.dismiss(t); }},
  };
  for (int i = 0; i < 4; ++i) {
    actions.push_back({"option " + std::to_string(i), [i](DialogueOrchestrator& d, FeedState&, std::int64_t t) {
                         const auto& opts = d.session().presented_options;
                         if (static_cast<std::size_t>(i) >= opts.size()) throw ValidationError("no such option");
                         d.select_option(opts[static_cast<std::size_t>(i)].option_id, t);
                       }});
  }

  long sequences = 0;
  long failed_noops = 0;
  Machine root;
  root.session.session_id = "sm";
  root.feed = initialize_feed("sm", generate_biased_feed(corpus(), feed_preset('A'), 1), 0.25);

  std::function<void(const Machine&, int)> explore = [&](const Machine& m, int depth) {
    ++sequences;
    if (depth == 8 || !o.pass) return;
    for (const auto& [name, act] : actions) {
      Machine next = m;
      DialogueOrchestrator d("sm", provider, next.log);
      d.restore(next.session);
      const auto before_feed = next.feed;
      const auto before_events = next.log.size();
      const bool was_idle = m.session.stage == Stage::idle || m.session.stage == Stage::dismissed;
      try {
        act(d, next.feed, depth + 1);
      } catch (const Error&) {
        if (!(d.session() == m.session) || next.log.size() != before_events || !(next.feed.items == before_feed.items) ||
            next.feed.direction != before_feed.direction) {
          o.fail("rejected '" + name + "' changed state");
        }
        ++failed_noops;
        continue;
      }
      next.session = d.session();
      const auto& s = next.session;
      const bool new_cycle = (was_idle && (name.starts_with("open") || name.starts_with("text"))) ;
      if (new_cycle) {
        ++next.cycle;
        next.narrowing_in_cycle = 0;
      }
      if (m.session.stage != Stage::narrowing && s.stage == Stage::narrowing) ++next.narrowing_in_cycle;
      if (next.narrowing_in_cycle > 1) o.fail("two narrowing rounds in one cycle after '" + name + "'");
      if (s.narrowing_rounds_used > 1) o.fail("narrowing_rounds_used above 1");
      if (name.starts_with("open_ai")) {
        const auto n = s.presented_options.size();
        if (n < 3 || n > 4) o.fail("open_ai presented " + std::to_string(n) + " options");
      }
      if (s.stage == Stage::narrowing &&
          (s.presented_options.size() < 2 || s.presented_options.size() > 4)) {
        o.fail("narrowing presented " + std::to_string(s.presented_options.size()) + " options");
      }
      if (name != "confirm") {
        if (!(next.feed.items == before_feed.items) || next.feed.direction != before_feed.direction) {
          o.fail("feed changed by '" + name + "' before confirmation");
        }
      } else if (!next.feed.direction) {
        o.fail("confirmation did not set a direction");
      }
      const bool changed = !(s == m.session) || !(next.feed.items == before_feed.items);
      if (changed && next.log.size() == before_events) o.fail("'" + name + "' changed state without logging");
      // The latest snapshot always matches the live session.
      for (auto it = next.log.events().rbegin(); it != next.log.events().rend(); ++it) {
        if (it->payload.contains("dialogue")) {
          if (!(dialogue_from_json(it->payload["dialogue"]) == s)) o.fail("stale snapshot after '" + name + "'");
          break;
        }
      }
      explore(next, depth + 1);
    }
  };
  const auto t0 = Clock::now();
  explore(root, 0);
  if (o.pass) {
    std::ostringstream d;
    d << sequences << " accepted action sequences up to length 8 (" << failed_noops
      << " rejected actions left no trace); narrowing <= 1 per cycle, 3-4 options, feed untouched before confirm; "
      << seconds_since(t0) << " s";
    o.detail = d.str();
  }
  return o;
}

// 6 ------------------------------------------------------------------------
std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Outcome replay_determinism() {
  Outcome o;
  HarnessConfig cfg;
  const auto plans = plan_study(4, 99);
  const auto dir_a = scratch_dir("replay_a");
  const auto dir_b = scratch_dir("replay_b");
  int sessions = 0;
  std::set<Condition> covered;
  for (const auto& plan : plans) {
    const auto a = run_session(corpus(), plan, cfg, dir_a);
    const auto b = run_session(corpus(), plan, cfg, dir_b);
    for (std::size_t i = 0; i < a.size(); ++i) {
      ++sessions;
      covered.insert(a[i].condition);
      const auto file_a = read_file(*a[i].log_path);
      if (file_a != read_file(*b[i].log_path)) o.fail(a[i].header.session_id + " logs differ between runs");
      const auto loaded = load_log_file(*a[i].log_path);
      if (!loaded.header || !loaded.warnings.empty()) {
        o.fail(a[i].header.session_id + " did not reload cleanly");
        continue;
      }
      const auto replayed = replay_session(corpus(), *loaded.header, loaded.stream);
      if (to_json(replayed.feed).dump() != to_json(a[i].final_feed).dump()) {
        o.fail(a[i].header.session_id + " replayed feed differs");
      }
      if (!(replayed.dialogue == a[i].final_dialogue)) o.fail(a[i].header.session_id + " replayed dialogue differs");
      const auto metrics = compute_metrics(*loaded.header, loaded.stream.view(), cfg.metrics);
      if (to_json(metrics).dump() != to_json(a[i].metrics).dump()) {
        o.fail(a[i].header.session_id + " metrics differ after reload");
      }
      std::stringstream rewritten;
      write_log(rewritten, *loaded.header, loaded.stream);
      if (rewritten.str() != file_a) o.fail(a[i].header.session_id + " log does not round-trip");
    }
  }
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
  if (covered.size() != 4) o.fail("not every condition was covered");
  if (o.pass) {
    o.detail = std::to_string(sessions) +
               " full sessions over all 4 conditions: identical logs for the same seed, replayed feed, dialogue and "
               "metrics byte-identical";
  }
  return o;
}

// 7 ------------------------------------------------------------------------
Outcome metrics_oracle() {
  Outcome o;
  const char* conditions[] = {"FEED", "SEARCH", "USER_CHAT", "AI_INIT"};
  int compared = 0;
  auto same = [](const std::optional<double>& a, const std::optional<double>& b, double tol) {
    if (a.has_value() != b.has_value()) return false;
    return !a || std::fabs(*a - *b) <= tol;
  };
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto log = testing_support::random_log(1000 + seed, conditions[seed % 4]);
    const auto m = compute_metrics(log.header, log.stream.view());
    const auto r = testing_support::oracle_metrics(log.header, log.stream.events());
    const std::string at = " (stream " + std::to_string(seed) + ")";
    if (m.breadth != r.breadth) o.fail("breadth" + at);
    if (!same(m.entropy_pre_bits, r.entropy_pre, 1e-9) || !same(m.entropy_post_bits, r.entropy_post, 1e-9) ||
        !same(m.diversity_gain_bits, r.gain, 1e-9)) {
      o.fail("delta H" + at);
    }
    if (m.bubble_breaking_rate != r.bubble) o.fail("bubble-breaking rate" + at);
    if (m.expression_cost_chars != r.cost) o.fail("expression cost" + at);
    if (m.time_to_first_discovery_ms != r.ttfd) o.fail("time to first discovery" + at);
    if (m.tool_engaged_first_5min != r.engaged) o.fail("tool engagement" + at);
    if (m.conversation_turns != r.depth) o.fail("conversation depth" + at);
    if (!same(m.scroll_velocity_pre, r.velocity_pre, 1e-9) || !same(m.scroll_velocity_post, r.velocity_post, 1e-9)) {
      o.fail("scroll velocity" + at);
    }
    if (!same(m.mean_dwell_initial_ms, r.dwell_initial, 1e-9) || !same(m.mean_dwell_blended_ms, r.dwell_blended, 1e-9)) {
      o.fail("dwell by origin" + at);
    }
    ++compared;
  }
  if (o.pass) o.detail = std::to_string(compared) + " random streams, 13 metrics each match the brute-force recomputation";
  return o;
}

// 8 ------------------------------------------------------------------------
Outcome study_reproduction() {
  Outcome o;
  const auto t0 = Clock::now();
  HarnessConfig cfg;
  const auto result = run_study(corpus(), 40, 1, cfg);
  const double took = seconds_since(t0);
  const auto& cells = result.table.cells;
  auto mean = [&](const char* f, const char* c) { return cells.at(f).at(c).mean; };
  auto median = [&](const char* f, const char* c) { return cells.at(f).at(c).median; };
  const double b_ai = *mean("breadth", "AI_INIT");
  const double b_search = *mean("breadth", "SEARCH");
  const double b_feed = *mean("breadth", "FEED");
  const double dh_feed = *mean("diversity_gain_bits", "FEED");
  const auto ttfd_ai = median("time_to_first_discovery_ms", "AI_INIT");
  const auto ttfd_chat = median("time_to_first_discovery_ms", "USER_CHAT");
  const double eng_ai = *mean("tool_engaged_first_5min", "AI_INIT");
  const double eng_chat = *mean("tool_engaged_first_5min", "USER_CHAT");
  const double cost_ai = *median("expression_cost_chars", "AI_INIT");
  const double cost_chat = *median("expression_cost_chars", "USER_CHAT");
  std::map<std::string, int> counts = result.table.session_counts;
  if (counts["AI_INIT"] < 20 || counts["USER_CHAT"] < 20) o.fail("fewer than 20 sessions per condition");
  if (!(b_ai > b_search && b_ai > b_feed)) o.fail("breadth ordering");
  if (!(dh_feed < 0.2)) o.fail("FEED delta H " + std::to_string(dh_feed));
  if (!ttfd_ai || (ttfd_chat && !(*ttfd_ai < *ttfd_chat))) o.fail("time-to-first-discovery ordering");
  if (eng_ai != 1.0) o.fail("AI_INIT engagement " + std::to_string(eng_ai));
  if (eng_chat < 0.3 || eng_chat > 0.7) o.fail("USER_CHAT engagement " + std::to_string(eng_chat));
  if (cost_ai != 0.0) o.fail("AI_INIT expression cost median " + std::to_string(cost_ai));
  if (!(cost_chat > 40.0)) o.fail("USER_CHAT expression cost median " + std::to_string(cost_chat));
  if (took >= 60.0) o.fail("took " + std::to_string(took) + " s");
  std::ostringstream d;
  d << std::fixed;
  d.precision(2);
  d << "breadth AI " << b_ai << " > SEARCH " << b_search << ", FEED " << b_feed << "; dH FEED " << dh_feed
    << "; TTFD median AI " << (ttfd_ai ? *ttfd_ai / 1000.0 : -1) << " s < CHAT "
    << (ttfd_chat ? *ttfd_chat / 1000.0 : -1) << " s; engagement AI " << eng_ai * 100 << "%, CHAT "
    << eng_chat * 100 << "%; cost median AI " << cost_ai << ", CHAT " << cost_chat << "; "
    << result.sessions.size() << " sessions in " << took << " s";
  if (o.pass) {
    o.detail = d.str();
  } else {
    o.detail += " [" + d.str() + "]";
  }
  return o;
}

// 9 ------------------------------------------------------------------------
Outcome counterbalancing() {
  Outcome o;
  const auto plans = plan_study(28, 1);
  std::map<std::tuple<Condition, char, int>, int> cells;
  std::map<std::pair<Condition, Condition>, int> orders;
  for (const auto& p : plans) {
    for (int pos = 0; pos < 3; ++pos) ++cells[{p.conditions[pos], p.feeds[pos], pos}];
    ++orders[{p.group, p.conditions[0]}];
  }
  std::ostringstream d;
  for (auto c : {Condition::feed, Condition::search, Condition::user_chat, Condition::ai_init}) {
    const std::vector<int> positions =
        (c == Condition::feed || c == Condition::search) ? std::vector<int>{0, 1} : std::vector<int>{2};
    int lo = 1 << 20;
    int hi = 0;
    for (char f : {'A', 'B', 'C'}) {
      for (int pos : positions) {
        const int k = cells[{c, f, pos}];
        lo = std::min(lo, k);
        hi = std::max(hi, k);
      }
    }
    if (hi - lo > 1) o.fail(std::string(to_string(c)) + " cells range " + std::to_string(lo) + ".." + std::to_string(hi));
    d << to_string(c) << " " << lo << ".." << hi << "; ";
  }
  for (auto g : {Condition::ai_init, Condition::user_chat}) {
    const int a = orders[{g, Condition::feed}];
    const int b = orders[{g, Condition::search}];
    if (std::abs(a - b) > 1) o.fail("baseline order imbalance in " + std::string(to_string(g)));
    d << to_string(g) << " orders " << a << "/" << b << "; ";
  }
  if (o.pass) o.detail = "plan_study(28) (condition, feed, position) cells: " + d.str();
  return o;
}

// 10 -----------------------------------------------------------------------
Outcome provider_resilience() {
  Outcome o;
  int fallbacks = 0;
  int sessions = 0;
  for (const auto* url : {"http://127.0.0.1:1", "http://10.255.255.1:9"}) {
    HarnessConfig cfg;
    cfg.provider_mode = "remote";
    cfg.remote.base_url = url;
    cfg.remote.timeout = std::chrono::milliseconds(600);
    const auto plans = plan_study(2, 5);
    for (const auto& plan : plans) {
      if (plan.group != Condition::ai_init) continue;
      const auto setup = make_setup(plan, 2, cfg);
      const auto feed = generate_biased_feed(corpus(), setup.feed_spec, feed_seed_of(setup.seed));
      const auto policy = make_policy(AgentKind::option_clicker, feed, setup.feed_spec, corpus().category_ids(),
                                      setup.seed, cfg.engage_probability);
      try {
        const auto out = run_condition(corpus(), setup, policy, cfg.durations,
                                       make_provider(cfg, corpus().categories()), cfg.metrics);
        ++sessions;
        int here = 0;
        bool directed = false;
        for (const auto& e : out.log.events()) {
          here += e.kind == EventKind::provider_fallback;
          directed = directed || (e.kind == EventKind::composition_change && e.payload["reason"] == "direction");
        }
        fallbacks += here;
        if (here == 0) o.fail("no provider_fallback logged for " + std::string(url));
        if (!directed) o.fail("dialogue did not reach a confirmed blend via " + std::string(url));
      } catch (const std::exception& e) {
        o.fail(std::string("session raised: ") + e.what());
      }
    }
  }

  // The same through the HTTP front end: every call answers 2xx.
  ServiceOptions opts;
  opts.provider_mode = "remote";
  opts.remote.base_url = "http://127.0.0.1:1";
  opts.remote.timeout = std::chrono::milliseconds(600);
  opts.log_dir = scratch_dir("resilience");
  opts.wall_clock_start = "2000-01-01T00:00:00Z";
  Service service(corpus(), opts);
  const int port = service.bind_any_port("127.0.0.1");
  std::thread th([&] { service.run(); });
  httplib::Client client("127.0.0.1", port);
  for (int i = 0; i < 200 && !service.running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  int calls = 0;
  auto post = [&](const std::string& path, const ordered_json& body) {
    ++calls;
    const auto r = client.Post(path, body.dump(), "application/json");
    if (!r || r->status >= 300) {
      o.fail("HTTP " + path + " -> " + (r ? std::to_string(r->status) + " " + r->body : std::string("no reply")));
      return ordered_json();
    }
    return ordered_json::parse(r->body);
  };
  const auto created = post("/sessions", {{"condition", "AI_INIT"}, {"feed", "A"}, {"seed", 3}, {"session_id", "res"}});
  if (created.contains("page")) {
    const auto& items = created["page"]["items"];
    post("/sessions/res/phase", {{"phase", "exploration"}, {"edge", "start"}, {"t_ms", 0}});
    std::int64_t t = 10;
    for (int i = 0; i < 20; ++i) {
      post("/sessions/res/impressions", {{"item_id", items[i]["item_id"]}, {"edge", "enter"}, {"t_ms", t}});
      post("/sessions/res/impressions", {{"item_id", items[i]["item_id"]}, {"edge", "exit"}, {"t_ms", t += 300}});
    }
    const auto r = post("/sessions/res/dialogue/option", {{"option_id", "surprise"}, {"t_ms", t + 10}});
    if (!r.contains("direction") || r["direction"].is_null()) o.fail("HTTP dialogue did not confirm a blend");
    post("/sessions/res/refresh", {{"t_ms", t + 20}});
  }
  service.stop();
  th.join();
  std::filesystem::remove_all(opts.log_dir);
  if (o.pass) {
    o.detail = std::to_string(sessions) + " AI_INIT sessions against refused and blackholed endpoints completed with " +
               std::to_string(fallbacks) + " logged provider_fallback events; " + std::to_string(calls) +
               " HTTP calls all 2xx";
  }
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
      {"entropy oracle", entropy_oracle},
      {"biased feed construction", biased_feed},
      {"blend-rate conformance", blend_rate},
      {"trigger exactness", trigger_exactness},
      {"state-machine safety", state_machine},
      {"replay determinism", replay_determinism},
      {"metrics oracle equivalence", metrics_oracle},
      {"directional study reproduction", study_reproduction},
      {"counterbalancing", counterbalancing},
      {"provider resilience", provider_resilience},
  };
  int failed = 0;
  for (const auto& [name, check] : checks) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (checks.size() - static_cast<std::size_t>(failed)) << "/" << checks.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
