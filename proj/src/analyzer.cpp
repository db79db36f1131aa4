#include "feedlens/analyzer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "feedlens/error.hpp"

namespace feedlens {

using nlohmann::ordered_json;

std::string_view to_string(ProactivityLevel level) {
  switch (level) {
    case ProactivityLevel::reactive: return "reactive";
    case ProactivityLevel::moderate: return "moderate";
    case ProactivityLevel::eager: return "eager";
  }
  return "moderate";
}

ProactivityLevel parse_proactivity(std::string_view text) {
  if (text == "reactive") return ProactivityLevel::reactive;
  if (text == "moderate") return ProactivityLevel::moderate;
  if (text == "eager") return ProactivityLevel::eager;
  throw ValidationError("unknown proactivity level '" + std::string(text) + "'");
}

double shannon_entropy(const CategoryDistribution& d) {
  double h = 0.0;
  for (const auto& [id, p] : d.proportions()) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return std::max(h, 0.0);
}

CategoryDistribution compute_viewed_distribution(std::span<const BehaviorEvent> events,
                                                 TimeWindow window) {
  std::set<std::string> seen;
  std::map<std::string, int> counts;
  for (const auto& ev : events) {
    if (ev.kind != EventKind::impression_enter || !window.contains(ev.t_ms)) continue;
    if (seen.insert(ev.payload["item_id"].get<std::string>()).second) {
      ++counts[ev.payload["category"].get<std::string>()];
    }
  }
  if (seen.empty()) throw EmptyWindowError("no impressions in the requested window");
  return CategoryDistribution::from_counts(counts);
}

std::vector<CategoryShare> detect_dominant(const CategoryDistribution& d, int top_n) {
  if (top_n < 1) throw ValidationError("top_n must be at least 1");
  std::vector<CategoryShare> all;
  for (const auto& [id, p] : d.proportions()) all.push_back({id, p});
  std::stable_sort(all.begin(), all.end(), [](const CategoryShare& a, const CategoryShare& b) {
    if (a.share != b.share) return a.share > b.share;
    return a.category < b.category;
  });
  if (static_cast<int>(all.size()) > top_n) all.resize(static_cast<std::size_t>(top_n));
  return all;
}

std::vector<std::string> detect_underrepresented(const CategoryDistribution& d,
                                                 std::span<const std::string> all_categories,
                                                 double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ValidationError("underrepresentation threshold must lie in (0,1)");
  }
  std::vector<std::string> out;
  for (const auto& c : all_categories) {
    if (d.share(c) < threshold) out.push_back(c);
  }
  return out;
}

namespace {

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

std::vector<LatentSignal> detect_latent_signals(std::span<const BehaviorEvent> events,
                                                const CategoryDistribution& feed_composition,
                                                const SignalConfig& config) {
  std::map<std::string, std::vector<double>> dwell_by_category;
  int total = 0;
  for (const auto& ev : events) {
    if (ev.kind != EventKind::impression_exit) continue;
    dwell_by_category[ev.payload["category"].get<std::string>()].push_back(
        static_cast<double>(ev.payload["dwell_ms"].get<std::int64_t>()));
    ++total;
  }
  if (total < config.min_impressions || feed_composition.empty()) return {};

  const auto dominant = detect_dominant(feed_composition, config.dominance_top_n);
  std::set<std::string> dominant_ids;
  std::vector<double> dominant_dwells;
  for (const auto& d : dominant) {
    dominant_ids.insert(d.category);
    const auto it = dwell_by_category.find(d.category);
    if (it != dwell_by_category.end()) {
      dominant_dwells.insert(dominant_dwells.end(), it->second.begin(), it->second.end());
    }
  }
  if (dominant_dwells.empty()) return {};
  const double baseline = median(dominant_dwells);
  if (baseline <= 0.0) return {};
  const double dominance_floor = dominant.back().share;

  std::vector<LatentSignal> signals;
  for (const auto& [category, dwells] : dwell_by_category) {
    if (dominant_ids.contains(category)) continue;
    if (feed_composition.share(category) >= dominance_floor) continue;
    if (static_cast<int>(dwells.size()) < config.min_evidence) continue;
    double sum = 0.0;
    for (const double d : dwells) sum += d;
    const double mean = sum / static_cast<double>(dwells.size());
    if (mean > config.signal_multiplier * baseline) {
      signals.push_back({category, static_cast<int>(dwells.size()), mean, baseline});
    }
  }
  std::stable_sort(signals.begin(), signals.end(), [](const LatentSignal& a, const LatentSignal& b) {
    if (a.mean_dwell_ms != b.mean_dwell_ms) return a.mean_dwell_ms > b.mean_dwell_ms;
    return a.category < b.category;
  });
  return signals;
}

TriggerDecision should_trigger(std::span<const BehaviorEvent> events, ProactivityLevel policy,
                               const TriggerConfig& config) {
  std::size_t phase_start = 0;
  std::int64_t phase_start_t = 0;
  std::optional<std::size_t> last_trigger;
  std::optional<std::size_t> last_ai_trigger;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    if (ev.kind == EventKind::phase_mark && ev.payload["edge"] == "start") {
      phase_start = i + 1;
      phase_start_t = ev.t_ms;
    } else if (ev.kind == EventKind::trigger) {
      last_trigger = i;
      if (ev.payload["source"] == "ai") last_ai_trigger = i;
    }
  }
  const std::size_t after_trigger = last_trigger ? *last_trigger + 1 : 0;

  for (std::size_t i = after_trigger; i < events.size(); ++i) {
    const auto& ev = events[i];
    if (ev.kind == EventKind::click && ev.payload["target"] == kAnalyzeRequestTarget) {
      return {true, "explicit request"};
    }
  }

  switch (policy) {
    case ProactivityLevel::reactive:
      return {false, "waiting for an explicit request"};

    case ProactivityLevel::moderate: {
      if (last_ai_trigger && *last_ai_trigger >= phase_start) {
        return {false, "already fired this phase"};
      }
      std::set<std::string> surfaced;
      for (std::size_t i = phase_start; i < events.size(); ++i) {
        if (events[i].kind == EventKind::impression_enter) {
          surfaced.insert(events[i].payload["item_id"].get<std::string>());
        }
      }
      if (static_cast<int>(surfaced.size()) < config.trigger_items) {
        return {false, std::to_string(surfaced.size()) + " of " +
                           std::to_string(config.trigger_items) + " items surfaced"};
      }
      if (config.min_elapsed_ms && !events.empty() &&
          events.back().t_ms - phase_start_t < *config.min_elapsed_ms) {
        return {false, "minimum browsing time not reached"};
      }
      return {true, std::to_string(surfaced.size()) + " distinct items surfaced"};
    }

    case ProactivityLevel::eager: {
      const std::size_t from = std::max(after_trigger, phase_start);
      std::size_t scroll_from = from;
      for (std::size_t i = from; i < events.size(); ++i) {
        if (events[i].kind == EventKind::refresh) return {true, "feed refreshed"};
      }
      std::int64_t travelled = 0;
      std::optional<std::int64_t> prev;
      for (std::size_t i = scroll_from; i < events.size(); ++i) {
        if (events[i].kind != EventKind::scroll) continue;
        const auto pos = events[i].payload["position_px"].get<std::int64_t>();
        if (prev) travelled += std::abs(pos - *prev);
        prev = pos;
      }
      if (travelled >= config.eager_scroll_px) return {true, "extended scroll"};
      return {false, "no refresh or extended scroll since last comment"};
    }
  }
  return {false, "unknown policy"};
}

InsightReport build_insight(const FeedState& state, std::span<const BehaviorEvent> events,
                            std::span<const std::string> all_categories,
                            const AnalyzerConfig& config) {
  InsightReport report;
  report.distribution = current_composition(state);
  report.entropy_bits = shannon_entropy(report.distribution);
  report.dominant = detect_dominant(report.distribution, config.signals.dominance_top_n);
  report.underrepresented =
      detect_underrepresented(report.distribution, all_categories, config.underrep_threshold);
  report.signals = detect_latent_signals(events, report.distribution, config.signals);
  std::set<std::string> browsed;
  for (const auto& ev : events) {
    if (ev.kind == EventKind::impression_enter) {
      browsed.insert(ev.payload["item_id"].get<std::string>());
    }
  }
  report.browsed_item_count = static_cast<int>(browsed.size());
  return report;
}

ordered_json to_json(const InsightReport& report) {
  ordered_json j;
  ordered_json dist = ordered_json::object();
  for (const auto& [id, p] : report.distribution.proportions()) dist[id] = p;
  j["distribution"] = std::move(dist);
  j["entropy_bits"] = report.entropy_bits;
  ordered_json dom = ordered_json::array();
  for (const auto& d : report.dominant) dom.push_back({{"category", d.category}, {"share", d.share}});
  j["dominant"] = std::move(dom);
  j["underrepresented"] = report.underrepresented;
  ordered_json sig = ordered_json::array();
  for (const auto& s : report.signals) {
    sig.push_back({{"category", s.category},
                   {"evidence_count", s.evidence_count},
                   {"mean_dwell_ms", s.mean_dwell_ms},
                   {"baseline_dwell_ms", s.baseline_dwell_ms}});
  }
  j["signals"] = std::move(sig);
  j["browsed_item_count"] = report.browsed_item_count;
  return j;
}

InsightReport insight_from_json(const ordered_json& j) {
  try {
    InsightReport r;
    r.distribution = CategoryDistribution(j.at("distribution").get<std::map<std::string, double>>());
    r.entropy_bits = j.at("entropy_bits").get<double>();
    for (const auto& d : j.at("dominant")) {
      r.dominant.push_back({d.at("category").get<std::string>(), d.at("share").get<double>()});
    }
    r.underrepresented = j.at("underrepresented").get<std::vector<std::string>>();
    for (const auto& s : j.at("signals")) {
      r.signals.push_back({s.at("category").get<std::string>(), s.at("evidence_count").get<int>(),
                           s.at("mean_dwell_ms").get<double>(),
                           s.at("baseline_dwell_ms").get<double>()});
    }
    r.browsed_item_count = j.at("browsed_item_count").get<int>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed insight report: ") + e.what());
  }
}

}  // namespace feedlens
