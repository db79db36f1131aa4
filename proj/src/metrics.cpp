#include "feedlens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "feedlens/error.hpp"

namespace feedlens {

using nlohmann::ordered_json;

PhaseRange find_phase(std::span<const BehaviorEvent> events, std::string_view phase) {
  std::optional<PhaseRange> range;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    if (ev.kind != EventKind::phase_mark || ev.payload["phase"] != phase) continue;
    if (ev.payload["edge"] == "start" && !range) {
      range = PhaseRange{i + 1, events.size(), ev.t_ms};
    } else if (ev.payload["edge"] == "end" && range && range->end == events.size()) {
      range->end = i;
    }
  }
  if (!range) throw ValidationError("log has no " + std::string(phase) + " phase mark");
  return *range;
}

CategoryDistribution initial_composition(std::span<const BehaviorEvent> events) {
  for (const auto& ev : events) {
    if (ev.kind == EventKind::composition_change && ev.payload["reason"] == "initial") {
      std::map<std::string, int> counts;
      for (const auto& item : ev.payload["items"]) ++counts[item["category"].get<std::string>()];
      return CategoryDistribution::from_counts(counts);
    }
  }
  throw NotFoundError("log has no initial composition");
}

namespace {

std::span<const BehaviorEvent> slice(std::span<const BehaviorEvent> events, const PhaseRange& r) {
  return events.subspan(r.begin, r.end - r.begin);
}

std::set<std::string> browsed_categories(std::span<const BehaviorEvent> window,
                                         const MetricsConfig& config) {
  std::set<std::string> out;
  for (const auto& ev : window) {
    if (config.browse_min_dwell_ms == 0) {
      if (ev.kind == EventKind::impression_enter) out.insert(ev.payload["category"].get<std::string>());
    } else if (ev.kind == EventKind::impression_exit &&
               ev.payload["dwell_ms"].get<std::int64_t>() >= config.browse_min_dwell_ms) {
      out.insert(ev.payload["category"].get<std::string>());
    }
  }
  return out;
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

int exploration_breadth(std::span<const BehaviorEvent> events, const MetricsConfig& config) {
  const auto r = find_phase(events, kExplorationPhase);
  return static_cast<int>(browsed_categories(slice(events, r), config).size());
}

double diversity_gain(std::span<const BehaviorEvent> events) {
  const auto pre = compute_viewed_distribution(slice(events, find_phase(events, kWarmupPhase)), {});
  const auto post =
      compute_viewed_distribution(slice(events, find_phase(events, kExplorationPhase)), {});
  return shannon_entropy(post) - shannon_entropy(pre);
}

double bubble_breaking_rate(std::span<const BehaviorEvent> events, const CategoryDistribution& initial,
                            std::span<const std::string> all_categories,
                            const MetricsConfig& config) {
  const auto under = detect_underrepresented(initial, all_categories, config.underrep_threshold);
  if (under.empty()) return 0.0;
  const auto browsed = browsed_categories(slice(events, find_phase(events, kExplorationPhase)), config);
  const auto hit = std::count_if(under.begin(), under.end(),
                                 [&](const std::string& c) { return browsed.contains(c); });
  return static_cast<double>(hit) / static_cast<double>(under.size());
}

std::int64_t expression_cost(std::span<const BehaviorEvent> events) {
  std::int64_t total = 0;
  for (const auto& ev : slice(events, find_phase(events, kExplorationPhase))) {
    if (ev.kind == EventKind::free_text || ev.kind == EventKind::search_query) {
      total += ev.payload["chars"].get<std::int64_t>();
    }
  }
  return total;
}

std::optional<std::int64_t> time_to_first_discovery(std::span<const BehaviorEvent> events,
                                                    const CategoryDistribution& initial,
                                                    std::span<const std::string> all_categories,
                                                    const MetricsConfig& config) {
  const auto under = detect_underrepresented(initial, all_categories, config.underrep_threshold);
  const std::set<std::string> target(under.begin(), under.end());
  const auto r = find_phase(events, kExplorationPhase);
  for (const auto& ev : slice(events, r)) {
    if (ev.kind == EventKind::impression_exit &&
        target.contains(ev.payload["category"].get<std::string>()) &&
        ev.payload["dwell_ms"].get<std::int64_t>() >= config.discovery_min_dwell_ms) {
      return ev.t_ms - r.start_ms;
    }
  }
  return std::nullopt;
}

std::optional<bool> tool_engagement(std::span<const BehaviorEvent> events, std::string_view condition,
                                    const MetricsConfig& config) {
  if (condition == "FEED") return std::nullopt;
  const auto r = find_phase(events, kExplorationPhase);
  for (const auto& ev : slice(events, r)) {
    if (ev.t_ms - r.start_ms >= config.engagement_window_ms) break;
    const bool user_action =
        ev.kind == EventKind::search_query || ev.kind == EventKind::free_text ||
        ev.kind == EventKind::option_select ||
        (ev.kind == EventKind::dialogue_turn && ev.payload["role"] == "user");
    if (user_action) return true;
  }
  return false;
}

int conversation_depth(std::span<const BehaviorEvent> events) {
  int turns = 0;
  for (const auto& ev : events) {
    if (ev.kind == EventKind::option_select || ev.kind == EventKind::free_text) {
      ++turns;
    } else if (ev.kind == EventKind::dialogue_turn && ev.payload.value("turn_kind", "") == "insight") {
      ++turns;
    }
  }
  return turns;
}

std::optional<double> scroll_velocity(std::span<const BehaviorEvent> events, TimeWindow window) {
  std::optional<std::int64_t> first_t;
  std::optional<std::int64_t> last_t;
  std::optional<std::int64_t> prev;
  double travelled = 0.0;
  for (const auto& ev : events) {
    if (!window.contains(ev.t_ms)) continue;
    if (ev.kind == EventKind::refresh) {
      prev.reset();
    } else if (ev.kind == EventKind::scroll) {
      const auto pos = ev.payload["position_px"].get<std::int64_t>();
      if (prev) travelled += static_cast<double>(std::llabs(pos - *prev));
      prev = pos;
      if (!first_t) first_t = ev.t_ms;
      last_t = ev.t_ms;
    }
  }
  if (!first_t || *last_t == *first_t) return std::nullopt;
  return travelled / (static_cast<double>(*last_t - *first_t) / 1000.0);
}

DwellByOrigin dwell_by_origin(std::span<const BehaviorEvent> events) {
  std::vector<double> initial;
  std::vector<double> blended;
  for (const auto& ev : events) {
    if (ev.kind != EventKind::impression_exit) continue;
    const auto dwell = static_cast<double>(ev.payload["dwell_ms"].get<std::int64_t>());
    const auto origin = ev.payload["origin"].get<std::string>();
    if (origin == "initial") initial.push_back(dwell);
    if (origin == "blended") blended.push_back(dwell);
  }
  return {mean_of(initial), mean_of(blended)};
}

SessionMetrics compute_metrics(const LogHeader& header, std::span<const BehaviorEvent> events,
                               const MetricsConfig& config) {
  SessionMetrics m;
  m.session_id = header.session_id;
  m.condition = header.condition;
  const auto initial = initial_composition(events);
  const std::span<const std::string> cats = header.categories;
  m.breadth = exploration_breadth(events, config);
  try {
    m.entropy_pre_bits = shannon_entropy(
        compute_viewed_distribution(slice(events, find_phase(events, kWarmupPhase)), {}));
  } catch (const EmptyWindowError&) {
  }
  try {
    m.entropy_post_bits = shannon_entropy(
        compute_viewed_distribution(slice(events, find_phase(events, kExplorationPhase)), {}));
  } catch (const EmptyWindowError&) {
  }
  if (m.entropy_pre_bits && m.entropy_post_bits) {
    m.diversity_gain_bits = *m.entropy_post_bits - *m.entropy_pre_bits;
  }
  m.bubble_breaking_rate = bubble_breaking_rate(events, initial, cats, config);
  m.expression_cost_chars = expression_cost(events);
  m.time_to_first_discovery_ms = time_to_first_discovery(events, initial, cats, config);
  m.tool_engaged_first_5min = tool_engagement(events, header.condition, config);
  m.conversation_turns = conversation_depth(events);
  for (const auto& ev : events) {
    if (ev.kind == EventKind::composition_change && ev.payload["reason"] == "direction") {
      m.scroll_velocity_pre =
          scroll_velocity(events, {ev.t_ms - config.velocity_window_ms, ev.t_ms});
      m.scroll_velocity_post =
          scroll_velocity(events, {ev.t_ms, ev.t_ms + config.velocity_window_ms});
      break;
    }
  }
  const auto dwell = dwell_by_origin(events);
  m.mean_dwell_initial_ms = dwell.mean_initial_ms;
  m.mean_dwell_blended_ms = dwell.mean_blended_ms;
  return m;
}

std::vector<std::pair<std::string, std::optional<double>>> metric_fields(const SessionMetrics& m) {
  auto opt = [](const auto& v) -> std::optional<double> {
    if (!v) return std::nullopt;
    return static_cast<double>(*v);
  };
  return {
      {"breadth", m.breadth},
      {"entropy_pre_bits", m.entropy_pre_bits},
      {"entropy_post_bits", m.entropy_post_bits},
      {"diversity_gain_bits", m.diversity_gain_bits},
      {"bubble_breaking_rate", m.bubble_breaking_rate},
      {"expression_cost_chars", static_cast<double>(m.expression_cost_chars)},
      {"time_to_first_discovery_ms", opt(m.time_to_first_discovery_ms)},
      {"tool_engaged_first_5min", opt(m.tool_engaged_first_5min)},
      {"conversation_turns", m.conversation_turns},
      {"scroll_velocity_pre", m.scroll_velocity_pre},
      {"scroll_velocity_post", m.scroll_velocity_post},
      {"mean_dwell_initial_ms", m.mean_dwell_initial_ms},
      {"mean_dwell_blended_ms", m.mean_dwell_blended_ms},
  };
}

ordered_json to_json(const SessionMetrics& m) {
  ordered_json j;
  j["session_id"] = m.session_id;
  j["condition"] = m.condition;
  auto put = [&](const char* key, const auto& v) {
    if (v) {
      j[key] = *v;
    } else {
      j[key] = nullptr;
    }
  };
  j["breadth"] = m.breadth;
  put("entropy_pre_bits", m.entropy_pre_bits);
  put("entropy_post_bits", m.entropy_post_bits);
  put("diversity_gain_bits", m.diversity_gain_bits);
  j["bubble_breaking_rate"] = m.bubble_breaking_rate;
  j["expression_cost_chars"] = m.expression_cost_chars;
  put("time_to_first_discovery_ms", m.time_to_first_discovery_ms);
  put("tool_engaged_first_5min", m.tool_engaged_first_5min);
  j["conversation_turns"] = m.conversation_turns;
  put("scroll_velocity_pre", m.scroll_velocity_pre);
  put("scroll_velocity_post", m.scroll_velocity_post);
  put("mean_dwell_initial_ms", m.mean_dwell_initial_ms);
  put("mean_dwell_blended_ms", m.mean_dwell_blended_ms);
  return j;
}

Descriptive describe_values(std::span<const double> values) {
  Descriptive d;
  d.n = static_cast<int>(values.size());
  if (values.empty()) return d;
  double sum = 0.0;
  for (double v : values) sum += v;
  d.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - *d.mean) * (v - *d.mean);
    d.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  d.median = n % 2 == 1 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
  return d;
}

ConditionTable summarize(std::span<const SessionMetrics> sessions, std::vector<std::string> conditions) {
  ConditionTable t;
  t.conditions = std::move(conditions);
  for (const auto& [name, v] : metric_fields(SessionMetrics{})) t.fields.push_back(name);
  std::map<std::string, std::map<std::string, std::vector<double>>> values;
  for (const auto& s : sessions) {
    if (std::find(t.conditions.begin(), t.conditions.end(), s.condition) == t.conditions.end()) {
      t.conditions.push_back(s.condition);
    }
    ++t.session_counts[s.condition];
    for (const auto& [name, v] : metric_fields(s)) {
      auto& bucket = values[name][s.condition];
      if (v) bucket.push_back(*v);
    }
  }
  for (const auto& field : t.fields) {
    for (const auto& c : t.conditions) {
      if (!t.session_counts.contains(c)) continue;
      t.cells[field][c] = describe_values(values[field][c]);
    }
  }
  return t;
}

ordered_json to_json(const ConditionTable& t) {
  auto num = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  ordered_json j;
  j["conditions"] = t.conditions;
  ordered_json counts = ordered_json::object();
  for (const auto& c : t.conditions) {
    counts[c] = t.session_counts.contains(c) ? ordered_json(t.session_counts.at(c)) : ordered_json(nullptr);
  }
  j["sessions"] = std::move(counts);
  ordered_json fields = ordered_json::object();
  for (const auto& f : t.fields) {
    ordered_json row = ordered_json::object();
    for (const auto& c : t.conditions) {
      const auto fit = t.cells.find(f);
      if (fit == t.cells.end() || !fit->second.contains(c)) {
        row[c] = nullptr;
        continue;
      }
      const auto& d = fit->second.at(c);
      row[c] = {{"n", d.n}, {"mean", num(d.mean)}, {"sd", num(d.sd)}, {"median", num(d.median)}};
    }
    fields[f] = std::move(row);
  }
  j["fields"] = std::move(fields);
  return j;
}

namespace {

std::string fmt(const std::optional<double>& v) {
  if (!v) return "-";
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << *v;
  return out.str();
}

}  // namespace

std::string format_table(const ConditionTable& t) {
  std::ostringstream out;
  out << std::left << std::setw(28) << "metric";
  for (const auto& c : t.conditions) {
    const auto it = t.session_counts.find(c);
    std::string head = c + " (n=" + (it == t.session_counts.end() ? "0" : std::to_string(it->second)) + ")";
    out << std::setw(38) << head;
  }
  out << '\n';
  for (const auto& f : t.fields) {
    out << std::setw(28) << f;
    for (const auto& c : t.conditions) {
      std::string cell = "absent";
      const auto fit = t.cells.find(f);
      if (fit != t.cells.end() && fit->second.contains(c)) {
        const auto& d = fit->second.at(c);
        cell = fmt(d.mean) + " (" + fmt(d.sd) + ") md " + fmt(d.median);
      }
      out << std::setw(37) << cell << ' ';
    }
    out << '\n';
  }
  return out.str();
}

std::string format_session(const SessionMetrics& m) {
  std::ostringstream out;
  out << "session   " << m.session_id << '\n' << "condition " << m.condition << '\n';
  for (const auto& [name, v] : metric_fields(m)) {
    out << std::left << std::setw(28) << name << fmt(v) << '\n';
  }
  return out.str();
}

}  // namespace feedlens
