#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "feedlens/analyzer.hpp"
#include "feedlens/distribution.hpp"
#include "feedlens/event_log.hpp"

namespace feedlens {

inline constexpr std::string_view kWarmupPhase = "warmup";
inline constexpr std::string_view kExplorationPhase = "exploration";

struct MetricsConfig {
  double underrep_threshold = 0.05;
  std::int64_t discovery_min_dwell_ms = 2000;
  std::int64_t engagement_window_ms = 300000;
  std::int64_t velocity_window_ms = 120000;
  // Minimum dwell for an impression to count as browsed (breadth and
  // bubble-breaking). 0 counts every impression_enter.
  std::int64_t browse_min_dwell_ms = 0;
};

// Events strictly between a phase's start and end marks. An unterminated
// phase runs to the end of the stream.
struct PhaseRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::int64_t start_ms = 0;
};

// Throws ValidationError when the phase has no start mark.
PhaseRange find_phase(std::span<const BehaviorEvent> events, std::string_view phase);

// Composition logged with reason "initial". Throws NotFoundError if absent.
CategoryDistribution initial_composition(std::span<const BehaviorEvent> events);

int exploration_breadth(std::span<const BehaviorEvent> events, const MetricsConfig& config = {});

// H(exploration viewed) - H(warm-up viewed). Throws EmptyWindowError.
double diversity_gain(std::span<const BehaviorEvent> events);

double bubble_breaking_rate(std::span<const BehaviorEvent> events, const CategoryDistribution& initial,
                            std::span<const std::string> all_categories,
                            const MetricsConfig& config = {});

std::int64_t expression_cost(std::span<const BehaviorEvent> events);

std::optional<std::int64_t> time_to_first_discovery(std::span<const BehaviorEvent> events,
                                                    const CategoryDistribution& initial,
                                                    std::span<const std::string> all_categories,
                                                    const MetricsConfig& config = {});

// nullopt for conditions without a tool.
std::optional<bool> tool_engagement(std::span<const BehaviorEvent> events, std::string_view condition,
                                    const MetricsConfig& config = {});

int conversation_depth(std::span<const BehaviorEvent> events);

// Sum of |position delta| over consecutive scroll samples in the window (pairs
// split by a refresh are skipped), per second of elapsed time between the
// first and last sample.
std::optional<double> scroll_velocity(std::span<const BehaviorEvent> events, TimeWindow window);

struct DwellByOrigin {
  std::optional<double> mean_initial_ms;
  std::optional<double> mean_blended_ms;
};

DwellByOrigin dwell_by_origin(std::span<const BehaviorEvent> events);

struct SessionMetrics {
  std::string session_id;
  std::string condition;
  int breadth = 0;
  std::optional<double> entropy_pre_bits;
  std::optional<double> entropy_post_bits;
  std::optional<double> diversity_gain_bits;
  double bubble_breaking_rate = 0.0;
  std::int64_t expression_cost_chars = 0;
  std::optional<std::int64_t> time_to_first_discovery_ms;
  std::optional<bool> tool_engaged_first_5min;
  int conversation_turns = 0;
  std::optional<double> scroll_velocity_pre;
  std::optional<double> scroll_velocity_post;
  std::optional<double> mean_dwell_initial_ms;
  std::optional<double> mean_dwell_blended_ms;

  bool operator==(const SessionMetrics&) const = default;
};

SessionMetrics compute_metrics(const LogHeader& header, std::span<const BehaviorEvent> events,
                               const MetricsConfig& config = {});

nlohmann::ordered_json to_json(const SessionMetrics& m);

// Names and numeric values of every SessionMetrics field, in record order.
// Booleans become 0/1; absent values are nullopt.
std::vector<std::pair<std::string, std::optional<double>>> metric_fields(const SessionMetrics& m);

struct Descriptive {
  int n = 0;
  std::optional<double> mean;
  std::optional<double> sd;
  std::optional<double> median;
};

// Over present values only. sd is the sample standard deviation (n-1).
Descriptive describe_values(std::span<const double> values);

struct ConditionTable {
  std::vector<std::string> conditions;
  std::vector<std::string> fields;
  // cells[field][condition]; a condition with no sessions has no entry.
  std::map<std::string, std::map<std::string, Descriptive>> cells;
  std::map<std::string, int> session_counts;
};

ConditionTable summarize(std::span<const SessionMetrics> sessions,
                         std::vector<std::string> conditions = {"FEED", "SEARCH", "USER_CHAT",
                                                                "AI_INIT"});

nlohmann::ordered_json to_json(const ConditionTable& table);
std::string format_table(const ConditionTable& table);
std::string format_session(const SessionMetrics& m);

}  // namespace feedlens
