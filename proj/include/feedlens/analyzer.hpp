#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "feedlens/distribution.hpp"
#include "feedlens/event_log.hpp"
#include "feedlens/feed_engine.hpp"

namespace feedlens {

// Closed interval of session-relative time.
struct TimeWindow {
  std::int64_t begin_ms = 0;
  std::int64_t end_ms = INT64_MAX;

  bool contains(std::int64_t t) const { return t >= begin_ms && t <= end_ms; }
};

struct CategoryShare {
  std::string category;
  double share = 0.0;

  bool operator==(const CategoryShare&) const = default;
};

struct LatentSignal {
  std::string category;
  int evidence_count = 0;
  double mean_dwell_ms = 0.0;
  double baseline_dwell_ms = 0.0;

  bool operator==(const LatentSignal&) const = default;
};

struct InsightReport {
  CategoryDistribution distribution;
  double entropy_bits = 0.0;
  std::vector<CategoryShare> dominant;
  std::vector<std::string> underrepresented;
  std::vector<LatentSignal> signals;
  int browsed_item_count = 0;

  bool operator==(const InsightReport&) const = default;
};

nlohmann::ordered_json to_json(const InsightReport& report);
InsightReport insight_from_json(const nlohmann::ordered_json& j);

struct SignalConfig {
  int min_impressions = 4;
  int min_evidence = 2;
  double signal_multiplier = 2.0;
  int dominance_top_n = 2;
};

enum class ProactivityLevel { reactive, moderate, eager };

std::string_view to_string(ProactivityLevel level);
ProactivityLevel parse_proactivity(std::string_view text);

struct TriggerConfig {
  int trigger_items = 20;
  std::int64_t eager_scroll_px = 3000;
  // Optional gate for Moderate: minimum time since the phase started.
  std::optional<std::int64_t> min_elapsed_ms;
};

struct TriggerDecision {
  bool fire = false;
  std::string reason;
};

struct AnalyzerConfig {
  SignalConfig signals;
  double underrep_threshold = 0.05;
};

// The click target that represents an explicit "analyze my feed" request.
inline constexpr std::string_view kAnalyzeRequestTarget = "analyze_request";

double shannon_entropy(const CategoryDistribution& d);

// Distinct items with an impression_enter inside the window, grouped by
// category. Throws EmptyWindowError when there are none.
CategoryDistribution compute_viewed_distribution(std::span<const BehaviorEvent> events,
                                                 TimeWindow window);

std::vector<CategoryShare> detect_dominant(const CategoryDistribution& d, int top_n);

std::vector<std::string> detect_underrepresented(const CategoryDistribution& d,
                                                 std::span<const std::string> all_categories,
                                                 double threshold);

std::vector<LatentSignal> detect_latent_signals(std::span<const BehaviorEvent> events,
                                                const CategoryDistribution& feed_composition,
                                                const SignalConfig& config);

TriggerDecision should_trigger(std::span<const BehaviorEvent> events, ProactivityLevel policy,
                               const TriggerConfig& config);

InsightReport build_insight(const FeedState& state, std::span<const BehaviorEvent> events,
                            std::span<const std::string> all_categories,
                            const AnalyzerConfig& config);

}  // namespace feedlens
