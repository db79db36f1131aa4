#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "feedlens/corpus.hpp"
#include "feedlens/distribution.hpp"
#include "feedlens/event_log.hpp"
#include "feedlens/exploration.hpp"

namespace feedlens {

// `search` marks items inserted from search results; they are neither part of
// the initial feed nor produced by blending.
enum class Origin { initial, blended, search };

std::string_view to_string(Origin origin);
Origin parse_origin(std::string_view text);

struct FeedEntry {
  ContentItem item;
  Origin origin = Origin::initial;

  bool operator==(const FeedEntry&) const = default;
};

struct ImpressionRecord {
  std::string item_id;
  std::int64_t enter_time = 0;
  std::optional<std::int64_t> exit_time;

  std::optional<std::int64_t> dwell_ms() const {
    if (!exit_time) return std::nullopt;
    return *exit_time - enter_time;
  }
};

// How a refresh without a direction picks replacements.
//   uniform: uniform sample over corpus items not in the feed.
//   composition_matched: each replacement comes from the category of the item
//   it replaces (or, when that category is exhausted, from a category drawn in
//   proportion to the current composition).
enum class UndirectedSampling { uniform, composition_matched };

std::string_view to_string(UndirectedSampling s);
UndirectedSampling parse_undirected_sampling(std::string_view text);

struct BlendOptions {
  // Share of replacements drawn from the target category for increase
  // directions (and from the fill category for refined decreases).
  double target_purity = 0.8;
  double underrep_threshold = 0.05;
  UndirectedSampling undirected = UndirectedSampling::uniform;
};

struct FeedState {
  std::string session_id;
  std::vector<FeedEntry> items;
  // One past the deepest index surfaced so far; indices below it are frozen.
  std::size_t cursor = 0;
  std::optional<Direction> direction;
  double blend_rate = 0.25;
  int refresh_count = 0;
  BlendOptions options;
  std::map<std::string, ImpressionRecord> open_impressions;
  // Every item id that has been part of this feed.
  std::set<std::string> served;

  std::optional<std::size_t> index_of(const std::string& item_id) const;
};

FeedState initialize_feed(const std::string& session_id, const std::vector<ContentItem>& items,
                          double blend_rate, BlendOptions options = {});

// Logs the initial composition as a composition_change with reason "initial".
void log_initial_composition(const FeedState& state, EventStream& log, std::int64_t t_ms);

const BehaviorEvent& record_impression(FeedState& state, EventStream& log,
                                       const std::string& item_id, std::int64_t enter_time);
ImpressionRecord close_impression(FeedState& state, EventStream& log, const std::string& item_id,
                                  std::int64_t exit_time);
const BehaviorEvent& record_scroll(const FeedState& state, EventStream& log,
                                   std::int64_t position_px, std::int64_t time_ms);

void set_direction(FeedState& state, EventStream& log, const Corpus& corpus,
                   const Direction& direction, std::int64_t t_ms);

struct Replacement {
  std::size_t index = 0;
  std::string old_item_id;
  std::string new_item_id;
  std::string category;

  bool operator==(const Replacement&) const = default;
};

struct RefreshResult {
  std::size_t target_count = 0;
  std::vector<Replacement> replaced;
  bool fallback = false;
  std::string fallback_reason;
};

// Replacement count before cursor limits: round(rate * n) clamped to [1, n].
std::size_t replacement_count(std::size_t feed_length, double blend_rate);

// Substitutes round(blend_rate * n) items below the cursor, then logs a
// composition_change event. Surfaced items and items with an open impression
// are never replaced; when fewer free slots exist, all of them are used.
RefreshResult refresh_feed(FeedState& state, const Corpus& corpus, std::uint64_t seed,
                           EventStream& log, std::int64_t t_ms);

// Same computation without logging; used by replay to re-derive a refresh.
RefreshResult compute_refresh(FeedState& state, const Corpus& corpus, std::uint64_t seed);

// Pull-to-refresh returns the viewport to the top of the feed.
void rewind(FeedState& state);

enum class SearchPlacement { prepend, replace };

// Inserts search results at the cursor as one block (prepend) or overwrites
// the slots right below the cursor (replace). Items already in the feed are
// skipped. Logs a composition_change event.
std::vector<std::string> apply_search_results(FeedState& state, EventStream& log,
                                              const std::vector<ContentItem>& results,
                                              SearchPlacement placement, std::size_t max_items,
                                              std::int64_t t_ms);

CategoryDistribution current_composition(const FeedState& state);

nlohmann::ordered_json to_json(const FeedState& state);

}  // namespace feedlens
