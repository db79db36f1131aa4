#include "feedlens/feed_engine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "feedlens/error.hpp"
#include "feedlens/rng.hpp"

namespace feedlens {

using nlohmann::ordered_json;

std::string_view to_string(Origin origin) {
  switch (origin) {
    case Origin::initial: return "initial";
    case Origin::blended: return "blended";
    case Origin::search: return "search";
  }
  return "initial";
}

Origin parse_origin(std::string_view text) {
  if (text == "initial") return Origin::initial;
  if (text == "blended") return Origin::blended;
  if (text == "search") return Origin::search;
  throw ValidationError("unknown origin '" + std::string(text) + "'");
}

std::string_view to_string(UndirectedSampling s) {
  return s == UndirectedSampling::uniform ? "uniform" : "composition_matched";
}

UndirectedSampling parse_undirected_sampling(std::string_view text) {
  if (text == "uniform") return UndirectedSampling::uniform;
  if (text == "composition_matched") return UndirectedSampling::composition_matched;
  throw ValidationError("unknown undirected sampling mode '" + std::string(text) + "'");
}

std::optional<std::size_t> FeedState::index_of(const std::string& item_id) const {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].item.item_id == item_id) return i;
  }
  return std::nullopt;
}

FeedState initialize_feed(const std::string& session_id, const std::vector<ContentItem>& items,
                          double blend_rate, BlendOptions options) {
  if (items.empty()) throw ValidationError("cannot initialize an empty feed");
  if (!(blend_rate > 0.0 && blend_rate < 1.0)) {
    throw ValidationError("blend_rate must lie in (0,1)");
  }
  FeedState state;
  state.session_id = session_id;
  state.blend_rate = blend_rate;
  state.options = options;
  for (const auto& item : items) {
    if (!state.served.insert(item.item_id).second) {
      throw ValidationError("item '" + item.item_id + "' appears twice in the feed");
    }
    state.items.push_back({item, Origin::initial});
  }
  return state;
}

void log_initial_composition(const FeedState& state, EventStream& log, std::int64_t t_ms) {
  ordered_json items = ordered_json::array();
  for (const auto& e : state.items) {
    items.push_back({{"item_id", e.item.item_id}, {"category", e.item.category}});
  }
  log.append(EventKind::composition_change, t_ms, {{"reason", "initial"}, {"items", items}});
}

const BehaviorEvent& record_impression(FeedState& state, EventStream& log,
                                       const std::string& item_id, std::int64_t enter_time) {
  const auto idx = state.index_of(item_id);
  if (!idx) throw ValidationError("item '" + item_id + "' is not in the feed");
  if (state.open_impressions.contains(item_id)) {
    throw StateError("impression for '" + item_id + "' is already open");
  }
  const auto& entry = state.items[*idx];
  const auto& ev = log.append(EventKind::impression_enter, enter_time,
                              {{"item_id", item_id},
                               {"category", entry.item.category},
                               {"origin", to_string(entry.origin)},
                               {"index", *idx}});
  state.open_impressions[item_id] = ImpressionRecord{item_id, enter_time, std::nullopt};
  state.cursor = std::max(state.cursor, *idx + 1);
  return ev;
}

ImpressionRecord close_impression(FeedState& state, EventStream& log, const std::string& item_id,
                                  std::int64_t exit_time) {
  const auto it = state.open_impressions.find(item_id);
  if (it == state.open_impressions.end()) {
    throw StateError("no open impression for '" + item_id + "'");
  }
  if (exit_time < it->second.enter_time) {
    throw MonotonicityError("impression exit precedes its enter");
  }
  const auto idx = state.index_of(item_id);
  if (!idx) throw StateError("item '" + item_id + "' left the feed while visible");
  const auto& entry = state.items[*idx];
  ImpressionRecord rec = it->second;
  rec.exit_time = exit_time;
  log.append(EventKind::impression_exit, exit_time,
             {{"item_id", item_id},
              {"category", entry.item.category},
              {"origin", to_string(entry.origin)},
              {"dwell_ms", *rec.dwell_ms()}});
  state.open_impressions.erase(it);
  return rec;
}

const BehaviorEvent& record_scroll(const FeedState&, EventStream& log, std::int64_t position_px,
                                   std::int64_t time_ms) {
  return log.append(EventKind::scroll, time_ms, {{"position_px", position_px}});
}

void set_direction(FeedState& state, EventStream& log, const Corpus& corpus,
                   const Direction& direction, std::int64_t t_ms) {
  direction.validate(corpus);
  log.append(EventKind::composition_change, t_ms,
             {{"reason", "direction"}, {"direction", to_json(direction)}});
  state.direction = direction;
}

std::size_t replacement_count(std::size_t feed_length, double blend_rate) {
  if (feed_length == 0) return 0;
  const auto k = static_cast<long long>(std::llround(blend_rate * static_cast<double>(feed_length)));
  return static_cast<std::size_t>(std::clamp<long long>(k, 1, static_cast<long long>(feed_length)));
}

namespace {

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

// Per-category candidate queues: items not currently in the feed, never-served
// items first, each group shuffled.
class CandidatePool {
 public:
  CandidatePool(const Corpus& corpus, const FeedState& state, Rng& rng,
                std::optional<std::string> preferred_keyword,
                std::vector<std::string> keyword_categories)
      : corpus_(corpus), state_(state), rng_(rng), keyword_(std::move(preferred_keyword)),
        keyword_categories_(std::move(keyword_categories)) {
    for (const auto& e : state.items) in_feed_.insert(e.item.item_id);
  }

  std::size_t remaining(const std::string& category) { return queue(category).size(); }

  std::optional<const ContentItem*> take(const std::string& category) {
    auto& q = queue(category);
    if (q.empty()) return std::nullopt;
    const ContentItem* item = q.front();
    q.pop_front();
    return item;
  }

 private:
  std::deque<const ContentItem*>& queue(const std::string& category) {
    auto it = queues_.find(category);
    if (it != queues_.end()) return it->second;
    std::vector<const ContentItem*> fresh;
    std::vector<const ContentItem*> stale;
    for (const auto idx : corpus_.items_in(category)) {
      const auto& item = corpus_.items()[idx];
      if (in_feed_.contains(item.item_id)) continue;
      (state_.served.contains(item.item_id) ? stale : fresh).push_back(&item);
    }
    rng_.shuffle(std::span<const ContentItem*>(fresh));
    rng_.shuffle(std::span<const ContentItem*>(stale));
    std::deque<const ContentItem*> q;
    const bool prefer = keyword_ && contains(keyword_categories_, category);
    for (auto* group : {&fresh, &stale}) {
      if (prefer) {
        std::stable_partition(group->begin(), group->end(), [&](const ContentItem* item) {
          return lowercase(item->title).find(*keyword_) != std::string::npos;
        });
      }
      q.insert(q.end(), group->begin(), group->end());
    }
    return queues_.emplace(category, std::move(q)).first->second;
  }

  const Corpus& corpus_;
  const FeedState& state_;
  Rng& rng_;
  std::optional<std::string> keyword_;
  std::vector<std::string> keyword_categories_;
  std::unordered_set<std::string> in_feed_;
  std::unordered_map<std::string, std::deque<const ContentItem*>> queues_;
};

// Draws a category weighted by how many candidates remain in each.
std::optional<std::string> uniform_item_category(CandidatePool& pool,
                                                 const std::vector<std::string>& categories,
                                                 Rng& rng) {
  std::vector<std::size_t> weights;
  std::size_t total = 0;
  for (const auto& c : categories) {
    weights.push_back(pool.remaining(c));
    total += weights.back();
  }
  if (total == 0) return std::nullopt;
  auto draw = rng.below(total);
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (draw < weights[i]) return categories[i];
    draw -= weights[i];
  }
  return std::nullopt;
}

}  // namespace

RefreshResult compute_refresh(FeedState& state, const Corpus& corpus, std::uint64_t seed) {
  RefreshResult result;
  const std::size_t n = state.items.size();
  result.target_count = replacement_count(n, state.blend_rate);

  std::map<std::string, int> counts;
  for (const auto& e : state.items) ++counts[e.item.category];
  auto share = [&](const std::string& c) {
    const auto it = counts.find(c);
    return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(n);
  };

  const auto& dir = state.direction;
  const auto mode = dir ? std::optional<DirectionMode>(dir->mode) : std::nullopt;
  const std::vector<std::string> targets = dir ? dir->target_categories : std::vector<std::string>{};

  // Slot selection: below the cursor, no open impression; decreased category
  // first, target categories last, then over-represented categories, then
  // deepest slots.
  std::vector<std::size_t> eligible;
  for (std::size_t i = state.cursor; i < n; ++i) {
    if (!state.open_impressions.contains(state.items[i].item.item_id)) eligible.push_back(i);
  }
  auto group = [&](std::size_t i) {
    const bool is_target = contains(targets, state.items[i].item.category);
    if (mode == DirectionMode::decrease) return is_target ? 0 : 1;
    if (mode == DirectionMode::increase) return is_target ? 1 : 0;
    return 0;
  };
  std::sort(eligible.begin(), eligible.end(), [&](std::size_t a, std::size_t b) {
    const int ga = group(a), gb = group(b);
    if (ga != gb) return ga < gb;
    const double sa = share(state.items[a].item.category);
    const double sb = share(state.items[b].item.category);
    if (sa != sb) return sa > sb;
    return a > b;
  });
  const std::size_t k = std::min(result.target_count, eligible.size());
  eligible.resize(k);
  if (k == 0) return result;

  Rng rng(seed);
  std::optional<std::string> keyword;
  if (mode == DirectionMode::increase && dir->refinement) keyword = lowercase(*dir->refinement);
  CandidatePool pool(corpus, state, rng, keyword, targets);
  const auto all = corpus.category_ids();

  std::vector<std::string> allowed;  // categories any fallback may use
  for (const auto& c : all) {
    if (!(mode == DirectionMode::decrease && contains(targets, c))) allowed.push_back(c);
  }

  std::vector<std::optional<std::string>> plan(k);
  const auto purity_count = [&](std::size_t slots) {
    return std::min(slots, static_cast<std::size_t>(
                               std::ceil(state.options.target_purity * static_cast<double>(slots) - 1e-9)));
  };
  std::size_t planned = 0;
  if (mode == DirectionMode::increase) {
    const std::size_t focused = purity_count(k);
    for (; planned < focused; ++planned) plan[planned] = targets[planned % targets.size()];
  } else if (mode == DirectionMode::decrease && dir->refinement &&
             dir->refinement->starts_with("fill:")) {
    const auto fill = dir->refinement->substr(5);
    const std::size_t focused = purity_count(k);
    for (; planned < focused; ++planned) plan[planned] = fill;
  } else if (mode == DirectionMode::surprise) {
    std::vector<std::string> under;
    for (const auto& c : all) {
      if (share(c) < state.options.underrep_threshold) under.push_back(c);
    }
    rng.shuffle(std::span<std::string>(under));
    for (; planned < k && !under.empty(); ++planned) plan[planned] = under[planned % under.size()];
    if (under.empty()) {
      result.fallback = true;
      result.fallback_reason = "no underrepresented categories";
    }
  }

  std::vector<std::string> others;  // categories for the unfocused remainder
  for (const auto& c : allowed) {
    if (!(mode == DirectionMode::increase && contains(targets, c))) others.push_back(c);
  }

  for (std::size_t s = 0; s < k; ++s) {
    std::optional<std::string> category = plan[s];
    if (category && pool.remaining(*category) == 0) {
      result.fallback = true;
      result.fallback_reason = "category '" + *category + "' exhausted";
      // Nearest substitute: the least represented category that still has
      // candidates.
      std::optional<std::string> nearest;
      for (const auto& c : allowed) {
        if (pool.remaining(c) == 0) continue;
        if (!nearest || share(c) < share(*nearest)) nearest = c;
      }
      category = nearest;
    } else if (!category) {
      if (!mode && state.options.undirected == UndirectedSampling::composition_matched) {
        const auto& own = state.items[eligible[s]].item.category;
        if (pool.remaining(own) > 0) category = own;
      }
      if (!category && !mode && state.options.undirected == UndirectedSampling::composition_matched) {
        std::vector<std::string> present;
        std::size_t total = 0;
        for (const auto& [c, cnt] : counts) {
          if (pool.remaining(c) > 0) {
            present.push_back(c);
            total += static_cast<std::size_t>(cnt);
          }
        }
        if (total > 0) {
          auto draw = rng.below(total);
          for (const auto& c : present) {
            const auto w = static_cast<std::size_t>(counts[c]);
            if (draw < w) {
              category = c;
              break;
            }
            draw -= w;
          }
        }
      }
      if (!category) category = uniform_item_category(pool, mode ? others : allowed, rng);
      if (!category) category = uniform_item_category(pool, allowed, rng);
    }
    if (!category) {
      result.fallback = true;
      result.fallback_reason = "corpus exhausted";
      break;
    }
    const auto item = pool.take(*category);
    if (!item) continue;
    const std::size_t slot = eligible[s];
    result.replaced.push_back({slot, state.items[slot].item.item_id, (*item)->item_id, *category});
  }

  for (const auto& r : result.replaced) {
    state.items[r.index] = FeedEntry{*corpus.find_item(r.new_item_id), Origin::blended};
    state.served.insert(r.new_item_id);
  }
  std::sort(result.replaced.begin(), result.replaced.end(),
            [](const Replacement& a, const Replacement& b) { return a.index < b.index; });
  ++state.refresh_count;
  return result;
}

RefreshResult refresh_feed(FeedState& state, const Corpus& corpus, std::uint64_t seed,
                           EventStream& log, std::int64_t t_ms) {
  RefreshResult result = compute_refresh(state, corpus, seed);
  ordered_json replaced = ordered_json::array();
  for (const auto& r : result.replaced) {
    replaced.push_back({{"index", r.index},
                        {"old_item_id", r.old_item_id},
                        {"new_item_id", r.new_item_id},
                        {"category", r.category}});
  }
  ordered_json payload;
  payload["reason"] = "refresh";
  payload["seed"] = seed;
  payload["refresh_count"] = state.refresh_count;
  payload["direction"] = state.direction ? to_json(*state.direction) : ordered_json(nullptr);
  payload["target_count"] = result.target_count;
  payload["replaced"] = std::move(replaced);
  payload["fallback"] = result.fallback;
  if (result.fallback) payload["fallback_reason"] = result.fallback_reason;
  log.append(EventKind::composition_change, t_ms, std::move(payload));
  return result;
}

void rewind(FeedState& state) { state.cursor = 0; }

std::vector<std::string> apply_search_results(FeedState& state, EventStream& log,
                                              const std::vector<ContentItem>& results,
                                              SearchPlacement placement, std::size_t max_items,
                                              std::int64_t t_ms) {
  std::unordered_set<std::string> in_feed;
  for (const auto& e : state.items) in_feed.insert(e.item.item_id);
  std::vector<const ContentItem*> fresh;
  for (const auto& item : results) {
    if (fresh.size() >= max_items) break;
    if (!in_feed.contains(item.item_id)) fresh.push_back(&item);
  }
  const std::size_t at = state.cursor;
  std::vector<std::string> ids;
  if (placement == SearchPlacement::prepend) {
    std::vector<FeedEntry> block;
    for (const auto* item : fresh) {
      block.push_back({*item, Origin::search});
      ids.push_back(item->item_id);
    }
    state.items.insert(state.items.begin() + static_cast<std::ptrdiff_t>(at), block.begin(),
                       block.end());
  } else {
    std::size_t slot = at;
    for (const auto* item : fresh) {
      while (slot < state.items.size() &&
             state.open_impressions.contains(state.items[slot].item.item_id)) {
        ++slot;
      }
      if (slot >= state.items.size()) break;
      state.items[slot++] = {*item, Origin::search};
      ids.push_back(item->item_id);
    }
  }
  for (const auto& id : ids) state.served.insert(id);
  log.append(EventKind::composition_change, t_ms,
             {{"reason", "search"},
              {"placement", placement == SearchPlacement::prepend ? "prepend" : "replace"},
              {"at", at},
              {"inserted", ids}});
  return ids;
}

CategoryDistribution current_composition(const FeedState& state) {
  std::map<std::string, int> counts;
  for (const auto& e : state.items) ++counts[e.item.category];
  return CategoryDistribution::from_counts(counts);
}

ordered_json to_json(const FeedState& state) {
  ordered_json j;
  j["session_id"] = state.session_id;
  j["cursor"] = state.cursor;
  j["direction"] = state.direction ? to_json(*state.direction) : ordered_json(nullptr);
  j["blend_rate"] = state.blend_rate;
  j["refresh_count"] = state.refresh_count;
  ordered_json items = ordered_json::array();
  for (const auto& e : state.items) {
    items.push_back(
        {{"item_id", e.item.item_id}, {"category", e.item.category}, {"origin", to_string(e.origin)}});
  }
  j["items"] = std::move(items);
  ordered_json open = ordered_json::array();
  for (const auto& [id, rec] : state.open_impressions) {
    open.push_back({{"item_id", id}, {"enter_time", rec.enter_time}});
  }
  j["open_impressions"] = std::move(open);
  return j;
}

}  // namespace feedlens
