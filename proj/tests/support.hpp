#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "feedlens/event_log.hpp"

namespace testing_support {

using nlohmann::ordered_json;

// Hand-built event streams for metric and analyzer tests.
struct StreamBuilder {
  feedlens::EventStream stream{"test"};

  void initial(const std::map<std::string, int>& counts, std::int64_t t = 0) {
    ordered_json items = ordered_json::array();
    int n = 0;
    for (const auto& [cat, k] : counts) {
      for (int i = 0; i < k; ++i) {
        items.push_back({{"item_id", cat + "-init-" + std::to_string(n++)}, {"category", cat}});
      }
    }
    stream.append(feedlens::EventKind::composition_change, t, {{"reason", "initial"}, {"items", items}});
  }
  void phase(const std::string& name, const std::string& edge, std::int64_t t) {
    stream.append(feedlens::EventKind::phase_mark, t, {{"phase", name}, {"edge", edge}});
  }
  void enter(const std::string& id, const std::string& cat, std::int64_t t,
             const std::string& origin = "initial") {
    stream.append(feedlens::EventKind::impression_enter, t,
                  {{"item_id", id}, {"category", cat}, {"origin", origin}, {"index", 0}});
  }
  void exit(const std::string& id, const std::string& cat, std::int64_t t, std::int64_t dwell,
            const std::string& origin = "initial") {
    stream.append(feedlens::EventKind::impression_exit, t,
                  {{"item_id", id}, {"category", cat}, {"origin", origin}, {"dwell_ms", dwell}});
  }
  void view(const std::string& id, const std::string& cat, std::int64_t t, std::int64_t dwell,
            const std::string& origin = "initial") {
    enter(id, cat, t, origin);
    exit(id, cat, t + dwell, dwell, origin);
  }
  void scroll(std::int64_t pos, std::int64_t t) {
    stream.append(feedlens::EventKind::scroll, t, {{"position_px", pos}});
  }
  void free_text(const std::string& text, std::int64_t t) {
    stream.append(feedlens::EventKind::free_text, t,
                  {{"text", text}, {"chars", static_cast<std::int64_t>(text.size())}});
  }
  void option(const std::string& id, std::int64_t t) {
    stream.append(feedlens::EventKind::option_select, t, {{"option_id", id}, {"chars", 0}});
  }
  void search(const std::string& q, std::int64_t t) {
    stream.append(feedlens::EventKind::search_query, t,
                  {{"query", q}, {"chars", static_cast<std::int64_t>(q.size())}});
  }
};

// Term-by-term Shannon entropy in bits, written out from the definition.
inline double entropy_oracle(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * (std::log(x) / std::log(2.0));
  }
  return h;
}

}  // namespace testing_support
