#include "feedlens/search.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "feedlens/catalog.hpp"
#include "feedlens/error.hpp"

namespace feedlens {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (const unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string joined(const std::vector<std::string>& words) {
  std::string out = " ";
  for (const auto& w : words) out += w + " ";
  return out;
}

}  // namespace

std::vector<ContentItem> search_corpus(const Corpus& corpus, std::string_view query) {
  const auto words = tokens(query);
  if (words.empty()) throw ValidationError("search query is empty");
  const std::string padded = joined(words);

  std::set<std::string> matched_categories;
  for (const auto& cat : corpus.categories()) {
    std::vector<std::string> names{lower(cat.display_name), lower(cat.id)};
    if (const auto* profile = find_profile(cat.id)) {
      for (const auto& s : profile->synonyms) names.push_back(lower(s));
    }
    for (const auto& name : names) {
      const auto name_words = tokens(name);
      if (!name_words.empty() && padded.find(joined(name_words)) != std::string::npos) {
        matched_categories.insert(cat.id);
      }
    }
  }

  struct Scored {
    int score;
    const ContentItem* item;
  };
  std::vector<Scored> hits;
  for (const auto& item : corpus.items()) {
    int score = matched_categories.contains(item.category) ? 100 : 0;
    const std::string title = lower(item.title);
    for (const auto& w : words) {
      if (title.find(w) != std::string::npos) ++score;
    }
    if (score > 0) hits.push_back({score, &item});
  }
  std::sort(hits.begin(), hits.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.item->engagement_count != b.item->engagement_count) {
      return a.item->engagement_count > b.item->engagement_count;
    }
    return a.item->item_id < b.item->item_id;
  });
  std::vector<ContentItem> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(*h.item);
  return out;
}

}  // namespace feedlens
