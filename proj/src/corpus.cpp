#include "feedlens/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "feedlens/catalog.hpp"
#include "feedlens/error.hpp"
#include "feedlens/rng.hpp"

namespace feedlens {

using nlohmann::json;
using nlohmann::ordered_json;

Corpus::Corpus(std::vector<Category> categories, std::vector<ContentItem> items)
    : categories_(std::move(categories)), items_(std::move(items)) {
  if (categories_.empty()) {
    throw ValidationError("corpus declares no categories");
  }
  if (items_.empty()) {
    throw ValidationError("corpus contains no items");
  }
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    const auto& c = categories_[i];
    if (c.id.empty()) {
      throw ValidationError("category at position " + std::to_string(i) + " has an empty id");
    }
    if (!category_index_.emplace(c.id, i).second) {
      throw ValidationError("duplicate category id '" + c.id + "'");
    }
  }
  by_category_.resize(categories_.size());
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const auto& item = items_[i];
    if (item.item_id.empty()) {
      throw ValidationError("item at position " + std::to_string(i) + " has an empty item_id");
    }
    if (item.engagement_count < 0) {
      throw ValidationError("item '" + item.item_id + "' has a negative engagement_count");
    }
    const auto cat = category_index_.find(item.category);
    if (cat == category_index_.end()) {
      throw ValidationError("item '" + item.item_id + "' references unknown category '" +
                            item.category + "'");
    }
    if (!item_index_.emplace(item.item_id, i).second) {
      throw ValidationError("duplicate item_id '" + item.item_id + "'");
    }
    by_category_[cat->second].push_back(i);
  }
}

std::vector<std::string> Corpus::category_ids() const {
  std::vector<std::string> ids;
  ids.reserve(categories_.size());
  for (const auto& c : categories_) ids.push_back(c.id);
  return ids;
}

const Category& Corpus::category(const std::string& id) const {
  const auto it = category_index_.find(id);
  if (it == category_index_.end()) {
    throw ValidationError("unknown category '" + id + "'");
  }
  return categories_[it->second];
}

const ContentItem* Corpus::find_item(const std::string& item_id) const {
  const auto it = item_index_.find(item_id);
  return it == item_index_.end() ? nullptr : &items_[it->second];
}

const std::vector<std::size_t>& Corpus::items_in(const std::string& category_id) const {
  const auto it = category_index_.find(category_id);
  if (it == category_index_.end()) {
    throw ValidationError("unknown category '" + category_id + "'");
  }
  return by_category_[it->second];
}

void FeedSpec::validate() const {
  if (dominant_categories.size() < 2 || dominant_categories.size() > 3) {
    throw ValidationError("feed spec needs 2 or 3 dominant categories, got " +
                          std::to_string(dominant_categories.size()));
  }
  std::set<std::string> unique(dominant_categories.begin(), dominant_categories.end());
  if (unique.size() != dominant_categories.size()) {
    throw ValidationError("feed spec lists a dominant category twice");
  }
  if (!(concentration > 0.0 && concentration < 1.0)) {
    throw ValidationError("feed spec concentration must lie in (0,1)");
  }
  if (length <= 0) {
    throw ValidationError("feed spec length must be positive");
  }
}

FeedSpec feed_preset(char name) {
  switch (name) {
    case 'A': return FeedSpec{{"food", "fashion"}, 0.8, 35};
    case 'B': return FeedSpec{{"skincare", "fitness"}, 0.8, 35};
    case 'C': return FeedSpec{{"home_decor", "photography"}, 0.8, 35};
    default: break;
  }
  throw ValidationError(std::string("unknown feed preset '") + name + "'");
}

std::vector<Category> default_categories() {
  std::vector<Category> out;
  for (const auto& p : category_profiles()) out.push_back({p.id, p.display_name});
  return out;
}

namespace {

std::string require_string(const json& rec, const char* field, std::size_t line) {
  const auto it = rec.find(field);
  if (it == rec.end() || !it->is_string()) {
    throw ParseError("corpus line " + std::to_string(line) + ": missing string field '" + field +
                     "'");
  }
  return it->get<std::string>();
}

}  // namespace

Corpus load_corpus(std::istream& in) {
  std::vector<Category> categories;
  std::vector<ContentItem> items;
  bool have_header = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.is_object()) {
      throw ParseError("corpus line " + std::to_string(line_no) + ": record is not an object");
    }
    if (!have_header) {
      const auto cats = rec.find("categories");
      if (cats == rec.end() || !cats->is_array()) {
        throw ParseError("corpus line " + std::to_string(line_no) +
                         ": first record must be the category header");
      }
      for (const auto& c : *cats) {
        if (!c.is_object()) {
          throw ParseError("corpus line " + std::to_string(line_no) + ": malformed category entry");
        }
        categories.push_back(
            {require_string(c, "id", line_no), require_string(c, "display_name", line_no)});
      }
      have_header = true;
      continue;
    }
    ContentItem item;
    item.item_id = require_string(rec, "item_id", line_no);
    item.title = require_string(rec, "title", line_no);
    item.cover_ref = require_string(rec, "cover_ref", line_no);
    item.author = require_string(rec, "author", line_no);
    const auto eng = rec.find("engagement_count");
    if (eng == rec.end() || !eng->is_number_integer()) {
      throw ParseError("corpus line " + std::to_string(line_no) + " (item '" + item.item_id +
                       "'): engagement_count must be an integer");
    }
    item.engagement_count = eng->get<std::int64_t>();
    item.category = require_string(rec, "category", line_no);
    if (std::none_of(categories.begin(), categories.end(),
                     [&](const Category& c) { return c.id == item.category; })) {
      throw ParseError("corpus line " + std::to_string(line_no) + " (item '" + item.item_id +
                       "'): unknown category '" + item.category + "'");
    }
    items.push_back(std::move(item));
  }
  if (!have_header) {
    throw ParseError("corpus document is empty");
  }
  return Corpus(std::move(categories), std::move(items));
}

Corpus load_corpus_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open corpus file '" + path.string() + "'");
  }
  return load_corpus(in);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  ordered_json header;
  header["categories"] = ordered_json::array();
  for (const auto& c : corpus.categories()) {
    header["categories"].push_back({{"id", c.id}, {"display_name", c.display_name}});
  }
  out << header.dump() << '\n';
  for (const auto& item : corpus.items()) {
    ordered_json rec;
    rec["item_id"] = item.item_id;
    rec["title"] = item.title;
    rec["cover_ref"] = item.cover_ref;
    rec["author"] = item.author;
    rec["engagement_count"] = item.engagement_count;
    rec["category"] = item.category;
    out << rec.dump() << '\n';
  }
}

Corpus synthetic_corpus(std::uint64_t seed, int item_count) {
  static const char* const kAuthors[] = {
      "Lin Yue",  "Mara Ossei", "Chen Bo",   "Ines Duarte", "Kai Moreno", "Sora Hayashi",
      "Ada Novak", "Tomas Riel", "Wen Qiao", "Priya Rao",   "Jonah Wells", "Mei Tan"};
  static const char* const kSuffixes[] = {"", " (part 2)", ", revisited", ": notes", " for beginners",
                                          " that worked", ", honestly"};
  const auto& profiles = category_profiles();
  const int k = static_cast<int>(profiles.size());
  if (item_count < k) {
    throw ValidationError("synthetic corpus needs at least one item per category");
  }
  Rng rng(seed);
  std::vector<ContentItem> items;
  items.reserve(static_cast<std::size_t>(item_count));
  const int base = item_count / k;
  const int extra = item_count % k;
  for (int c = 0; c < k; ++c) {
    const auto& profile = profiles[static_cast<std::size_t>(c)];
    const int count = base + (c < extra ? 1 : 0);
    for (int i = 0; i < count; ++i) {
      const auto& sub = profile.subtopics[static_cast<std::size_t>(i) % profile.subtopics.size()];
      const auto& stem = sub.title_stems[rng.below(sub.title_stems.size())];
      const char* suffix = kSuffixes[rng.below(std::size(kSuffixes))];
      std::ostringstream id;
      id << profile.id << '-';
      id.width(3);
      id.fill('0');
      id << (i + 1);
      ContentItem item;
      item.item_id = id.str();
      item.title = stem + suffix;
      item.cover_ref = "covers/" + item.item_id + ".jpg";
      item.author = kAuthors[rng.below(std::size(kAuthors))];
      // Heavy-tailed engagement: 10^U(1.5, 4.5).
      item.engagement_count =
          static_cast<std::int64_t>(std::llround(std::pow(10.0, rng.uniform(1.5, 4.5))));
      item.category = profile.id;
      items.push_back(std::move(item));
    }
  }
  return Corpus(default_categories(), std::move(items));
}

int max_count_below_share(int length, double threshold) {
  // Largest m with m / length < threshold.
  int m = static_cast<int>(std::ceil(threshold * length)) - 1;
  while (m >= 0 && static_cast<double>(m) / length >= threshold) --m;
  while (static_cast<double>(m + 1) / length < threshold) ++m;
  return std::max(m, 0);
}

std::vector<ContentItem> generate_biased_feed(const Corpus& corpus, const FeedSpec& spec,
                                              std::uint64_t seed, double underrep_threshold) {
  spec.validate();
  for (const auto& id : spec.dominant_categories) {
    if (!corpus.has_category(id)) {
      throw ValidationError("feed spec references unknown category '" + id + "'");
    }
  }
  Rng rng(seed);
  const int length = spec.length;
  const int dominant_total = static_cast<int>(std::lround(spec.concentration * length));
  const int m = static_cast<int>(spec.dominant_categories.size());

  auto take = [&](const std::string& category, int count, std::vector<ContentItem>& out) {
    std::vector<std::size_t> pool = corpus.items_in(category);
    if (static_cast<int>(pool.size()) < count) {
      throw CapacityError("category '" + category + "' has " + std::to_string(pool.size()) +
                          " items but the feed needs " + std::to_string(count));
    }
    rng.shuffle(std::span<std::size_t>(pool));
    for (int i = 0; i < count; ++i) out.push_back(corpus.items()[pool[static_cast<std::size_t>(i)]]);
  };

  std::vector<ContentItem> feed;
  feed.reserve(static_cast<std::size_t>(length));
  for (int i = 0; i < m; ++i) {
    const int count = dominant_total / m + (i < dominant_total % m ? 1 : 0);
    take(spec.dominant_categories[static_cast<std::size_t>(i)], count, feed);
  }

  // Scattered remainder: spread over non-dominant categories, each kept under
  // the underrepresentation share when the category count allows it.
  const int scattered = length - dominant_total;
  std::vector<std::string> others;
  for (const auto& c : corpus.categories()) {
    if (std::find(spec.dominant_categories.begin(), spec.dominant_categories.end(), c.id) ==
        spec.dominant_categories.end()) {
      others.push_back(c.id);
    }
  }
  if (scattered > 0) {
    if (others.empty()) {
      throw CapacityError("no non-dominant categories available for the scattered portion");
    }
    rng.shuffle(std::span<std::string>(others));
    int cap = std::max(1, max_count_below_share(length, underrep_threshold));
    const int n_others = static_cast<int>(others.size());
    if (cap * n_others < scattered) {
      cap = (scattered + n_others - 1) / n_others;
    }
    std::vector<int> quota(others.size(), 0);
    int remaining = scattered;
    for (int round = 0; round < cap && remaining > 0; ++round) {
      for (std::size_t i = 0; i < others.size() && remaining > 0; ++i) {
        if (quota[i] < static_cast<int>(corpus.items_in(others[i]).size())) {
          ++quota[i];
          --remaining;
        }
      }
    }
    if (remaining > 0) {
      throw CapacityError("non-dominant categories cannot supply " + std::to_string(scattered) +
                          " scattered items");
    }
    for (std::size_t i = 0; i < others.size(); ++i) {
      if (quota[i] > 0) take(others[i], quota[i], feed);
    }
  }
  rng.shuffle(std::span<ContentItem>(feed));
  return feed;
}

}  // namespace feedlens
