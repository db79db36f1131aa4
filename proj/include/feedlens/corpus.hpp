#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace feedlens {

struct Category {
  std::string id;
  std::string display_name;

  bool operator==(const Category&) const = default;
};

struct ContentItem {
  std::string item_id;
  std::string title;
  std::string cover_ref;
  std::string author;
  std::int64_t engagement_count = 0;
  std::string category;

  bool operator==(const ContentItem&) const = default;
};

// Immutable, validated pool of categorized items. Safe to share read-only
// between sessions.
class Corpus {
 public:
  Corpus(std::vector<Category> categories, std::vector<ContentItem> items);

  const std::vector<Category>& categories() const { return categories_; }
  const std::vector<ContentItem>& items() const { return items_; }

  std::vector<std::string> category_ids() const;
  bool has_category(const std::string& id) const { return category_index_.contains(id); }
  const Category& category(const std::string& id) const;
  const ContentItem* find_item(const std::string& item_id) const;

  // Indices into items(), in corpus order.
  const std::vector<std::size_t>& items_in(const std::string& category_id) const;

 private:
  std::vector<Category> categories_;
  std::vector<ContentItem> items_;
  std::unordered_map<std::string, std::size_t> category_index_;
  std::unordered_map<std::string, std::size_t> item_index_;
  std::vector<std::vector<std::size_t>> by_category_;
};

// Requested shape of a biased starting feed.
struct FeedSpec {
  std::vector<std::string> dominant_categories;
  double concentration = 0.8;
  int length = 35;

  void validate() const;
  bool operator==(const FeedSpec&) const = default;
};

// The three study feeds: A = food + fashion, B = skincare + fitness,
// C = home decor + photography; 35 items at 80% concentration.
FeedSpec feed_preset(char name);

std::vector<Category> default_categories();

// Line-delimited corpus document: a header record listing categories, then
// one item record per line.
Corpus load_corpus(std::istream& in);
Corpus load_corpus_file(const std::filesystem::path& path);
void write_corpus(std::ostream& out, const Corpus& corpus);

// Synthetic stand-in with the default 14 categories and near-uniform
// per-category counts.
Corpus synthetic_corpus(std::uint64_t seed = 7, int item_count = 320);

// Largest per-category count that stays strictly below `threshold` of a feed
// of `length` items.
int max_count_below_share(int length, double threshold);

std::vector<ContentItem> generate_biased_feed(const Corpus& corpus, const FeedSpec& spec,
                                              std::uint64_t seed,
                                              double underrep_threshold = 0.05);

}  // namespace feedlens
