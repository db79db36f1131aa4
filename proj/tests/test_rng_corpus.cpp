#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "feedlens/corpus.hpp"
#include "feedlens/error.hpp"
#include "feedlens/rng.hpp"

using namespace feedlens;

TEST_CASE("rng is reproducible and bounded") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.below(7);
    CHECK(x == b.below(7));
    CHECK(x < 7);
    const double u = a.unit();
    CHECK(u == b.unit());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  CHECK(derive_seed(1, "feed") != derive_seed(1, "refresh"));
  CHECK(derive_seed(1, std::uint64_t{0}) != derive_seed(2, std::uint64_t{0}));
  CHECK(derive_seed(5, "x") == derive_seed(5, "x"));
}

TEST_CASE("rng below is roughly uniform") {
  Rng r(3);
  std::map<std::uint64_t, int> counts;
  for (int i = 0; i < 60000; ++i) ++counts[r.below(6)];
  for (const auto& [k, c] : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("shuffle is a permutation") {
  Rng r(9);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  r.shuffle(std::span<int>(v));
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("corpus validation") {
  const std::vector<Category> cats{{"food", "Food"}, {"travel", "Travel"}};
  CHECK_THROWS_AS(Corpus({}, {}), ValidationError);
  CHECK_THROWS_AS(Corpus(cats, {{"x", "t", "c", "a", 1, "sports"}}), ValidationError);
  CHECK_THROWS_AS(Corpus(cats, {{"x", "t", "c", "a", 1, "food"}, {"x", "t", "c", "a", 1, "food"}}),
                  ValidationError);
  Corpus c(cats, {{"x", "t", "c", "a", 1, "food"}});
  CHECK(c.find_item("x") != nullptr);
  CHECK(c.find_item("y") == nullptr);
  CHECK(c.items_in("travel").empty());
  CHECK(c.has_category("food"));
}

TEST_CASE("synthetic corpus covers every default category") {
  const auto c = synthetic_corpus();
  CHECK(c.items().size() == 320);
  CHECK(c.categories().size() == 14);
  for (const auto& cat : c.categories()) CHECK(c.items_in(cat.id).size() >= 22);
  const auto again = synthetic_corpus();
  CHECK(again.items() == c.items());
}

TEST_CASE("corpus round-trips through the line format") {
  const auto c = synthetic_corpus(11, 60);
  std::stringstream buf;
  write_corpus(buf, c);
  const auto loaded = load_corpus(buf);
  CHECK(loaded.items() == c.items());
  CHECK(loaded.categories() == c.categories());
}

TEST_CASE("corpus parse errors name the line") {
  std::stringstream in;
  in << R"({"categories":[{"id":"food","display_name":"Food"}]})" << "\n";
  in << R"({"item_id":"a","title":"t","cover_ref":"c","author":"x","engagement_count":3,"category":"food"})" << "\n";
  in << R"({"item_id":"b","title":"t","cover_ref":"c","author":"x","engagement_count":3,"category":"nope"})" << "\n";
  try {
    load_corpus(in);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("max count below share") {
  CHECK(max_count_below_share(35, 0.05) == 1);
  CHECK(max_count_below_share(100, 0.05) == 4);
  CHECK(max_count_below_share(20, 0.05) == 0);
}

TEST_CASE("biased feed matches the requested shape") {
  const auto c = synthetic_corpus();
  for (char preset : {'A', 'B', 'C'}) {
    const auto spec = feed_preset(preset);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto feed = generate_biased_feed(c, spec, seed);
      REQUIRE(feed.size() == 35);
      std::map<std::string, int> counts;
      std::set<std::string> ids;
      for (const auto& item : feed) {
        ++counts[item.category];
        ids.insert(item.item_id);
      }
      CHECK(ids.size() == 35);
      int dominant = 0;
      for (const auto& d : spec.dominant_categories) dominant += counts[d];
      CHECK(dominant == 28);
      CHECK(std::abs(counts[spec.dominant_categories[0]] - counts[spec.dominant_categories[1]]) <= 1);
      for (const auto& [cat, k] : counts) {
        if (std::find(spec.dominant_categories.begin(), spec.dominant_categories.end(), cat) ==
            spec.dominant_categories.end()) {
          CHECK(static_cast<double>(k) / 35.0 < 0.05);
        }
      }
    }
  }
  CHECK(generate_biased_feed(c, feed_preset('A'), 5) == generate_biased_feed(c, feed_preset('A'), 5));
}

TEST_CASE("biased feed errors") {
  const auto c = synthetic_corpus();
  FeedSpec bad{{"food"}, 1.5, 35};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  FeedSpec unknown{{"sports"}, 0.8, 35};
  CHECK_THROWS(generate_biased_feed(c, unknown, 1));
  FeedSpec huge{{"food", "fashion"}, 0.8, 200};
  CHECK_THROWS_AS(generate_biased_feed(c, huge, 1), CapacityError);
  CHECK_THROWS_AS(feed_preset('Z'), ValidationError);
}
