#include <doctest.h>

#include "feedlens/analyzer.hpp"
#include "feedlens/corpus.hpp"
#include "feedlens/error.hpp"
#include "support.hpp"

using namespace feedlens;
using testing_support::StreamBuilder;

TEST_CASE("viewed distribution counts distinct items by enter") {
  StreamBuilder b;
  b.view("a", "food", 0, 10);
  b.view("a", "food", 20, 10);
  b.view("b", "travel", 40, 10);
  b.view("c", "travel", 60, 10);
  const auto d = compute_viewed_distribution(b.stream.view(), {});
  CHECK(d.share("food") == doctest::Approx(1.0 / 3.0));
  CHECK(d.share("travel") == doctest::Approx(2.0 / 3.0));
  const auto late = compute_viewed_distribution(b.stream.view(), {35, 1000});
  CHECK(late.share("travel") == 1.0);
  CHECK_THROWS_AS(compute_viewed_distribution(b.stream.view(), {1000, 2000}), EmptyWindowError);
}

TEST_CASE("dominant and underrepresented") {
  const CategoryDistribution d({{"a", 0.4}, {"b", 0.4}, {"c", 0.16}, {"d", 0.04}});
  const auto dom = detect_dominant(d, 2);
  REQUIRE(dom.size() == 2);
  CHECK(dom[0].category == "a");
  CHECK(dom[1].category == "b");
  const std::vector<std::string> all{"a", "b", "c", "d", "e"};
  CHECK(detect_underrepresented(d, all, 0.05) == std::vector<std::string>{"d", "e"});
  CHECK_THROWS_AS(detect_underrepresented(d, all, 0.0), ValidationError);
  CHECK_THROWS_AS(detect_dominant(d, 0), ValidationError);
}

TEST_CASE("latent signals need evidence and a long dwell") {
  const CategoryDistribution comp({{"food", 0.4}, {"fashion", 0.4}, {"travel", 0.2}});
  StreamBuilder b;
  std::int64_t t = 0;
  for (int i = 0; i < 4; ++i) {
    b.view("f" + std::to_string(i), i % 2 ? "food" : "fashion", t, 1000);
    t += 2000;
  }
  b.view("t0", "travel", t, 5000);
  CHECK(detect_latent_signals(b.stream.view(), comp, {}).empty());
  b.view("t1", "travel", t + 6000, 3000);
  const auto s = detect_latent_signals(b.stream.view(), comp, {});
  REQUIRE(s.size() == 1);
  CHECK(s[0].category == "travel");
  CHECK(s[0].evidence_count == 2);
  CHECK(s[0].mean_dwell_ms == 4000.0);
  CHECK(s[0].baseline_dwell_ms == 1000.0);
  SignalConfig strict;
  strict.signal_multiplier = 4.0;
  CHECK(detect_latent_signals(b.stream.view(), comp, strict).empty());
}

TEST_CASE("moderate fires at the twentieth distinct item once per phase") {
  StreamBuilder b;
  b.phase("exploration", "start", 0);
  for (int i = 0; i < 25; ++i) {
    const auto before = should_trigger(b.stream.view(), ProactivityLevel::moderate, {});
    CHECK_FALSE(before.fire);
    b.view("i" + std::to_string(i), "food", i * 100, 50);
    if (i == 19) {
      CHECK(should_trigger(b.stream.view(), ProactivityLevel::moderate, {}).fire);
      b.stream.append(EventKind::trigger, i * 100 + 60, {{"source", "ai"}});
    }
  }
  CHECK_FALSE(should_trigger(b.stream.view(), ProactivityLevel::moderate, {}).fire);
}

TEST_CASE("moderate respects the minimum elapsed time") {
  StreamBuilder b;
  b.phase("exploration", "start", 0);
  for (int i = 0; i < 20; ++i) b.view("i" + std::to_string(i), "food", i * 10, 5);
  TriggerConfig cfg;
  cfg.min_elapsed_ms = 1000;
  CHECK_FALSE(should_trigger(b.stream.view(), ProactivityLevel::moderate, cfg).fire);
  b.scroll(0, 1000);
  CHECK(should_trigger(b.stream.view(), ProactivityLevel::moderate, cfg).fire);
}

TEST_CASE("reactive only fires on request and eager on refresh or scroll") {
  StreamBuilder b;
  b.phase("exploration", "start", 0);
  for (int i = 0; i < 40; ++i) b.view("i" + std::to_string(i), "food", i * 10, 5);
  CHECK_FALSE(should_trigger(b.stream.view(), ProactivityLevel::reactive, {}).fire);
  CHECK_FALSE(should_trigger(b.stream.view(), ProactivityLevel::eager, {}).fire);
  b.stream.append(EventKind::refresh, 500, {{"rewind", true}});
  CHECK(should_trigger(b.stream.view(), ProactivityLevel::eager, {}).fire);
  b.stream.append(EventKind::trigger, 501, {{"source", "ai"}});
  CHECK_FALSE(should_trigger(b.stream.view(), ProactivityLevel::eager, {}).fire);
  b.scroll(0, 600);
  b.scroll(3000, 700);
  CHECK(should_trigger(b.stream.view(), ProactivityLevel::eager, {}).fire);
  b.stream.append(EventKind::click, 800, {{"target", std::string(kAnalyzeRequestTarget)}});
  CHECK(should_trigger(b.stream.view(), ProactivityLevel::reactive, {}).fire);
}

TEST_CASE("insight report round-trips") {
  const auto corpus = synthetic_corpus();
  auto feed = initialize_feed("s", generate_biased_feed(corpus, feed_preset('B'), 3), 0.25);
  StreamBuilder b;
  const auto ids = corpus.category_ids();
  const auto report = build_insight(feed, b.stream.view(), ids, {});
  CHECK(report.dominant.size() == 2);
  CHECK(report.entropy_bits > 0.0);
  CHECK(report.browsed_item_count == 0);
  CHECK(insight_from_json(to_json(report)) == report);
  CHECK_THROWS_AS(insight_from_json(nlohmann::ordered_json::object()), ParseError);
}

TEST_CASE("proactivity names") {
  for (auto p : {ProactivityLevel::reactive, ProactivityLevel::moderate, ProactivityLevel::eager}) {
    CHECK(parse_proactivity(to_string(p)) == p);
  }
  CHECK_THROWS_AS(parse_proactivity("loud"), ValidationError);
}
