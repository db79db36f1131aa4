#include <doctest.h>

#include <sstream>

#include "feedlens/error.hpp"
#include "feedlens/event_log.hpp"

using namespace feedlens;
using nlohmann::ordered_json;

namespace {

LogHeader sample_header() {
  LogHeader h;
  h.session_id = "s1";
  h.condition = "FEED";
  h.feed_spec = {{"dominant_categories", {"food", "fashion"}}};
  h.seeds = {{"session", 1}};
  h.wall_clock_start = "2000-01-01T00:00:00Z";
  h.categories = {"food", "fashion", "travel"};
  return h;
}

EventStream sample_stream() {
  EventStream s("s1");
  s.append(EventKind::phase_mark, 0, {{"phase", "warmup"}, {"edge", "start"}});
  s.append(EventKind::impression_enter, 10,
           {{"item_id", "a"}, {"category", "food"}, {"origin", "initial"}});
  s.append(EventKind::scroll, 20, {{"position_px", 170}});
  s.append(EventKind::impression_exit, 30,
           {{"item_id", "a"}, {"category", "food"}, {"origin", "initial"}, {"dwell_ms", 20}});
  s.append(EventKind::free_text, 40, {{"text", "café \"quoted\""}, {"chars", 13}});
  s.append(EventKind::phase_mark, 50, {{"phase", "warmup"}, {"edge", "end"}});
  return s;
}

}  // namespace

TEST_CASE("event kinds round-trip through their names") {
  for (int k = 0; k <= static_cast<int>(EventKind::phase_mark); ++k) {
    const auto kind = static_cast<EventKind>(k);
    CHECK(parse_event_kind(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(parse_event_kind("bogus"), ValidationError);
}

TEST_CASE("line format has a fixed field order") {
  const auto s = sample_stream();
  const auto line = to_line(s.events()[2]);
  CHECK(line == R"({"seq":3,"session_id":"s1","t_ms":20,"kind":"scroll","payload":{"position_px":170}})");
}

TEST_CASE("stream invariants") {
  EventStream s("s1");
  s.append(EventKind::scroll, 5, {{"position_px", 0}});
  CHECK_THROWS_AS(s.append(EventKind::scroll, 4, {{"position_px", 0}}), MonotonicityError);
  CHECK_THROWS_AS(s.append(EventKind::scroll, 6, {{"position", 0}}), ValidationError);
  CHECK_THROWS_AS(s.append(EventKind::impression_exit, 6,
                           {{"item_id", "x"}, {"category", "c"}, {"origin", "initial"}, {"dwell_ms", 1}}),
                  StateError);
  s.append(EventKind::impression_enter, 6, {{"item_id", "x"}, {"category", "c"}, {"origin", "initial"}});
  CHECK(s.impression_open("x"));
  CHECK_THROWS_AS(
      s.append(EventKind::impression_enter, 7, {{"item_id", "x"}, {"category", "c"}, {"origin", "initial"}}),
      StateError);
  CHECK_THROWS_AS(s.append(EventKind::phase_mark, 7, {{"phase", "warmup"}, {"edge", "end"}}), StateError);
  s.append(EventKind::phase_mark, 7, {{"phase", "warmup"}, {"edge", "start"}});
  CHECK_THROWS_AS(s.append(EventKind::phase_mark, 7, {{"phase", "exploration"}, {"edge", "start"}}),
                  StateError);
  CHECK(s.open_phase() == std::optional<std::string>("warmup"));
  CHECK(s.size() == 3);
  CHECK(s.events().back().seq == 3);
}

TEST_CASE("sink sees every accepted event") {
  EventStream s("s1");
  int seen = 0;
  s.set_sink([&](const BehaviorEvent&) { ++seen; });
  s.append(EventKind::scroll, 1, {{"position_px", 0}});
  CHECK_THROWS(s.append(EventKind::scroll, 0, {{"position_px", 0}}));
  CHECK(seen == 1);
}

TEST_CASE("log round-trip is byte identical") {
  const auto header = sample_header();
  const auto stream = sample_stream();
  std::stringstream first;
  write_log(first, header, stream);
  std::stringstream in(first.str());
  const auto loaded = load_log(in);
  REQUIRE(loaded.header);
  CHECK(loaded.header->session_id == "s1");
  CHECK(loaded.header->categories == header.categories);
  CHECK(loaded.warnings.empty());
  REQUIRE(loaded.stream.size() == stream.size());
  std::stringstream second;
  write_log(second, *loaded.header, loaded.stream);
  CHECK(second.str() == first.str());
}

TEST_CASE("truncated trailing record is dropped with a warning") {
  std::stringstream out;
  write_log(out, sample_header(), sample_stream());
  std::string text = out.str();
  text += R"({"seq":7,"session_id":"s1","t_ms":6)";
  std::stringstream in(text);
  const auto loaded = load_log(in);
  CHECK(loaded.stream.size() == 6);
  REQUIRE(loaded.warnings.size() == 1);
  CHECK(loaded.warnings[0].find("truncated") != std::string::npos);
}

TEST_CASE("corrupt interior record is a parse error") {
  std::stringstream out;
  write_log(out, sample_header(), sample_stream());
  std::string text = out.str();
  const auto second_line = text.find('\n') + 1;
  text.insert(second_line, "{not json\n");
  std::stringstream in(text);
  CHECK_THROWS_AS(load_log(in), ParseError);
}

TEST_CASE("out of order records are rejected on load") {
  std::stringstream text;
  text << R"({"seq":1,"session_id":"s","t_ms":5,"kind":"scroll","payload":{"position_px":0}})" << "\n";
  text << R"({"seq":2,"session_id":"s","t_ms":4,"kind":"scroll","payload":{"position_px":0}})" << "\n";
  CHECK_THROWS_AS(load_log(text), ParseError);
  std::stringstream gap;
  gap << R"({"seq":1,"session_id":"s","t_ms":5,"kind":"scroll","payload":{"position_px":0}})" << "\n";
  gap << R"({"seq":3,"session_id":"s","t_ms":6,"kind":"scroll","payload":{"position_px":0}})" << "\n";
  CHECK_THROWS_AS(load_log(gap), ParseError);
}

TEST_CASE("replay feeds every event to every consumer in order") {
  struct Counter : EventConsumer {
    std::vector<std::int64_t> seqs;
    void consume(const BehaviorEvent& e) override { seqs.push_back(e.seq); }
  };
  const auto stream = sample_stream();
  Counter a;
  Counter b;
  EventConsumer* consumers[] = {&a, &b};
  replay(stream, consumers);
  CHECK(a.seqs == std::vector<std::int64_t>{1, 2, 3, 4, 5, 6});
  CHECK(b.seqs == a.seqs);
}
