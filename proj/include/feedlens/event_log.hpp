#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace feedlens {

enum class EventKind {
  impression_enter,
  impression_exit,
  scroll,
  click,
  refresh,
  composition_change,
  dialogue_turn,
  option_select,
  free_text,
  trigger,
  dismiss,
  provider_fallback,
  search_query,
  survey_response,
  phase_mark,
};

std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view text);

struct BehaviorEvent {
  std::int64_t seq = 0;
  std::string session_id;
  std::int64_t t_ms = 0;
  EventKind kind = EventKind::phase_mark;
  nlohmann::ordered_json payload = nlohmann::ordered_json::object();
};

// Characters in a UTF-8 string (code points); the unit of every logged
// "chars" field.
std::int64_t char_count(std::string_view text);

// Fixed field order: seq, session_id, t_ms, kind, payload.
std::string to_line(const BehaviorEvent& event);

// Per-kind required payload fields. Throws ValidationError.
void validate_payload(EventKind kind, const nlohmann::ordered_json& payload);

// Session log header; written once as the first line of every log file.
struct LogHeader {
  std::string session_id;
  std::string condition;
  nlohmann::ordered_json feed_spec = nlohmann::ordered_json::object();
  nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
  std::string wall_clock_start;
  std::vector<std::string> categories;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const;
  static LogHeader from_json(const nlohmann::ordered_json& j);
};

// Append-only event stream for one session. Enforces sequence and clock
// monotonicity, one open impression per item, and well-nested phase marks.
// An optional sink observes every accepted event before append returns.
class EventStream {
 public:
  using Sink = std::function<void(const BehaviorEvent&)>;

  EventStream() = default;
  explicit EventStream(std::string session_id) : session_id_(std::move(session_id)) {}

  const BehaviorEvent& append(EventKind kind, std::int64_t t_ms,
                              nlohmann::ordered_json payload = nlohmann::ordered_json::object());

  // Appends an event that already carries a seq (used by load); the seq must
  // be the next one.
  const BehaviorEvent& append_loaded(BehaviorEvent event);

  void set_sink(Sink sink) { sink_ = std::move(sink); }

  const std::string& session_id() const { return session_id_; }
  const std::vector<BehaviorEvent>& events() const { return events_; }
  std::span<const BehaviorEvent> view() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  std::int64_t last_t_ms() const { return events_.empty() ? 0 : events_.back().t_ms; }

  bool impression_open(const std::string& item_id) const {
    return open_impressions_.contains(item_id);
  }
  std::optional<std::string> open_phase() const { return open_phase_; }

 private:
  void check(const BehaviorEvent& event) const;
  void commit(BehaviorEvent event);

  std::string session_id_;
  std::vector<BehaviorEvent> events_;
  std::map<std::string, std::int64_t> open_impressions_;
  std::optional<std::string> open_phase_;
  Sink sink_;
};

// Durable writer: header first, then one flushed line per event.
class LogWriter {
 public:
  LogWriter(const std::filesystem::path& path, const LogHeader& header);

  void write(const BehaviorEvent& event);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

struct LoadedLog {
  std::optional<LogHeader> header;
  EventStream stream;
  std::vector<std::string> warnings;
};

LoadedLog load_log(std::istream& in);
LoadedLog load_log_file(const std::filesystem::path& path);
void write_log(std::ostream& out, const LogHeader& header, const EventStream& stream);

// Something that reconstructs state from events in order.
class EventConsumer {
 public:
  virtual ~EventConsumer() = default;
  virtual void consume(const BehaviorEvent& event) = 0;
};

void replay(const EventStream& stream, std::span<EventConsumer* const> consumers);

}  // namespace feedlens
