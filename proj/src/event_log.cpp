#include "feedlens/event_log.hpp"

#include <algorithm>
#include <array>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>

#include "feedlens/error.hpp"

namespace feedlens {

using nlohmann::ordered_json;

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 15> kKindNames{{
    {EventKind::impression_enter, "impression_enter"},
    {EventKind::impression_exit, "impression_exit"},
    {EventKind::scroll, "scroll"},
    {EventKind::click, "click"},
    {EventKind::refresh, "refresh"},
    {EventKind::composition_change, "composition_change"},
    {EventKind::dialogue_turn, "dialogue_turn"},
    {EventKind::option_select, "option_select"},
    {EventKind::free_text, "free_text"},
    {EventKind::trigger, "trigger"},
    {EventKind::dismiss, "dismiss"},
    {EventKind::provider_fallback, "provider_fallback"},
    {EventKind::search_query, "search_query"},
    {EventKind::survey_response, "survey_response"},
    {EventKind::phase_mark, "phase_mark"},
}};

void require(const ordered_json& p, const char* field, bool (ordered_json::*is)() const noexcept,
             EventKind kind) {
  const auto it = p.find(field);
  if (it == p.end() || !((*it).*is)()) {
    throw ValidationError(std::string(to_string(kind)) + " payload: field '" + field +
                          "' missing or of wrong type");
  }
}

}  // namespace

std::string_view to_string(EventKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

EventKind parse_event_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  throw ValidationError("unknown event kind '" + std::string(text) + "'");
}

std::string to_line(const BehaviorEvent& event) {
  ordered_json j;
  j["seq"] = event.seq;
  j["session_id"] = event.session_id;
  j["t_ms"] = event.t_ms;
  j["kind"] = to_string(event.kind);
  j["payload"] = event.payload;
  return j.dump();
}

void validate_payload(EventKind kind, const ordered_json& p) {
  if (!p.is_object()) {
    throw ValidationError(std::string(to_string(kind)) + " payload must be an object");
  }
  using J = ordered_json;
  switch (kind) {
    case EventKind::impression_enter:
      require(p, "item_id", &J::is_string, kind);
      require(p, "category", &J::is_string, kind);
      require(p, "origin", &J::is_string, kind);
      break;
    case EventKind::impression_exit:
      require(p, "item_id", &J::is_string, kind);
      require(p, "category", &J::is_string, kind);
      require(p, "origin", &J::is_string, kind);
      require(p, "dwell_ms", &J::is_number_integer, kind);
      if (p["dwell_ms"].get<std::int64_t>() < 0) {
        throw ValidationError("impression_exit payload: negative dwell_ms");
      }
      break;
    case EventKind::scroll:
      require(p, "position_px", &J::is_number_integer, kind);
      break;
    case EventKind::click:
      require(p, "target", &J::is_string, kind);
      break;
    case EventKind::refresh:
      require(p, "rewind", &J::is_boolean, kind);
      break;
    case EventKind::composition_change:
      require(p, "reason", &J::is_string, kind);
      break;
    case EventKind::dialogue_turn:
      require(p, "role", &J::is_string, kind);
      require(p, "text", &J::is_string, kind);
      break;
    case EventKind::option_select:
      require(p, "option_id", &J::is_string, kind);
      require(p, "chars", &J::is_number_integer, kind);
      if (p["chars"].get<std::int64_t>() != 0) {
        throw ValidationError("option_select payload: option clicks carry 0 typed characters");
      }
      break;
    case EventKind::free_text:
      require(p, "text", &J::is_string, kind);
      require(p, "chars", &J::is_number_integer, kind);
      break;
    case EventKind::trigger:
      require(p, "source", &J::is_string, kind);
      break;
    case EventKind::dismiss:
      break;
    case EventKind::provider_fallback:
      require(p, "reason", &J::is_string, kind);
      break;
    case EventKind::search_query:
      require(p, "query", &J::is_string, kind);
      require(p, "chars", &J::is_number_integer, kind);
      break;
    case EventKind::survey_response:
      for (const auto& [question, answer] : p.items()) {
        if (!answer.is_number_integer()) {
          throw ValidationError("survey_response payload: answer to '" + question +
                                "' is not an integer");
        }
      }
      break;
    case EventKind::phase_mark: {
      require(p, "phase", &J::is_string, kind);
      require(p, "edge", &J::is_string, kind);
      const auto edge = p["edge"].get<std::string>();
      if (edge != "start" && edge != "end") {
        throw ValidationError("phase_mark payload: edge must be 'start' or 'end'");
      }
      break;
    }
  }
}

ordered_json LogHeader::to_json() const {
  ordered_json h;
  h["session_id"] = session_id;
  h["condition"] = condition;
  h["feed_spec"] = feed_spec;
  h["seeds"] = seeds;
  h["wall_clock_start"] = wall_clock_start;
  h["categories"] = categories;
  h["config"] = config;
  ordered_json line;
  line["header"] = std::move(h);
  return line;
}

LogHeader LogHeader::from_json(const ordered_json& j) {
  const auto it = j.find("header");
  if (it == j.end() || !it->is_object()) throw ParseError("log header record missing");
  const auto& h = *it;
  LogHeader out;
  try {
    out.session_id = h.at("session_id").get<std::string>();
    out.condition = h.at("condition").get<std::string>();
    out.feed_spec = h.value("feed_spec", ordered_json::object());
    out.seeds = h.value("seeds", ordered_json::object());
    out.wall_clock_start = h.value("wall_clock_start", std::string());
    out.categories = h.value("categories", std::vector<std::string>{});
    out.config = h.value("config", ordered_json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed log header: ") + e.what());
  }
  return out;
}

void EventStream::check(const BehaviorEvent& event) const {
  if (!session_id_.empty() && event.session_id != session_id_) {
    throw ValidationError("event for session '" + event.session_id + "' appended to stream '" +
                          session_id_ + "'");
  }
  if (event.t_ms < 0) {
    throw MonotonicityError("negative session-relative time");
  }
  if (!events_.empty() && event.t_ms < events_.back().t_ms) {
    throw MonotonicityError("event at t=" + std::to_string(event.t_ms) + " precedes t=" +
                            std::to_string(events_.back().t_ms));
  }
  validate_payload(event.kind, event.payload);
  switch (event.kind) {
    case EventKind::impression_enter: {
      const auto id = event.payload["item_id"].get<std::string>();
      if (open_impressions_.contains(id)) {
        throw StateError("impression for '" + id + "' is already open");
      }
      break;
    }
    case EventKind::impression_exit: {
      const auto id = event.payload["item_id"].get<std::string>();
      if (!open_impressions_.contains(id)) {
        throw StateError("impression_exit for '" + id + "' without a matching enter");
      }
      break;
    }
    case EventKind::phase_mark: {
      const auto phase = event.payload["phase"].get<std::string>();
      const bool start = event.payload["edge"].get<std::string>() == "start";
      if (start && open_phase_) {
        throw StateError("phase '" + phase + "' started while '" + *open_phase_ + "' is open");
      }
      if (!start && open_phase_ != phase) {
        throw StateError("phase '" + phase + "' ended but was not open");
      }
      break;
    }
    default:
      break;
  }
}

void EventStream::commit(BehaviorEvent event) {
  switch (event.kind) {
    case EventKind::impression_enter:
      open_impressions_[event.payload["item_id"].get<std::string>()] = event.t_ms;
      break;
    case EventKind::impression_exit:
      open_impressions_.erase(event.payload["item_id"].get<std::string>());
      break;
    case EventKind::phase_mark:
      if (event.payload["edge"].get<std::string>() == "start") {
        open_phase_ = event.payload["phase"].get<std::string>();
      } else {
        open_phase_.reset();
      }
      break;
    default:
      break;
  }
  events_.push_back(std::move(event));
  if (sink_) sink_(events_.back());
}

const BehaviorEvent& EventStream::append(EventKind kind, std::int64_t t_ms, ordered_json payload) {
  BehaviorEvent event;
  event.seq = static_cast<std::int64_t>(events_.size()) + 1;
  event.session_id = session_id_;
  event.t_ms = t_ms;
  event.kind = kind;
  event.payload = std::move(payload);
  check(event);
  commit(std::move(event));
  return events_.back();
}

const BehaviorEvent& EventStream::append_loaded(BehaviorEvent event) {
  if (session_id_.empty()) session_id_ = event.session_id;
  const auto expected = static_cast<std::int64_t>(events_.size()) + 1;
  if (event.seq != expected) {
    throw ValidationError("expected seq " + std::to_string(expected) + ", found " +
                          std::to_string(event.seq));
  }
  check(event);
  commit(std::move(event));
  return events_.back();
}

std::int64_t char_count(std::string_view text) {
  return std::count_if(text.begin(), text.end(),
                       [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; });
}

LogWriter::LogWriter(const std::filesystem::path& path, const LogHeader& header) : path_(path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create log directory '" + path.parent_path().string() + "'");
  }
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw IoError("cannot open log file '" + path.string() + "'");
  out_ << header.to_json().dump() << '\n';
  out_.flush();
  if (!out_) throw IoError("failed writing log header to '" + path.string() + "'");
}

void LogWriter::write(const BehaviorEvent& event) {
  out_ << to_line(event) << '\n';
  out_.flush();
  if (!out_) throw IoError("failed writing event to '" + path_.string() + "'");
}

LoadedLog load_log(std::istream& in) {
  const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  LoadedLog out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    const bool complete = nl != std::string::npos;
    std::string line = content.substr(pos, complete ? nl - pos : std::string::npos);
    pos = complete ? nl + 1 : content.size();
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json rec;
    try {
      rec = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      if (!complete) {
        out.warnings.push_back("line " + std::to_string(line_no) +
                               ": truncated trailing record ignored");
        break;
      }
      throw ParseError("log line " + std::to_string(line_no) + " is not a valid record");
    }
    if (!out.header && out.stream.empty() && rec.contains("header")) {
      out.header = LogHeader::from_json(rec);
      out.stream = EventStream(out.header->session_id);
      continue;
    }
    try {
      BehaviorEvent ev;
      ev.seq = rec.at("seq").get<std::int64_t>();
      ev.session_id = rec.at("session_id").get<std::string>();
      ev.t_ms = rec.at("t_ms").get<std::int64_t>();
      ev.kind = parse_event_kind(rec.at("kind").get<std::string>());
      ev.payload = rec.at("payload");
      out.stream.append_loaded(std::move(ev));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("log line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError("log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

LoadedLog load_log_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open log file '" + path.string() + "'");
  return load_log(in);
}

void write_log(std::ostream& out, const LogHeader& header, const EventStream& stream) {
  out << header.to_json().dump() << '\n';
  for (const auto& ev : stream.events()) out << to_line(ev) << '\n';
}

void replay(const EventStream& stream, std::span<EventConsumer* const> consumers) {
  for (const auto& ev : stream.events()) {
    for (auto* c : consumers) c->consume(ev);
  }
}

}  // namespace feedlens
