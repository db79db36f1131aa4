#include "feedlens/service.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <ctime>
#include <deque>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "feedlens/error.hpp"
#include "feedlens/metrics.hpp"

namespace feedlens {

using nlohmann::ordered_json;

namespace {

constexpr std::size_t kOutboxLimit = 256;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::validation: return 400;
    case ErrorCode::parse: return 400;
    case ErrorCode::state: return 409;
    case ErrorCode::monotonicity: return 409;
    case ErrorCode::not_found: return 404;
    case ErrorCode::capability: return 403;
    case ErrorCode::capacity: return 507;
    case ErrorCode::empty_window: return 422;
    case ErrorCode::io: return 500;
  }
  return 500;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

ordered_json item_json(const FeedEntry& e, std::size_t index) {
  return {{"index", index},
          {"item_id", e.item.item_id},
          {"title", e.item.title},
          {"cover_ref", e.item.cover_ref},
          {"author", e.item.author},
          {"engagement_count", e.item.engagement_count},
          {"category", e.item.category},
          {"origin", to_string(e.origin)}};
}

ordered_json capabilities_json(Condition c) {
  const auto caps = capabilities_of(c);
  return {{"search", caps.search},
          {"chat", caps.chat},
          {"options", caps.options},
          {"ai_trigger", caps.ai_trigger}};
}

struct Entry {
  std::mutex mutex;
  std::unique_ptr<LiveSession> session;
  std::shared_ptr<LogWriter> writer;
  std::chrono::steady_clock::time_point started;
  std::string created;
  std::deque<Notification> outbox;
  std::condition_variable cv;
  bool closed = false;
  std::uint64_t subscriber = 0;
};

ordered_json notification_json(const Notification& n) { return {{"type", n.type}, {"body", n.body}}; }

}  // namespace

struct Service::Impl {
  const Corpus& corpus;
  ServiceOptions options;
  httplib::Server server;
  std::mutex registry_mutex;
  std::map<std::string, std::shared_ptr<Entry>> sessions;
  std::atomic<bool> stopping{false};

  Impl(const Corpus& c, ServiceOptions o) : corpus(c), options(std::move(o)) { routes(); }

  std::shared_ptr<Entry> find(const std::string& id) {
    std::lock_guard lock(registry_mutex);
    const auto it = sessions.find(id);
    if (it == sessions.end()) throw NotFoundError("no session '" + id + "'");
    return it->second;
  }

  static ordered_json body_of(const httplib::Request& req) {
    if (req.body.empty()) return ordered_json::object();
    try {
      auto j = ordered_json::parse(req.body);
      if (!j.is_object()) throw ValidationError("request body must be an object");
      return j;
    } catch (const nlohmann::json::parse_error&) {
      throw ValidationError("request body is not valid JSON");
    }
  }

  template <typename T>
  static T field(const ordered_json& body, const char* key) {
    const auto it = body.find(key);
    if (it == body.end()) throw ValidationError(std::string("missing field '") + key + "'");
    try {
      return it->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(std::string("field '") + key + "' has the wrong type");
    }
  }

  static std::int64_t clock_of(Entry& e, const ordered_json& body) {
    if (const auto it = body.find("t_ms"); it != body.end()) {
      if (!it->is_number_integer()) throw ValidationError("t_ms must be an integer");
      return it->get<std::int64_t>();
    }
    const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - e.started)
                         .count();
    return std::max<std::int64_t>(now, e.session->log().last_t_ms());
  }

  static void flush_notifications(Entry& e) {
    for (auto& n : e.session->drain_notifications()) {
      if (e.outbox.size() >= kOutboxLimit) e.outbox.pop_front();
      e.outbox.push_back(std::move(n));
    }
    e.cv.notify_all();
  }

  static void reply(httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void fail(httplib::Response& res, ErrorCode code, const std::string& message) {
    reply(res, http_status(code), {{"error", {{"code", to_string(code)}, {"message", message}}}});
  }

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  static Handler guarded(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const Error& e) {
        fail(res, e.code(), e.what());
      } catch (const std::exception& e) {
        fail(res, ErrorCode::io, e.what());
      }
    };
  }

  // Runs `action` on the session under its lock, then pushes notifications.
  Handler on_session(std::function<ordered_json(Entry&, const ordered_json&)> action, int status = 200) {
    return guarded([this, action = std::move(action), status](const httplib::Request& req,
                                                             httplib::Response& res) {
      auto entry = find(req.matches[1]);
      const auto body = body_of(req);
      std::unique_lock lock(entry->mutex);
      if (entry->closed) throw NotFoundError("session '" + std::string(req.matches[1]) + "' is closed");
      auto out = action(*entry, body);
      flush_notifications(*entry);
      lock.unlock();
      reply(res, status, out);
    });
  }

  ordered_json handle_json(Entry& e) const {
    const auto& s = *e.session;
    return {{"session_id", s.header().session_id},
            {"condition", s.header().condition},
            {"created", e.created},
            {"phase", s.phase() ? ordered_json(*s.phase()) : ordered_json(nullptr)},
            {"capabilities", capabilities_json(s.condition())}};
  }

  static ordered_json page_json(const LiveSession& s, std::size_t offset, std::size_t limit) {
    const auto& items = s.feed().items;
    ordered_json list = ordered_json::array();
    for (std::size_t i = offset; i < items.size() && i < offset + limit; ++i) {
      list.push_back(item_json(items[i], i));
    }
    return {{"items", list},
            {"offset", offset},
            {"total", items.size()},
            {"cursor", s.feed().cursor},
            {"refresh_count", s.feed().refresh_count}};
  }

  std::unique_ptr<AssistantProvider> provider() const {
    if (options.use_env_provider) return make_provider_from_env(corpus.categories());
    if (options.provider_mode == "remote") {
      return std::make_unique<RemoteProvider>(options.remote, corpus.categories());
    }
    return std::make_unique<TemplateProvider>(corpus.categories());
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    const auto body = body_of(req);
    SessionSetup setup;
    if (body.contains("participant_id")) {
      const auto pid = field<std::string>(body, "participant_id");
      const auto pos = field<std::size_t>(body, "position");
      const auto it = std::find_if(options.plans.begin(), options.plans.end(),
                                   [&](const SessionPlan& p) { return p.participant_id == pid; });
      if (it == options.plans.end()) throw NotFoundError("no plan for participant '" + pid + "'");
      if (pos > 2) throw ValidationError("position must be 0, 1, or 2");
      HarnessConfig hc;
      hc.session = options.config;
      setup = make_setup(*it, pos, hc);
    } else {
      setup.condition = parse_condition(field<std::string>(body, "condition"));
      const auto feed = body.find("feed");
      if (feed == body.end()) throw ValidationError("missing field 'feed'");
      if (feed->is_string()) {
        const auto name = feed->get<std::string>();
        if (name.size() != 1) throw ValidationError("feed preset must be A, B, or C");
        setup.feed_spec = feed_preset(name[0]);
      } else {
        setup.feed_spec = feed_spec_from_json(*feed);
      }
      setup.seed = body.contains("seed") ? field<std::uint64_t>(body, "seed")
                                         : static_cast<std::uint64_t>(std::chrono::steady_clock::now()
                                                                          .time_since_epoch()
                                                                          .count());
      setup.session_id = body.contains("session_id") ? field<std::string>(body, "session_id")
                                                     : "s" + std::to_string(setup.seed % 1000000007ULL);
      setup.config = options.config;
    }
    setup.wall_clock_start = options.wall_clock_start.empty() ? utc_now() : options.wall_clock_start;
    for (const char c : setup.session_id) {
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') {
        throw ValidationError("session_id may only contain letters, digits, '-' and '_'");
      }
    }

    std::lock_guard lock(registry_mutex);
    if (sessions.contains(setup.session_id)) {
      throw StateError("session '" + setup.session_id + "' already exists");
    }
    std::size_t live = 0;
    for (const auto& [id, e] : sessions) live += e->closed ? 0 : 1;
    if (live >= options.max_sessions) {
      throw CapacityError("session limit of " + std::to_string(options.max_sessions) + " reached");
    }
    auto entry = std::make_shared<Entry>();
    entry->session = std::make_unique<LiveSession>(corpus, setup, provider());
    entry->started = std::chrono::steady_clock::now();
    entry->created = setup.wall_clock_start;
    std::filesystem::create_directories(options.log_dir);
    entry->writer = std::make_shared<LogWriter>(options.log_dir / (setup.session_id + ".jsonl"),
                                                entry->session->header());
    entry->session->attach_writer(entry->writer);
    sessions[setup.session_id] = entry;
    reply(res, 201, {{"session", handle_json(*entry)}, {"page", page_json(*entry->session, 0, SIZE_MAX)}});
  }

  void stream(const httplib::Request& req, httplib::Response& res) {
    auto entry = find(req.matches[1]);
    std::uint64_t me = 0;
    {
      std::lock_guard lock(entry->mutex);
      if (entry->closed) throw NotFoundError("session is closed");
      me = ++entry->subscriber;
      entry->cv.notify_all();
    }
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [this, entry, me](std::size_t, httplib::DataSink& sink) {
          std::unique_lock lock(entry->mutex);
          entry->cv.wait_for(lock, std::chrono::milliseconds(500), [&] {
            return !entry->outbox.empty() || entry->closed || entry->subscriber != me || stopping;
          });
          if (entry->closed || entry->subscriber != me || stopping) {
            sink.done();
            return true;
          }
          if (entry->outbox.empty()) {
            lock.unlock();
            const std::string ping = ": keep-alive\n\n";
            return sink.write(ping.data(), ping.size());
          }
          std::string chunk;
          while (!entry->outbox.empty()) {
            const auto& n = entry->outbox.front();
            chunk += "event: " + n.type + "\ndata: " + notification_json(n).dump() + "\n\n";
            entry->outbox.pop_front();
          }
          lock.unlock();
          return sink.write(chunk.data(), chunk.size());
        });
  }

  void routes() {
    auto& s = server;
    s.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
            reply(res, 200, {{"status", "ok"}});
          }));
    s.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
             create(req, res);
           }));
    s.Get(R"(/sessions/([A-Za-z0-9_-]+))",
          on_session([this](Entry& e, const ordered_json&) {
            auto j = handle_json(e);
            j["dialogue"] = to_json(e.session->dialogue());
            j["direction"] = e.session->feed().direction ? to_json(*e.session->feed().direction)
                                                          : ordered_json(nullptr);
            j["event_count"] = e.session->log().size();
            return j;
          }));
    s.Get(R"(/sessions/([A-Za-z0-9_-]+)/page)",
          guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto entry = find(req.matches[1]);
            std::size_t offset = 0;
            std::size_t limit = SIZE_MAX;
            try {
              if (req.has_param("offset")) offset = std::stoul(req.get_param_value("offset"));
              if (req.has_param("limit")) limit = std::stoul(req.get_param_value("limit"));
            } catch (const std::exception&) {
              throw ValidationError("offset and limit must be non-negative integers");
            }
            std::lock_guard lock(entry->mutex);
            if (entry->closed) throw NotFoundError("session is closed");
            reply(res, 200, page_json(*entry->session, offset, limit));
          }));
    s.Post(R"(/sessions/([A-Za-z0-9_-]+)/refresh)",
           on_session([](Entry& e, const ordered_json& b) {
             const auto r = e.session->pull_refresh(clock_of(e, b));
             ordered_json replaced = ordered_json::array();
             for (const auto& x : r.replaced) {
               replaced.push_back({{"index", x.index},
                                   {"old_item_id", x.old_item_id},
                                   {"new_item_id", x.new_item_id},
                                   {"category", x.category}});
             }
             return ordered_json{{"replaced", replaced},
                                 {"fallback", r.fallback},
                                 {"page", page_json(*e.session, 0, SIZE_MAX)}};
           }));
    s.Post(R"(/sessions/([A-Za-z0-9_-]+)/impressions)",
           on_session([](Entry& e, const ordered_json& b) {
             const auto item = field<std::string>(b, "item_id");
             const auto edge = field<std::string>(b, "edge");
             const auto t = clock_of(e, b);
             if (edge == "enter") {
               e.session->impression_enter(item, t);
               return ordered_json{{"item_id", item}, {"edge", edge}, {"t_ms", t}};
             }
             if (edge == "exit") {
               const auto rec = e.session->impression_exit(item, t);
               return ordered_json{{"item_id", item}, {"edge", edge}, {"t_ms", t}, {"dwell_ms", *rec.dwell_ms()}};
             }
             throw ValidationError("edge must be 'enter' or 'exit'");
           }));
    s.Post(R"(/sessions/([A-Za-z0-9_-]+)/scroll)",
           on_session([](Entry& e, const ordered_json& b) {
             const auto pos = field<std::int64_t>(b, "position_px");
             const auto t = clock_of(e, b);
             e.session->scroll(pos, t);
             return ordered_json{{"position_px", pos}, {"t_ms", t}};
           }));
    s.Post(R"(/sessions/([A-Za-z0-9_-]+)/clicks)",
           on_session([](Entry& e, const ordered_json& b) {
             const auto target = field<std::string>(b, "target");
             const auto t = clock_of(e, b);
             e.session->click(target, t);
             return ordered_json{{"target", target}, {"t_ms", t}};
           }));
    s.Get(R"(/sessions/([A-Za-z0-9_-]+)/trigger)",
          on_session([](Entry& e, const ordered_json&) {
            flush_notifications(e);
            ordered_json list = ordered_json::array();
            while (!e.outbox.empty()) {
              list.push_back(notification_json(e.outbox.front()));
              e.outbox.pop_front();
            }
            return ordered_json{{"notifications", list}};
          }));
    s.Get(R"(/sessions/([A-Za-z0-9_-]+)/stream)",
          guarded([this](const httplib::Request& req, httplib::Response& res) { stream(req, res); }));
    s.Get(R"(/sessions/([A-Za-z0-9_-]+)/dialogue)",
          on_session([](Entry& e, const ordered_json&) { return to_json(e.session->dialogue()); }));
    s.Post(R"(/sessions/([A-Za-z0-9_-]+)/dialogue/open)",
           on_session([](Entry& e, const ordered_json& b) {
             e.session->open_chat(field<std::string>(b, "text"), clock_of(e, b));
             return dialogue_reply(e);
           }));
    s.Post(R"(/sessions/([A-Za-z0-9_-]+)/dialogue/option)",
           on_session([](Entry& e, const ordered_json& b) {
             e.session->select_option(field<std::string>(b, "option_id"), clock_of(e, b));
             return dialogue_reply(e);
           }));
    s.Post(R"(/sessions/([A-Za-z0-9_-]+)/dialogue/text)",
           on_session([](Entry& e, const ordered_json& b) {
             e.session->send_text(field<std::string>(b, "text"), clock_of(e, b));
             return dialogue_reply(e);
           }));
    s.Post(R"(/sessions/([A-Za-z0-9_-]+)/dialogue/dismiss)",
           on_session([](Entry& e, const ordered_json& b) {
             e.session->dismiss(clock_of(e, b));
             return dialogue_reply(e);
           }));
    s.Post(R"(/sessions/([A-Za-z0-9_-]+)/search)",
           on_session([](Entry& e, const ordered_json& b) {
             const auto results = e.session->search(field<std::string>(b, "query"), clock_of(e, b));
             ordered_json list = ordered_json::array();
             for (const auto& item : results) {
               list.push_back({{"item_id", item.item_id},
                               {"title", item.title},
                               {"cover_ref", item.cover_ref},
                               {"author", item.author},
                               {"engagement_count", item.engagement_count},
                               {"category", item.category}});
             }
             return ordered_json{{"results", list}, {"page", page_json(*e.session, 0, SIZE_MAX)}};
           }));
    s.Post(R"(/sessions/([A-Za-z0-9_-]+)/phase)",
           on_session([](Entry& e, const ordered_json& b) {
             const auto phase = field<std::string>(b, "phase");
             const auto edge = field<std::string>(b, "edge");
             const auto t = clock_of(e, b);
             if (edge == "start") {
               e.session->begin_phase(phase, t);
             } else if (edge == "end") {
               e.session->end_phase(phase, t);
             } else {
               throw ValidationError("edge must be 'start' or 'end'");
             }
             return ordered_json{{"phase", phase}, {"edge", edge}, {"t_ms", t}};
           }));
    s.Post(R"(/sessions/([A-Za-z0-9_-]+)/survey)",
           on_session([](Entry& e, const ordered_json& b) {
             const auto answers = b.find("answers");
             if (answers == b.end()) throw ValidationError("missing field 'answers'");
             e.session->survey(*answers, clock_of(e, b));
             return ordered_json{{"recorded", answers->size()}};
           }));
    s.Get(R"(/sessions/([A-Za-z0-9_-]+)/metrics)",
          on_session([](Entry& e, const ordered_json&) {
            return to_json(compute_metrics(e.session->header(), e.session->log().view()));
          }));
    s.Delete(R"(/sessions/([A-Za-z0-9_-]+))",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               std::shared_ptr<Entry> entry;
               {
                 std::lock_guard lock(registry_mutex);
                 const auto it = sessions.find(req.matches[1]);
                 if (it == sessions.end() || it->second->closed) {
                   throw NotFoundError("no session '" + std::string(req.matches[1]) + "'");
                 }
                 entry = it->second;
               }
               std::lock_guard lock(entry->mutex);
               entry->closed = true;
               entry->cv.notify_all();
               reply(res, 200, {{"session_id", std::string(req.matches[1])},
                                {"events", entry->session->log().size()},
                                {"closed", true}});
             }));
  }

  static ordered_json dialogue_reply(Entry& e) {
    const auto& log = e.session->log().events();
    ordered_json turns = ordered_json::array();
    // Assistant turns logged by this call, newest last.
    for (auto it = log.rbegin(); it != log.rend(); ++it) {
      if (it->kind == EventKind::dialogue_turn) {
        ordered_json turn = {{"text", it->payload["text"]},
                             {"turn_kind", it->payload["turn_kind"]},
                             {"options", it->payload["options"]}};
        turns.insert(turns.begin(), std::move(turn));
      }
      if (it->kind == EventKind::option_select || it->kind == EventKind::free_text ||
          it->kind == EventKind::dismiss) {
        break;
      }
    }
    return {{"dialogue", to_json(e.session->dialogue())},
            {"assistant", turns},
            {"direction", e.session->feed().direction ? to_json(*e.session->feed().direction)
                                                      : ordered_json(nullptr)}};
  }
};

Service::Service(const Corpus& corpus, ServiceOptions options)
    : impl_(std::make_unique<Impl>(corpus, std::move(options))) {}

Service::~Service() { stop(); }

bool Service::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int Service::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool Service::run() { return impl_->server.listen_after_bind(); }

void Service::stop() {
  impl_->stopping = true;
  {
    std::lock_guard lock(impl_->registry_mutex);
    for (auto& [id, e] : impl_->sessions) e->cv.notify_all();
  }
  impl_->server.stop();
}

bool Service::running() const { return impl_->server.is_running(); }

}  // namespace feedlens
