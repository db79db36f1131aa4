#include "feedlens/provider.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "feedlens/catalog.hpp"
#include "feedlens/error.hpp"

namespace feedlens {

using nlohmann::ordered_json;

std::string_view to_string(RequestKind kind) {
  switch (kind) {
    case RequestKind::insight_text: return "insight_text";
    case RequestKind::option_set: return "option_set";
    case RequestKind::narrowing_set: return "narrowing_set";
    case RequestKind::map_free_text: return "map_free_text";
    case RequestKind::confirmation_text: return "confirmation_text";
  }
  return "insight_text";
}

std::string_view to_string(ProviderTag tag) {
  return tag == ProviderTag::remote ? "remote" : "template";
}

void ProviderRequest::validate() const {
  const bool ok = [&] {
    switch (kind) {
      case RequestKind::insight_text:
      case RequestKind::option_set: return std::holds_alternative<InsightPayload>(payload);
      case RequestKind::narrowing_set: return std::holds_alternative<NarrowingPayload>(payload);
      case RequestKind::map_free_text: return std::holds_alternative<FreeTextPayload>(payload);
      case RequestKind::confirmation_text:
        return std::holds_alternative<ConfirmationPayload>(payload);
    }
    return false;
  }();
  if (!ok) {
    throw ValidationError("payload does not match request kind " + std::string(to_string(kind)));
  }
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Lowercase, punctuation to spaces, single-space separated, padded with a
// space on each side so whole-word lookups are plain substring searches.
std::string normalize(std::string_view text) {
  std::string out = " ";
  bool space = true;
  for (const unsigned char c : text) {
    if (std::isalnum(c) || c == '\'') {
      out.push_back(static_cast<char>(std::tolower(c)));
      space = false;
    } else if (!space) {
      out.push_back(' ');
      space = true;
    }
  }
  if (!space) out.push_back(' ');
  return out;
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i > 0) out += i + 1 == names.size() ? " and " : ", ";
    out += names[i];
  }
  return out;
}

constexpr std::string_view kSurprisePhrases[] = {" surprise ", " something new ",
                                                 " something different ", " completely new ",
                                                 " anything new ", " random "};
constexpr std::string_view kDecreaseCues[] = {" less ",   " fewer ",    " no more ", " stop ",
                                              " reduce ", " tired of ", " enough ",  " not into ",
                                              " fed up ", " cut "};

}  // namespace

TemplateProvider::TemplateProvider(std::vector<Category> categories)
    : categories_(std::move(categories)) {}

std::string TemplateProvider::name_of(const std::string& category) const {
  for (const auto& c : categories_) {
    if (c.id == category) return lower(c.display_name);
  }
  std::string out = category;
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

std::string TemplateProvider::insight_text(const InsightReport& report) const {
  std::ostringstream out;
  double combined = 0.0;
  std::vector<std::string> names;
  for (const auto& d : report.dominant) {
    combined += d.share;
    names.push_back(name_of(d.category));
  }
  out << "Your feed is about " << std::lround(combined * 100.0) << "% " << join_names(names) << '.';
  if (!report.signals.empty()) {
    out << " You tend to pause on " << name_of(report.signals.front().category) << " posts.";
  }
  return out.str();
}

std::vector<ExplorationOption> TemplateProvider::option_set(const InsightReport& report) const {
  std::vector<ExplorationOption> opts;
  auto pursue = [&](const std::string& c) {
    opts.push_back({"pursue:" + c, "Yes, show me more " + name_of(c) + " content",
                    Direction::increase(c), OptionKind::pursue_signal});
  };
  auto reduce = [&](const std::string& c) {
    opts.push_back({"reduce:" + c, "Less " + name_of(c) + ", it's getting repetitive",
                    Direction::decrease(c), OptionKind::reduce_dominant});
  };
  const auto& sig = report.signals;
  const auto& dom = report.dominant;
  if (!sig.empty()) pursue(sig[0].category);
  if (!dom.empty()) reduce(dom[0].category);
  if (sig.size() >= 2) {
    pursue(sig[1].category);
  } else if (sig.empty() && dom.size() >= 2) {
    reduce(dom[1].category);
  }
  if (opts.size() < 2) {
    // Too little structure in the report: offer concrete new categories.
    auto is_dominant = [&](const std::string& c) {
      return std::any_of(dom.begin(), dom.end(), [&](const CategoryShare& d) { return d.category == c; });
    };
    std::vector<std::string> pool = report.underrepresented;
    for (const auto& c : categories_) pool.push_back(c.id);
    for (const auto& c : pool) {
      if (opts.size() >= 2) break;
      const bool taken = std::any_of(opts.begin(), opts.end(),
                                     [&](const ExplorationOption& o) { return o.option_id == "custom:" + c; });
      if (!is_dominant(c) && !taken) {
        opts.push_back({"custom:" + c, "Show me some " + name_of(c), Direction::increase(c),
                        OptionKind::custom});
      }
    }
  }
  opts.push_back({"surprise", "Surprise me with something completely new", Direction::surprise(),
                  OptionKind::surprise});
  return opts;
}

std::vector<ExplorationOption> TemplateProvider::narrowing_set(const NarrowingPayload& p) const {
  std::vector<ExplorationOption> opts;
  const auto& dir = p.direction;
  if (dir.mode == DirectionMode::increase && dir.target_categories.size() == 1) {
    const auto& c = dir.target_categories.front();
    const auto* profile = find_profile(c);
    if (profile == nullptr) return opts;
    for (const auto& sub : profile->subtopics) {
      opts.push_back({"refine:" + sub.token, sub.label, Direction::increase(c, sub.token),
                      OptionKind::custom});
    }
    opts.push_back({"refine:any", "A bit of everything", Direction::increase(c), OptionKind::custom});
  } else if (dir.mode == DirectionMode::decrease && dir.target_categories.size() == 1) {
    const auto& c = dir.target_categories.front();
    std::vector<std::string> fills;
    auto add = [&](const std::string& f) {
      if (f != c && fills.size() < 3 && std::find(fills.begin(), fills.end(), f) == fills.end()) {
        fills.push_back(f);
      }
    };
    if (p.report) {
      for (const auto& s : p.report->signals) add(s.category);
      for (const auto& u : p.report->underrepresented) add(u);
    } else {
      for (const auto& cat : categories_) add(cat.id);
    }
    for (const auto& f : fills) {
      opts.push_back({"fill:" + f, "Replace it with " + name_of(f),
                      Direction::decrease(c, "fill:" + f), OptionKind::custom});
    }
    opts.push_back({"fill:any", "Anything different", Direction::decrease(c), OptionKind::custom});
    if (opts.size() < 2) opts.clear();
  }
  return opts;
}

std::optional<Direction> TemplateProvider::map_free_text(std::string_view text) const {
  const std::string norm = normalize(text);
  struct Mention {
    std::size_t pos;
    std::string category;
  };
  std::vector<Mention> mentions;
  for (const auto& cat : categories_) {
    std::set<std::string> words{lower(cat.display_name), lower(cat.id)};
    std::string spaced = lower(cat.id);
    std::replace(spaced.begin(), spaced.end(), '_', ' ');
    words.insert(spaced);
    if (const auto* profile = find_profile(cat.id)) {
      for (const auto& s : profile->synonyms) words.insert(lower(s));
    }
    std::optional<std::size_t> first;
    for (const auto& w : words) {
      const auto pos = norm.find(" " + w + " ");
      if (pos != std::string::npos && (!first || pos < *first)) first = pos;
    }
    if (first) mentions.push_back({*first, cat.id});
  }
  std::sort(mentions.begin(), mentions.end(),
            [](const Mention& a, const Mention& b) { return a.pos < b.pos; });

  if (mentions.empty()) {
    for (const auto phrase : kSurprisePhrases) {
      if (norm.find(phrase) != std::string::npos) return Direction::surprise();
    }
    return std::nullopt;
  }

  // A category is decreased when a decrease cue sits between the previous
  // mention (or the start) and this one.
  std::vector<std::string> more;
  std::vector<std::string> less;
  std::size_t clause_start = 0;
  for (const auto& m : mentions) {
    const std::string clause = norm.substr(clause_start, m.pos - clause_start + 1);
    const bool decrease = std::any_of(std::begin(kDecreaseCues), std::end(kDecreaseCues),
                                      [&](std::string_view cue) {
                                        return clause.find(cue) != std::string::npos;
                                      });
    (decrease ? less : more).push_back(m.category);
    clause_start = m.pos + 1;
  }
  if (!more.empty()) return Direction{DirectionMode::increase, more, std::nullopt};
  return Direction{DirectionMode::decrease, less, std::nullopt};
}

ProviderResponse TemplateProvider::generate(const ProviderRequest& request) {
  request.validate();
  ProviderResponse r;
  r.provider_tag = ProviderTag::template_provider;
  switch (request.kind) {
    case RequestKind::insight_text:
      r.text = insight_text(std::get<InsightPayload>(request.payload).report);
      break;
    case RequestKind::option_set:
      r.options = option_set(std::get<InsightPayload>(request.payload).report);
      break;
    case RequestKind::narrowing_set: {
      const auto& p = std::get<NarrowingPayload>(request.payload);
      r.options = narrowing_set(p);
      if (!r.options->empty()) {
        r.text = p.direction.mode == DirectionMode::increase
                     ? "For " + name_of(p.direction.target_categories.front()) +
                           ", are you more into:"
                     : "What should take its place?";
      }
      break;
    }
    case RequestKind::map_free_text: {
      const auto& p = std::get<FreeTextPayload>(request.payload);
      r.direction = map_free_text(p.text);
      if (r.direction) {
        r.text = "Got it: " + describe(*r.direction) + ".";
        if (r.direction->mode != DirectionMode::surprise) {
          std::vector<std::string> names;
          for (const auto& c : r.direction->target_categories) names.push_back(name_of(c));
          r.text = "Got it: " + std::string(r.direction->mode == DirectionMode::increase ? "more "
                                                                                         : "less ") +
                   join_names(names) + ".";
        }
      } else {
        r.text =
            "Happy to help. Is there a topic you'd like to see more or less of, or should I "
            "surprise you with something new?";
      }
      break;
    }
    case RequestKind::confirmation_text: {
      const auto& d = std::get<ConfirmationPayload>(request.payload).direction;
      std::vector<std::string> names;
      for (const auto& c : d.target_categories) names.push_back(name_of(c));
      switch (d.mode) {
        case DirectionMode::increase:
          r.text = "I've started mixing in " + join_names(names) + " content.";
          break;
        case DirectionMode::decrease:
          r.text = "I'm easing off " + join_names(names) + " content.";
          break;
        case DirectionMode::surprise:
          r.text = "I've started mixing in something completely new.";
          break;
      }
      r.text += " Keep scrolling, and let me know if you want to adjust.";
      break;
    }
  }
  return r;
}

ProviderResponse validate_structured(std::string_view raw, RequestKind kind,
                                     const std::vector<Category>& categories) {
  ordered_json j;
  try {
    j = ordered_json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    throw ValidationError("remote output is not valid JSON");
  }
  if (!j.is_object()) throw ValidationError("remote output must be an object");

  std::set<std::string> known;
  for (const auto& c : categories) known.insert(c.id);
  auto check_direction = [&](const Direction& d) {
    for (const auto& c : d.target_categories) {
      if (!known.contains(c)) throw ValidationError("remote output uses unknown category '" + c + "'");
    }
    if (d.refinement && d.refinement->starts_with("fill:") && !known.contains(d.refinement->substr(5))) {
      throw ValidationError("remote output uses unknown category in refinement");
    }
  };

  ProviderResponse r;
  r.provider_tag = ProviderTag::remote;
  if (const auto t = j.find("text"); t != j.end() && !t->is_null()) {
    if (!t->is_string()) throw ValidationError("remote output: text must be a string");
    r.text = t->get<std::string>();
  }
  if (const auto o = j.find("options"); o != j.end() && !o->is_null()) {
    if (!o->is_array()) throw ValidationError("remote output: options must be an array");
    std::vector<ExplorationOption> opts;
    std::set<std::string> ids;
    for (const auto& item : *o) {
      auto opt = option_from_json(item);
      if (opt.label.empty()) throw ValidationError("remote output: option with empty label");
      if (opt.option_id.empty() || !ids.insert(opt.option_id).second) {
        throw ValidationError("remote output: option ids must be unique and non-empty");
      }
      check_direction(opt.direction);
      opts.push_back(std::move(opt));
    }
    r.options = std::move(opts);
  }
  if (const auto d = j.find("direction"); d != j.end() && !d->is_null()) {
    r.direction = direction_from_json(*d);
    check_direction(*r.direction);
  }

  const auto n_opts = r.options ? r.options->size() : 0;
  switch (kind) {
    case RequestKind::option_set:
      if (n_opts < 3 || n_opts > 4) {
        throw ValidationError("option set must carry 3-4 options, got " + std::to_string(n_opts));
      }
      break;
    case RequestKind::narrowing_set:
      if (n_opts != 0 && (n_opts < 2 || n_opts > 4)) {
        throw ValidationError("narrowing set must carry 2-4 options, got " + std::to_string(n_opts));
      }
      break;
    case RequestKind::map_free_text:
      if (!r.direction && r.text.empty()) {
        throw ValidationError("free-text mapping needs a direction or a clarifying question");
      }
      break;
    case RequestKind::insight_text:
    case RequestKind::confirmation_text:
      if (r.text.empty()) throw ValidationError("remote output: empty text");
      break;
  }
  return r;
}

ordered_json request_to_json(const ProviderRequest& request) {
  ordered_json j;
  j["kind"] = to_string(request.kind);
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, InsightPayload>) {
          j["report"] = to_json(p.report);
        } else if constexpr (std::is_same_v<T, NarrowingPayload>) {
          j["direction"] = to_json(p.direction);
          if (p.report) j["report"] = to_json(*p.report);
        } else if constexpr (std::is_same_v<T, FreeTextPayload>) {
          j["text"] = p.text;
        } else {
          j["direction"] = to_json(p.direction);
        }
      },
      request.payload);
  return j;
}

namespace {

constexpr const char* kSystemPrompt =
    "You help a user explore beyond their recommendation feed. Reply with one JSON object only: "
    "{\"text\": string, \"options\": [{\"option_id\": string, \"label\": string, \"kind\": "
    "\"pursue_signal\"|\"reduce_dominant\"|\"surprise\"|\"custom\", \"direction\": {\"mode\": "
    "\"increase\"|\"decrease\"|\"surprise\", \"target_categories\": [string], \"refinement\": "
    "string|null}}] | null, \"direction\": {...} | null}. insight_text: describe the feed "
    "composition and any latent signal. option_set: 3 or 4 options, at least one reducing a "
    "dominant category and exactly one surprise. narrowing_set: one clarifying question with 2 to "
    "4 options. map_free_text: a direction, or a clarifying question in text. confirmation_text: "
    "a short confirmation. Use only the category ids given.";

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

ParsedUrl parse_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("REMOTE_BASE_URL must include a scheme: '" + url + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.scheme_host_port = url.substr(0, path_start);
  out.path_prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

}  // namespace

RemoteProvider::RemoteProvider(RemoteConfig config, std::vector<Category> categories)
    : config_(std::move(config)), categories_(categories), fallback_(std::move(categories)) {
  parse_base_url(config_.base_url);
}

std::string RemoteProvider::call(const ProviderRequest& request,
                                 std::chrono::milliseconds budget) const {
  const auto url = parse_base_url(config_.base_url);
  httplib::Client client(url.scheme_host_port);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(budget);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(budget - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  if (!config_.api_key.empty()) client.set_bearer_token_auth(config_.api_key);

  ordered_json context = request_to_json(request);
  ordered_json cats = ordered_json::array();
  for (const auto& c : categories_) cats.push_back({{"id", c.id}, {"display_name", c.display_name}});
  context["categories"] = std::move(cats);

  ordered_json body;
  body["model"] = config_.model;
  body["messages"] = ordered_json::array(
      {{{"role", "system"}, {"content", kSystemPrompt}}, {{"role", "user"}, {"content", context.dump()}}});
  body["response_format"] = {{"type", "json_object"}};

  const auto res = client.Post(url.path_prefix + "/chat/completions", body.dump(), "application/json");
  if (!res) {
    throw IoError("remote request failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw IoError("remote returned HTTP " + std::to_string(res->status));
  }
  try {
    const auto reply = ordered_json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("remote reply is not a chat completion");
  }
}

ProviderResponse RemoteProvider::generate(const ProviderRequest& request) {
  request.validate();
  std::lock_guard lock(in_flight_);
  const auto deadline = std::chrono::steady_clock::now() + config_.timeout;
  std::string reason = "remote budget exhausted";
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      reason = "remote latency budget exceeded";
      break;
    }
    try {
      return validate_structured(call(request, left), request.kind, categories_);
    } catch (const Error& e) {
      reason = e.what();
    }
  }
  ProviderResponse r = fallback_.generate(request);
  r.fallback_reason = reason;
  return r;
}

std::unique_ptr<AssistantProvider> make_provider_from_env(const std::vector<Category>& categories) {
  auto env = [](const char* name) -> std::string {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
  };
  const std::string mode = env("PROVIDER_MODE");
  if (mode.empty() || mode == "template") return std::make_unique<TemplateProvider>(categories);
  if (mode != "remote") throw ValidationError("PROVIDER_MODE must be 'template' or 'remote'");
  RemoteConfig cfg;
  cfg.base_url = env("REMOTE_BASE_URL");
  if (cfg.base_url.empty()) throw ValidationError("PROVIDER_MODE=remote needs REMOTE_BASE_URL");
  cfg.model = env("REMOTE_MODEL");
  cfg.api_key = env("REMOTE_API_KEY");
  if (const auto t = env("REMOTE_TIMEOUT_MS"); !t.empty()) {
    try {
      cfg.timeout = std::chrono::milliseconds(std::stoll(t));
    } catch (const std::exception&) {
      throw ValidationError("REMOTE_TIMEOUT_MS must be an integer");
    }
  }
  return std::make_unique<RemoteProvider>(std::move(cfg), categories);
}

}  // namespace feedlens
