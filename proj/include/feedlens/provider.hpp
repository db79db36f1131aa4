#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "feedlens/analyzer.hpp"
#include "feedlens/corpus.hpp"
#include "feedlens/exploration.hpp"

namespace feedlens {

enum class RequestKind { insight_text, option_set, narrowing_set, map_free_text, confirmation_text };

std::string_view to_string(RequestKind kind);

struct InsightPayload {
  InsightReport report;
};

struct NarrowingPayload {
  Direction direction;
  std::optional<InsightReport> report;
};

struct FreeTextPayload {
  std::string text;
};

struct ConfirmationPayload {
  Direction direction;
};

using RequestPayload =
    std::variant<InsightPayload, NarrowingPayload, FreeTextPayload, ConfirmationPayload>;

struct ProviderRequest {
  RequestKind kind = RequestKind::insight_text;
  RequestPayload payload;

  // Throws ValidationError when the payload does not match the kind.
  void validate() const;
};

enum class ProviderTag { template_provider, remote };

std::string_view to_string(ProviderTag tag);

struct ProviderResponse {
  std::string text;
  std::optional<std::vector<ExplorationOption>> options;
  std::optional<Direction> direction;
  ProviderTag provider_tag = ProviderTag::template_provider;
  // Set when a remote request failed and the template answered instead.
  std::optional<std::string> fallback_reason;
};

// Providers only propose text, options, and directions; they never touch
// feed or dialogue state.
class AssistantProvider {
 public:
  virtual ~AssistantProvider() = default;
  virtual ProviderResponse generate(const ProviderRequest& request) = 0;
};

// Deterministic provider: fixed phrasing with values interpolated from the
// request. Pure function of (categories, request).
class TemplateProvider final : public AssistantProvider {
 public:
  explicit TemplateProvider(std::vector<Category> categories);

  ProviderResponse generate(const ProviderRequest& request) override;

  // Keyword mapping used for free text. Returns nullopt when the text names
  // no category and no surprise phrase.
  std::optional<Direction> map_free_text(std::string_view text) const;

 private:
  std::string name_of(const std::string& category) const;
  std::vector<ExplorationOption> option_set(const InsightReport& report) const;
  std::vector<ExplorationOption> narrowing_set(const NarrowingPayload& payload) const;
  std::string insight_text(const InsightReport& report) const;

  std::vector<Category> categories_;
};

// Checks remote structured output against the response schema for `kind`:
// 3-4 options for option sets, 2-4 for narrowing sets, known categories,
// non-empty labels, unique option ids.
ProviderResponse validate_structured(std::string_view raw, RequestKind kind,
                                     const std::vector<Category>& categories);

struct RemoteConfig {
  std::string base_url;
  std::string model;
  std::string api_key;
  std::chrono::milliseconds timeout{5000};
  int retries = 1;
};

// Chat-completion client with schema validation. On transport failure,
// timeout, or schema violation it retries once and then answers with the
// template provider, tagging the response with the fallback reason.
class RemoteProvider final : public AssistantProvider {
 public:
  RemoteProvider(RemoteConfig config, std::vector<Category> categories);

  ProviderResponse generate(const ProviderRequest& request) override;

  const RemoteConfig& config() const { return config_; }

 private:
  std::string call(const ProviderRequest& request, std::chrono::milliseconds budget) const;

  RemoteConfig config_;
  std::vector<Category> categories_;
  TemplateProvider fallback_;
  // One in-flight request per provider instance (one instance per session).
  std::mutex in_flight_;
};

// Reads PROVIDER_MODE, REMOTE_BASE_URL, REMOTE_MODEL, REMOTE_API_KEY,
// REMOTE_TIMEOUT_MS.
std::unique_ptr<AssistantProvider> make_provider_from_env(const std::vector<Category>& categories);

// Serialized request context sent to the remote model.
nlohmann::ordered_json request_to_json(const ProviderRequest& request);

}  // namespace feedlens
