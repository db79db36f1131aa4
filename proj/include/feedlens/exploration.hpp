#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace feedlens {

class Corpus;

enum class DirectionMode { increase, decrease, surprise };

std::string_view to_string(DirectionMode mode);
DirectionMode parse_direction_mode(std::string_view text);

// Where the user wants the feed to move. For decrease, a refinement of the
// form "fill:<category>" names the category that should take the freed slots;
// for increase, the refinement is a subtopic keyword.
struct Direction {
  DirectionMode mode = DirectionMode::surprise;
  std::vector<std::string> target_categories;
  std::optional<std::string> refinement;

  static Direction increase(std::string category, std::optional<std::string> refinement = {});
  static Direction decrease(std::string category, std::optional<std::string> refinement = {});
  static Direction surprise();

  // Throws ValidationError on a malformed direction or unknown category.
  void validate(const Corpus& corpus) const;
  void validate_shape() const;

  bool operator==(const Direction&) const = default;
};

enum class OptionKind { pursue_signal, reduce_dominant, surprise, custom };

std::string_view to_string(OptionKind kind);
OptionKind parse_option_kind(std::string_view text);

struct ExplorationOption {
  std::string option_id;
  std::string label;
  Direction direction;
  OptionKind kind = OptionKind::custom;

  bool operator==(const ExplorationOption&) const = default;
};

nlohmann::ordered_json to_json(const Direction& d);
Direction direction_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const ExplorationOption& o);
ExplorationOption option_from_json(const nlohmann::ordered_json& j);

// Readable phrase such as "more travel" used in labels and confirmations.
std::string describe(const Direction& d, const Corpus* corpus = nullptr);

}  // namespace feedlens
