#include "feedlens/exploration.hpp"

#include <algorithm>
#include <cctype>

#include "feedlens/corpus.hpp"
#include "feedlens/error.hpp"

namespace feedlens {

using nlohmann::ordered_json;

std::string_view to_string(DirectionMode mode) {
  switch (mode) {
    case DirectionMode::increase: return "increase";
    case DirectionMode::decrease: return "decrease";
    case DirectionMode::surprise: return "surprise";
  }
  return "surprise";
}

DirectionMode parse_direction_mode(std::string_view text) {
  if (text == "increase") return DirectionMode::increase;
  if (text == "decrease") return DirectionMode::decrease;
  if (text == "surprise") return DirectionMode::surprise;
  throw ValidationError("unknown direction mode '" + std::string(text) + "'");
}

Direction Direction::increase(std::string category, std::optional<std::string> refinement) {
  return Direction{DirectionMode::increase, {std::move(category)}, std::move(refinement)};
}

Direction Direction::decrease(std::string category, std::optional<std::string> refinement) {
  return Direction{DirectionMode::decrease, {std::move(category)}, std::move(refinement)};
}

Direction Direction::surprise() { return Direction{DirectionMode::surprise, {}, std::nullopt}; }

void Direction::validate_shape() const {
  if (mode == DirectionMode::surprise) {
    if (!target_categories.empty()) {
      throw ValidationError("a surprise direction takes no target categories");
    }
  } else if (target_categories.empty()) {
    throw ValidationError(std::string(to_string(mode)) + " direction needs a target category");
  }
}

void Direction::validate(const Corpus& corpus) const {
  validate_shape();
  for (const auto& c : target_categories) {
    if (!corpus.has_category(c)) {
      throw ValidationError("direction references unknown category '" + c + "'");
    }
  }
  if (mode == DirectionMode::decrease && refinement && refinement->starts_with("fill:")) {
    const auto fill = refinement->substr(5);
    if (!corpus.has_category(fill)) {
      throw ValidationError("direction refinement references unknown category '" + fill + "'");
    }
  }
}

std::string_view to_string(OptionKind kind) {
  switch (kind) {
    case OptionKind::pursue_signal: return "pursue_signal";
    case OptionKind::reduce_dominant: return "reduce_dominant";
    case OptionKind::surprise: return "surprise";
    case OptionKind::custom: return "custom";
  }
  return "custom";
}

OptionKind parse_option_kind(std::string_view text) {
  if (text == "pursue_signal") return OptionKind::pursue_signal;
  if (text == "reduce_dominant") return OptionKind::reduce_dominant;
  if (text == "surprise") return OptionKind::surprise;
  if (text == "custom") return OptionKind::custom;
  throw ValidationError("unknown option kind '" + std::string(text) + "'");
}

ordered_json to_json(const Direction& d) {
  ordered_json j;
  j["mode"] = to_string(d.mode);
  j["target_categories"] = d.target_categories;
  j["refinement"] = d.refinement ? ordered_json(*d.refinement) : ordered_json(nullptr);
  return j;
}

Direction direction_from_json(const ordered_json& j) {
  if (!j.is_object()) throw ValidationError("direction must be an object");
  Direction d;
  const auto mode = j.find("mode");
  if (mode == j.end() || !mode->is_string()) throw ValidationError("direction.mode missing");
  d.mode = parse_direction_mode(mode->get<std::string>());
  if (const auto t = j.find("target_categories"); t != j.end()) {
    if (!t->is_array()) throw ValidationError("direction.target_categories must be an array");
    for (const auto& c : *t) {
      if (!c.is_string()) throw ValidationError("direction.target_categories holds a non-string");
      d.target_categories.push_back(c.get<std::string>());
    }
  }
  if (const auto r = j.find("refinement"); r != j.end() && !r->is_null()) {
    if (!r->is_string()) throw ValidationError("direction.refinement must be a string");
    d.refinement = r->get<std::string>();
  }
  d.validate_shape();
  return d;
}

ordered_json to_json(const ExplorationOption& o) {
  ordered_json j;
  j["option_id"] = o.option_id;
  j["label"] = o.label;
  j["kind"] = to_string(o.kind);
  j["direction"] = to_json(o.direction);
  return j;
}

ExplorationOption option_from_json(const ordered_json& j) {
  if (!j.is_object()) throw ValidationError("option must be an object");
  auto str = [&](const char* field) {
    const auto it = j.find(field);
    if (it == j.end() || !it->is_string()) {
      throw ValidationError(std::string("option.") + field + " missing");
    }
    return it->get<std::string>();
  };
  ExplorationOption o;
  o.option_id = str("option_id");
  o.label = str("label");
  o.kind = parse_option_kind(str("kind"));
  const auto dir = j.find("direction");
  if (dir == j.end()) throw ValidationError("option.direction missing");
  o.direction = direction_from_json(*dir);
  return o;
}

std::string describe(const Direction& d, const Corpus* corpus) {
  auto name = [&](const std::string& id) {
    std::string out = corpus && corpus->has_category(id) ? corpus->category(id).display_name : id;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::replace(out.begin(), out.end(), '_', ' ');
    return out;
  };
  std::string joined;
  for (std::size_t i = 0; i < d.target_categories.size(); ++i) {
    if (i > 0) joined += i + 1 == d.target_categories.size() ? " and " : ", ";
    joined += name(d.target_categories[i]);
  }
  switch (d.mode) {
    case DirectionMode::increase: return "more " + joined;
    case DirectionMode::decrease: return "less " + joined;
    case DirectionMode::surprise: return "something completely new";
  }
  return joined;
}

}  // namespace feedlens
