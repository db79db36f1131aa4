#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace feedlens {

// A narrower interest inside a category. `token` doubles as the refinement
// key carried by a Direction and as the keyword matched against item titles.
struct Subtopic {
  std::string token;
  std::string label;
  std::vector<std::string> title_stems;
};

// Built-in knowledge about the default category set: display names, the
// words people use for them in free text, and refinement subtopics.
struct CategoryProfile {
  std::string id;
  std::string display_name;
  std::vector<std::string> synonyms;
  std::vector<Subtopic> subtopics;
};

const std::vector<CategoryProfile>& category_profiles();

// nullptr when the id is not part of the default set.
const CategoryProfile* find_profile(std::string_view category_id);

}  // namespace feedlens
