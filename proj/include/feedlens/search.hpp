#pragma once

#include <string_view>
#include <vector>

#include "feedlens/corpus.hpp"

namespace feedlens {

// Keyword and category search. A query token equal to a category id, display
// name, or synonym scores 100 for every item of that category; each token
// found as a case-insensitive substring of the title scores 1. Ranked by
// score, then engagement_count, then item_id. Throws ValidationError on a
// blank query; no match yields an empty list.
std::vector<ContentItem> search_corpus(const Corpus& corpus, std::string_view query);

}  // namespace feedlens
