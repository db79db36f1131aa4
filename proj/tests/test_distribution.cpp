#include <doctest.h>

#include <cmath>

#include "feedlens/analyzer.hpp"
#include "feedlens/distribution.hpp"
#include "feedlens/error.hpp"
#include "feedlens/rng.hpp"
#include "support.hpp"

using namespace feedlens;

TEST_CASE("distribution validation") {
  CHECK_THROWS_AS(CategoryDistribution({{"a", 0.5}, {"b", 0.6}}), ValidationError);
  CHECK_THROWS_AS(CategoryDistribution({{"a", -0.1}, {"b", 1.1}}), ValidationError);
  const auto d = CategoryDistribution::from_counts({{"a", 3}, {"b", 1}});
  CHECK(d.share("a") == doctest::Approx(0.75));
  CHECK(d.share("zzz") == 0.0);
}

TEST_CASE("entropy matches the term-sum oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(13));
    std::map<std::string, int> counts;
    std::vector<double> p;
    int total = 0;
    for (int i = 0; i < k; ++i) {
      const int c = 1 + static_cast<int>(rng.below(50));
      counts["c" + std::to_string(i)] = c;
      total += c;
    }
    for (const auto& [id, c] : counts) p.push_back(static_cast<double>(c) / total);
    const auto d = CategoryDistribution::from_counts(counts);
    CHECK(std::abs(shannon_entropy(d) - testing_support::entropy_oracle(p)) < 1e-9);
  }
}

TEST_CASE("entropy boundary and worked values") {
  CHECK(shannon_entropy(CategoryDistribution({{"a", 1.0}})) == 0.0);
  CHECK(shannon_entropy(CategoryDistribution({{"a", 0.25}, {"b", 0.25}, {"c", 0.25}, {"d", 0.25}})) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(shannon_entropy(CategoryDistribution({{"a", 0.8}, {"b", 0.2}})) ==
        doctest::Approx(0.7219).epsilon(1e-4));
}
