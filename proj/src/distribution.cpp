#include "feedlens/distribution.hpp"

#include <cmath>

#include "feedlens/error.hpp"

namespace feedlens {

CategoryDistribution::CategoryDistribution(std::map<std::string, double> proportions)
    : proportions_(std::move(proportions)) {
  double total = 0.0;
  for (const auto& [id, p] : proportions_) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValidationError("proportion for '" + id + "' is outside [0,1]");
    }
    total += p;
  }
  if (!proportions_.empty() && std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("proportions sum to " + std::to_string(total) + ", expected 1");
  }
}

CategoryDistribution CategoryDistribution::from_counts(const std::map<std::string, int>& counts) {
  long total = 0;
  for (const auto& [id, n] : counts) {
    if (n < 0) throw ValidationError("negative count for '" + id + "'");
    total += n;
  }
  std::map<std::string, double> p;
  if (total == 0) return CategoryDistribution(std::move(p));
  for (const auto& [id, n] : counts) {
    if (n > 0) p[id] = static_cast<double>(n) / static_cast<double>(total);
  }
  return CategoryDistribution(std::move(p));
}

double CategoryDistribution::share(const std::string& category) const {
  const auto it = proportions_.find(category);
  return it == proportions_.end() ? 0.0 : it->second;
}

}  // namespace feedlens
