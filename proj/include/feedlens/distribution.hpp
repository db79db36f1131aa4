#pragma once

#include <map>
#include <string>

namespace feedlens {

// Category proportions p_i. Keys are category ids; iteration order is
// lexicographic, which gives every consumer the same tie-break order.
class CategoryDistribution {
 public:
  CategoryDistribution() = default;
  explicit CategoryDistribution(std::map<std::string, double> proportions);

  static CategoryDistribution from_counts(const std::map<std::string, int>& counts);

  const std::map<std::string, double>& proportions() const { return proportions_; }
  double share(const std::string& category) const;
  bool empty() const { return proportions_.empty(); }

  bool operator==(const CategoryDistribution&) const = default;

 private:
  std::map<std::string, double> proportions_;
};

}  // namespace feedlens
