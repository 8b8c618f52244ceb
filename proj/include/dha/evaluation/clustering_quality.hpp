#pragma once

#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

namespace dha::evaluation {

/// Pair-counting adjusted Rand index between two labelings of the same items.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("ARI: labelings differ in length");
  if (a.empty()) throw std::invalid_argument("ARI: empty labeling");
  std::map<std::pair<int, int>, long> joint;
  std::map<int, long> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++joint[{a[i], b[i]}];
    ++ra[a[i]];
    ++rb[b[i]];
  }
  auto c2 = [](long n) { return 0.5 * static_cast<double>(n) * static_cast<double>(n - 1); };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [_, n] : joint) index += c2(n);
  for (const auto& [_, n] : ra) sa += c2(n);
  for (const auto& [_, n] : rb) sb += c2(n);
  const double total = c2(static_cast<long>(a.size()));
  const double expected = total > 0.0 ? sa * sb / total : 0.0;
  const double max_index = 0.5 * (sa + sb);
  // Both labelings trivial (all-in-one or all singletons): identical partitions.
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace dha::evaluation
