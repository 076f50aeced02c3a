#pragma once

#include <cstdlib>
#include <functional>
#include <vector>

namespace testing {

// Exhaustive maximum one-to-one matching.
inline int brute_force_matching(const std::vector<int>& p, const std::vector<int>& q, int tol) {
  std::vector<bool> used(q.size(), false);
  std::function<int(std::size_t)> best = [&](std::size_t i) -> int {
    if (i == p.size()) return 0;
    int b = best(i + 1);
    for (std::size_t j = 0; j < q.size(); ++j) {
      if (used[j] || std::abs(p[i] - q[j]) > tol) continue;
      used[j] = true;
      b = std::max(b, 1 + best(i + 1));
      used[j] = false;
    }
    return b;
  };
  return best(0);
}

}  // namespace testing
