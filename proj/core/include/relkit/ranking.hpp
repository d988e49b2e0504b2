#pragma once

#include <span>
#include <vector>

namespace relkit {

struct Ranking {
  std::vector<double> ranks;  // 1-based, ties share their average rank
  double tie_term = 0.0;      // sum over tie groups of (t^3 - t)
};

Ranking average_ranks(std::span<const double> values);

}  // namespace relkit
