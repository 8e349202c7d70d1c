#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fastdad::bench {

// Rank 1 for the highest score; tied scores share the mean of their ranks.
std::vector<double> average_ranks(std::span<const double> scores);

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;  // sample std / sqrt(n); 0 for n < 2
  std::size_t n = 0;
};
MeanStderr mean_stderr(std::span<const double> values);

// Exact one-sided Wilcoxon signed-rank p-value for the alternative that the
// paired differences are centred above zero. Zero differences are dropped;
// tied magnitudes get averaged ranks. Returns 1 when nothing remains.
double wilcoxon_greater_p(std::span<const double> differences);

}  // namespace fastdad::bench
