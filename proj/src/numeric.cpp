#include "debiased/numeric.hpp"

#include <boost/math/distributions/normal.hpp>

#include "debiased/errors.hpp"

namespace debiased {

double pairwise_sum(std::span<const double> values) noexcept {
  constexpr std::size_t kBlock = 16;
  if (values.size() <= kBlock) {
    double total = 0.0;
    for (double v : values) total += v;
    return total;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double normal_critical_value(double level) {
  require(level > 0.0 && level < 1.0, ErrorKind::InvalidLevel,
          "confidence level must lie in (0, 1), got " + std::to_string(level));
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 * (1.0 + level));
}

}  // namespace debiased
