#include "debiased/rng.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

namespace debiased {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = mix64(master);
  for (auto step : path) h = mix64(h ^ mix64(step + 0x632be59bd9b4e019ULL));
  return h;
}

Engine make_engine(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Engine(seq);
}

void fill_standard_normal(Engine& engine, Eigen::Ref<Eigen::MatrixXd> out) {
  boost::random::normal_distribution<double> normal;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    double* col = out.col(c).data();
    for (Eigen::Index r = 0; r < out.rows(); ++r) col[r] = normal(engine);
  }
}

double standard_normal(Engine& engine) {
  boost::random::normal_distribution<double> normal;
  return normal(engine);
}

double uniform01(Engine& engine) {
  boost::random::uniform_01<double> dist;
  return dist(engine);
}

std::uint64_t uniform_below(Engine& engine, std::uint64_t bound) {
  boost::random::uniform_int_distribution<std::uint64_t> dist(0, bound - 1);
  return dist(engine);
}

}  // namespace debiased
