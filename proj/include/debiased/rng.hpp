#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <random>

namespace debiased {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives an independent stream seed from a master seed and a path of
/// counters (for example {sample size index, replication, purpose}). The
/// derivation depends only on the values, so a replication gets the same
/// stream whichever worker runs it.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept;

Engine make_engine(std::uint64_t seed);

/// Fills a matrix column by column with iid N(0, 1) draws (ziggurat).
void fill_standard_normal(Engine& engine, Eigen::Ref<Eigen::MatrixXd> out);

double standard_normal(Engine& engine);

/// Uniform on [0, 1).
double uniform01(Engine& engine);

/// Uniform integer in [0, bound).
std::uint64_t uniform_below(Engine& engine, std::uint64_t bound);

}  // namespace debiased
