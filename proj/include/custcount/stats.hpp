#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace custcount {

// Quantile with linear interpolation between order statistics,
// h = (n - 1) * prob. One definition shared by every module that
// reports a quantile.
double quantile(std::vector<double> values, double prob);

double mean(std::span<const double> values);

// Sample standard deviation with (n - 1) normalization.
double sample_sd(std::span<const double> values);

// Entries within [-tol, 1 + tol] and sum within tol of 1.
bool is_simplex(std::span<const double> v, double tol = 1e-9);

// splitmix64 finalizer, used to derive decorrelated seeds.
std::uint64_t mix64(std::uint64_t x);

// Deterministic per-index stream: every replication or restart owns its
// own engine, so execution order never changes results.
std::mt19937_64 derive_stream(std::uint64_t master_seed, std::uint64_t index);

}  // namespace custcount
