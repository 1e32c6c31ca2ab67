#include "custcount/stats.hpp"

#include <algorithm>
#include <cmath>

#include "custcount/errors.hpp"

namespace custcount {

double quantile(std::vector<double> values, double prob) {
    if (values.empty()) throw input_error("quantile of an empty sample");
    if (prob < 0.0 || prob > 1.0) throw input_error("quantile probability outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

double mean(std::span<const double> values) {
    if (values.empty()) throw input_error("mean of an empty sample");
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
    if (values.size() < 2) throw input_error("sample sd needs at least two values");
    const double m = mean(values);
    double acc = 0.0;
    for (double v : values) acc += (v - m) * (v - m);
    return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

bool is_simplex(std::span<const double> v, double tol) {
    if (v.empty()) return false;
    double sum = 0.0;
    for (double x : v) {
        if (!(x >= -tol && x <= 1.0 + tol)) return false;
        sum += x;
    }
    return std::abs(sum - 1.0) <= tol;
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::mt19937_64 derive_stream(std::uint64_t master_seed, std::uint64_t index) {
    const std::uint64_t s = mix64(master_seed ^ mix64(index));
    return std::mt19937_64(s);
}

}  // namespace custcount
