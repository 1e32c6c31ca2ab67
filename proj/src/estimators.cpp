#include "custcount/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "custcount/errors.hpp"
#include "custcount/stats.hpp"

namespace custcount {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::uint64_t kMultistartSeed = 0x5EC7A11CULL;

void check_shapes(std::span<const double> data, const Matrix& conditional) {
    if (conditional.rows() == 0 || conditional.cols() == 0)
        throw input_error("conditional matrix is empty");
    if (data.size() != conditional.rows())
        throw input_error("data length does not match conditional rows");
}

void check_column_simplex(const Matrix& conditional) {
    for (std::size_t j = 0; j < conditional.cols(); ++j) {
        if (!is_simplex(conditional.column(j), 1e-6))
            throw input_error("conditional column " + std::to_string(j + 1) +
                              " is not a simplex vector");
    }
}

void check_rank(const Matrix& conditional) {
    if (!has_full_column_rank(conditional))
        throw identifiability_error(
            "conditional columns are linearly dependent; the segment mix is not identifiable");
}

void check_counts(std::span<const double> counts) {
    double total = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (!(counts[i] >= 0.0))
            throw input_error("negative count for basket type " + std::to_string(i + 1));
        total += counts[i];
    }
    if (!(total > 0.0)) throw empty_sample_error("all basket-type counts are zero");
}

void check_observable(std::span<const double> counts, const Matrix& conditional) {
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] <= 0.0) continue;
        double row_sum = 0.0;
        for (std::size_t j = 0; j < conditional.cols(); ++j) row_sum += conditional(i, j);
        if (row_sum <= 0.0)
            throw input_error("basket type " + std::to_string(i + 1) +
                              " has positive count but zero probability in every segment");
    }
}

std::vector<double> uniform_mix(std::size_t m) {
    return std::vector<double>(m, 1.0 / static_cast<double>(m));
}

double inf_distance(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) d = std::max(d, std::abs(a[j] - b[j]));
    return d;
}

// Fixed-point ascent for sum_i w[i] * ln((R q)_i) over the simplex,
// with extrapolation over the update map. Near-dependent conditional
// columns make the plain update crawl along an almost-flat valley;
// squared extrapolation steps (accepted only when the guarded objective
// does not drop) cut those cases from millions of updates to hundreds.
//
// Convergence requires two facts about the point the last update left:
//   - the update moved the mix at most `tolerance` in the inf-norm, and
//   - the certified optimality gap is small: by concavity the remaining
//     improvement is bounded by total * (max_j factor_j - 1), which must
//     not exceed tolerance * (1 + |objective|). The second test catches
//     coordinates parked near zero whose absolute steps are tiny without
//     being anywhere near optimal.
OptimizeResult fixed_point_ascent(std::span<const double> weights,
                                  const Matrix& conditional,
                                  const OptimizerSettings& settings,
                                  std::vector<double> start) {
    const std::size_t n = conditional.rows();
    const std::size_t m = conditional.cols();
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);

    std::vector<double> mixed(n);
    double max_factor = 0.0;  // of the most recent update
    auto update = [&](const std::vector<double>& mix) {
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += conditional(i, j) * mix[j];
            mixed[i] = std::max(acc, settings.floor);
        }
        std::vector<double> next(m);
        double next_sum = 0.0;
        max_factor = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += weights[i] * conditional(i, j) / mixed[i];
            max_factor = std::max(max_factor, acc / total);
            next[j] = mix[j] * acc / total;
            next_sum += next[j];
        }
        for (double& x : next) x /= next_sum;
        return next;
    };
    auto guarded_objective = [&](const std::vector<double>& mix) {
        double value = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (weights[i] == 0.0) continue;
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += conditional(i, j) * mix[j];
            value += weights[i] * std::log(std::max(acc, settings.floor));
        }
        return value;
    };
    auto settled = [&](const std::vector<double>& from, const std::vector<double>& to) {
        if (inf_distance(to, from) > settings.tolerance) return false;
        const double gap_bound = total * (max_factor - 1.0);
        return gap_bound <= settings.tolerance * (1.0 + std::abs(guarded_objective(to)));
    };

    std::vector<double> mix = std::move(start);
    OptimizeResult out;
    while (out.iterations < settings.max_iterations && !out.converged) {
        std::vector<double> one = update(mix);
        ++out.iterations;
        if (settled(mix, one)) {
            mix = std::move(one);
            out.converged = true;
            break;
        }
        if (out.iterations >= settings.max_iterations) {
            mix = std::move(one);
            break;
        }
        std::vector<double> two = update(one);
        ++out.iterations;
        if (settled(one, two)) {
            mix = std::move(two);
            out.converged = true;
            break;
        }

        // Squared extrapolation through the two plain steps.
        std::vector<double> rise(m), curve(m);
        double rise_norm = 0.0, curve_norm = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            rise[j] = one[j] - mix[j];
            curve[j] = (two[j] - one[j]) - rise[j];
            rise_norm += rise[j] * rise[j];
            curve_norm += curve[j] * curve[j];
        }
        if (curve_norm <= 0.0) {
            mix = std::move(two);
            continue;
        }
        double alpha = -std::sqrt(rise_norm / curve_norm);
        alpha = std::min(alpha, -1.0);

        const double two_objective = guarded_objective(two);
        bool accepted = false;
        for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
            if (out.iterations >= settings.max_iterations) break;
            std::vector<double> candidate(m);
            double sum = 0.0, largest = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                candidate[j] = std::max(mix[j] - 2.0 * alpha * rise[j] + alpha * alpha * curve[j], 0.0);
                largest = std::max(largest, candidate[j]);
            }
            for (double& x : candidate) {
                // keep coordinates escapable under the multiplicative map
                x = std::max(x, 1e-12 * largest);
                sum += x;
            }
            for (double& x : candidate) x /= sum;

            std::vector<double> stabilized = update(candidate);
            ++out.iterations;
            if (guarded_objective(stabilized) >= two_objective) {
                if (settled(candidate, stabilized)) out.converged = true;
                mix = std::move(stabilized);
                accepted = true;
            } else {
                alpha = (alpha - 1.0) / 2.0;  // retreat toward the plain step
            }
        }
        if (!accepted) mix = std::move(two);
    }
    out.segment_mix = std::move(mix);
    out.objective = log_likelihood(out.segment_mix, weights, conditional);
    return out;
}

OptimizeResult best_of_starts(std::span<const double> weights,
                              const Matrix& conditional,
                              const OptimizerSettings& settings) {
    const std::size_t m = conditional.cols();
    OptimizeResult best = fixed_point_ascent(weights, conditional, settings, uniform_mix(m));
    // Tie-break keeps the uniform-start result: replace only on a strict win.
    for (int k = 1; k < settings.multistart_count; ++k) {
        auto rng = derive_stream(kMultistartSeed, static_cast<std::uint64_t>(k));
        std::exponential_distribution<double> expo(1.0);
        std::vector<double> start(m);
        double sum = 0.0;
        for (double& s : start) {
            s = expo(rng) + 1e-12;
            sum += s;
        }
        for (double& s : start) s /= sum;
        OptimizeResult candidate = fixed_point_ascent(weights, conditional, settings, std::move(start));
        if (candidate.objective > best.objective) best = std::move(candidate);
    }
    return best;
}

double guarded_posterior_objective(std::span<const double> mix,
                                   std::span<const double> counts,
                                   const Matrix& conditional,
                                   std::span<const double> concentration,
                                   double floor) {
    double value = 0.0;
    for (std::size_t i = 0; i < conditional.rows(); ++i) {
        if (counts[i] == 0.0) continue;
        double acc = 0.0;
        for (std::size_t j = 0; j < conditional.cols(); ++j) acc += conditional(i, j) * mix[j];
        value += counts[i] * std::log(std::max(acc, floor));
    }
    for (std::size_t j = 0; j < mix.size(); ++j)
        value += (concentration[j] - 1.0) * std::log(std::max(mix[j], floor));
    return value;
}

double log_beta(std::span<const double> concentration) {
    double sum = 0.0, value = 0.0;
    for (double g : concentration) {
        value += std::lgamma(g);
        sum += g;
    }
    return value - std::lgamma(sum);
}

}  // namespace

double log_likelihood(std::span<const double> segment_mix,
                      std::span<const double> basket_counts,
                      const Matrix& conditional) {
    check_shapes(basket_counts, conditional);
    if (segment_mix.size() != conditional.cols())
        throw input_error("segment mix length does not match conditional columns");
    double value = 0.0;
    for (std::size_t i = 0; i < conditional.rows(); ++i) {
        if (basket_counts[i] == 0.0) continue;
        double acc = 0.0;
        for (std::size_t j = 0; j < conditional.cols(); ++j) acc += conditional(i, j) * segment_mix[j];
        if (!(acc > 0.0)) return kNegInf;
        value += basket_counts[i] * std::log(acc);
    }
    return value;
}

double kl_divergence(std::span<const double> segment_mix,
                     std::span<const double> basket_probs,
                     const Matrix& conditional) {
    check_shapes(basket_probs, conditional);
    if (segment_mix.size() != conditional.cols())
        throw input_error("segment mix length does not match conditional columns");
    double value = 0.0;
    for (std::size_t i = 0; i < conditional.rows(); ++i) {
        const double p = basket_probs[i];
        if (p == 0.0) continue;
        double acc = 0.0;
        for (std::size_t j = 0; j < conditional.cols(); ++j) acc += conditional(i, j) * segment_mix[j];
        if (!(acc > 0.0)) return std::numeric_limits<double>::infinity();
        value += p * std::log(p / acc);
    }
    return value;
}

double squared_error(std::span<const double> segment_mix,
                     std::span<const double> basket_probs,
                     const Matrix& conditional) {
    check_shapes(basket_probs, conditional);
    const std::vector<double> mixed = matvec(conditional, segment_mix);
    double value = 0.0;
    for (std::size_t i = 0; i < mixed.size(); ++i) {
        const double diff = basket_probs[i] - mixed[i];
        value += diff * diff;
    }
    return value;
}

OptimizeResult mle_estimate(std::span<const double> basket_counts,
                            const Matrix& conditional,
                            const OptimizerSettings& settings) {
    check_shapes(basket_counts, conditional);
    check_counts(basket_counts);
    check_column_simplex(conditional);
    check_rank(conditional);
    check_observable(basket_counts, conditional);
    return best_of_starts(basket_counts, conditional, settings);
}

OptimizeResult kl_minimize(std::span<const double> basket_probs,
                           const Matrix& conditional,
                           const OptimizerSettings& settings) {
    check_shapes(basket_probs, conditional);
    if (!is_simplex(basket_probs, 1e-6))
        throw input_error("basket probabilities are not a simplex vector");
    check_column_simplex(conditional);
    check_rank(conditional);
    check_observable(basket_probs, conditional);
    OptimizeResult out = best_of_starts(basket_probs, conditional, settings);
    out.objective = kl_divergence(out.segment_mix, basket_probs, conditional);
    return out;
}

std::vector<double> project_to_simplex(std::vector<double> v) {
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double running = 0.0, threshold = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        running += sorted[k];
        const double candidate = (running - 1.0) / static_cast<double>(k + 1);
        if (sorted[k] - candidate > 0.0) threshold = candidate;
    }
    for (double& x : v) x = std::max(x - threshold, 0.0);
    return v;
}

OptimizeResult ls_estimate(std::span<const double> basket_probs,
                           const Matrix& conditional,
                           const OptimizerSettings& settings) {
    check_shapes(basket_probs, conditional);
    check_column_simplex(conditional);
    check_rank(conditional);

    const std::size_t n = conditional.rows();
    const std::size_t m = conditional.cols();

    // Normal-equation pieces: gram = R'R, moment = R'p.
    Matrix gram(m, m);
    std::vector<double> moment(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            moment[j] += conditional(i, j) * basket_probs[i];
            for (std::size_t l = 0; l < m; ++l) gram(j, l) += conditional(i, j) * conditional(i, l);
        }
    }

    // Largest eigenvalue of the gram matrix by power iteration; sets the
    // base projected-gradient step.
    std::vector<double> eig(m, 1.0);
    double lambda = 1.0;
    for (int it = 0; it < 60; ++it) {
        std::vector<double> next = matvec(gram, eig);
        double norm = 0.0;
        for (double x : next) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) break;
        for (double& x : next) x /= norm;
        eig.swap(next);
        lambda = norm;
    }
    const double step = 1.0 / std::max(2.0 * lambda, 1e-12);

    std::vector<double> mix = uniform_mix(m);
    OptimizeResult out;
    for (int it = 1; it <= settings.max_iterations; ++it) {
        out.iterations = it;
        const std::vector<double> gq = matvec(gram, mix);
        std::vector<double> gradient(m);
        for (std::size_t j = 0; j < m; ++j) gradient[j] = 2.0 * (gq[j] - moment[j]);

        std::vector<double> trial(m);
        for (std::size_t j = 0; j < m; ++j) trial[j] = mix[j] - step * gradient[j];
        trial = project_to_simplex(std::move(trial));

        std::vector<double> direction(m);
        double grad_dot = 0.0, move = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            direction[j] = trial[j] - mix[j];
            grad_dot += gradient[j] * direction[j];
            move = std::max(move, std::abs(direction[j]));
        }
        if (move == 0.0) {
            out.converged = true;
            break;
        }
        // Exact minimizer along the feasible segment.
        const std::vector<double> gd = matvec(gram, direction);
        double curvature = 0.0;
        for (std::size_t j = 0; j < m; ++j) curvature += direction[j] * gd[j];
        curvature *= 2.0;
        double alpha = 1.0;
        if (curvature > 0.0) alpha = std::clamp(-grad_dot / curvature, 0.0, 1.0);
        for (std::size_t j = 0; j < m; ++j) mix[j] += alpha * direction[j];
        if (alpha * move <= settings.tolerance) {
            out.converged = true;
            break;
        }
    }
    out.segment_mix = std::move(mix);
    out.objective = squared_error(out.segment_mix, basket_probs, conditional);
    return out;
}

OptimizeResult map_estimate(std::span<const double> basket_counts,
                            const Matrix& conditional,
                            const PriorSpec& prior,
                            const OptimizerSettings& settings) {
    check_shapes(basket_counts, conditional);
    check_counts(basket_counts);
    check_column_simplex(conditional);
    check_rank(conditional);
    check_observable(basket_counts, conditional);

    const std::size_t m = conditional.cols();
    if (prior.concentration.size() != m)
        throw input_error("prior concentration length does not match segment count");
    for (std::size_t j = 0; j < m; ++j) {
        if (!(prior.concentration[j] > 0.0))
            throw input_error("prior concentration must be positive for segment " +
                              std::to_string(j + 1));
    }
    const double prior_constant = -log_beta(prior.concentration);

    const bool flat = std::all_of(prior.concentration.begin(), prior.concentration.end(),
                                  [](double g) { return g == 1.0; });
    if (flat) {
        // A flat prior adds only a constant; the posterior mode is the MLE.
        OptimizeResult out = best_of_starts(basket_counts, conditional, settings);
        out.objective += prior_constant;
        return out;
    }

    const std::size_t n = conditional.rows();
    std::vector<double> mix = uniform_mix(m);
    double objective = guarded_posterior_objective(mix, basket_counts, conditional,
                                                   prior.concentration, settings.floor);
    double step = 1.0;

    OptimizeResult out;
    for (int it = 1; it <= settings.max_iterations; ++it) {
        out.iterations = it;
        std::vector<double> mixed(n);
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += conditional(i, j) * mix[j];
            mixed[i] = std::max(acc, settings.floor);
        }
        std::vector<double> gradient(m);
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += basket_counts[i] * conditional(i, j) / mixed[i];
            gradient[j] = acc + (prior.concentration[j] - 1.0) / std::max(mix[j], settings.floor);
        }

        step = std::min(step * 2.0, 1e12);
        bool accepted = false;
        for (int half = 0; half < 200; ++half) {
            std::vector<double> trial(m);
            for (std::size_t j = 0; j < m; ++j) trial[j] = mix[j] + step * gradient[j];
            trial = project_to_simplex(std::move(trial));
            double grad_dot = 0.0, move = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                grad_dot += gradient[j] * (trial[j] - mix[j]);
                move = std::max(move, std::abs(trial[j] - mix[j]));
            }
            if (move == 0.0) break;  // stationary under any smaller step too
            const double trial_objective = guarded_posterior_objective(
                trial, basket_counts, conditional, prior.concentration, settings.floor);
            if (trial_objective >= objective + 0.25 * grad_dot) {
                mix = std::move(trial);
                objective = trial_objective;
                accepted = true;
                if (move <= settings.tolerance) out.converged = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // No ascent direction left at any step size.
            out.converged = true;
            break;
        }
        if (out.converged) break;
    }
    out.segment_mix = std::move(mix);
    out.objective = guarded_posterior_objective(out.segment_mix, basket_counts, conditional,
                                                prior.concentration, settings.floor) +
                    prior_constant;
    return out;
}

}  // namespace custcount
