#pragma once

#include <span>
#include <vector>

#include "custcount/matrix.hpp"

namespace custcount {

struct OptimizerSettings {
    int max_iterations = 10000;
    // Stop once one update moves the mix by less than this in the
    // inf-norm; the objective then cannot improve meaningfully either.
    double tolerance = 1e-10;
    // Lower clamp applied inside logarithms only; returned mixes are
    // never clamped.
    double floor = 1e-300;
    // Extra interior starting points. The likelihood is concave, so one
    // start suffices; more starts exist to certify that.
    int multistart_count = 1;
};

struct OptimizeResult {
    std::vector<double> segment_mix;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
};

// sum_i counts[i] * ln((conditional * mix)_i). Returns -infinity when a
// basket type with a positive count has zero mixture probability.
double log_likelihood(std::span<const double> segment_mix,
                      std::span<const double> basket_counts,
                      const Matrix& conditional);

// sum_i probs[i] * ln(probs[i] / (conditional * mix)_i); zero-probability
// basket types contribute nothing.
double kl_divergence(std::span<const double> segment_mix,
                     std::span<const double> basket_probs,
                     const Matrix& conditional);

// sum_i (probs[i] - (conditional * mix)_i)^2.
double squared_error(std::span<const double> segment_mix,
                     std::span<const double> basket_probs,
                     const Matrix& conditional);

// Maximum-likelihood segment mix via the multiplicative fixed-point
// update mix[j] <- mix[j] * sum_i counts[i] * conditional(i,j) /
// (conditional * mix)_i / total. Monotone ascent on a concave
// objective; deterministic from the uniform start.
OptimizeResult mle_estimate(std::span<const double> basket_counts,
                            const Matrix& conditional,
                            const OptimizerSettings& settings = {});

// Same fixed point run on weights proportional to the target
// distribution; the reported objective is the divergence itself.
OptimizeResult kl_minimize(std::span<const double> basket_probs,
                           const Matrix& conditional,
                           const OptimizerSettings& settings = {});

// Least-squares mix: projected gradient with an exact step from the
// quadratic form. Unique minimizer whenever the conditional has full
// column rank.
OptimizeResult ls_estimate(std::span<const double> basket_probs,
                           const Matrix& conditional,
                           const OptimizerSettings& settings = {});

struct PriorSpec {
    std::vector<double> concentration;  // per segment, strictly positive
};

// Posterior-mode mix under a Dirichlet prior: log-likelihood plus
// sum_j (concentration[j] - 1) * ln mix[j], maximized by projected
// gradient ascent with a backtracking line search. The prior's
// normalizing constant is excluded from the optimization but included
// in the reported objective.
OptimizeResult map_estimate(std::span<const double> basket_counts,
                            const Matrix& conditional,
                            const PriorSpec& prior,
                            const OptimizerSettings& settings = {});

// Euclidean projection onto the probability simplex.
std::vector<double> project_to_simplex(std::vector<double> v);

}  // namespace custcount
