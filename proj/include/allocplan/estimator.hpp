// Analysis of the group-weighted loss estimator
//
//   L_hat(w, alpha, n) = (1/n) * sum_i w(g_i) * loss_i
//
// for a fixed predictor: exact mean and variance, the variance-optimal
// (weights, allocation) pair that preserves the mean, importance weights,
// the convex-case GDRO weight construction, and a Monte Carlo checker.

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "allocplan/types.hpp"

namespace allocplan {

/// Per-group mean and variance of the loss under a fixed predictor.
struct GroupLossMoments {
    std::vector<double> mean;
    std::vector<double> variance;

    void validate() const;
    std::size_t size() const { return mean.size(); }
};

/// The random variable L_hat is determined by group weights, the sampling
/// allocation, and the total sample size.
struct WeightedEstimatorSpec {
    std::vector<double> weights;   // w(g) >= 0
    Allocation alpha;
    std::int64_t n = 0;

    WeightedEstimatorSpec(std::vector<double> w, Allocation a, std::int64_t n_total);
};

/// The group distribution a (weights, allocation) pair implicitly targets:
/// gamma'_g = w(g) alpha_g / c with c = sum_g w(g) alpha_g.
struct ImplicitTarget {
    Allocation gamma_prime;
    double c = 0.0;
};

ImplicitTarget implicit_target(const WeightedEstimatorSpec& spec);

/// E[L_hat] = sum_g alpha_g w(g) mean_g.
double estimator_mean(const WeightedEstimatorSpec& spec, const GroupLossMoments& moments);

/// Var[L_hat] = (1/n) sum_g alpha_g w(g)^2 variance_g.
double estimator_variance(const WeightedEstimatorSpec& spec, const GroupLossMoments& moments);

struct OptimalPair {
    std::vector<double> w_star;
    Allocation alpha_star;
};

/// The mean-preserving, variance-minimizing alternative:
/// alpha*_g proportional to gamma'_g sqrt(variance_g), w*(g) = c gamma'_g / alpha*_g.
/// Groups with gamma'_g = 0 keep weight 0 and allocation 0. Throws
/// "zero-variance group" if any group has variance 0 (the optimum would
/// concentrate degenerately).
OptimalPair optimal_pair(const WeightedEstimatorSpec& spec, const GroupLossMoments& moments);

/// Importance weights w(g) = gamma_g / alpha_g, making the estimator's mean
/// equal the population risk. Throws "unrepresented group" when alpha_g = 0
/// for a group with gamma_g > 0.
std::vector<double> iw_weights(const PopulationSpec& pop, const Allocation& alpha);

/// Importance-weight ratio above which the variance blow-up is worth flagging.
inline constexpr double kIwHighVarianceRatio = 5.0;

bool iw_high_variance(const std::vector<double>& weights);

/// Group weights of the equivalent weighted objective at a GDRO optimum for
/// convex losses: mass sits uniformly on the argmax group set (ties resolved
/// within an absolute tolerance of 1e-9). Not valid for nonconvex losses.
std::vector<double> gdro_convex_weights(const std::vector<double>& group_empirical_losses);

inline constexpr double kGdroTieTolerance = 1e-9;

/// Draws one loss value from a group's loss distribution.
using LossSampler = std::function<double(RngStream&)>;

struct MonteCarloResult {
    double sample_mean = 0.0;
    double sample_variance = 0.0;
};

/// Simulates L_hat over `trials` independent training draws with exact
/// floored counts n_g = floor(alpha_g n). Trials run on counter-based
/// substreams and are reduced in trial order, so the result is identical
/// for any worker count.
MonteCarloResult monte_carlo_estimator(const WeightedEstimatorSpec& spec,
                                       const std::vector<LossSampler>& samplers,
                                       std::int64_t trials, std::uint64_t seed);

} // namespace allocplan
