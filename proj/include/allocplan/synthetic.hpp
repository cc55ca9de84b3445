// Synthetic generators and analytic oracles: the shared linear model with
// group-dependent intercepts (whose OLS group risk has a closed form), and a
// direct power-law loss generator for fit-recovery checks.

#pragma once

#include <cstdint>
#include <vector>

#include "allocplan/optimal_alloc.hpp"
#include "allocplan/scaling_fit.hpp"
#include "allocplan/types.hpp"

namespace allocplan {

/// y = beta . x + intercept[g] + Normal(0, noise_sd^2), x ~ Normal(0, feature_cov).
struct LinearGroupModel {
    std::vector<double> beta;                     // shared weights, dimension d
    std::vector<double> intercepts;               // one per group
    double noise_sd = 1.0;
    std::vector<std::vector<double>> feature_cov; // d x d SPD; empty means identity

    std::size_t dim() const { return beta.size(); }
    std::size_t num_groups() const { return intercepts.size(); }
    void validate() const;
};

/// Draws counts[g] records per group; deterministic in (model, counts, seed).
GroupedSample generate_linear_group_data(const LinearGroupModel& model,
                                         const GroupCounts& counts, std::uint64_t seed);
GroupedSample generate_linear_group_data(const LinearGroupModel& model,
                                         const GroupCounts& counts, const RngStream& root);

/// OLS solution on the dummy-augmented design [group indicators | features].
/// Features are centered before solving; intercepts are reported in the raw
/// frame, so prediction is x . beta_hat + intercepts_hat[g].
struct OlsGroupFit {
    std::vector<double> beta_hat;
    std::vector<double> intercepts_hat;
};

OlsGroupFit ols_with_group_dummies(const GroupedSample& sample);

/// Closed-form OLS group risk terms: sigma^2 * (1 + 1/n_g + d/(n-d-1)), with
/// the mean-correction term reported only as its upper bound
/// sigma^2 * d / (n_g (n-d-2)).
struct OlsRiskPrediction {
    double per_group_risk = 0.0;      // base + intercept_term + shared_term
    double base = 0.0;                // sigma^2
    double intercept_term = 0.0;      // sigma^2 / n_g
    double shared_term = 0.0;         // sigma^2 * d / (n - d - 1)
    double mean_term_bound = 0.0;     // sigma^2 * d / (n_g (n - d - 2))
};

OlsRiskPrediction predict_ols_group_risk(const LinearGroupModel& model, std::int64_t n_g,
                                         std::int64_t n);

/// Monte Carlo group risks of the OLS predictor: fresh training sample and
/// fresh per-group evaluation draws each trial, averaged in trial order.
/// Evaluation draws depend only on (seed, trial), not on the counts, so runs
/// that differ only in the design share evaluation noise.
std::vector<double> empirical_group_risk(const LinearGroupModel& model,
                                         const GroupCounts& counts, std::int64_t eval_size,
                                         std::int64_t trials, std::uint64_t seed);

/// Ground-truth generator for fit recovery: one observation per group with
/// loss = r_g(n_g, n) + Normal(0, noise_sd^2), truncated at 0.
std::vector<LossObservation> power_law_loss_oracle(const ScalingModel& model,
                                                   const GroupCounts& counts, double noise_sd,
                                                   std::uint64_t seed);
std::vector<LossObservation> power_law_loss_oracle(const ScalingModel& model,
                                                   const GroupCounts& counts, double noise_sd,
                                                   const RngStream& root);

} // namespace allocplan
