// Constrained nonlinear least squares for the per-group risk curve
// r(n_g, n) = sigma^2 n_g^{-p} + tau^2 n^{-q} + delta, with the minimum
// group-size inclusion threshold and multi-start initialization, plus the
// two-group subsetting design generator used to lay out (n_A, n_B) pairs.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "allocplan/optimal_alloc.hpp"
#include "allocplan/types.hpp"

namespace allocplan {

/// One measured loss for a group at a particular (n_g, n) design point.
struct LossObservation {
    GroupId group = 0;
    std::int64_t n_g = 1;
    std::int64_t n = 1;
    double loss = 0.0;
    std::optional<std::int64_t> seed_tag;   // replicate id

    void validate() const;
};

/// Standard errors of the five fitted parameters, from the Gauss-Newton
/// covariance at the optimum (in the sigma2/p/tau2/q/delta parameterization).
struct FitStdErr {
    double sigma2 = 0.0;
    double p = 0.0;
    double tau2 = 0.0;
    double q = 0.0;
    double delta = 0.0;
};

struct FitResult {
    GroupId group = 0;
    GroupScaling params;
    double residual_sse = 0.0;
    FitStdErr stderr_;
    std::int64_t n_observations_used = 0;
    std::int64_t excluded_below_m_min = 0;
};

/// Best-of-`starts` constrained least-squares fit for one group, over the
/// observations with n_g >= m_min. Box constraints (sigma2, tau2, delta >= 0;
/// p, q in [0, 2]) are enforced by a smooth reparameterization onto
/// unconstrained coordinates. Deterministic in (observations, m_min, starts,
/// seed): starts are ranked by (sse, start index).
///
/// Preconditions: at least 6 usable observations, at least two distinct n_g
/// and two distinct n among them. Violations throw with the failed
/// precondition named.
FitResult fit_group_scaling(const std::vector<LossObservation>& observations, GroupId group,
                            std::int64_t m_min, int starts, std::uint64_t seed);
FitResult fit_group_scaling(const std::vector<LossObservation>& observations, GroupId group,
                            std::int64_t m_min, int starts, const RngStream& root);

/// One fraction-skip rule of a subsetting design: drop the listed fractions
/// whenever the allocation ratio is strictly below `ratio_below`.
struct FractionSkipRule {
    double ratio_below = 1.0;
    std::vector<double> fractions;
};

/// Two-group subsetting design. For each allocation ratio r (minor:major)
/// the largest feasible pair under the per-group caps is scaled by every
/// fraction x; the same pattern is repeated with the group roles switched,
/// and duplicates are removed. Pairs are returned sorted by (n_A, n_B).
std::vector<GroupCounts> design_subset_grid(const std::vector<std::int64_t>& n_max_per_group,
                                            const std::vector<double>& ratios,
                                            const std::vector<double>& fractions,
                                            const std::vector<FractionSkipRule>& skip_rules);

struct FitDiagnostics {
    std::vector<double> residuals;            // per used observation
    double r_squared = 0.0;                   // against the constant-delta baseline
    std::vector<std::string> wide_stderr_params;  // parameters with stderr > |estimate|
    std::string note;
};

/// Residuals, R^2 against the constant fit, and which parameters have
/// standard errors exceeding their estimates. The diagnostics carry the
/// standing caveat that power-law parameter estimates are variable and
/// alternative functional forms are not compared here.
FitDiagnostics fit_diagnostics(const FitResult& fit,
                               const std::vector<LossObservation>& observations);

} // namespace allocplan
