// Per-group power-law risk model
//
//   r_g(n_g, n) = sigma_g^2 * n_g^{-p_g} + tau_g^2 * n^{-q_g} + delta_g
//
// and the allocation optimizers built on it: the closed-form population-risk
// minimizer for a shared exponent, a KKT water-filling solver for
// group-dependent exponents, the two-group minmax allocation, and the
// theoretical bound checks for the equal-sigma and two-group cases.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "allocplan/types.hpp"

namespace allocplan {

/// Parameters of one group's risk curve. The exponents live in the fitting
/// box [0, 2]; the optimizers additionally require p > 0 for any group with
/// sigma2 > 0 (a zero exponent makes the group term constant in n_g).
struct GroupScaling {
    double sigma2 = 0.0;      // weight of the own-group term
    double p = 1.0;           // own-group exponent
    double tau2 = 0.0;        // weight of the pooled-data term
    double q = 1.0;           // pooled-data exponent
    double delta = 0.0;       // irreducible floor
    std::int64_t m_min = 1;   // minimum n_g for which the curve is trusted

    void validate() const;
};

/// One GroupScaling per group.
struct ScalingModel {
    std::vector<GroupScaling> per_group;

    std::size_t size() const { return per_group.size(); }
    const GroupScaling& operator[](GroupId g) const { return per_group[g]; }
    void validate() const;
};

enum class AllocMethod { closed_form, water_filling, bisection, grid };

const char* to_string(AllocMethod m);

struct OptimalAllocationResult {
    Allocation alpha;
    double objective_value = 0.0;
    bool degenerate = false;   // true when every sigma_g^2 = 0
    AllocMethod method = AllocMethod::closed_form;
};

/// Forecasted risk of group g with n_g of its own samples in a training set
/// of n total. n_g and n are real-valued; fractional counts are allowed.
/// Throws "unbounded risk" when n_g <= 0 with sigma2 > 0.
double forecast_group_risk(const ScalingModel& model, GroupId g, double n_g, double n);

/// True when n_g sits below the group's trusted range (n_g < m_min).
bool forecast_is_extrapolation(const ScalingModel& model, GroupId g, double n_g);

/// Approximated population risk: sum_g gamma_g * r_g(alpha_g * n, n).
/// Returns +infinity when some group has alpha_g = 0 but sigma_g^2 > 0.
double forecast_population_risk(const ScalingModel& model, const PopulationSpec& pop,
                                const Allocation& alpha, double n);

/// Population-risk minimizer for a shared exponent p:
/// alpha*_g proportional to (gamma_g * sigma_g^2)^{1/(p+1)}.
/// Groups with sigma_g^2 = 0 receive exactly 0; if every sigma_g^2 = 0 the
/// objective is flat and alpha* = gamma is returned with degenerate = true.
/// objective_value is the n-free reduced objective sum_g gamma_g sigma_g^2
/// alpha_g^{-p} (the full forecast also needs n, tau, delta).
OptimalAllocationResult optimal_allocation_closed_form(const PopulationSpec& pop,
                                                       const std::vector<double>& sigma2,
                                                       double p);

/// Population-risk minimizer with group-dependent exponents, solved by
/// bisection on the KKT multiplier. The objective is convex and separable,
/// so the returned point is the unique minimum (simplex sum tolerance 1e-10).
OptimalAllocationResult optimal_allocation_general(const ScalingModel& model,
                                                   const PopulationSpec& pop, double n);

/// Two-group allocation minimizing the maximum forecasted group risk at
/// total size n, found by bisection on alpha_A. The search is confined to
/// [1/n, 1 - 1/n] (at least one sample per group); when one group's curve
/// dominates everywhere the boundary-adjacent point is returned.
OptimalAllocationResult minmax_allocation(const ScalingModel& model, double n);

struct Corollary1Row {
    GroupId group = 0;
    double gamma_g = 0.0;
    double alpha_star_g = 0.0;
    bool holds = false;
};

/// For equal sigma across groups, every group with gamma_g <= 1/|G| must get
/// alpha*_g >= gamma_g. Returns one row per qualifying group.
std::vector<Corollary1Row> corollary1_check(const PopulationSpec& pop, double p);

struct Corollary2Bounds {
    double lower = 0.0;
    double upper = 0.0;
    double alpha_star_A = 0.0;
};

/// Two-group bounds on the minority group's optimal allocation:
///   gamma_A s_A / (gamma_A s_A + gamma_B s_B) < alpha*_A < s_A / (s_A + s_B)
/// with s_g = (sigma_g^2)^{1/(p+1)}. Requires gamma_A < 0.5.
Corollary2Bounds corollary2_bounds(double gamma_A, double sigma2_A, double sigma2_B,
                                   double p);

} // namespace allocplan
