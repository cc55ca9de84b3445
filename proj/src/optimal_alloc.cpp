#include "allocplan/optimal_alloc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace allocplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

} // namespace

void GroupScaling::validate() const {
    require(std::isfinite(sigma2) && sigma2 >= 0.0, "GroupScaling: sigma2 must be >= 0");
    require(std::isfinite(tau2) && tau2 >= 0.0, "GroupScaling: tau2 must be >= 0");
    require(std::isfinite(delta) && delta >= 0.0, "GroupScaling: delta must be >= 0");
    require(std::isfinite(p) && p >= 0.0 && p <= 2.0, "GroupScaling: p must be in [0, 2]");
    require(std::isfinite(q) && q >= 0.0 && q <= 2.0, "GroupScaling: q must be in [0, 2]");
    require(m_min >= 1, "GroupScaling: m_min must be >= 1");
}

void ScalingModel::validate() const {
    require(!per_group.empty(), "ScalingModel: needs at least one group");
    for (const auto& g : per_group) g.validate();
}

const char* to_string(AllocMethod m) {
    switch (m) {
        case AllocMethod::closed_form: return "closed_form";
        case AllocMethod::water_filling: return "water_filling";
        case AllocMethod::bisection: return "bisection";
        case AllocMethod::grid: return "grid";
    }
    return "unknown";
}

double forecast_group_risk(const ScalingModel& model, GroupId g, double n_g, double n) {
    const GroupScaling& s = model[g];
    double risk = s.delta;
    if (s.sigma2 > 0.0) {
        if (!(n_g > 0.0)) throw std::invalid_argument("forecast_group_risk: unbounded risk");
        risk += s.sigma2 * std::pow(n_g, -s.p);
    }
    if (s.tau2 > 0.0) {
        if (!(n > 0.0)) throw std::invalid_argument("forecast_group_risk: unbounded risk");
        risk += s.tau2 * std::pow(n, -s.q);
    }
    return risk;
}

bool forecast_is_extrapolation(const ScalingModel& model, GroupId g, double n_g) {
    return n_g < static_cast<double>(model[g].m_min);
}

double forecast_population_risk(const ScalingModel& model, const PopulationSpec& pop,
                                const Allocation& alpha, double n) {
    require(model.size() == pop.size() && alpha.size() == pop.size(),
            "forecast_population_risk: group count mismatch");
    require(n > 0.0, "forecast_population_risk: n must be > 0");
    double risk = 0.0;
    for (GroupId g = 0; g < pop.size(); ++g) {
        if (alpha[g] == 0.0 && model[g].sigma2 > 0.0) return kInf;
        const double n_g = alpha[g] * n;
        double term = model[g].delta + (model[g].tau2 > 0.0
                                            ? model[g].tau2 * std::pow(n, -model[g].q)
                                            : 0.0);
        if (model[g].sigma2 > 0.0) term += model[g].sigma2 * std::pow(n_g, -model[g].p);
        risk += pop[g] * term;
    }
    return risk;
}

OptimalAllocationResult optimal_allocation_closed_form(const PopulationSpec& pop,
                                                       const std::vector<double>& sigma2,
                                                       double p) {
    require(sigma2.size() == pop.size(), "optimal_allocation_closed_form: size mismatch");
    require(p > 0.0, "optimal_allocation_closed_form: p must be > 0");
    for (double s : sigma2) require(std::isfinite(s) && s >= 0.0, "sigma2 must be >= 0");

    const bool all_zero = std::all_of(sigma2.begin(), sigma2.end(),
                                      [](double s) { return s == 0.0; });
    if (all_zero) {
        // Objective is flat in alpha: any allocation minimizes it.
        return {Allocation(pop.gamma()), 0.0, true, AllocMethod::closed_form};
    }

    const double expo = 1.0 / (p + 1.0);
    std::vector<double> w(pop.size(), 0.0);
    double total = 0.0;
    for (GroupId g = 0; g < pop.size(); ++g) {
        if (sigma2[g] > 0.0) {
            w[g] = std::pow(pop[g] * sigma2[g], expo);
            total += w[g];
        }
    }
    for (double& x : w) x /= total;

    double objective = 0.0;
    for (GroupId g = 0; g < pop.size(); ++g) {
        if (sigma2[g] > 0.0) objective += pop[g] * sigma2[g] * std::pow(w[g], -p);
    }
    return {Allocation(std::move(w)), objective, false, AllocMethod::closed_form};
}

OptimalAllocationResult optimal_allocation_general(const ScalingModel& model,
                                                   const PopulationSpec& pop, double n) {
    require(model.size() == pop.size(), "optimal_allocation_general: size mismatch");
    require(n > 0.0, "optimal_allocation_general: n must be > 0");
    model.validate();

    std::vector<double> k(pop.size(), 0.0);   // p_g * gamma_g * sigma_g^2 * n^{-p_g}
    std::vector<double> expo(pop.size(), 0.0);
    bool any_positive = false;
    for (GroupId g = 0; g < pop.size(); ++g) {
        if (model[g].sigma2 > 0.0) {
            require(model[g].p > 0.0,
                    "optimal_allocation_general: p must be > 0 for groups with sigma2 > 0");
            k[g] = model[g].p * pop[g] * model[g].sigma2 * std::pow(n, -model[g].p);
            expo[g] = 1.0 / (model[g].p + 1.0);
            any_positive = true;
        }
    }
    if (!any_positive) {
        OptimalAllocationResult out{Allocation(pop.gamma()), 0.0, true,
                                    AllocMethod::water_filling};
        out.objective_value = forecast_population_risk(model, pop, out.alpha, n);
        return out;
    }

    // alpha_g(lambda) = (k_g / lambda)^{1/(p_g+1)} is continuous and strictly
    // decreasing in lambda; bisect on lambda until the simplex sum hits 1.
    auto sum_alpha = [&](double lambda) {
        double s = 0.0;
        for (GroupId g = 0; g < pop.size(); ++g) {
            if (k[g] > 0.0) s += std::pow(k[g] / lambda, expo[g]);
        }
        return s;
    };

    double lo = 1.0, hi = 1.0;
    int guard = 0;
    while (sum_alpha(hi) > 1.0) {
        hi *= 2.0;
        if (++guard > 4000) throw std::runtime_error("optimal_allocation_general: no upper bracket");
    }
    guard = 0;
    while (sum_alpha(lo) < 1.0) {
        lo /= 2.0;
        if (++guard > 4000) throw std::runtime_error("optimal_allocation_general: no lower bracket");
    }

    double lambda = 0.5 * (lo + hi);
    double sum = sum_alpha(lambda);
    int steps = 0;
    while (std::fabs(sum - 1.0) > 1e-10) {
        if (++steps > 200) {
            std::ostringstream oss;
            oss << "optimal_allocation_general: bisection did not converge; bracket ["
                << lo << ", " << hi << "], sum " << sum;
            throw std::runtime_error(oss.str());
        }
        if (sum > 1.0) {
            lo = lambda;
        } else {
            hi = lambda;
        }
        lambda = 0.5 * (lo + hi);
        sum = sum_alpha(lambda);
    }

    std::vector<double> alpha(pop.size(), 0.0);
    for (GroupId g = 0; g < pop.size(); ++g) {
        if (k[g] > 0.0) alpha[g] = std::pow(k[g] / lambda, expo[g]) / sum;
    }
    OptimalAllocationResult out{Allocation(std::move(alpha)), 0.0, false,
                                AllocMethod::water_filling};
    out.objective_value = forecast_population_risk(model, pop, out.alpha, n);
    return out;
}

OptimalAllocationResult minmax_allocation(const ScalingModel& model, double n) {
    require(model.size() == 2, "minmax_allocation: exactly two groups required");
    require(n >= 2.0, "minmax_allocation: n must be >= 2");
    model.validate();

    const bool flat_A = model[0].sigma2 == 0.0;
    const bool flat_B = model[1].sigma2 == 0.0;
    if (flat_A && flat_B) {
        OptimalAllocationResult out{Allocation({0.5, 0.5}), 0.0, true, AllocMethod::bisection};
        out.objective_value = std::max(forecast_group_risk(model, 0, 0.5 * n, n),
                                       forecast_group_risk(model, 1, 0.5 * n, n));
        return out;
    }
    for (GroupId g = 0; g < 2; ++g) {
        if (model[g].sigma2 > 0.0) {
            require(model[g].p > 0.0,
                    "minmax_allocation: p must be > 0 for groups with sigma2 > 0");
        }
    }

    const double lo_bound = 1.0 / n;          // at least one sample per group
    const double hi_bound = 1.0 - 1.0 / n;
    auto loss_A = [&](double a) { return forecast_group_risk(model, 0, a * n, n); };
    auto loss_B = [&](double a) { return forecast_group_risk(model, 1, (1.0 - a) * n, n); };
    auto gap = [&](double a) { return loss_A(a) - loss_B(a); };  // strictly decreasing

    double alpha_A;
    if (gap(lo_bound) <= 0.0) {
        alpha_A = lo_bound;    // B's curve dominates everywhere
    } else if (gap(hi_bound) >= 0.0) {
        alpha_A = hi_bound;    // A's curve dominates everywhere
    } else {
        double lo = lo_bound, hi = hi_bound;
        for (int step = 0; step < 200 && (hi - lo) > 1e-15; ++step) {
            const double mid = 0.5 * (lo + hi);
            if (gap(mid) > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        alpha_A = 0.5 * (lo + hi);
    }

    OptimalAllocationResult out{Allocation({alpha_A, 1.0 - alpha_A}), 0.0, false,
                                AllocMethod::bisection};
    out.objective_value = std::max(loss_A(alpha_A), loss_B(alpha_A));
    return out;
}

std::vector<Corollary1Row> corollary1_check(const PopulationSpec& pop, double p) {
    require(p > 0.0, "corollary1_check: p must be > 0");
    const std::vector<double> equal_sigma(pop.size(), 1.0);
    const OptimalAllocationResult res = optimal_allocation_closed_form(pop, equal_sigma, p);
    const double threshold = 1.0 / static_cast<double>(pop.size());
    std::vector<Corollary1Row> rows;
    for (GroupId g = 0; g < pop.size(); ++g) {
        if (pop[g] <= threshold) {
            // Tiny slack so exact-equality cases (uniform gamma) report as holding.
            const bool holds = res.alpha[g] + 1e-12 >= pop[g];
            rows.push_back({g, pop[g], res.alpha[g], holds});
        }
    }
    return rows;
}

Corollary2Bounds corollary2_bounds(double gamma_A, double sigma2_A, double sigma2_B,
                                   double p) {
    require(gamma_A > 0.0 && gamma_A < 0.5, "group A must be the minority");
    require(sigma2_A > 0.0 && sigma2_B > 0.0, "corollary2_bounds: sigma2 must be > 0");
    require(p > 0.0, "corollary2_bounds: p must be > 0");
    const double gamma_B = 1.0 - gamma_A;
    const double expo = 1.0 / (p + 1.0);
    const double s_A = std::pow(sigma2_A, expo);
    const double s_B = std::pow(sigma2_B, expo);
    Corollary2Bounds out;
    out.lower = gamma_A * s_A / (gamma_A * s_A + gamma_B * s_B);
    out.upper = s_A / (s_A + s_B);
    const double wA = std::pow(gamma_A * sigma2_A, expo);
    const double wB = std::pow(gamma_B * sigma2_B, expo);
    out.alpha_star_A = wA / (wA + wB);
    return out;
}

} // namespace allocplan
