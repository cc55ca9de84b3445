#include "allocplan/scaling_fit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

#include "allocplan/parallel.hpp"
#include "allocplan/rng.hpp"

namespace allocplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double y) { return std::log(y / (1.0 - y)); }

// Unconstrained coordinates u -> box-constrained parameters:
//   sigma2 = u0^2, p = 2*sigmoid(u1), tau2 = u2^2, q = 2*sigmoid(u3), delta = u4^2.
struct Theta {
    double sigma2, p, tau2, q, delta;
};

Theta to_theta(const Eigen::Matrix<double, 5, 1>& u) {
    return {u[0] * u[0], 2.0 * sigmoid(u[1]), u[2] * u[2], 2.0 * sigmoid(u[3]), u[4] * u[4]};
}

struct Design {
    std::vector<double> ng;      // n_g per observation
    std::vector<double> ntot;    // n per observation
    std::vector<double> loss;
    std::vector<double> log_ng;
    std::vector<double> log_n;
};

double sse_at(const Design& d, const Theta& t) {
    double sse = 0.0;
    for (std::size_t i = 0; i < d.loss.size(); ++i) {
        const double m = t.sigma2 * std::exp(-t.p * d.log_ng[i]) +
                         t.tau2 * std::exp(-t.q * d.log_n[i]) + t.delta;
        const double r = d.loss[i] - m;
        sse += r * r;
    }
    return sse;
}

// Residuals and Jacobian of the model wrt the unconstrained coordinates.
void residuals_and_jacobian(const Design& d, const Eigen::Matrix<double, 5, 1>& u,
                            Eigen::VectorXd& res, Eigen::MatrixXd& jac) {
    const Theta t = to_theta(u);
    const double s1 = sigmoid(u[1]);
    const double s3 = sigmoid(u[3]);
    const double dp_du = 2.0 * s1 * (1.0 - s1);
    const double dq_du = 2.0 * s3 * (1.0 - s3);
    const std::size_t N = d.loss.size();
    for (std::size_t i = 0; i < N; ++i) {
        const double pow_g = std::exp(-t.p * d.log_ng[i]);
        const double pow_n = std::exp(-t.q * d.log_n[i]);
        const double m = t.sigma2 * pow_g + t.tau2 * pow_n + t.delta;
        res[i] = d.loss[i] - m;
        // d(residual)/du = -d(model)/du
        jac(i, 0) = -(2.0 * u[0] * pow_g);
        jac(i, 1) = -(-t.sigma2 * d.log_ng[i] * pow_g * dp_du);
        jac(i, 2) = -(2.0 * u[2] * pow_n);
        jac(i, 3) = -(-t.tau2 * d.log_n[i] * pow_n * dq_du);
        jac(i, 4) = -(2.0 * u[4]);
    }
}

struct LmOutcome {
    Eigen::Matrix<double, 5, 1> u;
    double sse = kInf;
};

LmOutcome levenberg_marquardt(const Design& d, Eigen::Matrix<double, 5, 1> u) {
    const std::size_t N = d.loss.size();
    Eigen::VectorXd res(N);
    Eigen::MatrixXd jac(N, 5);
    residuals_and_jacobian(d, u, res, jac);
    double sse = res.squaredNorm();
    double lambda = 1e-3;

    for (int iter = 0; iter < 300; ++iter) {
        const Eigen::Matrix<double, 5, 5> JtJ = jac.transpose() * jac;
        const Eigen::Matrix<double, 5, 1> g = jac.transpose() * res;
        bool stepped = false;
        for (int attempt = 0; attempt < 40; ++attempt) {
            Eigen::Matrix<double, 5, 5> H = JtJ;
            for (int k = 0; k < 5; ++k) {
                H(k, k) += lambda * std::max(JtJ(k, k), 1e-12);
            }
            const Eigen::Matrix<double, 5, 1> step = H.ldlt().solve(-g);
            const Eigen::Matrix<double, 5, 1> u_try = u + step;
            const double sse_try = sse_at(d, to_theta(u_try));
            if (std::isfinite(sse_try) && sse_try < sse) {
                const double improvement = sse - sse_try;
                u = u_try;
                sse = sse_try;
                lambda = std::max(lambda / 3.0, 1e-12);
                stepped = true;
                residuals_and_jacobian(d, u, res, jac);
                if (improvement <= 1e-14 * (sse + 1e-14)) {
                    return {u, sse};
                }
                break;
            }
            lambda *= 4.0;
            if (lambda > 1e16) break;
        }
        if (!stepped) break;
    }
    return {u, sse};
}

FitStdErr gauss_newton_stderr(const Design& d, const Theta& t, double sse) {
    const std::size_t N = d.loss.size();
    if (N <= 5) {
        return {kInf, kInf, kInf, kInf, kInf};
    }
    // Jacobian wrt the original parameters (sigma2, p, tau2, q, delta).
    Eigen::MatrixXd J(N, 5);
    for (std::size_t i = 0; i < N; ++i) {
        const double pow_g = std::exp(-t.p * d.log_ng[i]);
        const double pow_n = std::exp(-t.q * d.log_n[i]);
        J(i, 0) = pow_g;
        J(i, 1) = -t.sigma2 * d.log_ng[i] * pow_g;
        J(i, 2) = pow_n;
        J(i, 3) = -t.tau2 * d.log_n[i] * pow_n;
        J(i, 4) = 1.0;
    }
    const double s2 = sse / static_cast<double>(N - 5);
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(JtJ);
    FitStdErr out{kInf, kInf, kInf, kInf, kInf};
    if (lu.isInvertible()) {
        const Eigen::MatrixXd cov = s2 * lu.inverse();
        auto pick = [&](int k) {
            const double v = cov(k, k);
            return (std::isfinite(v) && v >= 0.0) ? std::sqrt(v) : kInf;
        };
        out = {pick(0), pick(1), pick(2), pick(3), pick(4)};
    }
    return out;
}

Eigen::Matrix<double, 5, 1> initial_point(const Design& d, int start, RngStream stream) {
    std::vector<double> sorted_ng(d.ng);
    std::sort(sorted_ng.begin(), sorted_ng.end());
    const double med_ng = sorted_ng[sorted_ng.size() / 2];
    std::vector<double> sorted_n(d.ntot);
    std::sort(sorted_n.begin(), sorted_n.end());
    const double med_n = sorted_n[sorted_n.size() / 2];

    const double loss_min = *std::min_element(d.loss.begin(), d.loss.end());
    const double loss_max = *std::max_element(d.loss.begin(), d.loss.end());
    const double span = std::max(loss_max - loss_min, 1e-8);

    double p0 = stream.next_uniform(0.1, 1.9);
    double q0 = stream.next_uniform(0.1, 1.9);
    double delta0 = stream.next_double() * std::max(loss_min, 0.0);
    double sigma2_0 = span * std::pow(med_ng, p0) * std::pow(10.0, stream.next_uniform(-1.0, 1.0));
    double tau2_0 = span * std::pow(med_n, q0) * std::pow(10.0, stream.next_uniform(-1.0, 1.0));

    // A few canonical shapes ahead of the random ones.
    if (start == 0) {
        p0 = 0.5;
        q0 = 0.5;
        delta0 = 0.5 * std::max(loss_min, 0.0);
        sigma2_0 = span * std::pow(med_ng, p0);
        tau2_0 = span * std::pow(med_n, q0);
    } else if (start == 1) {    // own-group term dominant
        tau2_0 = 1e-6 * span;
    } else if (start == 2) {    // pooled term dominant
        sigma2_0 = 1e-6 * span;
    }

    Eigen::Matrix<double, 5, 1> u;
    u[0] = std::sqrt(std::max(sigma2_0, 1e-12));
    u[1] = logit(std::clamp(p0 / 2.0, 1e-6, 1.0 - 1e-6));
    u[2] = std::sqrt(std::max(tau2_0, 1e-12));
    u[3] = logit(std::clamp(q0 / 2.0, 1e-6, 1.0 - 1e-6));
    u[4] = std::sqrt(std::max(delta0, 1e-12));
    return u;
}

} // namespace

void LossObservation::validate() const {
    if (n_g < 1) throw std::invalid_argument("LossObservation: n_g must be >= 1");
    if (n < n_g) throw std::invalid_argument("LossObservation: n must be >= n_g");
    if (!std::isfinite(loss) || loss < 0.0) {
        throw std::invalid_argument("LossObservation: loss must be finite and >= 0");
    }
}

FitResult fit_group_scaling(const std::vector<LossObservation>& observations, GroupId group,
                            std::int64_t m_min, int starts, std::uint64_t seed) {
    if (starts < 1) throw std::invalid_argument("fit_group_scaling: starts must be >= 1");
    if (m_min < 1) throw std::invalid_argument("fit_group_scaling: m_min must be >= 1");

    Design d;
    std::int64_t excluded = 0;
    std::set<std::int64_t> distinct_ng, distinct_n;
    for (const LossObservation& obs : observations) {
        if (obs.group != group) continue;
        obs.validate();
        if (obs.n_g < m_min) {
            ++excluded;
            continue;
        }
        d.ng.push_back(static_cast<double>(obs.n_g));
        d.ntot.push_back(static_cast<double>(obs.n));
        d.loss.push_back(obs.loss);
        d.log_ng.push_back(std::log(static_cast<double>(obs.n_g)));
        d.log_n.push_back(std::log(static_cast<double>(obs.n)));
        distinct_ng.insert(obs.n_g);
        distinct_n.insert(obs.n);
    }
    if (d.loss.size() < 6) {
        throw std::invalid_argument(
            "fit_group_scaling: fewer than 6 usable observations (need one more than the 5 "
            "free parameters)");
    }
    if (distinct_ng.size() < 2) {
        throw std::invalid_argument("fit_group_scaling: need at least two distinct n_g values");
    }
    if (distinct_n.size() < 2) {
        throw std::invalid_argument("fit_group_scaling: need at least two distinct n values");
    }

    const RngStream root(seed);
    std::vector<LmOutcome> outcomes(static_cast<std::size_t>(starts));
    parallel_for(static_cast<std::size_t>(starts), [&](std::size_t s) {
        outcomes[s] = levenberg_marquardt(d, initial_point(d, static_cast<int>(s),
                                                           root.substream(s)));
    });

    // Winner by (sse, start index): independent of scheduling.
    std::size_t best = 0;
    for (std::size_t s = 1; s < outcomes.size(); ++s) {
        if (outcomes[s].sse < outcomes[best].sse) best = s;
    }
    Theta theta = to_theta(outcomes[best].u);
    double sse = outcomes[best].sse;

    // The constant fit delta = mean(loss) is always admissible; never report
    // anything worse than it.
    double loss_mean = 0.0;
    for (double l : d.loss) loss_mean += l;
    loss_mean /= static_cast<double>(d.loss.size());
    double const_sse = 0.0;
    for (double l : d.loss) const_sse += (l - loss_mean) * (l - loss_mean);
    if (const_sse < sse) {
        theta = {0.0, 1.0, 0.0, 1.0, loss_mean};
        sse = const_sse;
    }

    FitResult out;
    out.group = group;
    out.params.sigma2 = theta.sigma2;
    out.params.p = theta.p;
    out.params.tau2 = theta.tau2;
    out.params.q = theta.q;
    out.params.delta = theta.delta;
    out.params.m_min = m_min;
    out.params.validate();
    out.residual_sse = sse;
    out.stderr_ = gauss_newton_stderr(d, theta, sse);
    out.n_observations_used = static_cast<std::int64_t>(d.loss.size());
    out.excluded_below_m_min = excluded;
    return out;
}

std::vector<GroupCounts> design_subset_grid(const std::vector<std::int64_t>& n_max_per_group,
                                            const std::vector<double>& ratios,
                                            const std::vector<double>& fractions,
                                            const std::vector<FractionSkipRule>& skip_rules) {
    if (n_max_per_group.size() != 2) {
        throw std::invalid_argument("design_subset_grid: exactly two groups required");
    }
    if (ratios.empty() || fractions.empty()) {
        throw std::invalid_argument("design_subset_grid: ratios and fractions must be non-empty");
    }
    for (double r : ratios) {
        if (!(r > 0.0 && r <= 1.0)) {
            throw std::invalid_argument("design_subset_grid: ratios must lie in (0, 1]");
        }
    }
    for (double x : fractions) {
        if (!(x > 0.0 && x <= 1.0)) {
            throw std::invalid_argument("design_subset_grid: fractions must lie in (0, 1]");
        }
    }

    auto skipped = [&](double ratio, double fraction) {
        for (const FractionSkipRule& rule : skip_rules) {
            if (ratio < rule.ratio_below) {
                for (double f : rule.fractions) {
                    if (std::fabs(f - fraction) < 1e-12) return true;
                }
            }
        }
        return false;
    };

    std::set<std::pair<std::int64_t, std::int64_t>> pairs;
    // direction 0: ratio applies as A:B with B at its cap; direction 1 swaps roles.
    for (int direction = 0; direction < 2; ++direction) {
        const double cap_minor = static_cast<double>(n_max_per_group[direction == 0 ? 0 : 1]);
        const double cap_major = static_cast<double>(n_max_per_group[direction == 0 ? 1 : 0]);
        for (double ratio : ratios) {
            // Largest pair (ratio*s, s) under both caps.
            const double base = std::min(cap_major, cap_minor / ratio);
            for (double x : fractions) {
                if (skipped(ratio, x)) continue;
                const std::int64_t minor = std::llround(x * base * ratio);
                const std::int64_t major = std::llround(x * base);
                if (minor < 1 || major < 1) continue;
                if (direction == 0) {
                    pairs.emplace(minor, major);
                } else {
                    pairs.emplace(major, minor);
                }
            }
        }
    }
    if (pairs.empty()) {
        throw std::invalid_argument("design_subset_grid: design is empty after skip rules");
    }
    std::vector<GroupCounts> out;
    out.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
        out.push_back(GroupCounts({a, b}));
    }
    return out;
}

FitDiagnostics fit_diagnostics(const FitResult& fit,
                               const std::vector<LossObservation>& observations) {
    FitDiagnostics out;
    ScalingModel model;
    model.per_group.assign(fit.group + 1, GroupScaling{});
    model.per_group[fit.group] = fit.params;

    double loss_mean = 0.0;
    std::int64_t used = 0;
    for (const LossObservation& obs : observations) {
        if (obs.group != fit.group || obs.n_g < fit.params.m_min) continue;
        loss_mean += obs.loss;
        ++used;
    }
    if (used == 0) throw std::invalid_argument("fit_diagnostics: no usable observations");
    loss_mean /= static_cast<double>(used);

    double sse = 0.0, const_sse = 0.0;
    for (const LossObservation& obs : observations) {
        if (obs.group != fit.group || obs.n_g < fit.params.m_min) continue;
        const double predicted = forecast_group_risk(model, fit.group,
                                                     static_cast<double>(obs.n_g),
                                                     static_cast<double>(obs.n));
        const double r = obs.loss - predicted;
        out.residuals.push_back(r);
        sse += r * r;
        const_sse += (obs.loss - loss_mean) * (obs.loss - loss_mean);
    }
    out.r_squared = (const_sse > 0.0) ? 1.0 - sse / const_sse : (sse == 0.0 ? 1.0 : 0.0);

    auto flag = [&](const char* name, double est, double se) {
        if (se > std::fabs(est)) out.wide_stderr_params.emplace_back(name);
    };
    flag("sigma2", fit.params.sigma2, fit.stderr_.sigma2);
    flag("p", fit.params.p, fit.stderr_.p);
    flag("tau2", fit.params.tau2, fit.stderr_.tau2);
    flag("q", fit.params.q, fit.stderr_.q);
    flag("delta", fit.params.delta, fit.stderr_.delta);

    out.note = "Power-law parameter estimates can vary with the inclusion threshold and the "
               "subsetting design; a range of parameter values may fit the data comparably "
               "well. Alternative functional forms (log-normal, exponential) are not compared "
               "here.";
    return out;
}

} // namespace allocplan
