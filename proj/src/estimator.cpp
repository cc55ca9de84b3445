#include "allocplan/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "allocplan/parallel.hpp"

namespace allocplan {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

} // namespace

void GroupLossMoments::validate() const {
    require(!mean.empty() && mean.size() == variance.size(),
            "GroupLossMoments: mean and variance must have one entry per group");
    for (double m : mean) require(std::isfinite(m), "GroupLossMoments: non-finite mean");
    for (double v : variance) {
        require(std::isfinite(v) && v >= 0.0, "GroupLossMoments: variance must be >= 0");
    }
}

WeightedEstimatorSpec::WeightedEstimatorSpec(std::vector<double> w, Allocation a,
                                             std::int64_t n_total)
    : weights(std::move(w)), alpha(std::move(a)), n(n_total) {
    require(weights.size() == alpha.size(),
            "WeightedEstimatorSpec: one weight per group required");
    require(n > 0, "WeightedEstimatorSpec: n must be > 0");
    double c = 0.0;
    for (GroupId g = 0; g < weights.size(); ++g) {
        require(std::isfinite(weights[g]) && weights[g] >= 0.0,
                "WeightedEstimatorSpec: weights must be >= 0");
        c += weights[g] * alpha[g];
    }
    require(c > 0.0, "WeightedEstimatorSpec: sum_g alpha_g w(g) must be > 0");
}

ImplicitTarget implicit_target(const WeightedEstimatorSpec& spec) {
    double c = 0.0;
    for (GroupId g = 0; g < spec.weights.size(); ++g) c += spec.weights[g] * spec.alpha[g];
    std::vector<double> gp(spec.weights.size());
    for (GroupId g = 0; g < spec.weights.size(); ++g) {
        gp[g] = spec.weights[g] * spec.alpha[g] / c;
    }
    return {Allocation(std::move(gp)), c};
}

double estimator_mean(const WeightedEstimatorSpec& spec, const GroupLossMoments& moments) {
    moments.validate();
    require(moments.size() == spec.weights.size(), "estimator_mean: group count mismatch");
    double out = 0.0;
    for (GroupId g = 0; g < spec.weights.size(); ++g) {
        out += spec.alpha[g] * spec.weights[g] * moments.mean[g];
    }
    return out;
}

double estimator_variance(const WeightedEstimatorSpec& spec, const GroupLossMoments& moments) {
    moments.validate();
    require(moments.size() == spec.weights.size(), "estimator_variance: group count mismatch");
    double out = 0.0;
    for (GroupId g = 0; g < spec.weights.size(); ++g) {
        out += spec.alpha[g] * spec.weights[g] * spec.weights[g] * moments.variance[g];
    }
    return out / static_cast<double>(spec.n);
}

OptimalPair optimal_pair(const WeightedEstimatorSpec& spec, const GroupLossMoments& moments) {
    moments.validate();
    require(moments.size() == spec.weights.size(), "optimal_pair: group count mismatch");
    for (double v : moments.variance) {
        if (v == 0.0) throw std::invalid_argument("optimal_pair: zero-variance group");
    }
    const ImplicitTarget target = implicit_target(spec);

    std::vector<double> alpha_star(spec.weights.size(), 0.0);
    double norm = 0.0;
    for (GroupId g = 0; g < spec.weights.size(); ++g) {
        alpha_star[g] = target.gamma_prime[g] * std::sqrt(moments.variance[g]);
        norm += alpha_star[g];
    }
    std::vector<double> w_star(spec.weights.size(), 0.0);
    for (GroupId g = 0; g < spec.weights.size(); ++g) {
        alpha_star[g] /= norm;
        if (alpha_star[g] > 0.0) {
            w_star[g] = target.c * target.gamma_prime[g] / alpha_star[g];
        }
    }
    return {std::move(w_star), Allocation(std::move(alpha_star))};
}

std::vector<double> iw_weights(const PopulationSpec& pop, const Allocation& alpha) {
    require(pop.size() == alpha.size(), "iw_weights: group count mismatch");
    std::vector<double> w(pop.size());
    for (GroupId g = 0; g < pop.size(); ++g) {
        if (alpha[g] == 0.0) {
            throw std::invalid_argument("iw_weights: unrepresented group " + std::to_string(g));
        }
        w[g] = pop[g] / alpha[g];
    }
    return w;
}

bool iw_high_variance(const std::vector<double>& weights) {
    return std::any_of(weights.begin(), weights.end(),
                       [](double w) { return w > kIwHighVarianceRatio; });
}

std::vector<double> gdro_convex_weights(const std::vector<double>& losses) {
    require(!losses.empty(), "gdro_convex_weights: empty losses");
    for (double l : losses) require(std::isfinite(l), "gdro_convex_weights: non-finite loss");
    const double max_loss = *std::max_element(losses.begin(), losses.end());
    std::size_t ties = 0;
    for (double l : losses) {
        if (l >= max_loss - kGdroTieTolerance) ++ties;
    }
    std::vector<double> w(losses.size(), 0.0);
    for (GroupId g = 0; g < losses.size(); ++g) {
        if (losses[g] >= max_loss - kGdroTieTolerance) w[g] = 1.0 / static_cast<double>(ties);
    }
    return w;
}

MonteCarloResult monte_carlo_estimator(const WeightedEstimatorSpec& spec,
                                       const std::vector<LossSampler>& samplers,
                                       std::int64_t trials, std::uint64_t seed) {
    require(trials >= 2, "monte_carlo_estimator: trials must be >= 2");
    require(samplers.size() == spec.weights.size(),
            "monte_carlo_estimator: one sampler per group required");
    const GroupCounts counts = counts_from_allocation(spec.alpha, spec.n).counts;
    for (GroupId g = 0; g < counts.size(); ++g) {
        require(counts[g] == 0 || static_cast<bool>(samplers[g]),
                "monte_carlo_estimator: missing sampler for sampled group");
    }

    const RngStream root(seed);
    std::vector<double> values(static_cast<std::size_t>(trials));
    parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
        RngStream trial = root.substream(t);
        double acc = 0.0;
        for (GroupId g = 0; g < counts.size(); ++g) {
            if (counts[g] == 0 || spec.weights[g] == 0.0) continue;
            RngStream gs = trial.substream(g);
            double group_sum = 0.0;
            for (std::int64_t i = 0; i < counts[g]; ++i) group_sum += samplers[g](gs);
            acc += spec.weights[g] * group_sum;
        }
        values[t] = acc / static_cast<double>(spec.n);
    });

    // Reduction in trial order, independent of the worker split.
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(trials);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, ss / static_cast<double>(trials - 1)};
}

} // namespace allocplan
