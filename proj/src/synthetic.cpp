#include "allocplan/synthetic.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

#include "allocplan/parallel.hpp"

namespace allocplan {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

Eigen::MatrixXd cholesky_factor(const LinearGroupModel& model) {
    const auto d = static_cast<Eigen::Index>(model.dim());
    if (model.feature_cov.empty()) {
        return Eigen::MatrixXd::Identity(d, d);
    }
    Eigen::MatrixXd cov(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            cov(i, j) = model.feature_cov[i][j];
        }
    }
    require((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
            "LinearGroupModel: feature_cov must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    require(llt.info() == Eigen::Success,
            "LinearGroupModel: feature_cov must be positive-definite");
    return llt.matrixL();
}

// One record for group g: features L z, label beta.x + c_g + sd * eps.
Record draw_record(const LinearGroupModel& model, const Eigen::MatrixXd& chol, GroupId g,
                   RngStream& stream) {
    const std::size_t d = model.dim();
    Record r;
    r.features.resize(d);
    Eigen::VectorXd z(static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k) z[static_cast<Eigen::Index>(k)] = stream.next_gaussian();
    const Eigen::VectorXd x = chol * z;
    double dot = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        r.features[k] = x[static_cast<Eigen::Index>(k)];
        dot += model.beta[k] * r.features[k];
    }
    r.label = dot + model.intercepts[g] + model.noise_sd * stream.next_gaussian();
    r.group = g;
    return r;
}

} // namespace

void LinearGroupModel::validate() const {
    require(!intercepts.empty(), "LinearGroupModel: needs at least one group");
    require(noise_sd > 0.0, "LinearGroupModel: noise_sd must be > 0");
    if (!feature_cov.empty()) {
        require(feature_cov.size() == dim(), "LinearGroupModel: feature_cov dimension mismatch");
        for (const auto& row : feature_cov) {
            require(row.size() == dim(), "LinearGroupModel: feature_cov must be square");
        }
    }
}

GroupedSample generate_linear_group_data(const LinearGroupModel& model,
                                         const GroupCounts& counts, std::uint64_t seed) {
    return generate_linear_group_data(model, counts, RngStream(seed));
}

GroupedSample generate_linear_group_data(const LinearGroupModel& model,
                                         const GroupCounts& counts, const RngStream& root) {
    model.validate();
    require(counts.size() == model.num_groups(),
            "generate_linear_group_data: counts/groups mismatch");
    const Eigen::MatrixXd chol = cholesky_factor(model);
    GroupedSample sample;
    sample.num_groups = model.num_groups();
    sample.records.reserve(static_cast<std::size_t>(counts.n()));
    for (GroupId g = 0; g < counts.size(); ++g) {
        RngStream stream = root.substream(g);
        for (std::int64_t i = 0; i < counts[g]; ++i) {
            sample.records.push_back(draw_record(model, chol, g, stream));
        }
    }
    return sample;
}

OlsGroupFit ols_with_group_dummies(const GroupedSample& sample) {
    const std::size_t G = sample.num_groups;
    require(G >= 1 && !sample.records.empty(), "ols_with_group_dummies: empty sample");
    const std::size_t d = sample.records.front().features.size();
    const auto N = static_cast<Eigen::Index>(sample.records.size());
    const auto cols = static_cast<Eigen::Index>(G + d);
    require(sample.records.size() >= G + d,
            "ols_with_group_dummies: need at least d + |G| records");

    // Center features by the overall sample mean; the dummy columns span the
    // constant, so this changes only the intercept coordinates.
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    for (const Record& r : sample.records) {
        require(r.features.size() == d, "ols_with_group_dummies: ragged features");
        for (std::size_t k = 0; k < d; ++k) mean[static_cast<Eigen::Index>(k)] += r.features[k];
    }
    mean /= static_cast<double>(sample.records.size());

    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(N, cols);
    Eigen::VectorXd y(N);
    for (Eigen::Index i = 0; i < N; ++i) {
        const Record& r = sample.records[static_cast<std::size_t>(i)];
        Z(i, static_cast<Eigen::Index>(r.group)) = 1.0;
        for (std::size_t k = 0; k < d; ++k) {
            Z(i, static_cast<Eigen::Index>(G + k)) =
                r.features[k] - mean[static_cast<Eigen::Index>(k)];
        }
        y[i] = r.label;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z);
    if (qr.rank() < cols) {
        throw std::invalid_argument("ols_with_group_dummies: rank-deficient design");
    }
    const Eigen::VectorXd theta = qr.solve(y);

    OlsGroupFit fit;
    fit.beta_hat.resize(d);
    double shift = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        fit.beta_hat[k] = theta[static_cast<Eigen::Index>(G + k)];
        shift += fit.beta_hat[k] * mean[static_cast<Eigen::Index>(k)];
    }
    fit.intercepts_hat.resize(G);
    for (GroupId g = 0; g < G; ++g) {
        fit.intercepts_hat[g] = theta[static_cast<Eigen::Index>(g)] - shift;
    }
    return fit;
}

OlsRiskPrediction predict_ols_group_risk(const LinearGroupModel& model, std::int64_t n_g,
                                         std::int64_t n) {
    model.validate();
    require(n_g >= 1, "predict_ols_group_risk: n_g must be >= 1");
    const auto d = static_cast<double>(model.dim());
    if (static_cast<double>(n) <= d + 2.0) {
        throw std::invalid_argument("predict_ols_group_risk: Wishart moment undefined");
    }
    const double s2 = model.noise_sd * model.noise_sd;
    OlsRiskPrediction out;
    out.base = s2;
    out.intercept_term = s2 / static_cast<double>(n_g);
    out.shared_term = s2 * d / (static_cast<double>(n) - d - 1.0);
    out.mean_term_bound = s2 * d / (static_cast<double>(n_g) * (static_cast<double>(n) - d - 2.0));
    out.per_group_risk = out.base + out.intercept_term + out.shared_term;
    return out;
}

std::vector<double> empirical_group_risk(const LinearGroupModel& model,
                                         const GroupCounts& counts, std::int64_t eval_size,
                                         std::int64_t trials, std::uint64_t seed) {
    model.validate();
    require(trials >= 1, "empirical_group_risk: trials must be >= 1");
    require(eval_size >= 1, "empirical_group_risk: eval_size must be >= 1");
    const std::size_t G = model.num_groups();
    require(counts.size() == G, "empirical_group_risk: counts/groups mismatch");

    const Eigen::MatrixXd chol = cholesky_factor(model);
    const RngStream root(seed);
    std::vector<std::vector<double>> per_trial(static_cast<std::size_t>(trials));
    parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
        RngStream trial = root.substream(t);
        const GroupedSample train = generate_linear_group_data(model, counts, trial.substream(0));
        const OlsGroupFit fit = ols_with_group_dummies(train);

        std::vector<double> risks(G, 0.0);
        RngStream eval_root = trial.substream(1);
        for (GroupId g = 0; g < G; ++g) {
            RngStream eval = eval_root.substream(g);
            double se_sum = 0.0;
            for (std::int64_t i = 0; i < eval_size; ++i) {
                const Record r = draw_record(model, chol, g, eval);
                double pred = fit.intercepts_hat[g];
                for (std::size_t k = 0; k < r.features.size(); ++k) {
                    pred += fit.beta_hat[k] * r.features[k];
                }
                se_sum += (pred - r.label) * (pred - r.label);
            }
            risks[g] = se_sum / static_cast<double>(eval_size);
        }
        per_trial[t] = std::move(risks);
    });

    std::vector<double> out(G, 0.0);
    for (const auto& risks : per_trial) {
        for (GroupId g = 0; g < G; ++g) out[g] += risks[g];
    }
    for (double& r : out) r /= static_cast<double>(trials);
    return out;
}

std::vector<LossObservation> power_law_loss_oracle(const ScalingModel& model,
                                                   const GroupCounts& counts, double noise_sd,
                                                   std::uint64_t seed) {
    return power_law_loss_oracle(model, counts, noise_sd, RngStream(seed));
}

std::vector<LossObservation> power_law_loss_oracle(const ScalingModel& model,
                                                   const GroupCounts& counts, double noise_sd,
                                                   const RngStream& root) {
    model.validate();
    require(counts.size() == model.size(), "power_law_loss_oracle: counts/groups mismatch");
    require(noise_sd >= 0.0, "power_law_loss_oracle: noise_sd must be >= 0");
    std::vector<LossObservation> out;
    out.reserve(counts.size());
    for (GroupId g = 0; g < counts.size(); ++g) {
        require(counts[g] >= 1, "power_law_loss_oracle: every group needs n_g >= 1");
        const double clean = forecast_group_risk(model, g, static_cast<double>(counts[g]),
                                                 static_cast<double>(counts.n()));
        RngStream stream = root.substream(g);
        const double noisy = clean + noise_sd * stream.next_gaussian();
        LossObservation obs;
        obs.group = g;
        obs.n_g = counts[g];
        obs.n = counts.n();
        obs.loss = std::max(noisy, 0.0);
        out.push_back(obs);
    }
    return out;
}

} // namespace allocplan
