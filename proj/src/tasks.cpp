#include "errdyn/tasks.hpp"

#include <cmath>
#include <stdexcept>

namespace errdyn {

SupervisedTask::SupervisedTask(const TaskConfig& config) : config_(config) {
    if (!config.valid()) {
        throw std::invalid_argument("SupervisedTask: invalid config");
    }
    const int d = config.dimension;
    Rng rng(seed_chain(config.seed, 0x7a51));
    w0_.resize(d);
    for (int i = 0; i < d; ++i) w0_(i) = rng.normal() / std::sqrt(double(d));
    u_.resize(d);
    for (int i = 0; i < d; ++i) u_(i) = rng.normal();
    u_.normalize();
    lambda_ = Eigen::VectorXd::Ones(d);
    if (config.kind == TaskKind::ill_conditioned_valley && d > 1) {
        const double logc = std::log(config.condition_number);
        for (int i = 0; i < d; ++i) {
            lambda_(i) = std::exp(logc * double(i) / double(d - 1));
        }
    }
}

Eigen::VectorXd SupervisedTask::optimum(long step) const {
    switch (config_.kind) {
        case TaskKind::drifting_quadratic:
            return w0_ + config_.drift_rate * double(step) * u_;
        case TaskKind::regime_shift_regression:
            return step < config_.shift_step ? w0_ : Eigen::VectorXd(-w0_);
        case TaskKind::ill_conditioned_valley:
            return w0_;
    }
    return w0_;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> SupervisedTask::sample_batch(
    long step, int batch_size, std::uint64_t seed) const {
    if (batch_size < 1) {
        throw std::invalid_argument("sample_batch: batch_size must be >= 1");
    }
    const int d = config_.dimension;
    Rng rng(seed_chain(config_.seed, seed, std::uint64_t(step), 0xba7c));
    const Eigen::VectorXd w = optimum(step);
    Eigen::MatrixXd X(d, batch_size);
    Eigen::VectorXd y(batch_size);
    for (int c = 0; c < batch_size; ++c) {
        for (int i = 0; i < d; ++i) X(i, c) = std::sqrt(lambda_(i)) * rng.normal();
        y(c) = w.dot(X.col(c)) + config_.noise_std * rng.normal();
    }
    return {std::move(X), std::move(y)};
}

double SupervisedTask::loss_oracle(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                   long step) const {
    const Eigen::VectorXd r = theta - optimum(step);
    return 0.5 * r.dot(lambda_.cwiseProduct(r)) +
           0.5 * config_.noise_std * config_.noise_std;
}

std::pair<double, Eigen::VectorXd> SupervisedTask::loss_and_grad(
    const Eigen::Ref<const Eigen::VectorXd>& theta, long step,
    std::uint64_t seed) const {
    if (theta.size() != config_.dimension) {
        throw std::invalid_argument("loss_and_grad: dimension mismatch");
    }
    if (config_.batch_size == 0) {
        const Eigen::VectorXd r = theta - optimum(step);
        Eigen::VectorXd grad = lambda_.cwiseProduct(r);
        double loss = 0.5 * r.dot(grad);
        if (config_.noise_std > 0.0) {
            Rng rng(seed_chain(config_.seed, seed, std::uint64_t(step), 0x105e));
            loss += config_.noise_std * rng.normal();
        }
        return {loss, std::move(grad)};
    }
    auto [X, y] = sample_batch(step, config_.batch_size, seed);
    const Eigen::VectorXd resid = X.transpose() * theta - y;
    const double inv_b = 1.0 / double(config_.batch_size);
    return {0.5 * inv_b * resid.squaredNorm(), inv_b * (X * resid)};
}

TaskKind task_kind_from_string(const std::string& name) {
    if (name == "drifting_quadratic") return TaskKind::drifting_quadratic;
    if (name == "regime_shift_regression")
        return TaskKind::regime_shift_regression;
    if (name == "ill_conditioned_valley")
        return TaskKind::ill_conditioned_valley;
    throw std::invalid_argument("unknown task kind: " + name);
}

std::string to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::drifting_quadratic: return "drifting_quadratic";
        case TaskKind::regime_shift_regression:
            return "regime_shift_regression";
        case TaskKind::ill_conditioned_valley:
            return "ill_conditioned_valley";
    }
    return "?";
}

}  // namespace errdyn
