#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

#include "errdyn/rng.hpp"

namespace errdyn {

enum class TaskKind { drifting_quadratic, regime_shift_regression,
                      ill_conditioned_valley };

struct TaskConfig {
    TaskKind kind = TaskKind::drifting_quadratic;
    int dimension = 10;
    double drift_rate = 0.0;       // optimum units per step
    long shift_step = 0;           // regime_shift flip index
    double noise_std = 0.0;        // label noise std
    double condition_number = 1.0; // valley eigenvalue spread
    int batch_size = 8;            // 0: exact population loss/gradient
    std::uint64_t seed = 0;

    bool valid() const {
        return dimension >= 1 && noise_std >= 0.0 && condition_number >= 1.0 &&
               batch_size >= 0 && drift_rate >= 0.0;
    }
};

// Linear least-squares tasks over Gaussian inputs. All three kinds share the
// model y = w(step)^T x + noise; the input covariance and the motion of
// w(step) produce the drift / noise / curvature regimes.
class SupervisedTask {
public:
    explicit SupervisedTask(const TaskConfig& config);

    const TaskConfig& config() const { return config_; }
    int dim() const { return config_.dimension; }

    // True regression weights at a step.
    Eigen::VectorXd optimum(long step) const;
    // Input covariance diagonal (identity except for the valley).
    const Eigen::VectorXd& curvature() const { return lambda_; }

    // Draws a batch keyed by (seed, step); columns are samples.
    std::pair<Eigen::MatrixXd, Eigen::VectorXd> sample_batch(
        long step, int batch_size, std::uint64_t seed) const;

    // Exact population loss: 0.5*(theta-w)^T Lambda (theta-w) plus the
    // irreducible label-noise floor 0.5*noise_std^2 under sampled batches.
    double loss_oracle(const Eigen::Ref<const Eigen::VectorXd>& theta,
                       long step) const;

    // Empirical loss/gradient of 0.5*mean squared residual on a drawn batch.
    // With batch_size=0 the population objective is used instead and
    // noise_std acts as zero-mean observation noise on the returned loss.
    std::pair<double, Eigen::VectorXd> loss_and_grad(
        const Eigen::Ref<const Eigen::VectorXd>& theta, long step,
        std::uint64_t seed) const;

private:
    TaskConfig config_;
    Eigen::VectorXd w0_;      // base optimum / regression weights
    Eigen::VectorXd u_;       // unit drift direction
    Eigen::VectorXd lambda_;  // input covariance diagonal
};

TaskKind task_kind_from_string(const std::string& name);
std::string to_string(TaskKind kind);

}  // namespace errdyn
