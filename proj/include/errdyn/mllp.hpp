#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "errdyn/diag.hpp"
#include "errdyn/net.hpp"
#include "errdyn/rng.hpp"

namespace errdyn {

// Coordinate-wise learned optimizer: phi maps squashed per-coordinate
// features [g_i, v_i, b, nu, s] to raw (omega, zeta, alpha) outputs.
struct MetaOptimizer {
    DenseNet phi;
    double alpha_max = 0.1;
    double epsilon = 1e-8;
    double gamma = 0.9;  // first-moment decay of the inner loop
    double eta = 0.9;    // second-moment decay of the inner loop
    double tau = 0.25;   // alignment correction strength
    DiagCoeffs diag;
};

MetaOptimizer make_meta(std::uint64_t seed, double alpha_max = 0.1,
                        const std::vector<Eigen::Index>& hidden = {16, 16});

struct MetaTaskConfig {
    std::string kind = "noisy_quadratic";  // or "regression"
    int dimension = 10;
    double curv_lo = 0.1;
    double curv_hi = 10.0;
    double grad_noise = 0.3;
    double loss_noise = 0.05;
    int batch_size = 8;  // regression kind only
};

// One draw from the task distribution; all stochasticity is frozen at
// construction so repeated evaluations are common-random-number comparable.
class MetaTask {
public:
    MetaTask(const MetaTaskConfig& config, int K, std::uint64_t seed);

    int dim() const { return int(lambda_.size()); }
    int horizon() const { return K_; }

    // Observed loss and gradient at inner step k (0-based).
    std::pair<double, Eigen::VectorXd> loss_and_grad(
        const Eigen::Ref<const Eigen::VectorXd>& theta, int k) const;

    // Noise-free objective.
    double true_loss(const Eigen::Ref<const Eigen::VectorXd>& theta) const;

private:
    int K_;
    Eigen::VectorXd lambda_;
    Eigen::VectorXd opt_;
    Eigen::MatrixXd grad_noise_;  // (K, d)
    Eigen::VectorXd loss_noise_;  // (K)
    std::vector<Eigen::MatrixXd> batches_x_;  // regression kind
    std::vector<Eigen::VectorXd> batches_y_;
    bool regression_ = false;
};

struct InnerLoopState {
    Eigen::VectorXd theta;
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    DiagnosticState diag;
    int t = 0;
    int K = 0;

    InnerLoopState(int dim, int horizon, const DiagCoeffs& coeffs)
        : theta(Eigen::VectorXd::Zero(dim)), m(Eigen::VectorXd::Zero(dim)),
          v(Eigen::VectorXd::Zero(dim)), K(horizon) {
        diag.coeffs = coeffs;
    }
};

struct InnerStepInfo {
    int t = 0;
    double loss = 0.0;
    double alpha_mean = 0.0, alpha_min = 0.0, alpha_max = 0.0;
    double update_norm = 0.0;
    double bound = 0.0;  // alpha_max * |(|omega|+|zeta|) .* g_hat|
    double b = 0.0, nu = 0.0, s = 0.0;
    double rho_bias = 0.0, rho_noise = 0.0;
};

// Raised when the network emits a non-finite output; adapt() flags the task.
struct InnerLoopFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// 2/pi * atan(x), applied to every network input
double squash(double x);

// Per-coordinate feature matrix, one column per coordinate, rows
// [g_i, v_i, b, nu, s], all squashed.
Eigen::MatrixXd features(const Eigen::Ref<const Eigen::VectorXd>& g,
                         const Eigen::Ref<const Eigen::VectorXd>& v,
                         const DiagnosticSnapshot& snap);

// One learned-optimizer step; diagnostics advance first, then the gated,
// normalized two-branch update is applied.
InnerStepInfo inner_step(InnerLoopState& state,
                         const Eigen::Ref<const Eigen::VectorXd>& g,
                         double loss, const MetaOptimizer& meta);

// Runs K inner steps from theta=0; returns the post-adaptation true loss.
double adapt(const MetaTask& task, const MetaOptimizer& meta, int K,
             std::vector<InnerStepInfo>* rows = nullptr);

struct EsConfig {
    int pairs = 8;          // population 2*pairs
    double sigma = 0.05;
    double lr_meta = 0.1;
    int batch = 8;          // fresh tasks per meta-iteration
    int iters = 300;
    int val_tasks = 32;
    int val_every = 10;
    std::uint64_t val_seed_base = 90000;
    std::uint64_t train_seed_base = 0;  // offset by meta seed inside
};

struct MetaTrainResult {
    MetaOptimizer meta;          // best-validation parameters
    double best_val = 0.0;
    double initial_val = 0.0;
    std::vector<std::pair<int, double>> val_curve;
    int skipped_pairs = 0;
};

MetaTrainResult meta_train(const MetaOptimizer& init, const MetaTaskConfig& tc,
                           int K, const EsConfig& es, std::uint64_t meta_seed);

// Versioned flat-vector serialization: text header (dims, activations,
// scalars) followed by one hexfloat parameter per line.
void save_meta(const MetaOptimizer& meta, const std::string& path);
MetaOptimizer load_meta(const std::string& path);

}  // namespace errdyn
