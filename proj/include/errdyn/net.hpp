#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

#include "errdyn/rng.hpp"

namespace errdyn {

enum class Act { identity, tanh, relu, softplus, sigmoid };

enum class LossKind { mse, logistic };

struct Layer {
    Eigen::MatrixXd W;  // (out, in)
    Eigen::VectorXd b;  // (out)
    Act act = Act::identity;
};

// Dense feed-forward net; samples are columns.
struct DenseNet {
    std::vector<Layer> layers;

    Eigen::Index in_dim() const { return layers.front().W.cols(); }
    Eigen::Index out_dim() const { return layers.back().W.rows(); }
    Eigen::Index param_count() const;
};

// Uniform init in [-sqrt(1/fan_in), +sqrt(1/fan_in)] for weights and biases.
DenseNet make_net(const std::vector<Eigen::Index>& dims,
                  const std::vector<Act>& acts, Rng& rng);

Eigen::VectorXd apply_act(Act act, const Eigen::VectorXd& z);

Eigen::VectorXd forward(const DenseNet& net, const Eigen::VectorXd& input);
Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& inputs);

// Parameters as one flat vector: per layer, W in row-major order, then b.
Eigen::VectorXd flatten(const DenseNet& net);
void unflatten(const Eigen::Ref<const Eigen::VectorXd>& flat, DenseNet& net);

// Mean batch loss and its exact parameter gradient (flat layout).
// mse: mean over samples of 0.5*|f(x)-y|^2 (no stray factor of 2 in grads).
// logistic: mean over samples of sum_j softplus(z_j) - y_j*z_j, y in {0,1},
// where z is the raw network output.
std::pair<double, Eigen::VectorXd> loss_and_grad(const DenseNet& net,
                                                 const Eigen::MatrixXd& inputs,
                                                 const Eigen::MatrixXd& targets,
                                                 LossKind kind);

// Worst per-coordinate deviation between the analytic gradient and central
// finite differences, relative to the overall gradient scale
// (max-norm of both gradients). h must be positive.
double fd_check(const DenseNet& net, const Eigen::MatrixXd& inputs,
                const Eigen::MatrixXd& targets, LossKind kind, double h);

}  // namespace errdyn
