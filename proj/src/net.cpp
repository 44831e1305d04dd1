#include "errdyn/net.hpp"

#include <cmath>
#include <stdexcept>

namespace errdyn {

namespace {

double act_scalar(Act act, double z) {
    switch (act) {
        case Act::identity: return z;
        case Act::tanh: return std::tanh(z);
        case Act::relu: return z > 0.0 ? z : 0.0;
        case Act::softplus:
            // overflow-safe: softplus(z) = max(z,0) + log1p(exp(-|z|))
            return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
        case Act::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    }
    return z;
}

// derivative expressed through the pre-activation z; relu'(0) = 0
double act_deriv(Act act, double z) {
    switch (act) {
        case Act::identity: return 1.0;
        case Act::tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Act::relu: return z > 0.0 ? 1.0 : 0.0;
        case Act::softplus: return 1.0 / (1.0 + std::exp(-z));
        case Act::sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-z));
            return s * (1.0 - s);
        }
    }
    return 1.0;
}

}  // namespace

Eigen::Index DenseNet::param_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers) n += l.W.size() + l.b.size();
    return n;
}

DenseNet make_net(const std::vector<Eigen::Index>& dims,
                  const std::vector<Act>& acts, Rng& rng) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1) {
        throw std::invalid_argument("make_net: dims/acts sizes inconsistent");
    }
    DenseNet net;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        Layer l;
        const double lim = std::sqrt(1.0 / double(dims[i]));
        l.W.resize(dims[i + 1], dims[i]);
        for (Eigen::Index r = 0; r < l.W.rows(); ++r)
            for (Eigen::Index c = 0; c < l.W.cols(); ++c)
                l.W(r, c) = rng.uniform(-lim, lim);
        l.b.resize(dims[i + 1]);
        for (Eigen::Index r = 0; r < l.b.size(); ++r)
            l.b(r) = rng.uniform(-lim, lim);
        l.act = acts[i];
        net.layers.push_back(std::move(l));
    }
    return net;
}

Eigen::VectorXd apply_act(Act act, const Eigen::VectorXd& z) {
    Eigen::VectorXd out(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) out(i) = act_scalar(act, z(i));
    return out;
}

Eigen::VectorXd forward(const DenseNet& net, const Eigen::VectorXd& input) {
    Eigen::VectorXd a = input;
    for (const auto& l : net.layers) {
        if (l.W.cols() != a.size()) {
            throw std::invalid_argument("forward: dimension mismatch");
        }
        a = apply_act(l.act, l.W * a + l.b);
    }
    return a;
}

Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& inputs) {
    Eigen::MatrixXd a = inputs;
    for (const auto& l : net.layers) {
        if (l.W.cols() != a.rows()) {
            throw std::invalid_argument("forward: dimension mismatch");
        }
        Eigen::MatrixXd z = (l.W * a).colwise() + l.b;
        for (Eigen::Index c = 0; c < z.cols(); ++c)
            for (Eigen::Index r = 0; r < z.rows(); ++r)
                z(r, c) = act_scalar(l.act, z(r, c));
        a = std::move(z);
    }
    return a;
}

Eigen::VectorXd flatten(const DenseNet& net) {
    Eigen::VectorXd flat(net.param_count());
    Eigen::Index o = 0;
    for (const auto& l : net.layers) {
        for (Eigen::Index r = 0; r < l.W.rows(); ++r)
            for (Eigen::Index c = 0; c < l.W.cols(); ++c) flat(o++) = l.W(r, c);
        for (Eigen::Index r = 0; r < l.b.size(); ++r) flat(o++) = l.b(r);
    }
    return flat;
}

void unflatten(const Eigen::Ref<const Eigen::VectorXd>& flat, DenseNet& net) {
    if (flat.size() != net.param_count()) {
        throw std::invalid_argument("unflatten: length mismatch");
    }
    Eigen::Index o = 0;
    for (auto& l : net.layers) {
        for (Eigen::Index r = 0; r < l.W.rows(); ++r)
            for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = flat(o++);
        for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b(r) = flat(o++);
    }
}

std::pair<double, Eigen::VectorXd> loss_and_grad(const DenseNet& net,
                                                 const Eigen::MatrixXd& inputs,
                                                 const Eigen::MatrixXd& targets,
                                                 LossKind kind) {
    const Eigen::Index nsamp = inputs.cols();
    if (nsamp == 0) throw std::invalid_argument("loss_and_grad: empty batch");
    if (targets.cols() != nsamp) {
        throw std::invalid_argument("loss_and_grad: batch size mismatch");
    }

    const std::size_t L = net.layers.size();
    std::vector<Eigen::MatrixXd> zs(L), as(L + 1);
    as[0] = inputs;
    for (std::size_t i = 0; i < L; ++i) {
        const Layer& l = net.layers[i];
        if (l.W.cols() != as[i].rows()) {
            throw std::invalid_argument("loss_and_grad: dimension mismatch");
        }
        zs[i] = (l.W * as[i]).colwise() + l.b;
        as[i + 1].resize(zs[i].rows(), zs[i].cols());
        for (Eigen::Index c = 0; c < zs[i].cols(); ++c)
            for (Eigen::Index r = 0; r < zs[i].rows(); ++r)
                as[i + 1](r, c) = act_scalar(l.act, zs[i](r, c));
    }

    const Eigen::MatrixXd& out = as[L];
    if (targets.rows() != out.rows()) {
        throw std::invalid_argument("loss_and_grad: target dim mismatch");
    }

    double loss = 0.0;
    // dOut = dLoss/d(post-activation output) for mse,
    // but logistic differentiates through the raw logits z directly.
    Eigen::MatrixXd delta;
    const double inv_n = 1.0 / double(nsamp);
    if (kind == LossKind::mse) {
        Eigen::MatrixXd resid = out - targets;
        loss = 0.5 * inv_n * resid.squaredNorm();
        delta = inv_n * resid;  // w.r.t. post-activation; fold act below
        for (Eigen::Index c = 0; c < delta.cols(); ++c)
            for (Eigen::Index r = 0; r < delta.rows(); ++r)
                delta(r, c) *= act_deriv(net.layers[L - 1].act, zs[L - 1](r, c));
    } else {
        // logistic expects the last layer to emit raw logits
        if (net.layers[L - 1].act != Act::identity) {
            throw std::invalid_argument(
                "loss_and_grad: logistic loss needs an identity output layer");
        }
        const Eigen::MatrixXd& z = zs[L - 1];
        delta.resize(z.rows(), z.cols());
        for (Eigen::Index c = 0; c < z.cols(); ++c) {
            for (Eigen::Index r = 0; r < z.rows(); ++r) {
                const double zv = z(r, c), yv = targets(r, c);
                loss += std::max(zv, 0.0) + std::log1p(std::exp(-std::abs(zv))) -
                        yv * zv;
                delta(r, c) = inv_n * (1.0 / (1.0 + std::exp(-zv)) - yv);
            }
        }
        loss *= inv_n;
    }

    DenseNet grads = net;  // same shapes, values overwritten
    for (std::size_t i = L; i-- > 0;) {
        grads.layers[i].W = delta * as[i].transpose();
        grads.layers[i].b = delta.rowwise().sum();
        if (i > 0) {
            Eigen::MatrixXd up = net.layers[i].W.transpose() * delta;
            delta.resize(up.rows(), up.cols());
            for (Eigen::Index c = 0; c < up.cols(); ++c)
                for (Eigen::Index r = 0; r < up.rows(); ++r)
                    delta(r, c) =
                        up(r, c) * act_deriv(net.layers[i - 1].act, zs[i - 1](r, c));
        }
    }
    return {loss, flatten(grads)};
}

double fd_check(const DenseNet& net, const Eigen::MatrixXd& inputs,
                const Eigen::MatrixXd& targets, LossKind kind, double h) {
    if (h <= 0.0) throw std::invalid_argument("fd_check: h must be positive");
    auto [loss, grad] = loss_and_grad(net, inputs, targets, kind);
    (void)loss;
    Eigen::VectorXd theta = flatten(net);
    Eigen::VectorXd fd(theta.size());
    DenseNet work = net;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double orig = theta(i);
        theta(i) = orig + h;
        unflatten(theta, work);
        const double lp = loss_and_grad(work, inputs, targets, kind).first;
        theta(i) = orig - h;
        unflatten(theta, work);
        const double lm = loss_and_grad(work, inputs, targets, kind).first;
        theta(i) = orig;
        fd(i) = (lp - lm) / (2.0 * h);
    }
    unflatten(theta, work);
    const double scale =
        grad.lpNorm<Eigen::Infinity>() + fd.lpNorm<Eigen::Infinity>() + 1e-12;
    return (grad - fd).lpNorm<Eigen::Infinity>() / scale;
}

}  // namespace errdyn
