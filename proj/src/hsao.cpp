#include "errdyn/hsao.hpp"

#include <cmath>
#include <stdexcept>

namespace errdyn {

double base_lr(long t, double alpha0, double c) {
    return alpha0 / (1.0 + c * std::log1p(double(t)));
}

std::pair<double, double> gates(const DiagnosticSnapshot& snap, double k_b,
                                double k_n) {
    return {1.0 / (1.0 + k_b * snap.rho_bias),
            1.0 / (1.0 + k_n * snap.rho_noise)};
}

Eigen::VectorXd directional_correction(const Eigen::Ref<const Eigen::VectorXd>& g,
                                       const Eigen::Ref<const Eigen::VectorXd>& m,
                                       double s, double tau, double epsilon) {
    if (g.size() != m.size()) {
        throw std::invalid_argument("directional_correction: dimension mismatch");
    }
    const double coef = tau * s * g.dot(m) / (m.squaredNorm() + epsilon);
    return g - coef * m;
}

HsaoStepInfo hsao_step(Eigen::Ref<Eigen::VectorXd> params,
                       const Eigen::Ref<const Eigen::VectorXd>& g, double loss,
                       OptimizerState& state, const HsaoConfig& config) {
    if (g.size() != params.size() || state.m.size() != params.size()) {
        throw std::invalid_argument("hsao_step: dimension mismatch");
    }
    if (!std::isfinite(loss) || !g.allFinite()) {
        throw std::invalid_argument("hsao_step: non-finite input");
    }

    state.t += 1;
    state.m = config.gamma * state.m + (1.0 - config.gamma) * g;
    state.v = config.eta * state.v.array() +
              (1.0 - config.eta) * g.array().square();

    observe_loss(state.diag, loss);
    observe_direction(state.diag, g, state.m);
    const DiagnosticSnapshot snap = snapshot(state.diag);

    auto [kappa, delta_gate] = gates(snap, config.k_b, config.k_n);
    if (!config.use_bias_gate) kappa = 1.0;
    if (!config.use_noise_gate) delta_gate = 1.0;

    const double alpha_bar = base_lr(state.t, config.alpha0, config.c);
    const double alpha_eff = alpha_bar * kappa * delta_gate;

    Eigen::VectorXd gt =
        config.use_alignment
            ? directional_correction(g, state.m, snap.s, config.tau,
                                     config.epsilon)
            : Eigen::VectorXd(g);

    const double vcorr = 1.0 - std::pow(config.eta, double(state.t));
    Eigen::VectorXd update =
        -alpha_eff *
        (gt.array() / ((state.v.array() / vcorr).sqrt() + config.epsilon))
            .matrix();
    params += update;

    HsaoStepInfo info;
    info.t = state.t;
    info.loss = loss;
    info.b = snap.b;
    info.nu = snap.nu;
    info.sigma2 = snap.sigma2;
    info.s = snap.s;
    info.rho_bias = snap.rho_bias;
    info.rho_noise = snap.rho_noise;
    info.kappa = kappa;
    info.delta_gate = delta_gate;
    info.alpha_eff = alpha_eff;
    info.update_norm = update.norm();
    info.update_par = update.dot(state.m);
    return info;
}

}  // namespace errdyn
