#include "errdyn/diag.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace errdyn {

void observe_increment(DiagnosticState& state, double delta) {
    const DiagCoeffs& c = state.coeffs;
    state.b = (1.0 - c.alpha) * state.b + c.alpha * delta;
    state.nu = (1.0 - c.beta) * state.nu + c.beta * std::abs(delta);
    const double resid = delta - state.b;
    state.sigma2 = (1.0 - c.zeta) * state.sigma2 + c.zeta * resid * resid;
}

void observe_loss(DiagnosticState& state, double loss) {
    if (state.has_prev) {
        observe_increment(state, loss - state.prev_loss);
    }
    state.prev_loss = loss;
    state.has_prev = true;
}

void observe_direction(DiagnosticState& state,
                       const Eigen::Ref<const Eigen::VectorXd>& g,
                       const Eigen::Ref<const Eigen::VectorXd>& m) {
    if (g.size() != m.size()) {
        throw std::invalid_argument("observe_direction: dimension mismatch");
    }
    const DiagCoeffs& c = state.coeffs;
    const double denom = g.norm() * m.norm() + c.epsilon;
    double cos = g.dot(m) / denom;
    cos = std::clamp(cos, -1.0, 1.0);
    state.s = (1.0 - c.lambda) * state.s + c.lambda * cos;
    state.s = std::clamp(state.s, -1.0, 1.0);
}

DiagnosticSnapshot snapshot(const DiagnosticState& state) {
    const double eps = state.coeffs.epsilon;
    DiagnosticSnapshot snap;
    snap.b = state.b;
    snap.nu = state.nu;
    snap.sigma2 = state.sigma2;
    snap.s = state.s;
    snap.rho_bias = std::abs(state.b) / (eps + state.nu);
    snap.rho_noise = std::sqrt(state.sigma2) / (eps + std::abs(state.b));
    return snap;
}

}  // namespace errdyn
