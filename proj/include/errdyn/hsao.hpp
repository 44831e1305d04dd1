#pragma once

#include <Eigen/Core>

#include "errdyn/diag.hpp"

namespace errdyn {

struct HsaoConfig {
    double alpha0 = 0.01;   // base learning rate
    double c = 0.1;         // log-decay strength
    double gamma = 0.9;     // first-moment decay
    double eta = 0.999;     // second-moment decay
    double k_b = 2.0;       // bias gate sensitivity
    double k_n = 2.0;       // noise gate sensitivity
    double tau = 0.25;      // directional correction strength
    double epsilon = 1e-8;
    DiagCoeffs diag;

    // Component switches; disabling a gate pins its factor to 1 and
    // disabling the correction uses the raw gradient.
    bool use_bias_gate = true;
    bool use_noise_gate = true;
    bool use_alignment = true;

    bool valid() const {
        return alpha0 > 0.0 && c >= 0.0 && gamma > 0.0 && gamma < 1.0 &&
               eta > 0.0 && eta < 1.0 && k_b > 0.0 && k_n > 0.0 &&
               tau >= 0.0 && epsilon > 0.0 && diag.valid();
    }
};

struct OptimizerState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long t = 0;
    DiagnosticState diag;

    explicit OptimizerState(Eigen::Index dim = 0)
        : m(Eigen::VectorXd::Zero(dim)), v(Eigen::VectorXd::Zero(dim)) {}
};

// Per-step record of every intermediate the optimizer computed.
struct HsaoStepInfo {
    long t = 0;
    double loss = 0.0;
    double b = 0.0, nu = 0.0, sigma2 = 0.0, s = 0.0;
    double rho_bias = 0.0, rho_noise = 0.0;
    double kappa = 1.0, delta_gate = 1.0;
    double alpha_eff = 0.0;
    double update_norm = 0.0;
    double update_par = 0.0;  // <update, m>, oscillation probe
};

double base_lr(long t, double alpha0, double c);

// kappa = 1/(1+k_b*rho_bias), delta = 1/(1+k_n*rho_noise)
std::pair<double, double> gates(const DiagnosticSnapshot& snap, double k_b,
                                double k_n);

// g~ = g - tau*s*(<g,m>/(|m|^2+eps))*m
Eigen::VectorXd directional_correction(const Eigen::Ref<const Eigen::VectorXd>& g,
                                       const Eigen::Ref<const Eigen::VectorXd>& m,
                                       double s, double tau, double epsilon);

// One optimizer step, in place. Order: moments, loss increment EMAs,
// alignment, gated rate, correction, parameter update. Non-finite inputs
// throw before any state is touched.
HsaoStepInfo hsao_step(Eigen::Ref<Eigen::VectorXd> params,
                       const Eigen::Ref<const Eigen::VectorXd>& g, double loss,
                       OptimizerState& state, const HsaoConfig& config);

}  // namespace errdyn
