#pragma once

#include <Eigen/Core>

namespace errdyn {

// EMA coefficients for the error-dynamics trackers and the shared stabilizer.
struct DiagCoeffs {
    double alpha = 0.02;    // bias EMA
    double beta = 0.02;     // volatility EMA
    double zeta = 0.02;     // variance EMA
    double lambda = 0.05;   // alignment EMA
    double epsilon = 1e-8;

    // A zero coefficient freezes its tracker at the initial value, which is
    // how the optimizer is reduced to its gate-free baseline.
    bool valid() const {
        auto in01 = [](double c) { return c >= 0.0 && c <= 1.0; };
        return in01(alpha) && in01(beta) && in01(zeta) && in01(lambda) &&
               epsilon > 0.0;
    }
};

// Running trackers over a scalar error stream and a gradient direction stream.
// b: signed trend of increments; nu: mean magnitude; sigma2: variance of
// increments around the trend; s: gradient/momentum alignment in [-1, 1].
struct DiagnosticState {
    DiagCoeffs coeffs;
    double b = 0.0;
    double nu = 0.0;
    double sigma2 = 0.0;
    double s = 0.0;
    double prev_loss = 0.0;
    bool has_prev = false;
};

struct DiagnosticSnapshot {
    double b = 0.0;
    double nu = 0.0;
    double sigma2 = 0.0;
    double s = 0.0;
    double rho_bias = 0.0;
    double rho_noise = 0.0;
};

// Feed one increment of the error signal (a TD error, or a precomputed
// loss difference). Updates b, nu, and sigma2; sigma2 uses the just-updated b.
void observe_increment(DiagnosticState& state, double delta);

// Feed one loss value; the first call only records it, later calls forward
// the consecutive difference to observe_increment.
void observe_loss(DiagnosticState& state, double loss);

// Feed one (gradient, momentum) pair; updates the alignment EMA from their
// cosine. Both the cosine and s are clamped to [-1, 1] so downstream
// consumers can rely on the bound exactly.
void observe_direction(DiagnosticState& state,
                       const Eigen::Ref<const Eigen::VectorXd>& g,
                       const Eigen::Ref<const Eigen::VectorXd>& m);

// Ratios: rho_bias = |b| / (eps + nu), rho_noise = sqrt(sigma2) / (eps + |b|).
DiagnosticSnapshot snapshot(const DiagnosticState& state);

}  // namespace errdyn
