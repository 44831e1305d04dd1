#pragma once

#include <Eigen/Core>
#include <vector>

#include "errdyn/diag.hpp"
#include "errdyn/envs.hpp"
#include "errdyn/rng.hpp"

namespace errdyn {

struct AgentConfig {
    double gamma_discount = 0.95;
    double alpha_V = 0.2;
    double alpha_pi = 0.2;
    double k_b = 2.0;
    double k_n = 2.0;
    double beta0 = 1e-3;
    double lambda_b = 0.5;
    double lambda_n = 0.5;
    DiagCoeffs diag;
    bool baseline_mode = false;  // pins both gates to 1 and beta_H to beta0

    bool valid() const {
        return gamma_discount > 0.0 && gamma_discount < 1.0 && alpha_V > 0.0 &&
               alpha_pi > 0.0 && k_b > 0.0 && k_n > 0.0 && beta0 > 0.0 &&
               lambda_b >= 0.0 && lambda_n >= 0.0 && diag.valid();
    }
};

// Tabular softmax policy over {left, right} plus a tabular state-value critic;
// one diagnostic tracker over the TD-error stream.
struct AgentState {
    Eigen::MatrixXd logits;  // (n_states, 2)
    Eigen::VectorXd values;  // (n_states)
    DiagnosticState td_diag;
    long episode = 0;
    long step = 0;

    AgentState(int n_states, const DiagCoeffs& coeffs)
        : logits(Eigen::MatrixXd::Zero(n_states, 2)),
          values(Eigen::VectorXd::Zero(n_states)) {
        td_diag.coeffs = coeffs;
    }
};

struct HedrlStepInfo {
    long episode = 0;
    long step = 0;
    double delta = 0.0;
    double b = 0.0, nu = 0.0, sigma2 = 0.0;
    double rho_bias = 0.0, rho_noise = 0.0;
    double critic_gate = 1.0, policy_gate = 1.0;
    double beta_H = 0.0;
    double update_norm = 0.0;
};

double td_error(double r, double v_s, double v_s_next, bool done,
                double gamma_discount);

// beta_H = beta0*(1+lambda_b*rho_bias)/(1+lambda_n*rho_noise)
double entropy_coefficient(const DiagnosticSnapshot& snap,
                           const AgentConfig& config);

Eigen::Vector2d policy_probs(const AgentState& agent, int s);

// Full per-transition pipeline: TD error, diagnostics, gated critic step,
// entropy coefficient, gated policy step with entropy bonus.
HedrlStepInfo process_transition(AgentState& agent, const Transition& tr,
                                 const AgentConfig& config);

// Runs one episode; returns the undiscounted return and appends trace rows.
double run_episode(AgentState& agent, ChainEnv& env, const AgentConfig& config,
                   std::uint64_t seed, std::vector<HedrlStepInfo>* rows);

}  // namespace errdyn
