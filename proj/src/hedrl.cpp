#include "errdyn/hedrl.hpp"

#include <cmath>
#include <stdexcept>

namespace errdyn {

double td_error(double r, double v_s, double v_s_next, bool done,
                double gamma_discount) {
    return r + gamma_discount * v_s_next * (done ? 0.0 : 1.0) - v_s;
}

double entropy_coefficient(const DiagnosticSnapshot& snap,
                           const AgentConfig& config) {
    if (config.baseline_mode) return config.beta0;
    return config.beta0 * (1.0 + config.lambda_b * snap.rho_bias) /
           (1.0 + config.lambda_n * snap.rho_noise);
}

Eigen::Vector2d policy_probs(const AgentState& agent, int s) {
    const double z0 = agent.logits(s, 0), z1 = agent.logits(s, 1);
    const double zmax = std::max(z0, z1);
    const double e0 = std::exp(z0 - zmax), e1 = std::exp(z1 - zmax);
    const double sum = e0 + e1;
    return {e0 / sum, e1 / sum};
}

HedrlStepInfo process_transition(AgentState& agent, const Transition& tr,
                                 const AgentConfig& config) {
    const double delta = td_error(tr.r, agent.values(tr.s),
                                  agent.values(tr.s_next), tr.done,
                                  config.gamma_discount);
    if (!std::isfinite(delta)) {
        throw std::runtime_error("process_transition: non-finite TD error");
    }

    observe_increment(agent.td_diag, delta);
    const DiagnosticSnapshot snap = snapshot(agent.td_diag);

    double critic_gate = 1.0 / (1.0 + config.k_n * snap.rho_noise);
    double policy_gate = 1.0 / (1.0 + config.k_b * snap.rho_bias);
    if (config.baseline_mode) {
        critic_gate = 1.0;
        policy_gate = 1.0;
    }

    agent.values(tr.s) += config.alpha_V * critic_gate * delta;

    const double beta_H = entropy_coefficient(snap, config);

    // tabular softmax: grad log pi(a|s) = e_a - pi;
    // entropy gradient per logit j: -pi_j*(log pi_j + H)
    const Eigen::Vector2d pi = policy_probs(agent, tr.s);
    Eigen::Vector2d glogp = -pi;
    glogp(tr.a) += 1.0;
    const double H = -(pi(0) * std::log(pi(0)) + pi(1) * std::log(pi(1)));
    Eigen::Vector2d gH;
    gH(0) = -pi(0) * (std::log(pi(0)) + H);
    gH(1) = -pi(1) * (std::log(pi(1)) + H);

    const Eigen::Vector2d dlogits =
        config.alpha_pi * (policy_gate * delta * glogp + beta_H * gH);
    agent.logits.row(tr.s) += dlogits.transpose();

    agent.step += 1;

    HedrlStepInfo info;
    info.episode = agent.episode;
    info.step = agent.step;
    info.delta = delta;
    info.b = snap.b;
    info.nu = snap.nu;
    info.sigma2 = snap.sigma2;
    info.rho_bias = snap.rho_bias;
    info.rho_noise = snap.rho_noise;
    info.critic_gate = critic_gate;
    info.policy_gate = policy_gate;
    info.beta_H = beta_H;
    info.update_norm = dlogits.norm();
    return info;
}

double run_episode(AgentState& agent, ChainEnv& env, const AgentConfig& config,
                   std::uint64_t seed, std::vector<HedrlStepInfo>* rows) {
    int s = env.reset(seed_chain(seed, 0xE57));
    agent.episode = env.episode();
    Rng action_rng(seed_chain(seed, 0xAC7, std::uint64_t(env.episode())));

    double ret = 0.0;
    bool done = false;
    while (!done) {
        const Eigen::Vector2d pi = policy_probs(agent, s);
        const int a = action_rng.uniform() < pi(0) ? 0 : 1;
        const Transition tr = env.step(s, a);
        const HedrlStepInfo info = process_transition(agent, tr, config);
        if (rows) rows->push_back(info);
        ret += tr.r;
        s = tr.s_next;
        done = tr.done;
    }
    return ret;
}

}  // namespace errdyn
