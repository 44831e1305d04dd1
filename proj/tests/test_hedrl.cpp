#include <doctest.h>

#include <cmath>
#include <limits>

#include "errdyn/hedrl.hpp"

using namespace errdyn;

TEST_CASE("the TD error follows its definition") {
    CHECK(td_error(1.0, 0.25, 0.5, false, 0.9) == 1.0 + 0.9 * 0.5 - 0.25);
    CHECK(td_error(1.0, 0.25, 0.5, true, 0.9) == 0.75);  // no bootstrap at done
    CHECK(td_error(0.0, 0.0, 0.0, false, 0.9) == 0.0);
}

TEST_CASE("softmax policies are normalized and stable") {
    AgentState agent(7, DiagCoeffs{});
    Eigen::Vector2d pi = policy_probs(agent, 3);
    CHECK(pi(0) == 0.5);
    CHECK(pi(1) == 0.5);

    agent.logits(2, 0) = 1000.0;
    agent.logits(2, 1) = -1000.0;
    pi = policy_probs(agent, 2);
    CHECK(std::isfinite(pi(0)));
    CHECK(pi(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pi(0) + pi(1) == doctest::Approx(1.0).epsilon(1e-12));

    agent.logits(4, 0) = 0.3;
    agent.logits(4, 1) = -1.7;
    pi = policy_probs(agent, 4);
    CHECK(std::abs(pi(0) + pi(1) - 1.0) < 1e-12);
}

TEST_CASE("entropy coefficient rises with bias and falls with noise") {
    AgentConfig cfg;
    cfg.beta0 = 1e-3;
    cfg.lambda_b = 0.5;
    cfg.lambda_n = 0.5;

    DiagnosticSnapshot snap;
    snap.rho_bias = 1.0;
    snap.rho_noise = 0.0;
    CHECK(entropy_coefficient(snap, cfg) == 1e-3 * 1.5);

    snap.rho_bias = 0.0;
    snap.rho_noise = 3.0;
    CHECK(entropy_coefficient(snap, cfg) == 1e-3 / 2.5);

    cfg.baseline_mode = true;
    CHECK(entropy_coefficient(snap, cfg) == cfg.beta0);
}

TEST_CASE("one transition reproduces the hand-built update pipeline") {
    AgentConfig cfg;
    AgentState agent(7, cfg.diag);
    Transition tr;
    tr.s = 3;
    tr.a = 1;
    tr.r = 1.0;
    tr.s_next = 4;
    tr.done = true;

    // parallel bookkeeping with the same primitives
    DiagnosticState mirror;
    mirror.coeffs = cfg.diag;
    const double delta = td_error(tr.r, 0.0, 0.0, true, cfg.gamma_discount);
    observe_increment(mirror, delta);
    const DiagnosticSnapshot snap = snapshot(mirror);
    const double critic_gate = 1.0 / (1.0 + cfg.k_n * snap.rho_noise);

    const HedrlStepInfo info = process_transition(agent, tr, cfg);
    CHECK(info.delta == delta);
    CHECK(info.critic_gate == critic_gate);
    CHECK(agent.values(3) == cfg.alpha_V * critic_gate * delta);
    CHECK(agent.values(4) == 0.0);

    // logits move toward the taken action when delta > 0
    CHECK(agent.logits(3, 1) > 0.0);
    CHECK(agent.logits(3, 0) < agent.logits(3, 1));
    CHECK(info.beta_H == entropy_coefficient(snap, cfg));
}

TEST_CASE("an episode accumulates rewards and trace rows") {
    ChainConfig env_cfg;
    ChainEnv env(env_cfg);
    AgentConfig cfg;
    AgentState agent(env_cfg.n_states, cfg.diag);
    std::vector<HedrlStepInfo> rows;
    const double ret = run_episode(agent, env, cfg, 0, &rows);
    CHECK(rows.size() > 0);
    CHECK(rows.size() <= std::size_t(env_cfg.max_steps));
    // return is bounded by the reward structure
    CHECK(ret <= env_cfg.goal_reward);
    CHECK(ret >= env_cfg.step_reward * double(env_cfg.max_steps));
    CHECK(agent.episode == 0);
    CHECK(agent.step == long(rows.size()));
}

TEST_CASE("the agent learns to reach the goal") {
    ChainConfig env_cfg;
    ChainEnv env(env_cfg);
    AgentConfig cfg;
    cfg.alpha_V = 0.2;
    AgentState agent(env_cfg.n_states, cfg.diag);
    double early = 0.0, late = 0.0;
    const int episodes = 300;
    for (int ep = 0; ep < episodes; ++ep) {
        const double ret = run_episode(agent, env, cfg, 0, nullptr);
        if (ep < 50) early += ret;
        if (ep >= episodes - 50) late += ret;
    }
    CHECK(late / 50.0 > early / 50.0);
    CHECK(late / 50.0 > 0.9);  // near-optimal by the end
}

TEST_CASE("identical seeds reproduce identical runs") {
    ChainConfig env_cfg;
    AgentConfig cfg;
    for (int trial = 0; trial < 2; ++trial) {
        ChainEnv env1(env_cfg), env2(env_cfg);
        AgentState a1(env_cfg.n_states, cfg.diag), a2(env_cfg.n_states, cfg.diag);
        std::vector<HedrlStepInfo> r1, r2;
        for (int ep = 0; ep < 20; ++ep) {
            run_episode(a1, env1, cfg, 42, &r1);
            run_episode(a2, env2, cfg, 42, &r2);
        }
        REQUIRE(r1.size() == r2.size());
        for (std::size_t i = 0; i < r1.size(); ++i) {
            CHECK(r1[i].delta == r2[i].delta);
            CHECK(r1[i].beta_H == r2[i].beta_H);
        }
        CHECK((a1.logits - a2.logits).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("non-finite TD errors are rejected") {
    AgentConfig cfg;
    AgentState agent(7, cfg.diag);
    Transition tr;
    tr.s = 3;
    tr.a = 0;
    tr.r = std::numeric_limits<double>::infinity();
    tr.s_next = 2;
    tr.done = false;
    CHECK_THROWS_AS(process_transition(agent, tr, cfg), std::runtime_error);
}
