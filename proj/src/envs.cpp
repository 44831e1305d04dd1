#include "errdyn/envs.hpp"

#include <stdexcept>

namespace errdyn {

ChainEnv::ChainEnv(const ChainConfig& config) : config_(config) {
    if (!config.valid()) {
        throw std::invalid_argument("ChainEnv: invalid config");
    }
}

int ChainEnv::reset(std::uint64_t seed) {
    episode_ += 1;
    if (config_.flip_episode >= 0 && episode_ == config_.flip_episode) {
        goal_right_ = !goal_right_;
    }
    rng_ = Rng(seed_chain(seed, std::uint64_t(episode_), 0xe11a));
    steps_taken_ = 0;
    return start_state();
}

Transition ChainEnv::step(int state, int action) {
    if (state < 0 || state >= config_.n_states) {
        throw std::invalid_argument("ChainEnv::step: invalid state");
    }
    if (action != 0 && action != 1) {
        throw std::invalid_argument("ChainEnv::step: invalid action");
    }
    int next = state + (action == 1 ? 1 : -1);
    if (next < 0) next = 0;
    if (next >= config_.n_states) next = config_.n_states - 1;

    steps_taken_ += 1;
    const bool at_goal = (next == goal_state());
    double r = at_goal ? config_.goal_reward : config_.step_reward;
    if (config_.reward_noise_std > 0.0) {
        r += config_.reward_noise_std * rng_.normal();
    }

    Transition tr;
    tr.s = state;
    tr.a = action;
    tr.r = r;
    tr.s_next = next;
    tr.done = at_goal || steps_taken_ >= config_.max_steps;
    return tr;
}

}  // namespace errdyn
