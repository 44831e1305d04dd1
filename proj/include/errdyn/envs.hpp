#pragma once

#include <cstdint>

#include "errdyn/rng.hpp"

namespace errdyn {

enum class ChainAction : int { left = 0, right = 1 };

struct Transition {
    int s = 0;
    int a = 0;
    double r = 0.0;
    int s_next = 0;
    bool done = false;
};

struct ChainConfig {
    int n_states = 7;
    double step_reward = -0.01;
    double goal_reward = 1.0;
    int max_steps = 50;
    long flip_episode = -1;  // <0: never flips
    double reward_noise_std = 0.0;

    bool valid() const {
        return n_states >= 3 && max_steps >= 1 && reward_noise_std >= 0.0;
    }
};

// Deterministic 1-D chain; the agent starts at the center, the goal sits at
// one end, moves are clamped at the boundaries. Rewards optionally carry
// Gaussian noise. The goal side flips once at flip_episode.
class ChainEnv {
public:
    explicit ChainEnv(const ChainConfig& config);

    // Advances the episode counter (first call gives episode 0), reseeds the
    // per-episode reward-noise stream, applies the scheduled flip, and
    // returns the start state.
    int reset(std::uint64_t seed);

    Transition step(int state, int action);

    long episode() const { return episode_; }
    bool goal_right() const { return goal_right_; }
    int start_state() const { return config_.n_states / 2; }
    int goal_state() const { return goal_right_ ? config_.n_states - 1 : 0; }
    const ChainConfig& config() const { return config_; }

    // Mid-training noise injection hook for the run schedule.
    void set_reward_noise_std(double std_) { config_.reward_noise_std = std_; }

private:
    ChainConfig config_;
    long episode_ = -1;
    bool goal_right_ = true;
    int steps_taken_ = 0;
    Rng rng_;
};

}  // namespace errdyn
