#include "errdyn/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "errdyn/harness.hpp"
#include "errdyn/metrics.hpp"
#include "errdyn/net.hpp"

namespace errdyn {
namespace {

// Hash accumulator over every number a criterion computes. The suite runs
// twice; the determinism criterion compares the two hash streams.
struct Digest {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    void add(double x) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof bits);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffULL;
            h *= 0x100000001b3ULL;
        }
    }
    void add(const std::vector<double>& xs) {
        for (double x : xs) add(x);
    }
};

std::string fmt(double x) {
    std::ostringstream out;
    out << std::setprecision(4) << x;
    return out.str();
}

// ---- frozen reference numbers --------------------------------------------
// Recorded once from the first run of the committed implementation and pinned
// so that later changes which silently move them are caught. -1 / NaN means
// "not pinned yet"; the suite then reports the fresh values to pin.
constexpr long kAdamOracleSteps = 142;
constexpr double kSgdGridRates[5] = {0.01, 0.03, 0.1, 0.3, 1.0};
constexpr double kSgdGridMeans[5] = {
    0x1.138e4ae52029ap-1, 0x1.968074f9d138ep-3, 0x1.13c76705000e7p-4,
    0x1.f1d685dfa7d7dp+17, 0x1.8677c72c0f4f2p+61};

// 1. Effective step size stays inside [0, alpha0] exactly, across random
//    diagnostic states, sensitivities, and step counts.
CriterionResult crit_rate_bound() {
    CriterionResult r{1, "rate-bound", true, "", 0, 0.0};
    Digest dg;
    Rng rng(seed_chain(1, 0xACC));
    auto magnitude = [&rng]() {
        if (rng.uniform() < 0.05) return 0.0;
        return std::exp(rng.uniform(std::log(1e-30), std::log(1e30)));
    };
    long bad = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        DiagnosticState st;
        st.b = (rng.uniform() < 0.5 ? -1.0 : 1.0) * magnitude();
        st.nu = magnitude();
        st.sigma2 = magnitude();
        st.s = rng.uniform(-1.0, 1.0);
        const DiagnosticSnapshot snap = snapshot(st);
        const double k_b = rng.uniform(0.0, 100.0);
        const double k_n = rng.uniform(0.0, 100.0);
        const auto [kappa, delta] = gates(snap, k_b, k_n);
        const double alpha0 = std::exp(rng.uniform(std::log(1e-6), std::log(10.0)));
        const double c = rng.uniform(0.0, 10.0);
        const long t = long(rng.below(1000001));
        const double a_eff = base_lr(t, alpha0, c) * kappa * delta;
        if (!(a_eff >= 0.0 && a_eff <= alpha0)) bad += 1;
        dg.add(a_eff);
    }
    r.pass = bad == 0;
    r.detail = std::to_string(n) + " random states, t in [0,1e6], " +
               std::to_string(bad) + " violations";
    r.digest = dg.h;
    return r;
}

// 2. Every gate lies in (0,1] exactly and the entropy coefficient is
//    strictly positive, over the same randomized grid.
CriterionResult crit_gate_ranges() {
    CriterionResult r{2, "gate-ranges", true, "", 0, 0.0};
    Digest dg;
    Rng rng(seed_chain(2, 0xACC));
    auto magnitude = [&rng]() {
        if (rng.uniform() < 0.05) return 0.0;
        return std::exp(rng.uniform(std::log(1e-30), std::log(1e30)));
    };
    long bad = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        DiagnosticState st;
        st.b = (rng.uniform() < 0.5 ? -1.0 : 1.0) * magnitude();
        st.nu = magnitude();
        st.sigma2 = magnitude();
        st.s = rng.uniform(-1.0, 1.0);
        const DiagnosticSnapshot snap = snapshot(st);
        const auto [kappa, delta] =
            gates(snap, rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0));
        AgentConfig ac;
        ac.k_b = rng.uniform(0.0, 100.0);
        ac.k_n = rng.uniform(0.0, 100.0);
        ac.beta0 = std::exp(rng.uniform(std::log(1e-5), std::log(0.1)));
        ac.lambda_b = rng.uniform(0.0, 10.0);
        ac.lambda_n = rng.uniform(0.0, 10.0);
        const double critic_gate = 1.0 / (1.0 + ac.k_n * snap.rho_noise);
        const double policy_gate = 1.0 / (1.0 + ac.k_b * snap.rho_bias);
        const double beta_H = entropy_coefficient(snap, ac);
        auto in01 = [](double g) { return g > 0.0 && g <= 1.0; };
        if (!in01(kappa) || !in01(delta) || !in01(critic_gate) ||
            !in01(policy_gate) || !(beta_H > 0.0) || !std::isfinite(beta_H)) {
            bad += 1;
        }
        dg.add(kappa);
        dg.add(delta);
        dg.add(beta_H);
    }
    r.pass = bad == 0;
    r.detail = std::to_string(n) + " random states, " + std::to_string(bad) +
               " out-of-range values";
    r.digest = dg.h;
    return r;
}

// 3. Analytic network gradients against central finite differences.
CriterionResult crit_gradient_oracle() {
    CriterionResult r{3, "gradient-oracle", true, "", 0, 0.0};
    Digest dg;
    Rng rng(seed_chain(3, 0xACC));
    const Act hidden_acts[4] = {Act::tanh, Act::relu, Act::softplus,
                                Act::sigmoid};
    double worst = 0.0;
    for (int case_i = 0; case_i < 100; ++case_i) {
        const int depth = 1 + int(rng.below(3));
        std::vector<Eigen::Index> dims{1 + Eigen::Index(rng.below(6))};
        std::vector<Act> acts;
        for (int l = 0; l + 1 < depth; ++l) {
            dims.push_back(1 + Eigen::Index(rng.below(8)));
            acts.push_back(hidden_acts[rng.below(4)]);
        }
        dims.push_back(1 + Eigen::Index(rng.below(4)));
        const LossKind kind =
            rng.uniform() < 0.5 ? LossKind::mse : LossKind::logistic;
        acts.push_back(kind == LossKind::logistic
                           ? Act::identity
                           : (rng.uniform() < 0.5 ? Act::identity : Act::tanh));
        DenseNet net = make_net(dims, acts, rng);

        const Eigen::Index batch = 1 + Eigen::Index(rng.below(6));
        Eigen::MatrixXd X(dims.front(), batch), Y(dims.back(), batch);
        for (Eigen::Index c = 0; c < batch; ++c) {
            for (Eigen::Index i = 0; i < X.rows(); ++i) X(i, c) = rng.normal();
            for (Eigen::Index i = 0; i < Y.rows(); ++i) {
                Y(i, c) = kind == LossKind::logistic ? double(rng.below(2))
                                                     : rng.normal();
            }
        }
        const double err = fd_check(net, X, Y, kind, 1e-6);
        worst = std::max(worst, err);
        dg.add(err);
    }
    r.pass = worst < 1e-5;
    r.detail = "100 random nets, worst relative error " + fmt(worst);
    r.digest = dg.h;
    return r;
}

// 4. With the correction off and all trackers frozen at zero the optimizer
//    must walk the same trajectory as a hand-rolled Adam with the same
//    logarithmic decay and no momentum in the numerator.
CriterionResult crit_adam_reduction() {
    CriterionResult r{4, "adam-reduction", true, "", 0, 0.0};
    Digest dg;
    TaskConfig tc;
    tc.kind = TaskKind::drifting_quadratic;
    tc.dimension = 10;
    tc.batch_size = 0;
    tc.seed = 44;
    const SupervisedTask task(tc);

    HsaoConfig hc;
    hc.alpha0 = 0.05;
    hc.tau = 0.0;
    hc.diag.alpha = hc.diag.beta = hc.diag.zeta = hc.diag.lambda = 0.0;

    Rng init_rng(seed_chain(44, 0x71e7));
    Eigen::VectorXd theta(10);
    for (int i = 0; i < 10; ++i) theta(i) = init_rng.normal();
    Eigen::VectorXd theta_ref = theta;
    Eigen::VectorXd v_ref = Eigen::VectorXd::Zero(10);

    OptimizerState state{10};
    state.diag.coeffs = hc.diag;

    double max_dev = 0.0;
    for (long t = 1; t <= 1000; ++t) {
        auto [loss, g] = task.loss_and_grad(theta, t - 1, 0);
        hsao_step(theta, g, loss, state, hc);

        auto [loss_r, g_r] = task.loss_and_grad(theta_ref, t - 1, 0);
        (void)loss_r;
        v_ref = hc.eta * v_ref.array() + (1.0 - hc.eta) * g_r.array().square();
        const double alpha = hc.alpha0 / (1.0 + hc.c * std::log1p(double(t)));
        const double vcorr = 1.0 - std::pow(hc.eta, double(t));
        theta_ref -=
            alpha *
            (g_r.array() / ((v_ref.array() / vcorr).sqrt() + hc.epsilon))
                .matrix();

        max_dev = std::max(max_dev, (theta - theta_ref).cwiseAbs().maxCoeff());
    }
    dg.add(max_dev);
    dg.add(theta.norm());
    r.pass = max_dev < 1e-10;
    r.detail = "1000 steps, max per-step deviation " + fmt(max_dev);
    r.digest = dg.h;
    return r;
}

// 5. Convergence on the stationary quadratic, with a plain-Adam yardstick.
CriterionResult crit_convergence() {
    CriterionResult r{5, "quadratic-convergence", true, "", 0, 0.0};
    Digest dg;
    TaskConfig tc;
    tc.kind = TaskKind::drifting_quadratic;
    tc.dimension = 10;
    tc.batch_size = 0;

    HsaoConfig hc;
    hc.alpha0 = 0.1;
    const HsaoRunResult res = run_hsao_single(tc, hc, 5000, 55);
    long first = -1;
    for (const auto& row : res.rows) {
        if (row.loss < 1e-6) {
            first = row.t;
            break;
        }
    }

    // plain Adam on the identical task and start point
    tc.seed = 55;
    const SupervisedTask task(tc);
    Rng init_rng(seed_chain(55, 0x71e7));
    Eigen::VectorXd theta(10);
    for (int i = 0; i < 10; ++i) theta(i) = init_rng.normal();
    Eigen::VectorXd m = Eigen::VectorXd::Zero(10), v = Eigen::VectorXd::Zero(10);
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    long adam_first = -1;
    for (long t = 1; t <= 5000; ++t) {
        auto [loss, g] = task.loss_and_grad(theta, t - 1, 0);
        if (loss < 1e-6 && adam_first < 0) {
            adam_first = t;
            break;
        }
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v.array() + (1.0 - b2) * g.array().square();
        const Eigen::VectorXd mh = m / (1.0 - std::pow(b1, double(t)));
        const Eigen::VectorXd vh = v / (1.0 - std::pow(b2, double(t)));
        theta -= lr * (mh.array() / (vh.array().sqrt() + eps)).matrix();
    }

    dg.add(double(first));
    dg.add(double(adam_first));
    dg.add(res.final_oracle);
    const bool oracle_ok =
        kAdamOracleSteps < 0 || adam_first == kAdamOracleSteps;
    r.pass = first > 0 && first <= 5000 && adam_first > 0 && oracle_ok;
    r.detail = "loss<1e-6 at step " + std::to_string(first) +
               " (adam yardstick: " + std::to_string(adam_first) + ")";
    if (kAdamOracleSteps < 0) r.detail += " [yardstick not pinned yet]";
    r.digest = dg.h;
    return r;
}

// 6. More loss noise must mean a smaller noise gate: Spearman correlation
//    between injected noise level and the window-mean gate <= -0.9.
CriterionResult crit_noise_monotonicity() {
    CriterionResult r{6, "noise-gate-monotonicity", true, "", 0, 0.0};
    Digest dg;
    const std::vector<double> levels{0.0, 0.003, 0.01, 0.03, 0.1};
    HsaoConfig hc;  // defaults; all components on
    std::vector<double> rhos;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::vector<double> means;
        for (const double lv : levels) {
            TaskConfig tc;
            tc.kind = TaskKind::drifting_quadratic;
            tc.dimension = 10;
            tc.batch_size = 0;
            tc.noise_std = lv;
            const HsaoRunResult res = run_hsao_single(tc, hc, 800, seed);
            double sum = 0.0;
            for (std::size_t i = 100; i < 600; ++i) {
                sum += res.rows[i].delta_gate;
            }
            means.push_back(sum / 500.0);
        }
        const double rho = spearman(levels, means);
        rhos.push_back(rho);
        dg.add(means);
        dg.add(rho);
    }
    const double med = median(rhos);
    r.pass = med <= -0.9;
    r.detail = "median Spearman(level, mean gate) = " + fmt(med);
    r.digest = dg.h;
    return r;
}

// 7. Reward-noise injection at episode 300 must pull the entropy coefficient
//    down, while the fixed-coefficient baseline stays at beta0 bitwise.
CriterionResult crit_entropy_modulation() {
    CriterionResult r{7, "entropy-modulation", true, "", 0, 0.0};
    Digest dg;
    ChainConfig env_cfg;
    ScheduleConfig sched;
    sched.noise_inject_episode = 300;
    sched.noise_inject_std = 0.3;
    AgentConfig ac;
    ac.alpha_V = 0.2;

    std::vector<double> pre_means, post_means;
    bool baseline_exact = true;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const HedrlRunResult res =
            run_hedrl_single(env_cfg, ac, sched, 520, seed);
        double pre = 0.0, post = 0.0;
        long n_pre = 0, n_post = 0;
        for (const auto& row : res.rows) {
            if (row.episode >= 100 && row.episode <= 250) {
                pre += row.beta_H;
                n_pre += 1;
            } else if (row.episode >= 350 && row.episode <= 500) {
                post += row.beta_H;
                n_post += 1;
            }
        }
        pre_means.push_back(pre / double(n_pre));
        post_means.push_back(post / double(n_post));

        AgentConfig base = ac;
        base.baseline_mode = true;
        const HedrlRunResult bres =
            run_hedrl_single(env_cfg, base, sched, 520, seed);
        for (const auto& row : bres.rows) {
            if (row.beta_H != base.beta0) baseline_exact = false;
        }
        dg.add(pre_means.back());
        dg.add(post_means.back());
    }
    const double med_pre = median(pre_means), med_post = median(post_means);
    r.pass = med_post < med_pre && baseline_exact;
    r.detail = "median beta_H " + fmt(med_pre) + " (ep 100-250) -> " +
               fmt(med_post) + " (ep 350-500)" +
               (baseline_exact ? ", baseline exact" : ", BASELINE DRIFTED");
    r.digest = dg.h;
    return r;
}

// 8. After the goal flip the bias ratio must rise, and recomputing the
//    trackers offline from the logged TD errors must match the logs.
CriterionResult crit_reward_flip() {
    CriterionResult r{8, "reward-flip-bias", true, "", 0, 0.0};
    Digest dg;
    ChainConfig env_cfg;
    env_cfg.max_steps = 5;
    env_cfg.flip_episode = 300;
    env_cfg.reward_noise_std = 0.1;
    ScheduleConfig sched;
    AgentConfig ac;
    ac.alpha_V = 0.3;

    std::vector<double> rises;
    double replay_err = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const HedrlRunResult res =
            run_hedrl_single(env_cfg, ac, sched, 400, seed);
        std::size_t flip_idx = res.rows.size();
        for (std::size_t i = 0; i < res.rows.size(); ++i) {
            if (res.rows[i].episode >= 300) {
                flip_idx = i;
                break;
            }
        }
        if (flip_idx < 100 || flip_idx + 100 > res.rows.size()) {
            r.pass = false;
            r.detail = "window does not fit around the flip";
            return r;
        }
        double pre = 0.0, post = 0.0;
        for (std::size_t i = flip_idx - 100; i < flip_idx; ++i)
            pre += res.rows[i].rho_bias;
        for (std::size_t i = flip_idx; i < flip_idx + 100; ++i)
            post += res.rows[i].rho_bias;
        rises.push_back((post - pre) / 100.0);

        DiagnosticState st;
        st.coeffs = ac.diag;
        for (const auto& row : res.rows) {
            observe_increment(st, row.delta);
            const DiagnosticSnapshot snap = snapshot(st);
            replay_err = std::max(replay_err, std::abs(snap.b - row.b));
            replay_err = std::max(replay_err, std::abs(snap.nu - row.nu));
            replay_err =
                std::max(replay_err, std::abs(snap.sigma2 - row.sigma2));
            replay_err =
                std::max(replay_err, std::abs(snap.rho_bias - row.rho_bias));
            replay_err =
                std::max(replay_err, std::abs(snap.rho_noise - row.rho_noise));
        }
        dg.add(rises.back());
    }
    dg.add(replay_err);
    const double med = median(rises);
    r.pass = med > 0.0 && replay_err <= 1e-10;
    r.detail = "median post-pre rho_bias gap " + fmt(med) + ", replay error " +
               fmt(replay_err);
    r.digest = dg.h;
    return r;
}

// 9. Removing one component must make its target pathology worse on the task
//    built to expose it (median metric ratio over seeds > 1).
CriterionResult crit_ablations() {
    CriterionResult r{9, "ablation-separations", true, "", 0, 0.0};
    Digest dg;

    auto ratio_median = [&dg](const TaskConfig& tc, const HsaoConfig& full_cfg,
                              const std::set<std::string>& mask, long steps,
                              auto metric) {
        const HsaoConfig abl_cfg = apply_ablation(full_cfg, mask);
        std::vector<double> ratios;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const double mf = metric(run_hsao_single(tc, full_cfg, steps, seed));
            const double ma = metric(run_hsao_single(tc, abl_cfg, steps, seed));
            ratios.push_back(ma / std::max(mf, 1e-12));
            dg.add(mf);
            dg.add(ma);
        }
        return median(ratios);
    };

    auto upnorm_variance = [](const HsaoRunResult& res) {
        std::vector<double> xs;
        for (const auto& row : res.rows) xs.push_back(row.update_norm);
        return sample_variance(xs);
    };
    auto overshoots = [](const HsaoRunResult& res) {
        std::vector<double> inc;
        for (std::size_t i = 1; i < res.rows.size(); ++i)
            inc.push_back(res.rows[i].loss - res.rows[i - 1].loss);
        const std::vector<double> tail(inc.begin() + 100, inc.end());
        return double(overshoot_count(tail, 50));
    };
    auto par_flips = [](const HsaoRunResult& res) {
        std::vector<double> xs;
        for (std::size_t i = 200; i < res.rows.size(); ++i)
            xs.push_back(res.rows[i].update_par);
        return sign_flip_rate(xs);
    };

    TaskConfig noisy;
    noisy.kind = TaskKind::drifting_quadratic;
    noisy.dimension = 10;
    noisy.noise_std = 0.5;
    noisy.batch_size = 8;
    HsaoConfig hc;
    hc.alpha0 = 0.1;
    const double r_noise =
        ratio_median(noisy, hc, {"noise_gate"}, 2000, upnorm_variance);

    TaskConfig drifting;
    drifting.kind = TaskKind::drifting_quadratic;
    drifting.dimension = 10;
    drifting.drift_rate = 0.05;
    drifting.batch_size = 0;
    const double r_bias =
        ratio_median(drifting, hc, {"bias_gate"}, 2000, overshoots);

    TaskConfig valley;
    valley.kind = TaskKind::ill_conditioned_valley;
    valley.dimension = 10;
    valley.condition_number = 1000.0;
    // keep the batch noise on: with exact gradients the gates collapse the
    // step size and the crossing oscillation dies before it can flip signs
    valley.batch_size = 8;
    valley.noise_std = 0.1;
    HsaoConfig hv;
    hv.alpha0 = 1.0;
    hv.eta = 0.99;
    const double r_align =
        ratio_median(valley, hv, {"alignment_correction"}, 2000, par_flips);

    dg.add(r_noise);
    dg.add(r_bias);
    dg.add(r_align);
    r.pass = r_noise > 1.0 && r_bias > 1.0 && r_align > 1.0;
    r.detail = "median ratios: update-norm var " + fmt(r_noise) +
               ", overshoots " + fmt(r_bias) + ", sign flips " + fmt(r_align);
    r.digest = dg.h;
    return r;
}

// 10. Every inner update of the learned optimizer obeys its norm bound.
CriterionResult crit_update_bound() {
    CriterionResult r{10, "update-norm-bound", true, "", 0, 0.0};
    Digest dg;
    Rng rng(seed_chain(10, 0xACC));
    long bad = 0;
    double worst_margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 1000; ++i) {
        MetaOptimizer meta = make_meta(
            seed_chain(0xD0, std::uint64_t(i)),
            std::exp(rng.uniform(std::log(0.01), std::log(1.0))));
        // scale the parameters to reach saturated outputs as well
        Eigen::VectorXd phi = flatten(meta.phi);
        phi *= std::exp(rng.uniform(std::log(0.25), std::log(32.0)));
        unflatten(phi, meta.phi);

        MetaTaskConfig tc;
        const MetaTask task(tc, 10, seed_chain(0x7A5, std::uint64_t(i)));
        std::vector<InnerStepInfo> rows;
        try {
            adapt(task, meta, 10, &rows);
        } catch (const InnerLoopFailure&) {
            bad += 1;
            continue;
        }
        for (const auto& row : rows) {
            if (!(row.update_norm <= row.bound)) bad += 1;
            worst_margin = std::min(worst_margin, row.bound - row.update_norm);
            dg.add(row.update_norm);
            dg.add(row.bound);
        }
    }
    r.pass = bad == 0;
    r.detail = "10000 inner steps, " + std::to_string(bad) +
               " violations, smallest slack " + fmt(worst_margin);
    r.digest = dg.h;
    return r;
}

// 11. Meta-training must beat the best fixed-rate SGD from the grid by >= 10%
//     held-out, in at least 4 of 5 meta-training seeds.
CriterionResult crit_meta_vs_sgd() {
    CriterionResult r{11, "meta-vs-sgd", true, "", 0, 0.0};
    Digest dg;
    const MllpRunConfig cfg;  // defaults

    double grid_means[5];
    for (int j = 0; j < 5; ++j) {
        double sum = 0.0;
        for (int i = 0; i < cfg.heldout_tasks; ++i) {
            const MetaTask task(cfg.task, cfg.K,
                                cfg.heldout_seed_base + std::uint64_t(i));
            Eigen::VectorXd theta = Eigen::VectorXd::Zero(cfg.task.dimension);
            for (int k = 0; k < cfg.K; ++k) {
                auto [loss, g] = task.loss_and_grad(theta, k);
                (void)loss;
                theta -= kSgdGridRates[j] * g;
            }
            sum += task.true_loss(theta);
        }
        grid_means[j] = sum / double(cfg.heldout_tasks);
        dg.add(grid_means[j]);
    }
    double best_sgd = grid_means[0];
    bool frozen_ok = true;
    for (int j = 0; j < 5; ++j) {
        best_sgd = std::min(best_sgd, grid_means[j]);
        if (!std::isnan(kSgdGridMeans[j]) &&
            std::abs(grid_means[j] - kSgdGridMeans[j]) > 1e-9) {
            frozen_ok = false;
        }
    }

    int wins = 0;
    std::string means;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const MllpRunResult res = run_mllp_single(cfg, seed);
        if (res.heldout_mean <= 0.9 * best_sgd) wins += 1;
        dg.add(res.heldout_mean);
        means += (means.empty() ? "" : "/") + fmt(res.heldout_mean);
    }
    r.pass = wins >= 4 && frozen_ok;
    r.detail = "held-out " + means + " vs best sgd " + fmt(best_sgd) + " (" +
               std::to_string(wins) + "/5 wins >= 10%)";
    if (std::isnan(kSgdGridMeans[0])) {
        // print exact values so they can be pinned verbatim
        std::ostringstream hx;
        hx << std::hexfloat;
        for (int j = 0; j < 5; ++j) hx << (j ? ", " : "") << grid_means[j];
        r.detail += " [grid not pinned: " + hx.str() + "]";
    } else if (!frozen_ok) {
        r.detail += " [FROZEN GRID MISMATCH]";
    }
    r.digest = dg.h;
    return r;
}

}  // namespace

std::vector<CriterionResult> run_criteria() {
    using Fn = CriterionResult (*)();
    const Fn fns[] = {crit_rate_bound,       crit_gate_ranges,
                      crit_gradient_oracle,  crit_adam_reduction,
                      crit_convergence,      crit_noise_monotonicity,
                      crit_entropy_modulation, crit_reward_flip,
                      crit_ablations,        crit_update_bound,
                      crit_meta_vs_sgd};
    std::vector<CriterionResult> results;
    int id = 1;
    for (const Fn fn : fns) {
        const auto t0 = std::chrono::steady_clock::now();
        CriterionResult res;
        try {
            res = fn();
        } catch (const std::exception& e) {
            res.id = id;
            res.name = "criterion-" + std::to_string(id);
            res.pass = false;
            res.detail = std::string("exception: ") + e.what();
        }
        res.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        results.push_back(std::move(res));
        id += 1;
    }
    return results;
}

std::vector<CriterionResult> run_acceptance() {
    std::vector<CriterionResult> first = run_criteria();
    const std::vector<CriterionResult> second = run_criteria();

    CriterionResult det{12, "determinism", true, "", 0, 0.0};
    std::string mismatches;
    for (std::size_t i = 0; i < first.size(); ++i) {
        det.seconds += second[i].seconds;
        if (first[i].digest != second[i].digest) {
            det.pass = false;
            mismatches += (mismatches.empty() ? "" : ",") + first[i].name;
        }
    }
    det.detail = det.pass ? "all 11 criteria re-ran with identical digests"
                          : "digest drift in: " + mismatches;
    first.push_back(std::move(det));
    return first;
}

int acceptance_main() {
    const std::vector<CriterionResult> results = run_acceptance();
    bool all = true;
    std::cout << "acceptance suite\n";
    for (const auto& r : results) {
        all = all && r.pass;
        std::ostringstream secs;
        secs << std::fixed << std::setprecision(1) << r.seconds;
        std::cout << std::setw(2) << r.id << "  "
                  << (r.pass ? "PASS" : "FAIL") << "  " << std::left
                  << std::setw(24) << r.name << std::right << " ["
                  << secs.str() << "s]  " << r.detail << "\n";
    }
    std::cout << (all ? "acceptance: all criteria passed"
                      : "acceptance: FAILURES present")
              << "\n";
    return all ? 0 : 1;
}

}  // namespace errdyn
