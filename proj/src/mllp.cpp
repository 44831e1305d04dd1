#include "errdyn/mllp.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "errdyn/hsao.hpp"

namespace errdyn {

MetaOptimizer make_meta(std::uint64_t seed, double alpha_max,
                        const std::vector<Eigen::Index>& hidden) {
    Rng rng(seed_chain(seed, 0x3e7a));
    std::vector<Eigen::Index> dims{5};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(3);
    std::vector<Act> acts(dims.size() - 1, Act::tanh);
    acts.back() = Act::identity;
    MetaOptimizer meta;
    meta.phi = make_net(dims, acts, rng);
    meta.alpha_max = alpha_max;
    return meta;
}

MetaTask::MetaTask(const MetaTaskConfig& config, int K, std::uint64_t seed)
    : K_(K) {
    const int d = config.dimension;
    Rng rng(seed_chain(seed, 0x3a5d));
    lambda_.resize(d);
    for (int i = 0; i < d; ++i) {
        lambda_(i) = std::exp(
            rng.uniform(std::log(config.curv_lo), std::log(config.curv_hi)));
    }
    opt_.resize(d);
    for (int i = 0; i < d; ++i) opt_(i) = rng.normal() / std::sqrt(double(d));
    regression_ = (config.kind == "regression");
    if (regression_) {
        batches_x_.reserve(K);
        batches_y_.reserve(K);
        for (int k = 0; k < K; ++k) {
            Eigen::MatrixXd X(d, config.batch_size);
            Eigen::VectorXd y(config.batch_size);
            for (int c = 0; c < config.batch_size; ++c) {
                for (int i = 0; i < d; ++i)
                    X(i, c) = std::sqrt(lambda_(i)) * rng.normal();
                y(c) = opt_.dot(X.col(c)) + config.loss_noise * rng.normal();
            }
            batches_x_.push_back(std::move(X));
            batches_y_.push_back(std::move(y));
        }
    } else {
        grad_noise_.resize(K, d);
        for (int k = 0; k < K; ++k)
            for (int i = 0; i < d; ++i)
                grad_noise_(k, i) = config.grad_noise * rng.normal();
        loss_noise_.resize(K);
        for (int k = 0; k < K; ++k)
            loss_noise_(k) = config.loss_noise * rng.normal();
    }
}

std::pair<double, Eigen::VectorXd> MetaTask::loss_and_grad(
    const Eigen::Ref<const Eigen::VectorXd>& theta, int k) const {
    if (k < 0 || k >= K_) throw std::invalid_argument("MetaTask: bad step");
    if (regression_) {
        const Eigen::MatrixXd& X = batches_x_[std::size_t(k)];
        const Eigen::VectorXd resid =
            X.transpose() * theta - batches_y_[std::size_t(k)];
        const double inv_b = 1.0 / double(X.cols());
        return {0.5 * inv_b * resid.squaredNorm(), inv_b * (X * resid)};
    }
    const Eigen::VectorXd r = theta - opt_;
    const double loss = 0.5 * r.dot(lambda_.cwiseProduct(r)) + loss_noise_(k);
    Eigen::VectorXd g = lambda_.cwiseProduct(r) + grad_noise_.row(k).transpose();
    return {loss, std::move(g)};
}

double MetaTask::true_loss(
    const Eigen::Ref<const Eigen::VectorXd>& theta) const {
    const Eigen::VectorXd r = theta - opt_;
    return 0.5 * r.dot(lambda_.cwiseProduct(r));
}

double squash(double x) { return (2.0 / 3.14159265358979323846) * std::atan(x); }

Eigen::MatrixXd features(const Eigen::Ref<const Eigen::VectorXd>& g,
                         const Eigen::Ref<const Eigen::VectorXd>& v,
                         const DiagnosticSnapshot& snap) {
    const Eigen::Index d = g.size();
    Eigen::MatrixXd X(5, d);
    const double fb = squash(snap.b), fn = squash(snap.nu), fs = squash(snap.s);
    for (Eigen::Index i = 0; i < d; ++i) {
        X(0, i) = squash(g(i));
        X(1, i) = squash(v(i));
        X(2, i) = fb;
        X(3, i) = fn;
        X(4, i) = fs;
    }
    return X;
}

InnerStepInfo inner_step(InnerLoopState& state,
                         const Eigen::Ref<const Eigen::VectorXd>& g,
                         double loss, const MetaOptimizer& meta) {
    if (g.size() != state.theta.size()) {
        throw std::invalid_argument("inner_step: dimension mismatch");
    }
    state.t += 1;
    state.m = meta.gamma * state.m + (1.0 - meta.gamma) * g;
    state.v = meta.eta * state.v.array() + (1.0 - meta.eta) * g.array().square();
    observe_loss(state.diag, loss);
    observe_direction(state.diag, g, state.m);
    const DiagnosticSnapshot snap = snapshot(state.diag);

    const Eigen::MatrixXd X = features(g, state.v, snap);
    const Eigen::MatrixXd out = forward(meta.phi, X);  // (3, d)
    if (!out.allFinite()) {
        throw InnerLoopFailure("inner_step: non-finite network output");
    }

    const Eigen::Index d = g.size();
    const Eigen::VectorXd gt =
        directional_correction(g, state.m, snap.s, meta.tau, meta.epsilon);

    Eigen::VectorXd update(d);
    double amean = 0.0, amin = meta.alpha_max, amax = 0.0, bound2 = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        const double omega = std::tanh(out(0, i));
        const double zeta = std::tanh(out(1, i));
        const double alpha =
            meta.alpha_max / (1.0 + std::exp(-out(2, i)));
        const double denom = std::sqrt(state.v(i)) + meta.epsilon;
        update(i) = -alpha * (omega * g(i) + zeta * gt(i)) / denom;
        amean += alpha;
        amin = std::min(amin, alpha);
        amax = std::max(amax, alpha);
        const double ghat = std::max(std::abs(g(i)), std::abs(gt(i))) / denom;
        const double bi = (std::abs(omega) + std::abs(zeta)) * ghat;
        bound2 += bi * bi;
    }
    state.theta += update;

    InnerStepInfo info;
    info.t = state.t;
    info.loss = loss;
    info.alpha_mean = amean / double(d);
    info.alpha_min = amin;
    info.alpha_max = amax;
    info.update_norm = update.norm();
    info.bound = meta.alpha_max * std::sqrt(bound2);
    info.b = snap.b;
    info.nu = snap.nu;
    info.s = snap.s;
    info.rho_bias = snap.rho_bias;
    info.rho_noise = snap.rho_noise;
    return info;
}

double adapt(const MetaTask& task, const MetaOptimizer& meta, int K,
             std::vector<InnerStepInfo>* rows) {
    if (K < 1) throw std::invalid_argument("adapt: K must be >= 1");
    InnerLoopState state(task.dim(), K, meta.diag);
    for (int k = 0; k < K; ++k) {
        auto [loss, g] = task.loss_and_grad(state.theta, k);
        const InnerStepInfo info = inner_step(state, g, loss, meta);
        if (rows) rows->push_back(info);
    }
    return task.true_loss(state.theta);
}

namespace {

double batch_objective(const std::vector<MetaTask>& tasks,
                       const MetaOptimizer& meta, int K, int* failures) {
    double sum = 0.0;
    int ok = 0;
    for (const auto& t : tasks) {
        try {
            sum += adapt(t, meta, K);
            ok += 1;
        } catch (const InnerLoopFailure&) {
            if (failures) *failures += 1;
        }
    }
    if (ok == 0) throw InnerLoopFailure("all tasks failed");
    return sum / double(ok);
}

}  // namespace

MetaTrainResult meta_train(const MetaOptimizer& init, const MetaTaskConfig& tc,
                           int K, const EsConfig& es, std::uint64_t meta_seed) {
    MetaOptimizer meta = init;
    Eigen::VectorXd phi = flatten(meta.phi);
    const Eigen::Index P = phi.size();
    Rng rng(seed_chain(meta_seed, 0xe5e5));

    std::vector<MetaTask> val;
    val.reserve(std::size_t(es.val_tasks));
    for (int i = 0; i < es.val_tasks; ++i) {
        val.emplace_back(tc, K, es.val_seed_base + std::uint64_t(i));
    }

    auto eval_on = [&](const std::vector<MetaTask>& tasks,
                       const Eigen::VectorXd& p) {
        unflatten(p, meta.phi);
        return batch_objective(tasks, meta, K, nullptr);
    };

    MetaTrainResult result;
    result.initial_val = eval_on(val, phi);
    result.best_val = result.initial_val;
    Eigen::VectorXd best_phi = phi;
    result.val_curve.push_back({0, result.initial_val});

    for (int it = 0; it < es.iters; ++it) {
        std::vector<MetaTask> tasks;
        tasks.reserve(std::size_t(es.batch));
        for (int i = 0; i < es.batch; ++i) {
            tasks.emplace_back(tc, K,
                               es.train_seed_base +
                                   meta_seed * 100000ULL +
                                   std::uint64_t(it) * 100ULL +
                                   std::uint64_t(i));
        }
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(P);
        for (int p = 0; p < es.pairs; ++p) {
            Eigen::VectorXd u(P);
            for (Eigen::Index i = 0; i < P; ++i) u(i) = rng.normal();
            try {
                const double fp = eval_on(tasks, phi + es.sigma * u);
                const double fm = eval_on(tasks, phi - es.sigma * u);
                grad += (fp - fm) * u;
            } catch (const InnerLoopFailure&) {
                result.skipped_pairs += 1;
                std::cerr << "meta_train: skipping perturbation pair at iter "
                          << it << " (inner loop failed on all tasks)\n";
            }
        }
        grad /= (2.0 * es.sigma * double(es.pairs));
        phi -= es.lr_meta * grad;
        if ((it + 1) % es.val_every == 0) {
            const double v = eval_on(val, phi);
            result.val_curve.push_back({it + 1, v});
            if (v < result.best_val) {
                result.best_val = v;
                best_phi = phi;
            }
        }
    }
    unflatten(best_phi, meta.phi);
    result.meta = meta;
    return result;
}

void save_meta(const MetaOptimizer& meta, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_meta: cannot open " + path);
    out << "errdyn-meta 1\n";
    out << "dims";
    out << " " << meta.phi.layers.front().W.cols();
    for (const auto& l : meta.phi.layers) out << " " << l.W.rows();
    out << "\n";
    out << "acts";
    for (const auto& l : meta.phi.layers) {
        switch (l.act) {
            case Act::identity: out << " identity"; break;
            case Act::tanh: out << " tanh"; break;
            case Act::relu: out << " relu"; break;
            case Act::softplus: out << " softplus"; break;
            case Act::sigmoid: out << " sigmoid"; break;
        }
    }
    out << "\n";
    char buf[64];
    auto hex = [&buf](double x) {
        std::snprintf(buf, sizeof buf, "%a", x);
        return std::string(buf);
    };
    out << "scalars " << hex(meta.alpha_max) << " " << hex(meta.epsilon) << " "
        << hex(meta.gamma) << " " << hex(meta.eta) << " " << hex(meta.tau)
        << "\n";
    out << "diag " << hex(meta.diag.alpha) << " " << hex(meta.diag.beta) << " "
        << hex(meta.diag.zeta) << " " << hex(meta.diag.lambda) << " "
        << hex(meta.diag.epsilon) << "\n";
    const Eigen::VectorXd flat = flatten(meta.phi);
    out << "params " << flat.size() << "\n";
    for (Eigen::Index i = 0; i < flat.size(); ++i) out << hex(flat(i)) << "\n";
}

MetaOptimizer load_meta(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_meta: cannot open " + path);
    std::string tag;
    int version = 0;
    in >> tag >> version;
    if (tag != "errdyn-meta" || version != 1) {
        throw std::runtime_error("load_meta: unsupported format");
    }
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    std::istringstream dims_in(line);
    dims_in >> tag;
    std::vector<Eigen::Index> dims;
    for (Eigen::Index d; dims_in >> d;) dims.push_back(d);
    std::getline(in, line);
    std::istringstream acts_in(line);
    acts_in >> tag;
    std::vector<Act> acts;
    for (std::string a; acts_in >> a;) {
        if (a == "identity") acts.push_back(Act::identity);
        else if (a == "tanh") acts.push_back(Act::tanh);
        else if (a == "relu") acts.push_back(Act::relu);
        else if (a == "softplus") acts.push_back(Act::softplus);
        else if (a == "sigmoid") acts.push_back(Act::sigmoid);
        else throw std::runtime_error("load_meta: unknown activation " + a);
    }
    if (dims.size() < 2 || acts.size() != dims.size() - 1) {
        throw std::runtime_error("load_meta: dims/acts mismatch");
    }

    MetaOptimizer meta;
    // stream extraction of doubles rejects hexfloat, so tokenize and strtod
    auto read_double = [&in](double& x) {
        std::string tok;
        if (!(in >> tok)) throw std::runtime_error("load_meta: truncated file");
        x = std::strtod(tok.c_str(), nullptr);
    };
    in >> tag;
    if (tag != "scalars") throw std::runtime_error("load_meta: bad scalars row");
    read_double(meta.alpha_max);
    read_double(meta.epsilon);
    read_double(meta.gamma);
    read_double(meta.eta);
    read_double(meta.tau);
    in >> tag;
    if (tag != "diag") throw std::runtime_error("load_meta: bad diag row");
    read_double(meta.diag.alpha);
    read_double(meta.diag.beta);
    read_double(meta.diag.zeta);
    read_double(meta.diag.lambda);
    read_double(meta.diag.epsilon);

    Eigen::Index n = 0;
    in >> tag >> n;
    if (tag != "params") throw std::runtime_error("load_meta: bad params row");
    Rng dummy(0);
    meta.phi = make_net(dims, acts, dummy);
    if (n != meta.phi.param_count()) {
        throw std::runtime_error("load_meta: parameter count mismatch");
    }
    Eigen::VectorXd flat(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::string tok;
        if (!(in >> tok)) throw std::runtime_error("load_meta: truncated file");
        flat(i) = std::strtod(tok.c_str(), nullptr);
    }
    unflatten(flat, meta.phi);
    return meta;
}

}  // namespace errdyn
