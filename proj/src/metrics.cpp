#include "errdyn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace errdyn {

double median(std::vector<double> xs) {
    if (xs.empty()) throw std::invalid_argument("median: empty input");
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double sample_variance(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    if (n < 2) return 0.0;
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / double(n);
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return ss / double(n - 1);
}

namespace {

std::vector<double> ranks(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&xs](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && xs[idx[j + 1]] == xs[idx[i]]) ++j;
        const double avg = 0.5 * double(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("spearman: need two equal-length series");
    }
    const std::vector<double> rx = ranks(x), ry = ranks(y);
    const double n = double(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = rx[i] - mx, dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

int overshoot_count(const std::vector<double>& increments, int window) {
    if (window < 1) throw std::invalid_argument("overshoot_count: bad window");
    int count = 0;
    std::vector<double> buf;
    for (std::size_t t = 1; t < increments.size(); ++t) {
        const std::size_t lo = t > std::size_t(window) ? t - std::size_t(window) : 0;
        buf.clear();
        for (std::size_t k = lo; k < t; ++k) buf.push_back(std::abs(increments[k]));
        if (increments[t] > 2.0 * median(buf)) ++count;
    }
    return count;
}

double sign_flip_rate(const std::vector<double>& xs) {
    int flips = 0, pairs = 0, prev = 0;
    for (double x : xs) {
        const int sgn = x > 0.0 ? 1 : (x < 0.0 ? -1 : 0);
        if (sgn == 0) continue;
        if (prev != 0) {
            pairs += 1;
            if (sgn != prev) flips += 1;
        }
        prev = sgn;
    }
    return pairs > 0 ? double(flips) / double(pairs) : 0.0;
}

}  // namespace errdyn
