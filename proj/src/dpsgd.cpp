#include "synth/dpsgd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "synth/error.hpp"
#include "synth/log.hpp"

namespace synth {

void PrivacySpec::validate(size_t dataset_rows) const {
    if (epsilon <= 0.0) throw ValidationError("privacy: epsilon must be positive");
    if (delta <= 0.0 || delta >= 1.0) throw ValidationError("privacy: delta must be in (0,1)");
    if (clip <= 0.0) throw ValidationError("privacy: clip threshold must be positive");
    if (sigma < 0.0) throw ValidationError("privacy: sigma must be non-negative");
    if (sampling_rate <= 0.0 || sampling_rate > 1.0)
        throw ValidationError("privacy: sampling rate must be in (0,1]");
    if (dataset_rows > 0 && delta >= 1.0 / static_cast<double>(dataset_rows))
        log_info("privacy: delta >= 1/m; delta < 1/m is recommended");
}

GradientSet clip_gradient(const GradientSet& g, double clip) {
    if (clip <= 0.0) throw ValidationError("clip_gradient: C must be positive");
    if (!g.all_finite()) throw NumericError("clip_gradient: non-finite gradient entries");
    GradientSet out = g;
    double norm = g.global_l2_norm();
    double divisor = std::max(1.0, norm / clip);
    if (divisor > 1.0) out.scale(1.0 / divisor);
    return out;
}

GradientSet privatize(const std::vector<GradientSet>& per_example, double clip,
                      double sigma, RngStream& rng) {
    if (per_example.empty()) throw ValidationError("privatize: empty gradient list");
    if (sigma < 0.0) throw ValidationError("privatize: negative sigma");

    GradientSet sum = clip_gradient(per_example[0], clip);
    for (size_t i = 1; i < per_example.size(); ++i)
        sum.add(clip_gradient(per_example[i], clip));

    if (sigma > 0.0) {
        const double std_dev = sigma * clip;
        for (size_t k = 0; k < sum.d_weights.size(); ++k) {
            Matrix& w = sum.d_weights[k];
            for (Eigen::Index r = 0; r < w.rows(); ++r)
                for (Eigen::Index c = 0; c < w.cols(); ++c)
                    w(r, c) += std_dev * rng.next_gaussian();
            Vector& b = sum.d_bias[k];
            for (Eigen::Index r = 0; r < b.size(); ++r)
                b(r) += std_dev * rng.next_gaussian();
        }
    }
    sum.scale(1.0 / static_cast<double>(per_example.size()));
    return sum;
}

namespace {

double log_sum_exp(double a, double b) {
    double m = std::max(a, b);
    if (m == -std::numeric_limits<double>::infinity()) return m;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// log E_{z~N(0,sigma^2)} [ ((1-q) + q e^{(2z-1)/(2 sigma^2)})^alpha ]
// via composite Simpson in log space over z in [-12 sigma, alpha + 12 sigma].
double log_moment_quadrature(double q, double sigma, double alpha) {
    const double log_q = std::log(q);
    const double log_1mq = std::log1p(-q);
    const double s2 = sigma * sigma;
    const double lo = -12.0 * sigma;
    const double hi = alpha + 12.0 * sigma;
    const double target_h = sigma / 50.0;
    size_t n = static_cast<size_t>(std::ceil((hi - lo) / target_h));
    if (n % 2 == 1) ++n;
    const double h = (hi - lo) / static_cast<double>(n);

    auto log_f = [&](double z) {
        double log_density = -z * z / (2.0 * s2) - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
        double log_ratio = log_sum_exp(log_1mq, log_q + (2.0 * z - 1.0) / (2.0 * s2));
        return log_density + alpha * log_ratio;
    };

    // log-sum-exp over Simpson-weighted samples
    double max_term = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(n + 1);
    for (size_t i = 0; i <= n; ++i) {
        double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        terms[i] = log_f(lo + h * static_cast<double>(i)) + std::log(w);
        max_term = std::max(max_term, terms[i]);
    }
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - max_term);
    return max_term + std::log(acc) + std::log(h / 3.0);
}

}  // namespace

std::vector<double> Accountant::default_orders() {
    std::vector<double> orders;
    for (double a = 1.25; a <= 64.0 + 1e-9; a += 0.25) orders.push_back(a);
    return orders;
}

Accountant::Accountant(double sampling_rate, double sigma)
    : q_(sampling_rate), sigma_(sigma), orders_(default_orders()) {
    if (q_ <= 0.0 || q_ > 1.0) throw ValidationError("accountant: q must be in (0,1]");
    if (sigma_ <= 0.0) throw ValidationError("accountant: sigma must be positive");
    increments_.reserve(orders_.size());
    for (double alpha : orders_) {
        double rdp;
        if (q_ >= 1.0) {
            rdp = alpha / (2.0 * sigma_ * sigma_);
        } else {
            double log_moment = std::max(0.0, log_moment_quadrature(q_, sigma_, alpha));
            rdp = log_moment / (alpha - 1.0);
        }
        increments_.push_back(rdp);
    }
}

void Accountant::step(long n) {
    if (n < 0) throw ValidationError("accountant: negative step count");
    steps_ += n;
}

double Accountant::epsilon_after(long steps, double delta) const {
    if (delta <= 0.0 || delta >= 1.0)
        throw ValidationError("epsilon_at: delta must be in (0,1)");
    if (steps <= 0) return 0.0;
    if (increments_.empty()) throw StateError("accountant not initialized");
    double best = std::numeric_limits<double>::infinity();
    const double log_inv_delta = std::log(1.0 / delta);
    for (size_t i = 0; i < orders_.size(); ++i) {
        double eps = static_cast<double>(steps) * increments_[i] +
                     log_inv_delta / (orders_[i] - 1.0);
        best = std::min(best, eps);
    }
    return std::max(0.0, best);
}

double Accountant::epsilon_at(double delta) const { return epsilon_after(steps_, delta); }

double calibrate_noise(double eps_target, double delta, double sampling_rate, long steps) {
    if (eps_target <= 0.0) throw ValidationError("calibrate_noise: eps_target must be positive");
    if (steps <= 0) throw ValidationError("calibrate_noise: steps must be positive");
    auto eps_for = [&](double sigma) {
        Accountant acc(sampling_rate, sigma);
        return acc.epsilon_after(steps, delta);
    };
    double lo = 0.05, hi = 1.0;
    while (eps_for(hi) > eps_target) {
        hi *= 2.0;
        if (hi > 1e4) throw NumericError("calibrate_noise: sigma search diverged");
    }
    if (eps_for(lo) <= eps_target) return lo;
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        if (eps_for(mid) > eps_target) lo = mid;
        else hi = mid;
    }
    return hi;
}

}  // namespace synth
