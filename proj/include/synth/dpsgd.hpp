#pragma once

#include <vector>

#include "synth/net.hpp"
#include "synth/rng.hpp"

namespace synth {

struct PrivacySpec {
    double epsilon = 10.0;       // target epsilon; training halts before exceeding it
    double delta = 1e-5;         // target delta
    double clip = 1.0;           // per-example global L2 clipping threshold C
    double sigma = 1.0;          // noise multiplier; noise std is sigma * C
    double sampling_rate = 0.0;  // Poisson inclusion probability q; trainer sets B/m
    long max_steps = 0;

    // sigma == 0 runs the loop non-privately (no noise, no accounting); used
    // by paired private-vs-nonprivate comparisons.
    bool is_private() const { return sigma > 0.0; }
    void validate(size_t dataset_rows) const;
};

// g / max(1, ||g||_2 / C); global L2 norm over all parameters jointly.
GradientSet clip_gradient(const GradientSet& g, double clip);

// Clip each per-example gradient to C, sum in list order, add N(0, (sigma*C)^2)
// per coordinate, divide by the batch size.
GradientSet privatize(const std::vector<GradientSet>& per_example, double clip,
                      double sigma, RngStream& rng);

// Renyi-DP accountant for the Poisson-subsampled Gaussian mechanism.
// Per-order one-step increments are computed once (exactly alpha/(2 sigma^2)
// at q = 1, by quadrature otherwise) and scale linearly with step count.
class Accountant {
  public:
    Accountant() = default;
    Accountant(double sampling_rate, double sigma);

    void step(long n = 1);
    long steps() const { return steps_; }

    double epsilon_at(double delta) const;
    // Hypothetical epsilon after `steps` steps, without advancing state.
    double epsilon_after(long steps, double delta) const;

    static std::vector<double> default_orders();  // 1.25, 1.5, ..., 64
    const std::vector<double>& orders() const { return orders_; }
    const std::vector<double>& increments() const { return increments_; }

    double sampling_rate() const { return q_; }
    double sigma() const { return sigma_; }

  private:
    double q_ = 0.0;
    double sigma_ = 0.0;
    long steps_ = 0;
    std::vector<double> orders_;
    std::vector<double> increments_;  // one-step RDP per order
};

// Smallest sigma whose accountant stays within eps_target after `steps` steps.
double calibrate_noise(double eps_target, double delta, double sampling_rate, long steps);

}  // namespace synth
