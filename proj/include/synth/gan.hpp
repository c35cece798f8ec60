#pragma once

#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "synth/constraints.hpp"
#include "synth/data.hpp"
#include "synth/dpsgd.hpp"
#include "synth/net.hpp"

namespace synth {

struct GanModel {
    DenseNet generator;      // noise_dim -> d_enc, tanh/softmax-segment head
    DenseNet discriminator;  // d_enc -> 1, sigmoid head
    std::shared_ptr<const TableSchema> schema;
    ConstraintSet rules;
    int noise_dim = 64;

    Encoder encoder() const { return Encoder(schema); }
};

struct TrainConfig {
    double lambda = 5.0;        // constraint penalty weight; 0 degrades to plain DP-GAN
    double eta_d = 0.05;        // discriminator SGD learning rate
    AdamParams adam_g;          // generator optimizer
    int batch = 0;              // 0 -> min(256, m/4)
    long steps = 2000;
    int d_steps_per_g = 1;
    PrivacySpec privacy;
    uint64_t seed = 1;
    int noise_dim = 64;
    std::vector<int> hidden_g = {256, 256};
    std::vector<int> hidden_d = {256, 256};
    double leak = 0.2;
    // Instance-noise std added to the discriminator's inputs (real and fake
    // alike), annealed linearly to zero over the run; a stabilizer only, it
    // never changes the loss or the privacy accounting.
    double instance_noise = 0.1;
    bool saturating_generator_loss = false;
    long checkpoint_every = 0;  // 0 = no periodic checkpoints

    void validate() const;
};

struct StepTrace {
    long step = 0;
    double loss_d = 0.0;          // weighted BCE actually optimized
    double loss_d_literal = 0.0;  // logged-only literal form
    double loss_g = 0.0;
    double violation_rate = 0.0;  // of the step's generated batch
    double rule_satisfaction = 1.0;  // mean graded satisfaction, logging only
    double epsilon = 0.0;
};

struct TrainReport {
    std::vector<StepTrace> trace;
    std::string status;  // "completed" | "budget-exhausted"
    long steps_taken = 0;
    double final_epsilon = 0.0;
    double final_violation_rate = 0.0;
    size_t clip_violations = 0;
    uint64_t real_accesses_total = 0;
    uint64_t real_accesses_during_generator_update = 0;
    double wall_time_seconds = 0.0;

    nlohmann::json to_json() const;
};

struct TrainHooks {
    // Called after each discriminator step with the accountant-backed state.
    std::ostream* audit_log = nullptr;  // JSON lines: step, q, sigma, epsilon
    std::function<void(long step, const GanModel&)> checkpoint;
};

// Constraint-weighted discriminator objective:
//   mean[-log d_real] + mean[(1 + lambda (1 - CM_i)) * (-log(1 - d_fake_i))]
// Gradients are w.r.t. the discriminator outputs (probabilities), one row per
// example, ready for the per-example backward pass. Each row is the gradient
// of that example's own loss term (no 1/B factor); privatize() divides the
// clipped sum by B, recovering the mean-loss gradient when clipping is inert.
struct DiscriminatorLoss {
    double loss = 0.0;
    Matrix real_grads;  // B x 1
    Matrix fake_grads;  // B x 1
};
DiscriminatorLoss discriminator_loss(const Vector& d_real, const Vector& d_fake,
                                     const std::vector<int>& validity, double lambda);

// The displayed formula with the CM term averaged over the batch; logging and
// report parity only, never used for gradients.
double literal_discriminator_value(const Vector& d_real, const Vector& d_fake,
                                   const std::vector<int>& validity, double lambda);

struct GeneratorLoss {
    double loss = 0.0;
    Matrix fake_grads;  // B x 1
};
// Non-saturating mean[-log d_fake] by default; saturating=true minimizes the
// literal mean[log(1 - d_fake)].
GeneratorLoss generator_loss(const Vector& d_fake, bool saturating = false);

GanModel build_model(std::shared_ptr<const TableSchema> schema, const ConstraintSet& rules,
                     const TrainConfig& cfg);

struct TrainResult {
    GanModel model;
    TrainReport report;
};

TrainResult train(const Table& table, std::shared_ptr<const TableSchema> schema,
                  const ConstraintSet& rules, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

struct SampleResult {
    Table table;
    double violation_rate = 0.0;  // of the emitted table
    size_t resampled_rows = 0;    // rejection mode only
};

SampleResult sample(const GanModel& model, size_t count, RngStream& rng,
                    bool reject_invalid = false);

}  // namespace synth
