#include "synth/gan.hpp"

#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

#include "synth/error.hpp"
#include "synth/log.hpp"

namespace synth {

using nlohmann::json;

namespace {

constexpr double kProbClamp = 1e-7;

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

}  // namespace

void TrainConfig::validate() const {
    if (lambda < 0.0) throw ValidationError("train: lambda must be >= 0");
    if (eta_d <= 0.0) throw ValidationError("train: eta_d must be positive");
    if (steps <= 0) throw ValidationError("train: steps must be positive");
    if (noise_dim <= 0) throw ValidationError("train: noise_dim must be positive");
    if (batch < 0) throw ValidationError("train: batch must be >= 0");
    if (d_steps_per_g < 1) throw ValidationError("train: d_steps_per_g must be >= 1");
    if (instance_noise < 0.0) throw ValidationError("train: instance_noise must be >= 0");
    if (leak <= 0.0 || leak >= 1.0) throw ValidationError("train: leak must be in (0,1)");
}

DiscriminatorLoss discriminator_loss(const Vector& d_real, const Vector& d_fake,
                                     const std::vector<int>& validity, double lambda) {
    if (d_fake.size() != static_cast<Eigen::Index>(validity.size()))
        throw ShapeError("discriminator_loss: fake/validity length mismatch");
    if (d_real.size() == 0 || d_fake.size() == 0)
        throw ShapeError("discriminator_loss: empty batch");
    const double Br = static_cast<double>(d_real.size());
    const double Bf = static_cast<double>(d_fake.size());

    DiscriminatorLoss out;
    out.real_grads = Matrix::Zero(d_real.size(), 1);
    out.fake_grads = Matrix::Zero(d_fake.size(), 1);
    // Gradients are per-example loss terms without the 1/B mean factor:
    // privatize() divides the clipped sum by B, which restores the mean.
    for (Eigen::Index i = 0; i < d_real.size(); ++i) {
        double p = clamp_prob(d_real[i]);
        out.loss += -std::log(p) / Br;
        out.real_grads(i, 0) = -1.0 / p;
    }
    for (Eigen::Index i = 0; i < d_fake.size(); ++i) {
        double w = 1.0 + lambda * (1.0 - validity[i]);
        double p = clamp_prob(d_fake[i]);
        out.loss += w * -std::log(1.0 - p) / Bf;
        out.fake_grads(i, 0) = w / (1.0 - p);
    }
    return out;
}

double literal_discriminator_value(const Vector& d_real, const Vector& d_fake,
                                   const std::vector<int>& validity, double lambda) {
    if (d_fake.size() != static_cast<Eigen::Index>(validity.size()))
        throw ShapeError("literal_discriminator_value: fake/validity length mismatch");
    double real_term = 0.0, fake_term = 0.0, cm_term = 0.0;
    for (Eigen::Index i = 0; i < d_real.size(); ++i)
        real_term += std::log(clamp_prob(d_real[i]));
    for (Eigen::Index i = 0; i < d_fake.size(); ++i) {
        fake_term += std::log(1.0 - clamp_prob(d_fake[i]));
        cm_term += validity[i];
    }
    real_term /= static_cast<double>(d_real.size());
    fake_term /= static_cast<double>(d_fake.size());
    cm_term /= static_cast<double>(d_fake.size());
    return real_term + fake_term - lambda * cm_term;
}

GeneratorLoss generator_loss(const Vector& d_fake, bool saturating) {
    if (d_fake.size() == 0) throw ValidationError("generator_loss: empty batch");
    const double B = static_cast<double>(d_fake.size());
    GeneratorLoss out;
    out.fake_grads = Matrix::Zero(d_fake.size(), 1);
    for (Eigen::Index i = 0; i < d_fake.size(); ++i) {
        double p = clamp_prob(d_fake[i]);
        if (saturating) {
            out.loss += std::log(1.0 - p) / B;
            out.fake_grads(i, 0) = -1.0 / ((1.0 - p) * B);
        } else {
            out.loss += -std::log(p) / B;
            out.fake_grads(i, 0) = -1.0 / (p * B);
        }
    }
    return out;
}

GanModel build_model(std::shared_ptr<const TableSchema> schema, const ConstraintSet& rules,
                     const TrainConfig& cfg) {
    GanModel model;
    model.schema = schema;
    model.rules = rules;
    model.noise_dim = cfg.noise_dim;
    Encoder enc(schema);
    RngStream init_g = RngStream::derive(cfg.seed, "init-generator");
    RngStream init_d = RngStream::derive(cfg.seed, "init-discriminator");
    model.generator = make_mlp(cfg.noise_dim, cfg.hidden_g, enc.dim(),
                               Act::SoftmaxSegments, enc.softmax_segments(), init_g, cfg.leak);
    model.discriminator =
        make_mlp(enc.dim(), cfg.hidden_d, 1, Act::Sigmoid, {}, init_d, cfg.leak);
    return model;
}

json TrainReport::to_json() const {
    json steps = json::array();
    for (const auto& t : trace) {
        steps.push_back({{"step", t.step},
                         {"loss_d", t.loss_d},
                         {"loss_d_literal", t.loss_d_literal},
                         {"loss_g", t.loss_g},
                         {"violation_rate", t.violation_rate},
                         {"rule_satisfaction", t.rule_satisfaction},
                         {"epsilon", t.epsilon}});
    }
    return json{{"status", status},
                {"steps_taken", steps_taken},
                {"final_epsilon", final_epsilon},
                {"final_violation_rate", final_violation_rate},
                {"clip_violations", clip_violations},
                {"real_accesses_total", real_accesses_total},
                {"real_accesses_during_generator_update", real_accesses_during_generator_update},
                {"wall_time_seconds", wall_time_seconds},
                {"trace", steps}};
}

TrainResult train(const Table& table, std::shared_ptr<const TableSchema> schema,
                  const ConstraintSet& rules, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
    auto t_start = std::chrono::steady_clock::now();
    cfg.validate();
    if (table.row_count() == 0) throw ValidationError("train: empty table");

    const size_t m = table.row_count();
    const int batch = cfg.batch > 0
                          ? cfg.batch
                          : static_cast<int>(std::min<size_t>(256, std::max<size_t>(1, m / 4)));
    const double q = std::min(1.0, static_cast<double>(batch) / static_cast<double>(m));

    PrivacySpec privacy = cfg.privacy;
    privacy.sampling_rate = q;
    privacy.max_steps = cfg.steps;
    privacy.validate(m);

    TrainResult result;
    result.model = build_model(schema, rules, cfg);
    Encoder enc(schema);

    RngStream rng_subsample = RngStream::derive(cfg.seed, "subsample");
    RngStream rng_noise_z = RngStream::derive(cfg.seed, "noise-z");
    RngStream rng_dp = RngStream::derive(cfg.seed, "dp-noise");
    RngStream rng_instance = RngStream::derive(cfg.seed, "instance-noise");

    Accountant accountant;
    if (privacy.is_private()) accountant = Accountant(q, privacy.sigma);

    AdamState adam_state = AdamState::zeros_like(result.model.generator);

    TrainReport& report = result.report;
    report.status = "completed";

    auto draw_noise = [&](int rows) {
        Matrix z(rows, cfg.noise_dim);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cfg.noise_dim; ++c) z(r, c) = rng_noise_z.next_gaussian();
        return z;
    };

    // Annealed instance noise on discriminator inputs; identity once the
    // schedule reaches zero.
    auto blur = [&](Matrix x, long step) {
        double s = cfg.instance_noise *
                   (1.0 - static_cast<double>(step - 1) / static_cast<double>(cfg.steps));
        if (s <= 0.0) return x;
        for (Eigen::Index r = 0; r < x.rows(); ++r)
            for (Eigen::Index c = 0; c < x.cols(); ++c)
                x(r, c) += s * rng_instance.next_gaussian();
        return x;
    };

    long accounted_steps = 0;
    for (long step = 1; step <= cfg.steps; ++step) {
        StepTrace trace;
        trace.step = step;

        for (int d_iter = 0; d_iter < cfg.d_steps_per_g; ++d_iter) {
            // Budget check happens before the step touches real data: halt on
            // the step whose epsilon would exceed the target.
            if (privacy.is_private()) {
                double eps_next = accountant.epsilon_after(accounted_steps + 1, privacy.delta);
                if (eps_next > privacy.epsilon) {
                    report.status = "budget-exhausted";
                    goto done;
                }
            }

            // Poisson-subsampled minibatch: each row independently with prob q.
            std::vector<size_t> idx;
            for (size_t i = 0; i < m; ++i)
                if (rng_subsample.next_double() < q) idx.push_back(i);

            if (!idx.empty()) {
                const int B = static_cast<int>(idx.size());
                Matrix x_real = enc.encode_rows_audited(table, idx);
                Matrix z = draw_noise(B);
                Matrix x_fake = forward(result.model.generator, z);

                Table fake_records = enc.decode(x_fake);
                ViolationReport vr;
                std::vector<int> validity = rules.evaluate_batch(fake_records, &vr);
                trace.violation_rate = vr.rate();
                double sat = 0.0;
                for (const auto& r : fake_records.rows) sat += rules.satisfaction_fraction(r);
                trace.rule_satisfaction = sat / static_cast<double>(B);

                ForwardCache cache_real, cache_fake;
                Vector d_real =
                    forward(result.model.discriminator, blur(x_real, step), &cache_real).col(0);
                Vector d_fake =
                    forward(result.model.discriminator, blur(x_fake, step), &cache_fake).col(0);

                DiscriminatorLoss dl = discriminator_loss(d_real, d_fake, validity, cfg.lambda);
                trace.loss_d = dl.loss;
                trace.loss_d_literal =
                    literal_discriminator_value(d_real, d_fake, validity, cfg.lambda);
                if (!std::isfinite(dl.loss)) {
                    if (hooks.checkpoint) hooks.checkpoint(step, result.model);
                    throw NumericError("train: non-finite discriminator loss at step " +
                                       std::to_string(step));
                }

                BackwardResult bw_real =
                    backward_per_example(result.model.discriminator, cache_real, dl.real_grads);
                BackwardResult bw_fake =
                    backward_per_example(result.model.discriminator, cache_fake, dl.fake_grads);

                // One per-example gradient per real record: its own term plus
                // its paired fake term.
                std::vector<GradientSet> per_example;
                per_example.reserve(B);
                for (int i = 0; i < B; ++i) {
                    GradientSet g = std::move(bw_real.per_example[i]);
                    g.add(bw_fake.per_example[i]);
                    per_example.push_back(std::move(g));
                }
                for (const auto& g : per_example) {
                    double post = clip_gradient(g, privacy.clip).global_l2_norm();
                    if (post > privacy.clip + 1e-12) ++report.clip_violations;
                }

                GradientSet update = privatize(per_example, privacy.clip, privacy.sigma, rng_dp);
                sgd_step(result.model.discriminator, update, cfg.eta_d);
            }

            if (privacy.is_private()) {
                accountant.step();
                ++accounted_steps;
                trace.epsilon = accountant.epsilon_at(privacy.delta);
            }
            if (hooks.audit_log) {
                json line{{"step", step},
                          {"d_iter", d_iter},
                          {"q", q},
                          {"sigma", privacy.sigma},
                          {"delta", privacy.delta},
                          {"epsilon", trace.epsilon}};
                (*hooks.audit_log) << line.dump() << "\n";
            }
        }

        {
            // Generator update: adversarial gradient through the frozen
            // discriminator; must not touch real records (post-processing).
            const uint64_t accesses_before = table.accesses();
            Matrix z = draw_noise(batch);
            ForwardCache cache_g, cache_d;
            Matrix x_fake = forward(result.model.generator, z, &cache_g);
            Vector d_fake =
                forward(result.model.discriminator, blur(x_fake, step), &cache_d).col(0);
            GeneratorLoss gl = generator_loss(d_fake, cfg.saturating_generator_loss);
            trace.loss_g = gl.loss;
            if (!std::isfinite(gl.loss)) {
                if (hooks.checkpoint) hooks.checkpoint(step, result.model);
                throw NumericError("train: non-finite generator loss at step " +
                                   std::to_string(step));
            }
            BatchBackwardResult through_d =
                backward_batch(result.model.discriminator, cache_d, gl.fake_grads);
            BatchBackwardResult gen_grads =
                backward_batch(result.model.generator, cache_g, through_d.input_grads);
            adam_step(result.model.generator, gen_grads.grads, adam_state, cfg.adam_g);
            report.real_accesses_during_generator_update += table.accesses() - accesses_before;
        }

        report.trace.push_back(trace);
        report.steps_taken = step;
        if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && hooks.checkpoint)
            hooks.checkpoint(step, result.model);
    }
done:
    if (privacy.is_private()) report.final_epsilon = accountant.epsilon_at(privacy.delta);
    if (!report.trace.empty()) report.final_violation_rate = report.trace.back().violation_rate;
    report.real_accesses_total = table.accesses();
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    log_info("train: " + report.status + " after " + std::to_string(report.steps_taken) +
             " steps, epsilon=" + std::to_string(report.final_epsilon));
    return result;
}

SampleResult sample(const GanModel& model, size_t count, RngStream& rng,
                    bool reject_invalid) {
    if (count == 0) throw ValidationError("sample: count must be positive");
    Encoder enc(model.schema);
    SampleResult out;
    out.table.schema = model.schema;
    out.table.rows.reserve(count);

    auto draw_row = [&]() {
        Matrix z(1, model.noise_dim);
        for (int c = 0; c < model.noise_dim; ++c) z(0, c) = rng.next_gaussian();
        Matrix x = forward(model.generator, z);
        return enc.decode_row(x.row(0).transpose());
    };

    size_t violations = 0;
    for (size_t i = 0; i < count; ++i) {
        Record r = draw_row();
        if (reject_invalid) {
            int attempts = 0;
            while (model.rules.evaluate(r) == 0) {
                if (++attempts > 1000)
                    throw GenerationError("sample: rejection mode could not find a valid row");
                r = draw_row();
                ++out.resampled_rows;
            }
        }
        if (model.rules.evaluate(r) == 0) ++violations;
        out.table.rows.push_back(std::move(r));
    }
    out.violation_rate = static_cast<double>(violations) / static_cast<double>(count);
    return out;
}

}  // namespace synth
