#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "synth/error.hpp"
#include "synth/gan.hpp"
#include "synth/rng.hpp"
#include "synth/toy.hpp"

using namespace synth;

namespace {

Vector vec(std::initializer_list<double> vals) {
    Vector v(static_cast<Eigen::Index>(vals.size()));
    Eigen::Index i = 0;
    for (double x : vals) v(i++) = x;
    return v;
}

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.steps = 10;
    cfg.batch = 32;
    cfg.noise_dim = 8;
    cfg.hidden_g = {16};
    cfg.hidden_d = {16};
    cfg.lambda = 5.0;
    cfg.privacy.sigma = 0.0;
    cfg.seed = 7;
    return cfg;
}

}  // namespace

TEST_CASE("discriminator loss worked examples") {
    // single pair, valid fake, lambda irrelevant for valid rows
    auto dl = discriminator_loss(vec({0.8}), vec({0.4}), {1}, 5.0);
    CHECK(dl.loss == doctest::Approx(-std::log(0.8) - std::log(0.6)).epsilon(1e-14));
    CHECK(dl.real_grads(0, 0) == doctest::Approx(-1.0 / 0.8).epsilon(1e-14));
    CHECK(dl.fake_grads(0, 0) == doctest::Approx(1.0 / 0.6).epsilon(1e-14));

    // invalid fake row is up-weighted by 1 + lambda
    auto dv = discriminator_loss(vec({0.8}), vec({0.4}), {0}, 5.0);
    CHECK(dv.loss == doctest::Approx(-std::log(0.8) + 6.0 * -std::log(0.6)).epsilon(1e-14));
    CHECK(dv.fake_grads(0, 0) == doctest::Approx(6.0 / 0.6).epsilon(1e-14));
    CHECK(dv.real_grads(0, 0) == dl.real_grads(0, 0));

    // lambda = 0 ignores validity entirely
    auto l0a = discriminator_loss(vec({0.7, 0.6}), vec({0.3, 0.2}), {0, 1}, 0.0);
    auto l0b = discriminator_loss(vec({0.7, 0.6}), vec({0.3, 0.2}), {1, 1}, 0.0);
    CHECK(l0a.loss == l0b.loss);
    CHECK(l0a.fake_grads == l0b.fake_grads);

    // all-valid batch: loss is independent of lambda
    auto av5 = discriminator_loss(vec({0.7, 0.6}), vec({0.3, 0.2}), {1, 1}, 5.0);
    CHECK(av5.loss == doctest::Approx(l0b.loss).epsilon(1e-14));

    // terms are means over the batch
    auto mean2 = discriminator_loss(vec({0.5, 0.5}), vec({0.5, 0.5}), {1, 1}, 0.0);
    CHECK(mean2.loss == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("discriminator loss stays finite at probability extremes") {
    auto dl = discriminator_loss(vec({0.0, 1.0}), vec({0.0, 1.0}), {0, 0}, 5.0);
    CHECK(std::isfinite(dl.loss));
    CHECK(std::isfinite(dl.real_grads(0, 0)));
    CHECK(std::isfinite(dl.fake_grads(1, 0)));
}

TEST_CASE("discriminator loss shape checks") {
    CHECK_THROWS_AS(discriminator_loss(vec({0.5}), vec({0.5, 0.5}), {1}, 1.0), ShapeError);
    CHECK_THROWS_AS(discriminator_loss(Vector(), Vector(), {}, 1.0), ShapeError);
}

TEST_CASE("literal discriminator value worked example") {
    double e1 = std::exp(-1.0);
    // log(d_real) = -1, log(1 - d_fake) = -1, CM average = 1, lambda = 2
    double v = literal_discriminator_value(vec({e1}), vec({1.0 - e1}), {1}, 2.0);
    CHECK(v == doctest::Approx(-4.0).epsilon(1e-12));
    // invalid fake drops the CM term instead
    double v0 = literal_discriminator_value(vec({e1}), vec({1.0 - e1}), {0}, 2.0);
    CHECK(v0 == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("generator loss worked examples") {
    auto g = generator_loss(vec({0.5}));
    CHECK(g.loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(g.fake_grads(0, 0) == doctest::Approx(-2.0).epsilon(1e-14));

    // batch mean: each gradient carries the 1/B factor
    auto g2 = generator_loss(vec({0.5, 0.25}));
    CHECK(g2.loss == doctest::Approx(0.5 * (std::log(2.0) + std::log(4.0))).epsilon(1e-14));
    CHECK(g2.fake_grads(0, 0) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(g2.fake_grads(1, 0) == doctest::Approx(-2.0).epsilon(1e-14));

    auto s = generator_loss(vec({0.5}), true);
    CHECK(s.loss == doctest::Approx(std::log(0.5)).epsilon(1e-14));
    CHECK(s.fake_grads(0, 0) == doctest::Approx(-2.0).epsilon(1e-14));

    CHECK_THROWS_AS(generator_loss(Vector()), ValidationError);
}

TEST_CASE("loss gradients match finite differences") {
    RngStream rng = RngStream::derive(31, "fd");
    const double h = 1e-6;
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index B = 4;
        Vector d_real(B), d_fake(B);
        std::vector<int> validity;
        for (Eigen::Index i = 0; i < B; ++i) {
            d_real(i) = 0.05 + 0.9 * rng.next_double();
            d_fake(i) = 0.05 + 0.9 * rng.next_double();
            validity.push_back(static_cast<int>(rng.next_below(2)));
        }
        double lambda = 3.0;
        auto dl = discriminator_loss(d_real, d_fake, validity, lambda);
        for (Eigen::Index i = 0; i < B; ++i) {
            Vector rp = d_real, rm = d_real;
            rp(i) += h;
            rm(i) -= h;
            double fd = (discriminator_loss(rp, d_fake, validity, lambda).loss -
                         discriminator_loss(rm, d_fake, validity, lambda).loss) /
                        (2.0 * h);
            // per-example grads omit the 1/B mean factor by design
            CHECK(dl.real_grads(i, 0) / static_cast<double>(B) ==
                  doctest::Approx(fd).epsilon(1e-5));

            Vector fp = d_fake, fm = d_fake;
            fp(i) += h;
            fm(i) -= h;
            double fdf = (discriminator_loss(d_real, fp, validity, lambda).loss -
                          discriminator_loss(d_real, fm, validity, lambda).loss) /
                         (2.0 * h);
            CHECK(dl.fake_grads(i, 0) / static_cast<double>(B) ==
                  doctest::Approx(fdf).epsilon(1e-5));
        }

        for (bool saturating : {false, true}) {
            auto gl = generator_loss(d_fake, saturating);
            for (Eigen::Index i = 0; i < B; ++i) {
                Vector fp = d_fake, fm = d_fake;
                fp(i) += h;
                fm(i) -= h;
                double fd = (generator_loss(fp, saturating).loss -
                             generator_loss(fm, saturating).loss) /
                            (2.0 * h);
                CHECK(gl.fake_grads(i, 0) == doctest::Approx(fd).epsilon(1e-5));
            }
        }
    }
}

TEST_CASE("build_model wires the encoder dimensions into both networks") {
    RngStream rng = RngStream::derive(32, "toy");
    ToyData toy = make_toy_dataset({.rows = 50}, rng);
    TrainConfig cfg = small_config();
    GanModel model = build_model(toy.schema, toy.rules, cfg);
    Encoder enc(toy.schema);
    CHECK(model.generator.input_dim() == cfg.noise_dim);
    CHECK(model.generator.output_dim() == static_cast<int>(enc.dim()));
    CHECK(model.generator.layers.back().act == Act::SoftmaxSegments);
    CHECK(model.discriminator.input_dim() == static_cast<int>(enc.dim()));
    CHECK(model.discriminator.output_dim() == 1);
    CHECK(model.discriminator.layers.back().act == Act::Sigmoid);
}

TEST_CASE("training is deterministic for a fixed seed") {
    RngStream rng = RngStream::derive(33, "toy");
    ToyData toy = make_toy_dataset({.rows = 200}, rng);
    TrainConfig cfg = small_config();

    TrainResult a = train(toy.table, toy.schema, toy.rules, cfg);
    TrainResult b = train(toy.table, toy.schema, toy.rules, cfg);
    REQUIRE(a.report.trace.size() == b.report.trace.size());
    for (size_t i = 0; i < a.report.trace.size(); ++i) {
        CHECK(a.report.trace[i].loss_d == b.report.trace[i].loss_d);
        CHECK(a.report.trace[i].loss_g == b.report.trace[i].loss_g);
        CHECK(a.report.trace[i].violation_rate == b.report.trace[i].violation_rate);
    }
    for (size_t l = 0; l < a.model.generator.layers.size(); ++l)
        CHECK(a.model.generator.layers[l].weights == b.model.generator.layers[l].weights);

    RngStream sa = RngStream::derive(5, "generate");
    RngStream sb = RngStream::derive(5, "generate");
    SampleResult ra = sample(a.model, 20, sa);
    SampleResult rb = sample(b.model, 20, sb);
    for (size_t i = 0; i < 20; ++i)
        CHECK(cell_num(ra.table.rows[i][1]) == cell_num(rb.table.rows[i][1]));

    // a different seed actually changes the run
    TrainConfig other = cfg;
    other.seed = 8;
    TrainResult c = train(toy.table, toy.schema, toy.rules, other);
    CHECK(c.report.trace[0].loss_d != a.report.trace[0].loss_d);
}

TEST_CASE("generator updates never read real records") {
    RngStream rng = RngStream::derive(34, "toy");
    ToyData toy = make_toy_dataset({.rows = 200}, rng);
    TrainResult r = train(toy.table, toy.schema, toy.rules, small_config());
    CHECK(r.report.real_accesses_during_generator_update == 0);
    CHECK(r.report.real_accesses_total > 0);
    CHECK(r.report.clip_violations == 0);
    CHECK(r.report.status == "completed");
    CHECK(r.report.steps_taken == 10);
    CHECK(r.report.final_epsilon == 0.0);  // sigma = 0 runs non-privately
}

TEST_CASE("sampling: count, determinism, schema, and rejection mode") {
    RngStream rng = RngStream::derive(35, "toy");
    ToyData toy = make_toy_dataset({.rows = 200}, rng);
    TrainResult r = train(toy.table, toy.schema, toy.rules, small_config());

    RngStream s1 = RngStream::derive(9, "generate");
    SampleResult plain = sample(r.model, 50, s1);
    CHECK(plain.table.row_count() == 50);
    CHECK(plain.table.schema == toy.schema);
    CHECK(plain.resampled_rows == 0);
    ViolationReport rep;
    toy.rules.evaluate_batch(plain.table, &rep);
    CHECK(plain.violation_rate == doctest::Approx(rep.rate()));

    RngStream s2 = RngStream::derive(9, "generate");
    SampleResult reject = sample(r.model, 50, s2, true);
    CHECK(reject.table.row_count() == 50);
    CHECK(reject.violation_rate == 0.0);
    ViolationReport rep2;
    toy.rules.evaluate_batch(reject.table, &rep2);
    CHECK(rep2.violations == 0);

    RngStream s3 = RngStream::derive(9, "generate");
    CHECK_THROWS_AS(sample(r.model, 0, s3), ValidationError);
}

TEST_CASE("private training halts before exceeding the budget and audits every step") {
    RngStream rng = RngStream::derive(36, "toy");
    ToyData toy = make_toy_dataset({.rows = 200}, rng);
    TrainConfig cfg = small_config();
    cfg.steps = 500;
    cfg.batch = 16;
    cfg.privacy.sigma = 2.0;
    cfg.privacy.epsilon = 1.0;
    cfg.privacy.delta = 1e-5;

    std::ostringstream audit;
    TrainHooks hooks;
    hooks.audit_log = &audit;
    TrainResult r = train(toy.table, toy.schema, toy.rules, cfg, hooks);
    CHECK(r.report.status == "budget-exhausted");
    CHECK(r.report.steps_taken < 500);
    CHECK(r.report.final_epsilon <= 1.0);
    CHECK(r.report.final_epsilon > 0.0);

    // every accounted step leaves one parsable audit line; epsilon never
    // decreases and the last line matches the reported total
    std::istringstream in(audit.str());
    std::string line;
    double prev = 0.0, last = 0.0;
    long lines = 0;
    while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line);
        CHECK(j.at("sigma").get<double>() == 2.0);
        double eps = j.at("epsilon").get<double>();
        CHECK(eps >= prev);
        prev = last = eps;
        ++lines;
    }
    CHECK(lines == r.report.steps_taken);
    CHECK(last == doctest::Approx(r.report.final_epsilon).epsilon(1e-12));
}

TEST_CASE("checkpoint hook fires on the configured cadence") {
    RngStream rng = RngStream::derive(37, "toy");
    ToyData toy = make_toy_dataset({.rows = 100}, rng);
    TrainConfig cfg = small_config();
    cfg.checkpoint_every = 4;
    std::vector<long> seen;
    TrainHooks hooks;
    hooks.checkpoint = [&](long step, const GanModel&) { seen.push_back(step); };
    train(toy.table, toy.schema, toy.rules, cfg, hooks);
    CHECK(seen == std::vector<long>{4, 8});
}

TEST_CASE("train config validation") {
    TrainConfig cfg = small_config();
    cfg.lambda = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = small_config();
    cfg.eta_d = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = small_config();
    cfg.steps = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = small_config();
    cfg.d_steps_per_g = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = small_config();
    cfg.instance_noise = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = small_config();
    cfg.leak = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("a short run learns a lopsided one-column distribution") {
    // single categorical column, p(a) = 0.8: after a short non-private run the
    // sampled frequency should be within 0.2 of the truth
    auto schema = std::make_shared<TableSchema>();
    schema->columns = {{"c", ColumnKind::Categorical, {"a", "b"}, 0, 0}};
    schema->validate();
    Table t;
    t.schema = schema;
    RngStream rng = RngStream::derive(38, "onecol");
    for (int i = 0; i < 400; ++i) {
        Record r(1);
        r[0] = rng.next_double() < 0.8 ? 0 : 1;
        t.rows.push_back(r);
    }
    ConstraintSet no_rules({}, schema);
    TrainConfig cfg;
    cfg.steps = 400;
    cfg.batch = 64;
    cfg.noise_dim = 4;
    cfg.hidden_g = {16};
    cfg.hidden_d = {16};
    cfg.lambda = 0.0;
    cfg.privacy.sigma = 0.0;
    cfg.seed = 3;
    TrainResult r = train(t, schema, no_rules, cfg);
    RngStream gen = RngStream::derive(3, "generate");
    SampleResult s = sample(r.model, 1000, gen);
    double freq_a = 0.0;
    for (const auto& row : s.table.rows)
        if (cell_cat(row[0]) == 0) freq_a += 1.0;
    freq_a /= 1000.0;
    CHECK(std::abs(freq_a - 0.8) <= 0.2);
}
