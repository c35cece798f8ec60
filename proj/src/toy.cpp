#include "synth/toy.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "synth/error.hpp"

namespace synth {

using nlohmann::json;

std::shared_ptr<const TableSchema> toy_schema() {
    auto s = std::make_shared<TableSchema>();
    s->columns = {
        {"age", ColumnKind::Continuous, {}, 18.0, 90.0},
        {"glucose", ColumnKind::Continuous, {}, 60.0, 200.0},
        {"bmi", ColumnKind::Continuous, {}, 15.0, 45.0},
        {"diagnosis", ColumnKind::Categorical, {"healthy", "prediabetic", "diabetic"}, 0, 0},
        {"drug", ColumnKind::Categorical, {"none", "metformin", "insulin", "warfarin"}, 0, 0},
        {"risk", ColumnKind::Categorical, {"low", "high"}, 0, 0},
    };
    s->target = "risk";
    s->sensitive = {"diagnosis"};
    s->validate();
    return s;
}

ConstraintSet toy_rules(std::shared_ptr<const TableSchema> schema) {
    json rules = {
        {"rules",
         {
             {{"id", "no-warfarin-under-30"},
              {"kind", "forbid"},
              {"if",
               {{{"col", "age"}, {"op", "lt"}, {"value", 30.0}},
                {{"col", "drug"}, {"op", "eq"}, {"value", "warfarin"}}}},
              {"description", "warfarin is contraindicated below age 30"}},
             {{"id", "diabetic-needs-treatment"},
              {"kind", "require"},
              {"if", {{{"col", "diagnosis"}, {"op", "eq"}, {"value", "diabetic"}}}},
              {"then",
               {{{"col", "drug"}, {"op", "in"}, {"value", {"metformin", "insulin"}}}}},
              {"description", "diabetic records must carry an antidiabetic drug"}},
             {{"id", "no-insulin-when-healthy"},
              {"kind", "forbid"},
              {"if",
               {{{"col", "diagnosis"}, {"op", "eq"}, {"value", "healthy"}},
                {{"col", "drug"}, {"op", "eq"}, {"value", "insulin"}}}},
              {"description", "healthy records must not carry insulin"}},
         }}};
    return ConstraintSet::parse(rules, std::move(schema));
}

namespace {

double clamped_normal(RngStream& rng, double mean, double std, double lo, double hi) {
    return std::clamp(mean + std * rng.next_gaussian(), lo, hi);
}

int pick(RngStream& rng, const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = rng.next_double() * total;
    for (size_t i = 0; i < weights.size(); ++i) {
        u -= weights[i];
        if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
}

}  // namespace

ToyData make_toy_dataset(const ToySpec& spec, RngStream& rng) {
    if (spec.rows == 0) throw ValidationError("toy dataset needs rows > 0");
    ToyData out;
    out.schema = toy_schema();
    out.rules = toy_rules(out.schema);
    out.table.schema = out.schema;

    // drug weights below are ordered {none, metformin, insulin, warfarin}
    constexpr int kHealthy = 0, kPrediabetic = 1, kDiabetic = 2;

    for (size_t i = 0; i < spec.rows; ++i) {
        Record r(6);
        bool ok = false;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
            int diag = pick(rng, {0.5, 0.25, 0.25});
            double age = clamped_normal(rng, 50.0, 15.0, 18.0, 90.0);
            double glucose;
            switch (diag) {
                case kHealthy: glucose = clamped_normal(rng, 92.0, 10.0, 60.0, 200.0); break;
                case kPrediabetic: glucose = clamped_normal(rng, 122.0, 12.0, 60.0, 200.0); break;
                default: glucose = clamped_normal(rng, 162.0, 18.0, 60.0, 200.0); break;
            }
            double bmi = clamped_normal(rng, 26.0 + 2.0 * diag, 4.0, 15.0, 45.0);
            int drug;
            if (diag == kDiabetic) {
                drug = pick(rng, {0.0, 0.6, 0.4, 0.0});
            } else if (diag == kPrediabetic) {
                double warfarin = age >= 30.0 ? 0.1 : 0.0;
                drug = pick(rng, {0.5 + (0.1 - warfarin), 0.4, 0.0, warfarin});
            } else {
                double warfarin = age >= 30.0 ? 0.1 : 0.0;
                drug = pick(rng, {0.85 + (0.1 - warfarin), 0.05, 0.0, warfarin});
            }
            // Risk is a noisy function of diagnosis: a conditional the
            // classifiers can pick up from the categorical coupling alone,
            // with label_noise scaling the flip rate.
            double p_high;
            switch (diag) {
                case kHealthy: p_high = 0.04 * spec.label_noise; break;
                case kPrediabetic: p_high = 0.5 * 0.3 * spec.label_noise + 0.15; break;
                default: p_high = 1.0 - 0.16 * spec.label_noise; break;
            }
            int risk = rng.next_double() < p_high ? 1 : 0;
            r[0] = age;
            r[1] = glucose;
            r[2] = bmi;
            r[3] = diag;
            r[4] = drug;
            r[5] = risk;
            ok = out.rules.evaluate(r) == 1;
        }
        if (!ok) throw GenerationError("toy dataset: could not satisfy rules after 100 tries");
        out.table.rows.push_back(std::move(r));
    }
    return out;
}

}  // namespace synth
