#pragma once

#include "synth/constraints.hpp"
#include "synth/data.hpp"
#include "synth/rng.hpp"

namespace synth {

// Desk-scale synthetic domain used by tests and smoke experiments: a small
// clinical-flavored table with mixed column kinds, a rule set the emitted
// rows always satisfy, and a label column that depends on the features.
struct ToySpec {
    size_t rows = 2000;
    double label_noise = 0.5;  // std of the latent noise behind the risk label
};

struct ToyData {
    std::shared_ptr<const TableSchema> schema;
    Table table;
    ConstraintSet rules;
};

std::shared_ptr<const TableSchema> toy_schema();
ConstraintSet toy_rules(std::shared_ptr<const TableSchema> schema);

ToyData make_toy_dataset(const ToySpec& spec, RngStream& rng);

}  // namespace synth
