#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synth/classifier.hpp"
#include "synth/gan.hpp"

namespace synth {

// Minimal TOML reader covering the config surface: [section] and
// [section.sub] tables, string/integer/float/bool scalars, flat arrays,
// and # comments. Returns the equivalent JSON tree.
nlohmann::json parse_toml(const std::string& text);
nlohmann::json load_toml_file(const std::string& path);

struct EvalToggles {
    bool fidelity = true;
    bool utility = true;
    bool attacks = true;
    std::vector<ClassifierKind> classifiers = {ClassifierKind::LogisticRegression,
                                               ClassifierKind::RandomForest};
    std::vector<double> reident_overlaps = {0.3, 0.6, 0.9};
    double reident_tolerance = 0.05;
    size_t mia_k = 0;  // 0 -> |members| * 10
};

struct ExperimentConfig {
    std::string data_path;
    std::string schema_path;
    std::string rules_path;  // optional; empty -> no rules
    std::string out_dir = "out";
    uint64_t seed = 1;

    TrainConfig train;
    bool calibrate_sigma = false;  // solve sigma from the epsilon target
    double holdout_fraction = 0.2;
    size_t synth_count = 0;  // 0 -> size of the training split
    EvalToggles eval;

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::string& path);  // TOML file
    nlohmann::json to_json() const;

    void validate_paths() const;  // referenced files must exist
};

// Stable FNV-1a hash of the canonical JSON dump.
std::string config_hash(const nlohmann::json& j);

struct Manifest {
    std::string config_hash;
    std::string artifact_version;
    uint64_t seed = 0;
    std::vector<std::string> files;
    std::string started_at;
    std::string finished_at;

    nlohmann::json to_json() const;
};

inline constexpr const char* kArtifactVersion = "0.1.0";

}  // namespace synth
