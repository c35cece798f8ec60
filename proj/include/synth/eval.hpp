#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "synth/classifier.hpp"
#include "synth/data.hpp"
#include "synth/gan.hpp"

namespace synth {

// Exact 1-D Wasserstein-1 between empirical distributions: integral of the
// absolute quantile-function difference over merged breakpoints. Symmetric,
// zero iff the empirical distributions coincide.
double emd_1d(const std::vector<double>& a, const std::vector<double>& b);

struct FidelityReport {
    std::map<std::string, double> emd_per_column;         // continuous, standardized
    std::map<std::string, double> l1_freq_per_column;     // categorical
    std::map<std::string, double> l2_summary_per_column;  // continuous
    double aggregate_emd = 0.0;
    double aggregate_l1 = 0.0;
    double aggregate_l2 = 0.0;
    double aggregate_distance = 0.0;  // mean of the two kind aggregates

    nlohmann::json to_json() const;
};

// Categorical columns: L1 between normalized frequency vectors over the
// domain. Continuous columns: L2 between summary vectors (mean, std,
// quartiles), each entry standardized by the real column's std; EMD on
// real-standardized values.
FidelityReport mixed_distance(const Table& real, const Table& synth);

struct AttackReport {
    std::string attack;
    nlohmann::json params() const;
    std::map<std::string, double> setting;  // numeric parameters (overlap, k, ...)
    std::string setting_label;              // e.g. "WB"/"FBB" or sensitive column
    double success = 0.0;
    double baseline = 0.0;  // chance rate

    nlohmann::json to_json() const;
};

// Full-leak re-identification: a real record is compromised iff some
// synthetic record agrees on the drawn known columns and on all unknown
// columns (categorical exact, continuous within tolerance real-column-std
// units).
AttackReport reident_attack(const Table& real, const Table& synth, double overlap,
                            double tolerance, RngStream& rng);

inline constexpr double kReidentDefaultTolerance = 0.05;

// Confidence-based model inversion: a target-column classifier is trained on
// the synthetic table; each candidate sensitive value is scored by the
// model's confidence in the record's true label (ties -> lowest index).
AttackReport attribute_inference_attack(const Table& real, const Table& synth,
                                        const std::string& sensitive_column,
                                        const std::string& target_column, uint64_t seed);

enum class MiaSetting { WhiteBox, FullyBlackBox };

// FBB scores by negative distance to the nearest of k generated samples in
// encoded space; WB scores by the discriminator output. Success is the best
// accuracy over all thresholds on the balanced member/non-member set.
AttackReport membership_inference_attack(const Table& members, const Table& non_members,
                                         const GanModel& model, MiaSetting setting,
                                         size_t k_samples, RngStream& rng);

// FBB against a released synthetic table (no model access); WhiteBox here is
// a capability error.
AttackReport membership_inference_attack(const Table& members, const Table& non_members,
                                         const Table& generated, MiaSetting setting);

}  // namespace synth
