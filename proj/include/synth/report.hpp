#pragma once

#include <string>
#include <vector>

#include "synth/classifier.hpp"
#include "synth/eval.hpp"

namespace synth {

// Text tables rendered from the JSON-backed report structs; the JSON is the
// source of truth, these are display-only.
std::string fidelity_text(const FidelityReport& rep, const std::string& row_label);
std::string tstr_text(const std::vector<TstrEntry>& entries);
std::string attacks_text(const std::vector<AttackReport>& reports);

}  // namespace synth
