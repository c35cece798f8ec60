#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "synth/data.hpp"

namespace synth {

enum class Predicate { Equals, In, LessThan, GreaterThan, Between };

struct Condition {
    int column = 0;
    Predicate pred = Predicate::Equals;
    std::vector<int> categories;  // Equals (one) / In (set), as domain indices
    double lo = 0.0, hi = 0.0;    // LessThan uses hi, GreaterThan uses lo, Between both

    bool matches(const Record& r) const;
};

enum class RuleKind { Forbid, Require };

// forbid: record invalid iff every antecedent condition matches.
// require: record invalid iff antecedent matches and consequent does not.
struct Rule {
    std::string id;
    RuleKind kind = RuleKind::Forbid;
    std::vector<Condition> antecedent;
    std::vector<Condition> consequent;  // require only
    std::string description;

    bool violated_by(const Record& r) const;
};

struct ViolationReport {
    size_t total = 0;
    size_t violations = 0;
    std::map<std::string, size_t> per_rule;  // rule id -> hit count
    double rate() const { return total ? static_cast<double>(violations) / total : 0.0; }
};

// Conjunctive realization of the validity function: CM(x) = 0 iff any rule
// marks x invalid; an empty rule set means CM == 1 everywhere.
class ConstraintSet {
  public:
    ConstraintSet() = default;
    ConstraintSet(std::vector<Rule> rules, std::shared_ptr<const TableSchema> schema);

    static ConstraintSet parse(const nlohmann::json& j,
                               std::shared_ptr<const TableSchema> schema);
    static ConstraintSet load(const std::string& path,
                              std::shared_ptr<const TableSchema> schema);
    nlohmann::json to_json() const;

    // CM(x): 1 valid, 0 invalid.
    int evaluate(const Record& r) const;
    std::vector<int> evaluate_batch(const Table& table, ViolationReport* report = nullptr) const;

    // Fraction of rules the record satisfies; logging only, never part of
    // training semantics.
    double satisfaction_fraction(const Record& r) const;

    // Explicit CM over the full cross-product of an all-categorical schema,
    // row-major in column order; test oracle for tiny domains.
    std::vector<int> tabulate(size_t max_cells = 100000) const;

    const std::vector<Rule>& rules() const { return rules_; }
    const TableSchema& schema() const { return *schema_; }
    std::shared_ptr<const TableSchema> schema_ptr() const { return schema_; }
    bool empty() const { return rules_.empty(); }

  private:
    std::vector<Rule> rules_;
    std::shared_ptr<const TableSchema> schema_;
};

}  // namespace synth
