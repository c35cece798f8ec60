#include "synth/constraints.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "synth/error.hpp"

namespace synth {

using nlohmann::json;

bool Condition::matches(const Record& r) const {
    const Cell& c = r[column];
    switch (pred) {
        case Predicate::Equals:
        case Predicate::In:
            return std::find(categories.begin(), categories.end(), cell_cat(c)) !=
                   categories.end();
        case Predicate::LessThan:
            return cell_num(c) < hi;
        case Predicate::GreaterThan:
            return cell_num(c) > lo;
        case Predicate::Between:
            return cell_num(c) > lo && cell_num(c) < hi;
    }
    throw Error("unknown predicate");
}

bool Rule::violated_by(const Record& r) const {
    for (const auto& c : antecedent)
        if (!c.matches(r)) return false;
    if (kind == RuleKind::Forbid) return true;
    for (const auto& c : consequent)
        if (!c.matches(r)) return true;
    return false;
}

ConstraintSet::ConstraintSet(std::vector<Rule> rules,
                             std::shared_ptr<const TableSchema> schema)
    : rules_(std::move(rules)), schema_(std::move(schema)) {
    schema_->validate();
}

namespace {

Condition parse_condition(const json& jc, const TableSchema& schema,
                          const std::string& rule_id) {
    Condition c;
    std::string col = jc.at("col").get<std::string>();
    c.column = schema.column_index(col);
    if (c.column < 0)
        throw ParseError("rule " + rule_id + ": unknown column \"" + col + "\"");
    const Column& column = schema.columns[c.column];
    std::string op = jc.at("op").get<std::string>();
    auto need_kind = [&](ColumnKind k) {
        if (column.kind != k)
            throw ParseError("rule " + rule_id + ": op \"" + op +
                             "\" does not match kind of column \"" + col + "\"");
    };
    auto cat_index = [&](const std::string& v) {
        int idx = column.category_index(v);
        if (idx < 0)
            throw ParseError("rule " + rule_id + ": value \"" + v +
                             "\" not in domain of column \"" + col + "\"");
        return idx;
    };
    if (op == "eq") {
        need_kind(ColumnKind::Categorical);
        c.pred = Predicate::Equals;
        c.categories.push_back(cat_index(jc.at("value").get<std::string>()));
    } else if (op == "in") {
        need_kind(ColumnKind::Categorical);
        c.pred = Predicate::In;
        for (const auto& v : jc.at("value"))
            c.categories.push_back(cat_index(v.get<std::string>()));
        if (c.categories.empty())
            throw ParseError("rule " + rule_id + ": empty \"in\" set");
    } else if (op == "lt") {
        need_kind(ColumnKind::Continuous);
        c.pred = Predicate::LessThan;
        c.hi = jc.at("value").get<double>();
    } else if (op == "gt") {
        need_kind(ColumnKind::Continuous);
        c.pred = Predicate::GreaterThan;
        c.lo = jc.at("value").get<double>();
    } else if (op == "between") {
        need_kind(ColumnKind::Continuous);
        c.pred = Predicate::Between;
        c.lo = jc.at("value").at(0).get<double>();
        c.hi = jc.at("value").at(1).get<double>();
    } else {
        throw ParseError("rule " + rule_id + ": unknown op \"" + op + "\"");
    }
    return c;
}

}  // namespace

ConstraintSet ConstraintSet::parse(const json& j,
                                   std::shared_ptr<const TableSchema> schema) {
    schema->validate();
    std::vector<Rule> rules;
    std::set<std::string> ids;
    if (j.contains("rules")) {
        for (const auto& jr : j["rules"]) {
            Rule r;
            r.id = jr.at("id").get<std::string>();
            if (!ids.insert(r.id).second)
                throw ParseError("duplicate rule id: " + r.id);
            std::string kind = jr.at("kind").get<std::string>();
            if (kind == "forbid") r.kind = RuleKind::Forbid;
            else if (kind == "require") r.kind = RuleKind::Require;
            else throw ParseError("rule " + r.id + ": unknown kind \"" + kind + "\"");
            for (const auto& jc : jr.at("if"))
                r.antecedent.push_back(parse_condition(jc, *schema, r.id));
            if (r.antecedent.empty())
                throw ParseError("rule " + r.id + ": empty antecedent");
            if (r.kind == RuleKind::Require) {
                if (!jr.contains("then"))
                    throw ParseError("rule " + r.id + ": require rule needs \"then\"");
                for (const auto& jc : jr["then"])
                    r.consequent.push_back(parse_condition(jc, *schema, r.id));
                if (r.consequent.empty())
                    throw ParseError("rule " + r.id + ": empty consequent");
            } else if (jr.contains("then")) {
                throw ParseError("rule " + r.id + ": forbid rule cannot have \"then\"");
            }
            if (jr.contains("description"))
                r.description = jr["description"].get<std::string>();
            rules.push_back(std::move(r));
        }
    }
    return ConstraintSet(std::move(rules), std::move(schema));
}

ConstraintSet ConstraintSet::load(const std::string& path,
                                  std::shared_ptr<const TableSchema> schema) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open rules file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("rules file " + path + ": " + e.what());
    }
    return parse(j, std::move(schema));
}

json ConstraintSet::to_json() const {
    json out = json::array();
    for (const auto& r : rules_) {
        json jr{{"id", r.id}, {"kind", r.kind == RuleKind::Forbid ? "forbid" : "require"}};
        auto cond_json = [&](const Condition& c) {
            const Column& col = schema_->columns[c.column];
            json jc{{"col", col.name}};
            switch (c.pred) {
                case Predicate::Equals:
                    jc["op"] = "eq";
                    jc["value"] = col.categories[c.categories[0]];
                    break;
                case Predicate::In: {
                    jc["op"] = "in";
                    json vals = json::array();
                    for (int i : c.categories) vals.push_back(col.categories[i]);
                    jc["value"] = vals;
                    break;
                }
                case Predicate::LessThan:
                    jc["op"] = "lt";
                    jc["value"] = c.hi;
                    break;
                case Predicate::GreaterThan:
                    jc["op"] = "gt";
                    jc["value"] = c.lo;
                    break;
                case Predicate::Between:
                    jc["op"] = "between";
                    jc["value"] = json::array({c.lo, c.hi});
                    break;
            }
            return jc;
        };
        json jif = json::array();
        for (const auto& c : r.antecedent) jif.push_back(cond_json(c));
        jr["if"] = jif;
        if (r.kind == RuleKind::Require) {
            json jthen = json::array();
            for (const auto& c : r.consequent) jthen.push_back(cond_json(c));
            jr["then"] = jthen;
        }
        if (!r.description.empty()) jr["description"] = r.description;
        out.push_back(jr);
    }
    return json{{"rules", out}};
}

int ConstraintSet::evaluate(const Record& r) const {
    if (r.size() != schema_->columns.size())
        throw ValidationError("evaluate: record width does not match schema");
    for (const auto& rule : rules_)
        if (rule.violated_by(r)) return 0;
    return 1;
}

std::vector<int> ConstraintSet::evaluate_batch(const Table& table,
                                               ViolationReport* report) const {
    std::vector<int> out(table.row_count(), 1);
    if (report) {
        report->total = table.row_count();
        for (const auto& rule : rules_) report->per_rule[rule.id] = 0;
    }
    for (size_t i = 0; i < table.row_count(); ++i) {
        bool valid = true;
        for (const auto& rule : rules_) {
            if (rule.violated_by(table.rows[i])) {
                valid = false;
                if (report) ++report->per_rule[rule.id];
                else break;
            }
        }
        if (!valid) {
            out[i] = 0;
            if (report) ++report->violations;
        }
    }
    return out;
}

double ConstraintSet::satisfaction_fraction(const Record& r) const {
    if (rules_.empty()) return 1.0;
    size_t ok = 0;
    for (const auto& rule : rules_)
        if (!rule.violated_by(r)) ++ok;
    return static_cast<double>(ok) / static_cast<double>(rules_.size());
}

std::vector<int> ConstraintSet::tabulate(size_t max_cells) const {
    size_t cells = 1;
    for (const auto& col : schema_->columns) {
        if (col.kind != ColumnKind::Categorical)
            throw ValidationError("tabulate: schema must be all-categorical");
        cells *= col.categories.size();
        if (cells > max_cells) throw ValidationError("tabulate: cross-product too large");
    }
    std::vector<int> cm(cells);
    Record r(schema_->columns.size());
    for (size_t idx = 0; idx < cells; ++idx) {
        size_t rem = idx;
        for (size_t c = schema_->columns.size(); c-- > 0;) {
            size_t k = schema_->columns[c].categories.size();
            r[c] = static_cast<int>(rem % k);
            rem /= k;
        }
        cm[idx] = evaluate(r);
    }
    return cm;
}

}  // namespace synth
