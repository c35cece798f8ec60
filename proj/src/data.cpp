#include "synth/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "synth/error.hpp"

namespace synth {

using nlohmann::json;

int Column::category_index(const std::string& value) const {
    for (size_t i = 0; i < categories.size(); ++i)
        if (categories[i] == value) return static_cast<int>(i);
    return -1;
}

int TableSchema::column_index(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == name) return static_cast<int>(i);
    return -1;
}

const Column& TableSchema::column(const std::string& name) const {
    int i = column_index(name);
    if (i < 0) throw SchemaError("unknown column: " + name);
    return columns[i];
}

void TableSchema::validate() const {
    if (columns.empty()) throw SchemaError("schema has no columns");
    std::set<std::string> names;
    for (const auto& c : columns) {
        if (!names.insert(c.name).second)
            throw SchemaError("duplicate column name: " + c.name);
        if (c.kind == ColumnKind::Categorical) {
            if (c.categories.empty())
                throw SchemaError("column " + c.name + " has empty category domain");
            std::set<std::string> cats(c.categories.begin(), c.categories.end());
            if (cats.size() != c.categories.size())
                throw SchemaError("column " + c.name + " has duplicate categories");
        } else {
            if (!(c.min < c.max))
                throw SchemaError("column " + c.name + " needs min < max");
        }
    }
    if (!target.empty() && column_index(target) < 0)
        throw SchemaError("target column not in schema: " + target);
    for (const auto& s : sensitive)
        if (column_index(s) < 0)
            throw SchemaError("sensitive column not in schema: " + s);
}

json TableSchema::to_json() const {
    json cols = json::array();
    for (const auto& c : columns) {
        json jc{{"name", c.name}};
        if (c.kind == ColumnKind::Categorical) {
            jc["kind"] = "categorical";
            jc["categories"] = c.categories;
        } else {
            jc["kind"] = "continuous";
            jc["min"] = c.min;
            jc["max"] = c.max;
        }
        cols.push_back(jc);
    }
    json j{{"columns", cols}};
    if (!target.empty()) j["target"] = target;
    if (!sensitive.empty()) j["sensitive"] = sensitive;
    return j;
}

TableSchema TableSchema::from_json(const json& j) {
    TableSchema s;
    if (!j.contains("columns") || !j["columns"].is_array())
        throw SchemaError("schema file needs a \"columns\" array");
    for (const auto& jc : j["columns"]) {
        Column c;
        c.name = jc.at("name").get<std::string>();
        std::string kind = jc.at("kind").get<std::string>();
        if (kind == "categorical") {
            c.kind = ColumnKind::Categorical;
            c.categories = jc.at("categories").get<std::vector<std::string>>();
        } else if (kind == "continuous") {
            c.kind = ColumnKind::Continuous;
            c.min = jc.at("min").get<double>();
            c.max = jc.at("max").get<double>();
        } else {
            throw SchemaError("column " + c.name + ": unknown kind \"" + kind + "\"");
        }
        s.columns.push_back(std::move(c));
    }
    if (j.contains("target")) s.target = j["target"].get<std::string>();
    if (j.contains("sensitive")) s.sensitive = j["sensitive"].get<std::vector<std::string>>();
    s.validate();
    return s;
}

TableSchema TableSchema::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open schema file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw SchemaError("schema file " + path + ": " + e.what());
    }
    return from_json(j);
}

double cell_num(const Cell& c) {
    if (const double* d = std::get_if<double>(&c)) return *d;
    throw ValidationError("cell is categorical, expected continuous");
}

int cell_cat(const Cell& c) {
    if (const int* i = std::get_if<int>(&c)) return *i;
    throw ValidationError("cell is continuous, expected categorical");
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw NumericError("double formatting failed");
    return std::string(buf, ptr);
}

std::string cell_to_string(const TableSchema& schema, int col, const Cell& c) {
    const Column& column = schema.columns[col];
    if (column.kind == ColumnKind::Categorical) return column.categories[cell_cat(c)];
    return format_double(cell_num(c));
}

namespace {

// RFC 4180 field splitting, including quoted fields and embedded newlines.
// Returns false at EOF with no record. `line` tracks physical lines consumed.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields, size_t& line) {
    fields.clear();
    int c = in.peek();
    if (c == EOF) return false;
    std::string field;
    bool quoted = false;
    bool done = false;
    ++line;
    while (!done) {
        c = in.get();
        if (c == EOF) {
            done = true;
        } else if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(static_cast<char>(c));
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\r') {
            if (in.peek() == '\n') in.get();
            done = true;
        } else if (c == '\n') {
            done = true;
        } else {
            field.push_back(static_cast<char>(c));
        }
    }
    fields.push_back(std::move(field));
    return true;
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

}  // namespace

Table load_csv(const std::string& path, std::shared_ptr<const TableSchema> schema,
               std::vector<RejectedRow>* rejects) {
    schema->validate();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open data file: " + path);

    size_t line = 0;
    std::vector<std::string> fields;
    if (!read_csv_record(in, fields, line))
        throw ValidationError(path + ": empty file, header expected");

    // Header is order-insensitive; every schema column must be present.
    std::vector<int> field_for_column(schema->columns.size(), -1);
    for (size_t f = 0; f < fields.size(); ++f) {
        int ci = schema->column_index(fields[f]);
        if (ci >= 0) field_for_column[ci] = static_cast<int>(f);
    }
    for (size_t ci = 0; ci < schema->columns.size(); ++ci)
        if (field_for_column[ci] < 0)
            throw SchemaError(path + ": missing column \"" + schema->columns[ci].name +
                              "\" in header");
    const size_t header_width = fields.size();

    Table table;
    table.schema = schema;
    while (read_csv_record(in, fields, line)) {
        if (fields.size() == 1 && fields[0].empty()) continue;  // trailing blank line
        auto reject = [&](const std::string& col, const std::string& reason) {
            if (rejects) {
                rejects->push_back({line, col, reason});
                return;
            }
            throw ValidationError(path + ":" + std::to_string(line) + ": column \"" + col +
                                  "\": " + reason);
        };
        if (fields.size() != header_width) {
            reject("", "expected " + std::to_string(header_width) + " fields, got " +
                           std::to_string(fields.size()));
            continue;
        }
        Record rec(schema->columns.size());
        bool ok = true;
        for (size_t ci = 0; ci < schema->columns.size() && ok; ++ci) {
            const Column& col = schema->columns[ci];
            const std::string& raw = fields[field_for_column[ci]];
            if (col.kind == ColumnKind::Categorical) {
                int idx = col.category_index(raw);
                if (idx < 0) {
                    reject(col.name, "value \"" + raw + "\" not in domain");
                    ok = false;
                } else {
                    rec[ci] = idx;
                }
            } else {
                double v;
                auto res = std::from_chars(raw.data(), raw.data() + raw.size(), v);
                if (res.ec != std::errc() || res.ptr != raw.data() + raw.size() ||
                    !std::isfinite(v)) {
                    reject(col.name, "unparseable numeric \"" + raw + "\"");
                    ok = false;
                } else if (v < col.min || v > col.max) {
                    // Real-data range violations indicate schema errors; rejected, not clamped.
                    reject(col.name, "value " + raw + " outside declared range [" +
                                         format_double(col.min) + ", " +
                                         format_double(col.max) + "]");
                    ok = false;
                } else {
                    rec[ci] = v;
                }
            }
        }
        if (ok) table.rows.push_back(std::move(rec));
    }
    return table;
}

void write_csv(const Table& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write file: " + path);
    const TableSchema& schema = *table.schema;
    for (size_t c = 0; c < schema.columns.size(); ++c) {
        if (c) out << ',';
        out << csv_quote(schema.columns[c].name);
    }
    out << '\n';
    for (const Record& r : table.rows) {
        for (size_t c = 0; c < schema.columns.size(); ++c) {
            if (c) out << ',';
            out << csv_quote(cell_to_string(schema, static_cast<int>(c), r[c]));
        }
        out << '\n';
    }
}

Encoder::Encoder(std::shared_ptr<const TableSchema> schema) : schema_(std::move(schema)) {
    schema_->validate();
    int offset = 0;
    for (size_t c = 0; c < schema_->columns.size(); ++c) {
        const Column& col = schema_->columns[c];
        int width = col.kind == ColumnKind::Categorical
                        ? static_cast<int>(col.categories.size())
                        : 1;
        segments_.push_back({static_cast<int>(c), offset, width});
        offset += width;
    }
    dim_ = offset;
}

Vector Encoder::encode_record(const Record& r) const {
    if (r.size() != schema_->columns.size()) throw ShapeError("record width mismatch");
    Vector v = Vector::Zero(dim_);
    for (const auto& seg : segments_) {
        const Column& col = schema_->columns[seg.column];
        const Cell& cell = r[seg.column];
        if (col.kind == ColumnKind::Categorical) {
            int idx = cell_cat(cell);
            if (idx < 0 || idx >= seg.width)
                throw ValidationError("category index out of domain for column " + col.name);
            v[seg.offset + idx] = 1.0;
        } else {
            double x = cell_num(cell);
            if (x < col.min || x > col.max)
                throw ValidationError("value outside range for column " + col.name);
            v[seg.offset] = 2.0 * (x - col.min) / (col.max - col.min) - 1.0;
        }
    }
    return v;
}

Matrix Encoder::encode(const Table& table) const {
    Matrix m(table.row_count(), dim_);
    for (size_t i = 0; i < table.row_count(); ++i)
        m.row(i) = encode_record(table.rows[i]).transpose();
    return m;
}

Matrix Encoder::encode_rows_audited(const Table& table, const std::vector<size_t>& idx) const {
    Matrix m(idx.size(), dim_);
    for (size_t i = 0; i < idx.size(); ++i)
        m.row(i) = encode_record(table.row_audited(idx[i])).transpose();
    return m;
}

Record Encoder::decode_row(const Vector& v) const {
    if (v.size() != dim_) throw ShapeError("decode: vector length mismatch");
    Record r(schema_->columns.size());
    for (const auto& seg : segments_) {
        const Column& col = schema_->columns[seg.column];
        if (col.kind == ColumnKind::Categorical) {
            int best = 0;
            double best_v = v[seg.offset];
            for (int j = 1; j < seg.width; ++j) {
                if (v[seg.offset + j] > best_v) {  // ties keep the lowest index
                    best_v = v[seg.offset + j];
                    best = j;
                }
            }
            r[seg.column] = best;
        } else {
            double x = col.min + (v[seg.offset] + 1.0) * 0.5 * (col.max - col.min);
            r[seg.column] = std::clamp(x, col.min, col.max);
        }
    }
    return r;
}

Table Encoder::decode(const Matrix& batch) const {
    Table t;
    t.schema = schema_;
    t.rows.reserve(batch.rows());
    for (Eigen::Index i = 0; i < batch.rows(); ++i)
        t.rows.push_back(decode_row(batch.row(i).transpose()));
    return t;
}

std::vector<Segment> Encoder::softmax_segments() const {
    std::vector<Segment> out;
    for (const auto& seg : segments_)
        if (seg.width > 1) out.push_back({seg.offset, seg.width});
    return out;
}

std::pair<Table, Table> split(const Table& table, double train_fraction, RngStream& rng) {
    if (table.row_count() == 0) throw ValidationError("split: empty table");
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw ValidationError("split: fraction must be in (0,1)");
    const size_t m = table.row_count();
    size_t n_train = static_cast<size_t>(std::llround(train_fraction * static_cast<double>(m)));
    if (n_train == 0 || n_train == m)
        throw ValidationError("split: a part would be empty");

    std::vector<size_t> order(m);
    for (size_t i = 0; i < m; ++i) order[i] = i;
    for (size_t i = m; i > 1; --i)
        std::swap(order[i - 1], order[rng.next_below(i)]);

    Table train, holdout;
    train.schema = holdout.schema = table.schema;
    for (size_t i = 0; i < m; ++i) {
        if (i < n_train) train.rows.push_back(table.rows[order[i]]);
        else holdout.rows.push_back(table.rows[order[i]]);
    }
    return {std::move(train), std::move(holdout)};
}

}  // namespace synth
