#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "synth/net.hpp"
#include "synth/rng.hpp"

namespace synth {

enum class ColumnKind { Categorical, Continuous };

struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::Categorical;
    std::vector<std::string> categories;  // categorical
    double min = 0.0, max = 0.0;          // continuous

    int category_index(const std::string& value) const;  // -1 if unknown
};

struct TableSchema {
    std::vector<Column> columns;
    std::string target;                    // drives utility evaluation; may be empty
    std::vector<std::string> sensitive;    // drives attribute-inference attacks

    int column_index(const std::string& name) const;  // -1 if absent
    const Column& column(const std::string& name) const;
    void validate() const;

    nlohmann::json to_json() const;
    static TableSchema from_json(const nlohmann::json& j);
    static TableSchema load(const std::string& path);
};

// Categorical cells hold the index into the column's category list.
using Cell = std::variant<double, int>;
using Record = std::vector<Cell>;

double cell_num(const Cell& c);
int cell_cat(const Cell& c);

struct Table {
    std::shared_ptr<const TableSchema> schema;
    std::vector<Record> rows;

    size_t row_count() const { return rows.size(); }

    // Audited access used by training code paths that touch real data; the
    // privacy-boundary check asserts this counter stays flat across
    // generator updates.
    const Record& row_audited(size_t i) const {
        ++access_count;
        return rows[i];
    }
    uint64_t accesses() const { return access_count; }

  private:
    mutable uint64_t access_count = 0;
};

struct RejectedRow {
    size_t line = 0;           // 1-based physical line in the file
    std::string column;
    std::string reason;
};

// Strict by default: throws ValidationError naming the line and column of the
// first bad row. With `rejects` non-null, bad rows are collected instead so
// row counts in = rows out + rejects.
Table load_csv(const std::string& path, std::shared_ptr<const TableSchema> schema,
               std::vector<RejectedRow>* rejects = nullptr);

void write_csv(const Table& table, const std::string& path);

std::string format_double(double v);  // shortest round-trip decimal

// Record representation of a cell for CSV / report output.
std::string cell_to_string(const TableSchema& schema, int col, const Cell& c);

struct EncodedSegment {
    int column = 0;
    int offset = 0;
    int width = 0;  // |categories| for categorical, 1 for continuous
};

// One-hot for categorical columns, min-max scaling to [-1, 1] for continuous.
// decode() always produces schema-valid records: argmax per categorical
// segment (ties -> lowest index) and clamped inverse scaling.
class Encoder {
  public:
    explicit Encoder(std::shared_ptr<const TableSchema> schema);

    int dim() const { return dim_; }
    const std::vector<EncodedSegment>& segments() const { return segments_; }
    const TableSchema& schema() const { return *schema_; }

    Vector encode_record(const Record& r) const;
    Matrix encode(const Table& table) const;
    Matrix encode_rows_audited(const Table& table, const std::vector<size_t>& idx) const;

    Record decode_row(const Vector& v) const;
    Table decode(const Matrix& batch) const;

    // Softmax head segments (categorical one-hot blocks) for a generator net.
    std::vector<Segment> softmax_segments() const;

  private:
    std::shared_ptr<const TableSchema> schema_;
    std::vector<EncodedSegment> segments_;
    int dim_ = 0;
};

// Deterministic shuffle split; both parts non-empty or ValidationError.
std::pair<Table, Table> split(const Table& table, double train_fraction, RngStream& rng);

}  // namespace synth
