#pragma once

#include <memory>
#include <string>
#include <vector>

#include "synth/data.hpp"

namespace synth {

enum class ClassifierKind { LogisticRegression, RandomForest };

std::string classifier_kind_name(ClassifierKind k);
ClassifierKind classifier_kind_from_name(const std::string& name);

// Feature view of a table with the target column removed: one-hot categorical,
// min-max scaled continuous (same convention as Encoder).
class FeatureMap {
  public:
    FeatureMap(std::shared_ptr<const TableSchema> schema, const std::string& target);

    int dim() const { return dim_; }
    int target_column() const { return target_col_; }
    int n_classes() const;
    Vector encode(const Record& r) const;
    Matrix encode_table(const Table& t) const;
    std::vector<int> labels(const Table& t) const;
    const TableSchema& schema() const { return *schema_; }

  private:
    std::shared_ptr<const TableSchema> schema_;
    int target_col_ = -1;
    int dim_ = 0;
    std::vector<int> offsets_;  // per column; -1 for target
};

class Classifier {
  public:
    virtual ~Classifier() = default;
    // Class probabilities, summing to 1.
    virtual std::vector<double> predict_proba(const Vector& features) const = 0;
    int predict(const Vector& features) const;

    const FeatureMap& features() const { return *fmap_; }

  protected:
    std::shared_ptr<const FeatureMap> fmap_;
};

// Multinomial logistic regression, full-batch gradient descent run to a
// 1e-6 loss-delta tolerance. Deterministic.
// Random forest: 100 CART trees, Gini splits, bootstrapped rows, sqrt(d)
// feature subsampling per node, probability vote. Deterministic under seed.
std::unique_ptr<Classifier> fit_classifier(ClassifierKind kind, const Table& train,
                                           const std::string& target, uint64_t seed);

struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;  // macro-averaged
    double recall = 0.0;
    double f1 = 0.0;
};

Metrics evaluate_classifier(const Classifier& clf, const Table& test);

struct TstrEntry {
    std::string kind;
    Metrics baseline;  // trained on real_train
    Metrics tstr;      // trained on synth
    double accuracy_gap = 0.0;
};

std::vector<TstrEntry> tstr(const Table& real_train, const Table& real_test,
                            const Table& synth, const std::string& target,
                            const std::vector<ClassifierKind>& kinds, uint64_t seed);

double majority_class_rate(const Table& t, const std::string& target);

}  // namespace synth
