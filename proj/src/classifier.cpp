#include "synth/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "synth/error.hpp"
#include "synth/log.hpp"
#include "synth/rng.hpp"

namespace synth {

std::string classifier_kind_name(ClassifierKind k) {
    return k == ClassifierKind::LogisticRegression ? "logistic-regression" : "random-forest";
}

ClassifierKind classifier_kind_from_name(const std::string& name) {
    if (name == "logistic-regression") return ClassifierKind::LogisticRegression;
    if (name == "random-forest") return ClassifierKind::RandomForest;
    throw ParseError("unknown classifier kind: " + name);
}

FeatureMap::FeatureMap(std::shared_ptr<const TableSchema> schema, const std::string& target)
    : schema_(std::move(schema)) {
    schema_->validate();
    target_col_ = schema_->column_index(target);
    if (target_col_ < 0) throw ValidationError("target column not in schema: " + target);
    if (schema_->columns[target_col_].kind != ColumnKind::Categorical)
        throw ValidationError("target column must be categorical: " + target);
    offsets_.assign(schema_->columns.size(), -1);
    for (size_t c = 0; c < schema_->columns.size(); ++c) {
        if (static_cast<int>(c) == target_col_) continue;
        offsets_[c] = dim_;
        const Column& col = schema_->columns[c];
        dim_ += col.kind == ColumnKind::Categorical ? static_cast<int>(col.categories.size()) : 1;
    }
}

int FeatureMap::n_classes() const {
    return static_cast<int>(schema_->columns[target_col_].categories.size());
}

Vector FeatureMap::encode(const Record& r) const {
    Vector v = Vector::Zero(dim_);
    for (size_t c = 0; c < schema_->columns.size(); ++c) {
        if (offsets_[c] < 0) continue;
        const Column& col = schema_->columns[c];
        if (col.kind == ColumnKind::Categorical) {
            v[offsets_[c] + cell_cat(r[c])] = 1.0;
        } else {
            double x = std::clamp(cell_num(r[c]), col.min, col.max);
            v[offsets_[c]] = 2.0 * (x - col.min) / (col.max - col.min) - 1.0;
        }
    }
    return v;
}

Matrix FeatureMap::encode_table(const Table& t) const {
    Matrix m(t.row_count(), dim_);
    for (size_t i = 0; i < t.row_count(); ++i) m.row(i) = encode(t.rows[i]).transpose();
    return m;
}

std::vector<int> FeatureMap::labels(const Table& t) const {
    std::vector<int> y(t.row_count());
    for (size_t i = 0; i < t.row_count(); ++i) y[i] = cell_cat(t.rows[i][target_col_]);
    return y;
}

int Classifier::predict(const Vector& features) const {
    auto p = predict_proba(features);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

namespace {

class LogisticRegressionClf : public Classifier {
  public:
    LogisticRegressionClf(std::shared_ptr<const FeatureMap> fmap, const Matrix& X,
                          const std::vector<int>& y) {
        fmap_ = std::move(fmap);
        const int K = fmap_->n_classes();
        const int d = fmap_->dim();
        const Eigen::Index n = X.rows();
        W_ = Matrix::Zero(K, d);
        b_ = Vector::Zero(K);

        const double l2 = 1e-6;
        double lr = 0.5;
        double prev_loss = std::numeric_limits<double>::infinity();
        for (int iter = 0; iter < 20000; ++iter) {
            Matrix logits = (X * W_.transpose()).rowwise() + b_.transpose();
            Matrix probs(n, K);
            double loss = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                double mx = logits.row(i).maxCoeff();
                double sum = 0.0;
                for (int k = 0; k < K; ++k) {
                    probs(i, k) = std::exp(logits(i, k) - mx);
                    sum += probs(i, k);
                }
                probs.row(i) /= sum;
                loss -= std::log(std::max(probs(i, y[i]), 1e-300));
            }
            loss /= static_cast<double>(n);
            loss += 0.5 * l2 * W_.squaredNorm();
            if (loss > prev_loss) {
                lr *= 0.5;  // deterministic step-size backoff
                if (lr < 1e-8) break;
            } else if (prev_loss - loss < 1e-6) {
                break;
            }
            prev_loss = std::min(prev_loss, loss);

            Matrix err = probs;
            for (Eigen::Index i = 0; i < n; ++i) err(i, y[i]) -= 1.0;
            Matrix gW = err.transpose() * X / static_cast<double>(n) + l2 * W_;
            Vector gb = err.colwise().sum().transpose() / static_cast<double>(n);
            W_ -= lr * gW;
            b_ -= lr * gb;
        }
    }

    std::vector<double> predict_proba(const Vector& x) const override {
        Vector logits = W_ * x + b_;
        double mx = logits.maxCoeff();
        std::vector<double> p(logits.size());
        double sum = 0.0;
        for (Eigen::Index k = 0; k < logits.size(); ++k) {
            p[k] = std::exp(logits[k] - mx);
            sum += p[k];
        }
        for (double& v : p) v /= sum;
        return p;
    }

  private:
    Matrix W_;
    Vector b_;
};

struct TreeNode {
    int feature = -1;       // -1 at leaves
    double threshold = 0.0;  // go left if x <= threshold
    int left = -1, right = -1;
    std::vector<double> distribution;  // leaves
};

class Tree {
  public:
    Tree(const Matrix& X, const std::vector<int>& y, int n_classes, int max_features,
         RngStream rng) {
        std::vector<int> idx(X.rows());
        // bootstrap sample
        for (size_t i = 0; i < idx.size(); ++i)
            idx[i] = static_cast<int>(rng.next_below(X.rows()));
        build(X, y, n_classes, max_features, rng, idx, 0);
    }

    const std::vector<double>& predict(const Vector& x) const {
        int node = 0;
        while (nodes_[node].feature >= 0)
            node = x[nodes_[node].feature] <= nodes_[node].threshold ? nodes_[node].left
                                                                     : nodes_[node].right;
        return nodes_[node].distribution;
    }

  private:
    int build(const Matrix& X, const std::vector<int>& y, int n_classes, int max_features,
              RngStream& rng, const std::vector<int>& idx, int depth) {
        const int me = static_cast<int>(nodes_.size());
        nodes_.emplace_back();

        std::vector<double> counts(n_classes, 0.0);
        for (int i : idx) counts[y[i]] += 1.0;
        const double total = static_cast<double>(idx.size());
        bool pure = std::count_if(counts.begin(), counts.end(),
                                  [](double c) { return c > 0; }) <= 1;
        if (pure || idx.size() < 2 || depth >= 32) {
            for (double& c : counts) c /= total;
            nodes_[me].distribution = std::move(counts);
            return me;
        }

        double parent_gini = 1.0;
        for (double c : counts) parent_gini -= (c / total) * (c / total);

        // sqrt(d) feature subsample, without replacement
        const int d = static_cast<int>(X.cols());
        std::vector<int> feats(d);
        std::iota(feats.begin(), feats.end(), 0);
        for (int i = 0; i < max_features; ++i) {
            int j = i + static_cast<int>(rng.next_below(d - i));
            std::swap(feats[i], feats[j]);
        }

        int best_feature = -1;
        double best_threshold = 0.0, best_impurity = parent_gini;
        std::vector<std::pair<double, int>> vals(idx.size());
        for (int fi = 0; fi < max_features; ++fi) {
            int f = feats[fi];
            for (size_t i = 0; i < idx.size(); ++i) vals[i] = {X(idx[i], f), y[idx[i]]};
            std::sort(vals.begin(), vals.end());
            std::vector<double> left_counts(n_classes, 0.0);
            std::vector<double> right_counts = counts;
            for (size_t i = 0; i + 1 < vals.size(); ++i) {
                left_counts[vals[i].second] += 1.0;
                right_counts[vals[i].second] -= 1.0;
                if (vals[i].first == vals[i + 1].first) continue;
                double nl = static_cast<double>(i + 1), nr = total - nl;
                double gl = 1.0, gr = 1.0;
                for (int k = 0; k < n_classes; ++k) {
                    gl -= (left_counts[k] / nl) * (left_counts[k] / nl);
                    gr -= (right_counts[k] / nr) * (right_counts[k] / nr);
                }
                double impurity = (nl * gl + nr * gr) / total;
                if (impurity + 1e-12 < best_impurity) {
                    best_impurity = impurity;
                    best_feature = f;
                    best_threshold = 0.5 * (vals[i].first + vals[i + 1].first);
                }
            }
        }

        if (best_feature < 0) {
            for (double& c : counts) c /= total;
            nodes_[me].distribution = std::move(counts);
            return me;
        }

        std::vector<int> left_idx, right_idx;
        for (int i : idx) {
            if (X(i, best_feature) <= best_threshold) left_idx.push_back(i);
            else right_idx.push_back(i);
        }
        nodes_[me].feature = best_feature;
        nodes_[me].threshold = best_threshold;
        nodes_[me].left = build(X, y, n_classes, max_features, rng, left_idx, depth + 1);
        nodes_[me].right = build(X, y, n_classes, max_features, rng, right_idx, depth + 1);
        return me;
    }

    std::vector<TreeNode> nodes_;
};

class RandomForestClf : public Classifier {
  public:
    RandomForestClf(std::shared_ptr<const FeatureMap> fmap, const Matrix& X,
                    const std::vector<int>& y, uint64_t seed) {
        fmap_ = std::move(fmap);
        n_classes_ = fmap_->n_classes();
        const int max_features = std::max(
            1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(X.cols())))));
        RngStream root = RngStream::derive(seed, "random-forest");
        trees_.reserve(kTrees);
        for (int t = 0; t < kTrees; ++t)
            trees_.emplace_back(X, y, n_classes_, max_features, root.child(t));
    }

    std::vector<double> predict_proba(const Vector& x) const override {
        std::vector<double> p(n_classes_, 0.0);
        for (const auto& t : trees_) {
            const auto& d = t.predict(x);
            for (int k = 0; k < n_classes_; ++k) p[k] += d[k];
        }
        for (double& v : p) v /= static_cast<double>(trees_.size());
        return p;
    }

  private:
    static constexpr int kTrees = 100;
    int n_classes_ = 0;
    std::vector<Tree> trees_;
};

}  // namespace

std::unique_ptr<Classifier> fit_classifier(ClassifierKind kind, const Table& train,
                                           const std::string& target, uint64_t seed) {
    if (train.row_count() == 0) throw ValidationError("fit_classifier: empty training table");
    auto fmap = std::make_shared<FeatureMap>(train.schema, target);
    Matrix X = fmap->encode_table(train);
    std::vector<int> y = fmap->labels(train);
    std::vector<int> seen(fmap->n_classes(), 0);
    for (int label : y) seen[label] = 1;
    if (std::accumulate(seen.begin(), seen.end(), 0) < 2)
        throw ValidationError("fit_classifier: training data has a single class");

    if (kind == ClassifierKind::LogisticRegression)
        return std::make_unique<LogisticRegressionClf>(std::move(fmap), X, y);
    return std::make_unique<RandomForestClf>(std::move(fmap), X, y, seed);
}

Metrics evaluate_classifier(const Classifier& clf, const Table& test) {
    const FeatureMap& fmap = clf.features();
    const int K = fmap.n_classes();
    std::vector<std::vector<long>> confusion(K, std::vector<long>(K, 0));
    long correct = 0;
    for (const auto& r : test.rows) {
        int truth = cell_cat(r[fmap.target_column()]);
        int pred = clf.predict(fmap.encode(r));
        ++confusion[truth][pred];
        if (pred == truth) ++correct;
    }
    Metrics m;
    m.accuracy = static_cast<double>(correct) / static_cast<double>(test.row_count());
    double prec = 0.0, rec = 0.0, f1 = 0.0;
    for (int k = 0; k < K; ++k) {
        long tp = confusion[k][k], fp = 0, fn = 0;
        for (int j = 0; j < K; ++j) {
            if (j != k) {
                fp += confusion[j][k];
                fn += confusion[k][j];
            }
        }
        double p = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        double r = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        prec += p;
        rec += r;
        f1 += p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
    }
    m.precision = prec / K;
    m.recall = rec / K;
    m.f1 = f1 / K;
    return m;
}

std::vector<TstrEntry> tstr(const Table& real_train, const Table& real_test,
                            const Table& synth, const std::string& target,
                            const std::vector<ClassifierKind>& kinds, uint64_t seed) {
    if (synth.row_count() < real_train.row_count())
        log_info("tstr: synthetic table is smaller than the real training split");
    std::vector<TstrEntry> out;
    for (ClassifierKind kind : kinds) {
        TstrEntry e;
        e.kind = classifier_kind_name(kind);
        auto baseline_clf = fit_classifier(kind, real_train, target, seed);
        auto tstr_clf = fit_classifier(kind, synth, target, seed);
        e.baseline = evaluate_classifier(*baseline_clf, real_test);
        e.tstr = evaluate_classifier(*tstr_clf, real_test);
        e.accuracy_gap = e.baseline.accuracy - e.tstr.accuracy;
        out.push_back(e);
    }
    return out;
}

double majority_class_rate(const Table& t, const std::string& target) {
    const Column& col = t.schema->column(target);
    if (col.kind != ColumnKind::Categorical)
        throw ValidationError("majority_class_rate: target must be categorical");
    int ci = t.schema->column_index(target);
    std::vector<long> counts(col.categories.size(), 0);
    for (const auto& r : t.rows) ++counts[cell_cat(r[ci])];
    long best = *std::max_element(counts.begin(), counts.end());
    return static_cast<double>(best) / static_cast<double>(t.row_count());
}

}  // namespace synth
