#include "synth/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "synth/error.hpp"

namespace synth {

using nlohmann::json;

double emd_1d(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw ValidationError("emd_1d: empty sample set");
    std::vector<double> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());
    size_t ia = 0, ib = 0;
    double cur = 0.0, total = 0.0;
    while (ia < sa.size() && ib < sb.size()) {
        double next = std::min((ia + 1) / na, (ib + 1) / nb);
        total += (next - cur) * std::abs(sa[ia] - sb[ib]);
        cur = next;
        if ((ia + 1) / na <= next + 1e-15) ++ia;
        if ((ib + 1) / nb <= next + 1e-15) ++ib;
    }
    return total;
}

namespace {

struct ColumnStats {
    double mean = 0.0;
    double std = 1.0;
    double q25 = 0.0, q50 = 0.0, q75 = 0.0;
};

double quantile(std::vector<double> sorted, double p) {
    // linear interpolation between order statistics
    if (sorted.empty()) return 0.0;
    double pos = p * static_cast<double>(sorted.size() - 1);
    size_t lo = static_cast<size_t>(std::floor(pos));
    size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

ColumnStats column_stats(const std::vector<double>& values) {
    ColumnStats s;
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / n);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    s.q25 = quantile(sorted, 0.25);
    s.q50 = quantile(sorted, 0.50);
    s.q75 = quantile(sorted, 0.75);
    return s;
}

std::vector<double> column_values(const Table& t, int col) {
    std::vector<double> out;
    out.reserve(t.row_count());
    for (const auto& r : t.rows) out.push_back(cell_num(r[col]));
    return out;
}

void check_same_schema(const Table& a, const Table& b, const char* what) {
    if (a.schema->columns.size() != b.schema->columns.size())
        throw ValidationError(std::string(what) + ": schemas differ");
    for (size_t c = 0; c < a.schema->columns.size(); ++c) {
        const Column& ca = a.schema->columns[c];
        const Column& cb = b.schema->columns[c];
        if (ca.name != cb.name || ca.kind != cb.kind)
            throw ValidationError(std::string(what) + ": schemas differ at column " + ca.name);
    }
}

}  // namespace

json FidelityReport::to_json() const {
    return json{{"emd_per_column", emd_per_column},
                {"l1_freq_per_column", l1_freq_per_column},
                {"l2_summary_per_column", l2_summary_per_column},
                {"aggregate_emd", aggregate_emd},
                {"aggregate_l1", aggregate_l1},
                {"aggregate_l2", aggregate_l2},
                {"aggregate_distance", aggregate_distance}};
}

FidelityReport mixed_distance(const Table& real, const Table& synth) {
    check_same_schema(real, synth, "mixed_distance");
    if (real.row_count() == 0 || synth.row_count() == 0)
        throw ValidationError("mixed_distance: empty table");

    FidelityReport rep;
    size_t n_cat = 0, n_cont = 0;
    for (size_t c = 0; c < real.schema->columns.size(); ++c) {
        const Column& col = real.schema->columns[c];
        if (col.kind == ColumnKind::Categorical) {
            ++n_cat;
            std::vector<double> fr(col.categories.size(), 0.0), fs(col.categories.size(), 0.0);
            for (const auto& r : real.rows) fr[cell_cat(r[c])] += 1.0;
            for (const auto& r : synth.rows) fs[cell_cat(r[c])] += 1.0;
            double l1 = 0.0;
            for (size_t k = 0; k < fr.size(); ++k)
                l1 += std::abs(fr[k] / real.row_count() - fs[k] / synth.row_count());
            rep.l1_freq_per_column[col.name] = l1;
            rep.aggregate_l1 += l1;
        } else {
            ++n_cont;
            std::vector<double> vr = column_values(real, static_cast<int>(c));
            std::vector<double> vs = column_values(synth, static_cast<int>(c));
            ColumnStats sr = column_stats(vr);
            ColumnStats ss = column_stats(vs);
            double scale = sr.std > 0.0 ? sr.std : 1.0;
            double l2 = 0.0;
            auto add = [&](double a, double b) {
                double d = (a - b) / scale;
                l2 += d * d;
            };
            add(sr.mean, ss.mean);
            add(sr.std, ss.std);
            add(sr.q25, ss.q25);
            add(sr.q50, ss.q50);
            add(sr.q75, ss.q75);
            l2 = std::sqrt(l2);
            rep.l2_summary_per_column[col.name] = l2;
            rep.aggregate_l2 += l2;

            std::vector<double> zr = vr, zs = vs;
            for (double& v : zr) v = (v - sr.mean) / scale;
            for (double& v : zs) v = (v - sr.mean) / scale;
            double e = emd_1d(zr, zs);
            rep.emd_per_column[col.name] = e;
            rep.aggregate_emd += e;
        }
    }
    if (n_cat) rep.aggregate_l1 /= static_cast<double>(n_cat);
    if (n_cont) {
        rep.aggregate_l2 /= static_cast<double>(n_cont);
        rep.aggregate_emd /= static_cast<double>(n_cont);
    }
    if (n_cat && n_cont) rep.aggregate_distance = 0.5 * (rep.aggregate_l1 + rep.aggregate_l2);
    else rep.aggregate_distance = n_cat ? rep.aggregate_l1 : rep.aggregate_l2;
    return rep;
}

json AttackReport::to_json() const {
    return json{{"attack", attack},
                {"setting", setting},
                {"setting_label", setting_label},
                {"success", success},
                {"baseline", baseline}};
}

json AttackReport::params() const { return json(setting); }

AttackReport reident_attack(const Table& real, const Table& synth, double overlap,
                            double tolerance, RngStream& rng) {
    check_same_schema(real, synth, "reident_attack");
    if (tolerance <= 0.0) throw ValidationError("reident_attack: tolerance must be positive");
    if (overlap <= 0.0 || overlap > 1.0)
        throw ValidationError("reident_attack: overlap must be in (0,1]");
    if (real.row_count() == 0 || synth.row_count() == 0)
        throw ValidationError("reident_attack: empty table");

    const size_t n_cols = real.schema->columns.size();
    const size_t n_known =
        std::min(n_cols, static_cast<size_t>(std::ceil(overlap * static_cast<double>(n_cols))));

    // per-column absolute tolerance in real-std units
    std::vector<double> tol(n_cols, 0.0);
    for (size_t c = 0; c < n_cols; ++c) {
        if (real.schema->columns[c].kind == ColumnKind::Continuous) {
            ColumnStats s = column_stats(column_values(real, static_cast<int>(c)));
            tol[c] = tolerance * (s.std > 0.0 ? s.std : 1.0);
        }
    }

    auto cell_matches = [&](size_t c, const Record& a, const Record& b) {
        if (real.schema->columns[c].kind == ColumnKind::Categorical)
            return cell_cat(a[c]) == cell_cat(b[c]);
        return std::abs(cell_num(a[c]) - cell_num(b[c])) <= tol[c];
    };

    size_t compromised = 0;
    for (size_t i = 0; i < real.row_count(); ++i) {
        // per-record known-column draw
        RngStream rec_rng = rng.child(i);
        std::vector<size_t> cols(n_cols);
        std::iota(cols.begin(), cols.end(), size_t{0});
        for (size_t k = 0; k < n_known; ++k) {
            size_t j = k + rec_rng.next_below(n_cols - k);
            std::swap(cols[k], cols[j]);
        }
        // full leak: known columns match and all unknown columns match too
        bool hit = false;
        for (const auto& s : synth.rows) {
            bool all = true;
            for (size_t c = 0; c < n_cols && all; ++c)
                all = cell_matches(cols[c], real.rows[i], s);
            if (all) {
                hit = true;
                break;
            }
        }
        if (hit) ++compromised;
    }

    AttackReport rep;
    rep.attack = "re-identification";
    rep.setting["overlap"] = overlap;
    rep.setting["tolerance"] = tolerance;
    rep.success = static_cast<double>(compromised) / static_cast<double>(real.row_count());
    rep.baseline = 0.0;
    return rep;
}

AttackReport attribute_inference_attack(const Table& real, const Table& synth,
                                        const std::string& sensitive_column,
                                        const std::string& target_column, uint64_t seed) {
    check_same_schema(real, synth, "attribute_inference_attack");
    const Column& sens = real.schema->column(sensitive_column);
    if (sens.kind != ColumnKind::Categorical)
        throw ValidationError("attribute inference: sensitive column must be categorical");
    const int sens_col = real.schema->column_index(sensitive_column);
    const int target_col = real.schema->column_index(target_column);
    if (target_col < 0)
        throw ValidationError("attribute inference: target column not in schema");

    auto clf = fit_classifier(ClassifierKind::LogisticRegression, synth, target_column, seed);
    const FeatureMap& fmap = clf->features();

    size_t correct = 0;
    for (const auto& r : real.rows) {
        const int true_label = cell_cat(r[target_col]);
        const int true_sensitive = cell_cat(r[sens_col]);
        int best_candidate = 0;
        double best_conf = -1.0;
        for (size_t v = 0; v < sens.categories.size(); ++v) {
            Record probe = r;
            probe[sens_col] = static_cast<int>(v);
            double conf = clf->predict_proba(fmap.encode(probe))[true_label];
            if (conf > best_conf) {  // ties keep the lowest candidate index
                best_conf = conf;
                best_candidate = static_cast<int>(v);
            }
        }
        if (best_candidate == true_sensitive) ++correct;
    }

    // chance = majority sensitive-class rate over the real targets
    std::vector<long> counts(sens.categories.size(), 0);
    for (const auto& r : real.rows) ++counts[cell_cat(r[sens_col])];
    double baseline = static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
                      static_cast<double>(real.row_count());

    AttackReport rep;
    rep.attack = "attribute-inference";
    rep.setting_label = sensitive_column;
    rep.success = static_cast<double>(correct) / static_cast<double>(real.row_count());
    rep.baseline = baseline;
    return rep;
}

namespace {

// best accuracy over all thresholds and both orientations on a balanced set
double best_threshold_accuracy(const std::vector<double>& member_scores,
                               const std::vector<double>& non_member_scores) {
    struct Point {
        double score;
        int is_member;
    };
    std::vector<Point> pts;
    pts.reserve(member_scores.size() + non_member_scores.size());
    for (double s : member_scores) pts.push_back({s, 1});
    for (double s : non_member_scores) pts.push_back({s, 0});
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        return a.score < b.score;
    });
    const double n = static_cast<double>(pts.size());
    // sweep: threshold below everything predicts all member
    long members_below = 0, non_members_below = 0;
    const long total_members = static_cast<long>(member_scores.size());
    const long total_non = static_cast<long>(non_member_scores.size());
    double best = 0.5;
    auto consider = [&]() {
        // predict member iff score above cut
        long correct_high = (total_members - members_below) + non_members_below;
        long correct_low = members_below + (total_non - non_members_below);
        best = std::max(best, std::max(correct_high, correct_low) / n);
    };
    consider();
    for (size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].is_member) ++members_below;
        else ++non_members_below;
        if (i + 1 == pts.size() || pts[i + 1].score != pts[i].score) consider();
    }
    return best;
}

AttackReport mia_from_scores(std::vector<double> member_scores,
                             std::vector<double> non_member_scores, MiaSetting setting,
                             size_t k_samples) {
    AttackReport rep;
    rep.attack = "membership-inference";
    rep.setting_label = setting == MiaSetting::WhiteBox ? "WB" : "FBB";
    if (setting == MiaSetting::FullyBlackBox)
        rep.setting["k_samples"] = static_cast<double>(k_samples);
    rep.success = best_threshold_accuracy(member_scores, non_member_scores);
    rep.baseline = 0.5;
    return rep;
}

std::vector<double> fbb_scores(const Encoder& enc, const Table& targets, const Matrix& gen) {
    std::vector<double> scores;
    scores.reserve(targets.row_count());
    for (const auto& r : targets.rows) {
        Vector x = enc.encode_record(r);
        double min_sq = std::numeric_limits<double>::infinity();
        for (Eigen::Index g = 0; g < gen.rows(); ++g)
            min_sq = std::min(min_sq, (gen.row(g).transpose() - x).squaredNorm());
        scores.push_back(-std::sqrt(min_sq));
    }
    return scores;
}

}  // namespace

AttackReport membership_inference_attack(const Table& members, const Table& non_members,
                                         const GanModel& model, MiaSetting setting,
                                         size_t k_samples, RngStream& rng) {
    if (members.row_count() != non_members.row_count())
        throw ValidationError("membership inference: member/non-member sets must be balanced");
    if (members.row_count() == 0)
        throw ValidationError("membership inference: empty target sets");
    Encoder enc(model.schema);

    if (setting == MiaSetting::WhiteBox) {
        auto score = [&](const Table& t) {
            Matrix x = enc.encode(t);
            Matrix d = forward(model.discriminator, x);
            return std::vector<double>(d.col(0).data(), d.col(0).data() + d.rows());
        };
        return mia_from_scores(score(members), score(non_members), setting, 0);
    }

    if (k_samples == 0) k_samples = members.row_count() * 10;
    Matrix z(k_samples, model.noise_dim);
    for (size_t r = 0; r < k_samples; ++r)
        for (int c = 0; c < model.noise_dim; ++c)
            z(static_cast<Eigen::Index>(r), c) = rng.next_gaussian();
    Matrix gen = forward(model.generator, z);
    // score on hard-decoded records, matching what a released table exposes
    Table gen_table = enc.decode(gen);
    Matrix gen_enc = enc.encode(gen_table);
    return mia_from_scores(fbb_scores(enc, members, gen_enc),
                           fbb_scores(enc, non_members, gen_enc), setting, k_samples);
}

AttackReport membership_inference_attack(const Table& members, const Table& non_members,
                                         const Table& generated, MiaSetting setting) {
    if (setting == MiaSetting::WhiteBox)
        throw CapabilityError(
            "membership inference: white-box setting requires discriminator access");
    if (members.row_count() != non_members.row_count())
        throw ValidationError("membership inference: member/non-member sets must be balanced");
    if (members.row_count() == 0 || generated.row_count() == 0)
        throw ValidationError("membership inference: empty tables");
    check_same_schema(members, generated, "membership_inference_attack");
    Encoder enc(members.schema);
    Matrix gen_enc = enc.encode(generated);
    return mia_from_scores(fbb_scores(enc, members, gen_enc),
                           fbb_scores(enc, non_members, gen_enc), setting,
                           generated.row_count());
}

}  // namespace synth
