// Command-line front end: train, generate, evaluate, attack, experiment,
// validate-rules. Config comes from a TOML file (--config) with full flag
// override; precedence is flags > config > defaults.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "synth/checkpoint.hpp"
#include "synth/config.hpp"
#include "synth/constraints.hpp"
#include "synth/error.hpp"
#include "synth/eval.hpp"
#include "synth/gan.hpp"
#include "synth/log.hpp"
#include "synth/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace synth;

namespace {

std::string now_iso8601() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

void prepare_out_dir(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    if (!cfg.data_path.empty() && fs::exists(cfg.data_path)) {
        auto data_dir = fs::weakly_canonical(fs::path(cfg.data_path)).parent_path();
        if (fs::weakly_canonical(cfg.out_dir) == data_dir)
            throw ConfigError("out_dir must not be the input dataset directory");
    }
}

struct Inputs {
    std::shared_ptr<const TableSchema> schema;
    Table table;
    ConstraintSet rules;
};

Inputs load_inputs(const ExperimentConfig& cfg) {
    cfg.validate_paths();
    Inputs in;
    in.schema = std::make_shared<TableSchema>(TableSchema::load(cfg.schema_path));
    in.table = load_csv(cfg.data_path, in.schema);
    in.rules = cfg.rules_path.empty() ? ConstraintSet({}, in.schema)
                                      : ConstraintSet::load(cfg.rules_path, in.schema);
    log_info("loaded " + std::to_string(in.table.row_count()) + " rows, " +
             std::to_string(in.rules.rules().size()) + " rules");
    return in;
}

void write_manifest(const ExperimentConfig& cfg, const std::vector<std::string>& files,
                    const std::string& started_at) {
    Manifest m;
    m.config_hash = config_hash(cfg.to_json());
    m.artifact_version = kArtifactVersion;
    m.seed = cfg.seed;
    m.files = files;
    m.started_at = started_at;
    m.finished_at = now_iso8601();
    write_json_file(fs::path(cfg.out_dir) / "manifest.json", m.to_json());
}

double effective_sampling_rate(const ExperimentConfig& cfg, size_t rows) {
    int batch = cfg.train.batch > 0
                    ? cfg.train.batch
                    : static_cast<int>(std::min<size_t>(256, std::max<size_t>(1, rows / 4)));
    return std::min(1.0, static_cast<double>(batch) / static_cast<double>(rows));
}

TrainResult run_training(const ExperimentConfig& cfg, const Inputs& in, const Table& train_table,
                         std::vector<std::string>& files) {
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    if (cfg.calibrate_sigma && tc.privacy.sigma > 0.0) {
        double q = effective_sampling_rate(cfg, train_table.row_count());
        tc.privacy.sigma =
            calibrate_noise(tc.privacy.epsilon, tc.privacy.delta, q, tc.steps);
        log_info("calibrated sigma = " + std::to_string(tc.privacy.sigma));
    }

    std::ofstream audit(fs::path(cfg.out_dir) / "audit.jsonl", std::ios::binary);
    TrainHooks hooks;
    hooks.audit_log = &audit;
    hooks.checkpoint = [&](long step, const GanModel& model) {
        std::string name = "checkpoint-" + std::to_string(step) + ".json";
        save_checkpoint(model, cfg.seed, step, (fs::path(cfg.out_dir) / name).string());
        files.push_back(name);
    };

    TrainResult result = train(train_table, in.schema, in.rules, tc, hooks);
    save_checkpoint(result.model, cfg.seed, result.report.steps_taken,
                    (fs::path(cfg.out_dir) / "checkpoint.json").string());
    write_json_file(fs::path(cfg.out_dir) / "train_report.json", result.report.to_json());
    files.insert(files.end(), {"checkpoint.json", "train_report.json", "audit.jsonl"});
    return result;
}

int cmd_train(const ExperimentConfig& cfg) {
    std::string started = now_iso8601();
    prepare_out_dir(cfg);
    Inputs in = load_inputs(cfg);
    std::vector<std::string> files;
    TrainResult result = run_training(cfg, in, in.table, files);
    files.push_back("manifest.json");
    write_manifest(cfg, files, started);
    std::cout << "status: " << result.report.status
              << "  steps: " << result.report.steps_taken
              << "  epsilon: " << result.report.final_epsilon
              << "  violation-rate: " << result.report.final_violation_rate << "\n";
    return 0;
}

int cmd_generate(const std::string& checkpoint_path, size_t count, const std::string& out_csv,
                 uint64_t seed, bool reject_invalid) {
    Checkpoint cp = load_checkpoint(checkpoint_path);
    RngStream rng = RngStream::derive(seed, "generate");
    SampleResult s = sample(cp.model, count, rng, reject_invalid);
    write_csv(s.table, out_csv);
    json meta{{"count", s.table.row_count()},
              {"violation_rate", s.violation_rate},
              {"resampled_rows", s.resampled_rows},
              {"reject_invalid", reject_invalid},
              {"seed", seed},
              {"checkpoint", checkpoint_path}};
    write_json_file(out_csv + ".meta.json", meta);
    std::cout << "wrote " << s.table.row_count() << " rows, violation rate "
              << s.violation_rate << "\n";
    return 0;
}

json evaluate_tables(const ExperimentConfig& cfg, const Table& real_train,
                     const Table& real_test, const Table& synth) {
    json out;
    if (cfg.eval.fidelity) {
        FidelityReport fr = mixed_distance(real_train, synth);
        out["fidelity"] = fr.to_json();
        std::cout << fidelity_text(fr, "this-run") << "\n";
    }
    if (cfg.eval.utility) {
        const std::string& target = real_train.schema->target;
        if (target.empty())
            throw ValidationError("utility evaluation requires a target column in the schema");
        int tcol = real_train.schema->column_index(target);
        bool degenerate = true;
        for (const auto& r : synth.rows)
            if (cell_cat(r[tcol]) != cell_cat(synth.rows[0][tcol])) {
                degenerate = false;
                break;
            }
        if (degenerate) {
            log_info("utility: synthetic target column has a single class; skipping TSTR");
            out["utility"] = {{"skipped", "synthetic target column has a single class"}};
            return out;
        }
        auto entries =
            tstr(real_train, real_test, synth, target, cfg.eval.classifiers, cfg.seed);
        json jt = json::array();
        for (const auto& e : entries) {
            jt.push_back({{"classifier", e.kind},
                          {"baseline",
                           {{"accuracy", e.baseline.accuracy},
                            {"precision", e.baseline.precision},
                            {"recall", e.baseline.recall},
                            {"f1", e.baseline.f1}}},
                          {"tstr",
                           {{"accuracy", e.tstr.accuracy},
                            {"precision", e.tstr.precision},
                            {"recall", e.tstr.recall},
                            {"f1", e.tstr.f1}}},
                          {"accuracy_gap", e.accuracy_gap}});
        }
        out["utility"] = jt;
        std::cout << tstr_text(entries) << "\n";
    }
    return out;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& synth_path) {
    std::string started = now_iso8601();
    prepare_out_dir(cfg);
    Inputs in = load_inputs(cfg);
    Table synth = load_csv(synth_path, in.schema);
    RngStream split_rng = RngStream::derive(cfg.seed, "split");
    auto [real_train, real_test] = split(in.table, 1.0 - cfg.holdout_fraction, split_rng);
    json out = evaluate_tables(cfg, real_train, real_test, synth);
    write_json_file(fs::path(cfg.out_dir) / "evaluation.json", out);
    write_manifest(cfg, {"evaluation.json", "manifest.json"}, started);
    return 0;
}

std::vector<AttackReport> run_attacks(const ExperimentConfig& cfg, const Table& members,
                                      const Table& non_members, const Table& real_reference,
                                      const Table& synth, const GanModel* model,
                                      bool do_reident, bool do_attrib, bool do_mia) {
    std::vector<AttackReport> reports;
    if (do_reident) {
        for (double f : cfg.eval.reident_overlaps) {
            RngStream rng = RngStream::derive(cfg.seed, "attack-reident",
                                              static_cast<uint64_t>(f * 1000.0));
            reports.push_back(
                reident_attack(real_reference, synth, f, cfg.eval.reident_tolerance, rng));
        }
    }
    if (do_attrib) {
        const std::string& target = real_reference.schema->target;
        if (target.empty())
            throw ValidationError("attribute inference requires a target column in the schema");
        for (const auto& sensitive : real_reference.schema->sensitive)
            reports.push_back(
                attribute_inference_attack(real_reference, synth, sensitive, target, cfg.seed));
    }
    if (do_mia) {
        RngStream rng = RngStream::derive(cfg.seed, "attack-mia");
        if (model) {
            reports.push_back(membership_inference_attack(members, non_members, *model,
                                                          MiaSetting::WhiteBox, 0, rng));
            reports.push_back(membership_inference_attack(
                members, non_members, *model, MiaSetting::FullyBlackBox, cfg.eval.mia_k, rng));
        } else {
            reports.push_back(membership_inference_attack(members, non_members, synth,
                                                          MiaSetting::FullyBlackBox));
        }
    }
    return reports;
}

// balanced member/non-member pools drawn from two tables
std::pair<Table, Table> balanced_pools(const Table& a, const Table& b, uint64_t seed) {
    size_t n = std::min(a.row_count(), b.row_count());
    RngStream rng = RngStream::derive(seed, "mia-pools");
    auto take = [&](const Table& t, uint64_t salt) {
        std::vector<size_t> order(t.row_count());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        RngStream r = rng.child(salt);
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[r.next_below(i)]);
        Table out;
        out.schema = t.schema;
        for (size_t i = 0; i < n; ++i) out.rows.push_back(t.rows[order[i]]);
        return out;
    };
    return {take(a, 1), take(b, 2)};
}

int cmd_attack(const ExperimentConfig& cfg, const std::string& synth_path,
               const std::string& checkpoint_path, const std::vector<std::string>& which) {
    std::string started = now_iso8601();
    prepare_out_dir(cfg);
    Inputs in = load_inputs(cfg);

    std::optional<Checkpoint> cp;
    if (!checkpoint_path.empty()) cp = load_checkpoint(checkpoint_path);

    Table synth;
    if (!synth_path.empty()) {
        synth = load_csv(synth_path, in.schema);
    } else if (cp) {
        RngStream rng = RngStream::derive(cfg.seed, "generate");
        synth = sample(cp->model, in.table.row_count(), rng).table;
    } else {
        throw ConfigError("attack: need --synth or --checkpoint");
    }

    bool do_reident = false, do_attrib = false, do_mia = false;
    for (const auto& w : which) {
        if (w == "reident") do_reident = true;
        else if (w == "attrib") do_attrib = true;
        else if (w == "mia") do_mia = true;
        else throw ConfigError("unknown attack: " + w + " (expected reident|attrib|mia)");
    }
    if (which.empty()) do_reident = do_attrib = do_mia = true;

    RngStream split_rng = RngStream::derive(cfg.seed, "mia-split");
    auto [half_a, half_b] = split(in.table, 0.5, split_rng);
    auto [members, non_members] = balanced_pools(half_a, half_b, cfg.seed);

    auto reports = run_attacks(cfg, members, non_members, in.table, synth,
                               cp ? &cp->model : nullptr, do_reident, do_attrib, do_mia);

    json out = json::array();
    for (const auto& r : reports) out.push_back(r.to_json());
    write_json_file(fs::path(cfg.out_dir) / "attacks.json", out);
    write_manifest(cfg, {"attacks.json", "manifest.json"}, started);
    std::cout << attacks_text(reports) << "\n";
    return 0;
}

int cmd_experiment(const ExperimentConfig& cfg) {
    std::string started = now_iso8601();
    std::string stage = "setup";
    try {
        prepare_out_dir(cfg);
        Inputs in = load_inputs(cfg);
        std::vector<std::string> files;

        stage = "split";
        RngStream split_rng = RngStream::derive(cfg.seed, "split");
        auto [train_table, holdout] = split(in.table, 1.0 - cfg.holdout_fraction, split_rng);

        stage = "train";
        TrainResult result = run_training(cfg, in, train_table, files);

        stage = "generate";
        size_t count = cfg.synth_count > 0 ? cfg.synth_count : train_table.row_count();
        RngStream gen_rng = RngStream::derive(cfg.seed, "generate");
        SampleResult s = sample(result.model, count, gen_rng);
        write_csv(s.table, (fs::path(cfg.out_dir) / "synthetic.csv").string());
        write_json_file(fs::path(cfg.out_dir) / "synthetic.csv.meta.json",
                        json{{"count", s.table.row_count()},
                             {"violation_rate", s.violation_rate}});
        files.insert(files.end(), {"synthetic.csv", "synthetic.csv.meta.json"});

        stage = "evaluate";
        if (cfg.eval.fidelity || cfg.eval.utility) {
            json ev = evaluate_tables(cfg, train_table, holdout, s.table);
            write_json_file(fs::path(cfg.out_dir) / "evaluation.json", ev);
            files.push_back("evaluation.json");
        }

        stage = "attack";
        if (cfg.eval.attacks) {
            auto [members, non_members] = balanced_pools(train_table, holdout, cfg.seed);
            auto reports = run_attacks(cfg, members, non_members, train_table, s.table,
                                       &result.model, true, true, true);
            json out = json::array();
            for (const auto& r : reports) out.push_back(r.to_json());
            write_json_file(fs::path(cfg.out_dir) / "attacks.json", out);
            files.push_back("attacks.json");
            std::cout << attacks_text(reports) << "\n";
        }

        files.push_back("manifest.json");
        write_manifest(cfg, files, started);
        std::cout << "experiment complete: " << cfg.out_dir << "\n";
        return 0;
    } catch (Error&) {
        log_error("experiment failed at stage: " + stage);
        throw;
    }
}

int cmd_validate_rules(const ExperimentConfig& cfg) {
    if (cfg.schema_path.empty()) throw ConfigError("validate-rules: --schema is required");
    if (cfg.rules_path.empty()) throw ConfigError("validate-rules: --rules is required");
    auto schema = std::make_shared<TableSchema>(TableSchema::load(cfg.schema_path));
    ConstraintSet rules = ConstraintSet::load(cfg.rules_path, schema);
    std::cout << "ok: " << rules.rules().size() << " rules against "
              << schema->columns.size() << " columns\n";
    return 0;
}

std::string find_config_arg(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--config" && i + 1 < argc) return argv[i + 1];
        if (a.rfind("--config=", 0) == 0) return a.substr(9);
    }
    return "";
}

}  // namespace

int main(int argc, char** argv) {
    try {
        ExperimentConfig cfg;
        std::string config_path = find_config_arg(argc, argv);
        if (!config_path.empty()) cfg = ExperimentConfig::load(config_path);

        CLI::App app{"constraint-aware differentially private tabular data synthesizer"};
        app.require_subcommand(1);
        std::string config_dummy;

        auto add_shared = [&](CLI::App* sub) {
            sub->add_option("--config", config_dummy, "TOML config file");
            sub->add_option("--seed", cfg.seed, "top-level RNG seed");
            sub->add_option("--out-dir", cfg.out_dir, "output directory");
            sub->add_option("--data", cfg.data_path, "dataset CSV path");
            sub->add_option("--schema", cfg.schema_path, "schema JSON path");
            sub->add_option("--rules", cfg.rules_path, "rules JSON path");
        };

        auto add_train_opts = [&](CLI::App* sub) {
            sub->add_option("--lambda", cfg.train.lambda, "constraint penalty weight");
            sub->add_option("--steps", cfg.train.steps, "training steps");
            sub->add_option("--batch", cfg.train.batch, "expected minibatch size");
            sub->add_option("--eta-d", cfg.train.eta_d, "discriminator learning rate");
            sub->add_option("--adam-lr", cfg.train.adam_g.lr, "generator Adam learning rate");
            sub->add_option("--noise-dim", cfg.train.noise_dim, "generator noise dimension");
            sub->add_option("--epsilon", cfg.train.privacy.epsilon, "target epsilon");
            sub->add_option("--delta", cfg.train.privacy.delta, "target delta");
            sub->add_option("--clip", cfg.train.privacy.clip, "gradient clipping threshold C");
            sub->add_option("--sigma", cfg.train.privacy.sigma,
                            "noise multiplier (0 = non-private)");
            sub->add_flag("--calibrate-sigma", cfg.calibrate_sigma,
                          "solve sigma from the epsilon target");
        };

        CLI::App* train_cmd = app.add_subcommand("train", "train a model");
        add_shared(train_cmd);
        add_train_opts(train_cmd);

        CLI::App* gen_cmd = app.add_subcommand("generate", "sample synthetic rows");
        std::string checkpoint_path, out_csv = "synthetic.csv";
        size_t gen_count = 1000;
        bool reject_invalid = false;
        add_shared(gen_cmd);
        gen_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")->required();
        gen_cmd->add_option("--count", gen_count, "rows to generate");
        gen_cmd->add_option("--out", out_csv, "output CSV path");
        gen_cmd->add_flag("--reject-invalid", reject_invalid,
                          "resample rows that violate the rules");

        CLI::App* eval_cmd = app.add_subcommand("evaluate", "fidelity and utility reports");
        std::string synth_path;
        add_shared(eval_cmd);
        eval_cmd->add_option("--synth", synth_path, "synthetic CSV")->required();
        eval_cmd->add_flag("--fidelity,!--no-fidelity", cfg.eval.fidelity, "fidelity section");
        eval_cmd->add_flag("--utility,!--no-utility", cfg.eval.utility, "utility section");
        eval_cmd->add_option("--holdout-fraction", cfg.holdout_fraction,
                             "real holdout fraction for the utility baseline");

        CLI::App* attack_cmd = app.add_subcommand("attack", "privacy attack batteries");
        std::string attack_synth, attack_checkpoint;
        std::vector<std::string> which_attacks;
        add_shared(attack_cmd);
        attack_cmd->add_option("--synth", attack_synth, "synthetic CSV");
        attack_cmd->add_option("--checkpoint", attack_checkpoint,
                               "checkpoint JSON (required for WB membership inference)");
        attack_cmd->add_option("--attacks", which_attacks, "subset of reident,attrib,mia");
        attack_cmd->add_option("--overlaps", cfg.eval.reident_overlaps,
                               "re-identification overlap fractions");
        attack_cmd->add_option("--tolerance", cfg.eval.reident_tolerance,
                               "continuous match tolerance in real-std units");
        attack_cmd->add_option("--mia-k", cfg.eval.mia_k,
                               "generated samples for the FBB adversary (0 = 10x members)");

        CLI::App* exp_cmd =
            app.add_subcommand("experiment", "full train -> generate -> evaluate -> attack run");
        add_shared(exp_cmd);
        add_train_opts(exp_cmd);
        exp_cmd->add_option("--synth-count", cfg.synth_count,
                            "synthetic rows to generate (0 = training split size)");
        exp_cmd->add_option("--holdout-fraction", cfg.holdout_fraction, "real holdout fraction");

        CLI::App* rules_cmd = app.add_subcommand("validate-rules", "type-check a rule file");
        add_shared(rules_cmd);

        CLI11_PARSE(app, argc, argv);
        cfg.train.seed = cfg.seed;

        if (app.got_subcommand(train_cmd)) return cmd_train(cfg);
        if (app.got_subcommand(gen_cmd))
            return cmd_generate(checkpoint_path, gen_count, out_csv, cfg.seed, reject_invalid);
        if (app.got_subcommand(eval_cmd)) return cmd_evaluate(cfg, synth_path);
        if (app.got_subcommand(attack_cmd))
            return cmd_attack(cfg, attack_synth, attack_checkpoint, which_attacks);
        if (app.got_subcommand(exp_cmd)) return cmd_experiment(cfg);
        if (app.got_subcommand(rules_cmd)) return cmd_validate_rules(cfg);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const CapabilityError& e) {
        std::cerr << "capability error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
