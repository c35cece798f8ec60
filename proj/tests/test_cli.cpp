#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "synth/rng.hpp"
#include "synth/toy.hpp"

using namespace synth;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

const char* cli_path() {
    const char* p = std::getenv("SYNTH_CLI");
    REQUIRE_MESSAGE(p != nullptr, "SYNTH_CLI must point at the CLI binary");
    return p;
}

RunResult run(const std::string& args) {
    static int counter = 0;
    fs::path log = fs::temp_directory_path() / ("synth_cli_out_" + std::to_string(counter++));
    std::string cmd = std::string(cli_path()) + " " + args + " > " + log.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::ostringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    fs::remove(log);
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// toy dataset written once for the whole suite
struct Fixture {
    fs::path dir;
    std::string data, schema, rules;

    Fixture() {
        dir = fs::temp_directory_path() / "synth_cli_fixture";
        fs::create_directories(dir);
        RngStream rng = RngStream::derive(42, "toy");
        ToyData toy = make_toy_dataset({.rows = 400}, rng);
        data = (dir / "data.csv").string();
        schema = (dir / "schema.json").string();
        rules = (dir / "rules.json").string();
        write_csv(toy.table, data);
        std::ofstream(schema) << toy.schema->to_json().dump(2);
        std::ofstream(rules) << toy.rules.to_json().dump(2);
    }

    std::string io_flags() const {
        return "--data " + data + " --schema " + schema + " --rules " + rules;
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

std::string fast_train_flags() {
    return " --steps 5 --batch 32 --noise-dim 8 --sigma 0";
}

}  // namespace

TEST_CASE("--help lists every subcommand") {
    RunResult r = run("--help");
    CHECK(r.exit_code == 0);
    for (const char* sub :
         {"train", "generate", "evaluate", "attack", "experiment", "validate-rules"})
        CHECK(r.output.find(sub) != std::string::npos);
}

TEST_CASE("train --help lists the documented flags") {
    RunResult r = run("train --help");
    CHECK(r.exit_code == 0);
    for (const char* flag :
         {"--config", "--seed", "--out-dir", "--data", "--schema", "--rules", "--lambda",
          "--steps", "--batch", "--eta-d", "--adam-lr", "--noise-dim", "--epsilon", "--delta",
          "--clip", "--sigma", "--calibrate-sigma"})
        CHECK(r.output.find(flag) != std::string::npos);
}

TEST_CASE("validate-rules accepts the toy rule file") {
    Fixture& f = fixture();
    RunResult r = run("validate-rules --schema " + f.schema + " --rules " + f.rules);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("ok:") != std::string::npos);
}

TEST_CASE("validate-rules without --rules is a usage error (exit 2)") {
    Fixture& f = fixture();
    RunResult r = run("validate-rules --schema " + f.schema);
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("--rules is required") != std::string::npos);
}

TEST_CASE("a missing rules file is reported by path (exit 2)") {
    Fixture& f = fixture();
    RunResult r =
        run("validate-rules --schema " + f.schema + " --rules /nonexistent/rules.json");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("/nonexistent/rules.json") != std::string::npos);
}

TEST_CASE("train writes the expected artifacts") {
    Fixture& f = fixture();
    fs::path out = fs::temp_directory_path() / "synth_cli_train";
    fs::remove_all(out);
    RunResult r =
        run("train " + f.io_flags() + fast_train_flags() + " --out-dir " + out.string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("status: completed") != std::string::npos);
    for (const char* name :
         {"checkpoint.json", "train_report.json", "audit.jsonl", "manifest.json"})
        CHECK(fs::exists(out / name));
    json report = json::parse(slurp(out / "train_report.json"));
    CHECK(report["steps_taken"] == 5);
    CHECK(report["real_accesses_during_generator_update"] == 0);
    json manifest = json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["seed"] == 1);
    CHECK(manifest["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("generate is seed-deterministic and writes a sidecar") {
    Fixture& f = fixture();
    fs::path out = fs::temp_directory_path() / "synth_cli_gen";
    fs::remove_all(out);
    REQUIRE(run("train " + f.io_flags() + fast_train_flags() + " --out-dir " + out.string())
                .exit_code == 0);
    std::string ck = (out / "checkpoint.json").string();

    std::string a = (out / "a.csv").string(), b = (out / "b.csv").string(),
                c = (out / "c.csv").string();
    CHECK(run("generate --checkpoint " + ck + " --count 50 --seed 7 --out " + a).exit_code == 0);
    CHECK(run("generate --checkpoint " + ck + " --count 50 --seed 7 --out " + b).exit_code == 0);
    CHECK(run("generate --checkpoint " + ck + " --count 50 --seed 8 --out " + c).exit_code == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a) != slurp(c));

    json meta = json::parse(slurp(a + ".meta.json"));
    CHECK(meta["count"] == 50);
    CHECK(meta["seed"] == 7);
    // header + 50 rows
    std::istringstream lines(slurp(a));
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) ++n;
    CHECK(n == 51);
}

TEST_CASE("evaluate produces evaluation.json against the real table itself") {
    Fixture& f = fixture();
    fs::path out = fs::temp_directory_path() / "synth_cli_eval";
    fs::remove_all(out);
    RunResult r = run("evaluate " + f.io_flags() + " --synth " + f.data + " --out-dir " +
                      out.string());
    CHECK(r.exit_code == 0);
    json ev = json::parse(slurp(out / "evaluation.json"));
    CHECK(ev.contains("fidelity"));
    CHECK(ev.contains("utility"));
    CHECK(ev["fidelity"]["aggregate_distance"].get<double>() < 0.2);
}

TEST_CASE("attack runs the battery against a released table") {
    Fixture& f = fixture();
    fs::path out = fs::temp_directory_path() / "synth_cli_attack";
    fs::remove_all(out);
    RunResult r = run("attack " + f.io_flags() + " --synth " + f.data + " --out-dir " +
                      out.string() + " --attacks reident mia");
    CHECK(r.exit_code == 0);
    json attacks = json::parse(slurp(out / "attacks.json"));
    // three overlap settings plus one FBB membership report
    CHECK(attacks.size() == 4);
    CHECK(attacks[0]["attack"] == "re-identification");
    CHECK(attacks[3]["attack"] == "membership-inference");
    CHECK(attacks[3]["setting_label"] == "FBB");
}

TEST_CASE("unknown attack name is a usage error (exit 2)") {
    Fixture& f = fixture();
    fs::path out = fs::temp_directory_path() / "synth_cli_attack_bad";
    RunResult r = run("attack " + f.io_flags() + " --synth " + f.data + " --out-dir " +
                      out.string() + " --attacks voodoo");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("unknown attack") != std::string::npos);
}

TEST_CASE("attack without a source is a usage error (exit 2)") {
    Fixture& f = fixture();
    fs::path out = fs::temp_directory_path() / "synth_cli_attack_none";
    RunResult r = run("attack " + f.io_flags() + " --out-dir " + out.string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("--synth or --checkpoint") != std::string::npos);
}

TEST_CASE("out_dir colliding with the dataset directory is rejected (exit 2)") {
    Fixture& f = fixture();
    RunResult r =
        run("train " + f.io_flags() + fast_train_flags() + " --out-dir " + f.dir.string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("out_dir") != std::string::npos);
}

TEST_CASE("a malformed data row is a validation error (exit 2) naming the line") {
    Fixture& f = fixture();
    fs::path bad = fs::temp_directory_path() / "synth_cli_bad.csv";
    {
        std::string good = slurp(f.data);
        size_t first_nl = good.find('\n');
        size_t second_nl = good.find('\n', first_nl + 1);
        std::ofstream out(bad, std::ios::binary);
        out << good.substr(0, second_nl + 1) << "garbage,row,entirely,bad,here\n";
    }
    fs::path out = fs::temp_directory_path() / "synth_cli_badrun";
    RunResult r = run("train --data " + bad.string() + " --schema " + f.schema + " --rules " +
                      f.rules + fast_train_flags() + " --out-dir " + out.string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find(":3:") != std::string::npos);
    fs::remove(bad);
}

TEST_CASE("a corrupt checkpoint is an internal error (exit 3)") {
    fs::path ck = fs::temp_directory_path() / "synth_cli_corrupt.json";
    std::ofstream(ck) << "{not json";
    RunResult r = run("generate --checkpoint " + ck.string() + " --count 5 --out " +
                      (fs::temp_directory_path() / "synth_cli_corrupt.csv").string());
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("checkpoint") != std::string::npos);
    fs::remove(ck);
}

TEST_CASE("flags override config file values") {
    Fixture& f = fixture();
    fs::path out = fs::temp_directory_path() / "synth_cli_precedence";
    fs::remove_all(out);
    fs::path cfg = fs::temp_directory_path() / "synth_cli_cfg.toml";
    {
        std::ofstream c(cfg);
        c << "data = \"" << f.data << "\"\n"
          << "schema = \"" << f.schema << "\"\n"
          << "rules = \"" << f.rules << "\"\n"
          << "out_dir = \"" << out.string() << "\"\n"
          << "[train]\nsteps = 9\nbatch = 32\nnoise_dim = 8\n[privacy]\nsigma = 0.0\n";
    }
    RunResult base = run("train --config " + cfg.string());
    CHECK(base.exit_code == 0);
    CHECK(json::parse(slurp(out / "train_report.json"))["steps_taken"] == 9);

    fs::remove_all(out);
    RunResult overridden = run("train --config " + cfg.string() + " --steps 3");
    CHECK(overridden.exit_code == 0);
    CHECK(json::parse(slurp(out / "train_report.json"))["steps_taken"] == 3);
    fs::remove(cfg);
}
