#include "synth/config.hpp"

#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "synth/error.hpp"

namespace synth {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// strip a # comment that is not inside a quoted string
std::string strip_comment(const std::string& line) {
    bool in_str = false;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
        else if (line[i] == '#' && !in_str) return line.substr(0, i);
    }
    return line;
}

json parse_scalar(const std::string& raw, int line_no) {
    std::string v = trim(raw);
    if (v.empty()) throw ParseError("config line " + std::to_string(line_no) + ": empty value");
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"')
            throw ParseError("config line " + std::to_string(line_no) + ": unterminated string");
        std::string out;
        for (size_t i = 1; i + 1 < v.size(); ++i) {
            if (v[i] == '\\' && i + 2 < v.size()) {
                ++i;
                switch (v[i]) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default: out += v[i];
                }
            } else {
                out += v[i];
            }
        }
        return out;
    }
    if (v == "true") return true;
    if (v == "false") return false;
    // integer, then float
    {
        long long iv;
        auto r = std::from_chars(v.data(), v.data() + v.size(), iv);
        if (r.ec == std::errc() && r.ptr == v.data() + v.size()) return iv;
    }
    {
        double dv;
        auto r = std::from_chars(v.data(), v.data() + v.size(), dv);
        if (r.ec == std::errc() && r.ptr == v.data() + v.size()) return dv;
    }
    throw ParseError("config line " + std::to_string(line_no) + ": cannot parse value \"" + v +
                     "\"");
}

json parse_value(const std::string& raw, int line_no) {
    std::string v = trim(raw);
    if (!v.empty() && v.front() == '[') {
        if (v.back() != ']')
            throw ParseError("config line " + std::to_string(line_no) + ": unterminated array");
        json arr = json::array();
        std::string inner = v.substr(1, v.size() - 2);
        std::string item;
        bool in_str = false;
        for (char c : inner) {
            if (c == '"') in_str = !in_str;
            if (c == ',' && !in_str) {
                if (!trim(item).empty()) arr.push_back(parse_scalar(item, line_no));
                item.clear();
            } else {
                item += c;
            }
        }
        if (!trim(item).empty()) arr.push_back(parse_scalar(item, line_no));
        return arr;
    }
    return parse_scalar(v, line_no);
}

}  // namespace

json parse_toml(const std::string& text) {
    json root = json::object();
    json* table = &root;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = trim(strip_comment(line));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ParseError("config line " + std::to_string(line_no) + ": bad table header");
            std::string name = trim(s.substr(1, s.size() - 2));
            table = &root;
            size_t pos = 0;
            while (pos != std::string::npos) {
                size_t dot = name.find('.', pos);
                std::string part = name.substr(pos, dot == std::string::npos ? dot : dot - pos);
                part = trim(part);
                if (part.empty())
                    throw ParseError("config line " + std::to_string(line_no) +
                                     ": empty table name part");
                table = &(*table)[part];
                if (table->is_null()) *table = json::object();
                pos = dot == std::string::npos ? dot : dot + 1;
            }
            continue;
        }
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(s.substr(0, eq));
        if (key.empty())
            throw ParseError("config line " + std::to_string(line_no) + ": empty key");
        (*table)[key] = parse_value(s.substr(eq + 1), line_no);
    }
    return root;
}

json load_toml_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_toml(ss.str());
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    auto get = [&](const json& obj, const char* key, auto& target) {
        if (obj.contains(key)) target = obj[key].get<std::decay_t<decltype(target)>>();
    };
    get(j, "data", c.data_path);
    get(j, "schema", c.schema_path);
    get(j, "rules", c.rules_path);
    get(j, "out_dir", c.out_dir);
    get(j, "seed", c.seed);
    get(j, "holdout_fraction", c.holdout_fraction);
    get(j, "synth_count", c.synth_count);

    if (j.contains("train")) {
        const json& t = j["train"];
        get(t, "lambda", c.train.lambda);
        get(t, "eta_d", c.train.eta_d);
        get(t, "adam_lr", c.train.adam_g.lr);
        get(t, "batch", c.train.batch);
        get(t, "steps", c.train.steps);
        get(t, "d_steps_per_g", c.train.d_steps_per_g);
        get(t, "noise_dim", c.train.noise_dim);
        get(t, "hidden_g", c.train.hidden_g);
        get(t, "hidden_d", c.train.hidden_d);
        get(t, "leak", c.train.leak);
        get(t, "instance_noise", c.train.instance_noise);
        get(t, "saturating_generator_loss", c.train.saturating_generator_loss);
        get(t, "checkpoint_every", c.train.checkpoint_every);
    }
    if (j.contains("privacy")) {
        const json& p = j["privacy"];
        get(p, "epsilon", c.train.privacy.epsilon);
        get(p, "delta", c.train.privacy.delta);
        get(p, "clip", c.train.privacy.clip);
        get(p, "sigma", c.train.privacy.sigma);
        get(p, "calibrate", c.calibrate_sigma);
    }
    if (j.contains("eval")) {
        const json& e = j["eval"];
        get(e, "fidelity", c.eval.fidelity);
        get(e, "utility", c.eval.utility);
        get(e, "attacks", c.eval.attacks);
        get(e, "reident_overlaps", c.eval.reident_overlaps);
        get(e, "reident_tolerance", c.eval.reident_tolerance);
        get(e, "mia_k", c.eval.mia_k);
        if (e.contains("classifiers")) {
            c.eval.classifiers.clear();
            for (const auto& name : e["classifiers"])
                c.eval.classifiers.push_back(
                    classifier_kind_from_name(name.get<std::string>()));
        }
    }
    c.train.seed = c.seed;
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    return from_json(load_toml_file(path));
}

json ExperimentConfig::to_json() const {
    json classifiers = json::array();
    for (auto k : eval.classifiers) classifiers.push_back(classifier_kind_name(k));
    return json{
        {"data", data_path},
        {"schema", schema_path},
        {"rules", rules_path},
        {"out_dir", out_dir},
        {"seed", seed},
        {"holdout_fraction", holdout_fraction},
        {"synth_count", synth_count},
        {"train",
         {{"lambda", train.lambda},
          {"eta_d", train.eta_d},
          {"adam_lr", train.adam_g.lr},
          {"batch", train.batch},
          {"steps", train.steps},
          {"d_steps_per_g", train.d_steps_per_g},
          {"noise_dim", train.noise_dim},
          {"hidden_g", train.hidden_g},
          {"hidden_d", train.hidden_d},
          {"leak", train.leak},
          {"instance_noise", train.instance_noise},
          {"saturating_generator_loss", train.saturating_generator_loss},
          {"checkpoint_every", train.checkpoint_every}}},
        {"privacy",
         {{"epsilon", train.privacy.epsilon},
          {"delta", train.privacy.delta},
          {"clip", train.privacy.clip},
          {"sigma", train.privacy.sigma},
          {"calibrate", calibrate_sigma}}},
        {"eval",
         {{"fidelity", eval.fidelity},
          {"utility", eval.utility},
          {"attacks", eval.attacks},
          {"classifiers", classifiers},
          {"reident_overlaps", eval.reident_overlaps},
          {"reident_tolerance", eval.reident_tolerance},
          {"mia_k", eval.mia_k}}}};
}

void ExperimentConfig::validate_paths() const {
    namespace fs = std::filesystem;
    if (data_path.empty()) throw ConfigError("config: \"data\" path is required");
    if (schema_path.empty()) throw ConfigError("config: \"schema\" path is required");
    if (!fs::exists(data_path)) throw ConfigError("config: data file not found: " + data_path);
    if (!fs::exists(schema_path))
        throw ConfigError("config: schema file not found: " + schema_path);
    if (!rules_path.empty() && !fs::exists(rules_path))
        throw ConfigError("config: rules file not found: " + rules_path);
}

std::string config_hash(const json& j) {
    std::string dump = j.dump();
    uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

json Manifest::to_json() const {
    return json{{"config_hash", config_hash},
                {"artifact_version", artifact_version},
                {"seed", seed},
                {"files", files},
                {"started_at", started_at},
                {"finished_at", finished_at}};
}

}  // namespace synth
