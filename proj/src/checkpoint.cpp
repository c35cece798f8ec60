#include "synth/checkpoint.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "synth/error.hpp"

namespace synth {

using nlohmann::json;

json net_to_json(const DenseNet& net) {
    json layers = json::array();
    for (const auto& l : net.layers) {
        json jl{{"in", l.in_dim()},
                {"out", l.out_dim()},
                {"act", act_name(l.act)},
                {"slope", l.slope}};
        json segs = json::array();
        for (const auto& s : l.segments) segs.push_back({{"offset", s.offset}, {"width", s.width}});
        jl["segments"] = segs;
        std::vector<double> w;
        w.reserve(l.weights.size());
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
        jl["weights"] = w;
        std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
        jl["bias"] = b;
        layers.push_back(std::move(jl));
    }
    return json{{"layers", layers}};
}

DenseNet net_from_json(const json& j) {
    DenseNet net;
    for (const auto& jl : j.at("layers")) {
        Layer l;
        int in = jl.at("in").get<int>();
        int out = jl.at("out").get<int>();
        l.act = act_from_name(jl.at("act").get<std::string>());
        l.slope = jl.at("slope").get<double>();
        for (const auto& js : jl.at("segments"))
            l.segments.push_back({js.at("offset").get<int>(), js.at("width").get<int>()});
        auto w = jl.at("weights").get<std::vector<double>>();
        auto b = jl.at("bias").get<std::vector<double>>();
        if (static_cast<int>(w.size()) != in * out || static_cast<int>(b.size()) != out)
            throw FormatError("checkpoint: layer array sizes do not match dims");
        l.weights = Matrix(out, in);
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c) l.weights(r, c) = w[static_cast<size_t>(r) * in + c];
        l.bias = Eigen::Map<Vector>(b.data(), out);
        net.layers.push_back(std::move(l));
    }
    net.validate();
    return net;
}

void save_checkpoint(const GanModel& model, uint64_t seed, long step,
                     const std::string& path) {
    json j{{"format_version", kCheckpointVersion},
           {"noise_dim", model.noise_dim},
           {"seed", seed},
           {"step", step},
           {"schema", model.schema->to_json()},
           {"rules", model.rules.to_json()},
           {"generator", net_to_json(model.generator)},
           {"discriminator", net_to_json(model.discriminator)}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write checkpoint: " + path);
    out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("checkpoint " + path + ": not valid JSON: " + e.what());
    }
    try {
        if (!j.contains("format_version") || j["format_version"].get<int>() != kCheckpointVersion)
            throw FormatError("checkpoint " + path + ": unsupported format version");
        Checkpoint cp;
        auto schema = std::make_shared<TableSchema>(TableSchema::from_json(j.at("schema")));
        cp.model.schema = schema;
        cp.model.rules = ConstraintSet::parse(j.at("rules"), schema);
        cp.model.noise_dim = j.at("noise_dim").get<int>();
        cp.model.generator = net_from_json(j.at("generator"));
        cp.model.discriminator = net_from_json(j.at("discriminator"));
        cp.seed = j.at("seed").get<uint64_t>();
        cp.step = j.at("step").get<long>();
        return cp;
    } catch (const json::exception& e) {
        throw FormatError("checkpoint " + path + ": " + e.what());
    }
}

}  // namespace synth
