#include "esd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace esd {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError("'" + where + "' must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.contains(key)) {
            throw ConfigError("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
        }
    }
}

std::string field(const std::string& where, const std::string& key) { return where.empty() ? key : where + "." + key; }

void read(const json& obj, const std::string& where, const std::string& key, double& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ConfigError("field '" + field(where, key) + "' must be a number");
    out = v.get<double>();
}

template <typename Int>
void read_unsigned(const json& obj, const std::string& where, const std::string& key, Int& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number_unsigned()) {
        throw ConfigError("field '" + field(where, key) + "' must be a non-negative integer");
    }
    out = static_cast<Int>(v.get<std::uint64_t>());
}

void read(const json& obj, const std::string& where, const std::string& key, std::string& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_string()) throw ConfigError("field '" + field(where, key) + "' must be a string");
    out = v.get<std::string>();
}

void read(const json& obj, const std::string& where, const std::string& key, Vector4d& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_array() || v.size() != 4) {
        throw ConfigError("field '" + field(where, key) + "' must be an array of 4 numbers");
    }
    for (int i = 0; i < 4; ++i) {
        if (!v[static_cast<std::size_t>(i)].is_number()) {
            throw ConfigError("field '" + field(where, key) + "' must be an array of 4 numbers");
        }
        out[i] = v[static_cast<std::size_t>(i)].get<double>();
    }
}

template <typename Parse, typename T>
void read_enum(const json& obj, const std::string& where, const std::string& key, T& out, Parse parse) {
    std::string name;
    if (!obj.contains(key)) return;
    read(obj, where, key, name);
    try {
        out = parse(name);
    } catch (const InvalidInput& e) {
        throw ConfigError("field '" + field(where, key) + "': " + e.what());
    }
}

json vec_json(const Vector4d& v) { return json::array({v[0], v[1], v[2], v[3]}); }

std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

}  // namespace

void validate_config(const RunConfig& cfg) {
    const auto report = validate_params(cfg.model);
    if (!report.ok()) throw ConfigError("model: " + report.violations.front());
    if (!cfg.noise.sigma.allFinite() || cfg.noise.sigma.minCoeff() < 0.0) {
        throw ConfigError("noise.sigma: every component >= 0 required");
    }
    try {
        cfg.sim.validate();
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
    if (cfg.ensemble_paths == 0) throw ConfigError("ensemble.n_paths >= 1 required");

    const auto& conv = cfg.convergence;
    if (conv.dt_list.empty()) throw ConfigError("convergence.dt_list must not be empty");
    for (std::size_t i = 0; i < conv.dt_list.size(); ++i) {
        SimConfig probe = cfg.sim;
        probe.t_end = conv.t_end;
        probe.dt = conv.dt_list[i];
        try {
            probe.validate();
        } catch (const InvalidInput& e) {
            throw ConfigError(std::string("convergence: ") + e.what());
        }
        if (i > 0 && !(conv.dt_list[i] < conv.dt_list[i - 1])) {
            throw ConfigError("convergence.dt_list must be strictly decreasing");
        }
    }
    if (conv.refinement == 0) throw ConfigError("convergence.refinement >= 1 required");
    if (conv.n_paths < 2) throw ConfigError("convergence.n_paths >= 2 required");

    if (!(cfg.moment_p >= 2.0)) throw ConfigError("moments.p >= 2 required");

    const auto& per = cfg.persistence;
    if (!per.spec.c.allFinite() || !(per.spec.c.minCoeff() > 0.0)) throw ConfigError("persistence.c: all > 0 required");
    if (!(per.spec.eta > 0.0)) throw ConfigError("persistence.eta > 0 required");
    if (!(per.spec.kappa >= 0.0)) throw ConfigError("persistence.kappa >= 0 required");
    if (!(per.box.lo.minCoeff() > 0.0)) throw ConfigError("persistence.box_lo: all > 0 required");
    if (((per.box.hi - per.box.lo).array() < 0.0).any()) throw ConfigError("persistence.box_hi >= box_lo required");
    if (per.grid_intervals == 0) throw ConfigError("persistence.grid_intervals >= 1 required");

    const auto& sens = cfg.sensitivity;
    if (!(sens.delta_fraction > 0.0 && sens.delta_fraction < 1.0)) {
        throw ConfigError("sensitivity.delta_fraction must be in (0, 1)");
    }
    if (sens.n_paths == 0) throw ConfigError("sensitivity.n_paths >= 1 required");

    const auto& st = cfg.stability;
    if (st.at != "origin" && st.at != "no-import" && st.at != "import-threshold") {
        throw ConfigError("stability.at must be origin|no-import|import-threshold");
    }
    if (!st.p_diag.allFinite() || !(st.p_diag.minCoeff() > 0.0)) throw ConfigError("stability.p_diag: all > 0 required");
}

RunConfig parse_config(std::string_view text) {
    json root;
    try {
        root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
        throw ConfigError("config parse error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                          ": " + e.what());
    }

    RunConfig cfg;
    check_keys(root, "", {"model", "noise", "sim", "ensemble", "convergence", "moments", "persistence", "sensitivity",
                          "stability", "threads"});

    if (root.contains("model")) {
        const auto& m = root.at("model");
        std::set<std::string> names;
        for (Param p : kAllParams) names.insert(std::string(param_name(p)));
        check_keys(m, "model", names);
        for (Param p : kAllParams) read(m, "model", std::string(param_name(p)), param_ref(cfg.model, p));
    }
    if (root.contains("noise")) {
        const auto& n = root.at("noise");
        check_keys(n, "noise", {"sigma"});
        read(n, "noise", "sigma", cfg.noise.sigma);
    }
    if (root.contains("sim")) {
        const auto& s = root.at("sim");
        check_keys(s, "sim", {"t_end", "dt", "seed", "scheme", "positivity", "eps", "x0"});
        read(s, "sim", "t_end", cfg.sim.t_end);
        read(s, "sim", "dt", cfg.sim.dt);
        read_unsigned(s, "sim", "seed", cfg.sim.seed);
        read_enum(s, "sim", "scheme", cfg.sim.scheme, scheme_from_name);
        read_enum(s, "sim", "positivity", cfg.sim.positivity.kind, positivity_from_name);
        read(s, "sim", "eps", cfg.sim.positivity.eps);
        read(s, "sim", "x0", cfg.sim.x0);
    }
    if (root.contains("ensemble")) {
        const auto& e = root.at("ensemble");
        check_keys(e, "ensemble", {"n_paths"});
        read_unsigned(e, "ensemble", "n_paths", cfg.ensemble_paths);
    }
    if (root.contains("convergence")) {
        const auto& c = root.at("convergence");
        check_keys(c, "convergence", {"dt_list", "t_end", "refinement", "n_paths", "phi"});
        if (c.contains("dt_list")) {
            const auto& v = c.at("dt_list");
            if (!v.is_array()) throw ConfigError("field 'convergence.dt_list' must be an array of numbers");
            cfg.convergence.dt_list.clear();
            for (const auto& x : v) {
                if (!x.is_number()) throw ConfigError("field 'convergence.dt_list' must be an array of numbers");
                cfg.convergence.dt_list.push_back(x.get<double>());
            }
        }
        read(c, "convergence", "t_end", cfg.convergence.t_end);
        read_unsigned(c, "convergence", "refinement", cfg.convergence.refinement);
        read_unsigned(c, "convergence", "n_paths", cfg.convergence.n_paths);
        read_enum(c, "convergence", "phi", cfg.convergence.phi, test_function_from_name);
    }
    if (root.contains("moments")) {
        const auto& m = root.at("moments");
        check_keys(m, "moments", {"p"});
        read(m, "moments", "p", cfg.moment_p);
    }
    if (root.contains("persistence")) {
        const auto& p = root.at("persistence");
        check_keys(p, "persistence", {"c", "eta", "kappa", "box_lo", "box_hi", "grid_intervals"});
        read(p, "persistence", "c", cfg.persistence.spec.c);
        read(p, "persistence", "eta", cfg.persistence.spec.eta);
        read(p, "persistence", "kappa", cfg.persistence.spec.kappa);
        read(p, "persistence", "box_lo", cfg.persistence.box.lo);
        read(p, "persistence", "box_hi", cfg.persistence.box.hi);
        read_unsigned(p, "persistence", "grid_intervals", cfg.persistence.grid_intervals);
    }
    if (root.contains("sensitivity")) {
        const auto& s = root.at("sensitivity");
        check_keys(s, "sensitivity", {"delta_fraction", "n_paths", "qoi"});
        read(s, "sensitivity", "delta_fraction", cfg.sensitivity.delta_fraction);
        read_unsigned(s, "sensitivity", "n_paths", cfg.sensitivity.n_paths);
        read_enum(s, "sensitivity", "qoi", cfg.sensitivity.qoi, qoi_from_name);
    }
    if (root.contains("stability")) {
        const auto& s = root.at("stability");
        check_keys(s, "stability", {"at", "p_diag"});
        read(s, "stability", "at", cfg.stability.at);
        read(s, "stability", "p_diag", cfg.stability.p_diag);
    }
    read_unsigned(root, "", "threads", cfg.threads);

    validate_config(cfg);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

namespace {

json to_json(const RunConfig& cfg) {
    json model = json::object();
    for (Param p : kAllParams) model[std::string(param_name(p))] = param_value(cfg.model, p);

    json root;
    root["model"] = model;
    root["noise"] = {{"sigma", vec_json(cfg.noise.sigma)}};
    root["sim"] = {{"t_end", cfg.sim.t_end},
                   {"dt", cfg.sim.dt},
                   {"seed", cfg.sim.seed},
                   {"scheme", std::string(scheme_name(cfg.sim.scheme))},
                   {"positivity", std::string(positivity_name(cfg.sim.positivity.kind))},
                   {"eps", cfg.sim.positivity.eps},
                   {"x0", vec_json(cfg.sim.x0)}};
    root["ensemble"] = {{"n_paths", cfg.ensemble_paths}};
    root["convergence"] = {{"dt_list", cfg.convergence.dt_list},
                           {"t_end", cfg.convergence.t_end},
                           {"refinement", cfg.convergence.refinement},
                           {"n_paths", cfg.convergence.n_paths},
                           {"phi", std::string(test_function_name(cfg.convergence.phi))}};
    root["moments"] = {{"p", cfg.moment_p}};
    root["persistence"] = {{"c", vec_json(cfg.persistence.spec.c)},
                           {"eta", cfg.persistence.spec.eta},
                           {"kappa", cfg.persistence.spec.kappa},
                           {"box_lo", vec_json(cfg.persistence.box.lo)},
                           {"box_hi", vec_json(cfg.persistence.box.hi)},
                           {"grid_intervals", cfg.persistence.grid_intervals}};
    root["sensitivity"] = {{"delta_fraction", cfg.sensitivity.delta_fraction},
                           {"n_paths", cfg.sensitivity.n_paths},
                           {"qoi", std::string(qoi_name(cfg.sensitivity.qoi))}};
    root["stability"] = {{"at", cfg.stability.at}, {"p_diag", vec_json(cfg.stability.p_diag)}};
    root["threads"] = cfg.threads;
    return root;
}

}  // namespace

std::string config_to_json(const RunConfig& cfg) { return to_json(cfg).dump(); }

std::uint64_t config_hash(const RunConfig& cfg) {
    // Results do not depend on the worker count, so it is excluded.
    json root = to_json(cfg);
    root.erase("threads");
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : root.dump()) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace esd
