#include "qrf/cli.hpp"

#include "qrf/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace qrf::cli {

using json = nlohmann::json;
using namespace models;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& msg) { raise(ErrorKind::ConfigError, path + ": " + msg); }

void only_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    if (!j.is_object()) bad(path.empty() ? "<root>" : path, "expected an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) bad(path.empty() ? k : path + "." + k, "unknown field");
}

Rational get_rational(const json& v, const std::string& path) {
    if (v.is_number_integer()) return Rational(v.get<long long>());
    if (v.is_string()) {
        try {
            return parse_rational(v.get<std::string>());
        } catch (const Error& e) {
            bad(path, e.what());
        }
    }
    bad(path, "expected an integer or a rational string such as \"1/2\"");
}

int get_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) bad(path, "expected an integer");
    return v.get<int>();
}

double get_double(const json& v, const std::string& path) {
    if (!v.is_number()) bad(path, "expected a number");
    return v.get<double>();
}

std::vector<double> get_doubles(const json& v, const std::string& path) {
    if (!v.is_array()) bad(path, "expected an array of numbers");
    std::vector<double> out;
    for (size_t i = 0; i < v.size(); ++i) out.push_back(get_double(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

void parse_state(const json& j, StateRecipe& s) {
    only_keys(j, "model.state", {"centers", "width", "widths", "skew", "shear", "theta", "phi"});
    if (j.contains("centers")) s.centers = get_doubles(j["centers"], "model.state.centers");
    if (j.contains("width")) s.width = get_double(j["width"], "model.state.width");
    if (j.contains("widths")) s.widths = get_doubles(j["widths"], "model.state.widths");
    if (j.contains("skew")) s.skew = get_double(j["skew"], "model.state.skew");
    if (j.contains("shear")) s.shear = get_double(j["shear"], "model.state.shear");
    if (j.contains("theta")) s.theta = get_double(j["theta"], "model.state.theta");
    if (j.contains("phi")) s.phi = get_double(j["phi"], "model.state.phi");
}

ModelSpec parse_model(const json& j) {
    only_keys(j, "model",
              {"kind", "particles", "N", "N_system", "hbar", "dp", "dp_system", "beta", "j", "mass", "system_dim",
               "frame_check_degree", "state"});
    if (!j.contains("kind") || !j["kind"].is_string()) bad("model.kind", "required string");
    ModelKind kind;
    try {
        kind = parse_kind(j["kind"].get<std::string>());
    } catch (const Error& e) {
        bad("model.kind", e.what());
    }
    ModelSpec m = default_spec(kind);
    if (j.contains("particles")) m.particles = get_int(j["particles"], "model.particles");
    if (j.contains("N")) m.N = get_int(j["N"], "model.N");
    if (j.contains("N_system")) m.N_system = get_int(j["N_system"], "model.N_system");
    if (j.contains("hbar")) m.hbar = get_rational(j["hbar"], "model.hbar");
    if (j.contains("dp")) m.dp = get_rational(j["dp"], "model.dp");
    if (j.contains("dp_system")) m.dp_system = get_rational(j["dp_system"], "model.dp_system");
    if (j.contains("beta")) m.beta = get_rational(j["beta"], "model.beta");
    if (j.contains("j")) m.j = get_rational(j["j"], "model.j");
    if (j.contains("mass")) m.mass = get_rational(j["mass"], "model.mass");
    if (j.contains("system_dim")) m.system_dim = get_int(j["system_dim"], "model.system_dim");
    if (j.contains("frame_check_degree")) m.frame_check_degree = get_int(j["frame_check_degree"], "model.frame_check_degree");
    if (j.contains("state")) parse_state(j["state"], m.state);
    return m;
}

std::string fmt_num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string md_cell(std::string s) {
    std::string out;
    for (char c : s) {
        if (c == '|') out += '\\';
        out += c;
    }
    return out;
}

}  // namespace

std::vector<Rational> parse_ladder(const std::string& s) {
    std::vector<Rational> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(parse_rational(item));
    return out;
}

RunConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        raise(ErrorKind::ConfigError, std::string("invalid JSON: ") + e.what());
    }
    only_keys(j, "", {"model", "suites", "tolerance", "hbar_ladder", "orders", "equivalence", "variance", "output", "seed"});
    RunConfig c;
    if (j.contains("model")) c.model = parse_model(j["model"]);
    if (j.contains("suites")) {
        if (!j["suites"].is_array()) bad("suites", "expected an array of suite names");
        std::vector<std::string> s;
        for (size_t i = 0; i < j["suites"].size(); ++i) {
            const auto& v = j["suites"][i];
            const std::string path = "suites[" + std::to_string(i) + "]";
            if (!v.is_string()) bad(path, "expected a string");
            const auto name = v.get<std::string>();
            const auto& k = known_suites();
            if (std::find(k.begin(), k.end(), name) == k.end()) bad(path, "unknown suite '" + name + "'");
            s.push_back(name);
        }
        c.suites = s;
    }
    if (j.contains("tolerance")) {
        c.tol = get_double(j["tolerance"], "tolerance");
        if (!(c.tol > 0)) bad("tolerance", "must be positive");
    }
    if (j.contains("hbar_ladder")) {
        if (!j["hbar_ladder"].is_array()) bad("hbar_ladder", "expected an array");
        c.scaling.ladder.clear();
        for (size_t i = 0; i < j["hbar_ladder"].size(); ++i)
            c.scaling.ladder.push_back(get_rational(j["hbar_ladder"][i], "hbar_ladder[" + std::to_string(i) + "]"));
    }
    if (j.contains("orders")) {
        if (!j["orders"].is_array()) bad("orders", "expected an array");
        c.scaling.orders.clear();
        for (size_t i = 0; i < j["orders"].size(); ++i)
            c.scaling.orders.push_back(get_int(j["orders"][i], "orders[" + std::to_string(i) + "]"));
    }
    if (j.contains("equivalence")) {
        const auto& e = j["equivalence"];
        only_keys(e, "equivalence", {"states", "observables"});
        if (e.contains("states")) c.equivalence.states = get_int(e["states"], "equivalence.states");
        if (e.contains("observables")) c.equivalence.observables = get_int(e["observables"], "equivalence.observables");
    }
    if (j.contains("variance")) {
        const auto& v = j["variance"];
        only_keys(v, "variance", {"states", "N"});
        if (v.contains("states")) c.variance.states = get_int(v["states"], "variance.states");
        if (v.contains("N")) c.variance.N = get_int(v["N"], "variance.N");
    }
    if (j.contains("output")) {
        const auto& o = j["output"];
        only_keys(o, "output", {"dir"});
        if (o.contains("dir")) {
            if (!o["dir"].is_string()) bad("output.dir", "expected a string");
            c.out_dir = o["dir"].get<std::string>();
        }
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) bad("seed", "expected a non-negative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    return c;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::ConfigError, "cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

const std::vector<std::string>& known_suites() {
    static const std::vector<std::string> s{"equivalence", "variance", "su2", "scaling", "degenerate", "projectors"};
    return s;
}

std::vector<std::string> default_suites(ModelKind k) {
    switch (k) {
        case ModelKind::newtonian: return {"equivalence", "projectors"};
        case ModelKind::nparticle: return {"equivalence", "variance", "projectors"};
        case ModelKind::su2: return {"equivalence", "su2", "scaling", "projectors"};
        case ModelKind::degenerate: return {"degenerate", "projectors"};
    }
    return {};
}

RunResult run(const RunConfig& cfg) {
    RunResult res;
    const auto suites = cfg.suites.value_or(default_suites(cfg.model.kind));
    if (suites.empty()) return res;
    const Model m = build_model(cfg.model);
    for (const auto& s : suites) {
        if (s == "equivalence") {
            auto opt = cfg.equivalence;
            opt.seed = cfg.seed;
            res.reports.push_back(run_equivalence_suite(m, opt));
        } else if (s == "variance") {
            auto opt = cfg.variance;
            opt.seed = cfg.seed;
            res.reports.push_back(run_variance_experiment(m, opt));
        } else if (s == "su2") {
            res.reports.push_back(run_su2_suite(m));
        } else if (s == "scaling") {
            res.reports.push_back(scaling_report(run_scaling_experiment(cfg.model, cfg.scaling)));
        } else if (s == "degenerate") {
            res.reports.push_back(run_degenerate_suite(m, cfg.seed));
        } else if (s == "projectors") {
            res.reports.push_back(run_projector_battery(m, cfg.seed));
        } else {
            raise(ErrorKind::ConfigError, "unknown suite '" + s + "'");
        }
        res.passed = res.passed && res.reports.back().passed(cfg.tol);
    }
    return res;
}

std::string to_csv(const Report& r) {
    std::string out = "quantity,formalism,value_re,value_im,residual\n";
    for (const auto& row : r.rows)
        out += csv_field(row.quantity) + "," + csv_field(row.formalism) + "," + fmt_num(row.value.real()) + "," +
               fmt_num(row.value.imag()) + "," + fmt_num(row.residual) + "\n";
    return out;
}

std::string to_markdown(const std::vector<Report>& reports, double tol, bool full) {
    std::string out = "| suite | model | rows | worst residual/tol | status |\n|---|---|---|---|---|\n";
    for (const auto& r : reports) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3g", r.worst(tol));
        out += "| " + r.suite + " | " + r.model + " | " + std::to_string(r.rows.size()) + " | " + buf + " | " +
               (r.passed(tol) ? "pass" : "FAIL") + " |\n";
    }
    if (!full) return out;
    for (const auto& r : reports) {
        out += "\n## " + r.suite + " (" + r.model + ")\n\n| quantity | formalism | value | residual | tolerance |\n|---|---|---|---|---|\n";
        for (const auto& row : r.rows) {
            char val[96], resid[32], t[32];
            if (row.value.imag() == 0.0) std::snprintf(val, sizeof val, "%.12g", row.value.real());
            else std::snprintf(val, sizeof val, "%.12g%+.3gi", row.value.real(), row.value.imag());
            std::snprintf(resid, sizeof resid, "%.3g", row.residual);
            if (!row.gated) std::snprintf(t, sizeof t, "reported");
            else std::snprintf(t, sizeof t, "%.3g", row.tol.value_or(tol));
            out += "| " + md_cell(row.quantity) + " | " + md_cell(row.formalism) + " | " + val + " | " + resid + " | " + t + " |\n";
        }
    }
    return out;
}

void write_outputs(const std::string& dir, const RunResult& res, double tol, bool full) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
    auto write = [&](const fs::path& p, const std::string& text) {
        std::ofstream f(p, std::ios::binary);
        f << text;
        if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
    };
    for (const auto& r : res.reports) write(fs::path(dir) / (r.model + "_" + r.suite + ".csv"), to_csv(r));
    write(fs::path(dir) / "summary.md", to_markdown(res.reports, tol, full));
}

}  // namespace qrf::cli
