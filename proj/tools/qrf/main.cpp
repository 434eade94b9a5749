#include "qrf/cli.hpp"
#include "qrf/errors.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <sstream>

using namespace qrf;
using namespace qrf::cli;

namespace {

struct Flags {
    std::string model, config, out, ladder;
    std::optional<std::string> suite;
    std::optional<std::uint64_t> seed;
    std::optional<double> tol;
};

void add_flags(CLI::App* app, Flags& f) {
    app->add_option("--model", f.model, "newtonian, nparticle, su2 or degenerate");
    app->add_option("--suite", f.suite, "comma separated suites; empty or 'none' selects nothing");
    app->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--out", f.out, "directory for CSV files and summary.md");
    app->add_option("--seed", f.seed, "random seed");
    app->add_option("--hbar-ladder", f.ladder, "comma separated hbar values, e.g. 1,1/2,1/4,1/8");
    app->add_option("--tol", f.tol, "residual tolerance")->check(CLI::PositiveNumber);
}

std::vector<std::string> split_suites(const std::string& s) {
    std::vector<std::string> out;
    if (s == "none") return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

/// Model implied by a single suite when --model is absent.
std::optional<models::ModelKind> suite_model(const std::vector<std::string>& suites) {
    if (suites.empty()) return std::nullopt;
    const auto& s = suites.front();
    if (s == "variance") return models::ModelKind::nparticle;
    if (s == "su2" || s == "scaling") return models::ModelKind::su2;
    if (s == "degenerate") return models::ModelKind::degenerate;
    return std::nullopt;
}

RunConfig build_config(const Flags& f, bool infer_model) {
    RunConfig c = f.config.empty() ? RunConfig{} : parse_config(f.config);
    if (f.suite) {
        auto s = split_suites(*f.suite);
        const auto& k = known_suites();
        for (const auto& x : s)
            if (std::find(k.begin(), k.end(), x) == k.end()) raise(ErrorKind::ConfigError, "--suite: unknown suite '" + x + "'");
        c.suites = s;
    }
    if (!f.model.empty()) {
        const auto kind = models::parse_kind(f.model);
        if (kind != c.model.kind) c.model = models::default_spec(kind);
    } else if (infer_model && f.config.empty() && c.suites) {
        if (const auto k = suite_model(*c.suites)) c.model = models::default_spec(*k);
    }
    if (f.seed) c.seed = *f.seed;
    if (f.tol) c.tol = *f.tol;
    if (!f.ladder.empty()) c.scaling.ladder = parse_ladder(f.ladder);
    if (!f.out.empty()) c.out_dir = f.out;
    return c;
}

int finish(const RunConfig& c, const RunResult& r, bool full) {
    std::cout << to_markdown(r.reports, c.tol, full);
    if (!c.out_dir.empty()) write_outputs(c.out_dir, r, c.tol, full);
    return r.passed ? 0 : 1;
}

int selftest(const Flags& f) {
    RunResult all;
    const double tol = f.tol.value_or(1e-10);
    const std::uint64_t seed = f.seed.value_or(1);
    for (auto k : {models::ModelKind::newtonian, models::ModelKind::nparticle, models::ModelKind::su2,
                   models::ModelKind::degenerate}) {
        const auto m = models::build_model(models::default_spec(k));
        for (const auto& fc : m.frame_checks) {
            models::Report r{"frame_checks", models::kind_name(k), {}};
            for (const auto& c : fc.checks) r.rows.push_back({c.name, "verify_reference_frame", c.passed ? 1.0 : 0.0, c.passed ? 0.0 : 1.0, 0.0, true});
            all.reports.push_back(r);
        }
        all.reports.push_back(models::run_projector_battery(m, seed));
        if (k == models::ModelKind::newtonian) {
            models::EquivalenceOptions opt;
            opt.seed = seed;
            all.reports.push_back(models::run_equivalence_suite(m, opt));
        }
        if (k == models::ModelKind::degenerate) all.reports.push_back(models::run_degenerate_suite(m, seed));
    }
    for (const auto& r : all.reports) all.passed = all.passed && r.passed(tol);
    RunConfig c;
    c.tol = tol;
    c.out_dir = f.out;
    return finish(c, all, false);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qrf: relational quantum reference frame checks"};
    app.require_subcommand(1);
    Flags check_f, model_f, report_f, self_f;
    auto* check = app.add_subcommand("check", "run the selected (default: all) suites of a model");
    auto* model = app.add_subcommand("model", "run a single experiment and print its table");
    auto* report = app.add_subcommand("report", "run suites and emit full tables");
    auto* self = app.add_subcommand("selftest", "invariant battery over every model");
    add_flags(check, check_f);
    add_flags(model, model_f);
    add_flags(report, report_f);
    self->add_option("--seed", self_f.seed, "random seed");
    self->add_option("--tol", self_f.tol, "residual tolerance")->check(CLI::PositiveNumber);
    self->add_option("--out", self_f.out, "directory for CSV files and summary.md");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        if (self->parsed()) return selftest(self_f);
        if (model->parsed()) {
            const RunConfig c = build_config(model_f, true);
            if (!c.suites || c.suites->size() != 1) raise(ErrorKind::ConfigError, "model: --suite must name exactly one experiment");
            return finish(c, run(c), true);
        }
        const bool full = report->parsed();
        const RunConfig c = build_config(full ? report_f : check_f, full);
        return finish(c, run(c), full);
    } catch (const Error& e) {
        std::cerr << "qrf: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "qrf: " << e.what() << "\n";
        return 2;
    }
}
