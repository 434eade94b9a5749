#pragma once

#include "qrf/models.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qrf::cli {

/**
 * @brief Everything a run needs: model, suites, tolerances, ladder, output and seed.
 *
 * Exact inputs (ħ, dp, β, j, m, ladder entries) are integers or rational strings such as "1/2".
 */
struct RunConfig {
    models::ModelSpec model = models::default_spec(models::ModelKind::nparticle);
    std::optional<std::vector<std::string>> suites;  ///< unset selects the model's default suites
    double tol = 1e-10;
    models::ScalingOptions scaling;
    models::EquivalenceOptions equivalence;
    models::VarianceOptions variance;
    std::string out_dir;  ///< empty: nothing written
    std::uint64_t seed = 1;
};

/// Raises ConfigError naming the offending field path, e.g. "model.bogus".
RunConfig parse_config_text(const std::string& json_text);
/// Reads a JSON file; I/O problems raise ConfigError.
RunConfig parse_config(const std::string& path);

/// Comma separated rationals (see parse_rational).
std::vector<Rational> parse_ladder(const std::string& s);

const std::vector<std::string>& known_suites();
std::vector<std::string> default_suites(models::ModelKind k);

struct RunResult {
    std::vector<models::Report> reports;
    bool passed = true;
};

/// Runs the selected suites in order. Model errors propagate (ConfigError, IncommensurableSpectrum, ...).
RunResult run(const RunConfig& cfg);

/// Columns quantity, formalism, value_re, value_im, residual.
std::string to_csv(const models::Report& r);
/// Summary table; with full set, one table of rows per report.
std::string to_markdown(const std::vector<models::Report>& reports, double tol, bool full);
/// Writes <dir>/<model>_<suite>.csv and <dir>/summary.md.
void write_outputs(const std::string& dir, const RunResult& res, double tol, bool full);

}  // namespace qrf::cli
