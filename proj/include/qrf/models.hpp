#pragma once

#include "qrf/algstates.hpp"
#include "qrf/effective.hpp"
#include "qrf/exact.hpp"
#include "qrf/kinspace.hpp"
#include "qrf/relobs.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qrf::models {

enum class ModelKind { newtonian, nparticle, su2, degenerate };

const char* kind_name(ModelKind k);
/// Raises ConfigError for unknown names.
ModelKind parse_kind(const std::string& name);

/**
 * @brief Localized initial-state profile.
 *
 * Every lattice factor gets ψ(x) ∝ e^{-x²/4σ²}(1 + skew·x/σ) in the orientation basis,
 * x = ρ − center. The shear multiplies the momentum profile of the first two lattice factors
 * by e^{i·shear·p₀p₁/ℏ}. Non-lattice su2 systems get a spin-coherent state.
 */
struct StateRecipe {
    std::vector<double> centers;  ///< orientation readings per lattice factor; missing entries are 0
    double width = 0.0;           ///< σ in orientation grid units; 0 selects min(N/8, 1.2)
    std::vector<double> widths;   ///< per lattice factor override of width; entries ≤ 0 are ignored
    double skew = 0.3;
    double shear = 0.0;
    double theta = 1.1;  ///< spin-coherent polar angle
    double phi = 0.5;    ///< spin-coherent azimuth
};

struct ModelSpec {
    ModelKind kind = ModelKind::nparticle;
    int particles = 3;        ///< nparticle
    int N = 8;                ///< frame lattice size
    int N_system = 4;         ///< newtonian particle lattice size
    Rational hbar{1};
    Rational dp{1};           ///< frame momentum spacing
    Rational dp_system{1};    ///< newtonian particle momentum spacing
    Rational beta{1};         ///< su2 coupling, G_S = −βJ_z
    Rational j{1};            ///< su2 spin
    Rational mass{2};         ///< degenerate G_S = m²·1
    int system_dim = 2;       ///< degenerate system dimension
    int frame_check_degree = 4;
    StateRecipe state;
};

ModelSpec default_spec(ModelKind k);

/// Spin-j matrices (ℏ included) in the J_z eigenbasis, m = j, j−1, …, −j.
struct SpinMatrices {
    Mat x, y, z;
};
SpinMatrices spin_matrices(const Rational& j, double hbar);
Vec spin_coherent(const Rational& j, double theta, double phi);

/**
 * @brief A model bound to its lattice, constraint and algebra.
 *
 * Generators are (q_X, p_X) per lattice factor in factor order; su2 appends Jx, Jy, Jz.
 * frames lists the declared frames and frame_checks the matching verify_reference_frame reports.
 */
struct Model {
    ModelSpec spec;
    LatticeSpace space;
    Constraint C;
    GenPtr gens;
    GeneratorAssignment assignment;
    AlgebraElement C_alg;
    std::vector<OrientationFrame> frames;
    std::vector<FrameReport> frame_checks;
    std::vector<ConstraintTerm> gs_terms;  ///< degenerate: the system terms of G_S
    std::vector<std::string> labels;       ///< factor labels

    /// Π applied to the recipe's product state, normalized.
    Vec initial_state(const StateRecipe& r) const;
    Vec initial_state() const { return initial_state(spec.state); }
    /// Entrywise projection onto ker(C).
    Vec project(Vec v) const;
    int generator(const std::string& name) const { return gens->index(name); }
    AlgebraElement g(const std::string& name) const { return AlgebraElement::generator(gens, name); }
};

/// Raises IncommensurableSpectrum (with a remediation hint) or ConfigError on invalid parameters.
Model build_model(const ModelSpec& spec);

/// Generator images restricted to the space with one factor removed; images on that factor become zero.
GeneratorAssignment reduced_assignment(const Model& m, int dropped);

struct Row {
    std::string quantity;
    std::string formalism;
    cplx value;
    double residual = 0.0;
    std::optional<double> tol;  ///< row-specific tolerance; otherwise the run tolerance applies
    bool gated = true;          ///< false rows are reported but never fail a run
};

struct Report {
    std::string suite;
    std::string model;
    std::vector<Row> rows;
    bool passed(double tol) const;
    double worst(double tol) const;  ///< largest residual/tolerance ratio among gated rows
};

struct EquivalenceOptions {
    int states = 5;
    int observables = 20;
    std::uint64_t seed = 1;
};

/// The relational-expectation chain for random physical states and random system observables.
Report run_equivalence_suite(const Model& m, const EquivalenceOptions& opt = {});

struct VarianceOptions {
    int N = 32;  ///< lattice the experiment is rebuilt on; 0 keeps the model's own
    int states = 6;
    std::uint64_t seed = 1;
};

/**
 * @brief Position laws between frames A (particle 0) and B (particle 1) on nparticle.
 *
 * Each law is evaluated via the exact Hilbert frame change, transform_frame and the effective
 * engine; coefficients of the variance law are refitted by least squares over the states.
 */
Report run_variance_experiment(const Model& m, const VarianceOptions& opt = {});

/// su2: closed-form relational J_x, J_y against the twirl and the physical form, and J_z across frames.
Report run_su2_suite(const Model& m);

struct ScalingOptions {
    std::vector<Rational> ladder{Rational(1), Rational(1, 2), Rational(1, 4), Rational(1, 8)};
    std::vector<int> orders{2, 4};
};

struct ScalingPoint {
    int M = 0;
    double hbar = 0.0;
    double deviation = 0.0;
};

struct ScalingResult {
    std::vector<ScalingPoint> points;
    std::vector<std::pair<int, double>> slopes;  ///< (M, fitted log-log slope)
};

/**
 * @brief Effective frame change B → A against the exact Hilbert one along an ℏ ladder (su2).
 *
 * At ℏ the spin is j/ℏ, the lattice N/√ℏ (even), dp·ℏ and widths scale as √ℏ, so that classical
 * values stay fixed. The deviation is the largest error over ⟨y⟩ and Δ(y y') with y among
 * q_B, p_B, J_x, J_y, J_z.
 */
ScalingResult run_scaling_experiment(const ModelSpec& su2, const ScalingOptions& opt = {});
Report scaling_report(const ScalingResult& r);

/// Kernel sectors, cross blocks, symbolic branches and sector-wise relational expectations.
Report run_degenerate_suite(const Model& m, std::uint64_t seed = 1);

/**
 * @brief ΠΘΠ = Π, ΘΠΘ = Θπ̂, π̂Π = Ππ̂ = Π and the Θ resolution of the identity for every frame,
 * plus a finite-difference check of the gauge flow (relative 1e-6).
 *
 * On degenerate models the identities are taken per momentum sector.
 */
Report run_projector_battery(const Model& m, std::uint64_t seed = 1);

/// Least-squares slope of log(deviation) against log(ℏ).
double loglog_slope(const std::vector<double>& hbar, const std::vector<double>& deviation);

}  // namespace qrf::models
