#pragma once

#include "qrf/algstates.hpp"
#include "qrf/kinspace.hpp"
#include "qrf/relobs.hpp"

#include <string>
#include <vector>

namespace qrf {

/// The space left after dropping one factor; factor order is preserved.
LatticeSpace remove_factor(const LatticeSpace& s, int factor);
/// Index in the reduced space of full index i with the given factor dropped.
int rest_index(const LatticeSpace& s, int factor, int i);
/// Full index from the dropped factor's digit and a reduced index.
int join_index(const LatticeSpace& s, int factor, int digit, int rest);
/// Factor index in the reduced space, -1 for the dropped one.
int rest_factor(int factor, int dropped);

/// f_rest with f = 1_R ⊗ f_rest. Raises UnsupportedSupport if f acts on R.
Mat restrict_operator(const LatticeSpace& s, int factor, const KinOperator& f);
/// 1_R ⊗ f_rest.
Mat lift_operator(const LatticeSpace& s, int factor, const Mat& f_rest);

/**
 * @brief (⟨ρ| ⊗ 1)·Π as a (reduced dim) × (full dim) matrix.
 *
 * R R† = π̂ on the reduced space and R† R = Π Θ(ρ) Π = Π.
 */
struct ReductionMap {
    int frame = 0;
    double rho = 0.0;
    Mat matrix;
};

ReductionMap reduction_map(const LatticeSpace& s, const Constraint& C, const OrientationFrame& f, double rho);

/// (⟨ρ| ⊗ 1)ψ. Raises NotPhysical if ‖Cψ‖ > 1e-9‖ψ‖.
Vec reduce(const LatticeSpace& s, const Constraint& C, const OrientationFrame& f, double rho, const Vec& psi);
/// Π(|ρ⟩ ⊗ φ).
Vec embed(const LatticeSpace& s, const Constraint& C, const OrientationFrame& f, double rho, const Vec& phi);

/// Diagonal of Π_{|R} = ⟨ρ|Π|ρ⟩ on the reduced space (independent of ρ).
Eigen::VectorXd system_projector_diag(const LatticeSpace& s, const Constraint& C, int frame);
/// π̂ = 1_R ⊗ Π_{|R} on the full space.
KinOperator system_projector(const LatticeSpace& s, const Constraint& C, int frame);

/// V = R_B(ρ_B) R_A(ρ_A)†, from the space without A to the space without B.
struct QrfTransform {
    int A = 0, B = 1;
    double rhoA = 0.0, rhoB = 0.0;
    LatticeSpace full, restA, restB;
    Mat V;

    Vec apply(const Vec& phi) const { return V * phi; }
};

/// Raises SameFrame if A == B.
QrfTransform qrf_transform(const LatticeSpace& s, const Constraint& C, const OrientationFrame& A, double rhoA,
                           const OrientationFrame& B, double rhoB);
/// V f V† for f on the full space supported off A; support is reported in the space without B.
KinOperator conjugate_observable(const QrfTransform& T, const KinOperator& f);
/// V f V† for f already given on the space without A.
KinOperator conjugate_observable(const QrfTransform& T, const Mat& f_restA);

struct GaugeMap {
    Mat matrix;
    std::string label;
};

GaugeMap theta_gauge(const LatticeSpace& s, const OrientationFrame& f, double rho);
/// e^{iO₁C/ℏ} Φ e^{iO₂C/ℏ}; O₁, O₂ should be Dirac observables for the result to be a gauge.
GaugeMap dressed_gauge(const LatticeSpace& s, const Constraint& C, const GaugeMap& phi, const Mat& O1, const Mat& O2);
/// e^{-isC/ℏ} Φ e^{isC/ℏ}.
GaugeMap shifted_gauge(const LatticeSpace& s, const Constraint& C, const GaugeMap& phi, double shift);
/// (1/N_G) Σ_s Φ(s) over the cyclic group of C.
Mat gauge_family_average(const LatticeSpace& s, const Constraint& C, const GaugeMap& phi);

struct GaugeReport {
    double pi_phi_pi = 0.0;   ///< max |ΠΦΠ − Π|
    double phi_pi_phi = 0.0;  ///< max |(ΦΠΦ − Φ)Π|
    bool valid = false;
};

GaugeReport verify_gauge(const GaugeMap& phi, const Mat& Pi, double tol = 1e-10);

/// ω'(·) = ω(ΠΦ_B(·)) for a Hilbert-backed solution state; Π applied as the constraint mask.
AlgebraicState gauge_transform_state(const AlgebraicState& w, const Constraint& C, const GaugeMap& phiB);
/// Same with Φ_B = Θ_B(ρ), without forming full matrices.
AlgebraicState gauge_transform_state(const AlgebraicState& w, const Constraint& C, const OrientationFrame& f, double rho);

/**
 * @brief ω'(·) = ω(e^{iλ a C/ℏ}(·)).
 *
 * Raises IllConditionedFlow if |λ|·‖aC‖₁/ℏ > 50.
 */
AlgebraicState gauge_flow(const AlgebraicState& w, const Constraint& C, const KinOperator& a, double lambda);

}  // namespace qrf
