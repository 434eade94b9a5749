#pragma once

#include "qrf/kinspace.hpp"

#include <functional>
#include <vector>

namespace qrf {

/**
 * @brief Orientation grid of one lattice factor.
 *
 * Grid indices run over j ∈ [-N/2, N/2) with ρ_j = j·δρ; the phase of the states is zero.
 */
struct OrientationFrame {
    int factor = 0;
    int N = 0;
    double dp = 0.0;
    double drho = 0.0;
    double hbar = 1.0;

    double rho(int j) const { return j * drho; }
    int j_min() const { return -N / 2; }
    /// Length of the orientation period, N·δρ.
    double period() const { return N * drho; }
};

OrientationFrame orientation_frame(const LatticeSpace& s, int factor);

/// |ρ_j⟩ = Σ_k e^{-iρ_j p_k/ℏ}|p_k⟩ on the factor; norm² = N.
Vec orientation_state(const OrientationFrame& f, int j);
/// Same formula for any real ρ.
Vec orientation_vector(const OrientationFrame& f, double rho);
/// Unitary N×N matrix whose columns are |ρ_j⟩/√N, j ascending.
Mat orientation_basis(const OrientationFrame& f);
/// g(R̂) on the factor, computed spectrally.
Mat orientation_function(const OrientationFrame& f, const std::function<double(double)>& g);
/// Maps x into the grid period [ρ_{-N/2}, ρ_{N/2}).
double wrap_orientation(const OrientationFrame& f, double x);

KinOperator effect_operator(const LatticeSpace& s, const OrientationFrame& f, const std::vector<int>& X);
KinOperator orientation_operator(const LatticeSpace& s, const OrientationFrame& f);
Mat local_orientation_operator(const OrientationFrame& f);

/// Probability within two grid points of the orientation edge.
double wraparound_weight(const LatticeSpace& s, const OrientationFrame& f, const Vec& psi);

/// (1/N_G) Σ_s e^{-isC/ℏ} A e^{isC/ℏ} over the cyclic group generated by the constraint spectrum.
KinOperator g_twirl(const LatticeSpace& s, const Constraint& C, const KinOperator& A);

enum class RelForm { kinematical, physical, closed };

/**
 * @brief Relational observable of f_S relative to the frame reading ρ.
 *
 * kinematical: G(|ρ⟩⟨ρ| ⊗ f_S); physical: Π(|ρ⟩⟨ρ| ⊗ f_S);
 * closed: e^{-i(R̂-ρ)G_S/ℏ} f_S e^{i(R̂-ρ)G_S/ℏ}, only when C is linear in the frame momentum.
 * The closed form wraps modularly in the frame momentum, so it matches the other two only on ker(C).
 */
KinOperator relational_observable(const LatticeSpace& s, const Constraint& C, const OrientationFrame& f, double rho,
                                  const KinOperator& f_S, RelForm form);

/// Θ(ρ) = |ρ⟩⟨ρ| ⊗ 1.
KinOperator theta_operator(const LatticeSpace& s, const OrientationFrame& f, double rho);

/// Applies a factor-local matrix along its tensor axis.
Vec apply_local(const LatticeSpace& s, int factor, const Mat& local, const Vec& v);
/// Column-wise version: (1 ⊗ local ⊗ 1)·cols.
Mat apply_local(const LatticeSpace& s, int factor, const Mat& local, const Mat& cols);

}  // namespace qrf
