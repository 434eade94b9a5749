#pragma once

#include "qrf/exact.hpp"

#include <Eigen/Dense>

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace qrf {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

enum class FactorKind { frame, system };

/**
 * @brief One tensor factor.
 *
 * Frame factors carry the momentum lattice p_k = k·dp, k ∈ [-N/2, N/2); their basis is the
 * momentum basis. System factors are stored in the eigenbasis of their transformation
 * generator; if dp > 0 the basis is also read as a momentum lattice (a particle used as system).
 */
struct FactorSpec {
    FactorKind kind = FactorKind::frame;
    int N = 0;
    double dp = 0.0;
    std::vector<double> generator_spectrum;
    std::string name;

    static FactorSpec frame(std::string name, int N, double dp);
    /// Lattice particle on the system side; spectrum defaults to the momenta.
    static FactorSpec particle(std::string name, int N, double dp, std::vector<double> spectrum = {});
    static FactorSpec system(std::string name, std::vector<double> spectrum);

    bool is_lattice() const { return dp > 0.0; }
    /// p_k for lattice factors.
    std::vector<double> momenta() const;
};

class LatticeSpace {
public:
    LatticeSpace() = default;

    int dim() const { return dim_; }
    int num_factors() const { return static_cast<int>(factors_.size()); }
    const FactorSpec& factor(int i) const { return factors_.at(static_cast<size_t>(i)); }
    const std::vector<FactorSpec>& factors() const { return factors_; }
    double hbar() const { return hbar_; }
    int stride(int i) const { return strides_[static_cast<size_t>(i)]; }
    int digit(int index, int factor) const { return (index / strides_[static_cast<size_t>(factor)]) % factors_[static_cast<size_t>(factor)].N; }
    int find(const std::string& name) const;

    /// 1 ⊗ … ⊗ local ⊗ … ⊗ 1.
    Mat embed(int factor, const Mat& local) const;
    /// Diagonal values of an embedded diagonal local operator.
    Eigen::VectorXd embed_diag(int factor, const std::vector<double>& local) const;
    Vec product_state(const std::vector<Vec>& locals) const;

    /// Orientation spacing δρ = 2πℏ/(N·dp) of a lattice factor.
    double orientation_spacing(int factor) const;

private:
    friend LatticeSpace tensor_space(const std::vector<FactorSpec>&, double);
    std::vector<FactorSpec> factors_;
    std::vector<int> strides_;
    int dim_ = 1;
    double hbar_ = 1.0;
};

/**
 * @brief Operator on the full space.
 *
 * The hermitian flag is computed from the matrix (1e-12), never taken on trust.
 */
struct KinOperator {
    Mat matrix;
    std::vector<int> support;
    bool hermitian = false;
};

KinOperator make_operator(Mat m, std::vector<int> support);

/// Diagonal generator on one factor, in that factor's basis.
struct ConstraintTerm {
    int factor = 0;
    std::vector<double> diag;
};

ConstraintTerm momentum_term(const LatticeSpace& s, int factor, double coeff = 1.0);
ConstraintTerm squared_momentum_term(const LatticeSpace& s, int factor, double coeff = 1.0);
ConstraintTerm spectrum_term(const LatticeSpace& s, int factor, double coeff = 1.0);

/**
 * @brief Constraint operator, diagonal in the product basis.
 *
 * frame_terms keeps the per-factor pieces that belong to single factors; rest_generator(R)
 * is everything in C except R's own piece.
 */
struct Constraint {
    Eigen::VectorXd diag;
    std::vector<int> support;
    std::map<int, std::vector<double>> frame_terms;
    bool zero_in_spectrum = true;

    /// Dense operator, built on demand.
    KinOperator op() const;
    Eigen::VectorXd rest_generator(const LatticeSpace& s, int frame) const;
    /// R's term equals p_R exactly (coefficient one).
    bool linear_in(const LatticeSpace& s, int frame) const;
};

/// Values written as integer multiples n·unit.
struct IntegerSpectrum {
    double unit = 1.0;
    std::vector<long> n;
    long min() const;
    long max() const;
};
IntegerSpectrum integer_spectrum(const Eigen::VectorXd& values);

LatticeSpace tensor_space(const std::vector<FactorSpec>& factors, double hbar = 1.0);
KinOperator momentum_operator(const LatticeSpace& s, int factor);
Constraint build_constraint(const LatticeSpace& s, const std::vector<ConstraintTerm>& terms);
/// Constraint from an already summed diagonal; frame_terms records which single-factor pieces are known.
Constraint constraint_from_diag(const LatticeSpace& s, Eigen::VectorXd diag,
                                std::map<int, std::vector<double>> frame_terms = {});

/// Orthogonal projector onto ker(C).
KinOperator group_average(const LatticeSpace& s, const Constraint& C);
KinOperator group_average(const LatticeSpace& s, const KinOperator& C);
/// Orthonormal basis of ker(C), columns.
Mat kernel_basis(const LatticeSpace& s, const KinOperator& C);
/// Group order for the cyclic averages over e^{isC/ℏ}: spread of the integer spectrum plus one.
long group_order(const Constraint& C);
/// The generating step s of that cyclic group.
double group_step(const LatticeSpace& s, const Constraint& C);

cplx physical_inner_product(const KinOperator& Pi, const Vec& psi, const Vec& phi);

std::pair<KinOperator, KinOperator> sector_projectors(const LatticeSpace& s, int frame);

/// C₊ = p_R + √G_S, C₋ = p_R − √G_S for C = p_R² − G_S; G_S given by its system terms.
std::pair<Constraint, Constraint> factorize_constraint(const LatticeSpace& s, int frame,
                                                       const std::vector<ConstraintTerm>& gs_terms);

/// Largest principal angle between two column spans (radians).
double max_principal_angle(const Mat& A, const Mat& B);

}  // namespace qrf
