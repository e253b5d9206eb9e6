#pragma once

#include <vector>

#include "sdeinv/matrix.hpp"

namespace sdeinv {

/// Dense self-adjoint operator on a finite truncation of the state space.
/// Construction symmetrizes (A + A^T)/2 when the symmetry defect
/// max|A_ij - A_ji| is below 1e-12 * (1 + max|A_ij|) and rejects otherwise.
class SymOperator {
public:
    explicit SymOperator(Matrix m);
    explicit SymOperator(int dim) : m_(dim, dim) {}

    static SymOperator zero(int dim) { return SymOperator(dim); }
    static SymOperator identity(int dim) { return SymOperator(Matrix::identity(dim)); }
    static SymOperator diag(const Vec& d);

    int dim() const { return m_.rows(); }
    const Matrix& matrix() const { return m_; }
    double operator()(int i, int j) const { return m_(i, j); }

    Vec apply(const Vec& x) const { return m_.apply(x); }
    double max_abs() const { return m_.max_abs(); }

private:
    Matrix m_;
};

/// Eigenvalues ordered by |mu| nonincreasing; among (near-)equal |mu| with
/// opposite signs the positive one comes first. Eigenvectors are the
/// orthonormal columns of `vectors`, each with its first nonzero coordinate
/// positive. Near-ties are resolved within a window of tie_tol * max|mu|.
struct SpectralDecomp {
    std::vector<double> eigenvalues;
    Matrix vectors;  // column k is the eigenvector of eigenvalues[k]

    int rank(double rank_tol) const;
};

SpectralDecomp spectral(const SymOperator& a, double tie_tol = 1e-10);

/// Moore-Penrose pseudoinverse. Eigenvalues with |mu| <= rank_tol * max|mu|
/// are treated as zero; the zero operator maps to zero.
SymOperator pinv(const SymOperator& a, double rank_tol = 1e-10);

/// Orthogonal projection onto the range of a (A A^+). Symmetric, idempotent,
/// fixes the columns of a.
SymOperator range_proj(const SymOperator& a, double rank_tol = 1e-10);

/// PSD square root of |a|.
SymOperator sqrt_abs(const SymOperator& a);

struct OperatorNorms {
    double trace;
    double nuclear;          // sum |mu_k|
    double hilbert_schmidt;  // Frobenius
    double op;               // max |mu_k|
};

OperatorNorms norms(const SymOperator& a);

/// Max-abs residual of the four Penrose identities for the pair (a, x).
double penrose_residual(const SymOperator& a, const SymOperator& x);

}  // namespace sdeinv
