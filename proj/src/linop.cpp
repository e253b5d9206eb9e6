#include "sdeinv/linop.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sdeinv {

SymOperator::SymOperator(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw std::invalid_argument("SymOperator: matrix not square");
    if (!all_finite(m_)) throw std::invalid_argument("SymOperator: non-finite entries");
    double defect = 0.0;
    for (int i = 0; i < m_.rows(); ++i)
        for (int j = i + 1; j < m_.cols(); ++j) defect = std::max(defect, std::abs(m_(i, j) - m_(j, i)));
    const double tol = 1e-12 * (1.0 + m_.max_abs());
    if (defect > tol)
        throw std::invalid_argument("SymOperator: symmetry defect " + std::to_string(defect) +
                                    " exceeds tolerance " + std::to_string(tol));
    for (int i = 0; i < m_.rows(); ++i)
        for (int j = i + 1; j < m_.cols(); ++j) {
            const double v = 0.5 * (m_(i, j) + m_(j, i));
            m_(i, j) = v;
            m_(j, i) = v;
        }
}

SymOperator SymOperator::diag(const Vec& d) {
    Matrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
    for (int i = 0; i < m.rows(); ++i) m(i, i) = d[static_cast<std::size_t>(i)];
    return SymOperator(std::move(m));
}

int SpectralDecomp::rank(double rank_tol) const {
    double mx = 0.0;
    for (double mu : eigenvalues) mx = std::max(mx, std::abs(mu));
    if (mx == 0.0) return 0;
    int r = 0;
    for (double mu : eigenvalues)
        if (std::abs(mu) > rank_tol * mx) ++r;
    return r;
}

namespace {

// Cyclic Jacobi, sweeps until the off-diagonal mass is at roundoff.
void jacobi_eigen(Matrix a, std::vector<double>& w, Matrix& q) {
    const int n = a.rows();
    q = Matrix::identity(n);
    w.assign(static_cast<std::size_t>(n), 0.0);
    if (n == 0) return;

    const double scale = std::max(a.max_abs(), 1.0);
    const double stop = 1e-15 * scale;
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n - 1; ++p)
            for (int r = p + 1; r < n; ++r) off = std::max(off, std::abs(a(p, r)));
        if (off <= stop) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int r = p + 1; r < n; ++r) {
                const double apq = a(p, r);
                if (std::abs(apq) <= stop * 1e-2) continue;
                const double theta = (a(r, r) - a(p, p)) / (2.0 * apq);
                double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                if (theta < 0.0) t = -t;
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akr = a(k, r);
                    a(k, p) = c * akp - s * akr;
                    a(k, r) = s * akp + c * akr;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), ark = a(r, k);
                    a(p, k) = c * apk - s * ark;
                    a(r, k) = s * apk + c * ark;
                }
                for (int k = 0; k < n; ++k) {
                    const double qkp = q(k, p), qkr = q(k, r);
                    q(k, p) = c * qkp - s * qkr;
                    q(k, r) = s * qkp + c * qkr;
                }
            }
        }
    }
    for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = a(i, i);
}

}  // namespace

SpectralDecomp spectral(const SymOperator& a, double tie_tol) {
    std::vector<double> w;
    Matrix q;
    jacobi_eigen(a.matrix(), w, q);
    const int n = a.dim();

    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int i, int j) {
        return std::abs(w[static_cast<std::size_t>(i)]) > std::abs(w[static_cast<std::size_t>(j)]);
    });

    // Tie rule: inside a window of near-equal |mu|, positive precedes negative.
    double mx = 0.0;
    for (double mu : w) mx = std::max(mx, std::abs(mu));
    const double window = std::max(tie_tol * mx, 0.0);
    int lo = 0;
    while (lo < n) {
        int hi = lo + 1;
        const double ref = std::abs(w[static_cast<std::size_t>(idx[static_cast<std::size_t>(lo)])]);
        while (hi < n && ref - std::abs(w[static_cast<std::size_t>(idx[static_cast<std::size_t>(hi)])]) <= window) ++hi;
        std::stable_sort(idx.begin() + lo, idx.begin() + hi, [&](int i, int j) {
            return w[static_cast<std::size_t>(i)] > w[static_cast<std::size_t>(j)];
        });
        lo = hi;
    }

    SpectralDecomp d;
    d.eigenvalues.resize(static_cast<std::size_t>(n));
    d.vectors = Matrix(n, n);
    for (int k = 0; k < n; ++k) {
        const int src = idx[static_cast<std::size_t>(k)];
        d.eigenvalues[static_cast<std::size_t>(k)] = w[static_cast<std::size_t>(src)];
        // first nonzero coordinate positive
        double sign = 1.0;
        for (int i = 0; i < n; ++i) {
            const double v = q(i, src);
            if (std::abs(v) > 1e-12) {
                sign = v < 0.0 ? -1.0 : 1.0;
                break;
            }
        }
        for (int i = 0; i < n; ++i) d.vectors(i, k) = sign * q(i, src);
    }
    return d;
}

namespace {

SymOperator rebuild(const SpectralDecomp& d, const std::vector<double>& values) {
    const int n = d.vectors.rows();
    Matrix m(n, n);
    for (int k = 0; k < n; ++k) {
        const double mu = values[static_cast<std::size_t>(k)];
        if (mu == 0.0) continue;
        for (int i = 0; i < n; ++i) {
            const double qik = d.vectors(i, k);
            if (qik == 0.0) continue;
            for (int j = 0; j < n; ++j) m(i, j) += mu * qik * d.vectors(j, k);
        }
    }
    // symmetrize roundoff
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double v = 0.5 * (m(i, j) + m(j, i));
            m(i, j) = v;
            m(j, i) = v;
        }
    return SymOperator(std::move(m));
}

}  // namespace

SymOperator pinv(const SymOperator& a, double rank_tol) {
    SpectralDecomp d = spectral(a);
    double mx = 0.0;
    for (double mu : d.eigenvalues) mx = std::max(mx, std::abs(mu));
    std::vector<double> inv(d.eigenvalues.size(), 0.0);
    if (mx > 0.0) {
        const double cut = rank_tol * mx;
        for (std::size_t k = 0; k < d.eigenvalues.size(); ++k)
            if (std::abs(d.eigenvalues[k]) > cut) inv[k] = 1.0 / d.eigenvalues[k];
    }
    return rebuild(d, inv);
}

SymOperator range_proj(const SymOperator& a, double rank_tol) {
    SpectralDecomp d = spectral(a);
    double mx = 0.0;
    for (double mu : d.eigenvalues) mx = std::max(mx, std::abs(mu));
    std::vector<double> ind(d.eigenvalues.size(), 0.0);
    if (mx > 0.0) {
        const double cut = rank_tol * mx;
        for (std::size_t k = 0; k < d.eigenvalues.size(); ++k)
            if (std::abs(d.eigenvalues[k]) > cut) ind[k] = 1.0;
    }
    return rebuild(d, ind);
}

SymOperator sqrt_abs(const SymOperator& a) {
    SpectralDecomp d = spectral(a);
    std::vector<double> roots(d.eigenvalues.size());
    for (std::size_t k = 0; k < roots.size(); ++k) roots[k] = std::sqrt(std::abs(d.eigenvalues[k]));
    return rebuild(d, roots);
}

OperatorNorms norms(const SymOperator& a) {
    SpectralDecomp d = spectral(a);
    OperatorNorms n{0.0, 0.0, 0.0, 0.0};
    for (double mu : d.eigenvalues) {
        n.trace += mu;
        n.nuclear += std::abs(mu);
        n.op = std::max(n.op, std::abs(mu));
    }
    n.hilbert_schmidt = a.matrix().frobenius();
    return n;
}

double penrose_residual(const SymOperator& a, const SymOperator& x) {
    const Matrix& A = a.matrix();
    const Matrix& X = x.matrix();
    const Matrix AX = A * X;
    const Matrix XA = X * A;
    double r = (AX * A - A).max_abs();
    r = std::max(r, (XA * X - X).max_abs());
    r = std::max(r, (AX.transposed() - AX).max_abs());
    r = std::max(r, (XA.transposed() - XA).max_abs());
    return r;
}

}  // namespace sdeinv
