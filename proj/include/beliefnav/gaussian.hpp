#pragma once

// Small dense linear algebra and Gaussian utilities shared by every module.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace bnav {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown when a numerical precondition (symmetry, definiteness, conditioning) fails.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kPsdClamp = 1e-10;

/// Multivariate normal N(mean, cov).
struct Gaussian {
    Vector mean;
    Matrix cov;

    Gaussian() = default;
    Gaussian(Vector m, Matrix c) : mean(std::move(m)), cov(std::move(c)) {
        if (mean.size() != cov.rows() || cov.rows() != cov.cols()) {
            throw std::invalid_argument("Gaussian: mean/covariance dimension mismatch");
        }
    }

    [[nodiscard]] Eigen::Index dim() const { return mean.size(); }

    static Gaussian point(const Vector &m) { return {m, Matrix::Zero(m.size(), m.size())}; }
};

struct SymEig {
    Vector values;   // ascending
    Matrix vectors;  // columns are eigenvectors, orthonormal
};

inline bool is_symmetric(const Matrix &m, double rel_tol = kSymmetryTol) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

inline Matrix symmetrize(const Matrix &m) { return 0.5 * (m + m.transpose()); }

inline SymEig sym_eig(const Matrix &m) {
    if (!is_symmetric(m)) throw NumericalError("sym_eig: matrix is not symmetric");
    if (m.rows() == 2) {
        // Closed form; the iterative solver dominates planning time otherwise.
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> direct;
        direct.computeDirect(Eigen::Matrix2d(symmetrize(m)));
        return {direct.eigenvalues(), direct.eigenvectors()};
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(m));
    if (solver.info() != Eigen::Success) throw NumericalError("sym_eig: eigensolver failed");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

namespace detail {

// Eigenvalues in [-kPsdClamp, 0] are treated as roundoff and clamped; anything below is a modeling error.
inline Vector clamp_psd(const Vector &values, const char *who) {
    Vector out = values;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        if (out[i] < -kPsdClamp) {
            throw NumericalError(std::string(who) + ": matrix has a negative eigenvalue " +
                                 std::to_string(out[i]));
        }
        if (out[i] < 0.0) out[i] = 0.0;
    }
    return out;
}

inline Matrix from_eig(const Matrix &vectors, const Vector &values) {
    return symmetrize(vectors * values.asDiagonal() * vectors.transpose());
}

}  // namespace detail

/// Principal square root of a symmetric PSD matrix.
inline Matrix sym_sqrt(const Matrix &m) {
    const SymEig e = sym_eig(m);
    const Vector clamped = detail::clamp_psd(e.values, "sym_sqrt");
    return detail::from_eig(e.vectors, clamped.cwiseSqrt());
}

/// Inverse square root of a symmetric positive definite matrix.
inline Matrix sym_inv_sqrt(const Matrix &m) {
    const SymEig e = sym_eig(m);
    if (e.values.minCoeff() <= 0.0) throw NumericalError("sym_inv_sqrt: matrix is not positive definite");
    return detail::from_eig(e.vectors, e.values.cwiseSqrt().cwiseInverse());
}

/// Inverse of a symmetric positive definite matrix, via its eigendecomposition.
inline Matrix spd_inverse(const Matrix &m) {
    const SymEig e = sym_eig(m);
    const double top = std::max(e.values.maxCoeff(), 0.0);
    if (e.values.minCoeff() <= 0.0 || e.values.minCoeff() < top * 1e-15) {
        throw NumericalError("spd_inverse: matrix is singular or not positive definite");
    }
    return detail::from_eig(e.vectors, e.values.cwiseInverse());
}

inline bool is_positive_definite(const Matrix &m) {
    if (!is_symmetric(m)) return false;
    const SymEig e = sym_eig(m);
    return e.values.minCoeff() > 0.0;
}

/// x^T S x
inline double mahalanobis_sq(const Vector &x, const Matrix &s) {
    if (x.size() != s.rows() || s.rows() != s.cols()) {
        throw std::invalid_argument("mahalanobis_sq: dimension mismatch");
    }
    return x.dot(s * x);
}

inline double gaussian_log_pdf(const Vector &x, const Gaussian &g) {
    if (x.size() != g.dim()) throw std::invalid_argument("gaussian_pdf: dimension mismatch");
    const SymEig e = sym_eig(g.cov);
    if (e.values.minCoeff() <= 0.0) throw NumericalError("gaussian_pdf: covariance is singular");
    const Vector proj = e.vectors.transpose() * (x - g.mean);
    double quad = 0.0;
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < proj.size(); ++i) {
        quad += proj[i] * proj[i] / e.values[i];
        log_det += std::log(2.0 * std::numbers::pi * e.values[i]);
    }
    return -0.5 * (log_det + quad);
}

inline double gaussian_pdf(const Vector &x, const Gaussian &g) { return std::exp(gaussian_log_pdf(x, g)); }

/// Distribution of a - b for independent a and b.
inline Gaussian gaussian_difference(const Gaussian &a, const Gaussian &b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("gaussian_difference: dimension mismatch");
    return {a.mean - b.mean, symmetrize(a.cov + b.cov)};
}

inline Vector vec2(double x, double y) {
    Vector v(2);
    v << x, y;
    return v;
}

inline Matrix diag2(double a, double b) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

}  // namespace bnav
