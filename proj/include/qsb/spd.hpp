#pragma once

#include <Eigen/Dense>

#include <sstream>
#include <stdexcept>
#include <string>

namespace qsb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Eigenvalues below -spd_reject_tol * lambda_max reject the matrix outright;
// eigenvalues in [-spd_reject_tol * lambda_max, spd_clamp_floor] are clamped
// up to spd_clamp_floor so covariance updates that drift by rounding stay SPD.
inline constexpr double spd_reject_tol = 1e-10;
inline constexpr double spd_clamp_floor = 1e-12;

// Symmetric matrix; storage enforces entries(i,j) == entries(j,i) exactly.
class SymMatrix {
public:
    SymMatrix() = default;

    explicit SymMatrix(const Matrix& a) {
        if (a.rows() != a.cols())
            throw std::invalid_argument("SymMatrix: matrix must be square, got " +
                                        std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
        m_ = 0.5 * (a + a.transpose());
    }

    static SymMatrix zero(Eigen::Index n) { return SymMatrix(Matrix::Zero(n, n)); }

    const Matrix& mat() const { return m_; }
    Eigen::Index dim() const { return m_.rows(); }
    double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

private:
    Matrix m_;
};

// Symmetric positive-definite matrix, validated at construction.
class SpdMatrix {
public:
    SpdMatrix() = default;

    explicit SpdMatrix(const SymMatrix& s) { init(s.mat()); }
    explicit SpdMatrix(const Matrix& a) { init(SymMatrix(a).mat()); }

    static SpdMatrix identity(Eigen::Index n) { return SpdMatrix(Matrix::Identity(n, n)); }

    const Matrix& mat() const { return m_; }
    Eigen::Index dim() const { return m_.rows(); }
    double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
    double trace() const { return m_.trace(); }

private:
    void init(const Matrix& sym) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
        if (es.info() != Eigen::Success)
            throw std::runtime_error(
                "SpdMatrix: symmetric eigensolver failed to converge within its "
                "30-sweep iteration cap (n=" + std::to_string(sym.rows()) + ")");
        const Vector& evals = es.eigenvalues();  // ascending
        const double lambda_min = evals(0);
        const double lambda_max = evals(evals.size() - 1);
        if (lambda_min < -spd_reject_tol * lambda_max || lambda_max <= 0.0) {
            std::ostringstream msg;
            msg << "SpdMatrix: matrix is not positive definite; eigenvalue " << lambda_min
                << " is below the tolerance " << -spd_reject_tol * lambda_max
                << " (lambda_max=" << lambda_max << ")";
            throw std::invalid_argument(msg.str());
        }
        if (lambda_min < spd_clamp_floor) {
            Vector clamped = evals.cwiseMax(spd_clamp_floor);
            Matrix rebuilt =
                es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
            m_ = 0.5 * (rebuilt + rebuilt.transpose());
        } else {
            m_ = sym;  // keep original entries bit-for-bit
        }
    }

    Matrix m_;
};

struct SpdEigen {
    Vector eigenvalues;  // ascending
    Matrix basis;        // orthonormal columns
};

// Eigendecomposition with basis * diag(eigenvalues) * basis^T == M.
inline SpdEigen spd_eigen(const SpdMatrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m.mat());
    if (es.info() != Eigen::Success)
        throw std::runtime_error(
            "spd_eigen: eigensolver failed to converge within its 30-sweep iteration cap (n=" +
            std::to_string(m.dim()) + ")");
    return SpdEigen{es.eigenvalues(), es.eigenvectors()};
}

// Unique principal (SPD) square root.
inline SpdMatrix spd_sqrt(const SpdMatrix& m) {
    SpdEigen e = spd_eigen(m);
    for (Eigen::Index i = 0; i < e.eigenvalues.size(); ++i) {
        if (e.eigenvalues(i) <= 0.0) {
            std::ostringstream msg;
            msg << "spd_sqrt: eigenvalue " << e.eigenvalues(i) << " at index " << i
                << " is below the SPD tolerance";
            throw std::invalid_argument(msg.str());
        }
    }
    Matrix root =
        e.basis * e.eigenvalues.cwiseSqrt().asDiagonal() * e.basis.transpose();
    return SpdMatrix(root);
}

inline SpdMatrix spd_inverse(const SpdMatrix& m) {
    SpdEigen e = spd_eigen(m);
    Matrix inv = e.basis * e.eigenvalues.cwiseInverse().asDiagonal() * e.basis.transpose();
    return SpdMatrix(inv);
}

// Solves C*Sigma + Sigma*C = R for symmetric C, in the eigenbasis of Sigma:
// C~_ij = R~_ij / (lambda_i + lambda_j). Always solvable since lambda_i > 0.
inline SymMatrix spd_solve_sym_lyapunov(const SpdMatrix& sigma, const SymMatrix& r) {
    if (sigma.dim() != r.dim())
        throw std::invalid_argument("spd_solve_sym_lyapunov: dimension mismatch " +
                                    std::to_string(sigma.dim()) + " vs " +
                                    std::to_string(r.dim()));
    SpdEigen e = spd_eigen(sigma);
    Matrix r_tilde = e.basis.transpose() * r.mat() * e.basis;
    Matrix c_tilde(sigma.dim(), sigma.dim());
    for (Eigen::Index i = 0; i < sigma.dim(); ++i)
        for (Eigen::Index j = 0; j < sigma.dim(); ++j)
            c_tilde(i, j) = r_tilde(i, j) / (e.eigenvalues(i) + e.eigenvalues(j));
    return SymMatrix(e.basis * c_tilde * e.basis.transpose());
}

}  // namespace qsb
