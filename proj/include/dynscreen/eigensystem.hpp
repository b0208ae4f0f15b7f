#pragma once

#include "dynscreen/grid.hpp"

#include <Eigen/Eigenvalues>

#include <vector>

namespace dynscreen {

/// A 1x1 (real eigenvalue) or 2x2 (conjugate pair re +/- i im) block of the
/// real modal form.
struct ModalBlock {
    Eigen::Index offset = 0;
    int size = 1;
    double re = 0.0;
    double im = 0.0;
};

/// Diagonalization A = U Lambda U^-1, kept in two equivalent forms:
/// complex eigenpairs sorted by real part (descending), and the real
/// block-diagonal form A = V B V^-1 used for propagation.
struct Eigensystem {
    Eigen::VectorXcd values;
    Eigen::MatrixXcd vectors;
    Eigen::MatrixXcd inverse;

    Matrix real_basis;
    Matrix real_basis_inverse;
    std::vector<ModalBlock> blocks;

    /// ||U Lambda U^-1 - A||_inf / ||A||_inf measured at construction.
    double residual = 0.0;

    [[nodiscard]] Eigen::Index dimension() const noexcept { return real_basis.rows(); }
    /// Real block-diagonal matrix B.
    [[nodiscard]] Matrix block_matrix() const;
};

inline constexpr double kReconstructionTolerance = 1e-8;

/// Throws DefectiveMatrixError when the reconstruction residual exceeds
/// `tolerance` or the eigenvector basis is singular.
[[nodiscard]] Eigensystem eigendecompose(const Matrix& a,
                                         double tolerance = kReconstructionTolerance);

/// Infinity norm (max absolute row sum).
[[nodiscard]] double inf_norm(const Matrix& a);

}  // namespace dynscreen
