#include "dynscreen/eigensystem.hpp"

#include "dynscreen/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dynscreen {

double inf_norm(const Matrix& a) { return a.cwiseAbs().rowwise().sum().maxCoeff(); }

Matrix Eigensystem::block_matrix() const {
    const Eigen::Index n = dimension();
    Matrix b = Matrix::Zero(n, n);
    for (const ModalBlock& blk : blocks) {
        const Eigen::Index o = blk.offset;
        b(o, o) = blk.re;
        if (blk.size == 2) {
            b(o + 1, o + 1) = blk.re;
            b(o, o + 1) = blk.im;
            b(o + 1, o) = -blk.im;
        }
    }
    return b;
}

Eigensystem eigendecompose(const Matrix& a, double tolerance) {
    if (a.rows() != a.cols()) throw ContractError("eigendecompose: matrix must be square");
    const Eigen::Index n = a.rows();
    Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/true);
    if (solver.info() != Eigen::Success)
        throw DefectiveMatrixError("eigen solver did not converge", HUGE_VAL);

    // Eigen's pseudo-eigenvector form: A V = V D with D block diagonal and
    // 2x2 blocks [[u, v], [-v, u]] for eigenvalues u +/- i v.
    const Matrix pseudo_vectors = solver.pseudoEigenvectors();
    const Matrix pseudo_values = solver.pseudoEigenvalueMatrix();

    std::vector<ModalBlock> raw;
    for (Eigen::Index i = 0; i < n;) {
        if (i + 1 < n && pseudo_values(i, i + 1) != 0.0) {
            raw.push_back({i, 2, pseudo_values(i, i), pseudo_values(i, i + 1)});
            i += 2;
        } else {
            raw.push_back({i, 1, pseudo_values(i, i), 0.0});
            i += 1;
        }
    }
    std::vector<std::size_t> order(raw.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        if (raw[l].re != raw[r].re) return raw[l].re > raw[r].re;
        return std::abs(raw[l].im) > std::abs(raw[r].im);
    });

    Eigensystem es;
    es.real_basis.resize(n, n);
    es.values.resize(n);
    es.vectors.resize(n, n);
    Eigen::Index col = 0;
    for (std::size_t idx : order) {
        ModalBlock blk = raw[idx];
        es.real_basis.middleCols(col, blk.size) = pseudo_vectors.middleCols(blk.offset, blk.size);
        if (blk.size == 2) {
            // Columns (a, b) satisfy A (a + i b) = (re + i im)(a + i b).
            const Eigen::VectorXcd plus = pseudo_vectors.col(blk.offset).cast<std::complex<double>>() +
                                          std::complex<double>(0.0, 1.0) *
                                              pseudo_vectors.col(blk.offset + 1).cast<std::complex<double>>();
            es.values[col] = {blk.re, std::abs(blk.im)};
            es.values[col + 1] = {blk.re, -std::abs(blk.im)};
            if (blk.im > 0.0) {
                es.vectors.col(col) = plus.normalized();
                es.vectors.col(col + 1) = plus.conjugate().normalized();
            } else {
                es.vectors.col(col) = plus.conjugate().normalized();
                es.vectors.col(col + 1) = plus.normalized();
            }
        } else {
            es.values[col] = {blk.re, 0.0};
            es.vectors.col(col) = pseudo_vectors.col(blk.offset).cast<std::complex<double>>().normalized();
        }
        blk.offset = col;
        es.blocks.push_back(blk);
        col += blk.size;
    }

    Eigen::PartialPivLU<Matrix> lu(es.real_basis);
    es.real_basis_inverse = lu.inverse();
    Eigen::PartialPivLU<Eigen::MatrixXcd> clu(es.vectors);
    es.inverse = clu.inverse();
    if (!es.real_basis_inverse.allFinite() || !es.inverse.allFinite())
        throw DefectiveMatrixError("eigenvector basis is singular", HUGE_VAL);

    const double scale = std::max(inf_norm(a), std::numeric_limits<double>::min());
    const Matrix real_rebuilt = es.real_basis * es.block_matrix() * es.real_basis_inverse;
    const Eigen::MatrixXcd rebuilt = es.vectors * es.values.asDiagonal() * es.inverse;
    const double real_residual = inf_norm(real_rebuilt - a) / scale;
    const double complex_residual =
        (rebuilt - a.cast<std::complex<double>>()).cwiseAbs().rowwise().sum().maxCoeff() / scale;
    es.residual = std::max(real_residual, complex_residual);
    if (!(es.residual <= tolerance))
        throw DefectiveMatrixError("eigendecomposition residual " + std::to_string(es.residual) +
                                       " exceeds tolerance",
                                   es.residual);
    return es;
}

}  // namespace dynscreen
