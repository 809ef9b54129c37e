#pragma once

#include <Eigen/Dense>
#include <lapacke.h>

#include <string>
#include <utility>

#include "rfcl/error.hpp"

namespace rfcl {

/// Sample matrices are stored one sample per row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SymmetricEigen {
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXd vectors;  // column i pairs with values(i)
};

/// Eigendecomposition of a symmetric matrix through LAPACK's divide-and-conquer
/// driver (dsyevd). Only the upper triangle is read.
inline SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) throw ShapeError("symmetric_eigen: matrix is not square");
    if (!a.allFinite()) throw NumericError("symmetric_eigen: matrix has non-finite entries");
    SymmetricEigen out;
    out.vectors = a;
    out.values.resize(a.rows());
    const auto n = static_cast<lapack_int>(a.rows());
    if (n == 0) return out;
    const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', n, out.vectors.data(), n,
                                           out.values.data());
    if (info != 0)
        throw NumericError("symmetric_eigen: dsyevd failed with info=" + std::to_string(info));
    return out;
}

}  // namespace rfcl
