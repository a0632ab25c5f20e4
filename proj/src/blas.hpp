#pragma once

#include <Eigen/Dense>

#include <cblas.h>

namespace fockcast::detail {

/// op(A) * op(B) through the system BLAS.
inline Eigen::MatrixXd gemm(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, bool trans_a = false,
                            bool trans_b = false) {
    const auto m = static_cast<int>(trans_a ? A.cols() : A.rows());
    const auto k = static_cast<int>(trans_a ? A.rows() : A.cols());
    const auto n = static_cast<int>(trans_b ? B.rows() : B.cols());
    Eigen::MatrixXd C(m, n);
    if (m == 0 || n == 0) return C;
    if (k == 0) return Eigen::MatrixXd::Zero(m, n);
    cblas_dgemm(CblasColMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans, m, n, k,
                1.0, A.data(), static_cast<int>(A.rows()), B.data(), static_cast<int>(B.rows()), 0.0, C.data(), m);
    return C;
}

}  // namespace fockcast::detail
