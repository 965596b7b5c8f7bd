#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace svsmc {

// Dense row-major matrix. Small enough surface for the needs of this project;
// heavy kernels (matmul, Cholesky, triangular solves) live in linalg.cpp.
class Mat {
public:
    Mat() = default;
    Mat(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, fill) {}

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static Mat column(const std::vector<double>& v) {
        Mat m(static_cast<int>(v.size()), 1);
        m.a_ = v;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return a_.size(); }

    double& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }
    double* data() { return a_.data(); }
    const double* data() const { return a_.data(); }
    double* row(int i) { return a_.data() + static_cast<size_t>(i) * cols_; }
    const double* row(int i) const { return a_.data() + static_cast<size_t>(i) * cols_; }
    std::vector<double>& vec() { return a_; }
    const std::vector<double>& vec() const { return a_; }

    bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> a_;
};

struct FactorizationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// C = A * B
Mat matmul(const Mat& A, const Mat& B);
// C = A^T * B
Mat matmul_tn(const Mat& A, const Mat& B);
// C = A * B^T
Mat matmul_nt(const Mat& A, const Mat& B);
Mat transpose(const Mat& A);

// Lower Cholesky factor of a symmetric positive-definite matrix.
// Throws FactorizationError when a pivot is not positive.
Mat cholesky(const Mat& A);

// X = L^{-1} B for lower-triangular L (forward substitution, multi-RHS).
Mat solve_lower(const Mat& L, const Mat& B);
// X = L^{-T} B for lower-triangular L (backward substitution, multi-RHS).
Mat solve_lower_transposed(const Mat& L, const Mat& B);
// X = L^{-1} B where B is itself lower triangular (a third of the work).
Mat solve_lower_tri_rhs(const Mat& L, const Mat& B);
// X = U L^{-1} for lower-triangular L.
Mat solve_right_lower(const Mat& U, const Mat& L);

// acc(i, j) += alpha * dot(A.row(i), B.row(j)) for the lower triangle j <= i;
// with b_lower set, B is treated as lower triangular (dot up to column j).
void matmul_nt_lower_acc(const Mat& A, const Mat& B, Mat& acc, double alpha, bool b_lower = false);
// L^T * G where L is lower triangular.
Mat matmul_tn_lowerA(const Mat& L, const Mat& G);

double frobenius_sq(const Mat& A);
double dot(const Mat& A, const Mat& B);

}  // namespace svsmc
