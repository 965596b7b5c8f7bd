#include "svsmc/linalg.hpp"

#include <algorithm>
#include <cmath>

// Parallelization note: every loop below assigns each output element to
// exactly one thread and keeps the inner reduction sequential, so results are
// bit-identical regardless of the thread count.

namespace svsmc {

namespace {
void check(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

// Contiguous dot product over [0, lim). Four chunked accumulators hide the
// FMA latency and the omp simd clause licenses the vector reduction; the
// summation order is a fixed function of lim, so results are deterministic.
inline double row_dot(const double* a, const double* b, int lim) {
    if (lim >= 32) {
        const int h = lim / 4;
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
#ifdef _OPENMP
#pragma omp simd reduction(+ : s0, s1, s2, s3)
#endif
        for (int p = 0; p < h; ++p) {
            s0 += a[p] * b[p];
            s1 += a[p + h] * b[p + h];
            s2 += a[p + 2 * h] * b[p + 2 * h];
            s3 += a[p + 3 * h] * b[p + 3 * h];
        }
        double s = s0 + s1 + s2 + s3;
        for (int p = 4 * h; p < lim; ++p) s += a[p] * b[p];
        return s;
    }
    double s = 0.0;
#ifdef _OPENMP
#pragma omp simd reduction(+ : s)
#endif
    for (int p = 0; p < lim; ++p) s += a[p] * b[p];
    return s;
}

}  // namespace

namespace {
// Panel width in the contraction dimension: keeps the streamed operand panel
// resident in L2 while output rows stay hot in registers/L1.
constexpr int kPanel = 96;
}  // namespace

Mat matmul(const Mat& A, const Mat& B) {
    check(A.cols() == B.rows(), "matmul: inner dimensions differ");
    const int n = A.rows(), k = A.cols(), m = B.cols();
    Mat C(n, m);
    // Outer panel over the contraction index keeps the active B panel in
    // cache across all output rows. Each C row is owned by one thread and
    // accumulated in panel order, so the result is deterministic.
    for (int p0 = 0; p0 < k; p0 += kPanel) {
        const int p1 = std::min(k, p0 + kPanel);
        for (int i = 0; i < n; ++i) {
            const double* ai = A.row(i);
            double* ci = C.row(i);
            for (int p = p0; p < p1; ++p) {
                const double aip = ai[p];
                if (aip == 0.0) continue;
                const double* bp = B.row(p);
                for (int j = 0; j < m; ++j) ci[j] += aip * bp[j];
            }
        }
    }
    return C;
}

Mat matmul_tn(const Mat& A, const Mat& B) {
    check(A.rows() == B.rows(), "matmul_tn: inner dimensions differ");
    const int n = A.cols(), k = A.rows(), m = B.cols();
    Mat C(n, m);
    for (int p0 = 0; p0 < k; p0 += kPanel) {
        const int p1 = std::min(k, p0 + kPanel);
        for (int i = 0; i < n; ++i) {
            double* ci = C.row(i);
            for (int p = p0; p < p1; ++p) {
                const double aip = A(p, i);
                if (aip == 0.0) continue;
                const double* bp = B.row(p);
                for (int j = 0; j < m; ++j) ci[j] += aip * bp[j];
            }
        }
    }
    return C;
}

Mat matmul_nt(const Mat& A, const Mat& B) {
    check(A.cols() == B.cols(), "matmul_nt: inner dimensions differ");
    const int n = A.rows(), k = A.cols(), m = B.rows();
    Mat C(n, m);
    for (int i = 0; i < n; ++i) {
        const double* ai = A.row(i);
        double* ci = C.row(i);
        for (int j = 0; j < m; ++j) ci[j] = row_dot(ai, B.row(j), k);
    }
    return C;
}

void matmul_nt_lower_acc(const Mat& A, const Mat& B, Mat& acc, double alpha, bool b_lower) {
    check(A.cols() == B.cols() && A.rows() == B.rows(), "matmul_nt_lower_acc: shape mismatch");
    check(acc.rows() == A.rows() && acc.cols() == B.rows(), "matmul_nt_lower_acc: bad accumulator");
    const int n = A.rows(), k = A.cols();
    for (int i = 0; i < n; ++i) {
        const double* ai = A.row(i);
        double* ci = acc.row(i);
        for (int j = 0; j <= i; ++j)
            ci[j] += alpha * row_dot(ai, B.row(j), b_lower ? j + 1 : k);
    }
}

// L^T * G for lower-triangular L (only p >= i contributes); panels keep the
// streamed G slab cache resident.
Mat matmul_tn_lowerA(const Mat& L, const Mat& G) {
    check(L.rows() == L.cols() && L.rows() == G.rows(), "matmul_tn_lowerA: shape mismatch");
    const int n = L.rows(), m = G.cols();
    Mat Lt = transpose(L);
    Mat C(n, m);
    for (int p0 = 0; p0 < n; p0 += kPanel) {
        const int p1 = std::min(n, p0 + kPanel);
        for (int i = 0; i < p1; ++i) {
            const double* lti = Lt.row(i);
            double* ci = C.row(i);
            for (int p = std::max(i, p0); p < p1; ++p) {
                const double lpi = lti[p];
                if (lpi == 0.0) continue;
                const double* gp = G.row(p);
                for (int j = 0; j < m; ++j) ci[j] += lpi * gp[j];
            }
        }
    }
    return C;
}

Mat transpose(const Mat& A) {
    Mat T(A.cols(), A.rows());
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j) T(j, i) = A(i, j);
    return T;
}

Mat cholesky(const Mat& A) {
    check(A.rows() == A.cols(), "cholesky: matrix not square");
    const int n = A.rows();
    double scale = 0.0;
    for (int i = 0; i < n; ++i) scale = std::max(scale, A(i, i));
    // Pivots at rounding level signal a numerically singular matrix
    // (duplicated rows survive the plain d > 0 check by one ulp).
    const double floor = scale * 1e-13;
    Mat L = A;
    // Blocked left-looking factorization: the bulk of the flops are the
    // panel updates, which are contiguous row dot products.
    const int nb = kPanel;
    for (int k0 = 0; k0 < n; k0 += nb) {
        const int k1 = std::min(n, k0 + nb);
        if (k0 > 0) {
                    for (int i = k0; i < n; ++i) {
                double* li = L.row(i);
                const int jhi = std::min(k1, i + 1);
                for (int j = k0; j < jhi; ++j) li[j] -= row_dot(li, L.row(j), k0);
            }
        }
        for (int j = k0; j < k1; ++j) {
            double* lj = L.row(j);
            double d = lj[j] - row_dot(lj + k0, lj + k0, j - k0);
            if (!(d > floor)) throw FactorizationError("cholesky: matrix not positive definite");
            d = std::sqrt(d);
            lj[j] = d;
            const double inv = 1.0 / d;
                    for (int i = j + 1; i < n; ++i) {
                double* li = L.row(i);
                li[j] = (li[j] - row_dot(li + k0, lj + k0, j - k0)) * inv;
            }
        }
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) L(i, j) = 0.0;
    return L;
}

namespace {

// Forward substitution on a block of right-hand-side columns [c0, c1).
void solve_lower_block(const Mat& L, Mat& X, int c0, int c1) {
    const int n = L.rows();
    for (int i = 0; i < n; ++i) {
        const double* li = L.row(i);
        double* xi = X.row(i);
        for (int p = 0; p < i; ++p) {
            const double lip = li[p];
            if (lip == 0.0) continue;
            const double* xp = X.row(p);
            for (int j = c0; j < c1; ++j) xi[j] -= lip * xp[j];
        }
        const double inv = 1.0 / li[i];
        for (int j = c0; j < c1; ++j) xi[j] *= inv;
    }
}

// Lt is the row-major transpose of L, so the inner multiplier reads are
// contiguous.
void solve_lower_transposed_block(const Mat& Lt, Mat& X, int c0, int c1) {
    const int n = Lt.rows();
    for (int i = n - 1; i >= 0; --i) {
        double* xi = X.row(i);
        const double* lti = Lt.row(i);
        for (int p = i + 1; p < n; ++p) {
            const double lpi = lti[p];
            if (lpi == 0.0) continue;
            const double* xp = X.row(p);
            for (int j = c0; j < c1; ++j) xi[j] -= lpi * xp[j];
        }
        const double inv = 1.0 / lti[i];
        for (int j = c0; j < c1; ++j) xi[j] *= inv;
    }
}

// Narrow column panels keep the active right-hand-side slab cache resident;
// panels are independent, so threads can take them round-robin.
constexpr int kSolvePanel = 64;

template <typename Block>
void run_column_blocks(int cols, Block&& block) {
    for (int c0 = 0; c0 < cols; c0 += kSolvePanel) block(c0, std::min(cols, c0 + kSolvePanel));
}

}  // namespace

Mat solve_lower(const Mat& L, const Mat& B) {
    check(L.rows() == L.cols() && L.rows() == B.rows(), "solve_lower: shape mismatch");
    Mat X = B;
    run_column_blocks(B.cols(), [&](int c0, int c1) { solve_lower_block(L, X, c0, c1); });
    return X;
}

Mat solve_lower_transposed(const Mat& L, const Mat& B) {
    check(L.rows() == L.cols() && L.rows() == B.rows(), "solve_lower_transposed: shape mismatch");
    Mat Lt = transpose(L);
    Mat X = B;
    run_column_blocks(B.cols(), [&](int c0, int c1) { solve_lower_transposed_block(Lt, X, c0, c1); });
    return X;
}

Mat solve_lower_tri_rhs(const Mat& L, const Mat& B) {
    // B (and therefore X) is lower triangular; updates with pivot row p touch
    // only columns <= p, which cuts the work to a third.
    check(L.rows() == L.cols() && L.rows() == B.rows() && B.rows() == B.cols(),
          "solve_lower_tri_rhs: shape mismatch");
    Mat X = B;
    const int n = L.rows();
    run_column_blocks(n, [&](int c0, int c1) {
        for (int i = 0; i < n; ++i) {
            const double* li = L.row(i);
            double* xi = X.row(i);
            for (int p = c0; p < i; ++p) {
                const double lip = li[p];
                if (lip == 0.0) continue;
                const double* xp = X.row(p);
                const int hi = std::min(c1, p + 1);
                for (int j = c0; j < hi; ++j) xi[j] -= lip * xp[j];
            }
            const double inv = 1.0 / li[i];
            const int hi = std::min(c1, i + 1);
            for (int j = c0; j < hi; ++j) xi[j] *= inv;
        }
    });
    return X;
}

Mat solve_right_lower(const Mat& U, const Mat& L) {
    // X = U L^{-1}; per-row backward substitution with a running residual so
    // every inner loop reads a contiguous row of L. Rows are independent.
    check(L.rows() == L.cols() && U.cols() == L.rows(), "solve_right_lower: shape mismatch");
    const int n = U.rows(), m = L.rows();
    Mat X = U;
    for (int i = 0; i < n; ++i) {
        double* xi = X.row(i);
        for (int k = m - 1; k >= 0; --k) {
            const double v = (xi[k] /= L(k, k));
            if (v == 0.0) continue;
            const double* lk = L.row(k);
            for (int p = 0; p < k; ++p) xi[p] -= v * lk[p];
        }
    }
    return X;
}

double frobenius_sq(const Mat& A) {
    double s = 0.0;
    for (double v : A.vec()) s += v * v;
    return s;
}

double dot(const Mat& A, const Mat& B) {
    check(A.same_shape(B), "dot: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < A.size(); ++i) s += A.vec()[i] * B.vec()[i];
    return s;
}

}  // namespace svsmc
