#include <doctest.h>

#include <cmath>

#include "svsmc/linalg.hpp"
#include "svsmc/rng.hpp"

using namespace svsmc;

namespace {

Mat random_mat(int r, int c, Rng& rng) {
    Mat m(r, c);
    for (double& x : m.vec()) x = rng.normal();
    return m;
}

Mat random_spd(int n, Rng& rng) {
    Mat a = random_mat(n, n + 2, rng);
    Mat s = matmul_nt(a, a);
    for (int i = 0; i < n; ++i) s(i, i) += 0.5;
    return s;
}

}  // namespace

TEST_CASE("matmul variants agree") {
    Rng rng(1);
    Mat a = random_mat(4, 6, rng), b = random_mat(6, 3, rng);
    Mat c = matmul(a, b);
    Mat c2 = matmul_tn(transpose(a), b);
    Mat c3 = matmul_nt(a, transpose(b));
    for (size_t i = 0; i < c.size(); ++i) {
        CHECK(c.vec()[i] == doctest::Approx(c2.vec()[i]).epsilon(1e-12));
        CHECK(c.vec()[i] == doctest::Approx(c3.vec()[i]).epsilon(1e-12));
    }
}

TEST_CASE("cholesky reconstructs and solves") {
    Rng rng(2);
    for (int n : {1, 3, 8, 25}) {
        Mat s = random_spd(n, rng);
        Mat l = cholesky(s);
        Mat rec = matmul_nt(l, l);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) CHECK(rec(i, j) == doctest::Approx(s(i, j)).epsilon(1e-9));

        Mat b = random_mat(n, 2, rng);
        Mat x = solve_lower(l, b);
        Mat lx = matmul(l, x);
        for (size_t i = 0; i < b.size(); ++i)
            CHECK(lx.vec()[i] == doctest::Approx(b.vec()[i]).epsilon(1e-9));

        Mat y = solve_lower_transposed(l, b);
        Mat lty = matmul_tn(l, y);
        for (size_t i = 0; i < b.size(); ++i)
            CHECK(lty.vec()[i] == doctest::Approx(b.vec()[i]).epsilon(1e-9));
    }
}

TEST_CASE("cholesky rejects indefinite matrices") {
    Mat m(2, 2);
    m(0, 0) = 1.0;
    m(0, 1) = 2.0;
    m(1, 0) = 2.0;
    m(1, 1) = 1.0;
    CHECK_THROWS_AS(cholesky(m), FactorizationError);
}
