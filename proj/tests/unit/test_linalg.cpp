#include <catch_amalgamated.hpp>

#include "nlox/linalg.hpp"
#include "nlox/rng.hpp"

using namespace nlox;

TEST_CASE("solve_linear handles identity and diagonal systems") {
    CHECK(solve_linear(Mat::identity(2), {3.0, 4.0}) == Vec{3.0, 4.0});
    const Vec x = solve_linear(Mat::diag({2.0, 5.0}), {2.0, 5.0});
    CHECK(x[0] == Catch::Approx(1.0));
    CHECK(x[1] == Catch::Approx(1.0));
}

TEST_CASE("solve_linear reproduces a hand elimination") {
    Mat a(2, 2, {2.0, 1.0, 1.0, 3.0});
    const Vec x = solve_linear(a, {3.0, 4.0});
    CHECK(x[0] == Catch::Approx(1.0).margin(1e-14));
    CHECK(x[1] == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("solve_linear reports the smallest pivot on singular input") {
    Mat a(2, 2, {1.0, 2.0, 2.0, 4.0});
    CHECK_THROWS_AS(solve_linear(a, {1.0, 1.0}), numeric_error);
}

TEST_CASE("solve_linear multiply-back on random well-conditioned 6x6 systems") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        Mat a(6, 6);
        for (std::size_t i = 0; i < 6; ++i) {
            for (std::size_t j = 0; j < 6; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
            a(i, i) += 8.0; // diagonally dominant, hence well conditioned
        }
        Vec b(6);
        for (double& v : b) v = rng.uniform(-2.0, 2.0);
        const Vec x = solve_linear(a, b);
        const Vec back = matvec(a, x);
        CHECK(norm2(back - b) <= 1e-10 * (1.0 + norm2(b)));
    }
}

TEST_CASE("symmetric_eigenvalues recovers known spectra") {
    const Vec ev = symmetric_eigenvalues(Mat::diag({3.0, 1.0, 2.0}));
    CHECK(ev[0] == Catch::Approx(1.0));
    CHECK(ev[1] == Catch::Approx(2.0));
    CHECK(ev[2] == Catch::Approx(3.0));

    // [[2,1],[1,2]] has eigenvalues 1 and 3.
    Mat m(2, 2, {2.0, 1.0, 1.0, 2.0});
    const Vec ev2 = symmetric_eigenvalues(m);
    CHECK(ev2[0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(ev2[1] == Catch::Approx(3.0).margin(1e-12));
}

TEST_CASE("matmul and transpose agree with hand arithmetic") {
    Mat a(2, 3, {1, 2, 3, 4, 5, 6});
    Mat b(3, 2, {7, 8, 9, 10, 11, 12});
    const Mat c = matmul(a, b);
    CHECK(c(0, 0) == 58.0);
    CHECK(c(0, 1) == 64.0);
    CHECK(c(1, 0) == 139.0);
    CHECK(c(1, 1) == 154.0);
    const Mat at = transpose(a);
    CHECK(at.rows() == 3);
    CHECK(at(2, 1) == 6.0);
}
