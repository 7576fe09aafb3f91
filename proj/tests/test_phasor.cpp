#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "triflow/phasor.hpp"

using namespace triflow;

namespace {

constexpr double kPi = std::numbers::pi;

std::mt19937& rng() {
    static std::mt19937 gen(20260808);
    return gen;
}

cx random_cx(double scale = 1.0) {
    std::uniform_real_distribution<double> d(-scale, scale);
    return {d(rng()), d(rng())};
}

CMat random_cmat(int n, double scale = 1.0) {
    CMat m(n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) m.at(r, c) = random_cx(scale);
    return m;
}

// Unitary matrix oracle: Gram-Schmidt over random complex columns.
CDense random_unitary(int n) {
    CDense q(n);
    for (int c = 0; c < n; ++c) {
        std::vector<cx> col(static_cast<std::size_t>(n));
        for (int r = 0; r < n; ++r) col[static_cast<std::size_t>(r)] = random_cx();
        for (int prev = 0; prev < c; ++prev) {
            cx proj = 0.0;
            for (int r = 0; r < n; ++r) proj += std::conj(q.at(r, prev)) * col[static_cast<std::size_t>(r)];
            for (int r = 0; r < n; ++r) col[static_cast<std::size_t>(r)] -= proj * q.at(r, prev);
        }
        double norm = 0.0;
        for (int r = 0; r < n; ++r) norm += std::norm(col[static_cast<std::size_t>(r)]);
        norm = std::sqrt(norm);
        for (int r = 0; r < n; ++r) q.at(r, c) = col[static_cast<std::size_t>(r)] / norm;
    }
    return q;
}

CDense from_spectrum(const CDense& q, const std::vector<double>& lambda) {
    const int n = q.size();
    CDense m(n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            cx s = 0.0;
            for (int k = 0; k < n; ++k)
                s += q.at(r, k) * lambda[static_cast<std::size_t>(k)] * std::conj(q.at(c, k));
            m.at(r, c) = s;
        }
    return m;
}

}  // namespace

TEST_CASE("wrap_angle lands in (-pi, pi]") {
    CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(3.0 * kPi / 2.0) == doctest::Approx(-kPi / 2.0));
    CHECK(wrap_angle(0.25) == doctest::Approx(0.25));
    CHECK(wrap_angle(7.0 * kPi) == doctest::Approx(kPi));
}

TEST_CASE("outer product basics") {
    CVec ones{1.0, 1.0, 1.0};
    CMat m = outer(ones, ones);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) CHECK(m.at(r, c) == cx{1.0, 0.0});

    CVec e1{1.0, 0.0, 0.0};
    CVec e2{0.0, 1.0, 0.0};
    CMat s = outer(e1, e2);
    CHECK(s.at(0, 1) == cx{1.0, 0.0});
    CHECK(s.inf_norm() == 1.0);
    int nonzero = 0;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            if (s.at(r, c) != cx{0.0, 0.0}) ++nonzero;
    CHECK(nonzero == 1);
}

TEST_CASE("outer of a balanced phasor set is Hermitian with 120-degree off-diagonals") {
    CVec u{std::polar(1.0, 0.0), std::polar(1.0, -2.0 * kPi / 3.0), std::polar(1.0, 2.0 * kPi / 3.0)};
    CMat m = outer(u, u);
    // u_a conj(u_b) = e^{i(0 - (-120deg))}: unit magnitude at +120 degrees
    CHECK(std::abs(m.at(0, 1) - std::polar(1.0, 2.0 * kPi / 3.0)) < 1e-15);
    CHECK(std::abs(m.at(1, 0) - std::polar(1.0, -2.0 * kPi / 3.0)) < 1e-15);
    CHECK(std::abs(m.at(1, 2) - std::polar(1.0, 2.0 * kPi / 3.0)) < 1e-15);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) CHECK(std::abs(m.at(r, c) - std::conj(m.at(c, r))) < 1e-15);
}

TEST_CASE("rank1_residual") {
    SUBCASE("exact outer products") {
        for (int trial = 0; trial < 20; ++trial) {
            CVec u{random_cx(), random_cx(), random_cx()};
            CHECK(rank1_residual(outer(u, u)) < 1e-12);
        }
    }
    SUBCASE("identity has equal singular values") {
        CHECK(rank1_residual(CMat::identity(3)) == doctest::Approx(1.0));
    }
    SUBCASE("perturbed outer product sits between the extremes") {
        CVec u{1.0, std::polar(1.0, -2.0 * kPi / 3.0), std::polar(1.0, 2.0 * kPi / 3.0)};
        CMat m = outer(u, u);
        m.at(0, 0) += 1e-3;
        const double r = rank1_residual(m);
        CHECK(r > 0.0);
        CHECK(r < 1e-2);
    }
    SUBCASE("zero matrix is rank 0") { CHECK(rank1_residual(CMat(3)) == 0.0); }
}

TEST_CASE("psd_residual") {
    SUBCASE("outer products are psd") {
        CVec u{random_cx(), random_cx(), random_cx()};
        CHECK(psd_residual(Hermitian::from_outer(u)) < 1e-12);
    }
    SUBCASE("explicit eigenvalues") {
        CMat m(3);
        m.at(0, 0) = 1.0;
        m.at(1, 1) = 1.0;
        m.at(2, 2) = -1.0;
        CHECK(psd_residual(Hermitian::from(m)) == doctest::Approx(1.0));
    }
    SUBCASE("construct-from-spectrum oracle") {
        for (int trial = 0; trial < 10; ++trial) {
            const int n = 3 + (trial % 4);  // up to 6
            CDense q = random_unitary(n);
            std::vector<double> lambda;
            std::uniform_real_distribution<double> d(-2.0, 2.0);
            for (int k = 0; k < n; ++k) lambda.push_back(d(rng()));
            CDense m = from_spectrum(q, lambda);
            const double expected = std::max(0.0, -*std::min_element(lambda.begin(), lambda.end()));
            CHECK(psd_residual(m) == doctest::Approx(expected).epsilon(1e-10));
        }
    }
}

TEST_CASE("hermitian eigensolver against constructed spectra") {
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 2 + (trial % 5);
        CDense q = random_unitary(n);
        std::vector<double> lambda;
        std::uniform_real_distribution<double> d(-5.0, 5.0);
        for (int k = 0; k < n; ++k) lambda.push_back(d(rng()));
        CDense m = from_spectrum(q, lambda);
        std::vector<double> got = hermitian_eigenvalues(m);
        std::sort(lambda.begin(), lambda.end());
        REQUIRE(got.size() == lambda.size());
        for (std::size_t k = 0; k < got.size(); ++k)
            CHECK(got[k] == doctest::Approx(lambda[k]).epsilon(1e-11));
    }
}

TEST_CASE("pinv") {
    SUBCASE("diagonal inverse") {
        CMat z(3);
        z.at(0, 0) = z.at(1, 1) = z.at(2, 2) = 2.0;
        CMat y = pinv(z);
        for (int k = 0; k < 3; ++k) CHECK(std::abs(y.at(k, k) - cx{0.5, 0.0}) < 1e-14);
    }
    SUBCASE("rank-deficient diagonal") {
        CMat z(3);
        z.at(0, 0) = 1.0;
        CMat y = pinv(z);
        CHECK(std::abs(y.at(0, 0) - cx{1.0, 0.0}) < 1e-12);
        CHECK(std::abs(y.at(1, 1)) < 1e-12);
        CHECK(std::abs(y.at(2, 2)) < 1e-12);
    }
    SUBCASE("mutually coupled impedance satisfies z y z = z") {
        CMat z(3);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) z.at(r, c) = r == c ? cx{0.3, 0.6} : cx{0.1, 0.2};
        CMat y = pinv(z);
        CHECK((z * y * z - z).inf_norm() < 1e-10 * z.inf_norm());
        CHECK((y * z * y - y).inf_norm() < 1e-10 * y.inf_norm());
    }
    SUBCASE("all four Penrose identities on random matrices") {
        for (int trial = 0; trial < 25; ++trial) {
            CMat m = random_cmat(3);
            CMat p = pinv(m);
            const double scale = std::max(m.inf_norm(), 1.0);
            CHECK((m * p * m - m).inf_norm() < 1e-9 * scale);
            CHECK((p * m * p - p).inf_norm() < 1e-9 * std::max(p.inf_norm(), 1.0));
            CHECK(((m * p).adjoint() - m * p).inf_norm() < 1e-9 * scale);
            CHECK(((p * m).adjoint() - p * m).inf_norm() < 1e-9 * scale);
        }
    }
    SUBCASE("zero matrix") { CHECK(pinv(CMat(3)).inf_norm() == 0.0); }
}

TEST_CASE("real embedding") {
    SUBCASE("identity doubles to identity") {
        Mat e = real_embedding(Hermitian::from(CMat::identity(3)));
        CHECK(e.rows() == 6);
        for (int r = 0; r < 6; ++r)
            for (int c = 0; c < 6; ++c) CHECK(e.at(r, c) == (r == c ? 1.0 : 0.0));
    }
    SUBCASE("real diagonal duplicates eigenvalues") {
        CMat m(3);
        m.at(0, 0) = 2.0;
        m.at(1, 1) = 3.0;
        m.at(2, 2) = 5.0;
        std::vector<double> ev = symmetric_eigenvalues(real_embedding(Hermitian::from(m)));
        std::vector<double> expected = {2, 2, 3, 3, 5, 5};
        for (std::size_t k = 0; k < ev.size(); ++k) CHECK(ev[k] == doctest::Approx(expected[k]));
    }
    SUBCASE("eigenvalue doubling for complex Hermitian input") {
        for (int trial = 0; trial < 8; ++trial) {
            CMat m = random_cmat(3);
            Hermitian h = Hermitian::from(m * m.adjoint());
            std::vector<double> base = hermitian_eigenvalues(CDense::from_cmat(h.to_cmat()));
            std::vector<double> doubled = symmetric_eigenvalues(real_embedding(h));
            REQUIRE(doubled.size() == 2 * base.size());
            for (std::size_t k = 0; k < base.size(); ++k) {
                CHECK(doubled[2 * k] == doctest::Approx(base[k]).epsilon(1e-10));
                CHECK(doubled[2 * k + 1] == doctest::Approx(base[k]).epsilon(1e-10));
            }
        }
    }
    SUBCASE("embedding is symmetric") {
        CMat m = random_cmat(3);
        Mat e = real_embedding(Hermitian::from(m + m.adjoint()));
        for (int r = 0; r < e.rows(); ++r)
            for (int c = 0; c < e.cols(); ++c) CHECK(e.at(r, c) == e.at(c, r));
    }
}

TEST_CASE("hermitian view symmetrizes and reports the defect") {
    CMat m = random_cmat(3);
    double defect = 0.0;
    Hermitian h = Hermitian::from(m, &defect);
    CHECK(defect > 0.0);
    for (int r = 0; r < 3; ++r) {
        CHECK(h.im(r, r) == 0.0);
        for (int c = 0; c < 3; ++c) {
            CHECK(h.re(r, c) == h.re(c, r));
            CHECK(h.im(r, c) == -h.im(c, r));
        }
    }
}

TEST_CASE("lu solve") {
    SUBCASE("known 3x3 system") {
        Mat a(3, 3);
        a.at(0, 0) = 2;
        a.at(0, 1) = 1;
        a.at(1, 1) = 3;
        a.at(1, 2) = 1;
        a.at(2, 0) = 1;
        a.at(2, 2) = 4;
        std::vector<double> b = {5, 12, 13};  // x = (1, 3, 3)
        CHECK(lu_solve(a, b) == -1);
        CHECK(b[0] == doctest::Approx(1.0));
        CHECK(b[1] == doctest::Approx(3.0));
        CHECK(b[2] == doctest::Approx(3.0));
    }
    SUBCASE("singular matrix reports the failing column") {
        Mat a(2, 2);
        a.at(0, 0) = 1.0;
        a.at(0, 1) = 2.0;
        a.at(1, 0) = 2.0;
        a.at(1, 1) = 4.0;
        std::vector<double> b = {1, 2};
        CHECK(lu_solve(a, b) == 1);
    }
}
