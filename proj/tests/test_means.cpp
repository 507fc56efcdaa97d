#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"

using namespace ncot;
using namespace ncot::testing;

namespace {

constexpr MeanKind kAll[] = {MeanKind::Arithmetic, MeanKind::Logarithmic, MeanKind::Geometric, MeanKind::Harmonic};

std::vector<Derivation> backends(std::mt19937_64& rng)
{
    return {random_graph(rng, 6), random_lindblad(rng)};
}

} // namespace

TEST(Means, ScalarExamples)
{
    EXPECT_DOUBLE_EQ(mean_value(MeanKind::Logarithmic, 1, 1), 1.0);
    EXPECT_NEAR(mean_value(MeanKind::Logarithmic, 2, 4), 2.0 / std::log(2.0), 1e-15);
    EXPECT_NEAR(mean_value(MeanKind::Logarithmic, 2, 4), 2.885390, 1e-6);
    EXPECT_NEAR(mean_value(MeanKind::Harmonic, 2, 4), 8.0 / 3.0, 1e-15);
    EXPECT_NEAR(mean_value(MeanKind::Geometric, 2, 4), 2.0 * std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(mean_value(MeanKind::Arithmetic, 2, 4), 3.0, 1e-15);
    EXPECT_EQ(mean_value(MeanKind::Logarithmic, 3, 0), 0.0);
    EXPECT_EQ(mean_value(MeanKind::Geometric, 3, 0), 0.0);
    EXPECT_EQ(mean_value(MeanKind::Harmonic, 3, 0), 0.0);
    EXPECT_EQ(mean_value(MeanKind::Arithmetic, 3, 0), 1.5);
    EXPECT_THROW(mean_value(MeanKind::Arithmetic, -1, 1), DomainError);
    EXPECT_EQ(parse_mean("gm"), MeanKind::Geometric);
    EXPECT_FALSE(parse_mean("xx").has_value());
}

TEST(Means, LogMeanNearDiagonalIsSmooth)
{
    // series branch against the closed form just outside it
    for (double s : {0.3, 1.0, 7.0}) {
        for (double r : {1e-9, 1e-6, 5e-4, 2e-3}) {
            const double t = s * (1 + r);
            const double exact = s * r / std::log1p(r);
            EXPECT_NEAR(mean_value(MeanKind::Logarithmic, s, t), exact, 1e-14 * s);
        }
    }
}

TEST(Means, PartialDerivativeMatchesFiniteDifference)
{
    for (auto k : kAll)
        for (double s : {0.2, 1.0, 3.0})
            for (double t : {0.1, 0.2001, 2.5}) {
                const double h = 1e-6 * s;
                const double fd = (mean_value(k, s + h, t) - mean_value(k, s - h, t)) / (2 * h);
                EXPECT_NEAR(mean_partial_first(k, s, t), fd, 1e-7) << to_string(k) << " " << s << " " << t;
            }
}

TEST(Means, GeneratingFunctionAndSymmetry)
{
    for (auto k : kAll)
        for (double s : {0.1, 1.0, 4.0})
            for (double t : {0.3, 1.0, 9.0}) {
                EXPECT_NEAR(mean_value(k, s, t), s * mean_generating_function(k, t / s), 1e-13 * (s + t));
                EXPECT_NEAR(mean_value(k, s, t), mean_value(k, t, s), 1e-14 * (s + t));
                EXPECT_NEAR(mean_value(k, 3 * s, 3 * t), 3 * mean_value(k, s, t), 1e-13 * (s + t));
            }
}

TEST(Means, OrderingOnGrid)
{
    for (int i = 0; i < 100; ++i)
        for (int j = 0; j < 100; ++j) {
            const double s = 0.05 * i, t = 0.05 * j;
            const double hm = mean_value(MeanKind::Harmonic, s, t), gm = mean_value(MeanKind::Geometric, s, t);
            const double lm = mean_value(MeanKind::Logarithmic, s, t), am = mean_value(MeanKind::Arithmetic, s, t);
            EXPECT_LE(hm, gm * (1 + 1e-14));
            EXPECT_LE(gm, lm * (1 + 1e-14));
            EXPECT_LE(lm, am * (1 + 1e-14));
        }
}

TEST(RhoHat, UniformScalesByTraceOfUnit)
{
    std::mt19937_64 rng(1);
    for (const auto& d : backends(rng)) {
        const Density u = uniform_density(d.algebra());
        const TangentVector xi = random_tangent(d, rng);
        for (auto k : kAll) {
            const TangentVector r = rho_hat_apply(k, u, d, xi);
            EXPECT_LE(tangent_distance(d, r, (1.0 / d.algebra().trace_of_unit()) * xi), 1e-12);
            EXPECT_NEAR(rho_norm(k, u, d, xi), std::sqrt(d.norm2(xi) / d.algebra().trace_of_unit()), 1e-12);
        }
    }
}

TEST(RhoHat, OffDiagonalComponentScaledByMean)
{
    AlgebraSpec m2({{2, 0.5}});
    const Derivation d = Derivation::lindblad({m2, {pauli(m2, 'x')}});
    Matrix U = Matrix::Identity(2, 2);
    U << 1, 1, cplx(0, 1), cplx(0, -1);
    U /= std::sqrt(2.0);
    Matrix L = Matrix::Zero(2, 2);
    L(0, 0) = 1.5;
    L(1, 1) = 0.5;
    const Density rho(m2, Element({U * L * U.adjoint()}));
    TangentVector xi = d.zero_tangent();
    Matrix e01 = Matrix::Zero(2, 2);
    e01(0, 1) = 1.0;
    xi.parts[0] = U * e01 * U.adjoint();
    for (auto k : kAll) {
        const TangentVector r = rho_hat_apply(k, rho, d, xi);
        const double th = mean_value(k, 1.5, 0.5);
        EXPECT_LE((r.parts[0] - th * xi.parts[0]).norm(), 1e-13) << to_string(k);
    }
}

TEST(RhoHat, LinearPositiveAndSolvable)
{
    std::mt19937_64 rng(2);
    for (const auto& d : backends(rng)) {
        for (int i = 0; i < 500; ++i) {
            const Density rho = random_density(d.algebra(), rng, 1e-3);
            const auto k = kAll[i % 4];
            const RhoHat rh(k, d, rho);
            const TangentVector x = random_tangent(d, rng), y = random_tangent(d, rng);
            const TangentVector lin = rh.apply(x + cplx(0.3, -2.0) * y) - rh.apply(x) - cplx(0.3, -2.0) * rh.apply(y);
            EXPECT_LE(std::sqrt(d.norm2(lin)), 1e-12 * (1 + std::sqrt(d.norm2(x) + d.norm2(y))));
            EXPECT_GE(d.inner(rh.apply(x), x).real(), -1e-14);
            EXPECT_LE(std::abs(d.inner(rh.apply(x), x).imag()), 1e-12 * (1 + d.norm2(x)));
            const TangentVector back = rh.apply(rh.solve(x));
            EXPECT_LE(tangent_distance(d, back, x), 1e-9 * std::sqrt(d.norm2(x)));
        }
    }
}

TEST(RhoHat, SingularDetectionAndTikhonov)
{
    const Derivation d = two_point_graph();
    const Density rho(d.algebra(), Element::diagonal({1.0, 0.0}));
    const TangentVector xi = d.derive(Element::diagonal({1.0, 0.0}));
    for (auto k : {MeanKind::Logarithmic, MeanKind::Geometric, MeanKind::Harmonic}) {
        EXPECT_THROW(rho_hat_solve(k, rho, d, xi), SingularityError);
        const TangentVector t = rho_hat_solve(k, rho, d, xi, TikhonovSolve{0.5});
        EXPECT_NEAR(t.parts[0](0, 1).real(), 2.0, 1e-15);
    }
    // the arithmetic mean stays invertible
    EXPECT_NO_THROW(rho_hat_solve(MeanKind::Arithmetic, rho, d, xi));

    AlgebraSpec m2({{2, 0.5}});
    const Derivation q = Derivation::lindblad({m2, {pauli(m2, 'x')}});
    Matrix p = Matrix::Zero(2, 2);
    p(0, 0) = 2.0;
    const Density pure(m2, Element({p}));
    EXPECT_THROW(rho_hat_solve(MeanKind::Logarithmic, pure, q, q.derive(pauli(m2, 'z'))), SingularityError);
    // mass only on the positive pair is fine
    TangentVector ok = q.zero_tangent();
    ok.parts[0](0, 0) = 1.0;
    EXPECT_NO_THROW(rho_hat_solve(MeanKind::Logarithmic, pure, q, ok));
}

TEST(RhoHat, ChainRuleAndLogarithmicCancellation)
{
    std::mt19937_64 rng(6);
    for (const auto& d : backends(rng)) {
        const AlgebraSpec& A = d.algebra();
        for (int i = 0; i < 200; ++i) {
            const Element a = random_hermitian(A, rng);
            const TangentVector da = d.derive(a);
            const TangentVector id = divided_difference_apply([](double t) { return t; }, [](double) { return 1.0; }, a, d, da);
            EXPECT_LE(tangent_distance(d, id, da), 1e-12 * (1 + std::sqrt(d.norm2(da))));
            const TangentVector sq = divided_difference_apply([](double t) { return t * t; },
                                                              [](double t) { return 2 * t; }, a, d, da);
            EXPECT_LE(tangent_distance(d, sq, d.derive(a * a)), 1e-10 * (1 + std::sqrt(d.norm2(da))));

            const Density rho = random_density(A, rng, 1e-4);
            const Element lr = functional_calculus(A, rho.element(), [](double t) { return std::log(t); });
            const TangentVector lhs = rho_hat_apply(MeanKind::Logarithmic, rho, d, d.derive(lr));
            const TangentVector drho = d.derive(rho.element());
            EXPECT_LE(tangent_distance(d, lhs, drho), 1e-9 * std::sqrt(d.norm2(drho)));
        }
    }
}

TEST(RhoHat, MonotoneConcaveAndBelowArithmetic)
{
    std::mt19937_64 rng(10);
    for (const auto& d : backends(rng)) {
        const AlgebraSpec& A = d.algebra();
        for (int i = 0; i < 500; ++i) {
            const auto k = kAll[i % 4];
            const Element a = random_general(A, rng);
            const TangentVector da = d.derive(a);
            const Density r0 = random_density(A, rng, 0.0);
            const Density r1 = random_density(A, rng, 0.0);
            const double n0 = RhoHat(k, d, r0).norm2(da), n1 = RhoHat(k, d, r1).norm2(da);
            // comparable pair: r0 <= r0 + r1 (unnormalized)
            const double nsum = RhoHat(k, d, r0.element() + r1.element()).norm2(da);
            EXPECT_GE(nsum - n0, -1e-10 * (1 + nsum));
            const double nmid = RhoHat(k, d, 0.5 * (r0.element() + r1.element())).norm2(da);
            EXPECT_GE(nmid - 0.5 * n0 - 0.5 * n1, -1e-10 * (1 + nmid));
            // ||d a*||_rho = ||d a||_rho
            EXPECT_NEAR(RhoHat(k, d, r0).norm2(d.derive(a.adjoint())), n0, 1e-10 * (1 + n0));
            // theta <= AM
            const Element gam = d.carre_du_champ_vector(da) + d.carre_du_champ_vector(d.derive(a.adjoint()));
            EXPECT_LE(n0, 0.5 * trace_real(A, gam * r0.element()) + 1e-10 * (1 + n0));
        }
    }
}

TEST(RhoHat, GradientMatchesFiniteDifferences)
{
    std::mt19937_64 rng(12);
    for (const auto& d : backends(rng)) {
        const AlgebraSpec& A = d.algebra();
        for (auto k : kAll) {
            for (int i = 0; i < 10; ++i) {
                const Density rho = random_density(A, rng, 0.02);
                const TangentVector xi = random_tangent(d, rng);
                const Element g = RhoHat(k, d, rho).gradient(xi);
                const Element h = random_hermitian(A, rng);
                const double step = 1e-5;
                const double fp = RhoHat(k, d, rho.element() + step * h).norm2(xi);
                const double fm = RhoHat(k, d, rho.element() - step * h).norm2(xi);
                const double fd = (fp - fm) / (2 * step);
                EXPECT_NEAR(trace_real(A, g * h), fd, 1e-5 * (1 + std::abs(fd))) << to_string(k);
            }
        }
    }
}
