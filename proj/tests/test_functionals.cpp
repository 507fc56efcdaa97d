#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"

using namespace ncot;
using namespace ncot::testing;

namespace {

std::vector<Derivation> backends(std::mt19937_64& rng)
{
    return {random_graph(rng, 5), random_lindblad(rng)};
}

} // namespace

TEST(Entropy, Examples)
{
    AlgebraSpec m2({{2, 0.5}});
    EXPECT_NEAR(entropy(m2, uniform_density(m2)), 0.0, 1e-15);
    Matrix p = Matrix::Zero(2, 2);
    p(0, 0) = 2.0;
    EXPECT_NEAR(entropy(m2, Density(m2, Element({p}))), std::log(2.0), 1e-15);
    // n-point graph: n delta_x has unit mass for the measure m = 1/n
    for (int n : {2, 5, 16}) {
        AlgebraSpec A = AlgebraSpec::commutative(std::vector<double>(n, 1.0 / n));
        std::vector<double> v(n, 0.0);
        v[0] = n;
        EXPECT_NEAR(entropy(A, Density(A, Element::diagonal(v))), std::log(double(n)), 1e-13);
    }
    // lower bound -log tau(1)
    std::mt19937_64 rng(1);
    AlgebraSpec A({{2, 0.7}, {3, 0.4}});
    for (int i = 0; i < 100; ++i)
        EXPECT_GE(entropy(A, random_density(A, rng)), -std::log(A.trace_of_unit()) - 1e-12);
}

TEST(Entropy, ConvexOnDensities)
{
    std::mt19937_64 rng(2);
    AlgebraSpec A({{2, 0.7}, {3, 0.4}, {1, 0.2}});
    for (int i = 0; i < 500; ++i) {
        const Density r = random_density(A, rng), s = random_density(A, rng);
        const double mid = entropy(A, 0.5 * (r.element() + s.element()));
        EXPECT_LE(mid, 0.5 * entropy(A, r) + 0.5 * entropy(A, s) + 1e-12);
    }
}

TEST(Fisher, Examples)
{
    const Derivation d = two_point_graph();
    EXPECT_EQ(fisher_information(d, Element::identity(d.algebra())).value, 0.0);
    for (double p : {0.1, 0.3, 0.5, 0.77, 0.95}) {
        const double a = 2 * p, b = 2 * (1 - p);
        const double expect = (a - b) * (std::log(a) - std::log(b));
        const FisherValue f = fisher_information(d, Element::diagonal({a, b}));
        EXPECT_TRUE(f.finite);
        EXPECT_NEAR(f.value, expect, 1e-13 * (1 + expect));
    }
    // mass on a vanishing eigenvalue
    EXPECT_FALSE(fisher_information(d, Element::diagonal({2.0, 0.0})).finite);
    AlgebraSpec m2({{2, 0.5}});
    const Derivation dz = Derivation::lindblad({m2, {pauli(m2, 'z')}});
    Matrix p = Matrix::Zero(2, 2);
    p(0, 0) = 2.0;
    // diagonal pure state commutes with sigma_z: d rho = 0
    EXPECT_TRUE(fisher_information(dz, Density(m2, Element({p}))).finite);
    const Derivation dx = Derivation::lindblad({m2, {pauli(m2, 'x')}});
    EXPECT_FALSE(fisher_information(dx, Density(m2, Element({p}))).finite);
}

TEST(Fisher, TruncatedLogApproximation)
{
    std::mt19937_64 rng(3);
    for (const auto& d : backends(rng)) {
        for (int i = 0; i < 20; ++i) {
            const Density rho = random_density(d.algebra(), rng, 1e-3);
            const double n = 40.0;
            const Element cn = functional_calculus(d.algebra(), rho.element(),
                                                   [n](double t) { return std::log(t + std::exp(-n)) + n; });
            const double approx = d.energy(rho.element(), cn).real();
            const double exact = fisher_information(d, rho).value;
            EXPECT_NEAR(approx, exact, 1e-6 * exact);
            EXPECT_NEAR(exact,
                        d.energy(rho.element(), functional_calculus(d.algebra(), rho.element(),
                                                                     [](double t) { return std::log(t); }))
                            .real(),
                        1e-10 * exact);
        }
    }
}

TEST(Fisher, ConvexAlongSegments)
{
    std::mt19937_64 rng(4);
    for (const auto& d : backends(rng)) {
        for (int i = 0; i < 100; ++i) {
            const Density r = random_density(d.algebra(), rng, 1e-3), s = random_density(d.algebra(), rng, 1e-3);
            const double mid = fisher_information(d, 0.5 * (r.element() + s.element())).value;
            const double fr = fisher_information(d, r).value, fs = fisher_information(d, s).value;
            EXPECT_LE(mid, 0.5 * (fr + fs) + 1e-10 * (1 + fr + fs));
            EXPECT_GE(fr, 0.0);
        }
    }
}

TEST(CarreDuChamp, IdentityAndEnergy)
{
    std::mt19937_64 rng(5);
    for (const auto& d : backends(rng)) {
        const AlgebraSpec& A = d.algebra();
        EXPECT_LE(carre_du_champ(d, Element::identity(A)).norm2_unweighted(), 1e-15);
        const Element a = random_general(A, rng);
        const Element g = carre_du_champ(d, a);
        EXPECT_NEAR(trace_real(A, g), d.energy(a, a).real(), 1e-10 * (1 + trace_real(A, g)));
        EXPECT_GE(eigh(g).min_value(), -1e-12);
        for (int i = 0; i < 200; ++i) {
            const Element x = random_general(A, rng);
            const cplx l = trace(A, x * g);
            const cplx r = d.inner(d.derive(a), d.left_act(x, d.derive(a)));
            EXPECT_LE(std::abs(l - r), 1e-10 * (1 + std::abs(r)));
        }
    }
    // closed form on the graph backend
    const Derivation d = path_graph3();
    const auto g = carre_du_champ(d, Element::diagonal({0.0, 1.0, 3.0})).values();
    EXPECT_NEAR(g[0], 0.5, 1e-15);
    EXPECT_NEAR(g[1], 0.5 * (1.0 + 4.0), 1e-15);
    EXPECT_NEAR(g[2], 2.0, 1e-15);
}

TEST(ThetaSeminorm, TwoPointAgainstScan)
{
    const Derivation d = two_point_graph();
    EXPECT_EQ(theta_seminorm(MeanKind::Logarithmic, d, Element::identity(d.algebra())).value, 0.0);
    for (auto k : {MeanKind::Logarithmic, MeanKind::Geometric, MeanKind::Harmonic, MeanKind::Arithmetic}) {
        // ||d(1,0)||_rho^2 = theta(rho0, rho1) on the segment rho0 + rho1 = 1
        auto phi = [k](double p) { return mean_value(k, p, 1 - p); };
        double best = 0.0, arg = 0.0;
        for (int i = 0; i <= 1000; ++i) {
            const double p = i / 1000.0;
            if (phi(p) > best) {
                best = phi(p);
                arg = p;
            }
        }
        const double p = detail::golden_max(phi, std::max(0.0, arg - 1e-3), std::min(1.0, arg + 1e-3));
        const SeminormResult r = theta_seminorm(k, d, Element::diagonal({1.0, 0.0}));
        EXPECT_TRUE(r.converged);
        EXPECT_NEAR(r.value * r.value, phi(p), 1e-6 * phi(p)) << to_string(k);
        EXPECT_LE(r.value, r.upper_bound * (1 + 1e-15));
    }
}

TEST(ThetaSeminorm, ArithmeticMatchesCarreDuChamp)
{
    std::mt19937_64 rng(6);
    for (const auto& d : backends(rng)) {
        for (int i = 0; i < 10; ++i) {
            const Element a = random_general(d.algebra(), rng);
            const double direct = am_seminorm_squared(d, a);
            const SeminormResult r = theta_seminorm(MeanKind::Arithmetic, d, a);
            EXPECT_NEAR(r.value * r.value, direct, 1e-6 * direct);
        }
    }
}

TEST(ThetaSeminorm, DominatesSampledNorms)
{
    std::mt19937_64 rng(7);
    for (const auto& d : backends(rng)) {
        const Element a = random_hermitian(d.algebra(), rng);
        const SeminormResult r = theta_seminorm(MeanKind::Logarithmic, d, a);
        const double up = r.upper_bound * r.upper_bound;
        for (int i = 0; i < 200; ++i) {
            const Density rho = random_density(d.algebra(), rng);
            EXPECT_LE(rho_norm(MeanKind::Logarithmic, rho, d, d.derive(a)) * rho_norm(MeanKind::Logarithmic, rho, d, d.derive(a)),
                      up * (1 + 1e-9));
        }
        // below the arithmetic seminorm
        EXPECT_LE(r.value * r.value, am_seminorm_squared(d, a) * (1 + 1e-9));
    }
}

TEST(TraceInequalities, KleinExamples)
{
    std::mt19937_64 rng(8);
    AlgebraSpec A({{2, 0.7}, {3, 0.4}});
    const Density r = random_density(A, rng, 0.01);
    auto sq = [](double t) { return t * t; };
    auto dsq = [](double t) { return 2 * t; };
    EXPECT_NEAR(klein_gap(A, sq, dsq, r.element(), r.element()), 0.0, 1e-14);
    for (int i = 0; i < 100; ++i) {
        const Element x = random_hermitian(A, rng), y = random_hermitian(A, rng);
        const Element diff = y - x;
        EXPECT_NEAR(klein_gap(A, sq, dsq, x, y), trace_real(A, diff * diff), 1e-10);
    }
}

TEST(TraceInequalities, VariationalEntropy)
{
    AlgebraSpec m2({{2, 0.5}});
    EXPECT_THROW(entropy_variational_gap(AlgebraSpec({{2, 1.0}}), uniform_density(AlgebraSpec({{2, 1.0}})),
                                         Element::zero(AlgebraSpec({{2, 1.0}}))),
                 PreconditionError);
    std::mt19937_64 rng(9);
    AlgebraSpec A({{2, 0.3}, {2, 0.2}});
    for (int i = 0; i < 50; ++i) {
        const Density rho = random_density(A, rng, 0.05);
        EXPECT_NEAR(entropy_variational_gap(A, rho, Element::zero(A)), entropy(A, rho), 1e-14);
        const double M = 1.0 / rho.min_eigenvalue();
        const Element a = functional_calculus(A, rho.element(), [M](double t) { return std::log(M * t); });
        EXPECT_LE(std::abs(entropy_variational_gap(A, rho, a)), 1e-8);
    }
}

TEST(ConnesBound, TwoPointClosedForm)
{
    for (auto [m0, m1, w] : {std::tuple{1.0, 1.0, 1.0}, std::tuple{0.5, 2.0, 1.5}, std::tuple{3.0, 1.0, 0.25}}) {
        const Derivation d = two_point_graph(m0, m1, w);
        const AlgebraSpec& A = d.algebra();
        const Element r = Element::diagonal({0.9 / m0, 0.1 / m1});
        const Element s = Element::diagonal({0.2 / m0, 0.8 / m1});
        const double expect = std::sqrt(2 * std::min(m0, m1) / w) * std::abs(m0 * (0.9 / m0 - 0.2 / m0));
        const BoundResult b = connes_lower_bound(d, r, s);
        EXPECT_NEAR(b.value, expect, 1e-6 * expect);
        EXPECT_LE(b.value, b.upper_bound * (1 + 1e-12));
        // brute force over a0 - a1
        double brute = 0.0;
        for (int i = -6000; i <= 6000; ++i) {
            const Element a = Element::diagonal({i / 1000.0, 0.0});
            const double c = am_seminorm_squared(d, a);
            if (c <= 1.0)
                brute = std::max(brute, std::abs(trace_real(A, a * (r - s))));
        }
        EXPECT_LE(brute, b.value * (1 + 1e-9));
        EXPECT_GE(brute, b.value * (1 - 2e-3));
    }
    const Derivation d = two_point_graph();
    EXPECT_EQ(connes_lower_bound(d, Element::diagonal({0.5, 0.5}), Element::diagonal({0.5, 0.5})).value, 0.0);
}

TEST(ConnesBound, BudgetMonotone)
{
    std::mt19937_64 rng(10);
    for (const auto& d : backends(rng)) {
        const Density r = random_density(d.algebra(), rng), s = random_density(d.algebra(), rng);
        double prev = 0.0;
        for (int it : {1, 3, 10, 100}) {
            SolverBudget b;
            b.max_iterations = it;
            const BoundResult res = connes_lower_bound(d, r.element(), s.element(), b);
            EXPECT_GE(res.value, prev);
            EXPECT_LE(res.value, res.upper_bound * (1 + 1e-9));
            prev = res.value;
        }
    }
}
