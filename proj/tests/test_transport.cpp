#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "ncot/transport.hpp"
#include "test_util.hpp"

using namespace ncot;
using namespace ncot::testing;

namespace {

struct TwoPointCase {
    MeanKind kind;
    double m0, m1, w, s0, s1;
    double reference;   // adaptive quadrature at 30 digits, computed offline
};

// s is the mass m0 * rho(0) at node 0
const TwoPointCase kFrozen[] = {
    {MeanKind::Logarithmic, 1, 1, 1, 0.9, 0.5, 0.5917904013871832},
    {MeanKind::Arithmetic, 1, 1, 1, 0.9, 0.5, 0.56568542494923805},
    {MeanKind::Geometric, 1, 1, 1, 0.9, 0.5, 0.60746178505893735},
    {MeanKind::Logarithmic, 1, 1, 1, 0.95, 0.2, 1.1118772383310966},
    {MeanKind::Logarithmic, 2, 0.5, 1.5, 0.4, 0.1, 0.33235172202304549},
    {MeanKind::Arithmetic, 2, 0.5, 1.5, 0.4, 0.1, 0.27240323972091523},
    {MeanKind::Logarithmic, 1, 3, 0.7, 0.1, 0.2, 0.26207144907740417},
    {MeanKind::Arithmetic, 1, 3, 0.7, 0.1, 0.2, 0.25696671218866199},
    {MeanKind::Logarithmic, 1, 1, 1, 1.0, 0.5, 0.77935372572682966},
    {MeanKind::Arithmetic, 1, 1, 1, 1.0, 0.0, 1.414213562373095},
};

Density two_point_density(const Derivation& d, double s)
{
    const auto& m = d.graph_spec().m;
    return Density(d.algebra(), Element::diagonal({s / m[0], (1 - s) / m[1]}));
}

Density positive_density(const AlgebraSpec& A, std::mt19937_64& rng)
{
    return random_density(A, rng, 0.05 / A.trace_of_unit());
}

double node_mass(const AlgebraSpec& A, const Element& x)
{
    return trace_real(A, x);
}

// a second strictly positive density with the same conserved quantities as r
Density partner(const Derivation& d, const Density& r, std::mt19937_64& rng)
{
    const AlgebraSpec& A = d.algebra();
    const RealMatrix P = kernel_projector(d);
    RealVector h = to_coords(A, random_hermitian(A, rng));
    h -= P * h;
    const RealVector c = to_coords(A, r.element());
    const double floor = 0.5 * eigh(r.element()).min_value();
    double s = 1.0 / h.norm();
    while (eigh(from_coords(A, c + s * h)).min_value() < floor)
        s *= 0.5;
    return Density(A, from_coords(A, c + s * h));
}

} // namespace

TEST(TwoPointOracle, FrozenReferenceValues)
{
    for (const auto& c : kFrozen) {
        const Derivation d = two_point_graph(c.m0, c.m1, c.w);
        const double v = two_point_oracle(c.kind, d, two_point_density(d, c.s0), two_point_density(d, c.s1));
        EXPECT_NEAR(v, c.reference, 1e-11 * c.reference) << to_string(c.kind) << " " << c.s0 << " -> " << c.s1;
    }
}

TEST(TwoPointOracle, ZeroSymmetricAndNested)
{
    const Derivation d = two_point_graph();
    const Density r = two_point_density(d, 0.3);
    EXPECT_EQ(two_point_oracle(MeanKind::Logarithmic, d, r, r), 0.0);
    double prev = 0.0;
    for (double s1 : {0.35, 0.45, 0.6, 0.8, 0.95}) {
        const double v = two_point_oracle(MeanKind::Logarithmic, d, r, two_point_density(d, s1));
        EXPECT_GT(v, prev);
        EXPECT_NEAR(v, two_point_oracle(MeanKind::Logarithmic, d, two_point_density(d, s1), r), 1e-14);
        prev = v;
    }
    EXPECT_THROW(two_point_oracle(MeanKind::Logarithmic, cycle_graph(4), uniform_density(cycle_graph(4).algebra()),
                                  uniform_density(cycle_graph(4).algebra())),
                 PreconditionError);
}

TEST(Transport, MatchesTwoPointOracle)
{
    for (const auto& c : kFrozen) {
        if (std::min(c.s0, c.s1) <= 0.0 || std::max(c.s0, c.s1) >= 1.0)
            continue;   // singular endpoints are covered separately
        const Derivation d = two_point_graph(c.m0, c.m1, c.w);
        TransportOptions opt;
        opt.grid = 64;
        const auto r = bb_distance(c.kind, d, two_point_density(d, c.s0), two_point_density(d, c.s1), opt);
        EXPECT_NEAR(r.distance, c.reference, 1e-3 * c.reference) << to_string(c.kind) << " " << c.s0;
        EXPECT_TRUE(r.converged);
    }
}

TEST(Transport, IdenticalEndpoints)
{
    std::mt19937_64 rng(11);
    for (const auto& d : {two_point_graph(), qubit_depolarizing()}) {
        const Density r = positive_density(d.algebra(), rng);
        const auto res = bb_distance(MeanKind::Logarithmic, d, r, r);
        EXPECT_LE(res.distance, 1e-12);
        for (const auto& m : res.path.momenta)
            EXPECT_LE(d.norm2(m), 1e-20);
        EXPECT_EQ(transport_lower_bound(MeanKind::Logarithmic, d, r, r), 0.0);
        const auto g = geodesic(MeanKind::Logarithmic, d, r, r);
        for (const auto& x : g.densities)
            EXPECT_LE(element_distance(d.algebra(), x, r.element()), 1e-12);
    }
}

TEST(Transport, CertificatesHoldOnEveryBackend)
{
    std::mt19937_64 rng(12);
    const Derivation backends[] = {two_point_graph(), cycle_graph(4), qubit_depolarizing(), random_lindblad(rng)};
    for (const auto& d : backends) {
        const AlgebraSpec& A = d.algebra();
        for (auto kind : {MeanKind::Logarithmic, MeanKind::Arithmetic}) {
            const Density r0 = positive_density(A, rng), r1 = partner(d, r0, rng);
            TransportOptions opt;
            opt.grid = 16;
            const auto res = bb_distance(kind, d, r0, r1, opt);
            const auto& c = res.certificates;
            EXPECT_LE(c.feasibility_residual, 1e-9);
            EXPECT_NEAR(c.recomputed_action, res.action, 1e-8 * res.action);
            EXPECT_NEAR(res.distance * res.distance, res.action, 1e-14 * (1 + res.action));
            EXPECT_LE(element_distance(A, res.path.densities.front(), r0.element()), 1e-10);
            EXPECT_LE(element_distance(A, res.path.densities.back(), r1.element()), 1e-10);
            for (const auto& x : res.path.densities)
                EXPECT_NEAR(node_mass(A, x), 1.0, 1e-9);
            for (std::size_t i = 1; i < c.objective_history.size(); ++i)
                EXPECT_LE(c.objective_history[i], c.objective_history[i - 1] * (1 + 1e-12));
            EXPECT_EQ(c.grid, 16);
            EXPECT_EQ(c.refinement_grid, 32);
            EXPECT_FALSE(c.endpoints_regularized);
            EXPECT_EQ(c.stage_starts.size(), c.eps_schedule.size());
            EXPECT_NEAR(path_action(kind, d, res.path), res.action, 1e-8 * res.action);
        }
    }
}

TEST(Transport, Symmetry)
{
    std::mt19937_64 rng(13);
    const TransportOptions opt;
    const Derivation tp = two_point_graph();
    for (int i = 0; i < 20; ++i) {
        const Density a = positive_density(tp.algebra(), rng), b = positive_density(tp.algebra(), rng);
        const auto kind = i % 2 ? MeanKind::Logarithmic : MeanKind::Arithmetic;
        const double ab = bb_distance(kind, tp, a, b, opt).distance, ba = bb_distance(kind, tp, b, a, opt).distance;
        EXPECT_LE(std::abs(ab - ba), 2 * opt.tol * ab);
    }
    for (const auto& d : {cycle_graph(4), qubit_depolarizing()})
        for (int i = 0; i < 3; ++i) {
            const Density a = positive_density(d.algebra(), rng), b = positive_density(d.algebra(), rng);
            const double ab = bb_distance(MeanKind::Logarithmic, d, a, b, opt).distance;
            const double ba = bb_distance(MeanKind::Logarithmic, d, b, a, opt).distance;
            EXPECT_LE(std::abs(ab - ba), 2 * opt.tol * ab);
        }
}

TEST(Transport, TriangleInequality)
{
    std::mt19937_64 rng(14);
    const TransportOptions opt;
    for (const auto& d : {two_point_graph(), cycle_graph(4), qubit_depolarizing()})
        for (int i = 0; i < 4; ++i) {
            const AlgebraSpec& A = d.algebra();
            const Density r = positive_density(A, rng), s = positive_density(A, rng);
            // a point near the segment makes the inequality nearly tight
            const Density v(A, (0.9 * (0.5 * (r.element() + s.element())) + 0.1 * positive_density(A, rng).element())
                                   .hermitian_part());
            const auto rs = barred(bb_distance(MeanKind::Logarithmic, d, r, s, opt));
            const auto rv = barred(bb_distance(MeanKind::Logarithmic, d, r, v, opt));
            const auto vs = barred(bb_distance(MeanKind::Logarithmic, d, v, s, opt));
            EXPECT_LE(rs.lo(), rv.hi() + vs.hi() + 3 * opt.tol);
            // loose without the bars only by the discretization error
            EXPECT_LE(rs.value, rv.value + vs.value + 3 * opt.tol + 4 * rs.bar);
        }
}

TEST(Geodesic, ConstantSpeedAndArcLengthMidpoint)
{
    for (auto kind : {MeanKind::Logarithmic, MeanKind::Arithmetic, MeanKind::Geometric}) {
        const Derivation d = two_point_graph(1.0, 1.0, 1.0);
        const Density r0 = two_point_density(d, 0.95), r1 = two_point_density(d, 0.2);
        TransportOptions opt;
        opt.grid = 32;
        const DiscretePath g = geodesic(kind, d, r0, r1, opt);
        const auto speeds = discrete_speeds(kind, d, g);
        const double mean = std::accumulate(speeds.begin(), speeds.end(), 0.0) / speeds.size();
        for (double v : speeds)
            EXPECT_NEAR(v, mean, 0.05 * mean);
        const double s_mid = g.densities[16].values()[0];
        EXPECT_NEAR(s_mid, two_point_arclength_point(kind, d, r0, r1, 0.5), 1e-2);
        const double dist = bb_distance(kind, d, r0, r1, opt).distance;
        EXPECT_NEAR(path_action(kind, d, g), dist * dist, 1e-3 * dist * dist);
        EXPECT_LE(continuity_residual(d, g), 1e-9);
    }
}

TEST(Geodesic, ConstantSpeedOnMatrixAlgebra)
{
    std::mt19937_64 rng(15);
    const Derivation d = qubit_depolarizing();
    const Density r0 = positive_density(d.algebra(), rng), r1 = positive_density(d.algebra(), rng);
    TransportOptions opt;
    opt.grid = 16;
    const DiscretePath g = geodesic(MeanKind::Logarithmic, d, r0, r1, opt);
    const auto speeds = discrete_speeds(MeanKind::Logarithmic, d, g);
    const double mean = std::accumulate(speeds.begin(), speeds.end(), 0.0) / speeds.size();
    for (double v : speeds)
        EXPECT_NEAR(v, mean, 0.05 * mean);
    for (const auto& x : g.densities)
        EXPECT_GT(eigh(x).min_value(), 0.0);
}

TEST(LowerBound, SandwichesTheDistance)
{
    std::mt19937_64 rng(16);
    const TransportOptions opt;
    int n = 0;
    for (const auto& d : {two_point_graph(), qubit_depolarizing()})
        for (int i = 0; i < 10; ++i, ++n) {
            const AlgebraSpec& A = d.algebra();
            const auto kind = i % 2 ? MeanKind::Logarithmic : MeanKind::Arithmetic;
            const Density a = positive_density(A, rng), b = positive_density(A, rng);
            const double w = bb_distance(kind, d, a, b, opt).distance;
            SolverBudget budget;
            budget.seed = n;
            const double lb = transport_lower_bound(kind, d, a, b, budget);
            EXPECT_LE(lb, w * (1 + opt.tol)) << n;
            EXPECT_GT(lb, 0.5 * w) << n;
        }
}

TEST(LowerBound, CarreDuChampBoundForArithmeticMean)
{
    std::mt19937_64 rng(17);
    for (const auto& d : {two_point_graph(), cycle_graph(4), qubit_depolarizing()}) {
        const AlgebraSpec& A = d.algebra();
        const Density a = positive_density(A, rng), b = positive_density(A, rng);
        const double w = bb_distance(MeanKind::Arithmetic, d, a, b).distance;
        for (int i = 0; i < 20; ++i) {
            const Element x = random_general(A, rng);
            const double lhs = std::norm(trace(A, x * (a.element() - b.element())));
            EXPECT_LE(lhs, am_seminorm_squared(d, x) * w * w * (1 + 1e-4) + 1e-14);
        }
    }
}

TEST(Convexity, SquaredDistanceAlongLinearInterpolation)
{
    std::mt19937_64 rng(18);
    const Derivation d = two_point_graph();
    const AlgebraSpec& A = d.algebra();
    const std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 1.0};
    TransportOptions opt;
    opt.grid = 16;
    for (int i = 0; i < 3; ++i) {
        const Density a0 = positive_density(A, rng), a1 = positive_density(A, rng);
        const Density b0 = positive_density(A, rng), b1 = positive_density(A, rng);
        const CheckReport rep = convexity_check_w2(MeanKind::Logarithmic, d, a0, a1, b0, b1, grid, opt);
        EXPECT_TRUE(rep.passed) << rep.worst_margin;
        EXPECT_EQ(rep.samples, grid.size());
        // the end points are equalities
        EXPECT_NEAR(rep.rows.front().values.at("raw_margin"), 0.0, 1e-12);
        EXPECT_NEAR(rep.rows.back().values.at("raw_margin"), 0.0, 1e-12);
    }
    const Density a = positive_density(A, rng), b = positive_density(A, rng);
    const CheckReport deg = convexity_check_w2(MeanKind::Logarithmic, d, a, b, a, b, grid, opt);
    for (const auto& row : deg.rows) {
        EXPECT_LE(row.values.at("lhs"), 1e-24);
        EXPECT_LE(row.values.at("rhs"), 1e-24);
    }
    const Derivation q = qubit_depolarizing();
    const CheckReport mat = convexity_check_w2(MeanKind::Logarithmic, q, positive_density(q.algebra(), rng),
                                               positive_density(q.algebra(), rng), positive_density(q.algebra(), rng),
                                               positive_density(q.algebra(), rng), {0.5}, opt);
    EXPECT_TRUE(mat.passed) << mat.worst_margin;
}

TEST(Refinement, NestedGridsLowerTheValueWithShrinkingDeltas)
{
    struct Case {
        MeanKind kind;
        double m0, m1, w, s0, s1;
    };
    const Case cases[] = {
        {MeanKind::Logarithmic, 1, 1, 1, 0.9, 0.5},
        {MeanKind::Geometric, 1, 1, 1, 0.95, 0.2},
        {MeanKind::Arithmetic, 2, 0.5, 1.5, 0.4, 0.1},
        {MeanKind::Logarithmic, 1, 3, 0.7, 0.1, 0.2},
    };
    for (const auto& c : cases) {
        const Derivation d = two_point_graph(c.m0, c.m1, c.w);
        double prev_d = kInf, prev_delta = kInf;
        for (int N : {8, 16, 32, 64}) {
            TransportOptions opt;
            opt.grid = N;
            const auto r = bb_distance(c.kind, d, two_point_density(d, c.s0), two_point_density(d, c.s1), opt);
            EXPECT_LE(r.distance, prev_d + opt.tol) << N;
            EXPECT_LT(r.certificates.refinement_delta, prev_delta) << N;
            prev_d = r.distance;
            prev_delta = r.certificates.refinement_delta;
        }
    }
    std::mt19937_64 rng(19);
    const Derivation q = qubit_depolarizing();
    const Density a = positive_density(q.algebra(), rng), b = positive_density(q.algebra(), rng);
    double prev = kInf;
    for (int N : {4, 8, 16}) {
        TransportOptions opt;
        opt.grid = N;
        opt.refine = false;
        const double v = bb_distance(MeanKind::Logarithmic, q, a, b, opt).distance;
        EXPECT_LE(v, prev + opt.tol);
        prev = v;
    }
}

TEST(Refinement, SmallerFloorNeverRaisesTheValue)
{
    // endpoints above every epsilon, so only the interior floor moves
    const Derivation d = two_point_graph();
    const Density a = two_point_density(d, 0.97), b = two_point_density(d, 0.03);
    double prev = kInf;
    for (double eps : {1e-2, 1e-3, 1e-4, 1e-5}) {
        TransportOptions opt;
        opt.eps_schedule = TransportOptions::schedule_to(eps);
        const auto r = bb_distance(MeanKind::Logarithmic, d, a, b, opt);
        EXPECT_FALSE(r.certificates.endpoints_regularized);
        EXPECT_LE(r.distance, prev + opt.tol);
        prev = r.distance;
    }
}

TEST(Transport, SingularEndpointIsRegularized)
{
    const Derivation d = two_point_graph();
    const auto r = bb_distance(MeanKind::Logarithmic, d, two_point_density(d, 1.0), two_point_density(d, 0.5));
    EXPECT_TRUE(r.certificates.endpoints_regularized);
    EXPECT_EQ(r.certificates.final_eps, 1e-5);
    EXPECT_TRUE(std::isfinite(r.distance));
    EXPECT_NEAR(r.distance, two_point_oracle(MeanKind::Logarithmic, d, two_point_density(d, 1.0),
                                             two_point_density(d, 0.5)),
                2e-2);
    EXPECT_EQ(TransportOptions::schedule_to(1e-4), (std::vector<double>{1e-2, 1e-3, 1e-4}));
}

TEST(Transport, Errors)
{
    const Derivation d = two_point_graph();
    const Density a = two_point_density(d, 0.3), b = two_point_density(d, 0.6);
    TransportOptions opt;
    opt.grid = 1;
    EXPECT_THROW(bb_distance(MeanKind::Logarithmic, d, a, b, opt), PreconditionError);
    opt = {};
    opt.eps_schedule.clear();
    EXPECT_THROW(bb_distance(MeanKind::Logarithmic, d, a, b, opt), PreconditionError);

    // two components: mass cannot move between them
    const Derivation split = Derivation::graph(make_graph(4, {{0, 1, 1.0}, {2, 3, 1.0}}, {1, 1, 1, 1}));
    const Density p(split.algebra(), Element::diagonal({0.4, 0.4, 0.1, 0.1}));
    const Density q(split.algebra(), Element::diagonal({0.1, 0.1, 0.4, 0.4}));
    EXPECT_THROW(bb_distance(MeanKind::Logarithmic, split, p, q), StructuralError);
    const Density p2(split.algebra(), Element::diagonal({0.6, 0.2, 0.1, 0.1}));
    EXPECT_NO_THROW(bb_distance(MeanKind::Logarithmic, split, p, p2));

    // an iteration budget of one stalls every stage
    opt = {};
    opt.max_iterations = 1;
    try {
        bb_distance(MeanKind::Logarithmic, d, two_point_density(d, 0.95), two_point_density(d, 0.05), opt);
        FAIL() << "expected non-convergence";
    } catch (const TransportNonConvergence& e) {
        EXPECT_FALSE(e.best().converged);
        EXPECT_TRUE(std::isfinite(e.best().distance));
        EXPECT_GT(e.best().distance, 0.0);
    }
}
