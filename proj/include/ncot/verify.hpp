#ifndef NCOT_VERIFY_HPP
#define NCOT_VERIFY_HPP

// Sampled checks of the curvature chain: the gradient estimate constant,
// contraction of W under the heat flow, EVI, geodesic convexity of the
// entropy, Talagrand and the Feller bound.
//
// Every W carries its refinement delta as error bar. A check records the
// most favourable margin over all choices of W values inside their bars, so
// it fails only when no admissible choice satisfies the inequality; the raw
// margin is kept in each row.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ncot/algebra.hpp"
#include "ncot/calculus.hpp"
#include "ncot/errors.hpp"
#include "ncot/functionals.hpp"
#include "ncot/operator_means.hpp"
#include "ncot/report.hpp"
#include "ncot/semigroup.hpp"
#include "ncot/transport.hpp"

namespace ncot {

struct GeBudget {
    int samples = 64;
    std::vector<double> t_grid{1e-3, 1e-2, 0.1, 0.5, 1.0};
    int ascent_steps = 40;
    std::uint64_t seed = 0;
};

struct GeEstimate {
    double K_hat = kInf;
    double t = 0.0;                 // where the minimum was attained (0 = extrapolated limit)
    int sample = -1;
    Element a;                      // witness
    Element rho;
    std::vector<double> per_sample; // ascended minimum of each sample, in order
    int skipped = 0;
    std::string note = "sampled upper bound on the best GE constant: GE(K) can only hold for K <= K_hat";
};

namespace detail {

inline double ge_quotient(MeanKind kind, const Derivation& d, const Element& a, const Density& rho, double t)
{
    const double num = rho_norm(kind, heat_flow(d, rho, t), d, d.derive(a));
    const double den = rho_norm(kind, rho, d, d.derive(heat_flow(d, a, t)));
    if (!(num > 0.0) || !(den > 0.0))
        return std::numeric_limits<double>::quiet_NaN();
    return (std::log(num) - std::log(den)) / t;   // (1/2t) log of the squared ratio
}

struct GeValue {
    double value = kInf;
    double t = 0.0;
};

// minimum over the grid plus the Richardson limit t -> 0 from the smallest t
inline GeValue ge_objective(MeanKind kind, const Derivation& d, const Element& a, const Density& rho,
                            const std::vector<double>& grid)
{
    GeValue best;
    for (double t : grid) {
        const double q = ge_quotient(kind, d, a, rho, t);
        if (std::isnan(q))
            return {std::numeric_limits<double>::quiet_NaN(), 0.0};
        if (q < best.value)
            best = {q, t};
    }
    const double t0 = *std::min_element(grid.begin(), grid.end());
    const double lim = 2.0 * ge_quotient(kind, d, a, rho, 0.5 * t0) - ge_quotient(kind, d, a, rho, t0);
    if (lim < best.value)
        best = {lim, 0.0};
    return best;
}

inline Density sample_density(const AlgebraSpec& A, std::mt19937_64& rng, int index)
{
    const double u = 1.0 / A.trace_of_unit();
    switch (index % 4) {
    case 0: return uniform_density(A);
    case 1: return random_density(A, rng, 0.5 * u);
    case 2: return random_density(A, rng, 0.05 * u);
    default: return random_density(A, rng, 1e-3 * u);
    }
}

inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

/// max of f over the corners of the boxes [lo_i, hi_i]
inline double favourable(const std::vector<BarredDistance>& w, const std::function<double(const std::vector<double>&)>& f)
{
    const std::size_t n = w.size();
    double best = -kInf;
    std::vector<double> v(n);
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        for (std::size_t i = 0; i < n; ++i)
            v[i] = (mask >> i) & 1 ? w[i].hi() : w[i].lo();
        best = std::max(best, f(v));
    }
    return best;
}

inline void require_positive(const Density& rho, const char* what)
{
    if (!(rho.min_eigenvalue() > 0.0))
        throw PreconditionError(std::string(what) + " must be strictly positive");
}

inline void require_irreducible(const Derivation& d)
{
    if (!d.irreducible())
        throw PreconditionError("generator is reducible (P_t fixes more than the constants)");
}

// int_0^1 exp(-2 K s t) ds
inline double decay_average(double K, double t)
{
    const double x = 2.0 * K * t;
    return std::abs(x) < 1e-8 ? 1.0 - 0.5 * x : -std::expm1(-x) / x;
}

} // namespace detail

/// Minimum of (1/2t)[log ||da||^2_{P_t rho} - log ||d P_t a||^2_rho] over
/// seeded samples, each refined by a seeded local descent. Sample i only
/// depends on (seed, i), so the estimate is nonincreasing in the sample count.
inline GeEstimate estimate_ge_constant(MeanKind kind, const Derivation& d, const GeBudget& budget = {})
{
    detail::require_irreducible(d);
    if (budget.t_grid.empty())
        throw PreconditionError("t grid must not be empty");
    for (double t : budget.t_grid)
        if (!(t > 0.0))
            throw PreconditionError("t grid must lie in (0, T]");
    const AlgebraSpec& A = d.algebra();
    GeEstimate est;
    for (int i = 0; i < budget.samples; ++i) {
        auto rng = detail::stream(budget.seed, static_cast<std::uint64_t>(i));
        Element a = random_hermitian(A, rng);
        Density rho = detail::sample_density(A, rng, i);
        auto cur = detail::ge_objective(kind, d, a, rho, budget.t_grid);
        if (std::isnan(cur.value)) {
            ++est.skipped;
            est.per_sample.push_back(kInf);
            continue;
        }
        double step = 0.3;
        const double floor = 1e-4 / A.trace_of_unit();
        for (int s = 0; s < budget.ascent_steps; ++s) {
            const Element a2 = a + (step * lp_norm(A, a, 2.0)) * random_hermitian(A, rng);
            const double mix = step * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            const Density r2 = Density::normalized(
                A, ((1 - mix) * rho.element() + mix * random_density(A, rng, floor).element()).hermitian_part());
            const auto v = detail::ge_objective(kind, d, a2, r2, budget.t_grid);
            if (!std::isnan(v.value) && v.value < cur.value) {
                cur = v;
                a = a2;
                rho = r2;
            } else {
                step *= 0.85;
            }
        }
        est.per_sample.push_back(cur.value);
        if (cur.value < est.K_hat) {
            est.K_hat = cur.value;
            est.t = cur.t;
            est.sample = i;
            est.a = a;
            est.rho = rho.element();
        }
    }
    if (est.sample < 0)
        throw NonConvergenceError("all GE samples were degenerate (d a = 0)", kInf);
    return est;
}

/// W(P_T rho0, P_T rho1) <= exp(-K T) W(rho0, rho1) on the grid.
inline CheckReport check_contraction(MeanKind kind, const Derivation& d, const Density& rho0, const Density& rho1,
                                     double K, const std::vector<double>& t_grid, const TransportOptions& opt = {})
{
    CheckReport rep;
    rep.name = "contraction";
    rep.tolerance = 3.0 * opt.tol;
    const auto w0 = barred(bb_distance(kind, d, rho0, rho1, opt));
    for (double T : t_grid) {
        if (!(T >= 0.0))
            throw PreconditionError("contraction times must be >= 0");
        const auto wt = T == 0.0 ? w0 : barred(bb_distance(kind, d, heat_flow(d, rho0, T), heat_flow(d, rho1, T), opt));
        const double f = std::exp(-K * T);
        const double raw = f * w0.value - wt.value;
        const double folded = T == 0.0 ? raw : f * w0.hi() - wt.lo();
        rep.record(folded, {{"T", T}, {"W0", w0.value}, {"WT", wt.value}, {"raw_margin", raw}});
    }
    return rep;
}

struct EviOptions {
    double h = 1e-2;          // forward difference step
    bool pointwise = true;
    bool integrated = true;
    bool regularization = true;
};

/// EVI_K of the entropy along the heat flow against a fixed sigma, in
/// pointwise form (forward differences with one Richardson level), the
/// integrated form, and the entropy regularization bound.
inline CheckReport check_evi(MeanKind kind, const Derivation& d, const Density& rho, const Density& sigma, double K,
                             const std::vector<double>& t_grid, const EviOptions& evi = {},
                             const TransportOptions& opt = {})
{
    detail::require_positive(rho, "rho");
    detail::require_positive(sigma, "sigma");
    if (!(evi.h > 0.0))
        throw PreconditionError("finite difference step must be positive");
    const AlgebraSpec& A = d.algebra();
    CheckReport rep;
    rep.name = "evi";
    rep.tolerance = 3.0 * opt.tol;
    const double ent_sigma = entropy(A, sigma);
    auto W = [&](double t) { return barred(bb_distance(kind, d, heat_flow(d, rho, t), sigma, opt)); };
    const auto w_start = W(0.0);
    for (double t : t_grid) {
        if (!(t >= 0.0))
            throw PreconditionError("EVI times must be >= 0");
        const double ent_t = entropy(A, heat_flow(d, rho, t));
        const auto w = t == 0.0 ? w_start : W(t);
        if (evi.pointwise) {
            const double h = evi.h;
            const auto wh = W(t + h), wh2 = W(t + 0.5 * h);
            // Richardson of the forward difference: (4 W^2(t+h/2) - 3 W^2(t) - W^2(t+h)) / h
            auto margin = [&](const std::vector<double>& v) {
                const double fd = (4 * v[2] * v[2] - 3 * v[0] * v[0] - v[1] * v[1]) / h;
                return ent_sigma - (0.5 * fd + 0.5 * K * v[0] * v[0] + ent_t);
            };
            const double raw = margin({w.value, wh.value, wh2.value});
            rep.record(detail::favourable({w, wh, wh2}, margin),
                       {{"t", t}, {"W", w.value}, {"ent_t", ent_t}, {"ent_sigma", ent_sigma}, {"raw_margin", raw}},
                       "pointwise");
        }
        if (evi.integrated && t > 0.0) {
            const double c = detail::decay_average(K, t);
            auto margin = [&](const std::vector<double>& v) {
                return c * v[1] * v[1] - 2 * t * (ent_t - ent_sigma) - v[0] * v[0];
            };
            const double raw = margin({w.value, w_start.value});
            rep.record(detail::favourable({w, w_start}, margin),
                       {{"t", t}, {"W", w.value}, {"W0", w_start.value}, {"raw_margin", raw}}, "integrated");
        }
        if (evi.regularization && t > 0.0) {
            // Ent(P_t sigma) <= Ent(rho) + (1/2t) int_0^1 e^{-2Kst} ds W(rho, sigma)^2
            const double c = detail::decay_average(K, t);
            const double ent_flow = entropy(A, heat_flow(d, sigma, t));
            const double ent_rho = entropy(A, rho);
            auto margin = [&](const std::vector<double>& v) { return ent_rho + c * v[0] * v[0] / (2 * t) - ent_flow; };
            const double raw = margin({w_start.value});
            rep.record(detail::favourable({w_start}, margin), {{"t", t}, {"W0", w_start.value}, {"raw_margin", raw}},
                       "regularization");
        }
    }
    return rep;
}

/// Ent(rho_t) <= (1-t) Ent(rho0) + t Ent(rho1) - (K/2) t (1-t) W^2 along the
/// computed constant speed geodesic.
inline CheckReport check_geodesic_convexity(MeanKind kind, const Derivation& d, const Density& rho0,
                                            const Density& rho1, double K, const TransportOptions& opt = {})
{
    detail::require_positive(rho0, "rho0");
    detail::require_positive(rho1, "rho1");
    const AlgebraSpec& A = d.algebra();
    CheckReport rep;
    rep.name = "geodesic_convexity";
    rep.tolerance = 3.0 * opt.tol;
    const auto w = barred(bb_distance(kind, d, rho0, rho1, opt));
    const DiscretePath path = geodesic(kind, d, rho0, rho1, opt);
    const double e0 = entropy(A, rho0), e1 = entropy(A, rho1);
    const int N = path.grid();
    for (int k = 0; k <= N; ++k) {
        const double t = static_cast<double>(k) / N;
        const double et = entropy(A, path.densities[k].hermitian_part());
        auto margin = [&](const std::vector<double>& v) {
            return (1 - t) * e0 + t * e1 - 0.5 * K * t * (1 - t) * v[0] * v[0] - et;
        };
        rep.record(detail::favourable({w}, margin), {{"t", t}, {"ent_t", et}, {"raw_margin", margin({w.value})}});
    }
    return rep;
}

/// W(rho, 1/tau(1))^2 <= (2/K)(Ent(rho) + log tau(1)); the log term is the
/// entropy of the equilibrium, so on a normalized trace this is the usual form.
inline CheckReport check_talagrand(MeanKind kind, const Derivation& d, const Density& rho, double K,
                                   const TransportOptions& opt = {})
{
    detail::require_irreducible(d);
    if (!(K > 0.0))
        throw PreconditionError("Talagrand needs K > 0");
    const AlgebraSpec& A = d.algebra();
    CheckReport rep;
    rep.name = "talagrand";
    rep.tolerance = 3.0 * opt.tol;
    const double rel_ent = entropy(A, rho) + std::log(A.trace_of_unit());
    const auto w = barred(bb_distance(kind, d, rho, uniform_density(A), opt));
    auto margin = [&](const std::vector<double>& v) { return 2.0 / K * rel_ent - v[0] * v[0]; };
    rep.record(detail::favourable({w}, margin),
               {{"K", K}, {"W", w.value}, {"relative_entropy", rel_ent}, {"raw_margin", margin({w.value})}});
    return rep;
}

/// int_0^t exp(kappa s) ds
inline double exp_integral(double kappa, double t)
{
    return std::abs(kappa * t) < 1e-8 ? t * (1 + 0.5 * kappa * t) : std::expm1(kappa * t) / kappa;
}

/// ||d P_t a||^2_rho <= ||a||_inf^2 ||rho||_1 / (2 I_{2K}(t)) on sampled densities.
inline CheckReport feller_check(MeanKind kind, const Derivation& d, const Element& a, const std::vector<double>& t_grid,
                                double K, int samples = 16, std::uint64_t seed = 0)
{
    const AlgebraSpec& A = d.algebra();
    CheckReport rep;
    rep.name = "feller";
    rep.seed = seed;
    const double a_inf = lp_norm(A, a, kInf);
    for (double t : t_grid) {
        if (!(t > 0.0))
            throw PreconditionError("Feller times must be > 0");
        const double bound = a_inf * a_inf / (2.0 * exp_integral(2.0 * K, t));
        const Element pa = heat_flow(d, a, t);
        for (int i = 0; i < samples; ++i) {
            auto rng = detail::stream(seed, static_cast<std::uint64_t>(i));
            const Density rho = detail::sample_density(A, rng, i);
            const double lhs = RhoHat(kind, d, rho).norm2(d.derive(pa));
            const double rhs = bound * lp_norm(A, rho.element(), 1.0);
            rep.record(rhs - lhs, {{"t", t}, {"sample", static_cast<double>(i)}, {"lhs", lhs}, {"rhs", rhs}});
        }
    }
    rep.tolerance = 1e-10 * std::max(1.0, a_inf * a_inf);
    return rep;
}

} // namespace ncot

#endif // NCOT_VERIFY_HPP
