#ifndef NCOT_FUNCTIONALS_HPP
#define NCOT_FUNCTIONALS_HPP

// Entropy, Fisher information, carre du champ, the test-algebra seminorm
// ||a||_theta, trace-inequality gaps and the Connes-type lower bound.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include "ncot/action.hpp"
#include "ncot/algebra.hpp"
#include "ncot/calculus.hpp"
#include "ncot/errors.hpp"
#include "ncot/means.hpp"
#include "ncot/operator_means.hpp"

namespace ncot {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// tau(rho log rho) with 0 log 0 = 0, for any positive element.
inline double entropy(const AlgebraSpec& A, const Element& rho)
{
    check_shape(A, rho);
    const Spectrum s = clamped_psd_spectrum(rho);
    double e = 0.0;
    for (std::size_t i = 0; i < s.values.size(); ++i)
        for (Eigen::Index k = 0; k < s.values[i].size(); ++k) {
            const double l = s.values[i][k];
            if (l > 0.0)
                e += A.weight(i) * l * std::log(l);
        }
    return e;
}

inline double entropy(const AlgebraSpec& A, const Density& rho) { return entropy(A, rho.element()); }

struct FisherValue {
    double value = 0.0;
    bool finite = true;
};

inline constexpr double kFisherEigenTol = 1e-12;
inline constexpr double kFisherMassTol = 1e-10;

/// E(rho, log rho) through the divided difference of log; +inf when
/// d rho has mass on a pair with a vanishing eigenvalue.
inline FisherValue fisher_information(const Derivation& d, const Element& rho)
{
    const Spectrum s = clamped_psd_spectrum(rho);
    const double cut = kFisherEigenTol * std::max(1e-300, s.max_value());
    const TangentVector drho = d.derive(rho);
    const double total = d.norm2(drho);
    if (total == 0.0)
        return {0.0, true};
    const TangentVector singular =
        d.apply_multiplier(s, drho, [cut](double x, double y) { return (x < cut || y < cut) ? 1.0 : 0.0; });
    if (d.norm2(singular) > kFisherMassTol * total)
        return {kInf, false};
    const TangentVector w = d.apply_multiplier(s, drho, [cut](double x, double y) {
        if (x < cut || y < cut)
            return 0.0;
        return divided_difference([](double t) { return std::log(t); }, [](double t) { return 1.0 / t; }, x, y);
    });
    return {std::max(0.0, d.inner(drho, w).real()), true};
}

inline FisherValue fisher_information(const Derivation& d, const Density& rho)
{
    return fisher_information(d, rho.element());
}

/// Gamma(a): tau(x Gamma(a)) = <x . da, da>_H.
inline Element carre_du_champ(const Derivation& d, const Element& a)
{
    return d.carre_du_champ_vector(d.derive(a));
}

struct SolverBudget {
    int max_iterations = 500;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    int restarts = 4;
};

struct SeminormResult {
    double value = 0.0;        // certified lower bound of ||a||_theta
    double upper_bound = 0.0;  // from the final linearization
    Element argmax;
    bool converged = false;
    int iterations = 0;
};

namespace detail {

// top eigenpair over all blocks of a hermitian element, returned as the
// density e e^* / w_i of the best block
inline std::pair<double, Element> top_vertex(const AlgebraSpec& A, const Element& g)
{
    const Spectrum s = eigh(g);
    double best = -kInf;
    std::size_t bi = 0;
    Eigen::Index bk = 0;
    for (std::size_t i = 0; i < s.values.size(); ++i)
        for (Eigen::Index k = 0; k < s.values[i].size(); ++k)
            if (s.values[i][k] > best) {
                best = s.values[i][k];
                bi = i;
                bk = k;
            }
    Element v = Element::zero(A);
    std::vector<Matrix> blocks = v.blocks();
    const Matrix e = s.vectors[bi].col(bk);
    blocks[bi] = (e * e.adjoint()) / A.weight(bi);
    return {best, Element(std::move(blocks)).hermitian_part()};
}

// golden-section maximization of a concave function on [0, 1]
template <class F>
double golden_max(F&& f, double lo = 0.0, double hi = 1.0, int iters = 60)
{
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - r * (b - a), dd = a + r * (b - a);
    double fc = f(c), fd = f(dd);
    for (int i = 0; i < iters && b - a > 1e-12; ++i) {
        if (fc < fd) {
            a = c;
            c = dd;
            fc = fd;
            dd = a + r * (b - a);
            fd = f(dd);
        } else {
            b = dd;
            dd = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        }
    }
    const double x = 0.5 * (a + b);
    // endpoints can win for monotone restrictions
    double bx = x, bf = f(x);
    for (double e : {lo, hi}) {
        const double fe = f(e);
        if (fe > bf) {
            bf = fe;
            bx = e;
        }
    }
    return bx;
}

} // namespace detail

/// sup over densities of ||da||_rho by conditional gradient. value is a
/// lower bound; upper_bound uses the duality gap of the last linearization.
inline SeminormResult theta_seminorm(MeanKind kind, const Derivation& d, const Element& a,
                                     const SolverBudget& budget = {})
{
    const AlgebraSpec& A = d.algebra();
    check_shape(A, a);
    const TangentVector da = d.derive(a);
    SeminormResult res;
    Element rho = uniform_density(A).element();
    res.argmax = rho;
    if (d.norm2(da) == 0.0) {
        res.converged = true;
        return res;
    }
    auto f = [&](const Element& r) { return RhoHat(kind, d, r).norm2(da); };
    double fv = f(rho);
    const double reg = 1e-12;
    double upper = kInf;
    for (int it = 0; it < budget.max_iterations; ++it) {
        res.iterations = it + 1;
        // gradient at a slightly regularized point keeps log-type means finite
        const Element g = RhoHat(kind, d, regularize(A, rho, reg)).gradient(da);
        auto [lmax, vertex] = detail::top_vertex(A, g);
        const double gap = std::max(0.0, lmax - trace_real(A, g * rho));
        upper = std::min(upper, fv + gap);
        if (gap <= budget.tol * std::max(fv, 1e-300)) {
            res.converged = true;
            break;
        }
        const Element dir = vertex - rho;
        const double gamma = detail::golden_max([&](double t) { return f(rho + t * dir); });
        const Element next = (rho + gamma * dir).hermitian_part();
        const double fn = f(next);
        if (!(fn > fv))
            break;
        rho = next;
        fv = fn;
    }
    res.value = std::sqrt(fv);
    res.upper_bound = std::sqrt(std::max(fv, upper));
    res.argmax = rho;
    if (!res.converged)
        res.converged = res.upper_bound <= res.value * (1.0 + budget.tol);
    return res;
}

/// Ent(rho) - [tau(a rho) - log tau(e^a)] >= 0, requires tau(1) = 1.
inline double entropy_variational_gap(const AlgebraSpec& A, const Density& rho, const Element& a)
{
    if (std::abs(A.trace_of_unit() - 1.0) > 1e-12)
        throw PreconditionError("the variational formula needs tau(1) = 1");
    check_shape(A, a);
    const Spectrum s = eigh(a);
    const double top = s.max_value();
    double z = 0.0;
    for (std::size_t i = 0; i < s.values.size(); ++i)
        for (Eigen::Index k = 0; k < s.values[i].size(); ++k)
            z += A.weight(i) * std::exp(s.values[i][k] - top);
    const double log_z = top + std::log(z);
    return entropy(A, rho) - (trace_real(A, a * rho.element()) - log_z);
}

/// tau(f'(r1)(r1 - r0)) - tau(f(r1) - f(r0)) for convex f.
template <class F, class DF>
double klein_gap(const AlgebraSpec& A, F&& f, DF&& df, const Element& r0, const Element& r1)
{
    const Element fp1 = functional_calculus(A, r1, df);
    const Element f1 = functional_calculus(A, r1, f);
    const Element f0 = functional_calculus(A, r0, f);
    return trace_real(A, fp1 * (r1 - r0)) - trace_real(A, f1 - f0);
}

struct BoundResult {
    double value = 0.0;       // certified lower bound
    double upper_bound = kInf;
    bool converged = false;
    int iterations = 0;
};

/// ||a||_AM^2 = 1/2 ||Gamma(a) + Gamma(a^*)||_inf
inline double am_seminorm_squared(const Derivation& d, const Element& a)
{
    const Element g = carre_du_champ(d, a) + carre_du_champ(d, a.adjoint());
    return 0.5 * lp_norm(d.algebra(), g, kInf);
}

/// sup{ |tau(a (rho - sigma))| : ||a||_AM <= 1 }. Works on the dual
/// problem min_nu <D, K_nu^+ D> (K_nu the AM-weighted Laplacian) by
/// conditional gradient; each potential a = K_nu^+ D yields a certified
/// lower bound and each nu an upper bound.
inline BoundResult connes_lower_bound(const Derivation& d, const Element& rho, const Element& sigma,
                                      const SolverBudget& budget = {})
{
    const AlgebraSpec& A = d.algebra();
    const RealVector delta = to_coords(A, (rho - sigma).hermitian_part());
    BoundResult res;
    if (delta.norm() == 0.0) {
        res.upper_bound = 0.0;
        res.converged = true;
        return res;
    }
    const RealMatrix P = kernel_projector(d);
    if ((P * delta).norm() > kRangeTol * delta.norm()) {
        res.value = kInf;
        res.upper_bound = kInf;
        res.converged = true;
        return res;
    }
    auto dual = [&](const Element& nu) { return ActionForm(MeanKind::Arithmetic, d, nu).value(delta); };
    auto lower = [&](const RealVector& phi) {
        const double c = am_seminorm_squared(d, from_coords(A, phi));
        return c > 0.0 ? std::abs(phi.dot(delta)) / std::sqrt(c) : 0.0;
    };
    Element nu = uniform_density(A).element();
    double gv = dual(nu);
    for (int it = 0; it < budget.max_iterations; ++it) {
        res.iterations = it + 1;
        const RealVector phi = ActionForm(MeanKind::Arithmetic, d, nu).potential(delta);
        res.value = std::max(res.value, lower(phi));
        res.upper_bound = std::min(res.upper_bound, std::sqrt(gv));
        if (res.upper_bound - res.value <= budget.tol * res.upper_bound) {
            res.converged = true;
            break;
        }
        // the gradient of g at nu is -X(phi), X = (Gamma(phi) + Gamma(phi^*))/2
        const Element ph = from_coords(A, phi);
        const Element X = 0.5 * (carre_du_champ(d, ph) + carre_du_champ(d, ph.adjoint()));
        auto [lmax, vertex] = detail::top_vertex(A, X.hermitian_part());
        (void)lmax;
        const Element dir = vertex - nu;
        // keep nu strictly inside so that K_nu keeps its kernel
        const double gamma = detail::golden_max(
            [&](double t) {
                try {
                    return -dual(nu + t * dir);
                } catch (const SingularityError&) {
                    return -kInf;
                }
            },
            0.0, 0.999);
        const Element next = (nu + gamma * dir).hermitian_part();
        const double gn = dual(next);
        if (!(gn < gv))
            break;
        nu = next;
        gv = gn;
    }
    res.upper_bound = std::min(res.upper_bound, std::sqrt(gv));
    if (!res.converged)
        res.converged = res.upper_bound - res.value <= budget.tol * res.upper_bound;
    return res;
}

} // namespace ncot

#endif // NCOT_FUNCTIONALS_HPP
