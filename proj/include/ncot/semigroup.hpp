#ifndef NCOT_SEMIGROUP_HPP
#define NCOT_SEMIGROUP_HPP

// Heat semigroup P_t = exp(-tL) from the cached spectral decomposition of
// the generator, and the entropy dissipation identity.

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/special_functions/legendre.hpp>

#include "ncot/algebra.hpp"
#include "ncot/calculus.hpp"
#include "ncot/errors.hpp"
#include "ncot/functionals.hpp"

namespace ncot {

inline constexpr double kPositivityTol = 1e-9;

namespace detail {

inline RealVector heat_coords(const Derivation& d, const RealVector& v, double t)
{
    const auto& g = d.generator();
    RealVector y = g.eigenvectors.transpose() * v;
    for (Eigen::Index k = 0; k < y.size(); ++k)
        y[k] *= std::exp(-t * std::max(0.0, g.eigenvalues[k]));
    return g.eigenvectors * y;
}

} // namespace detail

/// P_t x for any element (hermitian and anti-hermitian parts separately).
inline Element heat_flow(const Derivation& d, const Element& x, double t)
{
    if (!(t >= 0.0))
        throw PreconditionError("heat flow needs t >= 0");
    const AlgebraSpec& A = d.algebra();
    check_shape(A, x);
    if (t == 0.0)
        return x;
    const Element h1 = x.hermitian_part();
    Element out = from_coords(A, detail::heat_coords(d, to_coords(A, h1), t));
    if (!x.hermitian()) {
        const Element h2 = cplx(0.0, -1.0) * (x - h1);
        out = out + cplx(0.0, 1.0) * from_coords(A, detail::heat_coords(d, to_coords(A, h2.hermitian_part()), t));
    }
    return out;
}

/// P_t rho as a density; a clearly negative eigenvalue means the generator is invalid.
inline Density heat_flow(const Derivation& d, const Density& rho, double t)
{
    const AlgebraSpec& A = d.algebra();
    const Element x = heat_flow(d, rho.element(), t).hermitian_part();
    const Spectrum s = eigh(x);
    if (s.min_value() < -kPositivityTol)
        throw PositivityError("heat flow produced eigenvalue " + std::to_string(s.min_value()));
    Spectrum c = s;
    for (auto& v : c.values)
        v = v.cwiseMax(0.0);
    return Density::normalized(A, rebuild(c, [](double l) { return l; }));
}

/// Gauss-Legendre nodes and weights of order q on [-1, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int q)
{
    if (q < 1)
        throw PreconditionError("quadrature order must be >= 1");
    const auto zeros = boost::math::legendre_p_zeros<double>(q);
    std::vector<double> x, w;
    for (double z : zeros) {
        const double dp = boost::math::legendre_p_prime<double>(q, z);
        const double wz = 2.0 / ((1.0 - z * z) * dp * dp);
        if (z == 0.0) {
            x.push_back(0.0);
            w.push_back(wz);
        } else {
            x.push_back(-z);
            w.push_back(wz);
            x.push_back(z);
            w.push_back(wz);
        }
    }
    // ascending order
    std::vector<std::size_t> idx(x.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
        idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> xs, ws;
    for (auto i : idx) {
        xs.push_back(x[i]);
        ws.push_back(w[i]);
    }
    return {xs, ws};
}

/// |Ent(rho) - Ent(P_t rho) - int_0^t I(P_s rho) ds| with q-point Gauss-Legendre
/// in the variable v = sqrt(s / t).
inline double dissipation_residual(const Derivation& d, const Element& rho, double t, int q = 32)
{
    const AlgebraSpec& A = d.algebra();
    if (!(t >= 0.0))
        throw PreconditionError("dissipation residual needs t >= 0");
    if (t == 0.0)
        return 0.0;
    const auto [x, w] = gauss_legendre(q);
    // s = t v^2 pushes the near-singularity of I at s ~ -lambda_min / rate
    // away from the interval; the transformed integrand stays analytic
    double integral = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = 0.5 * (x[i] + 1.0);
        const double s = t * v * v;
        const FisherValue f = fisher_information(d, heat_flow(d, rho, s).hermitian_part());
        if (!f.finite)
            return kInf;
        integral += 0.5 * w[i] * 2.0 * t * v * f.value;
    }
    const Element rt = heat_flow(d, rho, t).hermitian_part();
    return std::abs(entropy(A, rho) - entropy(A, rt) - integral);
}

inline double dissipation_residual(const Derivation& d, const Density& rho, double t, int q = 32)
{
    return dissipation_residual(d, rho.element(), t, q);
}

} // namespace ncot

#endif // NCOT_SEMIGROUP_HPP
