#ifndef NCOT_OPERATOR_MEANS_HPP
#define NCOT_OPERATOR_MEANS_HPP

// rho-hat = theta(L(rho), R(rho)) acting on the tangent space, its inverse,
// the induced norm ||xi||_rho and divided-difference (chain rule) multipliers.
// rho-hat is never materialized: it acts by conjugation into the eigenbasis
// of rho followed by a Hadamard product with the table theta(lambda_k, lambda_l).

#include <cmath>
#include <variant>

#include "ncot/algebra.hpp"
#include "ncot/calculus.hpp"
#include "ncot/means.hpp"

namespace ncot {

struct StrictSolve {};
struct TikhonovSolve {
    double eps = 0.0;
};
using SolveMode = std::variant<StrictSolve, TikhonovSolve>;

inline constexpr double kMultiplierCutoff = 1e-12;
inline constexpr double kKernelMassTol = 1e-9;

/// rho-hat for a fixed density (or any positive element) and mean.
class RhoHat {
public:
    RhoHat(MeanKind kind, const Derivation& d, const Element& rho)
        : kind_(kind), d_(d), spectrum_(clamped_psd_spectrum(rho))
    {
        check_shape(d.algebra(), rho);
        max_multiplier_ = 0.0;
        for (const auto& v : spectrum_.values)
            for (Eigen::Index k = 0; k < v.size(); ++k)
                max_multiplier_ = std::max(max_multiplier_, v[k]);
    }

    RhoHat(MeanKind kind, const Derivation& d, const Density& rho)
        : kind_(kind), d_(d), spectrum_(rho.spectrum())
    {
        max_multiplier_ = std::max(0.0, spectrum_.max_value());
    }

    MeanKind kind() const noexcept { return kind_; }
    const Spectrum& spectrum() const noexcept { return spectrum_; }

    TangentVector apply(const TangentVector& xi) const
    {
        return d_.apply_multiplier(spectrum_, xi, [this](double s, double t) { return mean_value(kind_, s, t); });
    }

    /// Solves rho-hat xi = m.
    TangentVector solve(const TangentVector& m, const SolveMode& mode = StrictSolve{}) const
    {
        if (const auto* tk = std::get_if<TikhonovSolve>(&mode)) {
            const double eps = tk->eps;
            return d_.apply_multiplier(spectrum_, m,
                                       [this, eps](double s, double t) { return 1.0 / (mean_value(kind_, s, t) + eps); });
        }
        // theta(s, t) <= max(s, t), so max over the spectrum bounds every multiplier
        const double cut = kMultiplierCutoff * max_multiplier_;
        const TangentVector kernel_part = d_.apply_multiplier(
            spectrum_, m, [this, cut](double s, double t) { return mean_value(kind_, s, t) < cut ? 1.0 : 0.0; });
        const double mn = std::sqrt(d_.norm2(m));
        if (std::sqrt(d_.norm2(kernel_part)) > kKernelMassTol * mn)
            throw SingularityError("momentum has mass on the kernel of rho-hat (infinite action)");
        return d_.apply_multiplier(spectrum_, m, [this, cut](double s, double t) {
            const double th = mean_value(kind_, s, t);
            return th < cut ? 0.0 : 1.0 / th;
        });
    }

    /// ||xi||_rho^2 = <rho-hat xi, xi>
    double norm2(const TangentVector& xi) const { return std::max(0.0, d_.inner(xi, apply(xi)).real()); }

    /// Gradient of mu -> <xi, mu-hat xi> at this rho, as a hermitian element
    /// G with directional derivative tau(G h) in direction h. Needs a
    /// strictly positive spectrum when theta is not differentiable at 0.
    Element gradient(const TangentVector& xi) const
    {
        d_.check(xi);
        const AlgebraSpec& A = d_.algebra();
        if (d_.backend() == Backend::Graph) {
            const auto& g = d_.graph_spec();
            std::vector<double> out(g.nodes, 0.0);
            const Matrix& e = xi.parts[0];
            for (int x = 0; x < g.nodes; ++x) {
                const double sx = spectrum_.values[x][0];
                double acc = 0.0;
                for (int y = 0; y < g.nodes; ++y)
                    if (g.b(x, y) > 0.0)
                        acc += g.b(x, y) * mean_partial_first(kind_, sx, spectrum_.values[y][0]) *
                               (std::norm(e(x, y)) + std::norm(e(y, x)));
                out[x] = acc / (2.0 * g.m[x]);
            }
            return Element::diagonal(out);
        }
        const std::size_t nb = A.num_blocks();
        std::vector<Matrix> acc;
        for (std::size_t i = 0; i < nb; ++i)
            acc.push_back(Matrix::Zero(A.dim(i), A.dim(i)));
        // first divided differences of theta in one argument:
        // D(k, p, l) = (theta(l_k, l_l) - theta(l_p, l_l)) / (l_k - l_p)
        std::vector<std::vector<RealMatrix>> dd(nb);
        for (std::size_t i = 0; i < nb; ++i) {
            const auto& lam = spectrum_.values[i];
            const Eigen::Index n = lam.size();
            dd[i].assign(n, RealMatrix(n, n));
            for (Eigen::Index l = 0; l < n; ++l)
                for (Eigen::Index k = 0; k < n; ++k)
                    for (Eigen::Index p = 0; p < n; ++p)
                        dd[i][l](k, p) = divided_difference(
                            [&](double s) { return mean_value(kind_, s, lam[l]); },
                            [&](double s) { return mean_partial_first(kind_, s, lam[l]); }, lam[k], lam[p]);
        }
        for (std::size_t c = 0; c < xi.parts.size(); ++c) {
            const std::size_t i = c % nb;
            const Matrix& U = spectrum_.vectors[i];
            const Matrix Y = U.adjoint() * xi.parts[c] * U;
            const Eigen::Index n = Y.rows();
            Matrix C = Matrix::Zero(n, n);
            for (Eigen::Index k = 0; k < n; ++k)
                for (Eigen::Index p = 0; p < n; ++p) {
                    cplx s = 0.0;
                    for (Eigen::Index l = 0; l < n; ++l)
                        s += dd[i][l](k, p) * (Y(p, l) * std::conj(Y(k, l)) + std::conj(Y(l, p)) * Y(l, k));
                    C(k, p) = s;
                }
            Matrix Gt = C.transpose();
            Gt = 0.5 * (Gt + Gt.adjoint()).eval();
            // block weights cancel between the inner product and tau(G h)
            acc[i] += U * Gt * U.adjoint();
        }
        return Element(std::move(acc)).hermitian_part();
    }

private:
    MeanKind kind_;
    Derivation d_;
    Spectrum spectrum_;
    double max_multiplier_ = 0.0;
};

inline TangentVector rho_hat_apply(MeanKind kind, const Density& rho, const Derivation& d, const TangentVector& xi)
{
    return RhoHat(kind, d, rho).apply(xi);
}

inline TangentVector rho_hat_solve(MeanKind kind, const Density& rho, const Derivation& d, const TangentVector& m,
                                   const SolveMode& mode = StrictSolve{})
{
    return RhoHat(kind, d, rho).solve(m, mode);
}

/// ||xi||_rho
inline double rho_norm(MeanKind kind, const Density& rho, const Derivation& d, const TangentVector& xi)
{
    return std::sqrt(RhoHat(kind, d, rho).norm2(xi));
}

/// f~(L(a), R(a)) xi with the quantum derivative f~(s, t) = (f(s) - f(t))/(s - t).
template <class F, class DF>
TangentVector divided_difference_apply(F&& f, DF&& df, const Element& a, const Derivation& d, const TangentVector& xi)
{
    check_shape(d.algebra(), a);
    const Spectrum s = eigh(a);
    return d.apply_multiplier(s, xi, [&](double x, double y) {
        const double v = divided_difference(f, df, x, y);
        if (!std::isfinite(v))
            throw DomainError("divided difference undefined on the spectrum");
        return v;
    });
}

} // namespace ncot

#endif // NCOT_OPERATOR_MEANS_HPP
