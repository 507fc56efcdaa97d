#ifndef NCOT_ACTION_HPP
#define NCOT_ACTION_HPP

// The weighted Laplacian K_mu = d^* mu-hat d on hermitian elements, in the
// orthonormal coordinates of to_coords(). For a fixed midpoint density mu
// the momentum-form action <m, mu-hat^{-1} m> under div m = c equals
// <c, K_mu^+ c>, attained at m = mu-hat d phi with K_mu phi = c.

#include <cmath>

#include <Eigen/Dense>

#include "ncot/algebra.hpp"
#include "ncot/calculus.hpp"
#include "ncot/errors.hpp"
#include "ncot/means.hpp"
#include "ncot/operator_means.hpp"

namespace ncot {

inline constexpr double kRangeTol = 1e-9;

/// Dense matrix of K_mu in coordinates.
inline RealMatrix action_matrix(MeanKind kind, const Derivation& d, const Element& mu)
{
    const AlgebraSpec& A = d.algebra();
    const int n = A.real_dim();
    RealMatrix K = RealMatrix::Zero(n, n);
    if (d.backend() == Backend::Graph) {
        const auto& g = d.graph_spec();
        const auto v = mu.values();
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y) {
                if (!(g.b(x, y) > 0.0))
                    continue;
                const double w = g.b(x, y) * mean_value(kind, std::max(v[x], 0.0), std::max(v[y], 0.0));
                K(x, x) += w / g.m[x];
                K(x, y) -= w / std::sqrt(g.m[x] * g.m[y]);
            }
        return K;
    }
    const RhoHat rh(kind, d, mu);
    for (int j = 0; j < n; ++j)
        K.col(j) = to_coords(A, d.divergence(rh.apply(d.derive(basis_element(A, j)))).hermitian_part());
    return 0.5 * (K + K.transpose());
}

/// Orthogonal projector onto ker d (the kernel of the generator).
inline RealMatrix kernel_projector(const Derivation& d)
{
    const auto& g = d.generator();
    const RealMatrix Vk = g.eigenvectors.leftCols(g.kernel_dim);
    return Vk * Vk.transpose();
}

/// Factorized K_mu; solves K_mu phi = c on the complement of ker d.
class ActionForm {
public:
    ActionForm(MeanKind kind, const Derivation& d, const Element& mu)
        : ActionForm(action_matrix(kind, d, mu), kernel_projector(d))
    {
    }

    ActionForm(RealMatrix K, RealMatrix P) : K_(std::move(K)), P_(std::move(P))
    {
        const double scale = std::max(1e-300, K_.diagonal().cwiseAbs().maxCoeff());
        llt_.compute(K_ + scale * P_);
        // the kernel of K_mu can be larger than ker d on singular mu
        use_llt_ = llt_.info() == Eigen::Success && llt_.matrixL().toDenseMatrix().diagonal().minCoeff() >
                                                          1e-7 * std::sqrt(scale);
        if (!use_llt_) {
            Eigen::SelfAdjointEigenSolver<RealMatrix> es(K_);
            values_ = es.eigenvalues();
            vectors_ = es.eigenvectors();
            cutoff_ = 1e-12 * std::max(1e-300, values_.cwiseAbs().maxCoeff());
        }
    }

    const RealMatrix& matrix() const noexcept { return K_; }

    /// True when c has no component on the kernel (finite action).
    bool in_range(const RealVector& c) const
    {
        const double cn = c.norm();
        if (cn == 0.0)
            return true;
        if (use_llt_)
            return (P_ * c).norm() <= kRangeTol * cn;
        double ker = 0.0;
        const RealVector y = vectors_.transpose() * c;
        for (Eigen::Index k = 0; k < y.size(); ++k)
            if (values_[k] < cutoff_)
                ker += y[k] * y[k];
        return std::sqrt(ker) <= kRangeTol * cn;
    }

    /// phi = K^+ c; throws SingularityError when c is not in the range.
    RealVector potential(const RealVector& c) const
    {
        if (!in_range(c))
            throw SingularityError("increment has mass on the kernel of the weighted Laplacian (infinite action)");
        if (use_llt_) {
            RealVector phi = llt_.solve(c);
            return phi - P_ * phi;
        }
        RealVector y = vectors_.transpose() * c;
        for (Eigen::Index k = 0; k < y.size(); ++k)
            y[k] = values_[k] < cutoff_ ? 0.0 : y[k] / values_[k];
        return vectors_ * y;
    }

    /// <c, K^+ c>
    double value(const RealVector& c) const { return std::max(0.0, c.dot(potential(c))); }

private:
    RealMatrix K_;
    RealMatrix P_;
    Eigen::LLT<RealMatrix> llt_;
    bool use_llt_ = true;
    RealVector values_;
    RealMatrix vectors_;
    double cutoff_ = 0.0;
};

} // namespace ncot

#endif // NCOT_ACTION_HPP
