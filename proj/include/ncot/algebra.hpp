#ifndef NCOT_ALGEBRA_HPP
#define NCOT_ALGEBRA_HPP

// Finite-dimensional tracial algebras: direct sums of full matrix blocks
// M_{d_1} (+) ... (+) M_{d_k} with trace tau(x) = sum_i w_i tr(x_i).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ncot/errors.hpp"

namespace ncot {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kClampTol = 1e-12;
inline constexpr double kTraceTol = 1e-10;

struct Block {
    int dim = 1;
    double weight = 1.0;
};

class AlgebraSpec {
public:
    AlgebraSpec() = default;

    explicit AlgebraSpec(std::vector<Block> blocks) : blocks_(std::move(blocks))
    {
        if (blocks_.empty())
            throw ValidationError("algebra needs at least one block");
        for (const auto& b : blocks_) {
            if (b.dim < 1)
                throw ValidationError("block dimension must be >= 1");
            if (!(b.weight > 0.0) || !std::isfinite(b.weight))
                throw ValidationError("block weight must be finite and > 0");
        }
    }

    /// Commutative algebra l^infty(X) with measure m (all blocks 1x1).
    static AlgebraSpec commutative(const std::vector<double>& measure)
    {
        std::vector<Block> blocks;
        blocks.reserve(measure.size());
        for (double w : measure)
            blocks.push_back({1, w});
        return AlgebraSpec(std::move(blocks));
    }

    const std::vector<Block>& blocks() const noexcept { return blocks_; }
    std::size_t num_blocks() const noexcept { return blocks_.size(); }
    int dim(std::size_t i) const { return blocks_.at(i).dim; }
    double weight(std::size_t i) const { return blocks_.at(i).weight; }

    bool is_commutative() const noexcept
    {
        return std::all_of(blocks_.begin(), blocks_.end(), [](const Block& b) { return b.dim == 1; });
    }

    /// tau(1) = sum_i w_i d_i
    double trace_of_unit() const noexcept
    {
        double s = 0.0;
        for (const auto& b : blocks_)
            s += b.weight * b.dim;
        return s;
    }

    /// Real dimension of the self-adjoint part L^2_h.
    int real_dim() const noexcept
    {
        int n = 0;
        for (const auto& b : blocks_)
            n += b.dim * b.dim;
        return n;
    }

    bool operator==(const AlgebraSpec& o) const
    {
        if (blocks_.size() != o.blocks_.size())
            return false;
        for (std::size_t i = 0; i < blocks_.size(); ++i)
            if (blocks_[i].dim != o.blocks_[i].dim || blocks_[i].weight != o.blocks_[i].weight)
                return false;
        return true;
    }

private:
    std::vector<Block> blocks_;
};

namespace detail {

inline bool block_is_hermitian(const Matrix& m, double tol = kHermitianTol)
{
    if (m.rows() != m.cols())
        return false;
    const double scale = std::max(1.0, m.norm());
    return (m - m.adjoint()).norm() <= tol * scale;
}

} // namespace detail

/// Block-diagonal operator affiliated with an AlgebraSpec.
class Element {
public:
    Element() = default;

    explicit Element(std::vector<Matrix> blocks) : blocks_(std::move(blocks))
    {
        hermitian_ = std::all_of(blocks_.begin(), blocks_.end(),
                                 [](const Matrix& m) { return detail::block_is_hermitian(m); });
    }

    static Element zero(const AlgebraSpec& A)
    {
        std::vector<Matrix> b;
        for (const auto& blk : A.blocks())
            b.push_back(Matrix::Zero(blk.dim, blk.dim));
        return Element(std::move(b));
    }

    static Element scalar(const AlgebraSpec& A, cplx c)
    {
        std::vector<Matrix> b;
        for (const auto& blk : A.blocks())
            b.push_back(c * Matrix::Identity(blk.dim, blk.dim));
        return Element(std::move(b));
    }

    static Element identity(const AlgebraSpec& A) { return scalar(A, 1.0); }

    /// Commutative element from its values (one per 1x1 block).
    static Element diagonal(const std::vector<double>& values)
    {
        std::vector<Matrix> b;
        for (double v : values)
            b.push_back(Matrix::Constant(1, 1, v));
        return Element(std::move(b));
    }

    const std::vector<Matrix>& blocks() const noexcept { return blocks_; }
    const Matrix& block(std::size_t i) const { return blocks_.at(i); }
    std::size_t num_blocks() const noexcept { return blocks_.size(); }
    bool hermitian() const noexcept { return hermitian_; }

    /// Values of a commutative element (real parts of the 1x1 blocks).
    std::vector<double> values() const
    {
        std::vector<double> v;
        for (const auto& m : blocks_) {
            if (m.rows() != 1)
                throw StructuralError("values() requires a commutative element");
            v.push_back(m(0, 0).real());
        }
        return v;
    }

    Element adjoint() const
    {
        std::vector<Matrix> b;
        for (const auto& m : blocks_)
            b.push_back(m.adjoint());
        return Element(std::move(b));
    }

    /// Hermitian part (x + x*)/2; used to remove round-off asymmetry.
    Element hermitian_part() const
    {
        std::vector<Matrix> b;
        for (const auto& m : blocks_)
            b.push_back(0.5 * (m + m.adjoint()));
        return Element(std::move(b));
    }

    double norm2_unweighted() const
    {
        double s = 0.0;
        for (const auto& m : blocks_)
            s += m.squaredNorm();
        return std::sqrt(s);
    }

    friend Element operator+(const Element& x, const Element& y) { return combine(x, y, 1.0, 1.0); }
    friend Element operator-(const Element& x, const Element& y) { return combine(x, y, 1.0, -1.0); }
    friend Element operator*(cplx c, const Element& x)
    {
        std::vector<Matrix> b;
        for (const auto& m : x.blocks_)
            b.push_back(c * m);
        return Element(std::move(b));
    }
    friend Element operator*(double c, const Element& x) { return cplx(c, 0.0) * x; }

    /// Algebra product, blockwise.
    friend Element operator*(const Element& x, const Element& y)
    {
        check_same_shape(x, y);
        std::vector<Matrix> b;
        for (std::size_t i = 0; i < x.blocks_.size(); ++i)
            b.push_back(x.blocks_[i] * y.blocks_[i]);
        return Element(std::move(b));
    }

    static void check_same_shape(const Element& x, const Element& y)
    {
        if (x.blocks_.size() != y.blocks_.size())
            throw StructuralError("block count mismatch");
        for (std::size_t i = 0; i < x.blocks_.size(); ++i)
            if (x.blocks_[i].rows() != y.blocks_[i].rows() || x.blocks_[i].cols() != y.blocks_[i].cols())
                throw StructuralError("block shape mismatch");
    }

private:
    static Element combine(const Element& x, const Element& y, double a, double b)
    {
        check_same_shape(x, y);
        std::vector<Matrix> out;
        for (std::size_t i = 0; i < x.blocks_.size(); ++i)
            out.push_back(a * x.blocks_[i] + b * y.blocks_[i]);
        return Element(std::move(out));
    }

    std::vector<Matrix> blocks_;
    bool hermitian_ = true;
};

inline void check_shape(const AlgebraSpec& A, const Element& x)
{
    if (x.num_blocks() != A.num_blocks())
        throw StructuralError("element has " + std::to_string(x.num_blocks()) + " blocks, algebra has " +
                              std::to_string(A.num_blocks()));
    for (std::size_t i = 0; i < A.num_blocks(); ++i) {
        const auto& m = x.block(i);
        if (m.rows() != A.dim(i) || m.cols() != A.dim(i))
            throw StructuralError("block " + std::to_string(i) + " has wrong shape");
    }
}

/// Per-block eigen-decomposition x_i = U_i diag(lambda_i) U_i^*.
struct Spectrum {
    std::vector<RealVector> values;
    std::vector<Matrix> vectors;

    double min_value() const
    {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& v : values)
            if (v.size() > 0)
                m = std::min(m, v.minCoeff());
        return m;
    }

    double max_value() const
    {
        double m = -std::numeric_limits<double>::infinity();
        for (const auto& v : values)
            if (v.size() > 0)
                m = std::max(m, v.maxCoeff());
        return m;
    }
};

inline Spectrum eigh(const Element& x)
{
    if (!x.hermitian())
        throw DomainError("spectral decomposition requires a hermitian element");
    Spectrum s;
    for (const auto& m : x.blocks()) {
        if (m.rows() == 1) {
            s.values.push_back(RealVector::Constant(1, m(0, 0).real()));
            s.vectors.push_back(Matrix::Identity(1, 1));
            continue;
        }
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()));
        if (es.info() != Eigen::Success)
            throw Error("eigendecomposition failed");
        s.values.push_back(es.eigenvalues());
        s.vectors.push_back(es.eigenvectors());
    }
    return s;
}

/// Rebuilds sum_k f(lambda_k) u_k u_k^* blockwise.
template <class F>
Element rebuild(const Spectrum& s, F&& f)
{
    std::vector<Matrix> b;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        const auto& U = s.vectors[i];
        RealVector fv(s.values[i].size());
        for (Eigen::Index k = 0; k < fv.size(); ++k)
            fv[k] = f(s.values[i][k]);
        Matrix m = U * fv.cast<cplx>().asDiagonal() * U.adjoint();
        b.push_back(0.5 * (m + m.adjoint()));
    }
    return Element(std::move(b));
}

/// tau(x) = sum_i w_i tr(x_i)
inline cplx trace(const AlgebraSpec& A, const Element& x)
{
    check_shape(A, x);
    cplx s = 0.0;
    for (std::size_t i = 0; i < A.num_blocks(); ++i)
        s += A.weight(i) * x.block(i).trace();
    return s;
}

inline double trace_real(const AlgebraSpec& A, const Element& x) { return trace(A, x).real(); }

/// <x, y>_{L^2} = tau(x^* y)
inline cplx inner(const AlgebraSpec& A, const Element& x, const Element& y)
{
    check_shape(A, x);
    check_shape(A, y);
    cplx s = 0.0;
    for (std::size_t i = 0; i < A.num_blocks(); ++i)
        s += A.weight(i) * (x.block(i).adjoint() * y.block(i)).trace();
    return s;
}

/// Noncommutative L^p norm; p = infinity gives the operator norm.
inline double lp_norm(const AlgebraSpec& A, const Element& x, double p)
{
    check_shape(A, x);
    if (!(p >= 1.0))
        throw DomainError("lp_norm requires p >= 1");
    const bool inf = std::isinf(p);
    double acc = 0.0;
    for (std::size_t i = 0; i < A.num_blocks(); ++i) {
        RealVector sv;
        const auto& m = x.block(i);
        if (m.rows() == 1)
            sv = RealVector::Constant(1, std::abs(m(0, 0)));
        else
            sv = Eigen::JacobiSVD<Matrix>(m).singularValues();
        if (inf) {
            acc = std::max(acc, sv.size() ? sv.maxCoeff() : 0.0);
        } else {
            for (Eigen::Index k = 0; k < sv.size(); ++k)
                acc += A.weight(i) * std::pow(sv[k], p);
        }
    }
    return inf ? acc : std::pow(acc, 1.0 / p);
}

/// f(x) for hermitian x; f must be finite on the spectrum.
template <class F>
Element functional_calculus(const AlgebraSpec& A, const Element& x, F&& f)
{
    check_shape(A, x);
    const Spectrum s = eigh(x);
    return rebuild(s, [&](double lambda) {
        const double v = f(lambda);
        if (!std::isfinite(v))
            throw DomainError("function undefined at eigenvalue " + std::to_string(lambda));
        return v;
    });
}

/// Clamps eigenvalues in [-kClampTol*scale, 0) to zero; rejects anything below.
inline Spectrum clamped_psd_spectrum(const Element& x)
{
    Spectrum s = eigh(x);
    double scale = 1.0;
    for (const auto& v : s.values)
        if (v.size())
            scale = std::max(scale, v.cwiseAbs().maxCoeff());
    for (auto& v : s.values)
        for (Eigen::Index k = 0; k < v.size(); ++k) {
            if (v[k] < -kClampTol * scale)
                throw ValidationError("element is not positive semidefinite (eigenvalue " + std::to_string(v[k]) +
                                      ")");
            if (v[k] < 0.0)
                v[k] = 0.0;
        }
    return s;
}

/// Positive unit-trace element with its cached spectral decomposition.
class Density {
public:
    Density(const AlgebraSpec& A, const Element& x)
    {
        check_shape(A, x);
        if (!x.hermitian())
            throw ValidationError("density must be hermitian");
        spectrum_ = clamped_psd_spectrum(x);
        element_ = rebuild(spectrum_, [](double l) { return l; });
        const double tr = trace_real(A, element_);
        if (std::abs(tr - 1.0) > kTraceTol)
            throw ValidationError("density must have unit trace, got " + std::to_string(tr));
    }

    /// Normalizes a positive element to unit trace first.
    static Density normalized(const AlgebraSpec& A, const Element& x)
    {
        const double tr = trace_real(A, x);
        if (!(tr > 0.0))
            throw ValidationError("cannot normalize an element with nonpositive trace");
        return Density(A, (1.0 / tr) * x);
    }

    const Element& element() const noexcept { return element_; }
    const Spectrum& spectrum() const noexcept { return spectrum_; }
    double min_eigenvalue() const { return spectrum_.min_value(); }

private:
    Element element_;
    Spectrum spectrum_;
};

/// The uniform density 1/tau(1).
inline Density uniform_density(const AlgebraSpec& A)
{
    return Density(A, Element::scalar(A, 1.0 / A.trace_of_unit()));
}

/// rho^eps = (rho + eps) / (tau(rho) + eps tau(1))
inline Element regularize(const AlgebraSpec& A, const Element& rho, double eps)
{
    const double denom = trace_real(A, rho) + eps * A.trace_of_unit();
    return (1.0 / denom) * (rho + Element::scalar(A, eps));
}

inline Element random_hermitian(const AlgebraSpec& A, std::mt19937_64& rng)
{
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Matrix> b;
    for (const auto& blk : A.blocks()) {
        Matrix m(blk.dim, blk.dim);
        for (int r = 0; r < blk.dim; ++r)
            for (int c = 0; c < blk.dim; ++c) {
                const double re = g(rng);
                const double im = blk.dim > 1 ? g(rng) : 0.0;
                m(r, c) = cplx(re, im);
            }
        b.push_back(0.5 * (m + m.adjoint()));
    }
    return Element(std::move(b));
}

inline Element random_general(const AlgebraSpec& A, std::mt19937_64& rng)
{
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Matrix> b;
    for (const auto& blk : A.blocks()) {
        Matrix m(blk.dim, blk.dim);
        for (int r = 0; r < blk.dim; ++r)
            for (int c = 0; c < blk.dim; ++c)
                m(r, c) = cplx(g(rng), g(rng));
        b.push_back(m);
    }
    return Element(std::move(b));
}

/// Wishart-type random density with minimal eigenvalue >= floor.
inline Density random_density(const AlgebraSpec& A, std::mt19937_64& rng, double floor = 0.0)
{
    if (floor < 0.0 || floor * A.trace_of_unit() >= 1.0)
        throw PreconditionError("random_density requires 0 <= floor and floor * tau(1) < 1");
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Matrix> b;
    for (const auto& blk : A.blocks()) {
        Matrix m(blk.dim, blk.dim);
        for (int r = 0; r < blk.dim; ++r)
            for (int c = 0; c < blk.dim; ++c)
                m(r, c) = cplx(g(rng), blk.dim > 1 ? g(rng) : 0.0);
        Matrix p = m * m.adjoint();
        b.push_back(0.5 * (p + p.adjoint()));
    }
    Element x(std::move(b));
    x = (1.0 / trace_real(A, x)) * x;
    if (floor > 0.0) {
        // (x + e)/(1 + e tau(1)) has spectrum >= e/(1 + e tau(1)) = floor
        const double e = floor / (1.0 - floor * A.trace_of_unit());
        x = regularize(A, x, e);
    }
    return Density(A, x.hermitian_part());
}

inline Density random_density(const AlgebraSpec& A, std::uint64_t seed, double floor = 0.0)
{
    std::mt19937_64 rng(seed);
    return random_density(A, rng, floor);
}

/// Orthonormal real coordinates on L^2_h(M, tau): per block the basis
/// E_kk/sqrt(w), (E_kl + E_lk)/sqrt(2w), i(E_kl - E_lk)/sqrt(2w) for k < l.
inline RealVector to_coords(const AlgebraSpec& A, const Element& x)
{
    check_shape(A, x);
    RealVector v(A.real_dim());
    int idx = 0;
    for (std::size_t i = 0; i < A.num_blocks(); ++i) {
        const double sw = std::sqrt(A.weight(i));
        const auto& m = x.block(i);
        const int d = A.dim(i);
        for (int k = 0; k < d; ++k)
            v[idx++] = sw * m(k, k).real();
        for (int k = 0; k < d; ++k)
            for (int l = k + 1; l < d; ++l) {
                const cplx h = 0.5 * (m(k, l) + std::conj(m(l, k)));
                v[idx++] = sw * std::sqrt(2.0) * h.real();
                v[idx++] = sw * std::sqrt(2.0) * h.imag();
            }
    }
    return v;
}

inline Element from_coords(const AlgebraSpec& A, const RealVector& v)
{
    if (v.size() != A.real_dim())
        throw StructuralError("coordinate vector has wrong length");
    std::vector<Matrix> b;
    int idx = 0;
    for (std::size_t i = 0; i < A.num_blocks(); ++i) {
        const double sw = std::sqrt(A.weight(i));
        const int d = A.dim(i);
        Matrix m = Matrix::Zero(d, d);
        for (int k = 0; k < d; ++k)
            m(k, k) = v[idx++] / sw;
        for (int k = 0; k < d; ++k)
            for (int l = k + 1; l < d; ++l) {
                const double re = v[idx++] / (sw * std::sqrt(2.0));
                const double im = v[idx++] / (sw * std::sqrt(2.0));
                m(k, l) = cplx(re, im);
                m(l, k) = cplx(re, -im);
            }
        b.push_back(std::move(m));
    }
    return Element(std::move(b));
}

/// Basis element number `index` of the coordinate system above.
inline Element basis_element(const AlgebraSpec& A, int index)
{
    RealVector e = RealVector::Zero(A.real_dim());
    e[index] = 1.0;
    return from_coords(A, e);
}

} // namespace ncot

#endif // NCOT_ALGEBRA_HPP
