#ifndef NCOT_CALCULUS_HPP
#define NCOT_CALCULUS_HPP

// First-order differential calculus (derivation, module actions, involution)
// of a quantum Dirichlet form, for two generator families:
//   * weighted graphs (X, b, m) with the Neumann form,
//   * trace-symmetric Lindbladians L a = sum_j [v_j, [v_j, a]], v_j hermitian.
//
// Inner products on H are conjugate-linear in the first argument.

#include <cmath>
#include <memory>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ncot/algebra.hpp"
#include "ncot/errors.hpp"

namespace ncot {

enum class Backend { Graph, Lindblad };

struct GraphSpec {
    int nodes = 0;
    RealMatrix b;             // symmetric, zero diagonal, nonnegative
    std::vector<double> m;    // strictly positive measure

    void validate() const
    {
        if (nodes < 1)
            throw ValidationError("graph needs at least one node");
        if (b.rows() != nodes || b.cols() != nodes)
            throw StructuralError("edge weight matrix must be nodes x nodes");
        if (static_cast<int>(m.size()) != nodes)
            throw StructuralError("measure must have one entry per node");
        for (int x = 0; x < nodes; ++x) {
            if (!(m[x] > 0.0) || !std::isfinite(m[x]))
                throw ValidationError("measure must be strictly positive");
            if (b(x, x) != 0.0)
                throw StructuralError("edge weights must vanish on the diagonal");
            for (int y = 0; y < nodes; ++y) {
                if (!(b(x, y) >= 0.0) || !std::isfinite(b(x, y)))
                    throw ValidationError("edge weights must be finite and nonnegative");
                if (b(x, y) != b(y, x))
                    throw StructuralError("edge weights must be symmetric");
            }
        }
    }
};

struct LindbladSpec {
    AlgebraSpec algebra;
    std::vector<Element> jumps;

    void validate() const
    {
        if (jumps.empty())
            throw ValidationError("Lindblad generator needs at least one jump operator");
        for (std::size_t j = 0; j < jumps.size(); ++j) {
            check_shape(algebra, jumps[j]);
            if (!jumps[j].hermitian())
                throw ValidationError("jump operator " + std::to_string(j) + " is not hermitian");
        }
    }
};

/// Element of H. Graph backend: one n x n edge function (entries with
/// b = 0 carry no mass). Lindblad backend: parts[j * blocks + i] is the
/// block-i matrix of the j-th component.
struct TangentVector {
    Backend backend = Backend::Graph;
    std::vector<Matrix> parts;

    friend TangentVector operator+(const TangentVector& x, const TangentVector& y)
    {
        return combine(x, y, 1.0, 1.0);
    }
    friend TangentVector operator-(const TangentVector& x, const TangentVector& y)
    {
        return combine(x, y, 1.0, -1.0);
    }
    friend TangentVector operator*(cplx c, const TangentVector& x)
    {
        TangentVector r = x;
        for (auto& p : r.parts)
            p *= c;
        return r;
    }
    friend TangentVector operator*(double c, const TangentVector& x) { return cplx(c, 0.0) * x; }

    static void check_compatible(const TangentVector& x, const TangentVector& y)
    {
        if (x.backend != y.backend || x.parts.size() != y.parts.size())
            throw StructuralError("tangent vectors belong to different spaces");
        for (std::size_t k = 0; k < x.parts.size(); ++k)
            if (x.parts[k].rows() != y.parts[k].rows() || x.parts[k].cols() != y.parts[k].cols())
                throw StructuralError("tangent vector component shape mismatch");
    }

private:
    static TangentVector combine(const TangentVector& x, const TangentVector& y, double a, double b)
    {
        check_compatible(x, y);
        TangentVector r;
        r.backend = x.backend;
        for (std::size_t k = 0; k < x.parts.size(); ++k)
            r.parts.push_back(a * x.parts[k] + b * y.parts[k]);
        return r;
    }
};

/// Spectral decomposition of the generator on L^2_h in the orthonormal
/// coordinates of to_coords().
struct GeneratorSpectrum {
    RealMatrix matrix;
    RealVector eigenvalues;
    RealMatrix eigenvectors;
    int kernel_dim = 0;
};

class Derivation {
public:
    static Derivation graph(GraphSpec g)
    {
        g.validate();
        auto impl = std::make_shared<Impl>();
        impl->backend = Backend::Graph;
        impl->algebra = AlgebraSpec::commutative(g.m);
        impl->graph = std::move(g);
        Derivation d(impl);
        impl->generator = d.compute_generator();
        return d;
    }

    static Derivation lindblad(LindbladSpec spec)
    {
        spec.validate();
        auto impl = std::make_shared<Impl>();
        impl->backend = Backend::Lindblad;
        impl->algebra = spec.algebra;
        impl->jumps = std::move(spec.jumps);
        Derivation d(impl);
        impl->generator = d.compute_generator();
        return d;
    }

    Backend backend() const noexcept { return impl_->backend; }
    const AlgebraSpec& algebra() const noexcept { return impl_->algebra; }
    const GraphSpec& graph_spec() const
    {
        require(Backend::Graph);
        return impl_->graph;
    }
    const std::vector<Element>& jumps() const
    {
        require(Backend::Lindblad);
        return impl_->jumps;
    }
    std::size_t num_components() const
    {
        return backend() == Backend::Graph ? 1 : impl_->jumps.size();
    }

    TangentVector zero_tangent() const
    {
        TangentVector t;
        t.backend = backend();
        if (backend() == Backend::Graph) {
            t.parts.push_back(Matrix::Zero(impl_->graph.nodes, impl_->graph.nodes));
        } else {
            for (std::size_t j = 0; j < impl_->jumps.size(); ++j)
                for (const auto& blk : algebra().blocks())
                    t.parts.push_back(Matrix::Zero(blk.dim, blk.dim));
        }
        return t;
    }

    void check(const TangentVector& xi) const
    {
        if (xi.backend != backend())
            throw StructuralError("tangent vector belongs to a different backend");
        if (backend() == Backend::Graph) {
            const int n = impl_->graph.nodes;
            if (xi.parts.size() != 1 || xi.parts[0].rows() != n || xi.parts[0].cols() != n)
                throw StructuralError("edge function has wrong shape");
            return;
        }
        const std::size_t nb = algebra().num_blocks();
        if (xi.parts.size() != nb * impl_->jumps.size())
            throw StructuralError("tangent vector has wrong number of components");
        for (std::size_t k = 0; k < xi.parts.size(); ++k) {
            const int d = algebra().dim(k % nb);
            if (xi.parts[k].rows() != d || xi.parts[k].cols() != d)
                throw StructuralError("tangent vector component shape mismatch");
        }
    }

    /// The derivation: graph (u(x) - u(y)), Lindblad ([v_j, a])_j.
    TangentVector derive(const Element& a) const
    {
        check_shape(algebra(), a);
        TangentVector t = zero_tangent();
        if (backend() == Backend::Graph) {
            const auto& g = impl_->graph;
            Matrix& xi = t.parts[0];
            for (int x = 0; x < g.nodes; ++x)
                for (int y = 0; y < g.nodes; ++y)
                    if (g.b(x, y) > 0.0)
                        xi(x, y) = a.block(x)(0, 0) - a.block(y)(0, 0);
        } else {
            const std::size_t nb = algebra().num_blocks();
            for (std::size_t j = 0; j < impl_->jumps.size(); ++j)
                for (std::size_t i = 0; i < nb; ++i) {
                    const Matrix& v = impl_->jumps[j].block(i);
                    t.parts[j * nb + i] = v * a.block(i) - a.block(i) * v;
                }
        }
        return t;
    }

    /// Adjoint of derive(): tau(a^* div(xi)) = <derive(a), xi>_H.
    Element divergence(const TangentVector& xi) const
    {
        check(xi);
        if (backend() == Backend::Graph) {
            const auto& g = impl_->graph;
            std::vector<Matrix> out;
            const Matrix& e = xi.parts[0];
            for (int x = 0; x < g.nodes; ++x) {
                cplx s = 0.0;
                for (int y = 0; y < g.nodes; ++y)
                    if (g.b(x, y) > 0.0)
                        s += g.b(x, y) * (e(x, y) - e(y, x));
                out.push_back(Matrix::Constant(1, 1, s / (2.0 * g.m[x])));
            }
            return Element(std::move(out));
        }
        const std::size_t nb = algebra().num_blocks();
        std::vector<Matrix> out;
        for (std::size_t i = 0; i < nb; ++i) {
            Matrix s = Matrix::Zero(algebra().dim(i), algebra().dim(i));
            for (std::size_t j = 0; j < impl_->jumps.size(); ++j) {
                const Matrix& v = impl_->jumps[j].block(i);
                const Matrix& c = xi.parts[j * nb + i];
                s += v * c - c * v;
            }
            out.push_back(std::move(s));
        }
        return Element(std::move(out));
    }

    /// Left module action a . xi
    TangentVector left_act(const Element& a, const TangentVector& xi) const
    {
        check_shape(algebra(), a);
        check(xi);
        TangentVector r = xi;
        if (backend() == Backend::Graph) {
            for (int x = 0; x < impl_->graph.nodes; ++x)
                r.parts[0].row(x) *= a.block(x)(0, 0);
        } else {
            const std::size_t nb = algebra().num_blocks();
            for (std::size_t k = 0; k < r.parts.size(); ++k)
                r.parts[k] = a.block(k % nb) * xi.parts[k];
        }
        return r;
    }

    /// Right module action xi . b
    TangentVector right_act(const TangentVector& xi, const Element& b) const
    {
        check_shape(algebra(), b);
        check(xi);
        TangentVector r = xi;
        if (backend() == Backend::Graph) {
            for (int y = 0; y < impl_->graph.nodes; ++y)
                r.parts[0].col(y) *= b.block(y)(0, 0);
        } else {
            const std::size_t nb = algebra().num_blocks();
            for (std::size_t k = 0; k < r.parts.size(); ++k)
                r.parts[k] = xi.parts[k] * b.block(k % nb);
        }
        return r;
    }

    /// The anti-linear involution J.
    TangentVector j_involution(const TangentVector& xi) const
    {
        check(xi);
        TangentVector r = xi;
        if (backend() == Backend::Graph) {
            r.parts[0] = -xi.parts[0].adjoint();
        } else {
            for (std::size_t k = 0; k < r.parts.size(); ++k)
                r.parts[k] = -xi.parts[k].adjoint();
        }
        return r;
    }

    /// <xi, eta>_H
    cplx inner(const TangentVector& xi, const TangentVector& eta) const
    {
        check(xi);
        check(eta);
        if (backend() == Backend::Graph) {
            const auto& g = impl_->graph;
            cplx s = 0.0;
            for (int x = 0; x < g.nodes; ++x)
                for (int y = 0; y < g.nodes; ++y)
                    if (g.b(x, y) > 0.0)
                        s += g.b(x, y) * std::conj(xi.parts[0](x, y)) * eta.parts[0](x, y);
            return 0.5 * s;
        }
        const std::size_t nb = algebra().num_blocks();
        cplx s = 0.0;
        for (std::size_t k = 0; k < xi.parts.size(); ++k)
            s += algebra().weight(k % nb) * xi.parts[k].cwiseProduct(eta.parts[k].conjugate()).sum();
        // sum_ij conj(xi_ij) eta_ij, computed as above then conjugated
        return std::conj(s);
    }

    double norm2(const TangentVector& xi) const { return inner(xi, xi).real(); }

    /// E(a, b) = <da, db>_H
    cplx energy(const Element& a, const Element& b) const { return inner(derive(a), derive(b)); }

    /// Applies the two-variable multiplier f(lambda_k, lambda_l) of the
    /// commuting pair (L(x), R(x)) for a hermitian x with spectrum s.
    template <class F>
    TangentVector apply_multiplier(const Spectrum& s, const TangentVector& xi, F&& f) const
    {
        check(xi);
        TangentVector r = xi;
        if (backend() == Backend::Graph) {
            const auto& g = impl_->graph;
            for (int x = 0; x < g.nodes; ++x)
                for (int y = 0; y < g.nodes; ++y)
                    r.parts[0](x, y) = g.b(x, y) > 0.0 ? f(s.values[x][0], s.values[y][0]) * xi.parts[0](x, y)
                                                       : cplx(0.0);
            return r;
        }
        const std::size_t nb = algebra().num_blocks();
        std::vector<RealMatrix> table(nb);
        for (std::size_t i = 0; i < nb; ++i) {
            const auto& lam = s.values[i];
            table[i].resize(lam.size(), lam.size());
            for (Eigen::Index k = 0; k < lam.size(); ++k)
                for (Eigen::Index l = 0; l < lam.size(); ++l)
                    table[i](k, l) = f(lam[k], lam[l]);
        }
        for (std::size_t k = 0; k < r.parts.size(); ++k) {
            const std::size_t i = k % nb;
            const Matrix& U = s.vectors[i];
            Matrix y = U.adjoint() * xi.parts[k] * U;
            y = y.cwiseProduct(table[i].cast<cplx>());
            r.parts[k] = U * y * U.adjoint();
        }
        return r;
    }

    /// Gamma_H(xi): the element with tau(x Gamma_H(xi)) = <xi, x . xi>_H.
    Element carre_du_champ_vector(const TangentVector& xi) const
    {
        check(xi);
        if (backend() == Backend::Graph) {
            const auto& g = impl_->graph;
            std::vector<Matrix> out;
            for (int x = 0; x < g.nodes; ++x) {
                double s = 0.0;
                for (int y = 0; y < g.nodes; ++y)
                    if (g.b(x, y) > 0.0)
                        s += g.b(x, y) * std::norm(xi.parts[0](x, y));
                out.push_back(Matrix::Constant(1, 1, s / (2.0 * g.m[x])));
            }
            return Element(std::move(out));
        }
        const std::size_t nb = algebra().num_blocks();
        std::vector<Matrix> out;
        for (std::size_t i = 0; i < nb; ++i)
            out.push_back(Matrix::Zero(algebra().dim(i), algebra().dim(i)));
        for (std::size_t k = 0; k < xi.parts.size(); ++k)
            out[k % nb] += xi.parts[k] * xi.parts[k].adjoint();
        return Element(std::move(out)).hermitian_part();
    }

    const GeneratorSpectrum& generator() const noexcept { return impl_->generator; }

    /// L x = div(d x), for any (not necessarily hermitian) element.
    Element apply_generator(const Element& x) const { return divergence(derive(x)); }

    bool irreducible() const noexcept { return impl_->generator.kernel_dim == 1; }

private:
    struct Impl {
        Backend backend = Backend::Graph;
        AlgebraSpec algebra;
        GraphSpec graph;
        std::vector<Element> jumps;
        GeneratorSpectrum generator;
    };

    explicit Derivation(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

    void require(Backend b) const
    {
        if (backend() != b)
            throw StructuralError("operation not available for this backend");
    }

    GeneratorSpectrum compute_generator() const
    {
        const AlgebraSpec& A = algebra();
        const int n = A.real_dim();
        GeneratorSpectrum g;
        g.matrix.resize(n, n);
        for (int j = 0; j < n; ++j)
            g.matrix.col(j) = to_coords(A, apply_generator(basis_element(A, j)).hermitian_part());
        g.matrix = 0.5 * (g.matrix + g.matrix.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<RealMatrix> es(g.matrix);
        if (es.info() != Eigen::Success)
            throw Error("generator eigendecomposition failed");
        g.eigenvalues = es.eigenvalues();
        g.eigenvectors = es.eigenvectors();
        const double scale = std::max(1.0, g.eigenvalues.cwiseAbs().maxCoeff());
        g.kernel_dim = 0;
        for (Eigen::Index k = 0; k < g.eigenvalues.size(); ++k)
            if (g.eigenvalues[k] < 1e-10 * scale)
                ++g.kernel_dim;
        return g;
    }

    std::shared_ptr<const Impl> impl_;
};

// Convenience constructors used by the tests, the CLI and the built-in instances.

inline GraphSpec make_graph(int nodes, const std::vector<std::tuple<int, int, double>>& edges,
                            std::vector<double> measure)
{
    GraphSpec g;
    g.nodes = nodes;
    g.b = RealMatrix::Zero(nodes, nodes);
    for (const auto& [x, y, w] : edges) {
        if (x < 0 || y < 0 || x >= nodes || y >= nodes)
            throw StructuralError("edge endpoint out of range");
        if (x == y)
            throw StructuralError("self loops are not allowed");
        g.b(x, y) = w;
        g.b(y, x) = w;
    }
    g.m = std::move(measure);
    return g;
}

inline Derivation two_point_graph(double m0 = 1.0, double m1 = 1.0, double w = 1.0)
{
    return Derivation::graph(make_graph(2, {{0, 1, w}}, {m0, m1}));
}

inline Derivation cycle_graph(int n, double w = 1.0, double m = 1.0)
{
    std::vector<std::tuple<int, int, double>> edges;
    for (int x = 0; x < n; ++x)
        edges.emplace_back(x, (x + 1) % n, w);
    return Derivation::graph(make_graph(n, edges, std::vector<double>(n, m)));
}

inline Element pauli(const AlgebraSpec& A, char which)
{
    if (A.num_blocks() != 1 || A.dim(0) != 2)
        throw StructuralError("Pauli matrices live on a single 2x2 block");
    Matrix p(2, 2);
    switch (which) {
    case 'x': p << 0, 1, 1, 0; break;
    case 'y': p << 0, cplx(0, -1), cplx(0, 1), 0; break;
    case 'z': p << 1, 0, 0, -1; break;
    default: throw ValidationError("unknown Pauli matrix");
    }
    return Element({p});
}

/// M_2 with normalized trace and the three Pauli matrices as jumps.
inline Derivation qubit_depolarizing()
{
    AlgebraSpec A({{2, 0.5}});
    return Derivation::lindblad({A, {pauli(A, 'x'), pauli(A, 'y'), pauli(A, 'z')}});
}

} // namespace ncot

#endif // NCOT_CALCULUS_HPP
