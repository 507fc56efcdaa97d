#ifndef NCOT_TRANSPORT_HPP
#define NCOT_TRANSPORT_HPP

// The transport metric W: a time-discrete Benamou-Brenier problem in
// momentum form on a staggered grid,
//   min  sum_k (1/N) <m_k, Q_k^{-1} m_k>,
//   <m, Q_k^{-1} m> = (<m, rho_{k-1}-hat^{-1} m> + <m, rho_k-hat^{-1} m>)/2,
//   s.t. rho_k - rho_{k-1} = (1/N) div m_k.
// For a fixed path the optimal momentum is m_k = N Q_k d phi_k with
// K_k phi_k = rho_k - rho_{k-1}; the solver minimizes the reduced
// objective N sum_k <D_k, K_k^+ D_k> over the interior densities by
// L-BFGS, keeping them uniformly positive along an epsilon schedule.

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "ncot/action.hpp"
#include "ncot/algebra.hpp"
#include "ncot/calculus.hpp"
#include "ncot/errors.hpp"
#include "ncot/functionals.hpp"
#include "ncot/means.hpp"
#include "ncot/operator_means.hpp"
#include "ncot/report.hpp"

namespace ncot {

struct TransportOptions {
    int grid = 32;
    double tol = 1e-5;
    std::vector<double> eps_schedule{1e-2, 1e-3, 1e-4, 1e-5};
    int max_iterations = 4000;   // per stage
    int memory = 12;             // L-BFGS pairs
    bool refine = true;          // extra solve at 2N for the error bar

    static std::vector<double> schedule_to(double eps_final)
    {
        std::vector<double> s;
        for (double e = 1e-2; e > eps_final * (1 + 1e-9); e /= 10.0)
            s.push_back(e);
        s.push_back(eps_final);
        return s;
    }
};

struct DiscretePath {
    std::vector<Element> densities;        // rho_0 .. rho_N
    std::vector<TangentVector> momenta;    // m_1 .. m_N
    int grid() const { return static_cast<int>(momenta.size()); }
};

struct TransportCertificates {
    double feasibility_residual = 0.0;
    std::vector<double> objective_history;
    std::vector<int> stage_starts;         // index into objective_history per stage
    int grid = 0;
    std::vector<double> eps_schedule;
    double final_eps = 0.0;
    bool endpoints_regularized = false;
    double refinement_delta = 0.0;
    int refinement_grid = 0;
    double recomputed_action = 0.0;
    int iterations = 0;
};

struct TransportResult {
    double distance = 0.0;
    double action = 0.0;
    bool converged = true;
    DiscretePath path;
    TransportCertificates certificates;
};

class TransportNonConvergence : public NonConvergenceError {
public:
    explicit TransportNonConvergence(TransportResult best)
        : NonConvergenceError("transport solver stalled in consecutive epsilon stages", best.distance),
          best_(std::move(best))
    {
    }
    const TransportResult& best() const noexcept { return best_; }

private:
    TransportResult best_;
};

namespace detail {

inline double min_eigenvalue(const AlgebraSpec& A, const RealVector& c)
{
    return eigh(from_coords(A, c)).min_value();
}

/// Q = 2 A (A + B)^{-1} B, the harmonic mean of A = rho_a-hat and B = rho_b-hat,
/// so that <m, Q^{-1} m> = (<m, A^{-1} m> + <m, B^{-1} m>) / 2.
class CoupledHat {
public:
    CoupledHat(MeanKind kind, const Derivation& d, const Element& a, const Element& b)
        : kind_(kind), d_(d), ha_(kind, d, a.hermitian_part()), hb_(kind, d, b.hermitian_part())
    {
        if (d.backend() == Backend::Graph) {
            const auto& g = d.graph_spec();
            const auto va = a.values(), vb = b.values();
            q_ = RealMatrix::Zero(g.nodes, g.nodes);
            for (int x = 0; x < g.nodes; ++x)
                for (int y = 0; y < g.nodes; ++y) {
                    const double ta = mean_value(kind, std::max(va[x], 0.0), std::max(va[y], 0.0));
                    const double tb = mean_value(kind, std::max(vb[x], 0.0), std::max(vb[y], 0.0));
                    q_(x, y) = ta + tb > 0.0 ? 2.0 * ta * tb / (ta + tb) : 0.0;
                }
        }
    }

    TangentVector apply(const TangentVector& xi) const
    {
        if (d_.backend() == Backend::Graph) {
            TangentVector r = xi;
            r.parts[0] = xi.parts[0].cwiseProduct(q_.cast<cplx>());
            return r;
        }
        return 2.0 * ha_.apply(sum_solve(hb_.apply(xi)));
    }

    /// A^{-1} Q xi and B^{-1} Q xi, the factors in the derivative of Q.
    TangentVector left_factor(const TangentVector& xi) const { return 2.0 * sum_solve(hb_.apply(xi)); }
    TangentVector right_factor(const TangentVector& xi) const { return 2.0 * sum_solve(ha_.apply(xi)); }

    /// K_Q in coordinates: c -> -div(Q d c).
    RealMatrix matrix() const
    {
        const AlgebraSpec& A = d_.algebra();
        const int n = A.real_dim();
        RealMatrix K = RealMatrix::Zero(n, n);
        if (d_.backend() == Backend::Graph) {
            const auto& g = d_.graph_spec();
            for (int x = 0; x < n; ++x)
                for (int y = 0; y < n; ++y) {
                    if (!(g.b(x, y) > 0.0))
                        continue;
                    const double w = g.b(x, y) * q_(x, y);
                    K(x, x) += w / g.m[x];
                    K(x, y) -= w / std::sqrt(g.m[x] * g.m[y]);
                }
            return K;
        }
        for (int j = 0; j < n; ++j)
            K.col(j) = to_coords(A, d_.divergence(apply(d_.derive(basis_element(A, j)))).hermitian_part());
        return 0.5 * (K + K.transpose());
    }

    /// <m, Q^{-1} m> from the two strict solves.
    double inverse_form(const TangentVector& m) const
    {
        return 0.5 * (d_.inner(m, ha_.solve(m)).real() + d_.inner(m, hb_.solve(m)).real());
    }

private:
    // (A + B) y = c by conjugate gradients
    TangentVector sum_solve(const TangentVector& c) const
    {
        auto dot = [&](const TangentVector& x, const TangentVector& y) { return d_.inner(x, y).real(); };
        TangentVector x = 0.0 * c, r = c, p = c;
        const double c2 = dot(c, c);
        if (c2 == 0.0)
            return x;
        double rr = c2;
        int dim = 0;
        for (const auto& part : c.parts)
            dim += 2 * static_cast<int>(part.size());
        for (int it = 0; it < 4 * dim + 20 && rr > 1e-32 * c2; ++it) {
            const TangentVector sp = ha_.apply(p) + hb_.apply(p);
            const double ps = dot(p, sp);
            if (!(ps > 0.0))
                break;
            const double alpha = rr / ps;
            x = x + alpha * p;
            r = r - alpha * sp;
            const double rn = dot(r, r);
            p = r + (rn / rr) * p;
            rr = rn;
        }
        return x;
    }

    MeanKind kind_;
    Derivation d_;
    RhoHat ha_, hb_;
    RealMatrix q_;
};

class PathSolver {
public:
    PathSolver(MeanKind kind, const Derivation& d, int N)
        : kind_(kind), d_(d), A_(d.algebra()), N_(N), n_(d.algebra().real_dim()), P_(kernel_projector(d))
    {
        if (N < 2)
            throw PreconditionError("grid must have N >= 2");
    }

    struct Eval {
        double value = 0.0;
        std::vector<double> slices;
        std::vector<RealVector> phi;    // K^+ D_k, k = 1..N
        RealVector grad;                // interior, flattened
    };

    /// nodes: N + 1 coordinate vectors including the endpoints.
    Eval evaluate(const std::vector<RealVector>& nodes, bool with_gradient) const
    {
        Eval e;
        e.slices.resize(N_);
        e.phi.resize(N_);
        std::vector<Element> rho(N_ + 1);
        for (int j = 0; j <= N_; ++j)
            rho[j] = from_coords(A_, nodes[j]);
        std::vector<TangentVector> fl(N_), fr(N_);
        for (int k = 0; k < N_; ++k) {
            // endpoints agree on ker d (checked by the caller), so the kernel part is roundoff
            RealVector delta = nodes[k + 1] - nodes[k];
            delta -= P_ * delta;
            const CoupledHat q(kind_, d_, rho[k], rho[k + 1]);
            const ActionForm form(q.matrix(), P_);
            e.phi[k] = form.potential(delta);
            e.slices[k] = N_ * std::max(0.0, delta.dot(e.phi[k]));
            e.value += e.slices[k];
            if (with_gradient && e.phi[k].norm() > 0.0) {
                const TangentVector dphi = d_.derive(from_coords(A_, e.phi[k]));
                fl[k] = q.left_factor(dphi);
                fr[k] = q.right_factor(dphi);
            }
        }
        if (with_gradient) {
            e.grad.resize((N_ - 1) * n_);
            for (int j = 1; j < N_; ++j) {
                // node j is the right end of slice j-1 and the left end of slice j;
                // dQ[h] = (1/2) Q A^{-1} dA[h] A^{-1} Q for the left end
                const RhoHat hat(kind_, d_, rho[j]);
                RealVector g = 2.0 * N_ * (e.phi[j - 1] - e.phi[j]);
                if (e.phi[j - 1].norm() > 0.0)
                    g -= 0.5 * N_ * to_coords(A_, hat.gradient(fr[j - 1]));
                if (e.phi[j].norm() > 0.0)
                    g -= 0.5 * N_ * to_coords(A_, hat.gradient(fl[j]));
                g -= P_ * g;
                e.grad.segment((j - 1) * n_, n_) = g;
            }
        }
        return e;
    }

    std::vector<RealVector> assemble(const RealVector& e0, const RealVector& e1, const RealVector& interior) const
    {
        std::vector<RealVector> nodes(N_ + 1);
        nodes[0] = e0;
        nodes[N_] = e1;
        for (int j = 1; j < N_; ++j) {
            // pin the invariant part to the endpoint's so no drift accumulates
            const RealVector v = interior.segment((j - 1) * n_, n_);
            nodes[j] = v - P_ * (v - e0);
        }
        return nodes;
    }

    bool feasible(const RealVector& interior, double floor) const
    {
        for (int j = 1; j < N_; ++j)
            if (min_eigenvalue(A_, interior.segment((j - 1) * n_, n_)) < floor)
                return false;
        return true;
    }

    struct StageResult {
        RealVector interior;
        double value = 0.0;
        bool stalled = false;
        int iterations = 0;
    };

    /// L-BFGS with Armijo backtracking that keeps every interior node >= floor.
    /// Stops after three consecutive relative decreases <= tol once the
    /// predicted decrease -g.p is <= stationarity * value.
    StageResult run_stage(const RealVector& e0, const RealVector& e1, RealVector x, double floor, double tol,
                          double stationarity, int max_iterations, int memory, std::vector<double>& history) const
    {
        StageResult r;
        if (N_ < 2 || x.size() == 0) {
            r.interior = x;
            r.value = evaluate(assemble(e0, e1, x), false).value;
            return r;
        }
        Eval cur = evaluate(assemble(e0, e1, x), true);
        history.push_back(cur.value);
        std::deque<RealVector> S, Y;
        std::deque<double> rho;
        int small_steps = 0;
        // rounding in the increments limits how well F can be resolved
        double scale = std::max(e0.norm(), e1.norm());
        for (int j = 1; j < N_; ++j)
            scale = std::max(scale, x.segment((j - 1) * n_, n_).norm());
        auto noise = [&](double value) { return 1e-12 * std::sqrt(std::max(value, 0.0)) * scale * N_; };
        for (int it = 0; it < max_iterations; ++it) {
            r.iterations = it + 1;
            const RealVector& g = cur.grad;
            if (cur.value <= 1e-300 || g.norm() <= 1e-14 * (1.0 + std::sqrt(cur.value))) {
                break;
            }
            // two-loop recursion
            RealVector q = g;
            std::vector<double> alpha(S.size());
            for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
                alpha[i] = rho[i] * S[i].dot(q);
                q -= alpha[i] * Y[i];
            }
            double gamma = 1.0;
            if (!S.empty())
                gamma = S.back().dot(Y.back()) / Y.back().squaredNorm();
            else
                gamma = std::min(1.0, 0.1 * std::sqrt(x.squaredNorm() / N_) / std::max(g.norm(), 1e-300));
            RealVector p = gamma * q;
            for (std::size_t i = 0; i < S.size(); ++i) {
                const double beta = rho[i] * Y[i].dot(p);
                p += (alpha[i] - beta) * S[i];
            }
            p = -p;
            double slope = g.dot(p);
            if (!(slope < 0.0)) {
                S.clear();
                Y.clear();
                rho.clear();
                p = -g * std::min(1.0, 1.0 / std::max(g.norm(), 1e-300));
                slope = g.dot(p);
            }
            // predicted decrease negligible against the value: converged
            if (-slope <= std::max(1e-13 * cur.value, noise(cur.value)))
                break;
            double step = 1.0;
            bool accepted = false;
            Eval next;
            RealVector xn;
            for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
                xn = x + step * p;
                if (!feasible(xn, floor))
                    continue;
                next = evaluate(assemble(e0, e1, xn), true);
                if (next.value <= cur.value + 1e-4 * step * slope) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                // a failed search is only a stall when the gradient still matters
                r.stalled = -slope > std::max(1e-9 * cur.value, noise(cur.value));
                break;
            }
            const RealVector s = xn - x;
            const RealVector y = next.grad - cur.grad;
            const double sy = s.dot(y);
            if (sy > 1e-16 * s.norm() * y.norm()) {
                S.push_back(s);
                Y.push_back(y);
                rho.push_back(1.0 / sy);
                if (static_cast<int>(S.size()) > memory) {
                    S.pop_front();
                    Y.pop_front();
                    rho.pop_front();
                }
            }
            const double decrease = cur.value - next.value;
            x = xn;
            cur = std::move(next);
            history.push_back(cur.value);
            small_steps = decrease <= tol * cur.value ? small_steps + 1 : 0;
            if (small_steps >= 3 && -slope <= std::max(stationarity * cur.value, noise(cur.value)))
                break;
            if (it + 1 == max_iterations)
                r.stalled = true;
        }
        r.interior = x;
        r.value = cur.value;
        return r;
    }

    int n() const noexcept { return n_; }
    int grid() const noexcept { return N_; }
    const RealMatrix& kernel() const noexcept { return P_; }

private:
    MeanKind kind_;
    Derivation d_;
    AlgebraSpec A_;
    int N_;
    int n_;
    RealMatrix P_;
};

inline RealVector linear_interior(const RealVector& e0, const RealVector& e1, int N)
{
    const int n = static_cast<int>(e0.size());
    RealVector x((N - 1) * n);
    for (int j = 1; j < N; ++j) {
        const double t = static_cast<double>(j) / N;
        x.segment((j - 1) * n, n) = (1 - t) * e0 + t * e1;
    }
    return x;
}

// interior of a 2N grid from an N grid: old nodes kept, new nodes at midpoints
inline RealVector refine_interior(const std::vector<RealVector>& nodes)
{
    const int N = static_cast<int>(nodes.size()) - 1;
    const int n = static_cast<int>(nodes[0].size());
    RealVector x((2 * N - 1) * n);
    for (int j = 1; j < 2 * N; ++j) {
        const RealVector v = j % 2 == 0 ? nodes[j / 2] : RealVector(0.5 * (nodes[j / 2] + nodes[j / 2 + 1]));
        x.segment((j - 1) * n, n) = v;
    }
    return x;
}

struct RawSolve {
    std::vector<RealVector> nodes;
    double value = 0.0;
    bool converged = true;
    bool endpoints_regularized = false;
    double final_eps = 0.0;
    std::vector<double> history;
    std::vector<int> stage_starts;
    int iterations = 0;
};

inline RawSolve solve_raw(MeanKind kind, const Derivation& d, const Element& r0, const Element& r1, int N,
                          const TransportOptions& opt, const std::vector<double>& schedule,
                          std::optional<RealVector> warm = std::nullopt)
{
    const AlgebraSpec& A = d.algebra();
    PathSolver solver(kind, d, N);
    const RealVector c0 = to_coords(A, r0), c1 = to_coords(A, r1);
    if ((solver.kernel() * (c1 - c0)).norm() > kRangeTol * std::max(1.0, (c1 - c0).norm()))
        throw StructuralError("densities differ on an invariant of the generator: no admissible path");
    const double l0 = eigh(r0).min_value(), l1 = eigh(r1).min_value();
    RawSolve out;
    RealVector x;
    int stalls = 0;
    for (std::size_t s = 0; s < schedule.size(); ++s) {
        const double eps = schedule[s];
        RealVector e0 = c0, e1 = c1;
        bool reg = false;
        if (l0 < eps) {
            e0 = to_coords(A, regularize(A, r0, eps).hermitian_part());
            reg = true;
        }
        if (l1 < eps) {
            e1 = to_coords(A, regularize(A, r1, eps).hermitian_part());
            reg = true;
        }
        const double m0 = min_eigenvalue(A, e0), m1 = min_eigenvalue(A, e1);
        const double floor = std::min(0.5 * eps, 0.5 * std::min(m0, m1));
        if (x.size() == 0) {
            x = warm ? *warm : linear_interior(e0, e1, N);
            if (!solver.feasible(x, floor))
                x = linear_interior(e0, e1, N);
        } else if (!solver.feasible(x, floor)) {
            x = linear_interior(e0, e1, N);
        }
        out.stage_starts.push_back(static_cast<int>(out.history.size()));
        // only the last stage is driven to stationarity; earlier ones are warm starts
        const double stationarity = s + 1 == schedule.size() ? opt.tol * opt.tol : kInf;
        const auto st =
            solver.run_stage(e0, e1, x, floor, opt.tol, stationarity, opt.max_iterations, opt.memory, out.history);
        x = st.interior;
        out.iterations += st.iterations;
        out.value = st.value;
        out.nodes = solver.assemble(e0, e1, x);
        out.endpoints_regularized = reg;
        out.final_eps = eps;
        stalls = st.stalled ? stalls + 1 : 0;
        out.converged = !st.stalled;
        if (stalls >= 3 && s + 1 < schedule.size())
            break;
    }
    if (stalls >= 3)
        out.converged = false;
    return out;
}

inline DiscretePath build_path(MeanKind kind, const Derivation& d, const std::vector<RealVector>& nodes)
{
    const AlgebraSpec& A = d.algebra();
    const int N = static_cast<int>(nodes.size()) - 1;
    const RealMatrix P = kernel_projector(d);
    DiscretePath path;
    for (const auto& c : nodes)
        path.densities.push_back(from_coords(A, c));
    for (int k = 0; k < N; ++k) {
        const CoupledHat q(kind, d, path.densities[k], path.densities[k + 1]);
        const ActionForm form(q.matrix(), P);
        RealVector delta = nodes[k + 1] - nodes[k];
        delta -= P * delta;
        const RealVector phi = form.potential(delta);
        path.momenta.push_back(static_cast<double>(N) * q.apply(d.derive(from_coords(A, phi))));
    }
    return path;
}

} // namespace detail

/// max_k || rho_k - rho_{k-1} - (1/N) div m_k ||_2
inline double continuity_residual(const Derivation& d, const DiscretePath& p)
{
    const AlgebraSpec& A = d.algebra();
    const int N = p.grid();
    double r = 0.0;
    for (int k = 0; k < N; ++k) {
        const Element res = p.densities[k + 1] - p.densities[k] - (1.0 / N) * d.divergence(p.momenta[k]);
        r = std::max(r, lp_norm(A, res, 2.0));
    }
    return r;
}

/// sum_k (1/N) <m_k, Q_k^{-1} m_k> recomputed from the path.
inline double path_action(MeanKind kind, const Derivation& d, const DiscretePath& p)
{
    const int N = p.grid();
    double a = 0.0;
    for (int k = 0; k < N; ++k) {
        const detail::CoupledHat q(kind, d, p.densities[k], p.densities[k + 1]);
        a += q.inverse_form(p.momenta[k]) / N;
    }
    return a;
}

/// Per-interval speeds sqrt(N * action_k); constant along a geodesic.
inline std::vector<double> discrete_speeds(MeanKind kind, const Derivation& d, const DiscretePath& p)
{
    const int N = p.grid();
    std::vector<double> v;
    for (int k = 0; k < N; ++k) {
        const detail::CoupledHat q(kind, d, p.densities[k], p.densities[k + 1]);
        v.push_back(std::sqrt(std::max(0.0, q.inverse_form(p.momenta[k]))));
    }
    return v;
}

/// Discrete Benamou-Brenier distance with certificates.
inline TransportResult bb_distance(MeanKind kind, const Derivation& d, const Density& rho0, const Density& rho1,
                                   const TransportOptions& opt = {})
{
    if (opt.eps_schedule.empty())
        throw PreconditionError("epsilon schedule must not be empty");
    const auto raw = detail::solve_raw(kind, d, rho0.element(), rho1.element(), opt.grid, opt, opt.eps_schedule);
    TransportResult r;
    r.action = raw.value;
    r.distance = std::sqrt(raw.value);
    r.converged = raw.converged;
    r.path = detail::build_path(kind, d, raw.nodes);
    auto& c = r.certificates;
    c.grid = opt.grid;
    c.eps_schedule = opt.eps_schedule;
    c.final_eps = raw.final_eps;
    c.endpoints_regularized = raw.endpoints_regularized;
    c.objective_history = raw.history;
    c.stage_starts = raw.stage_starts;
    c.iterations = raw.iterations;
    c.feasibility_residual = continuity_residual(d, r.path);
    c.recomputed_action = path_action(kind, d, r.path);
    if (opt.refine && raw.value > 0.0) {
        const std::vector<double> last{raw.final_eps};
        const auto fine = detail::solve_raw(kind, d, rho0.element(), rho1.element(), 2 * opt.grid, opt, last,
                                            detail::refine_interior(raw.nodes));
        c.refinement_delta = std::abs(std::sqrt(fine.value) - r.distance);
        c.refinement_grid = 2 * opt.grid;
        r.converged = r.converged && fine.converged;
    }
    if (!raw.converged)
        throw TransportNonConvergence(r);
    return r;
}

/// The optimal discrete path reparametrized to constant speed.
inline DiscretePath geodesic(MeanKind kind, const Derivation& d, const Density& rho0, const Density& rho1,
                             TransportOptions opt = {})
{
    opt.refine = false;
    const TransportResult r = bb_distance(kind, d, rho0, rho1, opt);
    const AlgebraSpec& A = d.algebra();
    const int N = r.path.grid();
    const auto speeds = discrete_speeds(kind, d, r.path);
    std::vector<double> cum(N + 1, 0.0);
    for (int k = 0; k < N; ++k)
        cum[k + 1] = cum[k] + speeds[k] / N;
    const double L = cum[N];
    if (!(L > 0.0))
        return r.path;
    std::vector<RealVector> nodes;
    int seg = 0;
    for (int j = 0; j <= N; ++j) {
        const double target = L * j / N;
        while (seg < N - 1 && cum[seg + 1] < target)
            ++seg;
        const double len = cum[seg + 1] - cum[seg];
        const double u = len > 0.0 ? std::clamp((target - cum[seg]) / len, 0.0, 1.0) : 0.0;
        nodes.push_back((1 - u) * to_coords(A, r.path.densities[seg]) + u * to_coords(A, r.path.densities[seg + 1]));
    }
    nodes.front() = to_coords(A, r.path.densities.front());
    nodes.back() = to_coords(A, r.path.densities.back());
    return detail::build_path(kind, d, nodes);
}

/// Independent 1D reference for a two-node graph: with s = m0 rho(0) the
/// problem reduces to |int_{s0}^{s1} ds / sqrt(w theta(s/m0, (1-s)/m1))|.
inline double two_point_oracle(MeanKind kind, const Derivation& d, const Density& rho0, const Density& rho1)
{
    if (d.backend() != Backend::Graph || d.graph_spec().nodes != 2)
        throw PreconditionError("two_point_oracle needs a graph with two nodes");
    const auto& g = d.graph_spec();
    const double w = g.b(0, 1);
    if (!(w > 0.0))
        throw PreconditionError("two_point_oracle needs b(0,1) > 0");
    const double m0 = g.m[0], m1 = g.m[1];
    const double s0 = m0 * rho0.element().values()[0];
    const double s1 = m0 * rho1.element().values()[0];
    if (s0 == s1)
        return 0.0;
    auto f = [&](double s) {
        const double th = mean_value(kind, std::max(0.0, s / m0), std::max(0.0, (1 - s) / m1));
        return 1.0 / std::sqrt(w * th);
    };
    boost::math::quadrature::tanh_sinh<double> integrator;
    const double lo = std::min(s0, s1), hi = std::max(s0, s1);
    double err = 0.0;
    const double v = integrator.integrate(f, lo, hi, 1e-12, &err);
    if (!std::isfinite(v))
        throw NonConvergenceError("two-point quadrature failed", v);
    return v;
}

/// The s-coordinate at arc-length fraction u of the two-point geodesic.
inline double two_point_arclength_point(MeanKind kind, const Derivation& d, const Density& rho0,
                                        const Density& rho1, double u)
{
    const auto& g = d.graph_spec();
    const double m0 = g.m[0];
    const double s0 = m0 * rho0.element().values()[0];
    const double s1 = m0 * rho1.element().values()[0];
    const double total = two_point_oracle(kind, d, rho0, rho1);
    auto partial = [&](double s) {
        const Density r(d.algebra(), Element::diagonal({s / m0, (1 - s) / g.m[1]}));
        return two_point_oracle(kind, d, rho0, r);
    };
    double a = s0, b = s1;
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (a + b);
        if (partial(mid) < u * total)
            a = mid;
        else
            b = mid;
    }
    return 0.5 * (a + b);
}

/// max over candidates a of |tau(a (rho1 - rho0))| / ||a||_theta, a lower bound of W.
inline double transport_lower_bound(MeanKind kind, const Derivation& d, const Density& rho0, const Density& rho1,
                                    const SolverBudget& budget = {})
{
    const AlgebraSpec& A = d.algebra();
    const Element delta = (rho1.element() - rho0.element()).hermitian_part();
    const RealVector dc = to_coords(A, delta);
    if (dc.norm() == 0.0)
        return 0.0;
    const RealMatrix P = kernel_projector(d);
    auto ratio = [&](const Element& a) {
        const double num = std::abs(trace(A, a * delta));
        if (num == 0.0)
            return 0.0;
        SolverBudget b = budget;
        b.max_iterations = std::max(50, budget.max_iterations / 4);
        const SeminormResult s = theta_seminorm(kind, d, a, b);
        return s.upper_bound > 0.0 ? num / s.upper_bound : 0.0;
    };
    std::vector<Element> candidates;
    const double floor = 1e-6;
    for (const Element& mu : {rho0.element(), rho1.element(), Element(0.5 * (rho0.element() + rho1.element())),
                              uniform_density(A).element()}) {
        const Element m = regularize(A, mu, floor);
        try {
            const ActionForm form(action_matrix(kind, d, m), P);
            candidates.push_back(from_coords(A, form.potential(dc)));
        } catch (const SingularityError&) {
            return kInf;
        }
    }
    candidates.push_back(delta);
    double best = 0.0;
    Element best_a = candidates.front();
    for (const auto& a : candidates) {
        const double v = ratio(a);
        if (v > best) {
            best = v;
            best_a = a;
        }
    }
    // seeded local ascent around the best candidate
    std::mt19937_64 rng(budget.seed);
    double step = 0.1;
    for (int it = 0; it < budget.restarts * 4; ++it) {
        const Element h = random_hermitian(A, rng);
        const double scale = lp_norm(A, best_a, 2.0) / std::max(1e-300, lp_norm(A, h, 2.0));
        const Element trial = best_a + (step * scale) * h;
        const double v = ratio(trial);
        if (v > best) {
            best = v;
            best_a = trial;
        } else {
            step *= 0.7;
        }
    }
    return best;
}

/// A distance with its refinement delta as error bar.
struct BarredDistance {
    double value = 0.0;
    double bar = 0.0;
    double lo() const { return std::max(0.0, value - bar); }
    double hi() const { return value + bar; }
};

inline BarredDistance barred(const TransportResult& r)
{
    return {r.distance, r.certificates.refinement_delta};
}

/// W^2 convexity along linear interpolation of both endpoints. Each W may move
/// within its bar; the recorded margin is the most favourable one, so a sample
/// fails only when no admissible choice of values satisfies the inequality.
inline CheckReport convexity_check_w2(MeanKind kind, const Derivation& d, const Density& r00, const Density& r01,
                                      const Density& r10, const Density& r11, const std::vector<double>& t_grid,
                                      const TransportOptions& opt = {})
{
    CheckReport rep;
    rep.name = "w2_convexity";
    const AlgebraSpec& A = d.algebra();
    const auto w0 = barred(bb_distance(kind, d, r00, r10, opt));
    const auto w1 = barred(bb_distance(kind, d, r01, r11, opt));
    rep.tolerance = 3.0 * opt.tol;
    for (double t : t_grid) {
        const Density a(A, ((1 - t) * r00.element() + t * r01.element()).hermitian_part());
        const Density b(A, ((1 - t) * r10.element() + t * r11.element()).hermitian_part());
        const auto wt = barred(bb_distance(kind, d, a, b, opt));
        const double lhs = wt.value * wt.value;
        const double rhs = (1 - t) * w0.value * w0.value + t * w1.value * w1.value;
        const double folded = (1 - t) * w0.hi() * w0.hi() + t * w1.hi() * w1.hi() - wt.lo() * wt.lo();
        rep.record(folded, {{"t", t}, {"lhs", lhs}, {"rhs", rhs}, {"raw_margin", rhs - lhs}});
    }
    return rep;
}

} // namespace ncot

#endif // NCOT_TRANSPORT_HPP
