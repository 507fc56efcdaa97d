// ncot: command line front end.
//
//   ncot dist      --instance F [--mean lm] [--grid 32] [--tol 1e-5] [--eps-final 1e-5]
//   ncot geodesic  --instance F            (JSON lines, one per node)
//   ncot flow      --instance F [--t-max 2] [--steps 50]   (CSV)
//   ncot verify    {ge|contraction|evi|convexity|talagrand|feller} --instance F [--K auto]
//   ncot seminorm  --instance F
//   ncot info      --instance F
//
// Exit codes: 0 success, 2 invalid input or flags, 3 solver non-convergence
// (best result still written, with converged = false), 1 anything else.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cli/instance.hpp"
#include "cli/output.hpp"
#include "ncot/ncot.hpp"

#ifndef NCOT_INSTANCE_DIR
#define NCOT_INSTANCE_DIR "instances"
#endif

using namespace ncot;
using namespace ncot::cli;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitNonConvergence = 3;

struct Flags {
    std::string instance;
    std::string mean = "lm";
    int grid = 32;
    double tol = 1e-5;
    double eps_final = 1e-5;
    std::uint64_t seed = 0;
    int samples = 64;
    std::vector<double> t_grid;
    std::string K = "auto";
    std::string output;
    std::string format;
    double t_max = 2.0;
    int steps = 50;
    std::string check;
};

// thrown for bad flag values found after parsing
class UsageError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// non-convergence whose best-so-far output has already been written
class ReportedNonConvergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Command {
public:
    Command(const Flags& f, std::ostream& out) : f_(f), out_(out), inst_(load(f.instance))
    {
        kind_ = *parse_mean(f.mean);
        opt_.grid = f.grid;
        opt_.tol = f.tol;
        opt_.eps_schedule = TransportOptions::schedule_to(f.eps_final);
        if (f.grid < 2)
            throw UsageError("--grid must be >= 2");
        if (!(f.tol > 0.0))
            throw UsageError("--tol must be > 0");
        if (!(f.eps_final > 0.0) || f.eps_final > 1e-2)
            throw UsageError("--eps-final must be in (0, 1e-2]");
        if (f.samples < 1)
            throw UsageError("--samples must be >= 1");
    }

    void dist()
    {
        const Density& a = need(inst_.rho0, "rho0");
        const Density& b = need(inst_.rho1, "rho1");
        try {
            emit_distance(bb_distance(kind_, d(), a, b, opt_));
        } catch (const TransportNonConvergence& e) {
            emit_distance(e.best());
            throw ReportedNonConvergence(e.what());
        }
    }

    void geodesic()
    {
        const Density& a = need(inst_.rho0, "rho0");
        const Density& b = need(inst_.rho1, "rho1");
        try {
            emit_path(ncot::geodesic(kind_, d(), a, b, opt_), true);
        } catch (const TransportNonConvergence& e) {
            emit_path(e.best().path, false);
            throw ReportedNonConvergence(e.what());
        }
    }

    void flow()
    {
        const Density& rho = need(inst_.rho0, "rho0");
        if (!(f_.t_max > 0.0))
            throw UsageError("--t-max must be > 0");
        if (f_.steps < 1)
            throw UsageError("--steps must be >= 1");
        const AlgebraSpec& A = d().algebra();
        const Element eq = uniform_density(A).element();
        const bool csv = format("csv") == "csv";
        if (csv)
            write_csv_row(out_, {"t", "Ent", "Fisher", "l1_to_equilibrium"});
        for (int k = 0; k <= f_.steps; ++k) {
            const double t = f_.t_max * k / f_.steps;
            const Density rt = heat_flow(d(), rho, t);
            const double ent = entropy(A, rt);
            const FisherValue fi = fisher_information(d(), rt);
            const double fisher = fi.finite ? fi.value : kInf;
            const double l1 = lp_norm(A, rt.element() - eq, 1.0);
            if (csv)
                write_csv_row(out_, {format_number(t), format_number(ent), format_number(fisher), format_number(l1)});
            else
                write_json(out_, {{"t", t}, {"Ent", ent}, {"Fisher", fisher}, {"l1_to_equilibrium", l1}}, 0);
        }
    }

    void verify()
    {
        const std::string& c = f_.check;
        if (c == "ge") {
            emit_ge();
            return;
        }
        const std::vector<double> times = f_.t_grid.empty() ? std::vector<double>{0.1, 0.5, 1.0} : f_.t_grid;
        json extra;
        const double K = resolve_K(extra);
        CheckReport rep;
        try {
            if (c == "contraction") {
                rep = check_contraction(kind_, d(), need(inst_.rho0, "rho0"), need(inst_.rho1, "rho1"), K, times,
                                        opt_);
            } else if (c == "evi") {
                rep = check_evi(kind_, d(), need(inst_.rho0, "rho0"), need(inst_.rho1, "rho1"), K, times, {}, opt_);
            } else if (c == "convexity") {
                rep = check_geodesic_convexity(kind_, d(), need(inst_.rho0, "rho0"), need(inst_.rho1, "rho1"), K,
                                               opt_);
            } else if (c == "talagrand") {
                rep = check_talagrand(kind_, d(), need(inst_.rho0, "rho0"), K, opt_);
            } else {
                rep = feller_check(kind_, d(), need(inst_.observable, "observable"), times, K, f_.samples, f_.seed);
            }
        } catch (const NonConvergenceError& e) {
            extra["converged"] = false;
            extra["error"] = e.what();
            extra["best_value"] = e.best_value();
            extra["name"] = c;
            emit_json(extra);
            throw ReportedNonConvergence(e.what());
        }
        json j = to_json(rep);
        j.update(extra);
        j["converged"] = true;
        j["mean"] = f_.mean;
        if (format("json") == "csv")
            write_csv(out_, rep);
        else
            emit_json(j);
    }

    void seminorm()
    {
        const Element& a = need(inst_.observable, "observable");
        SolverBudget budget;
        budget.seed = f_.seed;
        const SeminormResult r = theta_seminorm(kind_, d(), a, budget);
        emit_json({{"value", r.value},
                   {"upper_bound", r.upper_bound},
                   {"converged", r.converged},
                   {"iterations", r.iterations},
                   {"mean", f_.mean},
                   {"argmax", element_json(r.argmax)}});
        if (!r.converged)
            throw ReportedNonConvergence("seminorm ascent did not converge");
    }

    void info()
    {
        const AlgebraSpec& A = d().algebra();
        json blocks = json::array();
        for (const auto& b : A.blocks())
            blocks.push_back({b.dim, b.weight});
        const auto& g = d().generator();
        std::vector<double> spectrum(g.eigenvalues.data(), g.eigenvalues.data() + g.eigenvalues.size());
        std::sort(spectrum.begin(), spectrum.end());
        double gap = kInf;
        for (double l : spectrum)
            if (l > 1e-10)
                gap = std::min(gap, l);
        json j = {{"instance", inst_.path},
                  {"kind", inst_.kind},
                  {"blocks", blocks},
                  {"trace_of_unit", A.trace_of_unit()},
                  {"commutative", A.is_commutative()},
                  {"components", d().num_components()},
                  {"generator_spectrum", spectrum},
                  {"kernel_dim", g.kernel_dim},
                  {"irreducible", d().irreducible()},
                  {"spectral_gap", gap}};
        for (const auto& [k, v] : inst_.labels)
            j[k] = v;
        auto describe = [&](const Density& rho) {
            return json{{"entropy", entropy(A, rho)},
                        {"min_eigenvalue", rho.min_eigenvalue()},
                        {"strictly_positive", rho.min_eigenvalue() > 0.0}};
        };
        if (inst_.rho0)
            j["rho0"] = describe(*inst_.rho0);
        if (inst_.rho1)
            j["rho1"] = describe(*inst_.rho1);
        j["has_observable"] = inst_.observable.has_value();
        emit_json(j);
    }

private:
    static Instance load(const std::string& path)
    {
        namespace fs = std::filesystem;
        if (path.empty())
            throw UsageError("--instance is required");
        if (!fs::exists(path) && fs::path(path).filename() == fs::path(path)) {
            for (const fs::path& dir : {fs::path("instances"), fs::path(NCOT_INSTANCE_DIR)})
                if (fs::exists(dir / path))
                    return load_instance((dir / path).string());
        }
        return load_instance(path);
    }

    const Derivation& d() const { return inst_.derivation; }

    template <class T>
    const T& need(const std::optional<T>& v, const char* key) const
    {
        if (!v)
            throw InstanceError(inst_.path + ": this command needs field '" + key + "'");
        return *v;
    }

    std::string format(const std::string& fallback) const
    {
        const std::string fmt = f_.format.empty() ? fallback : f_.format;
        if (fmt != "json" && fmt != "csv")
            throw UsageError("--format must be json or csv");
        return fmt;
    }

    void emit_json(const json& j) { write_json(out_, j); }

    GeBudget budget() const
    {
        GeBudget b;
        b.samples = f_.samples;
        b.seed = f_.seed;
        return b;
    }

    double resolve_K(json& extra)
    {
        if (f_.K != "auto") {
            std::size_t used = 0;
            double K = 0.0;
            try {
                K = std::stod(f_.K, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != f_.K.size() || !std::isfinite(K))
                throw UsageError("--K must be 'auto' or a number, got '" + f_.K + "'");
            extra["K"] = K;
            extra["K_source"] = "flag";
            return K;
        }
        const GeEstimate e = estimate_ge_constant(kind_, d(), budget());
        const double K = kAutoSafety * e.K_hat;
        extra["K"] = K;
        extra["K_hat"] = e.K_hat;
        extra["K_source"] = "auto";
        return K;
    }

    void emit_ge()
    {
        GeBudget b = budget();
        if (!f_.t_grid.empty())
            b.t_grid = f_.t_grid;
        const GeEstimate e = estimate_ge_constant(kind_, d(), b);
        json j = {{"name", "ge"},
                  {"K_hat", e.K_hat},
                  {"t", e.t},
                  {"sample", e.sample},
                  {"per_sample", e.per_sample},
                  {"skipped", e.skipped},
                  {"samples", b.samples},
                  {"seed", b.seed},
                  {"t_grid", b.t_grid},
                  {"mean", f_.mean},
                  {"note", e.note},
                  {"witness", {{"a", element_json(e.a)}, {"rho", element_json(e.rho)}}}};
        if (format("json") == "csv") {
            write_csv_row(out_, {"sample", "quotient_min"});
            for (std::size_t i = 0; i < e.per_sample.size(); ++i)
                write_csv_row(out_, {std::to_string(i), format_number(e.per_sample[i])});
        } else {
            emit_json(j);
        }
    }

    void emit_distance(const TransportResult& r)
    {
        if (format("json") == "csv") {
            write_csv_row(out_, {"distance", "error_bar", "action", "converged", "grid", "feasibility_residual",
                                 "recomputed_action", "final_eps"});
            const auto& c = r.certificates;
            write_csv_row(out_, {format_number(r.distance), format_number(c.refinement_delta),
                                 format_number(r.action), r.converged ? "true" : "false", std::to_string(c.grid),
                                 format_number(c.feasibility_residual), format_number(c.recomputed_action),
                                 format_number(c.final_eps)});
            return;
        }
        emit_json({{"distance", r.distance},
                   {"error_bar", r.certificates.refinement_delta},
                   {"action", r.action},
                   {"converged", r.converged},
                   {"mean", f_.mean},
                   {"certificates", certificates_json(r.certificates)}});
    }

    void emit_path(const DiscretePath& p, bool converged)
    {
        const AlgebraSpec& A = d().algebra();
        const int N = p.grid();
        const bool csv = format("json") == "csv";
        for (int k = 0; k <= N; ++k) {
            const Element& x = p.densities[k];
            const double t = static_cast<double>(k) / N;
            const double ent = entropy(A, x.hermitian_part());
            if (csv) {
                const json flat = element_json(x);
                if (k == 0) {
                    std::vector<std::string> header{"k", "t", "Ent"};
                    int idx = 0;
                    for (const auto& blk : flat)
                        for (std::size_t i = 0; i < blk.size(); ++i)
                            header.push_back("x" + std::to_string(idx++));
                    write_csv_row(out_, header);
                }
                std::vector<std::string> row{std::to_string(k), format_number(t), format_number(ent)};
                for (const auto& blk : flat)
                    for (const auto& v : blk)
                        row.push_back(format_number(v.get<double>()));
                write_csv_row(out_, row);
            } else {
                write_json(out_,
                           {{"k", k}, {"t", t}, {"Ent", ent}, {"converged", converged}, {"density", element_json(x)}},
                           0);
            }
        }
    }

    static constexpr double kAutoSafety = 0.95;

    const Flags& f_;
    std::ostream& out_;
    Instance inst_;
    MeanKind kind_ = MeanKind::Logarithmic;
    TransportOptions opt_;
};

void add_common(CLI::App* sub, Flags& f)
{
    sub->add_option("--instance", f.instance, "instance file (schema 1)")->required();
    sub->add_option("--mean", f.mean, "operator mean")->check(CLI::IsMember({"am", "lm", "gm", "hm"}));
    sub->add_option("--grid", f.grid, "time steps N");
    sub->add_option("--tol", f.tol, "relative objective tolerance");
    sub->add_option("--eps-final", f.eps_final, "last positivity floor");
    sub->add_option("--seed", f.seed, "sampling seed");
    sub->add_option("--samples", f.samples, "number of sampled densities");
    sub->add_option("--output", f.output, "write results to this file");
    sub->add_option("--format", f.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
}

int run(int argc, char** argv)
{
    CLI::App app{"noncommutative transport metrics: distances, flows and curvature checks"};
    app.require_subcommand(1);
    Flags f;

    auto* dist = app.add_subcommand("dist", "transport distance with certificates");
    auto* geo = app.add_subcommand("geodesic", "constant speed geodesic, one JSON line per node");
    auto* flow = app.add_subcommand("flow", "heat flow: t, Ent, Fisher, l1_to_equilibrium");
    auto* verify = app.add_subcommand("verify", "curvature and functional inequality checks");
    auto* semi = app.add_subcommand("seminorm", "theta seminorm of the observable");
    auto* info = app.add_subcommand("info", "instance summary");
    for (auto* s : {dist, geo, flow, verify, semi, info})
        add_common(s, f);
    flow->add_option("--t-max", f.t_max, "final time");
    flow->add_option("--steps", f.steps, "number of time steps");
    verify->add_option("check", f.check, "which check")
        ->required()
        ->check(CLI::IsMember({"ge", "contraction", "evi", "convexity", "talagrand", "feller"}));
    verify->add_option("--K", f.K, "curvature constant or 'auto' (0.95 x estimated constant)");
    verify->add_option("--t-grid", f.t_grid, "comma separated times")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    }

    std::ofstream file;
    if (!f.output.empty()) {
        file.open(f.output);
        if (!file) {
            std::cerr << "error: cannot write " << f.output << '\n';
            return kExitInvalid;
        }
    }
    std::ostream& out = f.output.empty() ? std::cout : file;

    try {
        Command cmd(f, out);
        if (dist->parsed())
            cmd.dist();
        else if (geo->parsed())
            cmd.geodesic();
        else if (flow->parsed())
            cmd.flow();
        else if (verify->parsed())
            cmd.verify();
        else if (semi->parsed())
            cmd.seminorm();
        else
            cmd.info();
    } catch (const ReportedNonConvergence& e) {
        out.flush();
        std::cerr << "error: " << e.what() << '\n';
        return kExitNonConvergence;
    } catch (const NonConvergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNonConvergence;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    out.flush();
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    return run(argc, argv);
}
