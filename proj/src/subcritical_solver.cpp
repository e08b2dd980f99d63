#include "paneitz/subcritical_solver.hpp"

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <sstream>

#include "paneitz/errors.hpp"
#include "paneitz/special_functions.hpp"

namespace paneitz {

namespace {

std::vector<double> nodal_f(const ProblemSpec& spec) {
    return spec.f.sample(spec.grid.nodes());
}

// g = f |u|^{q-2} u on all nodes, u = embed(w) + h.
std::vector<double> nonlinearity(const ProblemSpec& spec, const DiscreteOperator& op, std::span<const double> h,
                                 std::span<const double> w, double q) {
    const auto f = nodal_f(spec);
    std::vector<double> u = op.embed(w);
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double v = u[i] + h[i];
        u[i] = f[i] * std::pow(std::abs(v), q - 2.0) * v;
    }
    return u;
}

// Positive root of t -> \int f |t d + h|^q = gamma.
double ray_root(const ProblemSpec& spec, const DiscreteOperator& op, std::span<const double> h,
                std::span<const double> d, double q) {
    const double gamma = spec.gamma;
    auto F = [&](double t) {
        std::vector<double> td(d.begin(), d.end());
        for (double& x : td) x *= t;
        return constraint_value(spec, op, td, h, q) - gamma;
    };
    const double f0 = F(0.0);
    if (!(f0 < 0.0)) {
        std::ostringstream os;
        os << "no feasible ray: \\int f|h|^q = " << f0 + gamma << " is not below gamma = " << gamma;
        throw AdmissibilityError(os.str());
    }
    double lo = 0.0;
    double hi = 1.0;
    double fhi = F(hi);
    int grow = 0;
    while (fhi <= 0.0) {
        lo = hi;
        hi *= 2.0;
        fhi = F(hi);
        if (++grow > 200) throw AdmissibilityError("no feasible ray: constraint bracket not found");
    }
    // Shrink from below so the bracket is tight when t is tiny.
    if (lo == 0.0) {
        double probe = 0.5;
        double fp = F(probe);
        while (fp > 0.0 && probe > 1e-300) {
            hi = probe;
            fhi = fp;
            probe *= 0.5;
            fp = F(probe);
        }
        lo = probe;
    }
    std::uintmax_t max_iter = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) <= 4e-16 * std::max(std::abs(a), std::abs(b)); };
    const auto [a, b] = boost::math::tools::toms748_solve(F, lo, hi, tol, max_iter);
    const double fa = F(a);
    const double fb = F(b);
    return std::abs(fa) <= std::abs(fb) ? a : b;
}

double l2(const DiscreteOperator& op, std::span<const double> x) { return std::sqrt(op.inner(x, x)); }

}  // namespace

FeasiblePoint feasible_point(const ProblemSpec& spec, const DiscreteOperator& op, std::span<const double> h,
                             std::span<const double> psi1, double q) {
    const double two_sharp = critical_exponent(spec.dimension());
    if (!(q > 2.0) || q > two_sharp * (1.0 + 1e-14)) {
        std::ostringstream os;
        os << "feasible_point: q = " << q << " outside (2, " << two_sharp << "]";
        throw DomainError(os.str());
    }
    FeasiblePoint fp;
    fp.t = ray_root(spec, op, h, psi1, q);
    fp.w0.assign(psi1.begin(), psi1.end());
    for (double& x : fp.w0) x *= fp.t;
    return fp;
}

std::vector<double> project_to_constraint(const ProblemSpec& spec, const DiscreteOperator& op,
                                          std::span<const double> h, std::span<const double> w, double q,
                                          std::span<const double> fallback_direction) {
    const bool zero = std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; });
    std::span<const double> dir = w;
    if (zero) {
        if (fallback_direction.empty()) {
            throw AdmissibilityError("project_to_constraint: zero field has no ray onto the constraint set");
        }
        dir = fallback_direction;
    }
    // Already feasible fields are returned unchanged.
    if (!zero && std::abs(constraint_value(spec, op, w, h, q) - spec.gamma) <= 1e-15 * spec.gamma) {
        return {w.begin(), w.end()};
    }
    const double t = ray_root(spec, op, h, dir, q);
    std::vector<double> out(dir.begin(), dir.end());
    for (double& x : out) x *= t;
    return out;
}

double lagrange_multiplier(const ProblemSpec& spec, const DiscreteOperator& op, std::span<const double> h,
                           std::span<const double> w, double q) {
    const auto g = nonlinearity(spec, op, h, w, q);
    const auto vol = op.weights();
    double gh = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) gh += vol[i] * g[i] * h[i];
    const double denom = spec.gamma - gh;
    if (!(denom > 0.0)) {
        std::ostringstream os;
        os << "lagrange_multiplier: gamma - \\int f|u|^{q-2}u h = " << denom
           << " is not positive; the constraint level does not dominate the boundary extension";
        throw AdmissibilityError(os.str());
    }
    const auto pw = op.apply(w);
    return op.inner(w, pw) / denom;
}

double stationarity_residual(const ProblemSpec& spec, const DiscreteOperator& op, std::span<const double> h,
                             std::span<const double> w, double q, double lambda) {
    const auto pw = op.apply(w);
    const auto g = op.restrict_to_dofs(nonlinearity(spec, op, h, w, q));
    std::vector<double> r(pw.size());
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = pw[k] - lambda * g[k];
    const double scale = l2(op, pw);
    return scale > 0.0 ? l2(op, r) / scale : l2(op, r);
}

double preconditioned_residual(const ProblemSpec& spec, const DiscreteOperator& op, std::span<const double> h,
                               std::span<const double> w, double q, double lambda) {
    const auto g = op.restrict_to_dofs(nonlinearity(spec, op, h, w, q));
    auto z = op.solve(g);
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = w[k] - lambda * z[k];
    const double scale = l2(op, w);
    return scale > 0.0 ? l2(op, z) / scale : l2(op, z);
}

SubcriticalSolution minimize(const ProblemSpec& spec, const DiscreteOperator& op, std::span<const double> h,
                             double q, std::span<const double> w0, const SolverOptions& options) {
    SubcriticalSolution sol;
    sol.q = q;
    std::vector<double> w(w0.begin(), w0.end());
    if (std::abs(constraint_value(spec, op, w, h, q) - spec.gamma) > options.constraint_tol * spec.gamma) {
        w = project_to_constraint(spec, op, h, w, q);
    }
    double I = energy(spec, op, w);
    double lambda = lagrange_multiplier(spec, op, h, w, q);
    double res = stationarity_residual(spec, op, h, w, q, lambda);
    double tau = 1.0;
    double pre = -1.0;
    bool flat = false;
    int stalls = 0;
    int it = 0;
    while (res > options.stationarity_tol) {
        if (it >= options.max_iterations) {
            std::ostringstream os;
            os << "minimize: q = " << q << " not stationary after " << it << " iterations (residual " << res
               << ", energy " << I << ")";
            throw SolverError(os.str());
        }
        ++it;
        const auto g = op.restrict_to_dofs(nonlinearity(spec, op, h, w, q));
        auto d = op.solve(g);
        for (std::size_t k = 0; k < d.size(); ++k) d[k] = lambda * d[k] - w[k];

        tau = std::min(1.0, 2.0 * tau);
        bool accepted = false;
        std::vector<double> trial(w.size());
        while (tau > 1e-12) {
            for (std::size_t k = 0; k < w.size(); ++k) trial[k] = w[k] + tau * d[k];
            trial = project_to_constraint(spec, op, h, trial, q, w);
            const double It = energy(spec, op, trial);
            if (It <= I) {
                accepted = It < I || tau == 1.0;
                I = It;
                w.swap(trial);
                break;
            }
            tau *= 0.5;
        }
        if (!accepted) {
            // Energy flat to rounding. On fine grids the fourth-order residual has a rounding
            // floor of its own, so stationarity is then judged on the preconditioned residual.
            pre = preconditioned_residual(spec, op, h, w, q, lambda);
            if (pre <= options.stationarity_tol) {
                flat = true;
                break;
            }
            if (++stalls > 20) {
                std::ostringstream os;
                os << "minimize: stagnation at q = " << q << " after " << it << " iterations (residual " << res
                   << ", preconditioned " << pre << ", energy " << I << ")";
                throw SolverError(os.str());
            }
            tau = 1.0;
        } else {
            stalls = 0;
        }
        lambda = lagrange_multiplier(spec, op, h, w, q);
        res = stationarity_residual(spec, op, h, w, q, lambda);
    }
    sol.w = std::move(w);
    sol.mu = I;
    sol.lambda = lambda;
    sol.el_residual = res;
    sol.preconditioned_residual = flat ? pre : preconditioned_residual(spec, op, h, sol.w, q, lambda);
    sol.constraint_residual = std::abs(constraint_value(spec, op, sol.w, h, q) - spec.gamma);
    sol.iterations = it;
    sol.converged = true;
    return sol;
}

std::vector<double> default_q_schedule(int n) {
    const double s = critical_exponent(n);
    std::vector<double> qs;
    for (int k = 0; k <= 8; ++k) qs.push_back(s - (s - 2.2) * std::ldexp(1.0, -k));
    qs.push_back(s);
    return qs;
}

double nontriviality_threshold(const ProblemSpec& spec) {
    const int n = spec.dimension();
    const double s = critical_exponent(n);
    const auto f = nodal_f(spec);
    const double fmax = *std::max_element(f.begin(), f.end());
    return std::pow(spec.gamma, 2.0 / s) / (best_constant_K0(n) * std::pow(fmax, 2.0 / s));
}

ContinuationTrace continuation(const ProblemSpec& spec, const std::vector<double>& q_schedule,
                               const SolverOptions& options) {
    const double s = critical_exponent(spec.dimension());
    if (q_schedule.empty()) throw DomainError("continuation: empty q schedule");
    for (std::size_t k = 0; k < q_schedule.size(); ++k) {
        if (!(q_schedule[k] > 2.0) || (k > 0 && !(q_schedule[k] > q_schedule[k - 1]))) {
            throw DomainError("continuation: q schedule must be strictly increasing in (2, 2#]");
        }
    }
    if (std::abs(q_schedule.back() - s) > 1e-12 * s) {
        throw DomainError("continuation: q schedule must end at the critical exponent");
    }

    spec.validate();
    const DiscreteOperator op = assemble_paneitz(spec);
    ContinuationTrace trace;
    trace.threshold = nontriviality_threshold(spec);
    const ExtensionField ext = solve_extension(spec, op);
    trace.h = ext.h;
    if (!admissibility_check(spec, op, trace.h)) {
        std::ostringstream os;
        os << "admissibility violated: \\int f|h|^{2#} = " << critical_mass(spec, op, trace.h)
           << " must be strictly below gamma = " << spec.gamma;
        throw AdmissibilityError(os.str());
    }
    trace.eigen = first_eigenpair(spec);
    const double I_psi = energy(spec, op, trace.eigen.psi1);

    std::vector<double> warm;
    for (const double q : q_schedule) {
        try {
            const FeasiblePoint fp = feasible_point(spec, op, trace.h, trace.eigen.psi1, q);
            std::vector<double> start = fp.w0;
            if (!warm.empty()) {
                auto projected = project_to_constraint(spec, op, trace.h, warm, q, trace.eigen.psi1);
                if (energy(spec, op, projected) < energy(spec, op, start)) start = std::move(projected);
            }
            SubcriticalSolution sol = minimize(spec, op, trace.h, q, start, options);
            sol.t_q = fp.t;
            sol.start_bound = fp.t * fp.t * I_psi;
            warm = sol.w;
            trace.stages.push_back(std::move(sol));
        } catch (const std::exception& e) {
            trace.failed = true;
            std::ostringstream os;
            os << "stage q = " << q << ": " << e.what();
            trace.failure = os.str();
            break;
        }
    }
    if (!trace.stages.empty()) {
        trace.limit_mu = trace.stages.back().mu;
        trace.threshold_met = !trace.failed && trace.limit_mu < trace.threshold;
    }
    return trace;
}

int nodal_check(std::span<const double> u, double rel_tol) {
    double umax = 0.0;
    for (double x : u) umax = std::max(umax, std::abs(x));
    const double guard = rel_tol * umax;
    int changes = 0;
    int last = 0;
    for (double x : u) {
        if (std::abs(x) <= guard) continue;
        const int s = x > 0.0 ? 1 : -1;
        if (last != 0 && s != last) ++changes;
        last = s;
    }
    return changes;
}

}  // namespace paneitz
