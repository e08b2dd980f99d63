#include "paneitz/test_functions.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include "paneitz/errors.hpp"
#include "paneitz/special_functions.hpp"

namespace paneitz {

double Cutoff::value(double r) const {
    if (r <= delta) return 1.0;
    if (r >= 2.0 * delta) return 0.0;
    const double s = (r - delta) / delta;
    return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

double Cutoff::derivative(double r) const {
    if (r <= delta || r >= 2.0 * delta) return 0.0;
    const double s = (r - delta) / delta;
    return -30.0 * s * s * (1.0 - s) * (1.0 - s) / delta;
}

double Cutoff::second_derivative(double r) const {
    if (r <= delta || r >= 2.0 * delta) return 0.0;
    const double s = (r - delta) / delta;
    return -60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (delta * delta);
}

BubbleValue bubble(double r, const TestFunctionParams& params, int n) {
    const Cutoff eta{params.delta};
    const double k = 0.5 * (n - 4);
    const double s = r * r + params.epsilon * params.epsilon;
    const double b = std::pow(s, -k);
    const double b1 = -2.0 * k * r * b / s;
    const double b2 = -2.0 * k * b / s + 4.0 * k * (k + 1.0) * r * r * b / (s * s);
    const double e = eta.value(r);
    const double e1 = eta.derivative(r);
    const double e2 = eta.second_derivative(r);
    return {e * b, e1 * b + e * b1, e2 * b + 2.0 * e1 * b1 + e * b2};
}

void check_resolution(const RadialGrid& grid, const TestFunctionParams& params) {
    if (!grid.is_ball()) {
        throw DomainError("test functions are centered at x0 and need a ball grid (r_in = 0)");
    }
    if (!(params.epsilon > 0.0) || !(params.delta > params.epsilon)) {
        throw DomainError("test functions need 0 < epsilon < delta");
    }
    if (!(2.0 * params.delta <= grid.r_out())) {
        std::ostringstream os;
        os << "cutoff support 2 delta = " << 2.0 * params.delta << " exceeds r_out = " << grid.r_out();
        throw DomainError(os.str());
    }
    const auto x = grid.nodes();
    const auto below = std::count_if(x.begin(), x.end(), [&](double r) { return r < params.epsilon; });
    if (below < kMinNodesBelowEpsilon) {
        std::ostringstream os;
        os << "epsilon = " << params.epsilon << " is under-resolved: " << below << " nodes below epsilon, "
           << kMinNodesBelowEpsilon << " required (refine the grid or tighten its cluster scale)";
        throw DomainError(os.str());
    }
}

std::vector<double> build_u_eps(const RadialGrid& grid, const TestFunctionParams& params, int n) {
    check_resolution(grid, params);
    std::vector<double> u;
    u.reserve(static_cast<std::size_t>(grid.size()));
    for (double r : grid.nodes()) u.push_back(bubble(r, params, n).u);
    return u;
}

namespace {

// Composite Gauss-Legendre over the grid cells inside the cutoff support,
// with breakpoints at delta and 2 delta where the cutoff is only C^2.
double integrate(const RadialGrid& grid, const TestFunctionParams& params, const std::function<double(double)>& fn) {
    std::vector<double> pts;
    const double stop = 2.0 * params.delta;
    for (double r : grid.nodes()) {
        if (r < stop) pts.push_back(r);
    }
    pts.push_back(params.delta);
    pts.push_back(stop);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        acc += detail::gauss_legendre(fn, pts[i], pts[i + 1]);
    }
    return acc;
}

}  // namespace

EnergyBreakdown mu_of_u_eps(const ProblemSpec& spec, const TestFunctionParams& params) {
    check_resolution(spec.grid, params);
    const int n = spec.dimension();
    const RadialMetric& g = spec.metric;
    EnergyBreakdown e;
    e.laplacian = integrate(spec.grid, params, [&](double r) {
        const BubbleValue b = bubble(r, params, n);
        const double lap = -b.d2u - ((n - 1) / r + g.log_derivative(r)) * b.du;
        return lap * lap * g.density(r);
    });
    e.gradient = integrate(spec.grid, params, [&](double r) {
        const BubbleValue b = bubble(r, params, n);
        return spec.alpha.value(r) * b.du * b.du * g.density(r);
    });
    e.potential = integrate(spec.grid, params, [&](double r) {
        const BubbleValue b = bubble(r, params, n);
        return spec.a.value(r) * b.u * b.u * g.density(r);
    });
    e.total = e.laplacian + e.gradient + e.potential;
    return e;
}

double gamma_of_u_eps(const ProblemSpec& spec, const TestFunctionParams& params) {
    check_resolution(spec.grid, params);
    const int n = spec.dimension();
    const double s = critical_exponent(n);
    return integrate(spec.grid, params, [&](double r) {
        return spec.f.value(r) * std::pow(std::abs(bubble(r, params, n).u), s) * spec.metric.density(r);
    });
}

double q_eps(const ProblemSpec& spec, const TestFunctionParams& params) {
    const double gam = gamma_of_u_eps(spec, params);
    if (!(gam > 0.0)) throw DomainError("q_eps: gamma(u_eps) vanishes");
    return mu_of_u_eps(spec, params).total / std::pow(gam, 2.0 / critical_exponent(spec.dimension()));
}

double analytic_c2(int n, const CurvatureData& curv) {
    if (n < 7) throw DomainError("analytic_c2 needs n >= 7; use analytic_c2_log for n = 6");
    const double nn = n;
    const double num = (nn + 2) * (nn - 4) * (nn - 6) * curv.lap_f_over_f + 8.0 * (nn - 1) * curv.trA0 -
                       4.0 * (nn * nn - 2 * nn - 4) * curv.R0;
    return num / (2.0 * nn * (nn * nn - 4) * (nn - 6));
}

double analytic_c2_log(int n, const CurvatureData& curv) {
    if (n != 6) throw DomainError("analytic_c2_log is the n = 6 coefficient");
    return (n - 4.0) * (curv.trA0 - 2.0 * curv.R0) / ((n * n - 4.0) * ipq(6, 2));
}

double rederived_c2_log(int n, const CurvatureData& curv) {
    return analytic_c2_log(n, curv) / (static_cast<double>(n) * n);
}

std::vector<ExpansionSample> sweep_q_eps(const ProblemSpec& spec, std::span<const double> eps_list, double delta,
                                         int workers) {
    const int n = spec.dimension();
    const double s = critical_exponent(n);
    const double norm = best_constant_K0(n) * std::pow(spec.f.value(0.0), 2.0 / s);
    std::vector<ExpansionSample> out(eps_list.size());
    std::vector<std::string> errors(eps_list.size());
    auto work = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t i = begin; i < eps_list.size(); i += stride) {
            try {
                const TestFunctionParams p{eps_list[i], delta};
                ExpansionSample& e = out[i];
                e.epsilon = eps_list[i];
                e.mu = mu_of_u_eps(spec, p);
                e.gamma = gamma_of_u_eps(spec, p);
                e.q = e.mu.total / std::pow(e.gamma, 2.0 / s);
                e.normalized = e.q * norm;
            } catch (const std::exception& ex) {
                errors[i] = ex.what();
            }
        }
    };
    const auto nw = static_cast<std::size_t>(std::clamp(workers, 1, std::max<int>(1, static_cast<int>(eps_list.size()))));
    if (nw == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < nw; ++w) pool.emplace_back(work, w, nw);
        for (auto& t : pool) t.join();
    }
    std::ostringstream os;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i].empty()) os << "\n  eps = " << eps_list[i] << ": " << errors[i];
    }
    if (!os.str().empty()) throw DomainError("epsilon sweep failed:" + os.str());
    return out;
}

namespace {

struct LinearFit {
    Eigen::VectorXd coef;
    double rms = 0.0;
};

LinearFit least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    // Column scaling keeps the normal equations out of the picture entirely.
    Eigen::VectorXd scale = A.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < scale.size(); ++j) {
        if (scale(j) == 0.0) scale(j) = 1.0;
    }
    const Eigen::MatrixXd As = A * scale.cwiseInverse().asDiagonal();
    LinearFit fit;
    fit.coef = As.colPivHouseholderQr().solve(b).cwiseQuotient(scale);
    fit.rms = std::sqrt((A * fit.coef - b).squaredNorm() / static_cast<double>(b.size()));
    return fit;
}

struct WindowFit {
    double c = 0.0;
    double d = 0.0;
    double leading = 0.0;
    double rms = 0.0;
};

WindowFit fit_window(const std::vector<ExpansionSample>& samples, std::size_t begin, int n, double p) {
    const auto m = static_cast<Eigen::Index>(samples.size() - begin);
    Eigen::MatrixXd A(m, 2);
    Eigen::MatrixXd B(m, 3);
    Eigen::VectorXd z(m);
    Eigen::VectorXd y(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const ExpansionSample& s = samples[begin + static_cast<std::size_t>(k)];
        const double e2 = s.epsilon * s.epsilon;
        const double main = n == 6 ? std::log(1.0 / e2) : 1.0;
        const double nuisance = n == 6 ? 1.0 : std::pow(s.epsilon, p - 2.0);
        A(k, 0) = main;
        A(k, 1) = nuisance;
        z(k) = (s.normalized - 1.0) / e2;
        B(k, 0) = 1.0;
        B(k, 1) = main * e2;
        B(k, 2) = nuisance * e2;
        y(k) = s.normalized;
    }
    const LinearFit f = least_squares(A, z);
    const LinearFit g = least_squares(B, y);
    return {f.coef(0), f.coef(1), g.coef(0), f.rms};
}

}  // namespace

ExpansionFit fit_expansion(const ProblemSpec& spec, std::vector<double> eps_list, const ExpansionOptions& options) {
    const int n = spec.dimension();
    if (n < 6) throw DomainError("the epsilon expansions need n >= 6");
    if (eps_list.size() < 4) throw DomainError("fit_expansion: degenerate fit, at least 4 epsilon values needed");
    std::sort(eps_list.begin(), eps_list.end(), std::greater<>());
    if (std::adjacent_find(eps_list.begin(), eps_list.end()) != eps_list.end()) {
        throw DomainError("fit_expansion: epsilon values must be distinct");
    }

    ExpansionFit fit;
    fit.model = n == 6 ? "eps2_log" : "eps2";
    fit.eps_list = eps_list;
    fit.samples = sweep_q_eps(spec, eps_list, options.delta, options.workers);
    for (const auto& s : fit.samples) fit.q_values.push_back(s.q);
    fit.nuisance_exponent = n == 6 ? 2.0 : std::min(n - 4.0, 4.0);

    const CurvatureData curv = spec.curvature();
    if (n == 6) {
        fit.c2_analytic = analytic_c2_log(n, curv);
        fit.c2_rederived = rederived_c2_log(n, curv);
    } else {
        fit.c2_analytic = analytic_c2(n, curv);
        fit.c2_rederived = fit.c2_analytic;
    }

    // Drop the largest eps while the residuals exceed what quadrature noise explains.
    std::size_t begin = 0;
    WindowFit w = fit_window(fit.samples, begin, n, fit.nuisance_exponent);
    while (fit.samples.size() - begin > 4 && w.rms > 1e-3 * std::max(1.0, std::abs(w.c))) {
        ++begin;
        w = fit_window(fit.samples, begin, n, fit.nuisance_exponent);
    }
    fit.window_begin = static_cast<int>(begin);
    fit.c2_fit = w.c;
    fit.nuisance_coefficient = w.d;
    fit.leading = w.leading;
    fit.residual_rms = w.rms;
    fit.rel_error = fit.c2_analytic != 0.0 ? std::abs(fit.c2_fit - fit.c2_analytic) / std::abs(fit.c2_analytic)
                                           : std::abs(fit.c2_fit);

    fit.c2_fit_refined = std::numeric_limits<double>::quiet_NaN();
    if (options.refine) {
        const RadialGrid& g = spec.grid;
        const int m2 = 2 * g.size() - 1;
        ProblemSpec fine = spec;
        fine.grid = g.cluster_scale() > 0.0 ? RadialGrid::graded(g.r_out(), m2, n, g.cluster_scale())
                                            : RadialGrid::uniform(0.0, g.r_out(), m2, n);
        const std::vector<double> kept(eps_list.begin() + static_cast<std::ptrdiff_t>(begin), eps_list.end());
        const auto samples = sweep_q_eps(fine, kept, options.delta, options.workers);
        fit.c2_fit_refined = fit_window(samples, 0, n, fit.nuisance_exponent).c;
    }
    return fit;
}

Certificate threshold_certificate(const ProblemSpec& spec, const ContinuationTrace& trace, const ExpansionFit& fit) {
    Certificate c;
    c.threshold = trace.threshold > 0.0 ? trace.threshold : nontriviality_threshold(spec);
    c.c2_analytic = fit.c2_analytic;
    c.curvature_hypothesis = fit.c2_analytic < 0.0;
    if (trace.stages.empty()) {
        c.notes.push_back("no converged continuation stage");
    } else {
        c.mu = trace.limit_mu;
        c.threshold_met = trace.threshold_met;
        const DiscreteOperator op = assemble_paneitz(spec);
        auto u = op.embed(trace.stages.back().w);
        for (std::size_t i = 0; i < u.size() && i < trace.h.size(); ++i) u[i] += trace.h[i];
        c.nodal_count = nodal_check(u);
        c.nodal = c.nodal_count >= 1;
    }
    if (trace.failed) c.notes.push_back("continuation failed: " + trace.failure);
    if (!c.curvature_hypothesis) c.notes.push_back("curvature hypothesis not satisfied (c2 >= 0)");
    if (!c.threshold_met) c.notes.push_back("energy threshold not met");
    if (!c.nodal) c.notes.push_back("u = w + h does not change sign");
    if (spec.grid.is_ball() && !trace.stages.empty()) {
        c.notes.push_back("ball grid: the critical-stage minimizer can collapse onto the center node, whose cell "
                          "admits energies below the Sobolev bound, so threshold_met is not reliable here");
    }
    c.nontrivial_nodal = c.threshold_met && c.curvature_hypothesis && c.nodal;
    return c;
}

}  // namespace paneitz
