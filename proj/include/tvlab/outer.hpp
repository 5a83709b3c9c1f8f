#pragma once

#include <memory>
#include <stdexcept>
#include <vector>

#include "tvlab/imaging.hpp"
#include "tvlab/rof.hpp"

namespace tvlab {

// Outer loops for the general model
//     min_U 0.5*||A U - f||^2 + lambda * TV_w(U)
// with an arbitrary linear imaging operator A. Each outer step hands a
// quadratic subproblem (rof_energy with the configured alpha) to one of
// the inner ROF solvers. Initial values are U^0 = 0 and d^0 = 0.

struct OuterResult {
    Image u;
    std::vector<double> energy_trace; // normalized_energy per outer iteration
};

namespace detail {

inline void check_outer_inputs(const std::vector<double>& f, const ImagingOperator& A,
                               const SolverConfig& cfg) {
    cfg.validate();
    if (f.size() != A.output_size())
        throw std::invalid_argument("outer loop: observation size mismatch");
    const NormEstimate est = estimate_operator_norm(A, 1e-6, 100);
    // Power iteration approaches the norm from below, so this check can
    // only be too lenient, never spuriously strict.
    if (!est.degenerate && !(cfg.alpha > 2.0 * est.value * (1.0 - 1e-6)))
        throw std::invalid_argument("outer loop: alpha must exceed 2*||A^T A||");
}

inline double energy_from_parts(const Image& u, const std::vector<double>& au,
                                const std::vector<double>& f, const SolverConfig& cfg) {
    double fid = 0.0;
    for (size_t i = 0; i < f.size(); ++i) {
        const double d = au[i] - f[i];
        fid += d * d;
    }
    const double total = 0.5 * fid + cfg.lambda * tv_energy(u, cfg.weight_x, cfg.weight_y);
    return total / static_cast<double>(u.pixels());
}

inline Image run_inner(const Image& v, const SolverConfig& cfg, InnerSolver which) {
    return (which == InnerSolver::Fast)
               ? fast_solver(v, cfg, cfg.inner_iters).u
               : residual_solver(v, cfg, cfg.inner_iters).u;
}

} // namespace detail

/// Proximal-gradient outer loop:
///   V^{t+1} = U^t - (1/alpha) A^T (A U^t - f - d^t)
///   U^{t+1} = inner ROF solve at V^{t+1}
///   d^{t+1} = d^t + f - A U^{t+1}
/// Two applies and one adjoint of A per iteration.
inline OuterResult proximal_outer(const std::vector<double>& f, const ImagingOperator& A,
                                  const SolverConfig& cfg, InnerSolver inner,
                                  bool record_trace = true) {
    detail::check_outer_inputs(f, A, cfg);
    const int h = A.input_height(), w = A.input_width();
    const double inv_alpha = 1.0 / cfg.alpha;

    OuterResult res;
    res.u = Image(h, w, 1);
    std::vector<double> d(f.size(), 0.0);

    if (record_trace)
        res.energy_trace.push_back(
            detail::energy_from_parts(res.u, std::vector<double>(f.size(), 0.0), f, cfg));

    for (int t = 0; t < cfg.outer_iters; ++t) {
        std::vector<double> au = A.apply(res.u);
        for (size_t i = 0; i < au.size(); ++i) au[i] -= f[i] + d[i];
        const Image step = A.apply_adjoint(au);
        Image v(h, w, 1);
        for (size_t i = 0; i < v.size(); ++i)
            v.values()[i] = res.u.values()[i] - inv_alpha * step.values()[i];
        res.u = detail::run_inner(v, cfg, inner);
        const std::vector<double> au_next = A.apply(res.u);
        for (size_t i = 0; i < d.size(); ++i) d[i] += f[i] - au_next[i];
        if (record_trace)
            res.energy_trace.push_back(detail::energy_from_parts(res.u, au_next, f, cfg));
    }
    return res;
}

/// Dual-first outer loop with the extrapolated dual step:
///   d^{t+1} = d^t + f - A U^t
///   V^{t+1} = U^t + (1/alpha) A^T (2 d^{t+1} - d^t)
///   U^{t+1} = inner ROF solve at V^{t+1}
/// One apply and one adjoint of A per iteration (no A^T A product); the
/// energy trace reuses the next iteration's apply, plus a single closing
/// apply after the loop.
inline OuterResult dual_first_outer(const std::vector<double>& f, const ImagingOperator& A,
                                    const SolverConfig& cfg, InnerSolver inner,
                                    bool record_trace = true) {
    detail::check_outer_inputs(f, A, cfg);
    const int h = A.input_height(), w = A.input_width();
    const double inv_alpha = 1.0 / cfg.alpha;

    OuterResult res;
    res.u = Image(h, w, 1);
    std::vector<double> d(f.size(), 0.0);

    for (int t = 0; t < cfg.outer_iters; ++t) {
        const std::vector<double> au = A.apply(res.u);
        if (record_trace) res.energy_trace.push_back(detail::energy_from_parts(res.u, au, f, cfg));
        std::vector<double> extrap(d.size());
        for (size_t i = 0; i < d.size(); ++i) {
            const double d_next = d[i] + f[i] - au[i];
            extrap[i] = 2.0 * d_next - d[i];
            d[i] = d_next;
        }
        const Image step = A.apply_adjoint(extrap);
        Image v(h, w, 1);
        for (size_t i = 0; i < v.size(); ++i)
            v.values()[i] = res.u.values()[i] + inv_alpha * step.values()[i];
        res.u = detail::run_inner(v, cfg, inner);
    }
    if (record_trace)
        res.energy_trace.push_back(detail::energy_from_parts(res.u, A.apply(res.u), f, cfg));
    return res;
}

inline OuterResult proximal_outer(const Image& f, const ImagingOperator& A,
                                  const SolverConfig& cfg, InnerSolver inner,
                                  bool record_trace = true) {
    return proximal_outer(f.values(), A, cfg, inner, record_trace);
}

inline OuterResult dual_first_outer(const Image& f, const ImagingOperator& A,
                                    const SolverConfig& cfg, InnerSolver inner,
                                    bool record_trace = true) {
    return dual_first_outer(f.values(), A, cfg, inner, record_trace);
}

} // namespace tvlab
