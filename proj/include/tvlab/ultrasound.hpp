#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "tvlab/imaging.hpp"
#include "tvlab/metrics.hpp"
#include "tvlab/outer.hpp"
#include "tvlab/rng.hpp"

namespace tvlab {

// Transmission ultrasound speed-of-sound model.
//
// A piecewise-constant tissue map assigns each region a display value in
// [0, 255], mapped affinely to a speed contrast C in [-40, +40] m/s around
// the mean tissue speed S = 1540 m/s. The per-pixel time delay (relative
// to S, per meter of path) is U = 1/(S+C) - 1/S. Straight rays from
// top-edge emitters to bottom-edge receivers integrate U, giving measured
// delays f = A U where row r of A holds the exact per-cell intersection
// lengths of ray r.

inline constexpr double kTissueSpeed = 1540.0;   // m/s
inline constexpr double kContrastSpan = 40.0;    // display 0..255 -> -40..+40 m/s

/// Display value in [0,255] -> speed contrast in m/s.
inline double display_to_contrast(double v) {
    return (v / 255.0) * (2.0 * kContrastSpan) - kContrastSpan;
}
inline double contrast_to_display(double c) {
    return (c + kContrastSpan) * 255.0 / (2.0 * kContrastSpan);
}
/// Contrast -> per-meter time delay relative to the mean speed.
inline double contrast_to_delay(double c) {
    return 1.0 / (kTissueSpeed + c) - 1.0 / kTissueSpeed;
}
/// Exact inverse of contrast_to_delay.
inline double delay_to_contrast(double u) {
    return 1.0 / (u + 1.0 / kTissueSpeed) - kTissueSpeed;
}
inline double display_to_delay(double v) {
    return contrast_to_delay(display_to_contrast(v));
}
inline double delay_to_display(double u) {
    return contrast_to_display(delay_to_contrast(u));
}

/// Local sensitivity |dU/d display| at C = 0; used to scale the
/// reconstruction variable onto the display range.
inline double delay_sensitivity() {
    return (2.0 * kContrastSpan / 255.0) / (kTissueSpeed * kTissueSpeed);
}

struct Phantom {
    Image display;   // region values on the [0,255] scale
    Image contrast;  // C, m/s
    Image delay;     // U = 1/(S+C) - 1/S, s/m
    int regions = 0;
    uint64_t seed = 0;
};

/// Voronoi phantom: n seed points, each pixel takes its nearest seed's
/// region value (squared Euclidean distance on pixel centers; ties go to
/// the lowest seed index). Pure function of the arguments.
inline Phantom generate_voronoi_phantom(int height, int width, int n,
                                        double value_lo, double value_hi, uint64_t seed) {
    if (n < 1) throw std::invalid_argument("generate_voronoi_phantom: n must be >= 1");
    if (static_cast<long long>(n) > static_cast<long long>(height) * width)
        throw std::invalid_argument("generate_voronoi_phantom: more regions than pixels");
    Rng rng(seed);
    std::vector<int> seed_r(n), seed_c(n);
    for (int i = 0; i < n; ++i) {
        seed_r[i] = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(height)));
        seed_c[i] = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(width)));
    }
    std::vector<double> region_value(n);
    for (int i = 0; i < n; ++i) region_value[i] = rng.uniform(value_lo, value_hi);

    Phantom p;
    p.regions = n;
    p.seed = seed;
    p.display = Image(height, width, 1);
    p.contrast = Image(height, width, 1);
    p.delay = Image(height, width, 1);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
            int best = 0;
            long long best_d2 = -1;
            for (int i = 0; i < n; ++i) {
                const long long dr = r - seed_r[i], dc = c - seed_c[i];
                const long long d2 = dr * dr + dc * dc;
                if (best_d2 < 0 || d2 < best_d2) {
                    best_d2 = d2;
                    best = i;
                }
            }
            const double v = region_value[best];
            p.display.at(r, c) = v;
            p.contrast.at(r, c) = display_to_contrast(v);
            p.delay.at(r, c) = contrast_to_delay(p.contrast.at(r, c));
        }
    return p;
}

struct RayGeometry {
    int grid_height = 0;
    int grid_width = 0;
    double cell_size = 1e-3; // meters per cell edge (square cells)
    // Emitter x-positions along the top edge (y = 0) and receiver
    // x-positions along the bottom edge (y = grid_height * cell_size).
    std::vector<double> emitter_x;
    std::vector<double> receiver_x;

    double width_m() const { return grid_width * cell_size; }
    double height_m() const { return grid_height * cell_size; }
    size_t ray_count() const { return emitter_x.size() * receiver_x.size(); }
};

/// Default transmission layout: `emitters` equispaced sources on the top
/// edge, `receivers` equispaced sensors on the bottom edge, all pairs used.
inline RayGeometry make_ray_geometry(int grid_height, int grid_width,
                                     int emitters, int receivers,
                                     double cell_size = 1e-3) {
    if (grid_height < 1 || grid_width < 1 || emitters < 1 || receivers < 1 || !(cell_size > 0))
        throw std::invalid_argument("make_ray_geometry: invalid arguments");
    RayGeometry g;
    g.grid_height = grid_height;
    g.grid_width = grid_width;
    g.cell_size = cell_size;
    g.emitter_x.resize(emitters);
    g.receiver_x.resize(receivers);
    for (int i = 0; i < emitters; ++i)
        g.emitter_x[i] = (i + 0.5) * g.width_m() / emitters;
    for (int i = 0; i < receivers; ++i)
        g.receiver_x[i] = (i + 0.5) * g.width_m() / receivers;
    return g;
}

/// Exact straight-ray discretization: row r of the operator holds the
/// geometric length (meters) of ray r inside each grid cell, found by
/// splitting the segment at every cell-boundary crossing.
inline std::shared_ptr<SparseOperator> build_ray_operator(const RayGeometry& geom) {
    const int h = geom.grid_height, w = geom.grid_width;
    const double cs = geom.cell_size;
    std::vector<SparseOperator::Row> rows;
    rows.reserve(geom.ray_count());

    for (double ex : geom.emitter_x)
        for (double rx : geom.receiver_x) {
            const double x0 = ex, y0 = 0.0;
            const double x1 = rx, y1 = geom.height_m();
            const double dx = x1 - x0, dy = y1 - y0;
            const double len = std::hypot(dx, dy);
            if (!(len > 0.0))
                throw std::invalid_argument("build_ray_operator: degenerate ray");

            // Split parameters t in [0,1] at every vertical and horizontal
            // grid line crossed by the segment.
            std::vector<double> ts{0.0, 1.0};
            if (dx != 0.0)
                for (int k = 0; k <= w; ++k) {
                    const double t = (k * cs - x0) / dx;
                    if (t > 0.0 && t < 1.0) ts.push_back(t);
                }
            for (int k = 0; k <= h; ++k) {
                const double t = (k * cs - y0) / dy;
                if (t > 0.0 && t < 1.0) ts.push_back(t);
            }
            std::sort(ts.begin(), ts.end());

            SparseOperator::Row row;
            std::vector<double> weights(static_cast<size_t>(h) * w, 0.0);
            for (size_t i = 0; i + 1 < ts.size(); ++i) {
                const double t0 = ts[i], t1 = ts[i + 1];
                if (t1 <= t0) continue;
                const double tm = 0.5 * (t0 + t1);
                const double xm = x0 + tm * dx, ym = y0 + tm * dy;
                const int c = static_cast<int>(std::floor(xm / cs));
                const int r = static_cast<int>(std::floor(ym / cs));
                if (c < 0 || c >= w || r < 0 || r >= h) continue;
                weights[static_cast<size_t>(r) * w + c] += (t1 - t0) * len;
            }
            for (size_t k = 0; k < weights.size(); ++k)
                if (weights[k] != 0.0) row.push_back({k, weights[k]});
            rows.push_back(std::move(row));
        }
    return std::make_shared<SparseOperator>(h, w, std::move(rows));
}

/// f = A * delay map, plus optional seed-deterministic Gaussian noise in
/// seconds.
inline std::vector<double> simulate_delays(const Phantom& phantom, const ImagingOperator& A,
                                           double noise_sigma, uint64_t seed) {
    if (phantom.delay.height() != A.input_height() || phantom.delay.width() != A.input_width())
        throw std::invalid_argument("simulate_delays: phantom does not match the operator grid");
    if (noise_sigma < 0.0)
        throw std::invalid_argument("simulate_delays: noise_sigma must be >= 0");
    std::vector<double> f = A.apply(phantom.delay);
    if (noise_sigma > 0.0) {
        Rng rng(seed);
        for (double& x : f) x += noise_sigma * rng.normal();
    }
    return f;
}

namespace detail {

/// Generic scalar-scaled view of an operator.
class ScaledView final : public ImagingOperator {
public:
    ScaledView(const ImagingOperator& inner, double scale) : inner_(inner), scale_(scale) {}
    int input_height() const override { return inner_.input_height(); }
    int input_width() const override { return inner_.input_width(); }
    size_t output_size() const override { return inner_.output_size(); }
    std::vector<double> apply(const Image& u) const override {
        std::vector<double> y = inner_.apply(u);
        for (double& x : y) x *= scale_;
        return y;
    }
    Image apply_adjoint(const std::vector<double>& y) const override {
        Image u = inner_.apply_adjoint(y);
        for (double& x : u.values()) x *= scale_;
        return u;
    }

private:
    const ImagingOperator& inner_;
    double scale_;
};

} // namespace detail

struct SosReconstruction {
    Image delay;    // estimated delay map (s/m)
    Image display;  // exact nonlinear inversion to the [0,255] scale
};

/// Anisotropic TV reconstruction of the delay map from ray delays via the
/// dual-first outer loop. Internally the problem is solved on a display-
/// scaled proxy variable y with delay = -sensitivity * y, and the operator
/// is normalized so that ||A^T A|| = 1/variable_scale^2 (the default keeps
/// it at exactly 1, which is the fastest-converging scaling for the dual
/// accumulation). cfg.lambda is the TV weight of that normalized problem;
/// cfg.weight_x carries the axis weight w.
inline SosReconstruction reconstruct_sos(const std::vector<double>& f, const ImagingOperator& A,
                                         const SolverConfig& cfg, InnerSolver inner,
                                         double variable_scale = 1.0) {
    cfg.validate();
    if (f.size() != A.output_size())
        throw std::invalid_argument("reconstruct_sos: observation size mismatch");
    if (!(variable_scale > 0.0))
        throw std::invalid_argument("reconstruct_sos: variable_scale must be > 0");

    const NormEstimate est = estimate_operator_norm(A, 1e-9, 1000);
    if (est.degenerate || !(est.value > 0.0))
        throw std::invalid_argument("reconstruct_sos: degenerate ray operator");
    const double su = delay_sensitivity();
    const double op_scale = 1.0 / (std::sqrt(est.value) * variable_scale);

    const detail::ScaledView A_hat(A, op_scale);
    std::vector<double> g(f.size());
    for (size_t i = 0; i < f.size(); ++i) g[i] = -f[i] / su * op_scale;

    const OuterResult res = dual_first_outer(g, A_hat, cfg, inner, /*record_trace=*/false);

    SosReconstruction out;
    out.delay = Image(res.u.height(), res.u.width(), 1);
    out.display = Image(res.u.height(), res.u.width(), 1);
    for (size_t i = 0; i < res.u.size(); ++i) {
        const double u = -su * res.u.values()[i];
        out.delay.values()[i] = u;
        out.display.values()[i] = delay_to_display(u);
    }
    return out;
}

/// Central region used for reconstruction metrics: the paper-noted weak
/// coverage sits at the left/right borders, so those columns are dropped.
inline Image central_region(const Image& x, int border_cols = 3) {
    return crop(x, 0, border_cols, x.height(), x.width() - 2 * border_cols);
}

} // namespace tvlab
