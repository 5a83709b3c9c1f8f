#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tvlab/image.hpp"

namespace tvlab {

// Discrete differential operators on the pixel grid.
//
// Differences are forward differences with periodic (circular) wrap-around:
// the difference at the last column wraps to the first. The wrap-around
// convention is what makes the adjoint an equally simple stencil, and it is
// what lets every operator used by the solvers (gradient, divergence, and
// their compositions) be written as a single 3x3 convolution with circular
// padding -- the property the unfolded network relies on for exact
// equivalence with the iterative solver. See the fixed-kernel construction
// in rsnet.hpp.

/// Forward-difference gradient of a single-channel image.
/// Channel 0: difference along x (columns); channel 1: along y (rows).
inline VectorField gradient(const Image& u) {
    if (u.channels() != 1)
        throw std::invalid_argument("gradient: expects a single-channel image");
    const int h = u.height(), w = u.width();
    VectorField g(h, w, 2);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const int cn = (c + 1 == w) ? 0 : c + 1;
            const int rn = (r + 1 == h) ? 0 : r + 1;
            g.at(0, r, c) = u.at(r, cn) - u.at(r, c);
            g.at(1, r, c) = u.at(rn, c) - u.at(r, c);
        }
    }
    return g;
}

/// Exact adjoint of `gradient` under the Euclidean inner product:
/// <gradient(u), b> == <u, adjoint_gradient(b)> to rounding.
/// This is the negative discrete divergence.
inline Image adjoint_gradient(const VectorField& b) {
    if (b.channels() != 2)
        throw std::invalid_argument("adjoint_gradient: expects a 2-channel field");
    const int h = b.height(), w = b.width();
    Image out(h, w, 1);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const int cp = (c == 0) ? w - 1 : c - 1;
            const int rp = (r == 0) ? h - 1 : r - 1;
            out.at(r, c) = (b.at(0, r, cp) - b.at(0, r, c)) +
                           (b.at(1, rp, c) - b.at(1, r, c));
        }
    }
    return out;
}

/// Clipping nonlinearity: beta for x > beta, x inside, -beta below.
inline double cut(double x, double beta) {
    return std::clamp(x, -beta, beta);
}

/// Soft threshold, the complement of cut: shrink(x) = x - cut(x).
inline double shrink(double x, double beta) {
    return x - cut(x, beta);
}

/// Element-wise cut over a field, one threshold per channel.
inline VectorField cut_field(const VectorField& b, const std::vector<double>& beta_per_channel) {
    if (static_cast<int>(beta_per_channel.size()) != b.channels())
        throw std::invalid_argument("cut_field: one threshold per channel required");
    VectorField out = b;
    const size_t plane = static_cast<size_t>(b.height()) * b.width();
    for (int ch = 0; ch < b.channels(); ++ch) {
        const double beta = beta_per_channel[ch];
        double* p = out.values().data() + static_cast<size_t>(ch) * plane;
        for (size_t i = 0; i < plane; ++i) p[i] = cut(p[i], beta);
    }
    return out;
}

/// Weighted anisotropic total variation:
///   sum over pixels of wx*|dx u| + wy*|dy u|.
/// The unweighted l1 gradient norm is the call with wx = wy = 1.
inline double tv_energy(const Image& u, double weight_x, double weight_y) {
    if (u.channels() != 1)
        throw std::invalid_argument("tv_energy: expects a single-channel image");
    const VectorField g = gradient(u);
    const int h = u.height(), w = u.width();
    double acc = 0.0;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            acc += weight_x * std::abs(g.at(0, r, c)) + weight_y * std::abs(g.at(1, r, c));
    return acc;
}

namespace detail {
inline double sq_diff_sum(const Image& a, const Image& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a.values()[i] - b.values()[i];
        acc += d * d;
    }
    return acc;
}
} // namespace detail

/// ROF inner energy: (alpha/2)||u - v||^2 + lambda * TV_w(u).
inline double rof_energy(const Image& u, const Image& v, const SolverConfig& cfg) {
    if (!u.same_shape(v))
        throw std::invalid_argument("rof_energy: shape mismatch");
    return 0.5 * cfg.alpha * detail::sq_diff_sum(u, v) +
           cfg.lambda * tv_energy(u, cfg.weight_x, cfg.weight_y);
}

} // namespace tvlab
