#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tvlab/imaging.hpp"
#include "tvlab/outer.hpp"
#include "tvlab/rng.hpp"
#include "tvlab/rof.hpp"

namespace tvlab {

// Unfolded residual-solver network.
//
// The network mirrors the inner solver's b-field iteration:
//     g   = conv(v, in_kernel)                        (shared across blocks)
//     b^j = clip(g + conv(b^{j-1}, block_kernel[j]), +-beta),  j = 1..B
//     u   = v + conv(b^B, out_kernel)
// All convolutions are 3x3 cross-correlations with circular padding, stride
// 1, no bias, and no normalization layers. Circular padding matches the
// wrap-around convention of the grid operators, which is what allows
// kernels_from_rs to reproduce the iterative solver exactly: with replicate
// padding no 3x3 kernel can realize the exact adjoint gradient at the
// boundary, so the solver equivalence below would only hold in the
// interior.

/// Kernel bank layout: entry (out_ch, in_ch, kr, kc) at
/// ((out_ch*in_channels + in_ch)*3 + kr)*3 + kc.
struct RsnetParams {
    int blocks = 0;     // B
    int channels = 0;   // C
    double beta = 0.2;  // clip threshold (fixed hyperparameter, not learned)

    std::vector<double> in_kernel;                  // C x 1 x 3 x 3
    std::vector<std::vector<double>> block_kernels; // B banks of C x C x 3 x 3
    std::vector<double> out_kernel;                 // 1 x C x 3 x 3

    size_t parameter_count() const {
        const size_t c = static_cast<size_t>(channels);
        return 9 * c + 9 * c * c * static_cast<size_t>(blocks) + 9 * c;
    }

    void validate() const {
        if (blocks < 1 || channels < 1)
            throw std::invalid_argument("RsnetParams: blocks and channels must be >= 1");
        if (!(beta > 0.0))
            throw std::invalid_argument("RsnetParams: beta must be positive");
        const size_t c = static_cast<size_t>(channels);
        if (in_kernel.size() != 9 * c || out_kernel.size() != 9 * c ||
            block_kernels.size() != static_cast<size_t>(blocks))
            throw std::invalid_argument("RsnetParams: kernel bank shape mismatch");
        for (const auto& k : block_kernels)
            if (k.size() != 9 * c * c)
                throw std::invalid_argument("RsnetParams: block kernel shape mismatch");
        for (double x : in_kernel)
            if (!std::isfinite(x)) throw std::invalid_argument("RsnetParams: non-finite kernel");
        for (double x : out_kernel)
            if (!std::isfinite(x)) throw std::invalid_argument("RsnetParams: non-finite kernel");
        for (const auto& k : block_kernels)
            for (double x : k)
                if (!std::isfinite(x)) throw std::invalid_argument("RsnetParams: non-finite kernel");
    }
};

/// Gradients with the same shape as RsnetParams kernels.
struct RsnetGrads {
    std::vector<double> in_kernel;
    std::vector<std::vector<double>> block_kernels;
    std::vector<double> out_kernel;

    static RsnetGrads zeros_like(const RsnetParams& p) {
        RsnetGrads g;
        g.in_kernel.assign(p.in_kernel.size(), 0.0);
        g.out_kernel.assign(p.out_kernel.size(), 0.0);
        g.block_kernels.resize(p.block_kernels.size());
        for (size_t j = 0; j < p.block_kernels.size(); ++j)
            g.block_kernels[j].assign(p.block_kernels[j].size(), 0.0);
        return g;
    }

    void accumulate(const RsnetGrads& o, double scale = 1.0) {
        for (size_t i = 0; i < in_kernel.size(); ++i) in_kernel[i] += scale * o.in_kernel[i];
        for (size_t i = 0; i < out_kernel.size(); ++i) out_kernel[i] += scale * o.out_kernel[i];
        for (size_t j = 0; j < block_kernels.size(); ++j)
            for (size_t i = 0; i < block_kernels[j].size(); ++i)
                block_kernels[j][i] += scale * o.block_kernels[j][i];
    }
};

namespace detail {

inline int wrap(int i, int n) { return i < 0 ? i + n : (i >= n ? i - n : i); }

/// out(co,r,c) = sum_{ci,kr,kc} K[co][ci][kr][kc] * in(ci, r+kr-1, c+kc-1), circular.
inline Image conv_cc(const Image& in, const std::vector<double>& kernels, int out_channels) {
    const int h = in.height(), w = in.width(), cin = in.channels();
    Image out(h, w, out_channels);
    for (int co = 0; co < out_channels; ++co)
        for (int ci = 0; ci < cin; ++ci) {
            const double* k = kernels.data() + (static_cast<size_t>(co) * cin + ci) * 9;
            for (int r = 0; r < h; ++r)
                for (int c = 0; c < w; ++c) {
                    double acc = 0.0;
                    for (int kr = 0; kr < 3; ++kr) {
                        const int rr = wrap(r + kr - 1, h);
                        for (int kc = 0; kc < 3; ++kc)
                            acc += k[kr * 3 + kc] * in.at(ci, rr, wrap(c + kc - 1, w));
                    }
                    out.at(co, r, c) += acc;
                }
        }
    return out;
}

/// Adjoint of conv_cc with respect to its input, for fixed kernels.
inline Image conv_cc_input_adjoint(const Image& dout, const std::vector<double>& kernels,
                                   int in_channels) {
    const int h = dout.height(), w = dout.width(), cout = dout.channels();
    Image din(h, w, in_channels);
    for (int co = 0; co < cout; ++co)
        for (int ci = 0; ci < in_channels; ++ci) {
            const double* k = kernels.data() + (static_cast<size_t>(co) * in_channels + ci) * 9;
            for (int r = 0; r < h; ++r)
                for (int c = 0; c < w; ++c) {
                    double acc = 0.0;
                    for (int kr = 0; kr < 3; ++kr) {
                        const int rr = wrap(r - (kr - 1), h);
                        for (int kc = 0; kc < 3; ++kc)
                            acc += k[kr * 3 + kc] * dout.at(co, rr, wrap(c - (kc - 1), w));
                    }
                    din.at(ci, r, c) += acc;
                }
        }
    return din;
}

/// Gradient of conv_cc with respect to the kernels, for fixed input.
inline std::vector<double> conv_cc_kernel_grad(const Image& in, const Image& dout) {
    const int h = in.height(), w = in.width(), cin = in.channels(), cout = dout.channels();
    std::vector<double> dk(static_cast<size_t>(cout) * cin * 9, 0.0);
    for (int co = 0; co < cout; ++co)
        for (int ci = 0; ci < cin; ++ci) {
            double* k = dk.data() + (static_cast<size_t>(co) * cin + ci) * 9;
            for (int kr = 0; kr < 3; ++kr)
                for (int kc = 0; kc < 3; ++kc) {
                    double acc = 0.0;
                    for (int r = 0; r < h; ++r) {
                        const int rr = wrap(r + kr - 1, h);
                        for (int c = 0; c < w; ++c)
                            acc += dout.at(co, r, c) * in.at(ci, rr, wrap(c + kc - 1, w));
                    }
                    k[kr * 3 + kc] = acc;
                }
        }
    return dk;
}

} // namespace detail

/// Intermediates retained by the forward pass for reverse mode.
struct RsnetTape {
    Image v;                        // network input
    Image g;                        // shared conv(v, in_kernel)
    std::vector<Image> pre;         // pre-activation per block, 1..B
    std::vector<Image> b;           // post-clip field per block, 1..B
    Image u;                        // network output
};

struct RsnetOutput {
    Image u;
    RsnetTape tape;
};

inline RsnetOutput rsnet_forward(const Image& v, const RsnetParams& p) {
    p.validate();
    if (v.channels() != 1)
        throw std::invalid_argument("rsnet_forward: expects a single-channel image");
    const int h = v.height(), w = v.width(), C = p.channels;

    RsnetOutput out;
    out.tape.v = v;
    out.tape.g = detail::conv_cc(v, p.in_kernel, C);
    out.tape.pre.reserve(p.blocks);
    out.tape.b.reserve(p.blocks);

    Image b(h, w, C); // b^0 = 0
    for (int j = 0; j < p.blocks; ++j) {
        Image pre = detail::conv_cc(b, p.block_kernels[j], C);
        for (size_t i = 0; i < pre.size(); ++i) pre.values()[i] += out.tape.g.values()[i];
        out.tape.pre.push_back(pre);
        for (size_t i = 0; i < pre.size(); ++i)
            pre.values()[i] = cut(pre.values()[i], p.beta);
        out.tape.b.push_back(pre);
        b = pre;
    }
    const Image res = detail::conv_cc(b, p.out_kernel, 1);
    out.u = v;
    for (size_t i = 0; i < out.u.size(); ++i) out.u.values()[i] += res.values()[i];
    out.tape.u = out.u;
    return out;
}

/// Unsupervised training loss: the resolution-normalized model energy of
/// the network output against the input's observation. No ground truth.
inline double rsnet_loss(const Image& u, const std::vector<double>& f,
                         const ImagingOperator& A, const SolverConfig& cfg) {
    return normalized_energy(u, f, A, cfg);
}

inline double rsnet_loss(const Image& u, const Image& f, const ImagingOperator& A,
                         const SolverConfig& cfg) {
    return normalized_energy(u, f, A, cfg);
}

/// Reverse-mode gradients of rsnet_loss(forward(v), f, A, cfg) with respect
/// to every kernel entry. The clip derivative is 1 strictly inside
/// (-beta, beta) and 0 outside, including at the corner points.
inline RsnetGrads rsnet_backward(const RsnetTape& tape, const std::vector<double>& f,
                                 const ImagingOperator& A, const SolverConfig& cfg,
                                 const RsnetParams& p) {
    p.validate();
    if (tape.pre.size() != static_cast<size_t>(p.blocks))
        throw std::invalid_argument("rsnet_backward: tape does not match parameters");
    const Image& u = tape.u;
    const double inv_pixels = 1.0 / static_cast<double>(u.pixels());

    // dL/du = (1/P) [ A^T (A u - f) + lambda * subgrad TV_w(u) ]
    std::vector<double> au = A.apply(u);
    if (au.size() != f.size())
        throw std::invalid_argument("rsnet_backward: observation size mismatch");
    for (size_t i = 0; i < au.size(); ++i) au[i] -= f[i];
    Image du = A.apply_adjoint(au);
    {
        VectorField gu = gradient(u);
        for (int r = 0; r < u.height(); ++r)
            for (int c = 0; c < u.width(); ++c) {
                const double gx = gu.at(0, r, c), gy = gu.at(1, r, c);
                gu.at(0, r, c) = cfg.weight_x * (gx > 0.0 ? 1.0 : (gx < 0.0 ? -1.0 : 0.0));
                gu.at(1, r, c) = cfg.weight_y * (gy > 0.0 ? 1.0 : (gy < 0.0 ? -1.0 : 0.0));
            }
        const Image tv_sub = adjoint_gradient(gu);
        for (size_t i = 0; i < du.size(); ++i)
            du.values()[i] = inv_pixels * (du.values()[i] + cfg.lambda * tv_sub.values()[i]);
    }

    RsnetGrads grads = RsnetGrads::zeros_like(p);
    // u = v + conv(b^B, out_kernel)
    grads.out_kernel = detail::conv_cc_kernel_grad(tape.b.back(), du);
    Image db = detail::conv_cc_input_adjoint(du, p.out_kernel, p.channels);

    Image dg(u.height(), u.width(), p.channels);
    const Image b0(u.height(), u.width(), p.channels); // b^0 = 0
    for (int j = p.blocks - 1; j >= 0; --j) {
        // b^j = clip(pre^j); pre^j = g + conv(b^{j-1}, K_j)
        Image dpre = db;
        for (size_t i = 0; i < dpre.size(); ++i)
            if (std::abs(tape.pre[j].values()[i]) >= p.beta) dpre.values()[i] = 0.0;
        for (size_t i = 0; i < dg.size(); ++i) dg.values()[i] += dpre.values()[i];
        const Image& b_prev_img = (j == 0) ? b0 : tape.b[j - 1];
        grads.block_kernels[j] = detail::conv_cc_kernel_grad(b_prev_img, dpre);
        db = detail::conv_cc_input_adjoint(dpre, p.block_kernels[j], p.channels);
    }
    grads.in_kernel = detail::conv_cc_kernel_grad(tape.v, dg);
    return grads;
}

/// Parameters that make the network compute exactly `blocks` iterations of
/// the residual solver with raw iteration weight lambda_raw, threshold
/// beta, and equal axis weights (two channels: x- and y-differences). The
/// solver cuts each axis at beta * 0.5 under equal weights, so that is the
/// network clip bound; the stencils are extracted by probing the grid
/// operators on delta images, so they inherit the wrap convention by
/// construction.
inline RsnetParams kernels_from_rs(double lambda_raw, double beta, int blocks) {
    const double kb = lambda_raw * beta;
    const int n = 8, ctr = 4; // probe grid; 3x3 support fits easily
    RsnetParams p;
    p.blocks = blocks;
    p.channels = 2;
    p.beta = 0.5 * beta;
    p.in_kernel.assign(9 * 2, 0.0);
    p.out_kernel.assign(9 * 2, 0.0);

    // Probe: with input = delta at (ctr,ctr) in channel ci, a circular
    // cross-correlation satisfies out(r,c) = K[ctr-r+1][ctr-c+1].
    auto read_kernel = [&](const Image& out, int co, double* dst) {
        for (int kr = 0; kr < 3; ++kr)
            for (int kc = 0; kc < 3; ++kc)
                dst[kr * 3 + kc] = out.at(co, ctr - (kr - 1), ctr - (kc - 1));
    };

    { // in_kernel: forward-difference gradient, 1 -> 2 channels.
        Image delta(n, n, 1);
        delta.at(ctr, ctr) = 1.0;
        const VectorField g = gradient(delta);
        read_kernel(g.as_image(), 0, p.in_kernel.data());
        read_kernel(g.as_image(), 1, p.in_kernel.data() + 9);
    }
    std::vector<double> block(9 * 4, 0.0); // 2 -> 2 channels: I - kb * grad(div^T .)
    for (int ci = 0; ci < 2; ++ci) {
        VectorField delta(n, n, 2);
        delta.at(ci, ctr, ctr) = 1.0;
        const VectorField gg = gradient(adjoint_gradient(delta));
        for (int co = 0; co < 2; ++co) {
            double* dst = block.data() + (static_cast<size_t>(co) * 2 + ci) * 9;
            read_kernel(gg.as_image(), co, dst);
            for (int i = 0; i < 9; ++i) dst[i] *= -kb;
            if (co == ci) dst[4] += 1.0; // identity at the center tap
        }
    }
    p.block_kernels.assign(blocks, block);
    { // out_kernel: -kb * div^T, 2 -> 1 channel.
        for (int ci = 0; ci < 2; ++ci) {
            VectorField delta(n, n, 2);
            delta.at(ci, ctr, ctr) = 1.0;
            const Image d = adjoint_gradient(delta);
            read_kernel(d, 0, p.out_kernel.data() + static_cast<size_t>(ci) * 9);
        }
        for (double& x : p.out_kernel) x *= -kb;
    }
    p.validate();
    return p;
}

/// Seed-deterministic initialization: uniform in [-s, s] with
/// s = 1/(3*sqrt(9*C_in)), keeping early pre-activations inside the clip
/// range.
inline RsnetParams init_params(int blocks, int channels, double beta, uint64_t seed) {
    RsnetParams p;
    p.blocks = blocks;
    p.channels = channels;
    p.beta = beta;
    Rng rng(seed);
    auto fill = [&](std::vector<double>& k, int c_in) {
        const double s = 1.0 / (3.0 * std::sqrt(9.0 * c_in));
        for (double& x : k) x = rng.uniform(-s, s);
    };
    p.in_kernel.resize(9 * static_cast<size_t>(channels));
    fill(p.in_kernel, 1);
    p.block_kernels.resize(blocks);
    for (auto& k : p.block_kernels) {
        k.resize(9 * static_cast<size_t>(channels) * channels);
        fill(k, channels);
    }
    p.out_kernel.resize(9 * static_cast<size_t>(channels));
    fill(p.out_kernel, channels);
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------
// Adam optimizer

struct TrainConfig {
    double learning_rate = 3e-4;
    int batch_size = 64;
    int epochs = 3000;
    double lambda = 10.0;   // loss regularization weight
    double weight_x = 0.5;  // loss axis weight; weight_y = 1 - weight_x
    uint64_t seed = 1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const {
        if (!(learning_rate > 0.0))
            throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        if (!(lambda >= 0.0)) throw std::invalid_argument("TrainConfig: lambda must be >= 0");
    }

    SolverConfig loss_config() const {
        SolverConfig cfg;
        cfg.lambda = lambda;
        cfg.weight_x = weight_x;
        cfg.weight_y = 1.0 - weight_x;
        return cfg;
    }
};

struct AdamState {
    RsnetGrads m; // first moment
    RsnetGrads v; // second moment
    long step = 0;

    static AdamState zeros_like(const RsnetParams& p) {
        AdamState s;
        s.m = RsnetGrads::zeros_like(p);
        s.v = RsnetGrads::zeros_like(p);
        return s;
    }
};

namespace detail {
inline void adam_update(std::vector<double>& w, const std::vector<double>& g,
                        std::vector<double>& m, std::vector<double>& v,
                        double lr, double b1, double b2, double eps,
                        double bc1, double bc2) {
    for (size_t i = 0; i < w.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}
} // namespace detail

inline void adam_step(RsnetParams& p, const RsnetGrads& g, AdamState& s, const TrainConfig& tc) {
    tc.validate();
    ++s.step;
    const double bc1 = 1.0 - std::pow(tc.adam_beta1, static_cast<double>(s.step));
    const double bc2 = 1.0 - std::pow(tc.adam_beta2, static_cast<double>(s.step));
    detail::adam_update(p.in_kernel, g.in_kernel, s.m.in_kernel, s.v.in_kernel,
                        tc.learning_rate, tc.adam_beta1, tc.adam_beta2, tc.adam_eps, bc1, bc2);
    for (size_t j = 0; j < p.block_kernels.size(); ++j)
        detail::adam_update(p.block_kernels[j], g.block_kernels[j], s.m.block_kernels[j],
                            s.v.block_kernels[j], tc.learning_rate, tc.adam_beta1,
                            tc.adam_beta2, tc.adam_eps, bc1, bc2);
    detail::adam_update(p.out_kernel, g.out_kernel, s.m.out_kernel, s.v.out_kernel,
                        tc.learning_rate, tc.adam_beta1, tc.adam_beta2, tc.adam_eps, bc1, bc2);
}

// ---------------------------------------------------------------------------
// Training

struct TrainResult {
    RsnetParams params;
    std::vector<double> epoch_loss; // mean training loss per epoch
};

/// Mini-batch Adam on the mean unsupervised loss over the dataset. The
/// observation of each patch is A applied to it; no ground truth enters.
/// Shuffling and all arithmetic are seed-deterministic; batch gradients
/// accumulate in index order.
inline TrainResult train_rsnet(const std::vector<Image>& dataset, const RsnetParams& p0,
                               const ImagingOperator& A, const TrainConfig& tc) {
    tc.validate();
    p0.validate();
    if (dataset.empty()) throw std::invalid_argument("train_rsnet: empty dataset");
    for (const Image& v : dataset)
        if (v.height() != dataset.front().height() || v.width() != dataset.front().width() ||
            v.channels() != 1)
            throw std::invalid_argument("train_rsnet: patches must share a single-channel shape");

    const SolverConfig loss_cfg = tc.loss_config();
    std::vector<std::vector<double>> observations;
    observations.reserve(dataset.size());
    for (const Image& v : dataset) observations.push_back(A.apply(v));

    TrainResult res;
    res.params = p0;
    AdamState state = AdamState::zeros_like(p0);
    Rng rng(tc.seed);
    std::vector<size_t> order(dataset.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (size_t start = 0; start < order.size(); start += tc.batch_size) {
            const size_t stop = std::min(order.size(), start + tc.batch_size);
            RsnetGrads batch = RsnetGrads::zeros_like(res.params);
            const double inv_n = 1.0 / static_cast<double>(stop - start);
            for (size_t i = start; i < stop; ++i) {
                const size_t idx = order[i];
                const RsnetOutput fwd = rsnet_forward(dataset[idx], res.params);
                loss_sum += rsnet_loss(fwd.u, observations[idx], A, loss_cfg);
                const RsnetGrads g =
                    rsnet_backward(fwd.tape, observations[idx], A, loss_cfg, res.params);
                batch.accumulate(g, inv_n);
            }
            adam_step(res.params, batch, state, tc);
        }
        res.epoch_loss.push_back(loss_sum / static_cast<double>(dataset.size()));
    }
    return res;
}

/// Mean loss of the current parameters over a patch set, without updating.
inline double evaluate_rsnet(const std::vector<Image>& dataset, const RsnetParams& p,
                             const ImagingOperator& A, const SolverConfig& loss_cfg) {
    if (dataset.empty()) throw std::invalid_argument("evaluate_rsnet: empty dataset");
    double acc = 0.0;
    for (const Image& v : dataset) {
        const RsnetOutput fwd = rsnet_forward(v, p);
        acc += rsnet_loss(fwd.u, A.apply(v), A, loss_cfg);
    }
    return acc / static_cast<double>(dataset.size());
}

/// Full embedded network: the dual-first outer loop unrolled with the
/// network standing in for the inner solve. d^0 = 0, U^0 = 0.
inline Image full_net_forward(const std::vector<double>& f, const ImagingOperator& A,
                              const RsnetParams& p, const SolverConfig& cfg,
                              int outer_blocks) {
    p.validate();
    cfg.validate();
    if (outer_blocks < 1)
        throw std::invalid_argument("full_net_forward: outer_blocks must be >= 1");
    if (f.size() != A.output_size())
        throw std::invalid_argument("full_net_forward: observation size mismatch");
    const int h = A.input_height(), w = A.input_width();
    const double inv_alpha = 1.0 / cfg.alpha;

    Image u(h, w, 1);
    std::vector<double> d(f.size(), 0.0);
    for (int t = 0; t < outer_blocks; ++t) {
        const std::vector<double> au = A.apply(u);
        std::vector<double> extrap(d.size());
        for (size_t i = 0; i < d.size(); ++i) {
            const double d_next = d[i] + f[i] - au[i];
            extrap[i] = 2.0 * d_next - d[i];
            d[i] = d_next;
        }
        const Image step = A.apply_adjoint(extrap);
        Image v(h, w, 1);
        for (size_t i = 0; i < v.size(); ++i)
            v.values()[i] = u.values()[i] + inv_alpha * step.values()[i];
        u = rsnet_forward(v, p).u;
    }
    return u;
}

inline Image full_net_forward(const Image& f, const ImagingOperator& A, const RsnetParams& p,
                              const SolverConfig& cfg, int outer_blocks) {
    return full_net_forward(f.values(), A, p, cfg, outer_blocks);
}

// ---------------------------------------------------------------------------
// Parameter serialization
//
// Binary little-endian container:
//   magic   8 bytes  "TVLABRSN"
//   version u32      currently 1
//   blocks  u32
//   channels u32
//   beta    f64
//   kernels f64[]    in_kernel, block_kernels[0..B-1], out_kernel,
//                    each bank row-major in (out_ch, in_ch, kr, kc) order
// A golden file for a fixed parameter set is kept under tests/data/.

namespace detail {

constexpr char kParamsMagic[8] = {'T', 'V', 'L', 'A', 'B', 'R', 'S', 'N'};
constexpr uint32_t kParamsVersion = 1;

inline void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}
inline uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("parameter file: truncated");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}
inline void write_f64(std::ostream& os, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}
inline double read_f64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8))
        throw std::runtime_error("parameter file: truncated");
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace detail

inline void save_params(const RsnetParams& p, const std::string& path) {
    p.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_params: cannot open " + path);
    os.write(detail::kParamsMagic, 8);
    detail::write_u32(os, detail::kParamsVersion);
    detail::write_u32(os, static_cast<uint32_t>(p.blocks));
    detail::write_u32(os, static_cast<uint32_t>(p.channels));
    detail::write_f64(os, p.beta);
    for (double x : p.in_kernel) detail::write_f64(os, x);
    for (const auto& k : p.block_kernels)
        for (double x : k) detail::write_f64(os, x);
    for (double x : p.out_kernel) detail::write_f64(os, x);
    if (!os) throw std::runtime_error("save_params: write failure on " + path);
}

inline RsnetParams load_params(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_params: cannot open " + path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, detail::kParamsMagic, 8) != 0)
        throw std::runtime_error("parameter file: bad magic");
    const uint32_t version = detail::read_u32(is);
    if (version != detail::kParamsVersion)
        throw std::runtime_error("parameter file: unsupported version " + std::to_string(version));
    RsnetParams p;
    p.blocks = static_cast<int>(detail::read_u32(is));
    p.channels = static_cast<int>(detail::read_u32(is));
    p.beta = detail::read_f64(is);
    if (p.blocks < 1 || p.blocks > 10000 || p.channels < 1 || p.channels > 4096)
        throw std::runtime_error("parameter file: implausible dimensions");
    const size_t c = static_cast<size_t>(p.channels);
    p.in_kernel.resize(9 * c);
    for (double& x : p.in_kernel) x = detail::read_f64(is);
    p.block_kernels.assign(p.blocks, std::vector<double>(9 * c * c));
    for (auto& k : p.block_kernels)
        for (double& x : k) x = detail::read_f64(is);
    p.out_kernel.resize(9 * c);
    for (double& x : p.out_kernel) x = detail::read_f64(is);
    // Trailing bytes indicate a different layout than this version expects.
    char probe;
    if (is.read(&probe, 1)) throw std::runtime_error("parameter file: trailing data");
    p.validate();
    return p;
}

} // namespace tvlab
