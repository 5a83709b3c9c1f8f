#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

#include "tvlab/image.hpp"

namespace tvlab {

/// Cap returned by psnr for identical images (MSE = 0).
inline constexpr double kPsnrCap = 99.0;

/// Peak signal-to-noise ratio in dB over all channels.
inline double psnr(const Image& x, const Image& y, double peak = 255.0) {
    if (!x.same_shape(y)) throw std::invalid_argument("psnr: shape mismatch");
    double mse = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = x.values()[i] - y.values()[i];
        mse += d * d;
    }
    mse /= static_cast<double>(x.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

struct SsimOptions {
    int window = 8;        // uniform square window, slid over every valid position
    double k1 = 0.01;
    double k2 = 0.03;
    double peak = 255.0;
    const Image* mask = nullptr; // optional; nonzero pixels are included, and a
                                 // window counts only when fully inside the mask
};

/// Mean local SSIM with a uniform window; channels averaged.
inline double ssim(const Image& x, const Image& y, const SsimOptions& opt = {}) {
    if (!x.same_shape(y)) throw std::invalid_argument("ssim: shape mismatch");
    const int win = opt.window;
    if (x.height() < win || x.width() < win)
        throw std::invalid_argument("ssim: image smaller than the window");
    if (opt.mask &&
        (opt.mask->height() != x.height() || opt.mask->width() != x.width() ||
         opt.mask->channels() != 1))
        throw std::invalid_argument("ssim: mask shape mismatch");

    const double c1 = (opt.k1 * opt.peak) * (opt.k1 * opt.peak);
    const double c2 = (opt.k2 * opt.peak) * (opt.k2 * opt.peak);
    const double n = static_cast<double>(win) * win;

    double acc = 0.0;
    long count = 0;
    for (int ch = 0; ch < x.channels(); ++ch)
        for (int r0 = 0; r0 + win <= x.height(); ++r0)
            for (int c0 = 0; c0 + win <= x.width(); ++c0) {
                if (opt.mask) {
                    bool inside = true;
                    for (int r = r0; inside && r < r0 + win; ++r)
                        for (int c = c0; c < c0 + win; ++c)
                            if (opt.mask->at(r, c) == 0.0) {
                                inside = false;
                                break;
                            }
                    if (!inside) continue;
                }
                double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
                for (int r = r0; r < r0 + win; ++r)
                    for (int c = c0; c < c0 + win; ++c) {
                        const double a = x.at(ch, r, c), b = y.at(ch, r, c);
                        sx += a;
                        sy += b;
                        sxx += a * a;
                        syy += b * b;
                        sxy += a * b;
                    }
                const double mx = sx / n, my = sy / n;
                const double vx = sxx / n - mx * mx;
                const double vy = syy / n - my * my;
                const double cov = sxy / n - mx * my;
                acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
                       ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++count;
            }
    if (count == 0) throw std::invalid_argument("ssim: mask admits no window position");
    return acc / static_cast<double>(count);
}

struct MetricReport {
    double psnr = 0.0;
    double ssim = 0.0;
    bool masked = false;
};

/// Axis-aligned crop; used to restrict metrics to a region of interest.
inline Image crop(const Image& x, int row0, int col0, int height, int width) {
    if (row0 < 0 || col0 < 0 || height < 1 || width < 1 || row0 + height > x.height() ||
        col0 + width > x.width())
        throw std::invalid_argument("crop: region out of bounds");
    Image out(height, width, x.channels());
    for (int ch = 0; ch < x.channels(); ++ch)
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width; ++c)
                out.at(ch, r, c) = x.at(ch, row0 + r, col0 + c);
    return out;
}

inline MetricReport compare_images(const Image& x, const Image& y, double peak = 255.0) {
    MetricReport m;
    m.psnr = psnr(x, y, peak);
    SsimOptions opt;
    opt.peak = peak;
    m.ssim = ssim(x, y, opt);
    return m;
}

} // namespace tvlab
