#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvlab {

/// Dense 2-D multi-channel scalar grid, stored as channel planes in
/// row-major order. Intensities live on the [0, 255] scale by convention,
/// but values are not clamped; solvers are free to move outside the range.
class Image {
public:
    Image() = default;

    Image(int height, int width, int channels = 1, double fill = 0.0)
        : height_(height), width_(width), channels_(channels),
          values_(static_cast<size_t>(check_dims(height, width, channels)) , fill) {}

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    size_t size() const { return values_.size(); }
    size_t pixels() const { return static_cast<size_t>(height_) * width_; }

    double& at(int channel, int row, int col) {
        return values_[index(channel, row, col)];
    }
    double at(int channel, int row, int col) const {
        return values_[index(channel, row, col)];
    }
    double& at(int row, int col) { return at(0, row, col); }
    double at(int row, int col) const { return at(0, row, col); }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    bool same_shape(const Image& o) const {
        return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
    }

    /// View of one channel as a single-channel image (copy).
    Image channel(int c) const {
        Image out(height_, width_, 1);
        const size_t plane = pixels();
        for (size_t i = 0; i < plane; ++i)
            out.values_[i] = values_[static_cast<size_t>(c) * plane + i];
        return out;
    }

    void set_channel(int c, const Image& src) {
        if (src.height_ != height_ || src.width_ != width_ || src.channels_ != 1)
            throw std::invalid_argument("set_channel: shape mismatch");
        const size_t plane = pixels();
        for (size_t i = 0; i < plane; ++i)
            values_[static_cast<size_t>(c) * plane + i] = src.values_[i];
    }

    bool all_finite() const {
        for (double x : values_)
            if (!std::isfinite(x)) return false;
        return true;
    }

private:
    static size_t check_dims(int h, int w, int c) {
        if (h < 1 || w < 1 || c < 1)
            throw std::invalid_argument("Image: dimensions must be >= 1");
        return static_cast<size_t>(h) * w * c;
    }
    size_t index(int channel, int row, int col) const {
        return (static_cast<size_t>(channel) * height_ + row) * width_ + col;
    }

    int height_ = 0, width_ = 0, channels_ = 0;
    std::vector<double> values_;
};

/// Per-pixel multi-channel field. Two channels (x then y) for the analytic
/// solvers; C channels inside the unfolded network. Same storage layout
/// as Image; kept as a distinct type because fields are dimensionless and
/// obey the cut bound rather than the intensity convention.
class VectorField {
public:
    VectorField() = default;
    VectorField(int height, int width, int channels, double fill = 0.0)
        : data_(height, width, channels, fill) {}

    int height() const { return data_.height(); }
    int width() const { return data_.width(); }
    int channels() const { return data_.channels(); }
    size_t size() const { return data_.size(); }

    double& at(int channel, int row, int col) { return data_.at(channel, row, col); }
    double at(int channel, int row, int col) const { return data_.at(channel, row, col); }

    std::vector<double>& values() { return data_.values(); }
    const std::vector<double>& values() const { return data_.values(); }

    Image& as_image() { return data_; }
    const Image& as_image() const { return data_; }

    bool all_finite() const { return data_.all_finite(); }

private:
    Image data_;
};

/// Solver parameters shared by the inner ROF solvers and the outer loops.
/// Ranges are validated on construction via validate().
struct SolverConfig {
    double lambda = 10.0;     // regularization weight, >= 0
    double beta = 0.2;        // cut threshold, in (0, 1/4)
    double alpha = 2.01;      // outer quadratic weight, > 2*||A^T A||
    double weight_x = 0.5;    // axis weight w in (0,1); weight_y = 1 - w
    double weight_y = 0.5;
    int inner_iters = 30;     // inner ROF iterations per outer step
    int outer_iters = 100;

    void validate() const {
        if (!(lambda >= 0.0) || !std::isfinite(lambda))
            throw std::invalid_argument("SolverConfig: lambda must be >= 0");
        if (!(beta > 0.0 && beta < 0.25))
            throw std::invalid_argument("SolverConfig: beta must be in (0, 1/4)");
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            throw std::invalid_argument("SolverConfig: alpha must be positive");
        if (!(weight_x > 0.0 && weight_x < 1.0) ||
            !(weight_y > 0.0 && weight_y < 1.0) ||
            std::abs(weight_x + weight_y - 1.0) > 1e-12)
            throw std::invalid_argument("SolverConfig: axis weights must lie in (0,1) and sum to 1");
        if (inner_iters < 1 || outer_iters < 1)
            throw std::invalid_argument("SolverConfig: iteration counts must be >= 1");
    }

    SolverConfig with_weight(double w) const {
        SolverConfig c = *this;
        c.weight_x = w;
        c.weight_y = 1.0 - w;
        return c;
    }
};

} // namespace tvlab
