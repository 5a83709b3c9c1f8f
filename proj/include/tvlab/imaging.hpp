#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tvlab/grid.hpp"
#include "tvlab/image.hpp"
#include "tvlab/rng.hpp"

namespace tvlab {

/// Linear imaging model A: image -> flat observation vector, with its
/// adjoint. Observations are flat to accommodate non-image-shaped data
/// (ray time delays).
class ImagingOperator {
public:
    virtual ~ImagingOperator() = default;

    virtual int input_height() const = 0;
    virtual int input_width() const = 0;
    virtual size_t output_size() const = 0;

    virtual std::vector<double> apply(const Image& u) const = 0;
    virtual Image apply_adjoint(const std::vector<double>& y) const = 0;

protected:
    void check_input(const Image& u) const {
        if (u.height() != input_height() || u.width() != input_width() || u.channels() != 1)
            throw std::invalid_argument("ImagingOperator: input shape mismatch");
    }
    void check_output(const std::vector<double>& y) const {
        if (y.size() != output_size())
            throw std::invalid_argument("ImagingOperator: observation size mismatch");
    }
};

class IdentityOperator final : public ImagingOperator {
public:
    IdentityOperator(int height, int width, double scale = 1.0)
        : h_(height), w_(width), scale_(scale) {}

    int input_height() const override { return h_; }
    int input_width() const override { return w_; }
    size_t output_size() const override { return static_cast<size_t>(h_) * w_; }

    std::vector<double> apply(const Image& u) const override {
        check_input(u);
        std::vector<double> y = u.values();
        if (scale_ != 1.0)
            for (double& x : y) x *= scale_;
        return y;
    }

    Image apply_adjoint(const std::vector<double>& y) const override {
        check_output(y);
        Image u(h_, w_, 1);
        for (size_t i = 0; i < y.size(); ++i) u.values()[i] = scale_ * y[i];
        return u;
    }

private:
    int h_, w_;
    double scale_;
};

/// Explicit row-sparse matrix: each observation row is a list of
/// (flat pixel index, weight) pairs.
class SparseOperator final : public ImagingOperator {
public:
    struct Entry {
        size_t col;
        double weight;
    };
    using Row = std::vector<Entry>;

    SparseOperator(int height, int width, std::vector<Row> rows)
        : h_(height), w_(width), rows_(std::move(rows)) {
        const size_t n = static_cast<size_t>(h_) * w_;
        for (const Row& row : rows_)
            for (const Entry& e : row) {
                if (e.col >= n)
                    throw std::invalid_argument("SparseOperator: column index out of range");
                if (!std::isfinite(e.weight))
                    throw std::invalid_argument("SparseOperator: non-finite weight");
            }
    }

    int input_height() const override { return h_; }
    int input_width() const override { return w_; }
    size_t output_size() const override { return rows_.size(); }
    const std::vector<Row>& rows() const { return rows_; }

    std::vector<double> apply(const Image& u) const override {
        check_input(u);
        std::vector<double> y(rows_.size(), 0.0);
        for (size_t r = 0; r < rows_.size(); ++r) {
            double acc = 0.0;
            for (const Entry& e : rows_[r]) acc += e.weight * u.values()[e.col];
            y[r] = acc;
        }
        return y;
    }

    Image apply_adjoint(const std::vector<double>& y) const override {
        check_output(y);
        Image u(h_, w_, 1);
        for (size_t r = 0; r < rows_.size(); ++r)
            for (const Entry& e : rows_[r])
                u.values()[e.col] += e.weight * y[r];
        return u;
    }

    /// Same matrix with every weight multiplied by s.
    std::shared_ptr<SparseOperator> scaled(double s) const {
        std::vector<Row> rows = rows_;
        for (Row& row : rows)
            for (Entry& e : row) e.weight *= s;
        return std::make_shared<SparseOperator>(h_, w_, std::move(rows));
    }

private:
    int h_, w_;
    std::vector<Row> rows_;
};

/// Wrapper counting apply/adjoint invocations; used by tests to pin the
/// per-iteration operator cost of the outer loops.
class CountingOperator final : public ImagingOperator {
public:
    explicit CountingOperator(std::shared_ptr<const ImagingOperator> inner)
        : inner_(std::move(inner)) {}

    int input_height() const override { return inner_->input_height(); }
    int input_width() const override { return inner_->input_width(); }
    size_t output_size() const override { return inner_->output_size(); }

    std::vector<double> apply(const Image& u) const override {
        ++applies_;
        return inner_->apply(u);
    }
    Image apply_adjoint(const std::vector<double>& y) const override {
        ++adjoints_;
        return inner_->apply_adjoint(y);
    }

    long applies() const { return applies_; }
    long adjoints() const { return adjoints_; }
    void reset() { applies_ = adjoints_ = 0; }

private:
    std::shared_ptr<const ImagingOperator> inner_;
    mutable long applies_ = 0;
    mutable long adjoints_ = 0;
};

struct NormEstimate {
    double value = 0.0;   // estimate of ||A^T A|| (largest eigenvalue)
    bool degenerate = false; // true when the operator annihilated the probes
    int iterations = 0;
};

/// Power iteration on A^T A. Deterministic for a fixed seed.
inline NormEstimate estimate_operator_norm(const ImagingOperator& A,
                                           double tol = 1e-9,
                                           int max_iters = 1000,
                                           uint64_t seed = 0x9e3779b9u) {
    Rng rng(seed);
    Image x(A.input_height(), A.input_width(), 1);
    for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);

    NormEstimate est;
    double prev = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        Image y = A.apply_adjoint(A.apply(x));
        double norm = 0.0;
        for (double v : y.values()) norm += v * v;
        norm = std::sqrt(norm);
        est.iterations = it + 1;
        if (norm == 0.0) {
            est.value = 0.0;
            est.degenerate = true;
            return est;
        }
        // Rayleigh quotient <x, A^T A x> / <x, x>; x is unit after the scale.
        double rq = 0.0;
        for (size_t i = 0; i < x.size(); ++i) rq += x.values()[i] * y.values()[i];
        est.value = rq;
        for (double& v : y.values()) v /= norm;
        x = y;
        if (it > 0 && std::abs(est.value - prev) <= tol * std::max(1.0, std::abs(est.value)))
            break;
        prev = est.value;
    }
    return est;
}

/// Full model energy, Eq-style: 0.5*||Au - f||^2 + lambda * TV_w(u).
inline double total_energy(const Image& u, const std::vector<double>& f,
                           const ImagingOperator& A, const SolverConfig& cfg) {
    if (f.size() != A.output_size())
        throw std::invalid_argument("total_energy: observation size mismatch");
    const std::vector<double> au = A.apply(u);
    double fid = 0.0;
    for (size_t i = 0; i < f.size(); ++i) {
        const double d = au[i] - f[i];
        fid += d * d;
    }
    return 0.5 * fid + cfg.lambda * tv_energy(u, cfg.weight_x, cfg.weight_y);
}

inline double total_energy(const Image& u, const Image& f,
                           const ImagingOperator& A, const SolverConfig& cfg) {
    return total_energy(u, f.values(), A, cfg);
}

/// Resolution-normalized energy: both terms divided by the pixel count,
/// so values are comparable across image sizes.
inline double normalized_energy(const Image& u, const std::vector<double>& f,
                                const ImagingOperator& A, const SolverConfig& cfg) {
    return total_energy(u, f, A, cfg) / static_cast<double>(u.pixels());
}

inline double normalized_energy(const Image& u, const Image& f,
                                const ImagingOperator& A, const SolverConfig& cfg) {
    return normalized_energy(u, f.values(), A, cfg);
}

} // namespace tvlab
