#pragma once

// Minimal reverse-mode layers: 2D convolution, dense, softplus, Kaiming
// initialization and Adam. Activations are stored channel-major as
// (channels x pixels) matrices so convolutions reduce to GEMMs.

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cyclone::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Raised when a value or gradient stops being finite during training.
class TrainingAborted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename Scalar>
void require_finite(const Matrix<Scalar>& m, const std::string& what) {
    if (!m.allFinite()) throw TrainingAborted("non-finite values in " + what);
}

/// Channels x (rows * cols); pixel index is row * cols + col.
template <typename Scalar>
struct Tensor {
    Matrix<Scalar> values;
    int rows = 0;
    int cols = 0;

    Tensor() = default;
    Tensor(int channels, int rows_, int cols_)
        : values(Matrix<Scalar>::Zero(channels, Eigen::Index(rows_) * cols_)), rows(rows_), cols(cols_) {}
    Tensor(Matrix<Scalar> v, int rows_, int cols_) : values(std::move(v)), rows(rows_), cols(cols_) {
        if (values.cols() != Eigen::Index(rows) * cols) throw std::invalid_argument("Tensor: shape mismatch");
    }

    int channels() const { return static_cast<int>(values.rows()); }
    Eigen::Index pixels() const { return values.cols(); }
    Scalar& operator()(int c, int r, int col) { return values(c, Eigen::Index(r) * cols + col); }
    Scalar operator()(int c, int r, int col) const { return values(c, Eigen::Index(r) * cols + col); }
};

template <typename Scalar>
struct Parameter {
    Matrix<Scalar> value;
    Matrix<Scalar> grad;

    Parameter() = default;
    Parameter(Eigen::Index rows, Eigen::Index cols) {
        if (rows <= 0 || cols <= 0) throw std::invalid_argument("Parameter: dimensions must be positive");
        value.setZero(rows, cols);
        grad.setZero(rows, cols);
    }

    void zero_grad() { grad.setZero(); }
};

/// Zero-mean Gaussian draws with variance 2 / fan_in, filled column-major.
template <typename Scalar>
Matrix<Scalar> kaiming_normal(int fan_in, Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    if (fan_in <= 0) throw std::invalid_argument("kaiming_normal: fan_in must be positive");
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
    Matrix<Scalar> w(rows, cols);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(normal(rng));
    return w;
}

template <typename Scalar>
Scalar softplus(Scalar x) {
    return std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename Scalar>
Scalar logistic(Scalar x) {
    return Scalar(1) / (Scalar(1) + std::exp(-x));
}

// ---------------------------------------------------------------------------

/// Square-kernel cross-correlation, stride 1, zero padding of kernel - 1
/// on the bottom and right only, so the spatial shape is preserved.
template <typename Scalar>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(int in_channels, int out_channels, int kernel)
        : weight(out_channels, Eigen::Index(in_channels) * kernel * kernel), bias(out_channels, 1),
          in_(in_channels), out_(out_channels), k_(kernel) {
        if (in_channels <= 0 || out_channels <= 0 || kernel <= 0) {
            throw std::invalid_argument("Conv2d: dimensions must be positive");
        }
    }

    int in_channels() const { return in_; }
    int out_channels() const { return out_; }
    int kernel() const { return k_; }
    int fan_in() const { return in_ * k_ * k_; }

    void init_kaiming(std::mt19937_64& rng) {
        weight.value = kaiming_normal<Scalar>(fan_in(), weight.value.rows(), weight.value.cols(), rng);
        bias.value.setZero();
    }

    /// Weight column for (input channel, kernel row, kernel col).
    Eigen::Index tap(int c, int di, int dj) const { return (Eigen::Index(c) * k_ + di) * k_ + dj; }

    Tensor<Scalar> forward(const Tensor<Scalar>& input) {
        check_input(input);
        im2col(input, patches_);
        external_ = nullptr;
        return apply(patches_, input.rows, input.cols);
    }

    /// The im2col matrix forward() would build for `input` (pixels x taps).
    Matrix<Scalar> patches(const Tensor<Scalar>& input) const {
        check_input(input);
        Matrix<Scalar> out;
        im2col(input, out);
        return out;
    }

    /// forward() on precomputed patches. `patches` must stay alive until the
    /// matching backward() call.
    Tensor<Scalar> forward_patches(const Matrix<Scalar>& patches, int rows, int cols) {
        if (rows <= 0 || cols <= 0 || patches.rows() != Eigen::Index(rows) * cols ||
            patches.cols() != Eigen::Index(in_) * k_ * k_) {
            throw std::invalid_argument("Conv2d: patch matrix shape mismatch");
        }
        external_ = &patches;
        return apply(patches, rows, cols);
    }

    /// Accumulates weight/bias gradients; returns the input gradient unless
    /// `propagate` is false (first layer).
    Tensor<Scalar> backward(const Tensor<Scalar>& upstream, bool propagate = true) {
        if (!cached_) throw std::logic_error("Conv2d::backward called before forward");
        if (upstream.channels() != out_ || upstream.rows != rows_ || upstream.cols != cols_) {
            throw std::invalid_argument("Conv2d::backward: upstream shape mismatch");
        }
        weight.grad.noalias() += upstream.values * (external_ ? *external_ : patches_);
        bias.grad.col(0) += upstream.values.rowwise().sum();
        if (!propagate) return {};
        const Matrix<Scalar> d_patches = upstream.values.transpose() * weight.value;
        return col2im(d_patches);
    }

    std::vector<Parameter<Scalar>*> parameters() { return {&weight, &bias}; }

    Parameter<Scalar> weight;
    Parameter<Scalar> bias;

private:
    void check_input(const Tensor<Scalar>& input) const {
        if (input.channels() != in_) {
            throw std::invalid_argument("Conv2d: expected " + std::to_string(in_) + " input channels, got " +
                                        std::to_string(input.channels()));
        }
    }

    Tensor<Scalar> apply(const Matrix<Scalar>& patches, int rows, int cols) {
        rows_ = rows;
        cols_ = cols;
        Tensor<Scalar> out;
        out.rows = rows_;
        out.cols = cols_;
        out.values.noalias() = weight.value * patches.transpose();
        out.values.colwise() += bias.value.col(0);
        cached_ = true;
        return out;
    }

    // Patches are stored pixels x taps so every copy below is contiguous.
    void im2col(const Tensor<Scalar>& input, Matrix<Scalar>& dst) const {
        const int rows = input.rows;
        const int cols = input.cols;
        const Eigen::Index pixels = Eigen::Index(rows) * cols;
        const Matrix<Scalar> x = input.values.transpose();
        dst.resize(pixels, Eigen::Index(in_) * k_ * k_);
        for (int c = 0; c < in_; ++c) {
            for (int di = 0; di < k_; ++di) {
                for (int dj = 0; dj < k_; ++dj) {
                    auto column = dst.col(tap(c, di, dj));
                    const int width = std::max(cols - dj, 0);
                    for (int r = 0; r < rows; ++r) {
                        auto line = column.segment(Eigen::Index(r) * cols, cols);
                        if (r + di >= rows) {
                            line.setZero();
                            continue;
                        }
                        line.head(width) = x.col(c).segment(Eigen::Index(r + di) * cols + dj, width);
                        line.tail(cols - width).setZero();
                    }
                }
            }
        }
    }

    Tensor<Scalar> col2im(const Matrix<Scalar>& d_patches) const {
        Matrix<Scalar> g = Matrix<Scalar>::Zero(Eigen::Index(rows_) * cols_, in_);
        for (int c = 0; c < in_; ++c) {
            for (int di = 0; di < k_; ++di) {
                for (int dj = 0; dj < k_; ++dj) {
                    const Eigen::Index t = tap(c, di, dj);
                    const int width = cols_ - dj;
                    if (width <= 0) continue;
                    for (int r = 0; r + di < rows_; ++r) {
                        g.col(c).segment(Eigen::Index(r + di) * cols_ + dj, width) +=
                            d_patches.col(t).segment(Eigen::Index(r) * cols_, width);
                    }
                }
            }
        }
        Tensor<Scalar> grad(in_, rows_, cols_);
        grad.values = g.transpose();
        return grad;
    }

    int in_ = 0;
    int out_ = 0;
    int k_ = 1;
    int rows_ = 0;
    int cols_ = 0;
    bool cached_ = false;
    Matrix<Scalar> patches_;
    const Matrix<Scalar>* external_ = nullptr;
};

/// Fully connected layer applied to each column (sample) independently.
template <typename Scalar>
class Dense {
public:
    Dense() = default;
    Dense(int in_features, int out_features) : weight(out_features, in_features), bias(out_features, 1) {
        if (in_features <= 0 || out_features <= 0) throw std::invalid_argument("Dense: dimensions must be positive");
    }

    int in_features() const { return static_cast<int>(weight.value.cols()); }
    int out_features() const { return static_cast<int>(weight.value.rows()); }

    void init_kaiming(std::mt19937_64& rng) {
        weight.value = kaiming_normal<Scalar>(in_features(), weight.value.rows(), weight.value.cols(), rng);
        bias.value.setZero();
    }

    Matrix<Scalar> forward(const Matrix<Scalar>& input) {
        if (input.rows() != in_features()) throw std::invalid_argument("Dense: input feature count mismatch");
        input_ = input;
        cached_ = true;
        Matrix<Scalar> out = weight.value * input;
        out.colwise() += bias.value.col(0);
        return out;
    }

    Matrix<Scalar> backward(const Matrix<Scalar>& upstream, bool propagate = true) {
        if (!cached_) throw std::logic_error("Dense::backward called before forward");
        if (upstream.rows() != out_features() || upstream.cols() != input_.cols()) {
            throw std::invalid_argument("Dense::backward: upstream shape mismatch");
        }
        weight.grad.noalias() += upstream * input_.transpose();
        bias.grad.col(0) += upstream.rowwise().sum();
        if (!propagate) return {};
        return weight.value.transpose() * upstream;
    }

    std::vector<Parameter<Scalar>*> parameters() { return {&weight, &bias}; }

    Parameter<Scalar> weight;
    Parameter<Scalar> bias;

private:
    Matrix<Scalar> input_;
    bool cached_ = false;
};

template <typename Scalar>
class Softplus {
public:
    Matrix<Scalar> forward(const Matrix<Scalar>& input) {
        const auto x = input.array();
        const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> e = (-x.abs()).exp();
        const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> u = Scalar(1) + e;
        derivative_ = (x >= Scalar(0)).select(Scalar(1), e) / u;
        cached_ = true;
        // log1p(e) = log(u) * e / (u - 1), exact to rounding; Eigen's log
        // vectorizes where log1p does not. u == 1 only when e is below
        // epsilon, where log1p(e) = e.
        Matrix<Scalar> out = (x.max(Scalar(0)) + u.log() * e / (u - Scalar(1))).matrix();
        for (Eigen::Index i = 0; i < out.size(); ++i) {
            if (u.data()[i] == Scalar(1)) out.data()[i] = std::max(x.data()[i], Scalar(0)) + e.data()[i];
        }
        return out;
    }

    Matrix<Scalar> backward(const Matrix<Scalar>& upstream) const {
        if (!cached_) throw std::logic_error("Softplus::backward called before forward");
        return (upstream.array() * derivative_).matrix();
    }

private:
    Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> derivative_;
    bool cached_ = false;
};

// ---------------------------------------------------------------------------

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are keyed by the position of
/// each parameter in the list passed to `step`.
template <typename Scalar>
class Adam {
public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    void step(std::span<Parameter<Scalar>* const> params) {
        if (first_.empty()) {
            for (auto* p : params) {
                first_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
                second_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
            }
        }
        if (first_.size() != params.size()) throw std::invalid_argument("Adam: parameter list changed");
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (params[i]->grad.rows() != first_[i].rows() || params[i]->grad.cols() != first_[i].cols()) {
                throw std::invalid_argument("Adam: gradient shape mismatch");
            }
            require_finite<Scalar>(params[i]->grad, "gradient");
        }
        ++steps_;
        const auto b1 = static_cast<Scalar>(config_.beta1);
        const auto b2 = static_cast<Scalar>(config_.beta2);
        const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(config_.beta1, steps_));
        const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(config_.beta2, steps_));
        const auto lr = static_cast<Scalar>(config_.learning_rate);
        const auto eps = static_cast<Scalar>(config_.epsilon);
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& g = params[i]->grad;
            first_[i] = b1 * first_[i] + (Scalar(1) - b1) * g;
            second_[i] = b2 * second_[i] + (Scalar(1) - b2) * g.cwiseAbs2();
            params[i]->value.array() -=
                lr * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + eps);
            require_finite<Scalar>(params[i]->value, "parameters");
        }
    }

    long steps() const { return steps_; }
    const AdamConfig& config() const { return config_; }

private:
    AdamConfig config_;
    long steps_ = 0;
    std::vector<Matrix<Scalar>> first_;
    std::vector<Matrix<Scalar>> second_;
};

// ---------------------------------------------------------------------------

/// Row-major values with explicit shape; doubles serialize losslessly.
template <typename Scalar>
nlohmann::json parameter_to_json(const Parameter<Scalar>& p) {
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(p.value.size()));
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.value.cols(); ++c) values.push_back(static_cast<double>(p.value(r, c)));
    }
    return {{"shape", {p.value.rows(), p.value.cols()}}, {"values", values}};
}

template <typename Scalar>
void parameter_from_json(const nlohmann::json& j, Parameter<Scalar>& p) {
    const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
    if (shape.size() != 2 || shape[0] != p.value.rows() || shape[1] != p.value.cols()) {
        throw std::runtime_error("checkpoint: parameter shape does not match layer");
    }
    const auto values = j.at("values").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != p.value.size()) {
        throw std::runtime_error("checkpoint: parameter value count mismatch");
    }
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.value.cols(); ++c) p.value(r, c) = static_cast<Scalar>(values[k++]);
    }
    p.zero_grad();
}

} // namespace cyclone::nn
