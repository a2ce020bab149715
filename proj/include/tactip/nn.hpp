#pragma once

// Small feed-forward network toolkit: dense, 2-D convolution, sigmoid and
// inverted dropout layers with a softmax cross-entropy head. Activations are
// column-major batches (one column per sample).

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tactip/binary_io.hpp"
#include "tactip/error.hpp"

namespace tactip::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Param {
    Matrix* value;
    Matrix* grad;
};

enum class LayerType : std::uint8_t { dense = 1, conv2d = 2, sigmoid = 3, dropout = 4 };

/// Serialisable description of one layer.
struct LayerSpec {
    LayerType type;
    std::vector<std::int64_t> ints;  // shape parameters, meaning depends on type
    double real = 0.0;               // dropout rate

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual Matrix forward(const Matrix& x, bool training, std::mt19937_64& rng) = 0;
    /// Gradient w.r.t. the input; parameter gradients are overwritten.
    virtual Matrix backward(const Matrix& grad_out) = 0;
    virtual std::vector<Param> params() { return {}; }
    virtual LayerSpec spec() const = 0;
    virtual Eigen::Index input_size() const = 0;
    virtual Eigen::Index output_size() const = 0;
};

inline void xavier_init(Matrix& w, Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
        for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = u(rng);
}

class Dense final : public Layer {
public:
    Dense(Eigen::Index in, Eigen::Index out) : w_(Matrix::Zero(out, in)), b_(Matrix::Zero(out, 1)) {}

    void init(std::mt19937_64& rng) { xavier_init(w_, w_.cols(), w_.rows(), rng); }

    Matrix forward(const Matrix& x, bool, std::mt19937_64&) override {
        x_ = x;
        Matrix y = w_ * x;
        y.colwise() += b_.col(0);
        return y;
    }
    Matrix backward(const Matrix& g) override {
        gw_.noalias() = g * x_.transpose();
        gb_ = g.rowwise().sum();
        return w_.transpose() * g;
    }
    std::vector<Param> params() override { return {{&w_, &gw_}, {&b_, &gb_}}; }
    LayerSpec spec() const override { return {LayerType::dense, {w_.cols(), w_.rows()}}; }
    Eigen::Index input_size() const override { return w_.cols(); }
    Eigen::Index output_size() const override { return w_.rows(); }

private:
    Matrix w_, b_, gw_, gb_, x_;
};

/// Single-input-channel valid convolution with `filters` square kernels.
/// Output column layout is [filter][out_y][out_x].
class Conv2D final : public Layer {
public:
    Conv2D(int in_h, int in_w, int filters, int kernel, int stride)
        : in_h_(in_h), in_w_(in_w), k_(kernel), stride_(stride),
          out_h_((in_h - kernel) / stride + 1), out_w_((in_w - kernel) / stride + 1),
          f_(Matrix::Zero(filters, kernel * kernel)), b_(Matrix::Zero(filters, 1)) {
        if (kernel < 1 || stride < 1 || in_h < kernel || in_w < kernel)
            throw ParameterError("Conv2D: input " + std::to_string(in_h) + "x" + std::to_string(in_w) +
                                 " is smaller than the kernel");
    }

    void init(std::mt19937_64& rng) {
        xavier_init(f_, k_ * k_, static_cast<Eigen::Index>(f_.rows()) * k_ * k_, rng);
    }

    Matrix forward(const Matrix& x, bool, std::mt19937_64&) override {
        const Eigen::Index positions = static_cast<Eigen::Index>(out_h_) * out_w_;
        patches_.resize(x.cols());
        Matrix y(f_.rows() * positions, x.cols());
        for (Eigen::Index s = 0; s < x.cols(); ++s) {
            Matrix& P = patches_[static_cast<std::size_t>(s)];
            P.resize(k_ * k_, positions);
            for (int oy = 0; oy < out_h_; ++oy)
                for (int ox = 0; ox < out_w_; ++ox) {
                    const Eigen::Index col = static_cast<Eigen::Index>(oy) * out_w_ + ox;
                    for (int ky = 0; ky < k_; ++ky)
                        for (int kx = 0; kx < k_; ++kx)
                            P(ky * k_ + kx, col) = x((oy * stride_ + ky) * in_w_ + ox * stride_ + kx, s);
                }
            Matrix out = f_ * P;
            out.colwise() += b_.col(0);
            // Row-major over (filter, position) so each filter's map is contiguous.
            for (Eigen::Index f = 0; f < f_.rows(); ++f) y.col(s).segment(f * positions, positions) = out.row(f).transpose();
        }
        return y;
    }

    Matrix backward(const Matrix& g) override {
        const Eigen::Index positions = static_cast<Eigen::Index>(out_h_) * out_w_;
        gf_ = Matrix::Zero(f_.rows(), f_.cols());
        gb_ = Matrix::Zero(f_.rows(), 1);
        Matrix dx = Matrix::Zero(static_cast<Eigen::Index>(in_h_) * in_w_, g.cols());
        Matrix G(f_.rows(), positions);
        for (Eigen::Index s = 0; s < g.cols(); ++s) {
            for (Eigen::Index f = 0; f < f_.rows(); ++f) G.row(f) = g.col(s).segment(f * positions, positions).transpose();
            const Matrix& P = patches_[static_cast<std::size_t>(s)];
            gf_.noalias() += G * P.transpose();
            gb_ += G.rowwise().sum();
            const Matrix dP = f_.transpose() * G;
            for (int oy = 0; oy < out_h_; ++oy)
                for (int ox = 0; ox < out_w_; ++ox) {
                    const Eigen::Index col = static_cast<Eigen::Index>(oy) * out_w_ + ox;
                    for (int ky = 0; ky < k_; ++ky)
                        for (int kx = 0; kx < k_; ++kx)
                            dx((oy * stride_ + ky) * in_w_ + ox * stride_ + kx, s) += dP(ky * k_ + kx, col);
                }
        }
        return dx;
    }

    std::vector<Param> params() override { return {{&f_, &gf_}, {&b_, &gb_}}; }
    LayerSpec spec() const override { return {LayerType::conv2d, {in_h_, in_w_, f_.rows(), k_, stride_}}; }
    Eigen::Index input_size() const override { return static_cast<Eigen::Index>(in_h_) * in_w_; }
    Eigen::Index output_size() const override { return f_.rows() * out_h_ * out_w_; }

private:
    int in_h_, in_w_, k_, stride_, out_h_, out_w_;
    Matrix f_, b_, gf_, gb_;
    std::vector<Matrix> patches_;
};

class Sigmoid final : public Layer {
public:
    explicit Sigmoid(Eigen::Index size) : size_(size) {}
    Matrix forward(const Matrix& x, bool, std::mt19937_64&) override {
        y_ = (1.0 + (-x.array()).exp()).inverse().matrix();
        return y_;
    }
    Matrix backward(const Matrix& g) override { return (g.array() * y_.array() * (1.0 - y_.array())).matrix(); }
    LayerSpec spec() const override { return {LayerType::sigmoid, {size_}}; }
    Eigen::Index input_size() const override { return size_; }
    Eigen::Index output_size() const override { return size_; }

private:
    Eigen::Index size_;
    Matrix y_;
};

/// Inverted dropout: surviving units are scaled by 1/(1-rate) at training
/// time, so evaluation is the identity.
class Dropout final : public Layer {
public:
    Dropout(Eigen::Index size, double rate) : size_(size), rate_(rate) {
        if (rate < 0.0 || rate >= 1.0) throw ParameterError("Dropout: rate must be in [0, 1)");
    }
    Matrix forward(const Matrix& x, bool training, std::mt19937_64& rng) override {
        if (!training || rate_ == 0.0) {
            mask_.resize(0, 0);
            return x;
        }
        std::bernoulli_distribution keep(1.0 - rate_);
        const double scale = 1.0 / (1.0 - rate_);
        mask_.resize(x.rows(), x.cols());
        for (Eigen::Index c = 0; c < x.cols(); ++c)
            for (Eigen::Index r = 0; r < x.rows(); ++r) mask_(r, c) = keep(rng) ? scale : 0.0;
        return x.cwiseProduct(mask_);
    }
    Matrix backward(const Matrix& g) override { return mask_.size() ? g.cwiseProduct(mask_) : g; }
    LayerSpec spec() const override { return {LayerType::dropout, {size_}, rate_}; }
    Eigen::Index input_size() const override { return size_; }
    Eigen::Index output_size() const override { return size_; }

private:
    Eigen::Index size_;
    double rate_;
    Matrix mask_;
};

/// Column-wise softmax.
inline Matrix softmax(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        const Vector z = logits.col(c).array() - logits.col(c).maxCoeff();
        const Vector e = z.array().exp();
        out.col(c) = e / e.sum();
    }
    return out;
}

/// Mean cross-entropy of softmax(logits) against integer labels, and its
/// gradient with respect to the logits.
inline double softmax_cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* grad) {
    const Matrix p = softmax(logits);
    const auto batch = static_cast<double>(logits.cols());
    double loss = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) loss -= std::log(std::max(p(labels[static_cast<std::size_t>(c)], c), 1e-300));
    if (grad) {
        *grad = p;
        for (Eigen::Index c = 0; c < logits.cols(); ++c) (*grad)(labels[static_cast<std::size_t>(c)], c) -= 1.0;
        *grad /= batch;
    }
    return loss / batch;
}

class Network {
public:
    Network() = default;
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    /// Rebuild from specs with zero weights.
    static Network from_specs(const std::vector<LayerSpec>& specs) {
        Network net;
        for (const LayerSpec& s : specs) net.layers_.push_back(make_layer(s));
        net.check_chain();
        return net;
    }

    Network clone() const {
        Network copy = from_specs(specs());
        copy.set_parameters(parameters());
        return copy;
    }

    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

    Matrix forward(const Matrix& x, bool training, std::mt19937_64& rng) {
        if (layers_.empty()) throw ParameterError("Network: no layers");
        if (x.rows() != layers_.front()->input_size())
            throw ParameterError("Network: input has " + std::to_string(x.rows()) + " features, expected " +
                                 std::to_string(layers_.front()->input_size()));
        Matrix a = x;
        for (auto& l : layers_) a = l->forward(a, training, rng);
        return a;
    }

    /// Deterministic inference (dropout off).
    Matrix infer(const Matrix& x) const {
        std::mt19937_64 unused(0);
        return const_cast<Network*>(this)->forward(x, false, unused);
    }

    void backward(const Matrix& grad_logits) {
        Matrix g = grad_logits;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    }

    std::vector<Param> params() {
        std::vector<Param> out;
        for (auto& l : layers_)
            for (Param p : l->params()) out.push_back(p);
        return out;
    }

    std::vector<LayerSpec> specs() const {
        std::vector<LayerSpec> out;
        for (const auto& l : layers_) out.push_back(l->spec());
        return out;
    }

    /// All parameters flattened in layer order.
    std::vector<double> parameters() const {
        std::vector<double> out;
        for (Param p : const_cast<Network*>(this)->params())
            out.insert(out.end(), p.value->data(), p.value->data() + p.value->size());
        return out;
    }

    void set_parameters(std::span<const double> values) {
        std::size_t at = 0;
        for (Param p : params()) {
            const auto n = static_cast<std::size_t>(p.value->size());
            if (at + n > values.size()) throw ParameterError("Network: too few parameter values");
            std::copy(values.begin() + static_cast<std::ptrdiff_t>(at), values.begin() + static_cast<std::ptrdiff_t>(at + n),
                      p.value->data());
            at += n;
        }
        if (at != values.size()) throw ParameterError("Network: too many parameter values");
    }

    Eigen::Index input_size() const { return layers_.front()->input_size(); }
    Eigen::Index output_size() const { return layers_.back()->output_size(); }
    std::size_t size() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }

private:
    static std::unique_ptr<Layer> make_layer(const LayerSpec& s) {
        auto need = [&](std::size_t n) {
            if (s.ints.size() != n) throw ParameterError("Network: malformed layer descriptor");
        };
        switch (s.type) {
        case LayerType::dense: need(2); return std::make_unique<Dense>(s.ints[0], s.ints[1]);
        case LayerType::conv2d:
            need(5);
            return std::make_unique<Conv2D>(static_cast<int>(s.ints[0]), static_cast<int>(s.ints[1]),
                                            static_cast<int>(s.ints[2]), static_cast<int>(s.ints[3]),
                                            static_cast<int>(s.ints[4]));
        case LayerType::sigmoid: need(1); return std::make_unique<Sigmoid>(s.ints[0]);
        case LayerType::dropout: need(1); return std::make_unique<Dropout>(s.ints[0], s.real);
        }
        throw ParameterError("Network: unknown layer type");
    }

    void check_chain() const {
        for (std::size_t i = 1; i < layers_.size(); ++i)
            if (layers_[i]->input_size() != layers_[i - 1]->output_size())
                throw ParameterError("Network: layer " + std::to_string(i) + " input does not match previous output");
    }

    std::vector<std::unique_ptr<Layer>> layers_;
};

/// [inputs → h1 → h2 → classes], sigmoid hidden units with dropout.
inline Network make_fnn(Eigen::Index inputs, Eigen::Index h1, Eigen::Index h2, Eigen::Index classes, double dropout,
                        std::mt19937_64& rng) {
    Network net;
    Eigen::Index prev = inputs;
    for (Eigen::Index h : {h1, h2}) {
        auto d = std::make_unique<Dense>(prev, h);
        d->init(rng);
        net.add(std::move(d));
        net.add(std::make_unique<Sigmoid>(h));
        net.add(std::make_unique<Dropout>(h, dropout));
        prev = h;
    }
    auto out = std::make_unique<Dense>(prev, classes);
    out->init(rng);
    net.add(std::move(out));
    return net;
}

/// One 8×8 convolution layer, a sigmoid dense hidden layer, softmax head.
inline Network make_cnn(int in_h, int in_w, int filters, int stride, Eigen::Index hidden, Eigen::Index classes,
                        double dropout, std::mt19937_64& rng, int kernel = 8) {
    Network net;
    auto conv = std::make_unique<Conv2D>(in_h, in_w, filters, kernel, stride);
    conv->init(rng);
    const Eigen::Index conv_out = conv->output_size();
    net.add(std::move(conv));
    net.add(std::make_unique<Sigmoid>(conv_out));
    auto hid = std::make_unique<Dense>(conv_out, hidden);
    hid->init(rng);
    net.add(std::move(hid));
    net.add(std::make_unique<Sigmoid>(hidden));
    net.add(std::make_unique<Dropout>(hidden, dropout));
    auto out = std::make_unique<Dense>(hidden, classes);
    out->init(rng);
    net.add(std::move(out));
    return net;
}

} // namespace tactip::nn
