#ifndef UAVLAB_CNN_HPP
#define UAVLAB_CNN_HPP

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uavlab/dataset.hpp"
#include "uavlab/errors.hpp"
#include "uavlab/rng.hpp"

namespace uavlab::cnn {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class LayerTag : std::uint8_t { kConv = 1, kRelu = 2, kMaxPool = 3, kFlatten = 4, kDense = 5 };

// Batched activations are (batch * h * w) x channels for spatial layers and
// batch x features after the flatten.
template <typename Scalar>
class Layer {
public:
    virtual ~Layer() = default;
    virtual Mat<Scalar> forward(const Mat<Scalar>& x, int batch) = 0;
    virtual Mat<Scalar> backward(const Mat<Scalar>& dy, int batch) = 0;
    virtual std::span<Scalar> params() { return {}; }
    virtual std::span<Scalar> grads() { return {}; }
    virtual LayerTag tag() const = 0;
    virtual std::vector<std::uint32_t> shape() const = 0;
};

// 3x3 cross-correlation, stride 1, zero padding 1, via im2col + GEMM.
template <typename Scalar>
class Conv2d final : public Layer<Scalar> {
public:
    Conv2d(int h, int w, int in_c, int out_c)
        : h_(h), w_(w), in_c_(in_c), out_c_(out_c),
          weights_(9 * in_c, out_c), bias_(Vec<Scalar>::Zero(out_c)),
          grad_w_(Mat<Scalar>::Zero(9 * in_c, out_c)), grad_b_(Vec<Scalar>::Zero(out_c)) {
        weights_.setZero();
    }

    void init_he(Rng& rng) {
        const double limit = std::sqrt(6.0 / (9.0 * in_c_));
        for (Eigen::Index i = 0; i < weights_.size(); ++i)
            weights_.data()[i] = static_cast<Scalar>(rng.uniform(-limit, limit));
        bias_.setZero();
    }

    Mat<Scalar> forward(const Mat<Scalar>& x, int batch) override {
        if (x.rows() != static_cast<Eigen::Index>(batch) * h_ * w_ || x.cols() != in_c_)
            throw ValidationError("conv2d: input shape mismatch");
        im2col(x, batch);
        Mat<Scalar> y = cols_ * weights_;
        y.rowwise() += bias_.transpose();
        return y;
    }

    Mat<Scalar> backward(const Mat<Scalar>& dy, int batch) override {
        grad_w_.noalias() = cols_.transpose() * dy;
        grad_b_ = dy.colwise().sum();
        const Mat<Scalar> dcols = dy * weights_.transpose();
        return col2im(dcols, batch);
    }

    std::span<Scalar> params() override {
        param_view_.resize(static_cast<std::size_t>(weights_.size() + bias_.size()));
        return all_of(weights_, bias_, param_view_);
    }
    std::span<Scalar> grads() override {
        grad_view_.resize(static_cast<std::size_t>(grad_w_.size() + grad_b_.size()));
        return all_of(grad_w_, grad_b_, grad_view_);
    }

    // Writes updated parameters back from the contiguous view.
    void commit_params() {
        std::copy_n(param_view_.data(), weights_.size(), weights_.data());
        std::copy_n(param_view_.data() + weights_.size(), bias_.size(), bias_.data());
    }

    LayerTag tag() const override { return LayerTag::kConv; }
    std::vector<std::uint32_t> shape() const override {
        return {static_cast<std::uint32_t>(h_), static_cast<std::uint32_t>(w_),
                static_cast<std::uint32_t>(in_c_), static_cast<std::uint32_t>(out_c_)};
    }

    Mat<Scalar>& weights() { return weights_; }
    Vec<Scalar>& bias() { return bias_; }

private:
    // Packs two parameter blocks into one contiguous span for the optimizer;
    // Conv2d syncs back in commit_params().
    std::span<Scalar> all_of(const Mat<Scalar>& m, const Vec<Scalar>& v, std::vector<Scalar>& store) {
        std::copy_n(m.data(), m.size(), store.data());
        std::copy_n(v.data(), v.size(), store.data() + m.size());
        return {store.data(), store.size()};
    }

    void im2col(const Mat<Scalar>& x, int batch) {
        cols_.resize(static_cast<Eigen::Index>(batch) * h_ * w_, 9 * in_c_);
        cols_.setZero();
        for (int n = 0; n < batch; ++n) {
            const Eigen::Index base = static_cast<Eigen::Index>(n) * h_ * w_;
            for (int y = 0; y < h_; ++y) {
                for (int x_pos = 0; x_pos < w_; ++x_pos) {
                    Scalar* out = cols_.row(base + y * w_ + x_pos).data();
                    for (int k = 0; k < 9; ++k) {
                        const int sy = y + k / 3 - 1;
                        const int sx = x_pos + k % 3 - 1;
                        if (sy < 0 || sy >= h_ || sx < 0 || sx >= w_) continue;
                        const Scalar* src = x.row(base + sy * w_ + sx).data();
                        std::copy_n(src, in_c_, out + k * in_c_);
                    }
                }
            }
        }
    }

    Mat<Scalar> col2im(const Mat<Scalar>& dcols, int batch) const {
        Mat<Scalar> dx = Mat<Scalar>::Zero(static_cast<Eigen::Index>(batch) * h_ * w_, in_c_);
        for (int n = 0; n < batch; ++n) {
            const Eigen::Index base = static_cast<Eigen::Index>(n) * h_ * w_;
            for (int y = 0; y < h_; ++y) {
                for (int x_pos = 0; x_pos < w_; ++x_pos) {
                    const Scalar* src = dcols.row(base + y * w_ + x_pos).data();
                    for (int k = 0; k < 9; ++k) {
                        const int sy = y + k / 3 - 1;
                        const int sx = x_pos + k % 3 - 1;
                        if (sy < 0 || sy >= h_ || sx < 0 || sx >= w_) continue;
                        Scalar* dst = dx.row(base + sy * w_ + sx).data();
                        for (int c = 0; c < in_c_; ++c) dst[c] += src[k * in_c_ + c];
                    }
                }
            }
        }
        return dx;
    }

    int h_, w_, in_c_, out_c_;
    Mat<Scalar> weights_;
    Vec<Scalar> bias_;
    Mat<Scalar> grad_w_;
    Vec<Scalar> grad_b_;
    Mat<Scalar> cols_;
    std::vector<Scalar> param_view_;
    std::vector<Scalar> grad_view_;
};

template <typename Scalar>
class Relu final : public Layer<Scalar> {
public:
    Mat<Scalar> forward(const Mat<Scalar>& x, int) override {
        mask_ = (x.array() > Scalar(0)).template cast<Scalar>();
        return x.cwiseMax(Scalar(0));
    }
    Mat<Scalar> backward(const Mat<Scalar>& dy, int) override {
        return dy.cwiseProduct(mask_);
    }
    LayerTag tag() const override { return LayerTag::kRelu; }
    std::vector<std::uint32_t> shape() const override { return {}; }

private:
    Mat<Scalar> mask_;
};

// 2x2 max pooling, stride 2; gradient routed to the argmax, ties going to
// the first element in row-major scan order.
template <typename Scalar>
class MaxPool2d final : public Layer<Scalar> {
public:
    MaxPool2d(int h, int w, int channels) : h_(h), w_(w), c_(channels) {
        if (h % 2 != 0 || w % 2 != 0) throw ValidationError("maxpool: dimensions must be even");
    }

    Mat<Scalar> forward(const Mat<Scalar>& x, int batch) override {
        const int oh = h_ / 2, ow = w_ / 2;
        Mat<Scalar> y(static_cast<Eigen::Index>(batch) * oh * ow, c_);
        argmax_.resize(static_cast<std::size_t>(y.rows()) * c_);
        for (int n = 0; n < batch; ++n) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    const Eigen::Index orow = (static_cast<Eigen::Index>(n) * oh + oy) * ow + ox;
                    for (int c = 0; c < c_; ++c) {
                        Scalar best{};
                        Eigen::Index best_row = -1;
                        for (int k = 0; k < 4; ++k) {
                            const int sy = 2 * oy + k / 2;
                            const int sx = 2 * ox + k % 2;
                            const Eigen::Index row = (static_cast<Eigen::Index>(n) * h_ + sy) * w_ + sx;
                            const Scalar v = x(row, c);
                            if (best_row < 0 || v > best) {
                                best = v;
                                best_row = row;
                            }
                        }
                        y(orow, c) = best;
                        argmax_[static_cast<std::size_t>(orow) * c_ + c] = best_row;
                    }
                }
            }
        }
        return y;
    }

    Mat<Scalar> backward(const Mat<Scalar>& dy, int batch) override {
        Mat<Scalar> dx = Mat<Scalar>::Zero(static_cast<Eigen::Index>(batch) * h_ * w_, c_);
        for (Eigen::Index orow = 0; orow < dy.rows(); ++orow)
            for (int c = 0; c < c_; ++c)
                dx(argmax_[static_cast<std::size_t>(orow) * c_ + c], c) += dy(orow, c);
        return dx;
    }

    LayerTag tag() const override { return LayerTag::kMaxPool; }
    std::vector<std::uint32_t> shape() const override {
        return {static_cast<std::uint32_t>(h_), static_cast<std::uint32_t>(w_),
                static_cast<std::uint32_t>(c_)};
    }

private:
    int h_, w_, c_;
    std::vector<Eigen::Index> argmax_;
};

// (batch*h*w) x c  ->  batch x (h*w*c); both are the same row-major bytes.
template <typename Scalar>
class Flatten final : public Layer<Scalar> {
public:
    Flatten(int h, int w, int channels) : h_(h), w_(w), c_(channels) {}

    Mat<Scalar> forward(const Mat<Scalar>& x, int batch) override {
        Mat<Scalar> y(batch, static_cast<Eigen::Index>(h_) * w_ * c_);
        std::copy_n(x.data(), x.size(), y.data());
        return y;
    }
    Mat<Scalar> backward(const Mat<Scalar>& dy, int batch) override {
        Mat<Scalar> dx(static_cast<Eigen::Index>(batch) * h_ * w_, c_);
        std::copy_n(dy.data(), dy.size(), dx.data());
        return dx;
    }
    LayerTag tag() const override { return LayerTag::kFlatten; }
    std::vector<std::uint32_t> shape() const override {
        return {static_cast<std::uint32_t>(h_), static_cast<std::uint32_t>(w_),
                static_cast<std::uint32_t>(c_)};
    }

private:
    int h_, w_, c_;
};

template <typename Scalar>
class Dense final : public Layer<Scalar> {
public:
    Dense(int in, int out)
        : weights_(Mat<Scalar>::Zero(in, out)), bias_(Vec<Scalar>::Zero(out)),
          grad_w_(Mat<Scalar>::Zero(in, out)), grad_b_(Vec<Scalar>::Zero(out)) {}

    void init_he(Rng& rng) {
        const double limit = std::sqrt(6.0 / static_cast<double>(weights_.rows()));
        for (Eigen::Index i = 0; i < weights_.size(); ++i)
            weights_.data()[i] = static_cast<Scalar>(rng.uniform(-limit, limit));
        bias_.setZero();
    }

    Mat<Scalar> forward(const Mat<Scalar>& x, int) override {
        if (x.cols() != weights_.rows()) throw ValidationError("dense: input shape mismatch");
        input_ = x;
        Mat<Scalar> y = x * weights_;
        y.rowwise() += bias_.transpose();
        return y;
    }

    Mat<Scalar> backward(const Mat<Scalar>& dy, int) override {
        grad_w_.noalias() = input_.transpose() * dy;
        grad_b_ = dy.colwise().sum();
        return dy * weights_.transpose();
    }

    std::span<Scalar> params() override {
        param_view_.resize(static_cast<std::size_t>(weights_.size() + bias_.size()));
        std::copy_n(weights_.data(), weights_.size(), param_view_.data());
        std::copy_n(bias_.data(), bias_.size(), param_view_.data() + weights_.size());
        return {param_view_.data(), param_view_.size()};
    }
    std::span<Scalar> grads() override {
        grad_view_.resize(static_cast<std::size_t>(grad_w_.size() + grad_b_.size()));
        std::copy_n(grad_w_.data(), grad_w_.size(), grad_view_.data());
        std::copy_n(grad_b_.data(), grad_b_.size(), grad_view_.data() + grad_w_.size());
        return {grad_view_.data(), grad_view_.size()};
    }
    void commit_params() {
        std::copy_n(param_view_.data(), weights_.size(), weights_.data());
        std::copy_n(param_view_.data() + weights_.size(), bias_.size(), bias_.data());
    }

    LayerTag tag() const override { return LayerTag::kDense; }
    std::vector<std::uint32_t> shape() const override {
        return {static_cast<std::uint32_t>(weights_.rows()), static_cast<std::uint32_t>(weights_.cols())};
    }

    Mat<Scalar>& weights() { return weights_; }
    Vec<Scalar>& bias() { return bias_; }

private:
    Mat<Scalar> weights_;
    Vec<Scalar> bias_;
    Mat<Scalar> grad_w_;
    Vec<Scalar> grad_b_;
    Mat<Scalar> input_;
    std::vector<Scalar> param_view_;
    std::vector<Scalar> grad_view_;
};

template <typename Scalar>
struct Network {
    std::vector<std::unique_ptr<Layer<Scalar>>> layers;
    int input_rows = 0, input_cols = 0, input_depth = 0;

    Mat<Scalar> forward(const Mat<Scalar>& x, int batch) {
        Mat<Scalar> a = x;
        for (auto& l : layers) a = l->forward(a, batch);
        return a;
    }

    void backward(const Mat<Scalar>& dy, int batch) {
        Mat<Scalar> g = dy;
        for (auto it = layers.rbegin(); it != layers.rend(); ++it) g = (*it)->backward(g, batch);
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (auto& l : layers) n += l->params().size();
        return n;
    }
};

// conv16-conv32-pool-conv32-conv64-pool-dense128-dense2, all 3x3 kernels,
// ReLU activations, linear output.
template <typename Scalar>
Network<Scalar> make_coverage_cnn(int rows, int cols, int depth, std::uint64_t seed) {
    if (rows % 4 != 0 || cols % 4 != 0)
        throw ValidationError("coverage cnn: grid rows/cols must be divisible by 4");
    Rng rng(seed);
    Network<Scalar> net;
    net.input_rows = rows;
    net.input_cols = cols;
    net.input_depth = depth;

    const auto conv = [&](int h, int w, int in_c, int out_c) {
        auto l = std::make_unique<Conv2d<Scalar>>(h, w, in_c, out_c);
        l->init_he(rng);
        net.layers.push_back(std::move(l));
        net.layers.push_back(std::make_unique<Relu<Scalar>>());
    };
    conv(rows, cols, depth, 16);
    conv(rows, cols, 16, 32);
    net.layers.push_back(std::make_unique<MaxPool2d<Scalar>>(rows, cols, 32));
    conv(rows / 2, cols / 2, 32, 32);
    conv(rows / 2, cols / 2, 32, 64);
    net.layers.push_back(std::make_unique<MaxPool2d<Scalar>>(rows / 2, cols / 2, 64));
    net.layers.push_back(std::make_unique<Flatten<Scalar>>(rows / 4, cols / 4, 64));
    auto d1 = std::make_unique<Dense<Scalar>>(rows / 4 * (cols / 4) * 64, 128);
    d1->init_he(rng);
    net.layers.push_back(std::move(d1));
    net.layers.push_back(std::make_unique<Relu<Scalar>>());
    auto d2 = std::make_unique<Dense<Scalar>>(128, 2);
    d2->init_he(rng);
    net.layers.push_back(std::move(d2));
    return net;
}

// Plain MLP over a flat input (used by the DQN baseline).
template <typename Scalar>
Network<Scalar> make_mlp(const std::vector<int>& dims, std::uint64_t seed) {
    if (dims.size() < 2) throw ValidationError("mlp: need at least input and output dims");
    Rng rng(seed);
    Network<Scalar> net;
    net.input_rows = 1;
    net.input_cols = dims.front();
    net.input_depth = 1;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        auto d = std::make_unique<Dense<Scalar>>(dims[i], dims[i + 1]);
        d->init_he(rng);
        net.layers.push_back(std::move(d));
        if (i + 2 < dims.size()) net.layers.push_back(std::make_unique<Relu<Scalar>>());
    }
    return net;
}

// Mean absolute error over a single 2-d prediction. Gradient components are
// +-1/2, zero exactly at equality.
template <typename Scalar>
std::pair<Scalar, std::array<Scalar, 2>> mae_loss(const std::array<Scalar, 2>& pred,
                                                  const std::array<Scalar, 2>& target) {
    const Scalar dx = pred[0] - target[0];
    const Scalar dy = pred[1] - target[1];
    const auto sgn = [](Scalar v) { return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0)); };
    return {(std::abs(dx) + std::abs(dy)) / Scalar(2), {sgn(dx) / Scalar(2), sgn(dy) / Scalar(2)}};
}

// Batch version: loss is the mean of per-sample MAE losses; returns the
// gradient wrt predictions.
template <typename Scalar>
std::pair<Scalar, Mat<Scalar>> mae_loss_batch(const Mat<Scalar>& pred, const Mat<Scalar>& target) {
    const Mat<Scalar> diff = pred - target;
    const Scalar denom = static_cast<Scalar>(diff.size());
    Mat<Scalar> grad = diff.array().sign().matrix() / denom;
    return {diff.array().abs().sum() / denom, std::move(grad)};
}

template <typename Scalar>
struct AdamState {
    Vec<Scalar> m;
    Vec<Scalar> v;
    std::int64_t step = 0;
    Scalar lr = Scalar(1e-3);
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
    Scalar eps = Scalar(1e-8);

    explicit AdamState(std::size_t n_params, Scalar learning_rate = Scalar(1e-3))
        : m(Vec<Scalar>::Zero(static_cast<Eigen::Index>(n_params))),
          v(Vec<Scalar>::Zero(static_cast<Eigen::Index>(n_params))), lr(learning_rate) {}
};

// Bias-corrected Adam update over the full parameter vector.
template <typename Scalar>
void adam_step(std::span<Scalar> params, std::span<const Scalar> grads, AdamState<Scalar>& state) {
    if (params.size() != grads.size() || static_cast<Eigen::Index>(params.size()) != state.m.size())
        throw ValidationError("adam_step: shape mismatch");
    ++state.step;
    const Scalar bc1 = Scalar(1) - std::pow(state.beta1, static_cast<Scalar>(state.step));
    const Scalar bc2 = Scalar(1) - std::pow(state.beta2, static_cast<Scalar>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto j = static_cast<Eigen::Index>(i);
        const Scalar g = grads[i];
        state.m(j) = state.beta1 * state.m(j) + (Scalar(1) - state.beta1) * g;
        state.v(j) = state.beta2 * state.v(j) + (Scalar(1) - state.beta2) * g * g;
        params[i] -= state.lr * (state.m(j) / bc1) / (std::sqrt(state.v(j) / bc2) + state.eps);
    }
}

// Applies one Adam step to every parametric layer of a network.
template <typename Scalar>
void adam_update(Network<Scalar>& net, AdamState<Scalar>& state, std::vector<Scalar>& scratch_p,
                 std::vector<Scalar>& scratch_g) {
    scratch_p.clear();
    scratch_g.clear();
    for (auto& l : net.layers) {
        const auto p = l->params();
        const auto g = l->grads();
        scratch_p.insert(scratch_p.end(), p.begin(), p.end());
        scratch_g.insert(scratch_g.end(), g.begin(), g.end());
    }
    adam_step<Scalar>(scratch_p, scratch_g, state);
    std::size_t offset = 0;
    for (auto& l : net.layers) {
        auto p = l->params();
        if (p.empty()) continue;
        std::copy_n(scratch_p.data() + offset, p.size(), p.data());
        offset += p.size();
        if (auto* conv = dynamic_cast<Conv2d<Scalar>*>(l.get())) conv->commit_params();
        if (auto* dense = dynamic_cast<Dense<Scalar>*>(l.get())) dense->commit_params();
    }
}

template <typename Scalar>
void adam_update(Network<Scalar>& net, AdamState<Scalar>& state) {
    std::vector<Scalar> sp, sg;
    adam_update(net, state, sp, sg);
}

struct TrainConfig {
    int epochs = 30;
    int batch_size = 64;
    double lr = 1e-3;
    std::uint64_t seed = 1;
    int patience = 5;  // early stop on val MAE

    void validate() const {
        if (epochs < 1 || batch_size < 1 || !(lr > 0.0) || patience < 1)
            throw ValidationError("train config: all fields must be positive");
    }
};

struct TrainHistory {
    std::vector<double> train_mae;
    std::vector<double> val_mae;
    int best_epoch = -1;
};

// Copies samples into the conv input layout, normalizing counts by the
// per-slice MU total.
template <typename Scalar>
Mat<Scalar> to_input_matrix(std::span<const dataset::Sample* const> samples, int rows, int cols,
                            int depth) {
    const Eigen::Index hw = static_cast<Eigen::Index>(rows) * cols;
    Mat<Scalar> x(static_cast<Eigen::Index>(samples.size()) * hw, depth);
    for (std::size_t n = 0; n < samples.size(); ++n) {
        const auto& f = samples[n]->features;
        if (f.rows != rows || f.cols != cols || f.depth != depth)
            throw ValidationError("sample feature shape does not match model input");
        double slice_sum = 0.0;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) slice_sum += f.at(0, r, c);
        const Scalar scale = slice_sum > 0.0 ? static_cast<Scalar>(1.0 / slice_sum) : Scalar(1);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                for (int k = 0; k < depth; ++k)
                    x(static_cast<Eigen::Index>(n) * hw + r * cols + c, k) =
                        static_cast<Scalar>(f.at(k, r, c)) * scale;
    }
    return x;
}

template <typename Scalar>
Mat<Scalar> to_label_matrix(std::span<const dataset::Sample* const> samples) {
    Mat<Scalar> y(static_cast<Eigen::Index>(samples.size()), 2);
    for (std::size_t n = 0; n < samples.size(); ++n) {
        y(static_cast<Eigen::Index>(n), 0) = static_cast<Scalar>(samples[n]->label_x);
        y(static_cast<Eigen::Index>(n), 1) = static_cast<Scalar>(samples[n]->label_y);
    }
    return y;
}

template <typename Scalar>
double dataset_mae(Network<Scalar>& net, const std::vector<dataset::Sample>& samples,
                   int batch_size) {
    double total = 0.0;
    std::size_t done = 0;
    while (done < samples.size()) {
        const std::size_t n = std::min<std::size_t>(batch_size, samples.size() - done);
        std::vector<const dataset::Sample*> batch(n);
        for (std::size_t i = 0; i < n; ++i) batch[i] = &samples[done + i];
        const auto x = to_input_matrix<Scalar>(batch, net.input_rows, net.input_cols, net.input_depth);
        const auto y = to_label_matrix<Scalar>(batch);
        const auto pred = net.forward(x, static_cast<int>(n));
        total += static_cast<double>((pred - y).array().abs().sum());
        done += n;
    }
    return total / (2.0 * static_cast<double>(samples.size()));
}

// Mini-batch training with seeded shuffling and early stopping on val MAE.
template <typename Scalar>
TrainHistory train(Network<Scalar>& net, const std::vector<dataset::Sample>& train_set,
                   const std::vector<dataset::Sample>& val_set, const TrainConfig& cfg,
                   bool verbose = false) {
    cfg.validate();
    if (train_set.empty()) throw ValidationError("train: empty training set");

    AdamState<Scalar> adam(net.param_count(), static_cast<Scalar>(cfg.lr));
    TrainHistory hist;
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    std::vector<Scalar> scratch_p, scratch_g;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(split_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.next_below(i))]);

        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t n = std::min<std::size_t>(cfg.batch_size, order.size() - start);
            std::vector<const dataset::Sample*> batch(n);
            for (std::size_t i = 0; i < n; ++i) batch[i] = &train_set[order[start + i]];
            const auto x = to_input_matrix<Scalar>(batch, net.input_rows, net.input_cols, net.input_depth);
            const auto y = to_label_matrix<Scalar>(batch);
            const auto pred = net.forward(x, static_cast<int>(n));
            auto [loss, grad] = mae_loss_batch<Scalar>(pred, y);
            if (!std::isfinite(static_cast<double>(loss)))
                throw DivergenceError("train: loss became non-finite");
            net.backward(grad, static_cast<int>(n));
            adam_update(net, adam, scratch_p, scratch_g);
            epoch_loss += static_cast<double>(loss);
            ++n_batches;
        }
        hist.train_mae.push_back(epoch_loss / static_cast<double>(n_batches));

        double val = hist.train_mae.back();
        if (!val_set.empty()) val = dataset_mae(net, val_set, cfg.batch_size);
        hist.val_mae.push_back(val);
        if (verbose)
            std::fprintf(stderr, "epoch %d train_mae %.6f val_mae %.6f\n", epoch,
                         hist.train_mae.back(), val);

        if (val < best_val - 1e-9) {
            best_val = val;
            hist.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    return hist;
}

// Deterministic inference for one feature tensor; output clamped to [0,1]^2.
template <typename Scalar>
std::array<double, 2> predict(Network<Scalar>& net, const dataset::FeatureTensor& features) {
    dataset::Sample tmp;
    tmp.features = features;
    const dataset::Sample* ptr = &tmp;
    const auto x = to_input_matrix<Scalar>(std::span<const dataset::Sample* const>(&ptr, 1),
                                           net.input_rows, net.input_cols, net.input_depth);
    const auto y = net.forward(x, 1);
    return {std::clamp(static_cast<double>(y(0, 0)), 0.0, 1.0),
            std::clamp(static_cast<double>(y(0, 1)), 0.0, 1.0)};
}

// Checkpoint persistence (magic UAVNN1, or UAVQN1 for DQN value networks).
void save_model_file(const std::vector<std::pair<std::uint8_t, std::vector<std::uint32_t>>>& layer_meta,
                     const std::vector<std::vector<double>>& layer_params,
                     const std::array<std::uint32_t, 3>& input_dims, const std::string& path,
                     const char* magic);
void load_model_file(std::vector<std::pair<std::uint8_t, std::vector<std::uint32_t>>>& layer_meta,
                     std::vector<std::vector<double>>& layer_params,
                     std::array<std::uint32_t, 3>& input_dims, const std::string& path,
                     const char* magic);

template <typename Scalar>
void save_model(Network<Scalar>& net, const std::string& path, const char* magic = "UAVNN1") {
    std::vector<std::pair<std::uint8_t, std::vector<std::uint32_t>>> meta;
    std::vector<std::vector<double>> params;
    for (auto& l : net.layers) {
        meta.emplace_back(static_cast<std::uint8_t>(l->tag()), l->shape());
        const auto p = l->params();
        std::vector<double> pd(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) pd[i] = static_cast<double>(p[i]);
        params.push_back(std::move(pd));
    }
    save_model_file(meta, params,
                    {static_cast<std::uint32_t>(net.input_rows), static_cast<std::uint32_t>(net.input_cols),
                     static_cast<std::uint32_t>(net.input_depth)},
                    path, magic);
}

template <typename Scalar>
Network<Scalar> load_model(const std::string& path, const char* magic = "UAVNN1") {
    std::vector<std::pair<std::uint8_t, std::vector<std::uint32_t>>> meta;
    std::vector<std::vector<double>> params;
    std::array<std::uint32_t, 3> dims{};
    load_model_file(meta, params, dims, path, magic);

    Network<Scalar> net;
    net.input_rows = static_cast<int>(dims[0]);
    net.input_cols = static_cast<int>(dims[1]);
    net.input_depth = static_cast<int>(dims[2]);
    for (std::size_t i = 0; i < meta.size(); ++i) {
        const auto& [tag, shape] = meta[i];
        std::unique_ptr<Layer<Scalar>> layer;
        switch (static_cast<LayerTag>(tag)) {
            case LayerTag::kConv:
                layer = std::make_unique<Conv2d<Scalar>>(static_cast<int>(shape[0]), static_cast<int>(shape[1]),
                                                         static_cast<int>(shape[2]), static_cast<int>(shape[3]));
                break;
            case LayerTag::kRelu: layer = std::make_unique<Relu<Scalar>>(); break;
            case LayerTag::kMaxPool:
                layer = std::make_unique<MaxPool2d<Scalar>>(static_cast<int>(shape[0]), static_cast<int>(shape[1]),
                                                            static_cast<int>(shape[2]));
                break;
            case LayerTag::kFlatten:
                layer = std::make_unique<Flatten<Scalar>>(static_cast<int>(shape[0]), static_cast<int>(shape[1]),
                                                          static_cast<int>(shape[2]));
                break;
            case LayerTag::kDense:
                layer = std::make_unique<Dense<Scalar>>(static_cast<int>(shape[0]), static_cast<int>(shape[1]));
                break;
            default: throw IoError("model checkpoint: unknown layer tag");
        }
        auto p = layer->params();
        if (p.size() != params[i].size()) throw IoError("model checkpoint: parameter count mismatch");
        for (std::size_t j = 0; j < p.size(); ++j) p[j] = static_cast<Scalar>(params[i][j]);
        if (auto* conv = dynamic_cast<Conv2d<Scalar>*>(layer.get())) conv->commit_params();
        if (auto* dense = dynamic_cast<Dense<Scalar>*>(layer.get())) dense->commit_params();
        net.layers.push_back(std::move(layer));
    }
    return net;
}

}  // namespace uavlab::cnn

#endif
