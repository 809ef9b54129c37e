#pragma once

// Two-layer perceptron classifier (ReLU hidden layer, softmax output)
// trained with mini-batch SGD on mean cross-entropy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rfcl/binary_io.hpp"
#include "rfcl/error.hpp"
#include "rfcl/linalg.hpp"
#include "rfcl/random.hpp"

namespace rfcl {

struct MLP {
    Eigen::MatrixXd w1;  // hidden x input
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;  // classes x hidden
    Eigen::VectorXd b2;

    [[nodiscard]] std::size_t input_dim() const { return static_cast<std::size_t>(w1.cols()); }
    [[nodiscard]] std::size_t hidden() const { return static_cast<std::size_t>(w1.rows()); }
    [[nodiscard]] std::size_t classes() const { return static_cast<std::size_t>(w2.rows()); }

    [[nodiscard]] bool all_finite() const {
        return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
    }

    friend bool operator==(const MLP& a, const MLP& b) {
        return a.w1 == b.w1 && a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2;
    }
};

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer, biases included.
inline MLP init_mlp(std::size_t input_dim, std::size_t hidden, std::size_t classes, std::uint64_t seed) {
    if (input_dim == 0 || hidden == 0 || classes == 0) throw ArgumentError("init_mlp: zero dimension");
    Rng rng(seed);
    auto fill = [&](auto& m, double fan_in) {
        const double a = 1.0 / std::sqrt(fan_in);
        std::uniform_real_distribution<double> u(-a, a);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    };
    MLP m;
    m.w1.resize(static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(input_dim));
    m.b1.resize(static_cast<Eigen::Index>(hidden));
    m.w2.resize(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(hidden));
    m.b2.resize(static_cast<Eigen::Index>(classes));
    fill(m.w1, static_cast<double>(input_dim));
    fill(m.b1, static_cast<double>(input_dim));
    fill(m.w2, static_cast<double>(hidden));
    fill(m.b2, static_cast<double>(hidden));
    return m;
}

/// Row-wise softmax with max subtraction.
inline RowMatrix softmax_rows(const RowMatrix& logits) {
    RowMatrix p(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double mx = logits.row(r).maxCoeff();
        p.row(r) = (logits.row(r).array() - mx).exp().matrix();
        p.row(r) /= p.row(r).sum();
    }
    return p;
}

struct MlpActivations {
    RowMatrix pre_hidden;  // B x hidden
    RowMatrix hidden;      // B x hidden
    RowMatrix probs;       // B x classes
};

inline MlpActivations mlp_forward_batch(const MLP& model, const RowMatrix& x) {
    if (static_cast<std::size_t>(x.cols()) != model.input_dim())
        throw ShapeError("mlp_forward: input dimension " + std::to_string(x.cols()) +
                         " != model input dimension " + std::to_string(model.input_dim()));
    MlpActivations a;
    a.pre_hidden.noalias() = x * model.w1.transpose();
    a.pre_hidden.rowwise() += model.b1.transpose();
    a.hidden = a.pre_hidden.cwiseMax(0.0);
    RowMatrix logits = a.hidden * model.w2.transpose();
    logits.rowwise() += model.b2.transpose();
    a.probs = softmax_rows(logits);
    return a;
}

inline Eigen::VectorXd mlp_forward(const MLP& model, const Eigen::VectorXd& x) {
    RowMatrix row = x.transpose();
    return mlp_forward_batch(model, row).probs.row(0).transpose();
}

struct MlpGradients {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;
    double loss = 0.0;

    [[nodiscard]] double squared_norm() const {
        return w1.squaredNorm() + b1.squaredNorm() + w2.squaredNorm() + b2.squaredNorm();
    }
};

/// Analytic gradients of the mean cross-entropy over the batch. The ReLU
/// derivative is taken as 0 at exactly 0.
inline MlpGradients mlp_gradients(const MLP& model, const RowMatrix& x,
                                  std::span<const std::uint8_t> labels, std::size_t batch_index = 0) {
    const auto b = static_cast<Eigen::Index>(labels.size());
    if (b == 0) throw ArgumentError("mlp_gradients: empty batch");
    if (x.rows() != b) throw ShapeError("mlp_gradients: rows != labels");
    const MlpActivations a = mlp_forward_batch(model, x);
    RowMatrix delta = a.probs;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
        if (y >= delta.cols()) throw ArgumentError("mlp_gradients: label out of range");
        loss -= std::log(a.probs(i, y));
        delta(i, y) -= 1.0;
    }
    loss /= static_cast<double>(b);
    if (!std::isfinite(loss))
        throw NumericError("mlp_gradients: non-finite loss in batch " + std::to_string(batch_index));
    delta /= static_cast<double>(b);

    MlpGradients g;
    g.loss = loss;
    g.w2.noalias() = delta.transpose() * a.hidden;
    g.b2 = delta.colwise().sum().transpose();
    RowMatrix dh = delta * model.w2;
    dh.array() *= (a.pre_hidden.array() > 0.0).cast<double>();
    g.w1.noalias() = dh.transpose() * x;
    g.b1 = dh.colwise().sum().transpose();
    return g;
}

struct TrainConfig {
    double learning_rate = 0.01;
    double lr_decay = 1e-2;  // lr_epoch = learning_rate / (1 + epoch * lr_decay)
    double momentum = 0.0;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 100;
    std::uint64_t rng_seed = 0;
    double stop_at_train_accuracy = 1.0;
    std::size_t hidden = 128;
    std::size_t classes = 10;
};

enum class StopReason { reached_accuracy, max_epochs };

inline const char* to_string(StopReason r) {
    return r == StopReason::reached_accuracy ? "reached_accuracy" : "max_epochs";
}

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;
    double train_accuracy = 0.0;
};

struct TrainLog {
    double initial_accuracy = 0.0;
    std::vector<EpochRecord> epochs;
    StopReason stop = StopReason::max_epochs;
};

struct TrainResult {
    MLP model;
    TrainLog log;
};

template <class Matrix>
RowMatrix gather_rows(const Matrix& features, std::span<const std::size_t> rows) {
    RowMatrix x(static_cast<Eigen::Index>(rows.size()), features.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        x.row(static_cast<Eigen::Index>(i)) =
            features.row(static_cast<Eigen::Index>(rows[i])).template cast<double>();
    return x;
}

/// Argmax of the class probabilities per row, ties to the lowest class.
template <class Matrix>
std::vector<std::uint8_t> predict(const MLP& model, const Matrix& features) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(features.rows()));
    constexpr Eigen::Index kChunk = 512;
    std::vector<std::size_t> idx;
    for (Eigen::Index r0 = 0; r0 < features.rows(); r0 += kChunk) {
        const Eigen::Index m = std::min(kChunk, features.rows() - r0);
        idx.resize(static_cast<std::size_t>(m));
        std::iota(idx.begin(), idx.end(), static_cast<std::size_t>(r0));
        const RowMatrix p = mlp_forward_batch(model, gather_rows(features, idx)).probs;
        for (Eigen::Index i = 0; i < m; ++i) {
            Eigen::Index best = 0;
            for (Eigen::Index c = 1; c < p.cols(); ++c)
                if (p(i, c) > p(i, best)) best = c;
            out[static_cast<std::size_t>(r0 + i)] = static_cast<std::uint8_t>(best);
        }
    }
    return out;
}

template <class Matrix>
double evaluate(const MLP& model, const Matrix& features, std::span<const std::uint8_t> labels) {
    if (static_cast<std::size_t>(features.rows()) != labels.size())
        throw ShapeError("evaluate: rows != labels");
    if (labels.empty()) return 0.0;
    const auto pred = predict(model, features);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hit += pred[i] == labels[i];
    return static_cast<double>(hit) / static_cast<double>(labels.size());
}

/// Mini-batch SGD over a fresh seeded shuffle each epoch. Stops after
/// `max_epochs` or once train accuracy (measured after an epoch) reaches
/// `stop_at_train_accuracy`.
template <class Matrix>
TrainResult train(const Matrix& features, std::span<const std::uint8_t> labels, const TrainConfig& cfg) {
    const auto n = static_cast<std::size_t>(features.rows());
    if (n != labels.size()) throw ShapeError("train: rows != labels");
    if (n == 0) throw ArgumentError("train: empty training set");
    if (!(cfg.learning_rate >= 0.0)) throw ArgumentError("train: learning_rate must be >= 0");
    if (cfg.batch_size == 0) throw ArgumentError("train: batch_size must be >= 1");
    for (std::uint8_t y : labels)
        if (y >= cfg.classes) throw ArgumentError("train: label " + std::to_string(y) + " out of range");

    TrainResult res;
    res.model = init_mlp(static_cast<std::size_t>(features.cols()), cfg.hidden, cfg.classes,
                         derive_seed(cfg.rng_seed, "mlp-init"));
    MLP& m = res.model;
    MLP velocity{Eigen::MatrixXd::Zero(m.w1.rows(), m.w1.cols()), Eigen::VectorXd::Zero(m.b1.size()),
                 Eigen::MatrixXd::Zero(m.w2.rows(), m.w2.cols()), Eigen::VectorXd::Zero(m.b2.size())};
    res.log.initial_accuracy = evaluate(m, features, labels);

    std::vector<std::size_t> order(n);
    std::vector<std::uint8_t> batch_labels;
    std::size_t batch_counter = 0;
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(cfg.rng_seed, "mlp-shuffle-" + std::to_string(epoch)));
        std::shuffle(order.begin(), order.end(), rng);
        const double lr = cfg.learning_rate / (1.0 + static_cast<double>(epoch) * cfg.lr_decay);
        double loss_sum = 0.0;
        for (std::size_t s = 0; s < n; s += cfg.batch_size) {
            const std::size_t e = std::min(n, s + cfg.batch_size);
            const std::span<const std::size_t> rows(order.data() + s, e - s);
            batch_labels.resize(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) batch_labels[i] = labels[rows[i]];
            MlpGradients grad;
            try {
                grad = mlp_gradients(m, gather_rows(features, rows), batch_labels, batch_counter);
            } catch (const NumericError&) {
                throw NumericError("train: loss diverged at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(s / cfg.batch_size));
            }
            ++batch_counter;
            loss_sum += grad.loss * static_cast<double>(rows.size());
            velocity.w1 = cfg.momentum * velocity.w1 - lr * grad.w1;
            velocity.b1 = cfg.momentum * velocity.b1 - lr * grad.b1;
            velocity.w2 = cfg.momentum * velocity.w2 - lr * grad.w2;
            velocity.b2 = cfg.momentum * velocity.b2 - lr * grad.b2;
            m.w1 += velocity.w1;
            m.b1 += velocity.b1;
            m.w2 += velocity.w2;
            m.b2 += velocity.b2;
        }
        if (!m.all_finite())
            throw NumericError("train: parameters became non-finite at epoch " + std::to_string(epoch));
        const double acc = evaluate(m, features, labels);
        res.log.epochs.push_back({epoch, loss_sum / static_cast<double>(n), acc});
        if (acc >= cfg.stop_at_train_accuracy) {
            res.log.stop = StopReason::reached_accuracy;
            break;
        }
    }
    return res;
}

/// "RFCL-MLP1", (D, hidden, classes) u32 LE, then W1, b1, W2, b2 as f64 LE,
/// matrices row-major.
inline void save_mlp(const MLP& m, const std::string& path) {
    auto os = io::open_out(path);
    io::write_magic(os, "RFCL-MLP1");
    io::write_u32(os, io::checked_u32(m.input_dim(), "input dim"));
    io::write_u32(os, io::checked_u32(m.hidden(), "hidden"));
    io::write_u32(os, io::checked_u32(m.classes(), "classes"));
    for (Eigen::Index r = 0; r < m.w1.rows(); ++r)
        for (Eigen::Index c = 0; c < m.w1.cols(); ++c) io::write_f64(os, m.w1(r, c));
    for (Eigen::Index i = 0; i < m.b1.size(); ++i) io::write_f64(os, m.b1(i));
    for (Eigen::Index r = 0; r < m.w2.rows(); ++r)
        for (Eigen::Index c = 0; c < m.w2.cols(); ++c) io::write_f64(os, m.w2(r, c));
    for (Eigen::Index i = 0; i < m.b2.size(); ++i) io::write_f64(os, m.b2(i));
    if (!os) throw FormatError("save_mlp: write failed for " + path);
}

inline MLP load_mlp(const std::string& path) {
    auto is = io::open_in(path);
    io::expect_magic(is, "RFCL-MLP1", path);
    const auto d = static_cast<Eigen::Index>(io::read_u32(is, path));
    const auto h = static_cast<Eigen::Index>(io::read_u32(is, path));
    const auto c = static_cast<Eigen::Index>(io::read_u32(is, path));
    MLP m;
    m.w1.resize(h, d);
    m.b1.resize(h);
    m.w2.resize(c, h);
    m.b2.resize(c);
    for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index k = 0; k < d; ++k) m.w1(r, k) = io::read_f64(is, path);
    for (Eigen::Index i = 0; i < h; ++i) m.b1(i) = io::read_f64(is, path);
    for (Eigen::Index r = 0; r < c; ++r)
        for (Eigen::Index k = 0; k < h; ++k) m.w2(r, k) = io::read_f64(is, path);
    for (Eigen::Index i = 0; i < c; ++i) m.b2(i) = io::read_f64(is, path);
    return m;
}

}  // namespace rfcl
