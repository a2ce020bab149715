#pragma once

// Temporal surface classification: standard scaling, T-frame stacking,
// FNN/CNN classifiers trained with seeded minibatch SGD, and the T sweep.
//
// Model file (little-endian):
//   "TACN" | version u8 | arch u8 | T u32 | frame_rows u32 | frame_cols u32
//   | class_count u32 | (name_len u32, bytes)* | layer_count u32
//   | (type u8, int_count u32, i64*, real f64)* | feature_count u32
//   | mean f64* | std f64* | parameter_count u64 | f64*

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tactip/binary_io.hpp"
#include "tactip/error.hpp"
#include "tactip/nn.hpp"

namespace tactip {

// ---- Scaling ----

struct StandardScaler {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;

    Eigen::Index size() const { return mean.size(); }
};

/// Population statistics per feature (rows are features, columns samples).
/// Features with zero variance keep σ = 1.
inline StandardScaler fit_scaler(const Eigen::MatrixXd& data) {
    if (data.cols() < 2) throw DataError("fit_scaler: need at least 2 samples");
    StandardScaler s;
    s.mean = data.rowwise().mean();
    const Eigen::MatrixXd centred = data.colwise() - s.mean;
    s.std = (centred.array().square().rowwise().sum() / static_cast<double>(data.cols())).sqrt().matrix();
    for (Eigen::Index i = 0; i < s.std.size(); ++i)
        if (!(s.std(i) > 0.0)) s.std(i) = 1.0;
    return s;
}

inline Eigen::MatrixXd transform(const StandardScaler& s, const Eigen::MatrixXd& x) {
    if (x.rows() != s.size())
        throw ParameterError("transform: " + std::to_string(x.rows()) + " features, scaler has " + std::to_string(s.size()));
    return ((x.colwise() - s.mean).array().colwise() / s.std.array()).matrix();
}

inline Eigen::MatrixXd inverse_transform(const StandardScaler& s, const Eigen::MatrixXd& z) {
    if (z.rows() != s.size()) throw ParameterError("inverse_transform: feature count mismatch");
    return ((z.array().colwise() * s.std.array()).matrix().colwise() + s.mean);
}

// ---- Stacking ----

/// One frame's classifier input as a rows×cols block (binary image or a
/// 1×266 displacement row).
struct FrameBlock {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;
};

/// T consecutive blocks stacked vertically, oldest first: shape (rows·T, cols).
struct TemporalStack {
    int T = 0;
    int rows = 0;  // per-frame rows
    int cols = 0;
    std::vector<double> data;
    std::string label;

    int height() const { return rows * T; }
};

/// Stack the last T entries of `history` if the current (last) frame is
/// gated; nullopt when the gate is off or the history is too short.
inline std::optional<TemporalStack> stack_frames(std::span<const FrameBlock> history, int T, bool gated,
                                                 const std::string& label = {}) {
    if (T < 1) throw ParameterError("stack_frames: T must be >= 1");
    if (!gated || history.size() < static_cast<std::size_t>(T)) return std::nullopt;
    const FrameBlock& last = history.back();
    TemporalStack s{T, last.rows, last.cols, {}, label};
    s.data.reserve(static_cast<std::size_t>(last.rows) * last.cols * T);
    for (std::size_t i = history.size() - static_cast<std::size_t>(T); i < history.size(); ++i) {
        const FrameBlock& b = history[i];
        if (b.rows != last.rows || b.cols != last.cols) throw DataError("stack_frames: frame shapes differ");
        s.data.insert(s.data.end(), b.data.begin(), b.data.end());
    }
    return s;
}

/// Every gated stack of a session. `gates[i]` says whether frame i may end a
/// stack; `labels[i]` is copied onto it.
inline std::vector<TemporalStack> stack_session(std::span<const FrameBlock> frames, int T, std::span<const bool> gates,
                                                std::span<const std::string> labels) {
    if (gates.size() != frames.size() || labels.size() != frames.size())
        throw DataError("stack_session: frames, gates and labels differ in length");
    std::vector<TemporalStack> out;
    for (std::size_t i = 0; i < frames.size(); ++i)
        if (auto s = stack_frames(frames.first(i + 1), T, gates[i], labels[i])) out.push_back(std::move(*s));
    return out;
}

// ---- Models ----

enum class Arch : std::uint8_t { fnn = 1, cnn = 2 };

inline std::string to_string(Arch a) { return a == Arch::fnn ? "fnn" : "cnn"; }

inline Arch parse_arch(const std::string& s) {
    if (s == "fnn") return Arch::fnn;
    if (s == "cnn") return Arch::cnn;
    throw ParameterError("unknown architecture \"" + s + "\" (expected fnn or cnn)");
}

struct ClassifierConfig {
    Arch arch = Arch::fnn;
    int T = 1;
    int frame_rows = 1;
    int frame_cols = 266;
    std::vector<std::string> classes;
    double dropout = 0.2;
    // FNN
    int hidden1 = 256;
    int hidden2 = 64;
    // CNN; the kernel is fixed at 8×8
    int filters = 8;
    int stride = 4;
    int hidden = 1000;
};

class Classifier {
public:
    Classifier() = default;

    Classifier(const ClassifierConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        if (cfg.classes.size() < 2) throw ParameterError("Classifier: need at least 2 classes");
        if (cfg.T < 1 || cfg.frame_rows < 1 || cfg.frame_cols < 1) throw ParameterError("Classifier: bad input shape");
        std::mt19937_64 rng(seed);
        const auto n_classes = static_cast<Eigen::Index>(cfg.classes.size());
        if (cfg.arch == Arch::fnn)
            net_ = nn::make_fnn(input_size(), cfg.hidden1, cfg.hidden2, n_classes, cfg.dropout, rng);
        else
            net_ = nn::make_cnn(cfg.frame_rows * cfg.T, cfg.frame_cols, cfg.filters, cfg.stride, cfg.hidden, n_classes,
                                cfg.dropout, rng);
        scaler_.mean = Eigen::VectorXd::Zero(input_size());
        scaler_.std = Eigen::VectorXd::Ones(input_size());
    }

    /// Assemble from decoded parts.
    Classifier(ClassifierConfig cfg, StandardScaler scaler, nn::Network net)
        : cfg_(std::move(cfg)), scaler_(std::move(scaler)), net_(std::move(net)) {}

    Classifier(const Classifier& o) : cfg_(o.cfg_), scaler_(o.scaler_), net_(o.net_.clone()) {}
    Classifier& operator=(const Classifier& o) {
        if (this != &o) {
            cfg_ = o.cfg_;
            scaler_ = o.scaler_;
            net_ = o.net_.clone();
        }
        return *this;
    }
    Classifier(Classifier&&) = default;
    Classifier& operator=(Classifier&&) = default;

    const ClassifierConfig& config() const { return cfg_; }
    const std::vector<std::string>& classes() const { return cfg_.classes; }
    Eigen::Index input_size() const { return static_cast<Eigen::Index>(cfg_.frame_rows) * cfg_.frame_cols * cfg_.T; }

    int class_index(const std::string& label) const {
        const auto it = std::find(cfg_.classes.begin(), cfg_.classes.end(), label);
        if (it == cfg_.classes.end()) throw DataError("label \"" + label + "\" is not a model class");
        return static_cast<int>(it - cfg_.classes.begin());
    }

    void check_shape(const TemporalStack& s) const {
        if (s.T != cfg_.T || s.rows != cfg_.frame_rows || s.cols != cfg_.frame_cols ||
            static_cast<Eigen::Index>(s.data.size()) != input_size())
            throw ParameterError("stack shape (T=" + std::to_string(s.T) + ", " + std::to_string(s.height()) + "x" +
                                 std::to_string(s.cols) + ") does not match model (T=" + std::to_string(cfg_.T) + ", " +
                                 std::to_string(cfg_.frame_rows * cfg_.T) + "x" + std::to_string(cfg_.frame_cols) + ")");
    }

    StandardScaler& scaler() { return scaler_; }
    const StandardScaler& scaler() const { return scaler_; }
    nn::Network& network() { return net_; }
    const nn::Network& network() const { return net_; }

    /// Class probabilities for a batch of raw (unscaled) columns.
    Eigen::MatrixXd scores(const Eigen::MatrixXd& raw) const { return nn::softmax(net_.infer(transform(scaler_, raw))); }

private:
    ClassifierConfig cfg_;
    StandardScaler scaler_;
    nn::Network net_;
};

/// Raw feature matrix, one column per stack.
inline Eigen::MatrixXd stack_matrix(std::span<const TemporalStack> stacks) {
    if (stacks.empty()) return {};
    Eigen::MatrixXd X(static_cast<Eigen::Index>(stacks.front().data.size()), static_cast<Eigen::Index>(stacks.size()));
    for (std::size_t i = 0; i < stacks.size(); ++i)
        X.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(stacks[i].data.data(), X.rows());
    return X;
}

// ---- Training ----

struct TrainOptions {
    int epochs = 200;
    double learning_rate = 0.05;
    int batch = 32;
    std::uint64_t seed = 0;
};

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;  // running training accuracy with dropout active
};

using TrainCurve = std::vector<EpochStats>;

/// Fit the scaler on `data`, then minibatch SGD on softmax cross-entropy.
/// Shuffling and dropout draw from one generator seeded with `opt.seed`.
inline TrainCurve train_sgd(Classifier& model, std::span<const TemporalStack> data, const TrainOptions& opt,
                            const std::function<void(const EpochStats&)>& on_epoch = {}) {
    if (data.empty()) throw DataError("train_sgd: empty dataset");
    if (opt.epochs < 1 || opt.batch < 1 || !(opt.learning_rate > 0.0))
        throw ParameterError("train_sgd: epochs, batch and learning rate must be positive");
    std::vector<int> labels;
    labels.reserve(data.size());
    for (const TemporalStack& s : data) {
        try {
            model.check_shape(s);
        } catch (const ParameterError& e) {
            throw DataError(std::string("train_sgd: ") + e.what());
        }
        labels.push_back(model.class_index(s.label));
    }
    const Eigen::MatrixXd raw = stack_matrix(data);
    model.scaler() = data.size() >= 2 ? fit_scaler(raw) : model.scaler();
    const Eigen::MatrixXd X = transform(model.scaler(), raw);

    nn::Network& net = model.network();
    std::mt19937_64 rng(opt.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    TrainCurve curve;
    Eigen::MatrixXd xb;
    std::vector<int> yb;
    for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.batch));
            xb.resize(X.rows(), static_cast<Eigen::Index>(end - start));
            yb.resize(end - start);
            for (std::size_t i = start; i < end; ++i) {
                xb.col(static_cast<Eigen::Index>(i - start)) = X.col(static_cast<Eigen::Index>(order[i]));
                yb[i - start] = labels[order[i]];
            }
            const Eigen::MatrixXd logits = net.forward(xb, true, rng);
            Eigen::MatrixXd grad;
            const double loss = nn::softmax_cross_entropy(logits, yb, &grad);
            if (!std::isfinite(loss)) throw TrainingError("train_sgd: loss diverged", epoch);
            loss_sum += loss * static_cast<double>(end - start);
            for (Eigen::Index c = 0; c < logits.cols(); ++c) {
                Eigen::Index arg = 0;
                logits.col(c).maxCoeff(&arg);
                if (arg == yb[static_cast<std::size_t>(c)]) ++correct;
            }
            net.backward(grad);
            for (nn::Param p : net.params()) *p.value -= opt.learning_rate * *p.grad;
        }
        EpochStats st{epoch, loss_sum / static_cast<double>(data.size()),
                      static_cast<double>(correct) / static_cast<double>(data.size())};
        curve.push_back(st);
        if (on_epoch) on_epoch(st);
    }
    return curve;
}

// ---- Inference ----

struct Prediction {
    std::string label;
    std::vector<double> scores;
};

inline Prediction predict(const Classifier& model, const TemporalStack& stack) {
    model.check_shape(stack);
    const Eigen::MatrixXd p =
        model.scores(Eigen::Map<const Eigen::VectorXd>(stack.data.data(), static_cast<Eigen::Index>(stack.data.size())));
    Eigen::Index arg = 0;
    p.col(0).maxCoeff(&arg);
    return {model.classes()[static_cast<std::size_t>(arg)], std::vector<double>(p.data(), p.data() + p.size())};
}

struct Evaluation {
    double accuracy = 0.0;
    /// confusion[true][predicted], in model class order.
    std::vector<std::vector<std::size_t>> confusion;
};

inline Evaluation evaluate(const Classifier& model, std::span<const TemporalStack> data, std::size_t chunk = 256) {
    if (data.empty()) throw DataError("evaluate: empty dataset");
    const std::size_t k = model.classes().size();
    Evaluation ev;
    ev.confusion.assign(k, std::vector<std::size_t>(k, 0));
    std::size_t correct = 0;
    for (const TemporalStack& s : data) model.check_shape(s);
    for (std::size_t start = 0; start < data.size(); start += chunk) {
        const auto part = data.subspan(start, std::min(chunk, data.size() - start));
        const Eigen::MatrixXd p = model.scores(stack_matrix(part));
        for (std::size_t i = 0; i < part.size(); ++i) {
            Eigen::Index arg = 0;
            p.col(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
            const auto truth = static_cast<std::size_t>(model.class_index(part[i].label));
            ++ev.confusion[truth][static_cast<std::size_t>(arg)];
            if (static_cast<std::size_t>(arg) == truth) ++correct;
        }
    }
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return ev;
}

// ---- Persistence ----

inline std::vector<std::uint8_t> encode_classifier(const Classifier& m) {
    const ClassifierConfig& c = m.config();
    ByteWriter w;
    w.magic("TACN");
    w.u8(1);
    w.u8(static_cast<std::uint8_t>(c.arch));
    w.u32(static_cast<std::uint32_t>(c.T));
    w.u32(static_cast<std::uint32_t>(c.frame_rows));
    w.u32(static_cast<std::uint32_t>(c.frame_cols));
    w.u32(static_cast<std::uint32_t>(c.classes.size()));
    for (const std::string& name : c.classes) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.bytes(reinterpret_cast<const std::uint8_t*>(name.data()), name.size());
    }
    const auto specs = m.network().specs();
    w.u32(static_cast<std::uint32_t>(specs.size()));
    for (const nn::LayerSpec& s : specs) {
        w.u8(static_cast<std::uint8_t>(s.type));
        w.u32(static_cast<std::uint32_t>(s.ints.size()));
        for (std::int64_t v : s.ints) w.u64(static_cast<std::uint64_t>(v));
        w.f64(s.real);
    }
    w.u32(static_cast<std::uint32_t>(m.scaler().size()));
    for (Eigen::Index i = 0; i < m.scaler().size(); ++i) w.f64(m.scaler().mean(i));
    for (Eigen::Index i = 0; i < m.scaler().size(); ++i) w.f64(m.scaler().std(i));
    const std::vector<double> params = m.network().parameters();
    w.u64(params.size());
    for (double v : params) w.f64(v);
    return w.data();
}

inline void save_classifier(const Classifier& m, const std::string& path) {
    ByteWriter w;
    const auto bytes = encode_classifier(m);
    w.bytes(bytes.data(), bytes.size());
    w.save(path);
}

inline Classifier decode_classifier(std::vector<std::uint8_t> bytes, const std::string& name = "<memory>") {
    ByteReader r(std::move(bytes), name);
    r.expect_magic("TACN");
    if (const auto at = r.position(); r.u8() != 1) throw FormatError(name + ": unsupported model version", at);
    ClassifierConfig cfg;
    const auto arch_at = r.position();
    const std::uint8_t arch = r.u8();
    if (arch != 1 && arch != 2) throw FormatError(name + ": unknown architecture code", arch_at);
    cfg.arch = static_cast<Arch>(arch);
    cfg.T = static_cast<int>(r.u32());
    cfg.frame_rows = static_cast<int>(r.u32());
    cfg.frame_cols = static_cast<int>(r.u32());
    const std::uint32_t n_classes = r.u32();
    if (n_classes > r.remaining()) throw FormatError(name + ": implausible class count", r.position());
    for (std::uint32_t i = 0; i < n_classes; ++i) {
        const std::uint32_t len = r.u32();
        if (len > r.remaining()) throw FormatError(name + ": truncated class name", r.position());
        std::string s(len, '\0');
        r.bytes(reinterpret_cast<std::uint8_t*>(s.data()), len);
        cfg.classes.push_back(std::move(s));
    }
    const std::uint32_t n_layers = r.u32();
    if (n_layers > r.remaining()) throw FormatError(name + ": implausible layer count", r.position());
    std::vector<nn::LayerSpec> specs;
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        nn::LayerSpec s;
        const auto type_at = r.position();
        const std::uint8_t type = r.u8();
        if (type < 1 || type > 4) throw FormatError(name + ": unknown layer type", type_at);
        s.type = static_cast<nn::LayerType>(type);
        const std::uint32_t n_ints = r.u32();
        if (n_ints > 8) throw FormatError(name + ": malformed layer descriptor", r.position());
        for (std::uint32_t k = 0; k < n_ints; ++k) s.ints.push_back(static_cast<std::int64_t>(r.u64()));
        s.real = r.f64();
        specs.push_back(std::move(s));
    }
    const auto net_at = r.position();
    nn::Network net;
    try {
        net = nn::Network::from_specs(specs);
    } catch (const ParameterError& e) {
        throw FormatError(name + ": " + e.what(), net_at);
    }
    const std::uint32_t features = r.u32();
    if (features != static_cast<std::uint32_t>(net.input_size()) ||
        static_cast<Eigen::Index>(features) != static_cast<Eigen::Index>(cfg.frame_rows) * cfg.frame_cols * cfg.T ||
        net.output_size() != static_cast<Eigen::Index>(cfg.classes.size()))
        throw FormatError(name + ": architecture does not match input shape or class count", r.position());
    StandardScaler scaler;
    scaler.mean.resize(features);
    scaler.std.resize(features);
    for (std::uint32_t i = 0; i < features; ++i) scaler.mean(i) = r.f64();
    for (std::uint32_t i = 0; i < features; ++i) scaler.std(i) = r.f64();
    const auto count_at = r.position();
    const std::uint64_t n_params = r.u64();
    if (n_params != net.parameters().size()) throw FormatError(name + ": parameter count mismatch", count_at);
    std::vector<double> params(n_params);
    for (double& v : params) v = r.f64();
    r.expect_end();
    net.set_parameters(params);
    return Classifier(std::move(cfg), std::move(scaler), std::move(net));
}

inline Classifier load_classifier(const std::string& path) {
    ByteReader r = ByteReader::from_file(path);
    std::vector<std::uint8_t> bytes(r.remaining());
    r.bytes(bytes.data(), bytes.size());
    return decode_classifier(std::move(bytes), path);
}

inline void write_curve_csv(std::ostream& out, const TrainCurve& curve) {
    out << "epoch,loss,accuracy\n";
    out.precision(10);
    for (const EpochStats& s : curve) out << s.epoch << ',' << s.loss << ',' << s.accuracy << '\n';
}

// ---- T sweep ----

struct SweepRow {
    int T = 0;
    double mean = 0.0;
    double std = 0.0;  // population std over trials
    std::vector<double> accuracies;
};

/// Produces (train, test) stacks for a given T and trial seed.
using StackBuilder = std::function<std::pair<std::vector<TemporalStack>, std::vector<TemporalStack>>(int T, std::uint64_t seed)>;
/// Trains a fresh model for (T, seed) and returns its held-out accuracy.
using TrialRunner = std::function<double(int T, std::uint64_t seed)>;

inline std::vector<SweepRow> t_sweep(const TrialRunner& run, int t_min, int t_max, int trials, std::uint64_t seed) {
    if (t_min < 1 || t_max < t_min || trials < 1) throw ParameterError("t_sweep: need 1 <= tmin <= tmax and trials >= 1");
    std::vector<SweepRow> rows;
    for (int T = t_min; T <= t_max; ++T) {
        SweepRow row;
        row.T = T;
        for (int k = 0; k < trials; ++k) row.accuracies.push_back(run(T, seed + static_cast<std::uint64_t>(k)));
        const double n = static_cast<double>(trials);
        row.mean = std::accumulate(row.accuracies.begin(), row.accuracies.end(), 0.0) / n;
        double ss = 0.0;
        for (double a : row.accuracies) ss += (a - row.mean) * (a - row.mean);
        row.std = std::sqrt(ss / n);
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Convenience runner: build stacks, train with `cfg`/`opt`, evaluate on the test part.
inline TrialRunner make_trial_runner(StackBuilder build, ClassifierConfig cfg, TrainOptions opt) {
    return [build = std::move(build), cfg, opt](int T, std::uint64_t seed) {
        auto [train, test] = build(T, seed);
        ClassifierConfig c = cfg;
        c.T = T;
        Classifier model(c, seed);
        TrainOptions o = opt;
        o.seed = seed;
        train_sgd(model, train, o);
        return evaluate(model, test).accuracy;
    };
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "T,mean_accuracy,std_accuracy,trials\n";
    out.precision(10);
    for (const SweepRow& r : rows) out << r.T << ',' << r.mean << ',' << r.std << ',' << r.accuracies.size() << '\n';
}

/// Spearman rank correlation with average ranks for ties.
inline double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw ParameterError("spearman: need two equal-length series of >= 2");
    auto ranks = [](std::span<const double> v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

} // namespace tactip
