#pragma once

// Pressure from marker displacements: the magnitude-sum baseline and a ridge
// regressor over all 266 displacement components.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tactip/tracking.hpp"

namespace tactip {

enum class Compliance { hard, soft };

inline const char* to_string(Compliance c) { return c == Compliance::hard ? "hard" : "soft"; }

inline Compliance compliance_from_string(const std::string& s) {
    if (s == "hard") return Compliance::hard;
    if (s == "soft") return Compliance::soft;
    throw DataError("unknown surface \"" + s + "\" (expected hard or soft)");
}

struct PressureSample {
    std::vector<double> displacements;  // interleaved dx, dy per marker
    double pressure = 0.0;
    Compliance surface = Compliance::hard;
};

inline double magnitude_sum(const VectorField& field) {
    double s = 0.0;
    for (const auto& v : field.vectors) s += norm(v.delta());
    return s;
}

inline double magnitude_sum(std::span<const double> interleaved) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < interleaved.size(); i += 2) s += std::hypot(interleaved[i], interleaved[i + 1]);
    return s;
}

struct RidgePressureModel {
    Eigen::VectorXd weights;  // 2·133
    double bias = 0.0;
    double alpha = 150.0;

    /// Affine response before the zero clamp.
    double raw(std::span<const double> displacements) const {
        if (displacements.size() != static_cast<std::size_t>(weights.size()))
            throw ParameterError("predict_pressure: expected " + std::to_string(weights.size() / 2) + " vectors, got " +
                                 std::to_string(displacements.size() / 2));
        return bias + weights.dot(Eigen::Map<const Eigen::VectorXd>(displacements.data(), weights.size()));
    }
};

inline RidgePressureModel train_pressure_model(std::span<const PressureSample> samples, double alpha = 150.0) {
    if (samples.size() < 2) throw DataError("train_pressure_model: need at least 2 samples");
    const std::size_t dim = samples.front().displacements.size();
    if (dim != 2 * kMarkerCount)
        throw DataError("train_pressure_model: samples must carry " + std::to_string(kMarkerCount) + " vectors");
    bool distinct_pressure = false;
    bool distinct_input = false;
    for (const PressureSample& s : samples) {
        if (s.displacements.size() != dim) throw DataError("train_pressure_model: inconsistent vector counts");
        distinct_pressure |= s.pressure != samples.front().pressure;
        distinct_input |= s.displacements != samples.front().displacements;
    }
    if (!distinct_pressure || !distinct_input)
        throw DataError("train_pressure_model: degenerate data (need distinct inputs spanning >= 2 pressures)");

    const auto n = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(dim));
    Eigen::MatrixXd Y(n, 1);
    for (Eigen::Index r = 0; r < n; ++r) {
        X.row(r) = Eigen::Map<const Eigen::RowVectorXd>(samples[r].displacements.data(), static_cast<Eigen::Index>(dim));
        Y(r, 0) = samples[r].pressure;
    }
    RidgeSolution sol = fit_ridge(X, Y, alpha);
    return {sol.weights.col(0), sol.bias(0), alpha};
}

inline double predict_pressure(const RidgePressureModel& model, std::span<const double> displacements) {
    return std::max(0.0, model.raw(displacements));
}

inline double predict_pressure(const RidgePressureModel& model, const VectorField& field) {
    if (field.count() != kMarkerCount)
        throw ParameterError("predict_pressure: expected " + std::to_string(kMarkerCount) + " vectors, got " +
                             std::to_string(field.count()));
    const std::vector<double> flat = field.flatten();
    return predict_pressure(model, std::span<const double>(flat));
}

/// Least-squares isotonic (non-decreasing) map from a scalar to pressure,
/// fitted by pool-adjacent-violators and evaluated by linear interpolation.
class MonotoneCalibration {
public:
    MonotoneCalibration(std::vector<double> x, std::vector<double> y) {
        if (x.size() != y.size() || x.empty()) throw DataError("MonotoneCalibration: need matching non-empty data");
        std::vector<std::size_t> order(x.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

        struct Block {
            double sum_x, sum_y, weight;
        };
        std::vector<Block> blocks;
        for (std::size_t i : order) {
            blocks.push_back({x[i], y[i], 1.0});
            while (blocks.size() > 1) {
                Block& b = blocks.back();
                Block& a = blocks[blocks.size() - 2];
                if (a.sum_y / a.weight <= b.sum_y / b.weight) break;
                a.sum_x += b.sum_x;
                a.sum_y += b.sum_y;
                a.weight += b.weight;
                blocks.pop_back();
            }
        }
        for (const Block& b : blocks) {
            knots_x_.push_back(b.sum_x / b.weight);
            knots_y_.push_back(b.sum_y / b.weight);
        }
    }

    double operator()(double v) const {
        if (v <= knots_x_.front()) return knots_y_.front();
        if (v >= knots_x_.back()) return knots_y_.back();
        const auto it = std::upper_bound(knots_x_.begin(), knots_x_.end(), v);
        const std::size_t hi = static_cast<std::size_t>(it - knots_x_.begin());
        const std::size_t lo = hi - 1;
        const double t = (v - knots_x_[lo]) / (knots_x_[hi] - knots_x_[lo]);
        return knots_y_[lo] + t * (knots_y_[hi] - knots_y_[lo]);
    }

private:
    std::vector<double> knots_x_;
    std::vector<double> knots_y_;
};

// ---- Pressure dataset text: "pressure surface v0x v0y ... v132x v132y" ----

inline void write_pressure_dataset(const std::string& path, std::span<const PressureSample> samples) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.precision(17);
    for (const PressureSample& s : samples) {
        out << s.pressure << ' ' << to_string(s.surface);
        for (double v : s.displacements) out << ' ' << v;
        out << '\n';
    }
}

inline std::vector<PressureSample> read_pressure_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<PressureSample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        PressureSample s;
        std::string surface;
        if (!(ss >> s.pressure >> surface)) throw DataError(path + ":" + std::to_string(lineno) + ": malformed row");
        s.surface = compliance_from_string(surface);
        double v;
        while (ss >> v) s.displacements.push_back(v);
        if (!ss.eof() || s.displacements.size() != 2 * kMarkerCount)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(2 * kMarkerCount) +
                            " vector components");
        out.push_back(std::move(s));
    }
    return out;
}

inline void save_pressure_model(const RidgePressureModel& m, const std::string& path) {
    ByteWriter w;
    w.magic("TACP");
    w.f64(m.alpha);
    w.u32(static_cast<std::uint32_t>(m.weights.size()));
    for (Eigen::Index i = 0; i < m.weights.size(); ++i) w.f64(m.weights(i));
    w.f64(m.bias);
    w.save(path);
}

inline RidgePressureModel load_pressure_model(const std::string& path) {
    ByteReader r = ByteReader::from_file(path);
    r.expect_magic("TACP");
    RidgePressureModel m;
    m.alpha = r.f64();
    const std::uint32_t n = r.u32();
    if (n != 2 * kMarkerCount) throw FormatError(path + ": unexpected input dimension", r.position());
    m.weights.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) m.weights(i) = r.f64();
    m.bias = r.f64();
    r.expect_end();
    return m;
}

} // namespace tactip
