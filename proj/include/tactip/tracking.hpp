#pragma once

// Marker correspondence and displacement vectors.
//
// Two trackers live here. The vector model matches detected centroids to an
// origin set by shortest Euclidean distance, so its vector count follows
// whatever the detector found. The regression model maps the binary image
// straight to a fixed layout of 133 marker positions with a ridge solve.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "tactip/binary_io.hpp"
#include "tactip/imagery.hpp"
#include "tactip/ridge.hpp"

namespace tactip {

inline constexpr std::size_t kMarkerCount = 133;

inline double euclidean_distance(Point o, Point t) {
    const double dx = o.x - t.x;
    const double dy = o.y - t.y;
    return std::sqrt(dx * dx + dy * dy);
}

struct MatchPair {
    std::size_t origin = 0;
    std::size_t current = 0;
    double distance = 0.0;
};

struct Assignment {
    std::vector<MatchPair> pairs;  // in pick order
    std::vector<std::size_t> unmatched_origins;
    std::vector<std::size_t> unmatched_currents;

    double total_distance() const {
        double s = 0.0;
        for (const auto& p : pairs) s += p.distance;
        return s;
    }
};

/// Greedy global matching: repeatedly pair the closest unpaired
/// (origin, current) couple, ties going to the lower (origin, current)
/// index, until the closest remaining couple is farther than `max_dist`.
inline Assignment match_points(const MarkerSet& origins, const MarkerSet& currents, double max_dist) {
    if (!(max_dist > 0.0)) throw ParameterError("match_points: max_dist must be > 0");
    std::vector<MatchPair> candidates;
    for (std::size_t i = 0; i < origins.count(); ++i)
        for (std::size_t j = 0; j < currents.count(); ++j) {
            const double d = euclidean_distance(origins[i], currents[j]);
            if (d <= max_dist) candidates.push_back({i, j, d});
        }
    std::sort(candidates.begin(), candidates.end(), [](const MatchPair& a, const MatchPair& b) {
        return std::tie(a.distance, a.origin, a.current) < std::tie(b.distance, b.origin, b.current);
    });

    std::vector<char> origin_used(origins.count(), 0);
    std::vector<char> current_used(currents.count(), 0);
    Assignment out;
    for (const MatchPair& c : candidates) {
        if (origin_used[c.origin] || current_used[c.current]) continue;
        origin_used[c.origin] = current_used[c.current] = 1;
        out.pairs.push_back(c);
    }
    for (std::size_t i = 0; i < origins.count(); ++i)
        if (!origin_used[i]) out.unmatched_origins.push_back(i);
    for (std::size_t j = 0; j < currents.count(); ++j)
        if (!current_used[j]) out.unmatched_currents.push_back(j);
    return out;
}

struct DisplacementVector {
    Point origin;
    Point tip;

    Point delta() const { return tip - origin; }
};

struct VectorField {
    std::vector<DisplacementVector> vectors;

    std::size_t count() const { return vectors.size(); }
    bool empty() const { return vectors.empty(); }

    /// Interleaved (dx0, dy0, dx1, dy1, ...).
    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(2 * vectors.size());
        for (const auto& v : vectors) {
            const Point d = v.delta();
            out.push_back(d.x);
            out.push_back(d.y);
        }
        return out;
    }

    /// Rebuild a field from interleaved displacements anchored at `origins`.
    static VectorField from_flat(std::span<const double> flat, std::span<const Point> origins) {
        if (flat.size() != 2 * origins.size()) throw ParameterError("VectorField::from_flat: size mismatch");
        VectorField f;
        for (std::size_t i = 0; i < origins.size(); ++i)
            f.vectors.push_back({origins[i], origins[i] + Point{flat[2 * i], flat[2 * i + 1]}});
        return f;
    }
};

inline VectorField vector_field(const MarkerSet& origins, const MarkerSet& currents, const Assignment& assignment) {
    VectorField out;
    out.vectors.reserve(assignment.pairs.size());
    for (const MatchPair& p : assignment.pairs) {
        if (p.origin >= origins.count() || p.current >= currents.count())
            throw InternalError("vector_field: assignment index out of range");
        out.vectors.push_back({origins[p.origin], currents[p.current]});
    }
    return out;
}

inline Point average_vector(const VectorField& field) {
    if (field.empty()) throw DataError("average_vector: empty vector field");
    Point sum;
    for (const auto& v : field.vectors) sum = sum + v.delta();
    return (1.0 / static_cast<double>(field.count())) * sum;
}

/// Fixed-length displacement features: one (dx, dy) per origin, zero where the
/// origin found no partner. Padded with zeros up to `slots` origins.
inline std::vector<double> layout_displacements(const MarkerSet& origins, const MarkerSet& currents, double max_dist,
                                                std::size_t slots = kMarkerCount) {
    std::vector<double> out(2 * std::max(slots, origins.count()), 0.0);
    for (const MatchPair& p : match_points(origins, currents, max_dist).pairs) {
        out[2 * p.origin] = currents[p.current].x - origins[p.origin].x;
        out[2 * p.origin + 1] = currents[p.current].y - origins[p.origin].y;
    }
    out.resize(2 * slots);
    return out;
}

// ---- Regression marker model ----

struct AugmentSpec {
    int copies = 4;          // augmented variants per sample, on top of the original
    int max_shift = 10;      // integer pixels, each axis
    double zoom_min = 0.9;
    double zoom_max = 1.1;
    std::uint64_t seed = 0;
};

struct LabelledFrame {
    BinaryFrame frame;
    std::vector<Point> markers;
};

inline LabelledFrame translate(const LabelledFrame& s, int dx, int dy) {
    LabelledFrame out{BinaryFrame(s.frame.width, s.frame.height), s.markers};
    for (int y = 0; y < s.frame.height; ++y)
        for (int x = 0; x < s.frame.width; ++x) {
            const int sx = x - dx, sy = y - dy;
            if (sx >= 0 && sy >= 0 && sx < s.frame.width && sy < s.frame.height) out.frame.at(x, y) = s.frame.at(sx, sy);
        }
    for (Point& p : out.markers) p = p + Point{static_cast<double>(dx), static_cast<double>(dy)};
    return out;
}

/// Nearest-neighbour zoom about the frame centre.
inline LabelledFrame zoom(const LabelledFrame& s, double scale) {
    LabelledFrame out{BinaryFrame(s.frame.width, s.frame.height), s.markers};
    const double cx = (s.frame.width - 1) / 2.0;
    const double cy = (s.frame.height - 1) / 2.0;
    for (int y = 0; y < s.frame.height; ++y)
        for (int x = 0; x < s.frame.width; ++x) {
            const int sx = static_cast<int>(std::lround(cx + (x - cx) / scale));
            const int sy = static_cast<int>(std::lround(cy + (y - cy) / scale));
            if (sx >= 0 && sy >= 0 && sx < s.frame.width && sy < s.frame.height) out.frame.at(x, y) = s.frame.at(sx, sy);
        }
    for (Point& p : out.markers) p = Point{cx + scale * (p.x - cx), cy + scale * (p.y - cy)};
    return out;
}

inline std::vector<LabelledFrame> augment(std::span<const LabelledFrame> samples, const AugmentSpec& spec) {
    std::vector<LabelledFrame> out(samples.begin(), samples.end());
    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<int> shift(-spec.max_shift, spec.max_shift);
    std::uniform_real_distribution<double> scale(spec.zoom_min, spec.zoom_max);
    for (const LabelledFrame& s : samples)
        for (int c = 0; c < spec.copies; ++c) {
            // Alternate the two transforms, and combine them on every third copy.
            const int kind = c % 3;
            LabelledFrame a = s;
            if (kind != 1) {
                const int dx = shift(rng), dy = shift(rng);
                a = translate(a, dx, dy);
            }
            if (kind != 0) a = zoom(a, scale(rng));
            out.push_back(std::move(a));
        }
    return out;
}

struct RidgeMarkerModel {
    double alpha = 150.0;
    int feature_width = 64;
    int feature_height = 64;
    std::size_t marker_count = kMarkerCount;
    Eigen::MatrixXd weights;  // feature_len × 2·marker_count
    Eigen::VectorXd bias;

    std::size_t feature_len() const { return static_cast<std::size_t>(feature_width) * feature_height; }
    bool trained() const { return weights.size() > 0; }
};

inline Eigen::VectorXd marker_features(const BinaryFrame& frame, int fw, int fh) {
    const std::vector<double> v = downsample(frame, fw, fh);
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline RidgeMarkerModel train_marker_model(std::span<const LabelledFrame> samples, double alpha = 150.0,
                                           const AugmentSpec& augment_spec = {}, int feature_width = 64,
                                           int feature_height = 64) {
    if (samples.empty()) throw DataError("train_marker_model: no samples");
    if (!(alpha > 0.0)) throw ParameterError("train_marker_model: alpha must be > 0");
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].markers.size() != kMarkerCount)
            throw DataError("train_marker_model: sample " + std::to_string(i) + " has " +
                            std::to_string(samples[i].markers.size()) + " labelled markers, expected " +
                            std::to_string(kMarkerCount));

    const std::vector<LabelledFrame> data = augment(samples, augment_spec);
    RidgeMarkerModel model;
    model.alpha = alpha;
    model.feature_width = feature_width;
    model.feature_height = feature_height;
    const auto n = static_cast<Eigen::Index>(data.size());
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(model.feature_len()));
    Eigen::MatrixXd Y(n, static_cast<Eigen::Index>(2 * kMarkerCount));
    for (Eigen::Index r = 0; r < n; ++r) {
        X.row(r) = marker_features(data[r].frame, feature_width, feature_height).transpose();
        for (std::size_t m = 0; m < kMarkerCount; ++m) {
            Y(r, static_cast<Eigen::Index>(2 * m)) = data[r].markers[m].x;
            Y(r, static_cast<Eigen::Index>(2 * m + 1)) = data[r].markers[m].y;
        }
    }
    RidgeSolution sol = fit_ridge(X, Y, alpha);
    model.weights = std::move(sol.weights);
    model.bias = std::move(sol.bias);
    return model;
}

/// Always returns `marker_count` points, clamped into the frame.
inline MarkerSet predict_markers(const RidgeMarkerModel& model, const BinaryFrame& frame) {
    if (!model.trained()) throw ParameterError("predict_markers: model is not trained");
    const Eigen::VectorXd y = model.weights.transpose() * marker_features(frame, model.feature_width, model.feature_height) + model.bias;
    MarkerSet out;
    out.points.reserve(model.marker_count);
    for (std::size_t m = 0; m < model.marker_count; ++m)
        out.points.push_back({std::clamp(y(static_cast<Eigen::Index>(2 * m)), 0.0, frame.width - 1.0),
                              std::clamp(y(static_cast<Eigen::Index>(2 * m + 1)), 0.0, frame.height - 1.0)});
    return out;
}

/// Vectors from a fixed rest layout to the model's prediction, index for index.
inline VectorField marker_model_field(const RidgeMarkerModel& model, const BinaryFrame& frame,
                                      std::span<const Point> rest) {
    const MarkerSet pred = predict_markers(model, frame);
    if (rest.size() != pred.count()) throw ParameterError("marker_model_field: rest layout size mismatch");
    VectorField f;
    for (std::size_t i = 0; i < rest.size(); ++i) f.vectors.push_back({rest[i], pred[i]});
    return f;
}

inline void save_marker_model(const RidgeMarkerModel& m, const std::string& path) {
    ByteWriter w;
    w.magic("TACR");
    w.f64(m.alpha);
    w.u32(static_cast<std::uint32_t>(m.feature_len()));
    w.u16(static_cast<std::uint16_t>(m.feature_width));
    w.u16(static_cast<std::uint16_t>(m.feature_height));
    w.u32(static_cast<std::uint32_t>(m.marker_count));
    for (Eigen::Index r = 0; r < m.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < m.weights.cols(); ++c) w.f64(m.weights(r, c));
    for (Eigen::Index c = 0; c < m.bias.size(); ++c) w.f64(m.bias(c));
    w.save(path);
}

inline RidgeMarkerModel load_marker_model(const std::string& path) {
    ByteReader r = ByteReader::from_file(path);
    r.expect_magic("TACR");
    RidgeMarkerModel m;
    m.alpha = r.f64();
    const std::uint32_t len = r.u32();
    m.feature_width = r.u16();
    m.feature_height = r.u16();
    m.marker_count = r.u32();
    if (len != m.feature_len() || len == 0 || m.marker_count == 0)
        throw FormatError(path + ": inconsistent feature length", r.position());
    const auto outputs = static_cast<Eigen::Index>(2 * m.marker_count);
    m.weights.resize(len, outputs);
    for (Eigen::Index i = 0; i < m.weights.rows(); ++i)
        for (Eigen::Index c = 0; c < outputs; ++c) m.weights(i, c) = r.f64();
    m.bias.resize(outputs);
    for (Eigen::Index c = 0; c < outputs; ++c) m.bias(c) = r.f64();
    r.expect_end();
    return m;
}

// ---- Marker label file: "frame_index x0 y0 x1 y1 ... x132 y132" ----

struct MarkerLabels {
    std::vector<std::int64_t> frame_indices;
    std::vector<std::vector<Point>> markers;
};

inline void write_marker_labels(std::ostream& out, const MarkerLabels& labels) {
    const auto old = out.precision(10);
    for (std::size_t i = 0; i < labels.markers.size(); ++i) {
        out << labels.frame_indices[i];
        for (const Point& p : labels.markers[i]) out << ' ' << p.x << ' ' << p.y;
        out << '\n';
    }
    out.precision(old);
}

inline void save_marker_labels(const MarkerLabels& labels, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_marker_labels(out, labels);
}

inline MarkerLabels load_marker_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    MarkerLabels labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::int64_t idx = 0;
        if (!(ss >> idx)) throw DataError(path + ":" + std::to_string(lineno) + ": missing frame index");
        std::vector<double> v;
        double d;
        while (ss >> d) v.push_back(d);
        if (!ss.eof() || v.size() != 2 * kMarkerCount)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(kMarkerCount) +
                            " labelled points, got " + std::to_string(v.size() / 2));
        std::vector<Point> pts;
        for (std::size_t i = 0; i < v.size(); i += 2) pts.push_back({v[i], v[i + 1]});
        labels.frame_indices.push_back(idx);
        labels.markers.push_back(std::move(pts));
    }
    return labels;
}

} // namespace tactip
