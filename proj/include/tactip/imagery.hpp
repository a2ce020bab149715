#pragma once

// Frame types and the binary preprocessing chain: adaptive threshold,
// glare-blob removal and blob centroid extraction.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "tactip/error.hpp"

namespace tactip {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
    friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
    friend Point operator*(double k, Point p) { return {k * p.x, k * p.y}; }
    friend bool operator==(Point a, Point b) = default;
};

inline double norm(Point p) { return std::hypot(p.x, p.y); }

struct GrayFrame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;
    std::int64_t timestamp = 0;

    GrayFrame() = default;
    GrayFrame(int w, int h, std::uint8_t fill = 0, std::int64_t t = 0)
        : width(w), height(h), data(checked_size(w, h), fill), timestamp(t) {}

    std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return data.size(); }

    friend bool operator==(const GrayFrame&, const GrayFrame&) = default;

    static std::size_t checked_size(int w, int h) {
        if (w <= 0 || h <= 0) throw ParameterError("frame dimensions must be positive");
        return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    }
};

struct BinaryFrame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;  // 0 or 1

    BinaryFrame() = default;
    BinaryFrame(int w, int h) : width(w), height(h), bits(GrayFrame::checked_size(w, h), 0) {}

    std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
    std::size_t foreground() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }

    friend bool operator==(const BinaryFrame&, const BinaryFrame&) = default;
};

struct Pixel {
    int x = 0;
    int y = 0;
};

struct Blob {
    std::vector<Pixel> pixels;
    Point centroid;

    std::size_t area() const { return pixels.size(); }
};

struct MarkerSet {
    std::vector<Point> points;

    std::size_t count() const { return points.size(); }
    bool empty() const { return points.empty(); }
    const Point& operator[](std::size_t i) const { return points[i]; }
};

/// Binarize `frame` against the mean of a `window`×`window` neighbourhood.
/// Pixels outside the frame take the value of the nearest edge pixel.
inline BinaryFrame adaptive_threshold(const GrayFrame& frame, int window, double offset) {
    if (window < 3 || window % 2 == 0 || window > std::min(frame.width, frame.height))
        throw ParameterError("adaptive_threshold: window must be odd and within [3, min(width, height)], got " +
                             std::to_string(window));
    const int w = frame.width;
    const int h = frame.height;
    const int r = window / 2;
    const int pw = w + 2 * r;
    const int ph = h + 2 * r;

    // Integral image of the edge-replicated frame, with a zero guard row/column.
    std::vector<std::int64_t> integral(static_cast<std::size_t>(pw + 1) * (ph + 1), 0);
    auto I = [&](int x, int y) -> std::int64_t& { return integral[static_cast<std::size_t>(y) * (pw + 1) + x]; };
    for (int py = 0; py < ph; ++py) {
        const int sy = std::clamp(py - r, 0, h - 1);
        std::int64_t row = 0;
        for (int px = 0; px < pw; ++px) {
            const int sx = std::clamp(px - r, 0, w - 1);
            row += frame.at(sx, sy);
            I(px + 1, py + 1) = I(px + 1, py) + row;
        }
    }

    BinaryFrame out(w, h);
    const double area = static_cast<double>(window) * window;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // Window in padded coordinates spans [x, x+window) × [y, y+window).
            const std::int64_t sum = I(x + window, y + window) - I(x, y + window) - I(x + window, y) + I(x, y);
            const double mean = static_cast<double>(sum) / area;
            out.at(x, y) = static_cast<double>(frame.at(x, y)) > mean + offset ? 1 : 0;
        }
    }
    return out;
}

/// 4-connected components in raster order of their first pixel.
inline std::vector<Blob> label_components(const BinaryFrame& frame) {
    std::vector<Blob> blobs;
    std::vector<std::uint8_t> seen(frame.bits.size(), 0);
    std::vector<Pixel> stack;
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * frame.width + x;
            if (!frame.bits[idx] || seen[idx]) continue;
            Blob blob;
            seen[idx] = 1;
            stack.push_back({x, y});
            while (!stack.empty()) {
                const Pixel p = stack.back();
                stack.pop_back();
                blob.pixels.push_back(p);
                const Pixel nbrs[4] = {{p.x - 1, p.y}, {p.x + 1, p.y}, {p.x, p.y - 1}, {p.x, p.y + 1}};
                for (const Pixel& n : nbrs) {
                    if (n.x < 0 || n.y < 0 || n.x >= frame.width || n.y >= frame.height) continue;
                    const std::size_t nidx = static_cast<std::size_t>(n.y) * frame.width + n.x;
                    if (frame.bits[nidx] && !seen[nidx]) {
                        seen[nidx] = 1;
                        stack.push_back(n);
                    }
                }
            }
            double sx = 0.0, sy = 0.0;
            for (const Pixel& p : blob.pixels) {
                sx += p.x;
                sy += p.y;
            }
            const auto n = static_cast<double>(blob.pixels.size());
            blob.centroid = {sx / n, sy / n};
            blobs.push_back(std::move(blob));
        }
    }
    return blobs;
}

/// Clear every component whose area exceeds `max_area`. Default glare scale
/// is 100 px.
inline BinaryFrame remove_large_blobs(const BinaryFrame& frame, std::size_t max_area = 100) {
    if (max_area < 1) throw ParameterError("remove_large_blobs: max_area must be >= 1");
    BinaryFrame out = frame;
    for (const Blob& blob : label_components(frame)) {
        if (blob.area() <= max_area) continue;
        for (const Pixel& p : blob.pixels) out.at(p.x, p.y) = 0;
    }
    return out;
}

/// One centroid per component with area >= `min_area`, sorted by (y, x).
inline MarkerSet extract_centroids(const BinaryFrame& frame, std::size_t min_area = 1) {
    if (min_area < 1) throw ParameterError("extract_centroids: min_area must be >= 1");
    MarkerSet out;
    for (const Blob& blob : label_components(frame))
        if (blob.area() >= min_area) out.points.push_back(blob.centroid);
    std::sort(out.points.begin(), out.points.end(),
              [](Point a, Point b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
    return out;
}

inline GrayFrame to_gray(const BinaryFrame& frame, std::int64_t timestamp = 0) {
    GrayFrame out(frame.width, frame.height, 0, timestamp);
    for (std::size_t i = 0; i < frame.bits.size(); ++i) out.data[i] = frame.bits[i] ? 255 : 0;
    return out;
}

/// Box-average a binary frame down to `out_w`×`out_h`; dimensions must divide evenly.
inline std::vector<double> downsample(const BinaryFrame& frame, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0 || frame.width % out_w != 0 || frame.height % out_h != 0)
        throw ParameterError("downsample: " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                             " does not divide into " + std::to_string(out_w) + "x" + std::to_string(out_h));
    const int fx = frame.width / out_w;
    const int fy = frame.height / out_h;
    std::vector<double> out(static_cast<std::size_t>(out_w) * out_h, 0.0);
    for (int y = 0; y < frame.height; ++y)
        for (int x = 0; x < frame.width; ++x)
            out[static_cast<std::size_t>(y / fy) * out_w + x / fx] += frame.at(x, y);
    const double cell = static_cast<double>(fx) * fy;
    for (double& v : out) v /= cell;
    return out;
}

/// Standard preprocessing parameters; defaults are calibrated on simulator output.
struct PreprocessParams {
    int window = 15;
    double offset = 20.0;
    std::size_t max_area = 100;
    std::size_t min_area = 4;
};

inline BinaryFrame preprocess(const GrayFrame& frame, const PreprocessParams& p = {}) {
    return remove_large_blobs(adaptive_threshold(frame, p.window, p.offset), p.max_area);
}

// ---- PGM (P5) ----

inline void write_pgm(const std::string& path, const GrayFrame& frame) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "P5\n" << frame.width << ' ' << frame.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(frame.data.data()), static_cast<std::streamsize>(frame.data.size()));
    if (!out) throw IoError("write failed: " + path);
}

inline GrayFrame read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    auto next_token = [&]() {
        std::string tok;
        char c;
        while (in.get(c)) {
            if (c == '#') {
                std::string skip;
                std::getline(in, skip);
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!tok.empty()) break;
                continue;
            }
            tok.push_back(c);
        }
        return tok;
    };
    if (next_token() != "P5") throw FormatError(path + ": not a binary PGM", 0);
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_token());
        h = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::exception&) {
        throw FormatError(path + ": bad PGM header", static_cast<std::uint64_t>(std::max<std::streamoff>(0, in.tellg())));
    }
    if (w <= 0 || h <= 0 || maxval != 255)
        throw FormatError(path + ": unsupported PGM (need 8-bit)", static_cast<std::uint64_t>(in.tellg()));
    GrayFrame frame(w, h);
    const auto start = static_cast<std::uint64_t>(in.tellg());
    in.read(reinterpret_cast<char*>(frame.data.data()), static_cast<std::streamsize>(frame.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(frame.data.size()))
        throw FormatError(path + ": truncated pixel data", start + static_cast<std::uint64_t>(in.gcount()));
    return frame;
}

} // namespace tactip
