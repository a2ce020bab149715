#pragma once

// Receptive-field contact grid. Each cell accumulates the mean absolute
// frame difference over its pixels, minus the whole-frame mean difference,
// minus a per-update decay, clamped at zero.

#include <cmath>
#include <cstdlib>
#include <optional>
#include <vector>

#include "tactip/imagery.hpp"

namespace tactip {

struct CellBounds {
    int x0, x1;  // [x0, x1)
    int y0, y1;

    int pixel_count() const { return (x1 - x0) * (y1 - y0); }
};

/// Tile [0, extent) into `cells` ranges of floor(extent / cells); the last
/// range absorbs the remainder.
inline std::vector<std::pair<int, int>> tile_axis(int extent, int cells) {
    std::vector<std::pair<int, int>> out;
    const int step = extent / cells;
    for (int c = 0; c < cells; ++c) out.emplace_back(c * step, c + 1 == cells ? extent : (c + 1) * step);
    return out;
}

struct ContactParams {
    int grid_size = 5;
    // A full press peaks near 28 in its busiest cell on 128x128 simulator
    // frames; 3 per update clears that in about ten frames.
    double gamma = 3.0;
    double threshold = 10.0;
};

class ForceGrid {
public:
    ForceGrid(int width, int height, int grid_size = 5, double gamma = 3.0)
        : width_(width), height_(height), grid_(grid_size), gamma_(gamma) {
        if (grid_size < 1 || grid_size > std::min(width, height))
            throw ParameterError("ForceGrid: grid size must be in [1, min(width, height)]");
        if (gamma < 0.0) throw ParameterError("ForceGrid: gamma must be >= 0");
        (void)GrayFrame::checked_size(width, height);
        const auto xs = tile_axis(width, grid_size);
        const auto ys = tile_axis(height, grid_size);
        for (const auto& [y0, y1] : ys)
            for (const auto& [x0, x1] : xs) cells_.push_back({x0, x1, y0, y1});
        activation_.assign(cells_.size(), 0.0);
    }

    /// Start from an explicit comparison frame instead of waiting for the first update.
    ForceGrid(const GrayFrame& first, int grid_size = 5, double gamma = 3.0)
        : ForceGrid(first.width, first.height, grid_size, gamma) {
        prev_ = first;
    }

    /// Feed the next frame. The very first frame only seeds the comparison
    /// frame and leaves activations untouched.
    const ForceGrid& update(const GrayFrame& frame) {
        if (frame.width != width_ || frame.height != height_)
            throw ParameterError("ForceGrid::update: frame is " + std::to_string(frame.width) + "x" +
                                 std::to_string(frame.height) + ", grid expects " + std::to_string(width_) + "x" +
                                 std::to_string(height_));
        if (!prev_) {
            prev_ = frame;
            return *this;
        }
        std::vector<double> diff(frame.data.size());
        double total = 0.0;
        for (std::size_t i = 0; i < diff.size(); ++i) {
            diff[i] = std::abs(static_cast<double>(frame.data[i]) - static_cast<double>(prev_->data[i]));
            total += diff[i];
        }
        const double global = total / static_cast<double>(diff.size());
        for (std::size_t c = 0; c < cells_.size(); ++c) {
            const CellBounds& b = cells_[c];
            double sum = 0.0;
            for (int y = b.y0; y < b.y1; ++y)
                for (int x = b.x0; x < b.x1; ++x) sum += diff[static_cast<std::size_t>(y) * width_ + x];
            const double raw = sum / b.pixel_count();
            activation_[c] = std::max(0.0, activation_[c] + raw - global - gamma_);
        }
        prev_ = frame;
        return *this;
    }

    int grid_size() const { return grid_; }
    double gamma() const { return gamma_; }
    const std::vector<CellBounds>& cells() const { return cells_; }
    /// Row-major g×g activations.
    const std::vector<double>& activation() const { return activation_; }
    double activation(int row, int col) const { return activation_[static_cast<std::size_t>(row) * grid_ + col]; }

    double total() const {
        double s = 0.0;
        for (double a : activation_) s += a;
        return s;
    }

private:
    int width_;
    int height_;
    int grid_;
    double gamma_;
    std::vector<CellBounds> cells_;
    std::vector<double> activation_;
    std::optional<GrayFrame> prev_;
};

struct ContactReading {
    bool contact = false;
    double total_activation = 0.0;
};

inline ContactReading contact_detected(const ForceGrid& grid, double threshold) {
    if (threshold < 0.0) throw ParameterError("contact_detected: threshold must be >= 0");
    const double total = grid.total();
    return {total > threshold, total};
}

/// Run a fresh grid over a frame sequence and report one reading per frame.
inline std::vector<ContactReading> contact_track(std::span<const GrayFrame> frames, const ContactParams& p = {}) {
    std::vector<ContactReading> out;
    if (frames.empty()) return out;
    ForceGrid grid(frames.front().width, frames.front().height, p.grid_size, p.gamma);
    out.reserve(frames.size());
    for (const GrayFrame& f : frames) out.push_back(contact_detected(grid.update(f), p.threshold));
    return out;
}

} // namespace tactip
