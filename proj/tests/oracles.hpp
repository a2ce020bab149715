#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <vector>

#include "tactip/nn.hpp"
#include "tactip/tracking.hpp"

namespace oracle {

using tactip::MarkerSet;
using tactip::Point;

inline double dist(Point a, Point b) { return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y)); }

struct GreedyPick {
    std::size_t origin, current;
    double distance;
};

/// Every sequence a greedy matcher could follow when ties are broken
/// arbitrarily; returns the set of achievable total distances.
inline void enumerate_greedy(const MarkerSet& o, const MarkerSet& c, double max_dist, std::vector<char>& ou,
                             std::vector<char>& cu, double total, std::set<double>& totals) {
    double best = INFINITY;
    for (std::size_t i = 0; i < o.count(); ++i)
        for (std::size_t j = 0; j < c.count(); ++j)
            if (!ou[i] && !cu[j]) best = std::min(best, dist(o[i], c[j]));
    if (!(best <= max_dist)) {
        totals.insert(total);
        return;
    }
    for (std::size_t i = 0; i < o.count(); ++i)
        for (std::size_t j = 0; j < c.count(); ++j)
            if (!ou[i] && !cu[j] && dist(o[i], c[j]) == best) {
                ou[i] = cu[j] = 1;
                enumerate_greedy(o, c, max_dist, ou, cu, total + best, totals);
                ou[i] = cu[j] = 0;
            }
}

inline std::set<double> greedy_totals(const MarkerSet& o, const MarkerSet& c, double max_dist) {
    std::vector<char> ou(o.count(), 0), cu(c.count(), 0);
    std::set<double> totals;
    enumerate_greedy(o, c, max_dist, ou, cu, 0.0, totals);
    return totals;
}

/// The greedy sequence with ties going to the lowest (origin, current),
/// found by rescanning every remaining pair at each step.
inline std::vector<GreedyPick> greedy_lexicographic(const MarkerSet& o, const MarkerSet& c, double max_dist) {
    std::vector<char> ou(o.count(), 0), cu(c.count(), 0);
    std::vector<GreedyPick> picks;
    for (;;) {
        GreedyPick best{0, 0, INFINITY};
        for (std::size_t i = 0; i < o.count(); ++i)
            for (std::size_t j = 0; j < c.count(); ++j) {
                if (ou[i] || cu[j]) continue;
                const double d = dist(o[i], c[j]);
                if (d < best.distance) best = {i, j, d};
            }
        if (!(best.distance <= max_dist)) return picks;
        ou[best.origin] = cu[best.current] = 1;
        picks.push_back(best);
    }
}

inline MarkerSet random_points(std::mt19937_64& rng, std::size_t n, int grid) {
    std::uniform_int_distribution<int> u(0, grid);
    MarkerSet m;
    for (std::size_t i = 0; i < n; ++i) m.points.push_back({static_cast<double>(u(rng)), static_cast<double>(u(rng))});
    return m;
}

// ---- Finite differences ----

inline double relative_error(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-6});
    return std::abs(a - b) / scale;
}

struct GradCheck {
    double worst_param = 0.0;
    double worst_input = 0.0;
    std::size_t checked = 0;
};

/// Compare analytic gradients of mean softmax cross-entropy with central
/// differences, for every parameter and every input entry. Each forward pass
/// reseeds the generator so dropout masks are identical across evaluations.
inline GradCheck check_network_gradients(tactip::nn::Network& net, const Eigen::MatrixXd& x,
                                         const std::vector<int>& labels, bool training, double eps = 1e-5) {
    using tactip::nn::Matrix;
    auto loss_of = [&](const Matrix& in, Matrix* grad) {
        std::mt19937_64 rng(1234);
        const Matrix logits = net.forward(in, training, rng);
        return tactip::nn::softmax_cross_entropy(logits, labels, grad);
    };
    Matrix g;
    loss_of(x, &g);
    // Capture the input gradient by walking the layers backward by hand.
    Matrix gin = g;
    for (std::size_t i = net.size(); i-- > 0;) gin = net.layer(i).backward(gin);

    GradCheck out;
    for (tactip::nn::Param p : net.params()) {
        const Matrix analytic = *p.grad;
        for (Eigen::Index k = 0; k < p.value->size(); ++k) {
            const double keep = p.value->data()[k];
            p.value->data()[k] = keep + eps;
            const double up = loss_of(x, nullptr);
            p.value->data()[k] = keep - eps;
            const double down = loss_of(x, nullptr);
            p.value->data()[k] = keep;
            out.worst_param = std::max(out.worst_param, relative_error(analytic.data()[k], (up - down) / (2 * eps)));
            ++out.checked;
        }
    }
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        Matrix xp = x, xm = x;
        xp.data()[k] += eps;
        xm.data()[k] -= eps;
        const double numeric = (loss_of(xp, nullptr) - loss_of(xm, nullptr)) / (2 * eps);
        out.worst_input = std::max(out.worst_input, relative_error(gin.data()[k], numeric));
        ++out.checked;
    }
    return out;
}

} // namespace oracle
