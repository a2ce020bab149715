#include <gtest/gtest.h>

#include <random>

#include "tactip/contact.hpp"
#include "tactip/simulator.hpp"

using namespace tactip;

namespace {

GrayFrame quadrant_frame(std::uint8_t level) {
    GrayFrame f(4, 4, 0);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) f.at(x, y) = level;
    return f;
}

GrayFrame random_frame(std::mt19937_64& rng, int w, int h) {
    std::uniform_int_distribution<int> v(0, 255);
    GrayFrame f(w, h);
    for (auto& p : f.data) p = static_cast<std::uint8_t>(v(rng));
    return f;
}

} // namespace

TEST(ForceGrid, HandComputedQuadrantExample) {
    // raw = 40 in the lit cell, global = 160/16 = 10, gamma 0.
    ForceGrid g(GrayFrame(4, 4, 0), 2, 0.0);
    g.update(quadrant_frame(40));
    EXPECT_NEAR(g.activation(0, 0), 30.0, 1e-12);
    EXPECT_NEAR(g.activation(0, 1), 0.0, 1e-12);
    EXPECT_NEAR(g.activation(1, 0), 0.0, 1e-12);
    EXPECT_NEAR(g.activation(1, 1), 0.0, 1e-12);
    const ContactReading r = contact_detected(g, 10.0);
    EXPECT_TRUE(r.contact);
    EXPECT_NEAR(r.total_activation, 30.0, 1e-12);
}

TEST(ForceGrid, FreshGridReportsNoContact) {
    const ForceGrid g(8, 8, 2, 1.0);
    const ContactReading r = contact_detected(g, 0.0);
    EXPECT_FALSE(r.contact);
    EXPECT_EQ(r.total_activation, 0.0);
}

TEST(ForceGrid, IdenticalFramesDecayByGamma) {
    ForceGrid g(GrayFrame(4, 4, 0), 2, 5.0);
    g.update(quadrant_frame(40));  // 40 - 10 - 5 = 25
    EXPECT_NEAR(g.activation(0, 0), 25.0, 1e-12);
    for (double expect : {20.0, 15.0, 10.0, 5.0, 0.0, 0.0}) {
        g.update(quadrant_frame(40));
        EXPECT_NEAR(g.activation(0, 0), expect, 1e-12);
    }
}

TEST(ForceGrid, CellsTileTheFrameWithRemainderInLastCell) {
    const ForceGrid g(13, 11, 5, 1.0);
    std::vector<int> covered(13 * 11, 0);
    for (const CellBounds& c : g.cells())
        for (int y = c.y0; y < c.y1; ++y)
            for (int x = c.x0; x < c.x1; ++x) ++covered[static_cast<std::size_t>(y) * 13 + x];
    for (int n : covered) EXPECT_EQ(n, 1);
    EXPECT_EQ(g.cells().back().x1 - g.cells().back().x0, 2 + 13 % 5);
}

TEST(ForceGrid, RejectsMismatchedFrames) {
    ForceGrid g(GrayFrame(8, 8, 0), 2, 1.0);
    EXPECT_THROW(g.update(GrayFrame(8, 9, 0)), ParameterError);
    EXPECT_THROW(ForceGrid(8, 8, 9, 1.0), ParameterError);
    EXPECT_THROW(ForceGrid(8, 8, 2, -1.0), ParameterError);
    EXPECT_THROW(contact_detected(g, -1.0), ParameterError);
}

TEST(ForceGrid, NonNegativeAndQuiescentOnRandomStreams) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        ForceGrid g(random_frame(rng, 16, 12), 4, 2.0);
        for (int t = 0; t < 30; ++t) {
            g.update(random_frame(rng, 16, 12));
            for (double a : g.activation()) EXPECT_GE(a, 0.0);
        }
        // A constant stream drains every cell to exactly zero.
        const GrayFrame still = random_frame(rng, 16, 12);
        g.update(still);
        const double peak = *std::max_element(g.activation().begin(), g.activation().end());
        const int steps = static_cast<int>(std::ceil(peak / 2.0)) + 2;
        for (int t = 0; t < steps; ++t) g.update(still);
        EXPECT_EQ(g.total(), 0.0);
    }
}

TEST(ForceGrid, LocalChangeNeverRaisesOtherCells) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const GrayFrame base = random_frame(rng, 12, 12);
        ForceGrid g(base, 3, 0.5);
        GrayFrame warm = random_frame(rng, 12, 12);
        g.update(warm);
        const std::vector<double> before = g.activation();
        GrayFrame next = warm;
        for (int y = 4; y < 8; ++y)
            for (int x = 0; x < 4; ++x) next.at(x, y) = static_cast<std::uint8_t>(255 - next.at(x, y));
        g.update(next);
        for (int c = 0; c < 9; ++c)
            if (c != 3) { EXPECT_LE(g.activation()[static_cast<std::size_t>(c)], before[static_cast<std::size_t>(c)]); }
    }
}

TEST(ForceGrid, ShiftingStimulusByOneCellShiftsActivation) {
    auto run = [](int cell_x) {
        ForceGrid g(GrayFrame(12, 12, 50), 3, 1.0);
        GrayFrame f(12, 12, 50);
        for (int y = 4; y < 8; ++y)
            for (int x = cell_x * 4; x < cell_x * 4 + 4; ++x) f.at(x, y) = 200;
        g.update(f);
        return g.activation();
    };
    const auto a = run(0), b = run(1);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 2; ++c) EXPECT_DOUBLE_EQ(a[static_cast<std::size_t>(r * 3 + c)], b[static_cast<std::size_t>(r * 3 + c + 1)]);
}

TEST(ContactTrack, FollowsSimulatedPressAndFades) {
    StimulusScript s = parse_script("surface=hard\nidle 5\npress 0.8 10\nrelease 30\n");
    SensorConfig cfg;
    const Recording rec = generate_dataset(s, cfg, 4);
    const ContactParams p;
    const auto readings = contact_track(std::span<const GrayFrame>(rec.container.frames), p);
    ASSERT_EQ(readings.size(), 45u);
    for (int i = 0; i < 5; ++i) EXPECT_FALSE(readings[static_cast<std::size_t>(i)].contact) << i;
    int pressed_hits = 0;
    for (int i = 5; i < 15; ++i) pressed_hits += readings[static_cast<std::size_t>(i)].contact;
    EXPECT_GE(pressed_hits, 5);
    // Each cell loses gamma per frame once the markers settle (about ten
    // frames of relaxation after release), so the busiest cell bounds the fade.
    ForceGrid g(rec.container.frames.front(), p.grid_size, p.gamma);
    double peak = 0.0;
    for (const GrayFrame& f : rec.container.frames) {
        g.update(f);
        peak = std::max(peak, *std::max_element(g.activation().begin(), g.activation().end()));
    }
    const int quiet = 15 + 10 + static_cast<int>(std::ceil(peak / p.gamma));
    ASSERT_LT(quiet, 45);
    for (int i = quiet; i < 45; ++i) EXPECT_FALSE(readings[static_cast<std::size_t>(i)].contact) << i;
}

TEST(ContactTrack, IdenticalRendersStayQuiet) {
    SensorConfig cfg;
    cfg.pixel_noise = 0.0;
    std::mt19937_64 rng(1);
    const auto rest = rest_layout(cfg);
    const GrayFrame f = Simulator::render_markers(rest, cfg, rng);
    ForceGrid g(f, 5, 3.0);
    g.update(Simulator::render_markers(rest, cfg, rng));
    EXPECT_EQ(g.total(), 0.0);
}
