#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "tactip/experiments.hpp"

using namespace tactip;

namespace {

MarkerSet pts(std::initializer_list<Point> p) { return MarkerSet{std::vector<Point>(p)}; }

} // namespace

TEST(Distance, Basics) {
    EXPECT_EQ(euclidean_distance({0, 0}, {0, 0}), 0.0);
    EXPECT_EQ(euclidean_distance({0, 0}, {3, 4}), 5.0);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-50, 50);
    for (int i = 0; i < 100; ++i) {
        const Point a{u(rng), u(rng)}, b{u(rng), u(rng)};
        EXPECT_EQ(euclidean_distance(a, b), euclidean_distance(b, a));
    }
}

TEST(MatchPoints, UnambiguousPairs) {
    const Assignment a = match_points(pts({{0, 0}, {10, 0}}), pts({{1, 0}, {9, 0}}), 5.0);
    ASSERT_EQ(a.pairs.size(), 2u);
    EXPECT_EQ(a.pairs[0].origin, 0u);
    EXPECT_EQ(a.pairs[0].current, 0u);
    EXPECT_EQ(a.pairs[1].origin, 1u);
    EXPECT_EQ(a.pairs[1].current, 1u);
    EXPECT_EQ(a.total_distance(), 2.0);
    const VectorField f = vector_field(pts({{0, 0}, {10, 0}}), pts({{1, 0}, {9, 0}}), a);
    EXPECT_EQ(f.vectors[0].delta(), (Point{1, 0}));
    EXPECT_EQ(f.vectors[1].delta(), (Point{-1, 0}));
}

TEST(MatchPoints, IdenticalSetsGiveIdentity) {
    const MarkerSet s = pts({{1, 2}, {5, 5}, {9, 1}});
    const Assignment a = match_points(s, s, 1.0);
    ASSERT_EQ(a.pairs.size(), 3u);
    for (const MatchPair& p : a.pairs) {
        EXPECT_EQ(p.origin, p.current);
        EXPECT_EQ(p.distance, 0.0);
    }
    for (const auto& v : vector_field(s, s, a).vectors) EXPECT_EQ(v.delta(), (Point{0, 0}));
}

TEST(MatchPoints, EmptySetsAndBadCutoff) {
    const Assignment a = match_points(MarkerSet{}, pts({{1, 1}}), 3.0);
    EXPECT_TRUE(a.pairs.empty());
    EXPECT_EQ(a.unmatched_currents.size(), 1u);
    EXPECT_THROW(match_points(MarkerSet{}, MarkerSet{}, 0.0), ParameterError);
}

TEST(MatchPoints, AgreesWithBruteForceGreedyOracle) {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::size_t> n(0, 6);
    std::uniform_real_distribution<double> cut(1.0, 8.0);
    for (int k = 0; k < 300; ++k) {
        // Integer coordinates on a small grid make distance ties common.
        const MarkerSet o = oracle::random_points(rng, n(rng), 6);
        const MarkerSet c = oracle::random_points(rng, n(rng), 6);
        const double md = cut(rng);
        const Assignment a = match_points(o, c, md);
        const auto lex = oracle::greedy_lexicographic(o, c, md);
        ASSERT_EQ(a.pairs.size(), lex.size());
        for (std::size_t i = 0; i < lex.size(); ++i) {
            EXPECT_EQ(a.pairs[i].origin, lex[i].origin);
            EXPECT_EQ(a.pairs[i].current, lex[i].current);
        }
        EXPECT_TRUE(oracle::greedy_totals(o, c, md).count(a.total_distance()));
    }
}

TEST(MatchPoints, PartialInjectionAndCutoffMonotone) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0, 20);
    for (int k = 0; k < 200; ++k) {
        MarkerSet o, c;
        for (int i = 0; i < 8; ++i) o.points.push_back({u(rng), u(rng)});
        for (int i = 0; i < 7; ++i) c.points.push_back({u(rng), u(rng)});
        const Assignment big = match_points(o, c, 6.0);
        std::set<std::size_t> so, sc;
        for (const auto& p : big.pairs) {
            EXPECT_TRUE(so.insert(p.origin).second);
            EXPECT_TRUE(sc.insert(p.current).second);
            EXPECT_LE(p.distance, 6.0);
        }
        EXPECT_EQ(so.size() + big.unmatched_origins.size(), o.count());
        EXPECT_EQ(sc.size() + big.unmatched_currents.size(), c.count());
        // Greedy picks in increasing distance, so a tighter cut-off keeps a prefix.
        EXPECT_LE(match_points(o, c, 3.0).total_distance(), big.total_distance());
    }
}

TEST(MatchPoints, TranslationAddsToEveryDisplacement) {
    const auto rest = rest_layout(SensorConfig{});
    MarkerSet o{rest}, c;
    for (const Point& p : rest) c.points.push_back(p + Point{1.25, -0.5});
    const VectorField f = vector_field(o, c, match_points(o, c, 4.25));
    ASSERT_EQ(f.count(), rest.size());
    for (const auto& v : f.vectors) {
        EXPECT_NEAR(v.delta().x, 1.25, 1e-12);
        EXPECT_NEAR(v.delta().y, -0.5, 1e-12);
    }
}

TEST(AverageVector, ConstantAndLinear) {
    VectorField f;
    for (int i = 0; i < 5; ++i) f.vectors.push_back({{double(i), 0}, {double(i) + 2, 0}});
    EXPECT_EQ(average_vector(f), (Point{2, 0}));
    VectorField g;
    for (const auto& v : f.vectors) g.vectors.push_back({v.origin, v.origin + 3.0 * v.delta()});
    EXPECT_EQ(average_vector(g), (Point{6, 0}));
    EXPECT_THROW(average_vector(VectorField{}), DataError);
}

TEST(AverageVector, RadialFieldAveragesNearZero) {
    const SensorConfig cfg;
    const auto rest = rest_layout(cfg);
    VectorField f;
    double per = 0.0;
    for (const Point& p : rest) {
        const Point q = p - cfg.center();
        const double r = norm(q);
        const Point d = r > 0 ? (2.0 / r) * q : Point{};
        f.vectors.push_back({p, p + d});
        per += norm(d);
    }
    per /= static_cast<double>(rest.size());
    EXPECT_LT(norm(average_vector(f)), 0.05 * per);
}

TEST(Pipeline, ShearDirectionAgreesWithinFifteenDegrees) {
    const SurfaceSpec hard = SurfaceSpec::preset(SurfaceKind::hard);
    for (double angle : {0.0, 0.9, 2.0, 3.5, 5.0}) {
        const Point dir{std::cos(angle), std::sin(angle)};
        const Point avg = trial_average_vector(shear_script(hard, dir, 1.5), SensorConfig{}, 5, 4.25);
        const double cosine = (avg.x * dir.x + avg.y * dir.y) / norm(avg);
        EXPECT_GT(cosine, std::cos(15.0 * std::numbers::pi / 180.0)) << angle;
    }
}

TEST(MarkerModel, SingleSampleInterpolates) {
    SensorConfig cfg;
    cfg.pixel_noise = 0.0;
    std::mt19937_64 rng(0);
    const auto rest = rest_layout(cfg);
    const LabelledFrame s{preprocess(Simulator::render_markers(rest, cfg, rng)), rest};
    AugmentSpec none;
    none.copies = 0;
    const std::vector<LabelledFrame> twice = {s, s};
    const RidgeMarkerModel m = train_marker_model(twice, 1e-9, none);
    const MarkerSet p = predict_markers(m, s.frame);
    ASSERT_EQ(p.count(), 133u);
    for (std::size_t i = 0; i < rest.size(); ++i) EXPECT_NEAR(norm(p[i] - rest[i]), 0.0, 1e-4);
}

TEST(MarkerModel, RejectsWrongLabelCounts) {
    LabelledFrame s{BinaryFrame(64, 64), std::vector<Point>(10)};
    EXPECT_THROW(train_marker_model(std::vector<LabelledFrame>{s}), DataError);
    EXPECT_THROW(train_marker_model(std::vector<LabelledFrame>{}), DataError);
}

TEST(MarkerModel, AugmentationMovesLabelsWithPixels) {
    SensorConfig cfg;
    cfg.pixel_noise = 0.0;
    std::mt19937_64 rng(0);
    const std::vector<Point> one = {{60.0, 50.0}};
    const LabelledFrame s{preprocess(Simulator::render_markers(one, cfg, rng)), one};
    for (const LabelledFrame& a : {translate(s, 3, -2), zoom(s, 1.08)}) {
        const MarkerSet c = extract_centroids(a.frame, 1);
        ASSERT_EQ(c.count(), 1u);
        EXPECT_NEAR(c[0].x, a.markers[0].x, 0.6);
        EXPECT_NEAR(c[0].y, a.markers[0].y, 0.6);
    }
}

class TrainedMarkerModel : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        const auto trials = press_trials(50, 91);
        model_ = new RidgeMarkerModel(train_marker_model(marker_training_frames(trials), 150.0, rig_augmentation(1)));
    }
    static void TearDownTestSuite() { delete model_; }
    static RidgeMarkerModel* model_;
};
RidgeMarkerModel* TrainedMarkerModel::model_ = nullptr;

TEST_F(TrainedMarkerModel, HeldOutErrorUnderTwoPixels) {
    const auto held = press_trials(20, 92);
    double err = 0.0;
    std::size_t n = 0;
    for (const PressTrial& t : held) {
        const LabelledFrame shifted = translate({preprocess(t.current), t.truth.markers}, 1, -1);
        const MarkerSet p = predict_markers(*model_, shifted.frame);
        for (std::size_t i = 0; i < p.count(); ++i, ++n) err += norm(p[i] - shifted.markers[i]);
    }
    EXPECT_LT(err / static_cast<double>(n), 2.0);
}

TEST_F(TrainedMarkerModel, RestFrameNearLayoutAndGlareKeepsCount) {
    SensorConfig cfg;
    std::mt19937_64 rng(4);
    const auto rest = rest_layout(cfg);
    const MarkerSet p = predict_markers(*model_, preprocess(Simulator::render_markers(rest, cfg, rng)));
    for (std::size_t i = 0; i < rest.size(); ++i) EXPECT_LT(norm(p[i] - rest[i]), 2.0);

    cfg.glare = Glare{};
    const GrayFrame glare = Simulator::render_markers(rest, cfg, rng);
    EXPECT_EQ(predict_markers(*model_, preprocess(glare)).count(), 133u);
    // Without blob removal the glare merges with nearby markers and the raw count drops.
    EXPECT_NE(extract_centroids(adaptive_threshold(glare, 15, 20.0), 4).count(), 133u);
}

TEST_F(TrainedMarkerModel, SaveLoadRoundTrip) {
    const auto path = (std::filesystem::temp_directory_path() / "tactip_markers.tacr").string();
    save_marker_model(*model_, path);
    const RidgeMarkerModel m = load_marker_model(path);
    EXPECT_EQ(m.alpha, model_->alpha);
    EXPECT_EQ(m.weights, model_->weights);
    EXPECT_EQ(m.bias, model_->bias);
    std::filesystem::remove(path);
}

TEST(MarkerLabels, RoundTripAndErrors) {
    const auto path = (std::filesystem::temp_directory_path() / "tactip_labels.txt").string();
    MarkerLabels l;
    l.frame_indices = {0, 3};
    l.markers = {std::vector<Point>(133, {1.5, 2.25}), std::vector<Point>(133, {3, 4})};
    save_marker_labels(l, path);
    const MarkerLabels r = load_marker_labels(path);
    EXPECT_EQ(r.frame_indices, l.frame_indices);
    EXPECT_EQ(r.markers, l.markers);
    {
        std::ofstream out(path);
        out << "0 1 2 3\n";
    }
    EXPECT_THROW(load_marker_labels(path), DataError);
    std::filesystem::remove(path);
}
