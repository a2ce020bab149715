#pragma once

// Scripted simulator experiments shared by the CLI and the acceptance suite:
// direction clusters, slip attenuation, pressure regression, depth sweeps and
// the surface classification tasks.

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "tactip/classify.hpp"
#include "tactip/contact.hpp"
#include "tactip/datasets.hpp"
#include "tactip/pressure.hpp"
#include "tactip/simulator.hpp"
#include "tactip/tracking.hpp"

namespace tactip {

// ---- Worker pool ----

/// Worker count: hardware concurrency capped by TACTIP_LAB_THREADS.
inline unsigned worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("TACTIP_LAB_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
    }
    return n;
}

/// Run fn(i) for i in [0, n). Results must be written to per-index slots so
/// the outcome does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_lock;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_lock);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Independent per-trial seed derived from a run seed.
inline std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index)};
    std::uint32_t parts[2];
    seq.generate(parts, parts + 2);
    return (static_cast<std::uint64_t>(parts[0]) << 32) | parts[1];
}

// ---- Vector pipeline helpers ----

/// Centroid tracking against a fixed origin frame.
inline VectorField track_field(const GrayFrame& origin, const GrayFrame& current, double max_dist,
                               const PreprocessParams& pp = {}) {
    const MarkerSet o = extract_centroids(preprocess(origin, pp), static_cast<std::size_t>(pp.min_area));
    const MarkerSet c = extract_centroids(preprocess(current, pp), static_cast<std::size_t>(pp.min_area));
    return vector_field(o, c, match_points(o, c, max_dist));
}

// ---- Direction and slip (average vector) ----

struct DirectionTrial {
    std::string label;  // left, right or center
    Point average;
};

inline StimulusScript shear_script(SurfaceSpec surface, Point direction, double speed, double depth = 0.5,
                                   int frames = 15) {
    StimulusScript s;
    s.surface = std::move(surface);
    s.steps.push_back({2, Idle{}});
    s.steps.push_back({5, Press{depth}});
    if (speed > 0.0)
        s.steps.push_back({frames, Shear{direction, speed}});
    else
        s.steps.push_back({frames, Press{depth}});
    return s;
}

/// Average vector at the last frame of one scripted trial, tracked from the first frame.
inline Point trial_average_vector(const StimulusScript& script, const SensorConfig& cfg, std::uint64_t seed,
                                  double max_dist) {
    const Recording rec = generate_dataset(script, cfg, seed);
    return average_vector(track_field(rec.container.frames.front(), rec.container.frames.back(), max_dist));
}

inline std::vector<DirectionTrial> direction_experiment(int trials, std::uint64_t seed, const SensorConfig& cfg = {},
                                                        double max_dist = 4.25, double speed = 1.5) {
    const SurfaceSpec hard = SurfaceSpec::preset(SurfaceKind::hard);
    const std::vector<std::pair<std::string, StimulusScript>> kinds = {
        {"left", shear_script(hard, {-1.0, 0.0}, speed)},
        {"right", shear_script(hard, {1.0, 0.0}, speed)},
        {"center", shear_script(hard, {1.0, 0.0}, 0.0)},
    };
    std::vector<DirectionTrial> out(kinds.size() * static_cast<std::size_t>(trials));
    parallel_for(out.size(), [&](std::size_t i) {
        const auto& [label, script] = kinds[i % kinds.size()];
        out[i] = {label, trial_average_vector(script, cfg, trial_seed(seed, 1, i), max_dist)};
    });
    return out;
}

struct SlipResult {
    std::vector<double> hard;      // per-trial average-vector magnitudes
    std::vector<double> slippery;

    static double mean(const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    }
    double ratio() const { return mean(slippery) / mean(hard); }
};

/// Identical shear scripts on hard and slippery surfaces.
inline SlipResult slip_experiment(int trials, std::uint64_t seed, const SensorConfig& cfg = {}, double max_dist = 4.25,
                                  double speed = 1.5) {
    SlipResult r;
    r.hard.resize(static_cast<std::size_t>(trials));
    r.slippery.resize(static_cast<std::size_t>(trials));
    const StimulusScript on_hard = shear_script(SurfaceSpec::preset(SurfaceKind::hard), {1.0, 0.0}, speed);
    const StimulusScript on_wet = shear_script(SurfaceSpec::preset(SurfaceKind::slippery), {1.0, 0.0}, speed);
    parallel_for(2 * static_cast<std::size_t>(trials), [&](std::size_t i) {
        const std::size_t k = i / 2;
        const std::uint64_t s = trial_seed(seed, 2, k);
        if (i % 2 == 0)
            r.hard[k] = norm(trial_average_vector(on_hard, cfg, s, max_dist));
        else
            r.slippery[k] = norm(trial_average_vector(on_wet, cfg, s, max_dist));
    });
    return r;
}

// ---- Pressure ----

/// One press trial: the idle origin frame, the final frame and its truth.
struct PressTrial {
    GrayFrame origin;
    GrayFrame current;
    FrameTruth truth;
    Compliance surface = Compliance::hard;
};

struct PressProtocol {
    int press_frames = 10;
    int shear_frames = 8;
    double shear_max = 1.5;  // nuisance shear speed drawn uniformly in [0, shear_max]
};

/// Press to `depth`, then slide in a random direction at a random speed so
/// the displacement field is not a pure function of depth.
inline PressTrial press_trial(Compliance surface, double depth, std::uint64_t seed, const SensorConfig& cfg = {},
                              const PressProtocol& proto = {}) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double angle = 2.0 * std::numbers::pi * unit(rng);
    const double speed = proto.shear_max * unit(rng);
    Simulator sim(cfg, SurfaceSpec::preset(surface == Compliance::hard ? SurfaceKind::hard : SurfaceKind::soft), rng());
    PressTrial t;
    t.surface = surface;
    FrameTruth truth = sim.step(Idle{});
    t.origin = sim.render(truth.markers, 0);
    for (int i = 0; i < proto.press_frames; ++i) truth = sim.step(Press{depth});
    for (int i = 0; i < proto.shear_frames; ++i) truth = sim.step(Shear{{std::cos(angle), std::sin(angle)}, speed});
    t.current = sim.render(truth.markers, 1);
    t.truth = std::move(truth);
    return t;
}

/// Uniform-depth hard-surface press trials.
inline std::vector<PressTrial> press_trials(int count, std::uint64_t seed, const SensorConfig& cfg = {},
                                            const PressProtocol& proto = {}) {
    std::vector<PressTrial> out(static_cast<std::size_t>(count));
    parallel_for(out.size(), [&](std::size_t i) {
        const std::uint64_t s = trial_seed(seed, 3, i);
        std::mt19937_64 rng(s);
        const double depth = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        out[i] = press_trial(Compliance::hard, depth, s + 1, cfg, proto);
    });
    return out;
}

/// Marker-model training frames from press trials (final frames, true markers).
inline std::vector<LabelledFrame> marker_training_frames(std::span<const PressTrial> trials,
                                                         const PreprocessParams& pp = {}) {
    std::vector<LabelledFrame> out;
    out.reserve(trials.size());
    for (const PressTrial& t : trials) out.push_back({preprocess(t.current, pp), t.truth.markers});
    return out;
}

/// Augmentation matched to a fixed rig: small shifts and zooms only.
inline AugmentSpec rig_augmentation(std::uint64_t seed = 0) {
    AugmentSpec a;
    a.copies = 1;
    a.max_shift = 2;
    a.zoom_min = 0.98;
    a.zoom_max = 1.02;
    a.seed = seed;
    return a;
}

/// Displacements between the marker model's predictions on the origin and current frames.
inline PressureSample pressure_sample(const RidgeMarkerModel& model, const PressTrial& t,
                                      const PreprocessParams& pp = {}) {
    const MarkerSet p0 = predict_markers(model, preprocess(t.origin, pp));
    const MarkerSet p1 = predict_markers(model, preprocess(t.current, pp));
    PressureSample s;
    s.displacements.reserve(2 * p0.count());
    for (std::size_t k = 0; k < p0.count(); ++k) {
        s.displacements.push_back(p1[k].x - p0[k].x);
        s.displacements.push_back(p1[k].y - p0[k].y);
    }
    s.pressure = t.truth.force;
    s.surface = t.surface;
    return s;
}

inline std::vector<PressureSample> pressure_samples(const RidgeMarkerModel& model, std::span<const PressTrial> trials,
                                                    const PreprocessParams& pp = {}) {
    std::vector<PressureSample> out(trials.size());
    parallel_for(out.size(), [&](std::size_t i) { out[i] = pressure_sample(model, trials[i], pp); });
    return out;
}

struct PressureEvaluation {
    double ridge_mae = 0.0;
    double monotone_mae = 0.0;  // best isotonic map of magnitude_sum, fitted on the training part
    std::vector<std::pair<double, double>> test_points;  // (truth, ridge prediction)
};

inline PressureEvaluation evaluate_pressure(std::span<const PressureSample> train, std::span<const PressureSample> test,
                                            double alpha = 150.0) {
    if (test.empty()) throw DataError("evaluate_pressure: empty test split");
    const RidgePressureModel model = train_pressure_model(train, alpha);
    std::vector<double> x, y;
    for (const PressureSample& s : train) {
        x.push_back(magnitude_sum(std::span<const double>(s.displacements)));
        y.push_back(s.pressure);
    }
    const MonotoneCalibration iso(x, y);
    PressureEvaluation ev;
    for (const PressureSample& s : test) {
        const double p = predict_pressure(model, std::span<const double>(s.displacements));
        ev.ridge_mae += std::abs(p - s.pressure);
        ev.monotone_mae += std::abs(iso(magnitude_sum(std::span<const double>(s.displacements))) - s.pressure);
        ev.test_points.emplace_back(s.pressure, p);
    }
    ev.ridge_mae /= static_cast<double>(test.size());
    ev.monotone_mae /= static_cast<double>(test.size());
    return ev;
}

inline const std::vector<double>& sweep_depths() {
    static const std::vector<double> depths = {0.0, 0.2, 0.4, 0.8, 1.0};
    return depths;
}

struct DepthSweepCell {
    Compliance surface = Compliance::hard;
    double depth = 0.0;
    std::vector<double> medians;  // per trial, median prediction over the hold frames

    double min() const { return *std::min_element(medians.begin(), medians.end()); }
    double max() const { return *std::max_element(medians.begin(), medians.end()); }
    double mean() const { return SlipResult::mean(medians); }
};

inline double median(std::vector<double> v) {
    if (v.empty()) throw DataError("median of empty set");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Press and hold at each depth, predicting pressure on every hold frame.
inline std::vector<DepthSweepCell> depth_sweep(const RidgeMarkerModel& markers, const RidgePressureModel& pressure,
                                               int trials, std::uint64_t seed, const SensorConfig& cfg = {},
                                               int hold_frames = 10, const PreprocessParams& pp = {}) {
    std::vector<DepthSweepCell> cells;
    for (Compliance c : {Compliance::hard, Compliance::soft})
        for (double d : sweep_depths()) cells.push_back({c, d, std::vector<double>(static_cast<std::size_t>(trials))});
    parallel_for(cells.size() * static_cast<std::size_t>(trials), [&](std::size_t i) {
        DepthSweepCell& cell = cells[i / static_cast<std::size_t>(trials)];
        const std::size_t k = i % static_cast<std::size_t>(trials);
        Simulator sim(cfg, SurfaceSpec::preset(cell.surface == Compliance::hard ? SurfaceKind::hard : SurfaceKind::soft),
                      trial_seed(seed, 4, i));
        const MarkerSet origin = predict_markers(markers, preprocess(sim.render(sim.step(Idle{}).markers), pp));
        for (int f = 0; f < 5; ++f) sim.step(Press{cell.depth});
        std::vector<double> preds;
        for (int f = 0; f < hold_frames; ++f) {
            const MarkerSet cur = predict_markers(markers, preprocess(sim.render(sim.step(Press{cell.depth}).markers), pp));
            std::vector<double> disp;
            for (std::size_t m = 0; m < origin.count(); ++m) {
                disp.push_back(cur[m].x - origin[m].x);
                disp.push_back(cur[m].y - origin[m].y);
            }
            preds.push_back(predict_pressure(pressure, std::span<const double>(disp)));
        }
        cell.medians[k] = median(std::move(preds));
    });
    return cells;
}

// ---- Classification tasks ----

enum class TaskKind { lego, concrete, four_state, temporal };

inline TaskKind parse_task(const std::string& s) {
    if (s == "lego") return TaskKind::lego;
    if (s == "concrete") return TaskKind::concrete;
    if (s == "four") return TaskKind::four_state;
    if (s == "temporal") return TaskKind::temporal;
    throw ParameterError("unknown task \"" + s + "\" (expected lego, concrete, four or temporal)");
}

inline std::string to_string(TaskKind t) {
    switch (t) {
    case TaskKind::lego: return "lego";
    case TaskKind::concrete: return "concrete";
    case TaskKind::four_state: return "four";
    case TaskKind::temporal: return "temporal";
    }
    return "?";
}

/// Two whole-membrane vibrations with the same per-frame spread but
/// different frame-to-frame persistence: single frames carry no class signal.
inline std::pair<SurfaceSpec, SurfaceSpec> temporal_surfaces() {
    SurfaceSpec fast = SurfaceSpec::preset(SurfaceKind::concrete);
    fast.name = "jitter_fast";
    fast.texture = {0.8, 0.0, 0.0, true};
    SurfaceSpec slow = fast;
    slow.name = "jitter_slow";
    slow.texture.persistence = 0.95;
    return {fast, slow};
}

struct TaskSpec {
    TaskKind kind;
    std::vector<SurfaceSpec> surfaces;
    std::vector<std::string> classes;
};

inline TaskSpec task_spec(TaskKind kind) {
    TaskSpec t{kind, {}, {}};
    auto add = [&](SurfaceSpec s) {
        t.classes.push_back(s.name);
        t.surfaces.push_back(std::move(s));
    };
    switch (kind) {
    case TaskKind::lego:
        add(SurfaceSpec::preset(SurfaceKind::lego));
        add(SurfaceSpec::preset(SurfaceKind::smooth_wood));
        break;
    case TaskKind::concrete:
        add(SurfaceSpec::preset(SurfaceKind::concrete));
        add(SurfaceSpec::preset(SurfaceKind::smooth_wood));
        break;
    case TaskKind::four_state:
        add(SurfaceSpec::preset(SurfaceKind::soft));
        add(SurfaceSpec::preset(SurfaceKind::hard));
        add(SurfaceSpec::preset(SurfaceKind::slippery));
        t.classes.push_back("no_touch");
        break;
    case TaskKind::temporal: {
        auto [a, b] = temporal_surfaces();
        add(a);
        add(b);
        break;
    }
    }
    return t;
}

inline LabelVocabulary task_vocabulary(const TaskSpec& t) {
    LabelVocabulary v;
    for (const std::string& c : t.classes)
        if (!v.contains(c)) v.add(c);
    return v;
}

struct SlideProtocol {
    int idle_frames = 12;
    int press_frames = 4;
    int legs = 6;          // alternating slide directions
    int leg_frames = 6;
    int release_frames = 14;
    double depth_min = 0.5;
    double depth_max = 0.9;
    double speed = 1.0;
    bool randomise = true;  // false: mid-range depth and a fixed +x slide axis
};

/// Idle, press, zig-zag slide along a random axis, release.
inline StimulusScript slide_script(const SurfaceSpec& surface, std::uint64_t seed, const SlideProtocol& p = {}) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double depth = p.depth_min + (p.depth_max - p.depth_min) * (p.randomise ? unit(rng) : 0.5);
    const double angle = p.randomise ? 2.0 * std::numbers::pi * unit(rng) : 0.0;
    const Point dir{std::cos(angle), std::sin(angle)};
    StimulusScript s;
    s.surface = surface;
    s.steps.push_back({p.idle_frames, Idle{}});
    s.steps.push_back({p.press_frames, Press{depth}});
    for (int leg = 0; leg < p.legs; ++leg) s.steps.push_back({p.leg_frames, Shear{leg % 2 ? -1.0 * dir : dir, p.speed}});
    s.steps.push_back({p.release_frames, Release{}});
    return s;
}

/// `trials_per_surface` slide trials per surface, interleaved by surface.
inline Recording task_recording(const TaskSpec& task, int trials_per_surface, std::uint64_t seed,
                                const SensorConfig& cfg = {}, const SlideProtocol& proto = {},
                                const MembraneParams& membrane = {}) {
    const std::size_t n = task.surfaces.size() * static_cast<std::size_t>(trials_per_surface);
    std::vector<Recording> parts(n);
    parallel_for(n, [&](std::size_t i) {
        const SurfaceSpec& surface = task.surfaces[i % task.surfaces.size()];
        const std::uint64_t s = trial_seed(seed, 5, i);
        parts[i] = generate_dataset(slide_script(surface, s, proto), cfg, s + 1, 1, static_cast<std::int64_t>(i), membrane);
    });
    Recording all;
    for (Recording& r : parts) append_recording(all, std::move(r));
    return all;
}

enum class FeatureKind { image, vectors };

/// Per-frame classifier blocks plus contact flags, aligned with the manifest.
struct TaskFeatures {
    Manifest manifest;
    std::vector<bool> flags;
    std::vector<FrameBlock> blocks;
};

struct FeatureParams {
    FeatureKind kind = FeatureKind::image;
    int image_size = 32;     // binary frames are box-downsampled to image_size²
    double max_dist = 4.25;  // vector features: matching cut-off
    PreprocessParams preprocess;
    ContactParams contact;
    int debounce = 2;  // consecutive contact frames before a frame counts as touch
};

/// Contact flags from a fresh force grid per trial. With `debounce` > 1 a
/// frame is flagged only when it and the debounce-1 frames before it in the
/// same trial all report contact.
inline std::vector<bool> contact_flags(const Recording& rec, const ContactParams& cp = {}, int debounce = 1) {
    std::vector<bool> flags(rec.container.frames.size(), false);
    std::size_t start = 0;
    const auto& rows = rec.manifest.rows;
    for (std::size_t i = 0; i <= rows.size(); ++i) {
        if (i == rows.size() || (i > start && rows[i].trial_id != rows[start].trial_id)) {
            const auto readings = contact_track(
                std::span<const GrayFrame>(rec.container.frames).subspan(start, i - start), cp);
            int run = 0;
            for (std::size_t k = 0; k < readings.size(); ++k) {
                run = readings[k].contact ? run + 1 : 0;
                flags[start + k] = run >= std::max(1, debounce);
            }
            start = i;
        }
    }
    return flags;
}

inline TaskFeatures task_features(const Recording& rec, const FeatureParams& fp = {}) {
    TaskFeatures tf;
    tf.manifest = rec.manifest;
    tf.flags = contact_flags(rec, fp.contact, fp.debounce);
    const auto& rows = rec.manifest.rows;
    tf.blocks.resize(rows.size());
    std::vector<std::size_t> trial_start(rows.size(), 0);
    for (std::size_t i = 1; i < rows.size(); ++i)
        trial_start[i] = rows[i].trial_id == rows[i - 1].trial_id ? trial_start[i - 1] : i;
    std::vector<MarkerSet> centroids;
    if (fp.kind == FeatureKind::vectors) {
        centroids.resize(rows.size());
        parallel_for(rows.size(), [&](std::size_t i) {
            centroids[i] = extract_centroids(preprocess(rec.container.frames[i], fp.preprocess),
                                             static_cast<std::size_t>(fp.preprocess.min_area));
        });
    }
    parallel_for(rows.size(), [&](std::size_t i) {
        FrameBlock& b = tf.blocks[i];
        if (fp.kind == FeatureKind::image) {
            b.rows = b.cols = fp.image_size;
            b.data = downsample(preprocess(rec.container.frames[i], fp.preprocess), fp.image_size, fp.image_size);
        } else {
            b.rows = 1;
            b.cols = static_cast<int>(2 * kMarkerCount);
            b.data = layout_displacements(centroids[trial_start[i]], centroids[i], fp.max_dist);
        }
    });
    return tf;
}

struct TaskStacks {
    std::vector<TemporalStack> train;
    std::vector<TemporalStack> test;
};

/// Gate, split by trial and stack T frames ending at each candidate.
inline TaskStacks task_stacks(const TaskFeatures& tf, int T, std::uint64_t seed, const std::vector<std::string>& classes,
                              double test_fraction = 0.25) {
    // std::vector<bool> is bit-packed, so copy into contiguous storage for the span.
    const std::unique_ptr<bool[]> flags(new bool[tf.flags.size()]);
    std::copy(tf.flags.begin(), tf.flags.end(), flags.get());
    const std::span<const bool> gate(flags.get(), tf.flags.size());
    const Split split = gate_and_split(tf.manifest, gate, T, seed, {test_fraction, classes});
    auto build = [&](const std::vector<std::size_t>& idx) {
        std::vector<TemporalStack> out;
        out.reserve(idx.size());
        for (std::size_t i : idx) {
            const std::span<const FrameBlock> history(tf.blocks.data(), i + 1);
            auto s = stack_frames(history, T, true, tf.manifest.rows[i].label);
            if (s) out.push_back(std::move(*s));
        }
        return out;
    };
    return {build(split.train), build(split.test)};
}

/// Classifier defaults per task: CNN on images for the texture and
/// four-state tasks, FNN on displacement vectors for the temporal task.
struct TaskRecipe {
    FeatureParams features;
    ClassifierConfig model;
    TrainOptions train;
    SlideProtocol slide;
    MembraneParams membrane;
    int trials_per_surface = 20;
};

inline TaskRecipe task_recipe(TaskKind kind) {
    TaskRecipe r;
    const TaskSpec spec = task_spec(kind);
    r.model.classes = spec.classes;
    if (kind == TaskKind::temporal) {
        r.features.kind = FeatureKind::vectors;
        r.model.arch = Arch::fnn;
        r.model.frame_rows = 1;
        r.model.frame_cols = static_cast<int>(2 * kMarkerCount);
    } else {
        r.features.kind = FeatureKind::image;
        r.model.arch = Arch::cnn;
        r.model.frame_rows = r.features.image_size;
        r.model.frame_cols = r.features.image_size;
    }
    r.train.epochs = 40;
    r.train.learning_rate = 0.05;
    if (kind == TaskKind::temporal) {
        r.model.hidden1 = 32;
        r.model.hidden2 = 16;
        r.train.learning_rate = 0.2;
        // Many short trials: stacks within a trial are strongly correlated.
        r.trials_per_surface = 200;
        r.slide.idle_frames = 2;
        r.slide.press_frames = 2;
        r.slide.legs = 2;
        r.slide.release_frames = 1;
        r.train.epochs = 30;
        // One shared script: classes differ only in jitter persistence.
        r.slide.randomise = false;
        r.membrane.depth_repeatability = 0.0;
    }
    if (kind == TaskKind::four_state) {
        r.trials_per_surface = 10;
        r.train.epochs = 100;
        r.train.learning_rate = 0.1;
        // Keep soft (half the indentation) and hard presses apart.
        r.slide.depth_min = 0.7;
        r.slide.depth_max = 0.9;
        r.slide.press_frames = 1;
        r.slide.speed = 4.0;
    }
    return r;
}


// ---- End-to-end runs ----

struct PressureExperiment {
    RidgeMarkerModel markers;
    RidgePressureModel pressure;  // fitted on `train`
    std::vector<PressureSample> train;
    std::vector<PressureSample> test;
    PressureEvaluation evaluation;
};

/// Marker model from one set of press trials, pressure samples from another,
/// then a held-out comparison of the ridge model and the monotone baseline.
inline PressureExperiment pressure_experiment(int samples, std::uint64_t seed, double test_fraction = 0.25,
                                              double alpha = 150.0, const SensorConfig& cfg = {}) {
    if (samples < 8) throw ParameterError("pressure_experiment: need at least 8 samples");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ParameterError("test fraction must be in (0, 1)");
    PressureExperiment ex;
    const auto marker_trials = press_trials(samples, trial_seed(seed, 6, 0), cfg);
    ex.markers = train_marker_model(marker_training_frames(marker_trials), alpha, rig_augmentation(seed));
    const auto trials = press_trials(samples, trial_seed(seed, 6, 1), cfg);
    const std::vector<PressureSample> all = pressure_samples(ex.markers, trials);
    const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * samples));
    ex.train.assign(all.begin(), all.end() - static_cast<std::ptrdiff_t>(n_test));
    ex.test.assign(all.end() - static_cast<std::ptrdiff_t>(n_test), all.end());
    ex.evaluation = evaluate_pressure(ex.train, ex.test, alpha);
    ex.pressure = train_pressure_model(ex.train, alpha);
    return ex;
}

struct TaskRun {
    Classifier model;
    TrainCurve curve;
    Evaluation train;
    Evaluation test;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
};

/// Record the task, build T-stacks, train and evaluate one classifier.
inline TaskRun run_task(TaskKind kind, int T, std::uint64_t seed, const TaskRecipe& r, double test_fraction = 0.25,
                        const std::function<void(const EpochStats&)>& on_epoch = {}) {
    const TaskSpec spec = task_spec(kind);
    const Recording rec =
        task_recording(spec, r.trials_per_surface, trial_seed(seed, 7, 0), SensorConfig{}, r.slide, r.membrane);
    const TaskStacks stacks = task_stacks(task_features(rec, r.features), T, trial_seed(seed, 7, 1), spec.classes,
                                          test_fraction);
    ClassifierConfig cfg = r.model;
    cfg.T = T;
    TrainOptions opt = r.train;
    opt.seed = seed;
    TaskRun run{Classifier(cfg, seed), {}, {}, {}, stacks.train.size(), stacks.test.size()};
    run.curve = train_sgd(run.model, stacks.train, opt, on_epoch);
    run.train = evaluate(run.model, stacks.train);
    if (!stacks.test.empty()) run.test = evaluate(run.model, stacks.test);
    return run;
}

/// T sweep on one recording: each (T, trial) gets its own split and initial weights.
inline std::vector<SweepRow> task_sweep(TaskKind kind, int t_min, int t_max, int trials, std::uint64_t seed,
                                        const TaskRecipe& r, double test_fraction = 0.25) {
    const TaskSpec spec = task_spec(kind);
    const Recording rec =
        task_recording(spec, r.trials_per_surface, trial_seed(seed, 8, 0), SensorConfig{}, r.slide, r.membrane);
    const TaskFeatures tf = task_features(rec, r.features);
    auto build = [&](int T, std::uint64_t s) {
        TaskStacks st = task_stacks(tf, T, s, spec.classes, test_fraction);
        return std::make_pair(std::move(st.train), std::move(st.test));
    };
    return t_sweep(make_trial_runner(build, r.model, r.train), t_min, t_max, trials, seed);
}

} // namespace tactip
