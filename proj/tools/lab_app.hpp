#pragma once

// Command-line front end. build_app() wires every subcommand onto a LabRun;
// run_lab() parses, dispatches and maps errors to exit codes.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tactip/experiments.hpp"
#include "tactip/svg.hpp"

namespace tactip::lab {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct SimulateArgs {
    std::string script;
    int trials = 1;
    bool glare = false;
    double glare_area = 250.0;
    double pixel_noise = 2.0;
    double marker_jitter = 0.0;
};

struct PreprocessArgs {
    std::string input;
    PreprocessParams pp;
    int pgm_frame = -1;
};

struct ContactArgs {
    std::string input;
    ContactParams cp;
    int debounce = 1;
};

struct TrackArgs {
    std::string input;
    std::string model;
    double max_dist = 4.25;
    int origin = 0;
    PreprocessParams pp;
};

struct TrainMarkersArgs {
    std::string input;
    std::string labels;
    double alpha = 150.0;
    AugmentSpec augment;
    int feature_size = 64;
    int stride = 1;
    PreprocessParams pp;
};

struct TrainPressureArgs {
    std::string input;
    double alpha = 150.0;
};

struct PressureEvalArgs {
    std::string model;
    std::string input;
};

struct ClassifierArgs {
    std::string task = "lego";
    std::string arch = "auto";
    int T = 10;
    int epochs = 0;
    double lr = 0.0;
    int batch = 32;
    double dropout = 0.2;
    int trials_per_surface = 0;
    double test_fraction = 0.25;
};

struct EvalArgs {
    std::string experiment = "all";
    int trials = 30;
    int samples = 500;
    int depth_trials = 100;
    double max_dist = 4.25;
    double alpha = 150.0;
};

struct SweepArgs {
    std::string task = "temporal";
    int tmin = 1;
    int tmax = 10;
    int trials = 20;
    int epochs = 0;
    double lr = 0.0;
};

struct PlotArgs {
    std::string input;
    std::string kind = "curve";
    std::string title;
};

struct LabRun {
    std::uint64_t seed = 1;
    std::string out = "out";
    SimulateArgs simulate;
    PreprocessArgs preprocess;
    ContactArgs contact;
    TrackArgs track;
    TrainMarkersArgs train_markers;
    TrainPressureArgs train_pressure;
    PressureEvalArgs pressure_eval;
    ClassifierArgs classifier;
    EvalArgs eval;
    SweepArgs sweep;
    PlotArgs plot;
    std::ostream* log = &std::cout;
};

// ---- Output helpers ----

inline fs::path out_dir(const LabRun& run) {
    fs::path p(run.out);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create output directory " + run.out + ": " + ec.message());
    return p;
}

inline std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot open " + p.string() + " for writing");
    out.precision(10);
    return out;
}

inline void write_json(const fs::path& p, const ordered_json& j) { open_out(p) << j.dump(2) << '\n'; }

inline std::vector<std::vector<std::string>> read_csv(const std::string& path, std::vector<std::string>* header) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first) {
            *header = cells;
            first = false;
        } else {
            rows.push_back(std::move(cells));
        }
    }
    if (first) throw DataError(path + ": empty CSV");
    return rows;
}

inline std::vector<double> csv_column(const std::vector<std::vector<std::string>>& rows,
                                      const std::vector<std::string>& header, const std::string& name,
                                      const std::string& path) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(path + ": missing column \"" + name + "\"");
    const auto col = static_cast<std::size_t>(it - header.begin());
    std::vector<double> out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (col >= rows[r].size()) throw DataError(path + ": row " + std::to_string(r + 2) + " is short");
        try {
            out.push_back(std::stod(rows[r][col]));
        } catch (const std::exception&) {
            throw DataError(path + ": row " + std::to_string(r + 2) + ": \"" + rows[r][col] + "\" is not a number");
        }
    }
    return out;
}

inline SensorConfig sensor_config(const SimulateArgs& a, std::uint64_t seed) {
    SensorConfig cfg;
    cfg.pixel_noise = a.pixel_noise;
    cfg.marker_jitter = a.marker_jitter;
    cfg.seed = seed;
    if (a.glare) cfg.glare = Glare{{34.0, 30.0}, a.glare_area};
    if (a.pixel_noise < 0.0 || a.marker_jitter < 0.0) throw ParameterError("noise levels must be >= 0");
    if (a.glare && a.glare_area <= 0.0) throw ParameterError("--glare-area must be > 0");
    return cfg;
}

inline const char* kDefaultScript = R"(# Press sweep over the depth table
surface=hard
idle 5
press 0.2 10
release 8
press 0.4 10
release 8
press 0.8 10
release 8
press 1.0 10
release 8
)";

// ---- Charts ----

inline svg::Chart curve_chart(const std::vector<double>& epoch, const std::vector<double>& loss,
                              const std::vector<double>& acc, const std::string& title) {
    svg::Chart c{title, "epoch", "value", {}};
    c.series.push_back({"loss", epoch, loss, {}, true, svg::palette()[0]});
    c.series.push_back({"train accuracy", epoch, acc, {}, true, svg::palette()[1]});
    return c;
}

inline svg::Chart sweep_chart(const std::vector<double>& T, const std::vector<double>& mean,
                              const std::vector<double>& sd, const std::string& title) {
    svg::Chart c{title, "T (frames)", "held-out accuracy", {}};
    c.series.push_back({"mean ± std", T, mean, sd, true, svg::palette()[0]});
    return c;
}

inline svg::Chart pressure_chart(const std::vector<double>& truth, const std::vector<double>& pred,
                                 const std::string& title) {
    svg::Chart c{title, "true pressure", "predicted pressure", {}};
    c.diagonal = true;
    c.series.push_back({"ridge", truth, pred, {}, false, svg::palette()[0]});
    return c;
}

inline svg::Chart direction_chart(const std::vector<std::string>& labels, const std::vector<double>& x,
                                  const std::vector<double>& y, const std::string& title) {
    svg::Chart c{title, "average vector x (px)", "average vector y (px)", {}};
    std::vector<std::string> order;
    for (const auto& l : labels)
        if (std::find(order.begin(), order.end(), l) == order.end()) order.push_back(l);
    for (std::size_t k = 0; k < order.size(); ++k) {
        svg::Series s{order[k], {}, {}, {}, false, svg::palette()[k % svg::palette().size()]};
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == order[k]) {
                s.x.push_back(x[i]);
                s.y.push_back(y[i]);
            }
        c.series.push_back(std::move(s));
    }
    return c;
}

// ---- Subcommands ----

inline void cmd_simulate(LabRun& run) {
    const SimulateArgs& a = run.simulate;
    if (a.trials < 1) throw ParameterError("--trials must be >= 1");
    const StimulusScript script = a.script.empty() ? parse_script(std::string(kDefaultScript)) : load_script(a.script);
    const SensorConfig cfg = sensor_config(a, run.seed);
    const Recording rec = generate_dataset(script, cfg, run.seed, a.trials);
    const fs::path dir = out_dir(run);
    save_container(rec.container, (dir / "frames.tacf").string());
    save_manifest(rec.manifest, (dir / "manifest.csv").string());
    MarkerLabels labels;
    for (std::size_t i = 0; i < rec.markers.size(); ++i) {
        labels.frame_indices.push_back(rec.manifest.rows[i].frame_index);
        labels.markers.push_back(rec.markers[i]);
    }
    save_marker_labels(labels, (dir / "markers.txt").string());
    const ValidationReport report = validate(rec.manifest, rec.container);
    if (!report.ok()) throw InternalError("simulator produced an invalid dataset: " + report.findings.front());
    *run.log << "simulate: " << rec.container.frames.size() << " frames (" << a.trials << " trials of "
             << script.frame_count() << ") written to " << dir.string() << '\n';
}

inline void cmd_preprocess(LabRun& run) {
    const PreprocessArgs& a = run.preprocess;
    const FrameContainer c = load_container(a.input);
    const fs::path dir = out_dir(run);
    auto counts = open_out(dir / "counts.csv");
    auto points = open_out(dir / "centroids.csv");
    counts << "frame_index,blobs_before,blobs_after,markers\n";
    points << "frame_index,marker,x,y\n";
    for (std::size_t i = 0; i < c.frames.size(); ++i) {
        const BinaryFrame raw = adaptive_threshold(c.frames[i], a.pp.window, a.pp.offset);
        const BinaryFrame clean = remove_large_blobs(raw, a.pp.max_area);
        const MarkerSet m = extract_centroids(clean, a.pp.min_area);
        counts << i << ',' << label_components(raw).size() << ',' << label_components(clean).size() << ','
               << m.count() << '\n';
        for (std::size_t k = 0; k < m.count(); ++k) points << i << ',' << k << ',' << m[k].x << ',' << m[k].y << '\n';
        if (static_cast<int>(i) == a.pgm_frame) write_pgm((dir / "binary.pgm").string(), to_gray(clean));
    }
    if (a.pgm_frame >= static_cast<int>(c.frames.size()))
        throw ParameterError("--pgm-frame " + std::to_string(a.pgm_frame) + " is beyond the last frame");
    *run.log << "preprocess: " << c.frames.size() << " frames\n";
}

inline void cmd_contact(LabRun& run) {
    const ContactArgs& a = run.contact;
    if (a.debounce < 1) throw ParameterError("--debounce must be >= 1");
    const FrameContainer c = load_container(a.input);
    const auto readings = contact_track(std::span<const GrayFrame>(c.frames), a.cp);
    const fs::path dir = out_dir(run);
    auto out = open_out(dir / "contact.csv");
    out << "frame_index,total_activation,contact_flag\n";
    std::vector<double> idx, total;
    int streak = 0, flagged = 0;
    for (std::size_t i = 0; i < readings.size(); ++i) {
        streak = readings[i].contact ? streak + 1 : 0;
        const bool flag = streak >= a.debounce;
        flagged += flag;
        out << i << ',' << readings[i].total_activation << ',' << (flag ? 1 : 0) << '\n';
        idx.push_back(static_cast<double>(i));
        total.push_back(readings[i].total_activation);
    }
    svg::Chart chart{"Receptive-field activation", "frame", "total activation", {}};
    chart.series.push_back({"total", idx, total, {}, true, svg::palette()[0]});
    chart.series.push_back({"threshold", {0.0, idx.empty() ? 1.0 : idx.back()}, {a.cp.threshold, a.cp.threshold}, {},
                            true, svg::palette()[1]});
    svg::save(chart, (dir / "contact.svg").string());
    *run.log << "contact: " << flagged << " of " << readings.size() << " frames flagged\n";
}

inline void cmd_track(LabRun& run) {
    const TrackArgs& a = run.track;
    if (!(a.max_dist > 0.0)) throw ParameterError("--max-dist must be > 0");
    const FrameContainer c = load_container(a.input);
    if (a.origin < 0 || a.origin >= static_cast<int>(c.frames.size()))
        throw ParameterError("--origin must index a frame in [0, " + std::to_string(c.frames.size()) + ")");
    std::optional<RidgeMarkerModel> model;
    if (!a.model.empty()) model = load_marker_model(a.model);
    auto locate = [&](const GrayFrame& f) {
        const BinaryFrame b = preprocess(f, a.pp);
        return model ? predict_markers(*model, b) : extract_centroids(b, a.pp.min_area);
    };
    const MarkerSet origin = locate(c.frames[static_cast<std::size_t>(a.origin)]);
    std::vector<VectorField> fields(c.frames.size());
    parallel_for(c.frames.size(), [&](std::size_t i) {
        const MarkerSet cur = locate(c.frames[i]);
        if (model) {
            for (std::size_t k = 0; k < cur.count(); ++k) fields[i].vectors.push_back({origin[k], cur[k]});
        } else {
            fields[i] = vector_field(origin, cur, match_points(origin, cur, a.max_dist));
        }
    });
    const fs::path dir = out_dir(run);
    auto vec = open_out(dir / "vectors.csv");
    auto sum = open_out(dir / "summary.csv");
    vec << "frame_index,vector,origin_x,origin_y,tip_x,tip_y\n";
    sum << "frame_index,count,avg_x,avg_y,magnitude_sum\n";
    std::vector<double> ax, ay;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const VectorField& f = fields[i];
        for (std::size_t k = 0; k < f.vectors.size(); ++k)
            vec << i << ',' << k << ',' << f.vectors[k].origin.x << ',' << f.vectors[k].origin.y << ','
                << f.vectors[k].tip.x << ',' << f.vectors[k].tip.y << '\n';
        const Point avg = f.count() ? average_vector(f) : Point{};
        sum << i << ',' << f.count() << ',' << avg.x << ',' << avg.y << ',' << magnitude_sum(f) << '\n';
        ax.push_back(avg.x);
        ay.push_back(avg.y);
    }
    svg::save(direction_chart(std::vector<std::string>(ax.size(), "frame"), ax, ay, "Average vector per frame"),
              (dir / "average.svg").string());
    *run.log << "track: " << fields.size() << " frames, " << (model ? "marker model" : "centroid matching") << '\n';
}

inline void cmd_train_markers(LabRun& run) {
    const TrainMarkersArgs& a = run.train_markers;
    if (a.stride < 1) throw ParameterError("--stride must be >= 1");
    if (a.feature_size < 4) throw ParameterError("--feature-size must be >= 4");
    if (a.augment.copies < 0 || a.augment.max_shift < 0 || !(a.augment.zoom_min > 0.0) ||
        a.augment.zoom_max < a.augment.zoom_min)
        throw ParameterError("augmentation needs copies >= 0, shift >= 0 and 0 < zoom-min <= zoom-max");
    const FrameContainer c = load_container(a.input);
    const MarkerLabels labels = load_marker_labels(a.labels);
    std::vector<LabelledFrame> samples;
    for (std::size_t i = 0; i < labels.markers.size(); i += static_cast<std::size_t>(a.stride)) {
        const std::int64_t f = labels.frame_indices[i];
        if (f < 0 || f >= static_cast<std::int64_t>(c.frames.size()))
            throw DataError(a.labels + ": frame index " + std::to_string(f) + " is not in the container");
        samples.push_back({preprocess(c.frames[static_cast<std::size_t>(f)], a.pp), labels.markers[i]});
    }
    AugmentSpec aug = a.augment;
    aug.seed = run.seed;
    const RidgeMarkerModel m = train_marker_model(samples, a.alpha, aug, a.feature_size, a.feature_size);
    const fs::path dir = out_dir(run);
    save_marker_model(m, (dir / "markers.tacr").string());
    *run.log << "train-markers: " << samples.size() << " labelled frames, alpha " << a.alpha << '\n';
}

inline void cmd_train_pressure(LabRun& run) {
    const auto samples = read_pressure_dataset(run.train_pressure.input);
    const RidgePressureModel m = train_pressure_model(samples, run.train_pressure.alpha);
    const fs::path dir = out_dir(run);
    save_pressure_model(m, (dir / "pressure.tacp").string());
    *run.log << "train-pressure: " << samples.size() << " samples\n";
}

inline double write_pressure_eval(const fs::path& dir, const RidgePressureModel& m,
                                  std::span<const PressureSample> samples) {
    auto out = open_out(dir / "pressure_eval.csv");
    out << "true,predicted,surface\n";
    std::vector<double> truth, pred;
    double mae = 0.0;
    for (const PressureSample& s : samples) {
        const double p = predict_pressure(m, std::span<const double>(s.displacements));
        out << s.pressure << ',' << p << ',' << to_string(s.surface) << '\n';
        truth.push_back(s.pressure);
        pred.push_back(p);
        mae += std::abs(p - s.pressure);
    }
    svg::save(pressure_chart(truth, pred, "Predicted vs true pressure"), (dir / "pressure.svg").string());
    return samples.empty() ? 0.0 : mae / static_cast<double>(samples.size());
}

inline void cmd_pressure_eval(LabRun& run) {
    const RidgePressureModel m = load_pressure_model(run.pressure_eval.model);
    const auto samples = read_pressure_dataset(run.pressure_eval.input);
    if (samples.empty()) throw DataError(run.pressure_eval.input + ": no samples");
    const fs::path dir = out_dir(run);
    const double mae = write_pressure_eval(dir, m, samples);
    write_json(dir / "pressure_metrics.json", {{"samples", samples.size()}, {"mae", mae}});
    *run.log << "pressure-eval: MAE " << mae << " over " << samples.size() << " samples\n";
}

inline TaskRecipe recipe_from(const std::string& task, const std::string& arch, int epochs, double lr,
                              int trials_per_surface) {
    TaskRecipe r = task_recipe(parse_task(task));
    if (arch != "auto") {
        r.model.arch = parse_arch(arch);
        if (r.model.arch == Arch::fnn && r.features.kind == FeatureKind::image) {
            r.model.frame_rows = 1;
            r.model.frame_cols = r.features.image_size * r.features.image_size;
        } else if (r.model.arch == Arch::cnn && r.features.kind == FeatureKind::vectors) {
            r.features.kind = FeatureKind::image;
            r.model.frame_rows = r.model.frame_cols = r.features.image_size;
        }
    }
    if (epochs < 0 || lr < 0.0 || trials_per_surface < 0)
        throw ParameterError("--epochs, --lr and --trials-per-surface must be >= 0 (0 keeps the task default)");
    if (epochs > 0) r.train.epochs = epochs;
    if (lr > 0.0) r.train.learning_rate = lr;
    if (trials_per_surface > 0) r.trials_per_surface = trials_per_surface;
    return r;
}

inline ordered_json confusion_json(const Evaluation& e) {
    ordered_json rows = ordered_json::array();
    for (const auto& r : e.confusion) rows.push_back(r);
    return rows;
}

inline void cmd_train_classifier(LabRun& run) {
    const ClassifierArgs& a = run.classifier;
    if (a.T < 1) throw ParameterError("--T must be >= 1");
    if (a.batch < 1) throw ParameterError("--batch must be >= 1");
    TaskRecipe r = recipe_from(a.task, a.arch, a.epochs, a.lr, a.trials_per_surface);
    r.train.batch = a.batch;
    r.model.dropout = a.dropout;
    const TaskRun res = run_task(parse_task(a.task), a.T, run.seed, r, a.test_fraction);
    const fs::path dir = out_dir(run);
    save_classifier(res.model, (dir / "classifier.tacn").string());
    {
        auto out = open_out(dir / "curve.csv");
        write_curve_csv(out, res.curve);
    }
    std::vector<double> ep, loss, acc;
    for (const EpochStats& s : res.curve) {
        ep.push_back(s.epoch);
        loss.push_back(s.loss);
        acc.push_back(s.accuracy);
    }
    svg::save(curve_chart(ep, loss, acc, "Training curve (" + a.task + ", T=" + std::to_string(a.T) + ")"),
              (dir / "curve.svg").string());
    ordered_json j;
    j["task"] = a.task;
    j["arch"] = to_string(r.model.arch);
    j["T"] = a.T;
    j["classes"] = res.model.classes();
    j["train_samples"] = res.train_size;
    j["test_samples"] = res.test_size;
    j["train_accuracy"] = res.train.accuracy;
    j["test_accuracy"] = res.test.accuracy;
    j["train_confusion"] = confusion_json(res.train);
    j["test_confusion"] = confusion_json(res.test);
    write_json(dir / "metrics.json", j);
    *run.log << "train-classifier: " << a.task << " T=" << a.T << " train " << res.train.accuracy << " test "
             << res.test.accuracy << '\n';
}

inline void eval_direction(LabRun& run, const fs::path& dir, ordered_json& summary) {
    const auto trials = direction_experiment(run.eval.trials, run.seed, {}, run.eval.max_dist);
    auto out = open_out(dir / "direction.csv");
    out << "trial,label,avg_x,avg_y\n";
    std::vector<std::string> labels;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        out << i << ',' << trials[i].label << ',' << trials[i].average.x << ',' << trials[i].average.y << '\n';
        labels.push_back(trials[i].label);
        x.push_back(trials[i].average.x);
        y.push_back(trials[i].average.y);
    }
    svg::save(direction_chart(labels, x, y, "Average vector by stimulus"), (dir / "direction.svg").string());
    double left_max = -1e300, right_min = 1e300, center = 0.0, shear = 0.0;
    int nc = 0, ns = 0;
    for (const auto& t : trials) {
        if (t.label == "left") left_max = std::max(left_max, t.average.x);
        if (t.label == "right") right_min = std::min(right_min, t.average.x);
        if (t.label == "center") center += norm(t.average), ++nc;
        else shear += norm(t.average), ++ns;
    }
    summary["direction"] = {{"left_max_x", left_max},
                            {"right_min_x", right_min},
                            {"center_mean_magnitude", center / nc},
                            {"shear_mean_magnitude", shear / ns}};
}

inline void eval_slip(LabRun& run, const fs::path& dir, ordered_json& summary) {
    const SlipResult r = slip_experiment(run.eval.trials, run.seed, {}, run.eval.max_dist);
    auto out = open_out(dir / "slip.csv");
    out << "trial,hard_magnitude,slippery_magnitude\n";
    for (std::size_t i = 0; i < r.hard.size(); ++i) out << i << ',' << r.hard[i] << ',' << r.slippery[i] << '\n';
    summary["slip"] = {{"hard_mean", SlipResult::mean(r.hard)},
                       {"slippery_mean", SlipResult::mean(r.slippery)},
                       {"ratio", r.ratio()}};
}

inline PressureExperiment eval_pressure(LabRun& run, const fs::path& dir, ordered_json& summary) {
    PressureExperiment ex = pressure_experiment(run.eval.samples, run.seed, 0.25, run.eval.alpha);
    save_marker_model(ex.markers, (dir / "markers.tacr").string());
    save_pressure_model(ex.pressure, (dir / "pressure.tacp").string());
    write_pressure_dataset((dir / "pressure_train.txt").string(), ex.train);
    write_pressure_dataset((dir / "pressure_test.txt").string(), ex.test);
    write_pressure_eval(dir, ex.pressure, ex.test);
    summary["pressure"] = {{"train_samples", ex.train.size()},
                           {"test_samples", ex.test.size()},
                           {"ridge_mae", ex.evaluation.ridge_mae},
                           {"monotone_mae", ex.evaluation.monotone_mae}};
    return ex;
}

inline void eval_depth(LabRun& run, const fs::path& dir, const PressureExperiment& ex, ordered_json& summary) {
    const auto cells = depth_sweep(ex.markers, ex.pressure, run.eval.depth_trials, run.seed);
    auto out = open_out(dir / "depth_sweep.csv");
    out << "surface,depth_cm,mean,min,max\n";
    svg::Chart chart{"Median predicted pressure vs depth", "commanded depth (cm)", "predicted pressure", {}};
    ordered_json j = ordered_json::array();
    for (Compliance c : {Compliance::hard, Compliance::soft}) {
        svg::Series s{to_string(c), {}, {}, {}, true, svg::palette()[c == Compliance::hard ? 0 : 1]};
        for (const DepthSweepCell& cell : cells) {
            if (cell.surface != c) continue;
            out << to_string(c) << ',' << cell.depth << ',' << cell.mean() << ',' << cell.min() << ',' << cell.max()
                << '\n';
            s.x.push_back(cell.depth);
            s.y.push_back(cell.mean());
            s.err.push_back(0.5 * (cell.max() - cell.min()));
            j.push_back({{"surface", to_string(c)}, {"depth", cell.depth}, {"mean", cell.mean()},
                         {"min", cell.min()}, {"max", cell.max()}});
        }
        chart.series.push_back(std::move(s));
    }
    svg::save(chart, (dir / "depth_sweep.svg").string());
    summary["depth_sweep"] = j;
}

inline void cmd_eval(LabRun& run) {
    const EvalArgs& a = run.eval;
    if (a.trials < 1 || a.depth_trials < 1) throw ParameterError("--trials and --depth-trials must be >= 1");
    const std::vector<std::string> known = {"all", "direction", "slip", "pressure", "depth"};
    if (std::find(known.begin(), known.end(), a.experiment) == known.end())
        throw ParameterError("unknown experiment \"" + a.experiment + "\" (expected all, direction, slip, pressure or depth)");
    const fs::path dir = out_dir(run);
    ordered_json summary;
    const bool all = a.experiment == "all";
    if (all || a.experiment == "direction") eval_direction(run, dir, summary);
    if (all || a.experiment == "slip") eval_slip(run, dir, summary);
    if (all || a.experiment == "pressure" || a.experiment == "depth") {
        const PressureExperiment ex = eval_pressure(run, dir, summary);
        if (all || a.experiment == "depth") eval_depth(run, dir, ex, summary);
    }
    write_json(dir / "summary.json", summary);
    *run.log << "eval: " << a.experiment << " written to " << dir.string() << '\n';
}

inline void cmd_sweep_t(LabRun& run) {
    const SweepArgs& a = run.sweep;
    const TaskRecipe r = recipe_from(a.task, "auto", a.epochs, a.lr, 0);
    const auto rows = task_sweep(parse_task(a.task), a.tmin, a.tmax, a.trials, run.seed, r);
    const fs::path dir = out_dir(run);
    {
        auto out = open_out(dir / "sweep.csv");
        write_sweep_csv(out, rows);
    }
    std::vector<double> T, mean, sd;
    for (const SweepRow& row : rows) {
        T.push_back(row.T);
        mean.push_back(row.mean);
        sd.push_back(row.std);
    }
    svg::save(sweep_chart(T, mean, sd, "Held-out accuracy vs T (" + a.task + ")"), (dir / "sweep.svg").string());
    ordered_json j;
    j["task"] = a.task;
    j["trials"] = a.trials;
    j["spearman"] = rows.size() >= 2 ? spearman(T, mean) : 0.0;
    j["gain_last_minus_first"] = mean.back() - mean.front();
    write_json(dir / "sweep.json", j);
    *run.log << "sweep-t: " << rows.size() << " values of T, spearman " << j["spearman"].get<double>() << '\n';
}

inline void cmd_plot(LabRun& run) {
    const PlotArgs& a = run.plot;
    std::vector<std::string> header;
    const auto rows = read_csv(a.input, &header);
    auto col = [&](const std::string& n) { return csv_column(rows, header, n, a.input); };
    svg::Chart chart;
    if (a.kind == "curve") {
        chart = curve_chart(col("epoch"), col("loss"), col("accuracy"), "Training curve");
    } else if (a.kind == "sweep") {
        chart = sweep_chart(col("T"), col("mean_accuracy"), col("std_accuracy"), "Held-out accuracy vs T");
    } else if (a.kind == "pressure") {
        chart = pressure_chart(col("true"), col("predicted"), "Predicted vs true pressure");
    } else if (a.kind == "direction") {
        const auto it = std::find(header.begin(), header.end(), "label");
        if (it == header.end()) throw DataError(a.input + ": missing column \"label\"");
        std::vector<std::string> labels;
        for (const auto& r : rows) labels.push_back(r.at(static_cast<std::size_t>(it - header.begin())));
        chart = direction_chart(labels, col("avg_x"), col("avg_y"), "Average vector by stimulus");
    } else if (a.kind == "contact") {
        chart = svg::Chart{"Receptive-field activation", "frame", "total activation", {}};
        chart.series.push_back({"total", col("frame_index"), col("total_activation"), {}, true, svg::palette()[0]});
    } else {
        throw ParameterError("unknown plot kind \"" + a.kind + "\" (expected curve, sweep, pressure, direction or contact)");
    }
    if (!a.title.empty()) chart.title = a.title;
    const fs::path dir = out_dir(run);
    const fs::path target = dir / (fs::path(a.input).stem().string() + ".svg");
    svg::save(chart, target.string());
    *run.log << "plot: " << target.string() << '\n';
}

// ---- Wiring ----

inline void add_common(CLI::App* sub, LabRun& run) {
    sub->add_option("--seed", run.seed, "Random seed");
    sub->add_option("-o,--out", run.out, "Output directory");
}

inline void add_preprocess_options(CLI::App* sub, PreprocessParams& pp) {
    sub->add_option("--window", pp.window, "Adaptive-threshold window (odd, px)");
    sub->add_option("--offset", pp.offset, "Adaptive-threshold offset above the local mean");
    sub->add_option("--max-area", pp.max_area, "Blobs larger than this are removed as glare (px)");
    sub->add_option("--min-area", pp.min_area, "Smallest blob kept as a marker (px)");
}

inline std::unique_ptr<CLI::App> build_app(LabRun& run) {
    auto app = std::make_unique<CLI::App>("Optical tactile sensor lab: simulate, track, train and evaluate", "tactip_lab");
    app->option_defaults()->always_capture_default();
    app->require_subcommand(1);

    auto* sim = app->add_subcommand("simulate", "Render a stimulus script to frames, manifest and marker truth");
    sim->add_option("--script", run.simulate.script, "Stimulus script (default: empty, the built-in press sweep)");
    sim->add_option("--trials", run.simulate.trials, "Repetitions of the script");
    sim->add_flag("--glare", run.simulate.glare, "Add a static glare blob (default: off)");
    sim->add_option("--glare-area", run.simulate.glare_area, "Glare blob area (px)");
    sim->add_option("--pixel-noise", run.simulate.pixel_noise, "Pixel noise std (grey levels)");
    sim->add_option("--marker-jitter", run.simulate.marker_jitter, "Per-marker position noise std (px)");
    add_common(sim, run);
    sim->callback([&run] { cmd_simulate(run); });

    auto* pre = app->add_subcommand("preprocess", "Threshold, remove glare and extract centroids per frame");
    pre->add_option("-i,--input", run.preprocess.input, "Frame container (.tacf)")->required();
    add_preprocess_options(pre, run.preprocess.pp);
    pre->add_option("--pgm-frame", run.preprocess.pgm_frame, "Also write this frame's binary image as PGM (-1: none)");
    add_common(pre, run);
    pre->callback([&run] { cmd_preprocess(run); });

    auto* con = app->add_subcommand("contact", "Per-frame receptive-field activation and contact flag");
    con->add_option("-i,--input", run.contact.input, "Frame container (.tacf)")->required();
    con->add_option("--grid", run.contact.cp.grid_size, "Grid cells per side");
    con->add_option("--gamma", run.contact.cp.gamma, "Per-update decay of each cell");
    con->add_option("--threshold", run.contact.cp.threshold, "Total activation above which contact is reported");
    con->add_option("--debounce", run.contact.debounce, "Consecutive contact frames before a frame is flagged");
    add_common(con, run);
    con->callback([&run] { cmd_contact(run); });

    auto* trk = app->add_subcommand("track", "Displacement vectors against an origin frame");
    trk->add_option("-i,--input", run.track.input, "Frame container (.tacf)")->required();
    trk->add_option("--model", run.track.model, "Marker model (.tacr) (default: empty, centroid matching)");
    trk->add_option("--max-dist", run.track.max_dist, "Matching cut-off for centroid matching (px)");
    trk->add_option("--origin", run.track.origin, "Index of the origin frame");
    add_preprocess_options(trk, run.track.pp);
    add_common(trk, run);
    trk->callback([&run] { cmd_track(run); });

    auto* tm = app->add_subcommand("train-markers", "Fit the ridge marker model on labelled frames");
    tm->add_option("-i,--input", run.train_markers.input, "Frame container (.tacf)")->required();
    tm->add_option("--labels", run.train_markers.labels, "Marker label file")->required();
    tm->add_option("--alpha", run.train_markers.alpha, "Ridge penalty");
    tm->add_option("--copies", run.train_markers.augment.copies, "Augmented copies per labelled frame");
    tm->add_option("--max-shift", run.train_markers.augment.max_shift, "Largest translation (px)");
    tm->add_option("--zoom-min", run.train_markers.augment.zoom_min, "Smallest zoom factor");
    tm->add_option("--zoom-max", run.train_markers.augment.zoom_max, "Largest zoom factor");
    tm->add_option("--feature-size", run.train_markers.feature_size, "Side of the downsampled input image");
    tm->add_option("--stride", run.train_markers.stride, "Use every n-th labelled frame");
    add_preprocess_options(tm, run.train_markers.pp);
    add_common(tm, run);
    tm->callback([&run] { cmd_train_markers(run); });

    auto* tp = app->add_subcommand("train-pressure", "Fit the ridge pressure model on a pressure dataset");
    tp->add_option("-i,--input", run.train_pressure.input, "Pressure dataset (text)")->required();
    tp->add_option("--alpha", run.train_pressure.alpha, "Ridge penalty");
    add_common(tp, run);
    tp->callback([&run] { cmd_train_pressure(run); });

    auto* pe = app->add_subcommand("pressure-eval", "Predicted vs true pressure for a dataset");
    pe->add_option("--model", run.pressure_eval.model, "Pressure model (.tacp)")->required();
    pe->add_option("-i,--input", run.pressure_eval.input, "Pressure dataset (text)")->required();
    add_common(pe, run);
    pe->callback([&run] { cmd_pressure_eval(run); });

    auto* tc = app->add_subcommand("train-classifier", "Record a surface task and train a T-frame classifier");
    tc->add_option("--task", run.classifier.task, "Task: lego, concrete, four or temporal");
    tc->add_option("--arch", run.classifier.arch, "Network: fnn, cnn or auto (task default)");
    tc->add_option("--T", run.classifier.T, "Frames per stack");
    tc->add_option("--epochs", run.classifier.epochs, "Training epochs (0: task default)");
    tc->add_option("--lr", run.classifier.lr, "Learning rate (0: task default)");
    tc->add_option("--batch", run.classifier.batch, "Minibatch size");
    tc->add_option("--dropout", run.classifier.dropout, "Dropout rate");
    tc->add_option("--trials-per-surface", run.classifier.trials_per_surface, "Recorded trials per surface (0: task default)");
    tc->add_option("--test-fraction", run.classifier.test_fraction, "Fraction of trials held out");
    add_common(tc, run);
    tc->callback([&run] { cmd_train_classifier(run); });

    auto* ev = app->add_subcommand("eval", "Direction, slip, pressure and depth-sweep experiments");
    ev->add_option("--experiment", run.eval.experiment, "all, direction, slip, pressure or depth");
    ev->add_option("--trials", run.eval.trials, "Trials per stimulus for direction and slip");
    ev->add_option("--samples", run.eval.samples, "Press trials for the pressure dataset");
    ev->add_option("--depth-trials", run.eval.depth_trials, "Trials per depth and surface in the depth sweep");
    ev->add_option("--max-dist", run.eval.max_dist, "Matching cut-off (px)");
    ev->add_option("--alpha", run.eval.alpha, "Ridge penalty for both models");
    add_common(ev, run);
    ev->callback([&run] { cmd_eval(run); });

    auto* sw = app->add_subcommand("sweep-t", "Held-out accuracy against stack length T");
    sw->add_option("--task", run.sweep.task, "Task: lego, concrete, four or temporal");
    sw->add_option("--tmin", run.sweep.tmin, "Smallest T");
    sw->add_option("--tmax", run.sweep.tmax, "Largest T");
    sw->add_option("--trials", run.sweep.trials, "Seeded trials per T");
    sw->add_option("--epochs", run.sweep.epochs, "Training epochs (0: task default)");
    sw->add_option("--lr", run.sweep.lr, "Learning rate (0: task default)");
    add_common(sw, run);
    sw->callback([&run] { cmd_sweep_t(run); });

    auto* pl = app->add_subcommand("plot", "Render a CSV written by another subcommand as SVG");
    pl->add_option("-i,--input", run.plot.input, "CSV file")->required();
    pl->add_option("--kind", run.plot.kind, "curve, sweep, pressure, direction or contact");
    pl->add_option("--title", run.plot.title, "Chart title (default: empty, a per-kind title)");
    add_common(pl, run);
    pl->callback([&run] { cmd_plot(run); });

    return app;
}

/// Parse and run. Returns the process exit code.
inline int run_lab(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    LabRun run;
    run.log = &out;
    auto app = build_app(run);
    try {
        app->parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app->help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app->help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        // Subcommand help arrives here as well.
        if (e.get_exit_code() == 0) return app->exit(e, out, err);
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

} // namespace tactip::lab
