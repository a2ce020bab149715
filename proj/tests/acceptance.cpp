// Acceptance run: one PASS/FAIL line per criterion.
// Usage: acceptance <path-to-tactip_lab> [criterion numbers...]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "tactip/experiments.hpp"

namespace fs = std::filesystem;
using namespace tactip;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// 1. Closed-loop centroid recovery.
Outcome marker_recovery() {
    SensorConfig cfg;
    cfg.pixel_noise = 0.0;
    cfg.marker_jitter = 0.0;
    const StimulusScript script =
        parse_script("surface=hard\nidle 5\npress 0.8 30\nshear 1,0.5 1.5 35\nrelease 30\n");
    const Recording rec = generate_dataset(script, cfg, 11);
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t frames_ok = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < rec.container.frames.size(); ++i) {
        const MarkerSet m = extract_centroids(preprocess(rec.container.frames[i]), 4);
        bool ok = m.count() == 133;
        for (const Point& truth : rec.markers[i]) {
            double best = 1e9;
            for (const Point& q : m.points) best = std::min(best, norm(truth - q));
            worst = std::max(worst, best);
            ok &= best < 0.5;
        }
        frames_ok += ok;
    }
    const double secs = seconds_since(t0);
    const std::size_t n = rec.container.frames.size();
    return {n == 100 && frames_ok == n && secs < 10.0,
            fmt("%zu/%zu frames with 133 points within 0.5 px (worst %.3f px), %.2f s", frames_ok, n, worst, secs)};
}

// 2. Glare removal and regression marker model.
Outcome glare_handling() {
    SensorConfig cfg;
    cfg.glare = Glare{};
    const Recording rec = generate_dataset(
        parse_script("surface=hard\nidle 5\npress 0.9 30\nshear -1,0 1.5 35\nrelease 30\n"), cfg, 12);
    const auto trials = press_trials(60, 21);
    const RidgeMarkerModel model = train_marker_model(marker_training_frames(trials), 150.0, rig_augmentation(1));
    const PreprocessParams pp;
    const int gx = static_cast<int>(std::lround(cfg.glare->center.x));
    const int gy = static_cast<int>(std::lround(cfg.glare->center.y));
    std::size_t had_glare = 0, removed = 0, full = 0;
    for (const GrayFrame& f : rec.container.frames) {
        const BinaryFrame raw = adaptive_threshold(f, pp.window, pp.offset);
        bool big_before = false;
        for (const Blob& b : label_components(raw)) big_before |= b.area() > pp.max_area;
        had_glare += big_before;
        const BinaryFrame clean = remove_large_blobs(raw, pp.max_area);
        bool big_after = false;
        for (const Blob& b : label_components(clean)) big_after |= b.area() > pp.max_area;
        removed += !big_after && !clean.at(gx, gy);
        full += predict_markers(model, clean).count() == 133;
    }
    const std::size_t n = rec.container.frames.size();
    return {had_glare == n && removed == n && full == n,
            fmt("glare present %zu/%zu, removed %zu/%zu, 133 predicted %zu/%zu (max area %zu px)", had_glare, n,
                removed, n, full, n, pp.max_area)};
}

// 3. Receptive-field grid: hand example and random-pair properties.
Outcome contact_oracle() {
    GrayFrame lit(4, 4, 0);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) lit.at(x, y) = 40;
    ForceGrid g(GrayFrame(4, 4, 0), 2, 0.0);
    g.update(lit);
    // raw 40 in the lit cell, global mean 10, no decay.
    const double expect[4] = {30.0, 0.0, 0.0, 0.0};
    double hand_err = 0.0;
    for (int c = 0; c < 4; ++c) hand_err = std::max(hand_err, std::abs(g.activation()[static_cast<std::size_t>(c)] - expect[c]));
    const ContactReading r = contact_detected(g, 10.0);
    hand_err = std::max(hand_err, std::abs(r.total_activation - 30.0));
    const bool hand = hand_err <= 1e-12 && r.contact;

    std::mt19937_64 rng(33);
    std::uniform_int_distribution<int> px(0, 255);
    std::uniform_real_distribution<double> gam(0.5, 20.0);
    auto random_frame = [&](int w, int h) {
        GrayFrame f(w, h);
        for (auto& p : f.data) p = static_cast<std::uint8_t>(px(rng));
        return f;
    };
    std::size_t negative = 0, undrained = 0, rising = 0;
    const int pairs = 10000;
    for (int k = 0; k < pairs; ++k) {
        const double gamma = gam(rng);
        const GrayFrame a = random_frame(16, 12), b = random_frame(16, 12);
        ForceGrid f(a, 4, gamma);
        f.update(b);
        for (double v : f.activation()) negative += v < 0.0;
        const double peak = *std::max_element(f.activation().begin(), f.activation().end());
        const int steps = static_cast<int>(std::ceil(peak / gamma)) + 1;
        double prev = f.total();
        for (int s = 0; s < steps; ++s) {
            f.update(b);
            for (double v : f.activation()) negative += v < 0.0;
            rising += f.total() > prev;
            prev = f.total();
        }
        undrained += f.total() != 0.0;
    }
    return {hand && negative == 0 && undrained == 0 && rising == 0,
            fmt("hand example error %.1e; over %d pairs: %zu negative cells, %zu undrained, %zu increases", hand_err,
                pairs, negative, undrained, rising)};
}

// 4. Greedy matching against the brute-force oracle.
Outcome matching_oracle() {
    std::mt19937_64 rng(44);
    std::uniform_int_distribution<std::size_t> n(0, 8);
    std::uniform_real_distribution<double> cut(1.0, 10.0);
    std::size_t agree = 0, injective = 0;
    const int instances = 1000;
    for (int k = 0; k < instances; ++k) {
        const int grid = k % 2 ? 8 : 1000;  // small grids force distance ties
        const MarkerSet o = oracle::random_points(rng, n(rng), grid);
        const MarkerSet c = oracle::random_points(rng, n(rng), grid);
        const double md = cut(rng) * (grid == 1000 ? 50.0 : 1.0);
        const Assignment a = match_points(o, c, md);
        agree += oracle::greedy_totals(o, c, md).count(a.total_distance()) == 1;
        std::set<std::size_t> so, sc;
        bool ok = true;
        for (const MatchPair& p : a.pairs) {
            ok &= so.insert(p.origin).second && sc.insert(p.current).second && p.distance <= md;
            ok &= std::abs(p.distance - oracle::dist(o[p.origin], c[p.current])) < 1e-12;
        }
        ok &= so.size() + a.unmatched_origins.size() == o.count();
        ok &= sc.size() + a.unmatched_currents.size() == c.count();
        injective += ok;
    }
    return {agree == static_cast<std::size_t>(instances) && injective == static_cast<std::size_t>(instances),
            fmt("%zu/%d totals match the oracle, %zu/%d partial injections", agree, instances, injective, instances)};
}

// 5. Direction separability.
Outcome direction() {
    const auto trials = direction_experiment(30, 5);
    std::size_t left_ok = 0, right_ok = 0;
    std::vector<double> shear, center;
    for (const DirectionTrial& t : trials) {
        if (t.label == "left") left_ok += t.average.x < 0.0;
        if (t.label == "right") right_ok += t.average.x > 0.0;
        (t.label == "center" ? center : shear).push_back(norm(t.average));
    }
    const double ratio = SlipResult::mean(center) / SlipResult::mean(shear);
    return {left_ok == 30 && right_ok == 30 && center.size() == 30 && ratio < 0.25,
            fmt("left x<0 %zu/30, right x>0 %zu/30, center/shear magnitude %.3f", left_ok, right_ok, ratio)};
}

// 6. Slip attenuation.
Outcome slip() {
    const SlipResult r = slip_experiment(30, 6);
    return {r.ratio() < 0.3, fmt("slippery/hard mean magnitude %.3f over 30 trials", r.ratio())};
}

// 7 and 8 share the pressure experiment.
const PressureExperiment& pressure() {
    static const PressureExperiment ex = pressure_experiment(500, 7);
    return ex;
}

Outcome pressure_regression() {
    const PressureEvaluation& e = pressure().evaluation;
    return {e.ridge_mae < 1.25 && e.ridge_mae < e.monotone_mae,
            fmt("held-out MAE ridge %.3f, monotone magnitude-sum %.3f (%zu test samples)", e.ridge_mae, e.monotone_mae,
                pressure().test.size())};
}

Outcome depth_divergence() {
    const auto cells = depth_sweep(pressure().markers, pressure().pressure, 100, 8);
    auto find = [&](Compliance c, double d) -> const DepthSweepCell& {
        return *std::find_if(cells.begin(), cells.end(), [&](const auto& x) { return x.surface == c && x.depth == d; });
    };
    const auto& h_lo = find(Compliance::hard, 0.2);
    const auto& s_lo = find(Compliance::soft, 0.2);
    const auto& h_hi = find(Compliance::hard, 1.0);
    const auto& s_hi = find(Compliance::soft, 1.0);
    const bool overlap = h_lo.min() <= s_lo.max() && s_lo.min() <= h_lo.max();
    const bool separate = s_hi.max() < h_hi.min() || h_hi.max() < s_hi.min();
    return {overlap && separate,
            fmt("depth 0.2: hard [%.2f, %.2f] soft [%.2f, %.2f]; depth 1.0: hard [%.2f, %.2f] soft [%.2f, %.2f]",
                h_lo.min(), h_lo.max(), s_lo.min(), s_lo.max(), h_hi.min(), h_hi.max(), s_hi.min(), s_hi.max())};
}

// 9. Texture and four-state classification at T = 10.
Outcome classification() {
    struct Job {
        TaskKind kind;
        bool held_out;
    };
    std::string detail;
    bool pass = true;
    for (const Job& j : {Job{TaskKind::lego, true}, Job{TaskKind::concrete, true}, Job{TaskKind::four_state, false}}) {
        const auto t0 = std::chrono::steady_clock::now();
        const TaskRun run = run_task(j.kind, 10, 9, task_recipe(j.kind));
        const double secs = seconds_since(t0);
        const double acc = j.held_out ? run.test.accuracy : run.train.accuracy;
        const bool ok = (j.held_out ? acc >= 0.99 : acc == 1.0) && secs < 600.0;
        pass &= ok;
        detail += fmt("%s%s %s %.2f%% (%.0f s)", detail.empty() ? "" : "; ", to_string(j.kind).c_str(),
                      j.held_out ? "held-out" : "train", 100.0 * acc, secs);
    }
    return {pass, detail};
}

// 10. Accuracy against T on the temporal task.
Outcome t_monotonicity() {
    const auto rows = task_sweep(TaskKind::temporal, 1, 10, 20, 10, task_recipe(TaskKind::temporal));
    std::vector<double> T, mean;
    for (const SweepRow& r : rows) {
        T.push_back(r.T);
        mean.push_back(r.mean);
    }
    const double rho = spearman(T, mean);
    const double gain = mean.back() - mean.front();
    std::string curve;
    for (double m : mean) curve += fmt("%s%.1f", curve.empty() ? "" : " ", 100.0 * m);
    return {rho > 0.0 && gain >= 0.05, fmt("spearman %.3f, mean(T=10)-mean(T=1) %.1f points; curve %s", rho,
                                           100.0 * gain, curve.c_str())};
}

// 11. Finite-difference gradient checks on every layer type.
Outcome gradients() {
    std::mt19937_64 rng(111);
    double worst = 0.0;
    std::size_t checked = 0;
    auto run = [&](nn::Network net, const Eigen::MatrixXd& x, std::vector<int> labels, bool training) {
        const auto r = oracle::check_network_gradients(net, x, labels, training);
        worst = std::max({worst, r.worst_param, r.worst_input});
        checked += r.checked;
    };
    run(nn::make_fnn(6, 5, 4, 3, 0.0, rng), Eigen::MatrixXd::Random(6, 4), {0, 1, 2, 1}, false);
    run(nn::make_fnn(5, 7, 6, 2, 0.4, rng), Eigen::MatrixXd::Random(5, 3), {1, 0, 1}, true);
    run(nn::make_cnn(10, 12, 2, 3, 3, 3, 0.0, rng, 4), Eigen::MatrixXd::Random(120, 2), {2, 0}, false);
    run(nn::make_cnn(8, 9, 1, 3, 2, 2, 0.3, rng, 5), Eigen::MatrixXd::Random(72, 3), {1, 0, 1}, true);
    return {worst < 1e-4, fmt("worst relative error %.2e over %zu partial derivatives", worst, checked)};
}

// 12. CLI pipeline rerun.
Outcome cli_determinism(const std::string& cli) {
    if (cli.empty() || !fs::exists(cli)) return {false, "CLI binary not found: " + cli};
    const fs::path base = fs::temp_directory_path() / "tactip_acceptance_cli";
    fs::remove_all(base);
    fs::create_directories(base);
    {
        std::ofstream s(base / "script.txt");
        s << "surface=slippery\nidle 4\npress 0.7 10\nshear 0,1 1.5 15\nrelease 10\n";
    }
    auto pipeline = [&](const std::string& name) {
        const fs::path d = base / name;
        const std::string q = "\"" + cli + "\" ";
        const std::string o = " -o \"" + d.string() + "\" > /dev/null";
        const std::string in = " -i \"" + (d / "frames.tacf").string() + "\"";
        const std::vector<std::string> cmds = {
            q + "simulate --seed 3 --trials 2 --glare --script \"" + (base / "script.txt").string() + "\"" + o,
            q + "preprocess --pgm-frame 10" + in + o,
            q + "contact" + in + o,
            q + "track" + in + o,
            q + "train-markers" + in + " --labels \"" + (d / "markers.txt").string() + "\" --copies 0" + o,
            q + "track --model \"" + (d / "markers.tacr").string() + "\"" + in + " -o \"" + (d / "model").string() +
                "\" > /dev/null",
            q + "train-classifier --seed 4 --task lego --T 3 --epochs 2 --trials-per-surface 2" + o,
            q + "eval --seed 5 --experiment slip --trials 4" + o,
        };
        int failures = 0;
        for (const auto& c : cmds) failures += std::system(c.c_str()) != 0;
        return failures;
    };
    const int fa = pipeline("a"), fb = pipeline("b");
    std::size_t files = 0, same = 0;
    for (const auto& e : fs::recursive_directory_iterator(base / "a")) {
        if (!e.is_regular_file()) continue;
        ++files;
        const fs::path other = base / "b" / fs::relative(e.path(), base / "a");
        std::ifstream x(e.path(), std::ios::binary), y(other, std::ios::binary);
        const std::string sx{std::istreambuf_iterator<char>(x), {}}, sy{std::istreambuf_iterator<char>(y), {}};
        same += fs::exists(other) && sx == sy;
    }
    return {fa == 0 && fb == 0 && files >= 15 && same == files,
            fmt("%zu/%zu output files byte-identical across reruns, %d command failures", same, files, fa + fb)};
}

} // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "";
    std::set<int> only;
    for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"closed-loop marker recovery", marker_recovery},
        {"glare handling", glare_handling},
        {"receptive-field grid oracle", contact_oracle},
        {"matching oracle", matching_oracle},
        {"direction separability", direction},
        {"slip attenuation", slip},
        {"pressure regression", pressure_regression},
        {"soft/hard divergence", depth_divergence},
        {"texture and four-state classification", classification},
        {"accuracy rises with T", t_monotonicity},
        {"gradient checks", gradients},
        {"CLI determinism", [&] { return cli_determinism(cli); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first
                  << "): " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
