#pragma once

// Deterministic synthetic TacTip.
//
// The membrane is a radial displacement field rather than a mechanical
// model: presses push markers outward from the contact centre, shear drags
// the contact patch laterally with a first-order lag, and contact with a
// textured surface adds per-marker jitter. Rendering draws anti-aliased
// white discs on a dark background with optional static glare and noise.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "tactip/datasets.hpp"
#include "tactip/imagery.hpp"
#include "tactip/tracking.hpp"

namespace tactip {

enum class SurfaceKind { hard, soft, slippery, lego, concrete, smooth_wood };

inline const char* to_string(SurfaceKind k) {
    switch (k) {
    case SurfaceKind::hard: return "hard";
    case SurfaceKind::soft: return "soft";
    case SurfaceKind::slippery: return "slippery";
    case SurfaceKind::lego: return "lego";
    case SurfaceKind::concrete: return "concrete";
    case SurfaceKind::smooth_wood: return "smooth_wood";
    }
    return "?";
}

struct Texture {
    double amplitude = 0.0;    // px
    double period = 0.0;       // px; > 0 periodic along the slide, 0 random
    double persistence = 0.0;  // AR(1) coefficient for random textures, [0, 1)
    bool shared = false;       // random textures: one jitter vector for the whole membrane
};

struct SurfaceSpec {
    SurfaceKind kind = SurfaceKind::hard;
    std::string name = "hard";  // manifest label while in contact
    double compliance = 0.0;    // displacement attenuation, [0, 1]
    double slip_coupling = 1.0; // fraction of shear transferred, [0, 1]
    Texture texture;

    static SurfaceSpec preset(SurfaceKind kind) {
        SurfaceSpec s;
        s.kind = kind;
        s.name = to_string(kind);
        switch (kind) {
        case SurfaceKind::hard: break;
        case SurfaceKind::soft:
            s.compliance = 0.5;
            s.slip_coupling = 0.8;
            break;
        case SurfaceKind::slippery: s.slip_coupling = 0.2; break;
        case SurfaceKind::lego: s.texture = {3.0, 8.0, 0.0}; break;
        case SurfaceKind::concrete: s.texture = {0.8, 0.0, 0.0}; break;
        case SurfaceKind::smooth_wood: s.slip_coupling = 0.9; break;
        }
        return s;
    }

    static SurfaceSpec parse(const std::string& name) {
        for (SurfaceKind k : {SurfaceKind::hard, SurfaceKind::soft, SurfaceKind::slippery, SurfaceKind::lego,
                              SurfaceKind::concrete, SurfaceKind::smooth_wood})
            if (name == to_string(k)) return preset(k);
        throw ScriptError("unknown surface \"" + name + "\"");
    }

    void validate() const {
        if (compliance < 0.0 || compliance > 1.0) throw ParameterError("surface compliance must be in [0, 1]");
        if (slip_coupling < 0.0 || slip_coupling > 1.0) throw ParameterError("surface slip_coupling must be in [0, 1]");
        if (texture.amplitude < 0.0 || texture.persistence < 0.0 || texture.persistence >= 1.0)
            throw ParameterError("surface texture amplitude must be >= 0 and persistence in [0, 1)");
        if (kind == SurfaceKind::hard && compliance != 0.0) throw ParameterError("hard surfaces have no compliance");
        if (kind == SurfaceKind::slippery && slip_coupling >= 0.3)
            throw ParameterError("slippery surfaces need slip_coupling < 0.3");
        const bool smooth = kind == SurfaceKind::hard || kind == SurfaceKind::soft || kind == SurfaceKind::slippery ||
                            kind == SurfaceKind::smooth_wood;
        if (smooth && texture.amplitude != 0.0) throw ParameterError("smooth surfaces carry no texture jitter");
    }
};

struct Glare {
    Point center{34.0, 30.0};
    double area = 250.0;  // px
};

struct SensorConfig {
    int width = 128;
    int height = 128;
    std::size_t marker_count = kMarkerCount;
    double spacing = 8.5;        // rest lattice pitch, px
    double marker_radius = 2.5;  // px
    double background = 30.0;
    double marker_intensity = 230.0;
    double pixel_noise = 2.0;    // std, grey levels
    double marker_jitter = 0.0;  // std, px, independent per marker and frame
    std::optional<Glare> glare;
    std::uint64_t seed = 0;

    Point center() const { return {(width - 1) / 2.0, (height - 1) / 2.0}; }
};

/// Constants of the displacement model.
struct MembraneParams {
    double press_gain = 3.5;       // peak outward displacement at 1 cm on a rigid surface, px
    double press_sigma = 25.0;     // radius of peak outward displacement, px
    double contact_sigma = 40.0;   // width of the shear/texture contact patch, px
    double depth_rate = 0.5;       // per-frame approach to commanded depth
    double shear_rate = 0.25;      // per-frame approach to steady shear offset
    double release_rate = 0.5;     // per-frame relaxation after release
    double depth_repeatability = 0.05;  // std of achieved depth, cm
    double force_per_cm = 100.0;   // normalised force units
};

/// Hexagonal lattice points nearest the image centre, ordered by (y, x).
inline std::vector<Point> rest_layout(const SensorConfig& cfg) {
    const Point c = cfg.center();
    const double row_h = cfg.spacing * std::sqrt(3.0) / 2.0;
    const int reach = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cfg.marker_count)))) + 2;
    struct Candidate {
        Point p;
        double r2;
        double angle;
    };
    std::vector<Candidate> pts;
    for (int j = -reach; j <= reach; ++j)
        for (int i = -reach; i <= reach; ++i) {
            const Point off{cfg.spacing * (i + 0.5 * j), row_h * j};
            // Round so symmetric lattice points compare equal.
            const double r2 = std::round((off.x * off.x + off.y * off.y) * 1e6) / 1e6;
            pts.push_back({c + off, r2, std::atan2(off.y, off.x)});
        }
    std::sort(pts.begin(), pts.end(), [](const Candidate& a, const Candidate& b) {
        return a.r2 != b.r2 ? a.r2 < b.r2 : a.angle < b.angle;
    });
    if (pts.size() < cfg.marker_count) throw ParameterError("rest_layout: lattice too small");
    // The outermost ring is usually only partly used; spread the chosen
    // points evenly in angle so the layout stays centred.
    const double cut = pts[cfg.marker_count - 1].r2;
    const auto ring_begin = static_cast<std::size_t>(
        std::find_if(pts.begin(), pts.end(), [&](const Candidate& c) { return c.r2 == cut; }) - pts.begin());
    const auto ring_end = static_cast<std::size_t>(
        std::find_if(pts.begin() + static_cast<std::ptrdiff_t>(ring_begin), pts.end(),
                     [&](const Candidate& c) { return c.r2 != cut; }) - pts.begin());
    std::vector<Candidate> chosen(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(ring_begin));
    const std::size_t need = cfg.marker_count - ring_begin;
    const std::size_t ring = ring_end - ring_begin;
    for (std::size_t k = 0; k < need; ++k) chosen.push_back(pts[ring_begin + k * ring / need]);

    std::vector<Point> out;
    for (const Candidate& cand : chosen) {
        const Point p = cand.p;
        const double margin = 2.0 * cfg.marker_radius;
        if (p.x < margin || p.y < margin || p.x > cfg.width - 1 - margin || p.y > cfg.height - 1 - margin)
            throw ParameterError("rest_layout: markers do not fit the frame");
        out.push_back(p);
    }
    std::sort(out.begin(), out.end(), [](Point a, Point b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
    return out;
}

// ---- Stimulus scripts ----

struct Idle {};
struct Press {
    double depth = 0.0;  // cm
};
struct Shear {
    Point direction{1.0, 0.0};  // unit vector in image coordinates
    double speed = 1.0;         // px per frame
};
struct Release {};

using Action = std::variant<Idle, Press, Shear, Release>;

struct ScriptStep {
    int duration = 1;
    Action action;
};

struct StimulusScript {
    SurfaceSpec surface;
    std::vector<ScriptStep> steps;

    int frame_count() const {
        int n = 0;
        for (const auto& s : steps) n += s.duration;
        return n;
    }

    /// Durations >= 1, depths in [0, 1] cm, no shear outside a press.
    void validate() const {
        surface.validate();
        bool pressed = false;
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const ScriptStep& s = steps[i];
            const std::string where = "step " + std::to_string(i + 1);
            if (s.duration < 1) throw ScriptError(where + ": duration must be >= 1");
            if (const auto* p = std::get_if<Press>(&s.action)) {
                if (p->depth < 0.0 || p->depth > 1.0) throw ScriptError(where + ": press depth must be in [0, 1] cm");
                pressed = true;
            } else if (const auto* sh = std::get_if<Shear>(&s.action)) {
                if (!pressed) throw ScriptError(where + ": shear before press");
                if (std::abs(norm(sh->direction) - 1.0) > 1e-6) throw ScriptError(where + ": shear direction must be a unit vector");
                if (sh->speed < 0.0) throw ScriptError(where + ": shear speed must be >= 0");
            } else if (std::holds_alternative<Release>(s.action)) {
                pressed = false;
            }
        }
    }
};

/// Line format: "surface=lego", "press 0.4 30", "shear 1,0 2 60",
/// "release 20", "idle 10". Blank lines and '#' comments are ignored.
inline StimulusScript parse_script(std::istream& in, const std::string& name = "<script>") {
    StimulusScript script;
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& msg) { throw ScriptError(name + ":" + std::to_string(lineno) + ": " + msg); };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string word;
        if (!(ss >> word)) continue;
        ScriptStep step;
        if (word.rfind("surface=", 0) == 0) {
            script.surface = SurfaceSpec::parse(word.substr(8));
            continue;
        } else if (word == "idle") {
            step.action = Idle{};
        } else if (word == "release") {
            step.action = Release{};
        } else if (word == "press") {
            Press p;
            if (!(ss >> p.depth)) fail("press needs a depth");
            step.action = p;
        } else if (word == "shear") {
            std::string dir;
            Shear s;
            if (!(ss >> dir >> s.speed)) fail("shear needs direction and speed");
            const auto comma = dir.find(',');
            if (comma == std::string::npos) fail("shear direction must be dx,dy");
            try {
                s.direction = {std::stod(dir.substr(0, comma)), std::stod(dir.substr(comma + 1))};
            } catch (const std::exception&) {
                fail("bad shear direction \"" + dir + "\"");
            }
            const double n = norm(s.direction);
            if (n == 0.0) fail("shear direction is zero");
            s.direction = (1.0 / n) * s.direction;
            step.action = s;
        } else {
            fail("unknown action \"" + word + "\"");
        }
        if (!(ss >> step.duration)) fail("missing duration");
        std::string extra;
        if (ss >> extra) fail("trailing text \"" + extra + "\"");
        script.steps.push_back(step);
    }
    script.validate();
    return script;
}

inline StimulusScript parse_script(const std::string& text) {
    std::istringstream in(text);
    return parse_script(in);
}

inline StimulusScript load_script(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return parse_script(in, path);
}

// ---- Simulation ----

struct FrameTruth {
    std::vector<Point> markers;
    double force = 0.0;       // normalised, [0, 100]
    Point average_displacement;
    bool contact = false;
};

class Simulator {
public:
    Simulator(SensorConfig config, SurfaceSpec surface, std::uint64_t seed, MembraneParams params = {})
        : cfg_(std::move(config)), surface_(std::move(surface)), params_(params), rest_(rest_layout(cfg_)),
          texture_(rest_.size()), rng_(seed) {
        surface_.validate();
    }

    const std::vector<Point>& rest() const { return rest_; }
    const SensorConfig& config() const { return cfg_; }
    const SurfaceSpec& surface() const { return surface_; }

    /// Offset the contact centre from the image centre for subsequent frames.
    void set_contact_offset(Point offset) { contact_offset_ = offset; }

    /// Advance one frame under `action`.
    FrameTruth step(const Action& action) {
        Point shear_target;
        if (const auto* p = std::get_if<Press>(&action)) {
            if (!pressed_ || p->depth != commanded_) {
                std::normal_distribution<double> err(0.0, params_.depth_repeatability);
                achieved_ = p->depth > 0.0 ? std::clamp(p->depth + err(rng_), 0.0, 1.2) : 0.0;
                commanded_ = p->depth;
            }
            pressed_ = true;
        } else if (const auto* s = std::get_if<Shear>(&action)) {
            if (!pressed_) throw ScriptError("shear before press");
            shear_target = (surface_.slip_coupling * s->speed) * s->direction;
            slide_ += s->speed;
        } else if (std::holds_alternative<Release>(action)) {
            pressed_ = false;
            commanded_ = achieved_ = 0.0;
        }

        if (pressed_) {
            depth_ += params_.depth_rate * (achieved_ - depth_);
            shear_ = shear_ + params_.shear_rate * (shear_target - shear_);
        } else {
            depth_ *= 1.0 - params_.release_rate;
            shear_ = (1.0 - params_.release_rate) * shear_;
        }
        update_texture();

        FrameTruth truth;
        truth.contact = pressed_;
        truth.force = pressed_ ? std::clamp(params_.force_per_cm * depth_ * (1.0 - surface_.compliance), 0.0, 100.0) : 0.0;
        const Point centre = cfg_.center() + contact_offset_;
        const double press = params_.press_gain * depth_ * (1.0 - surface_.compliance);
        std::normal_distribution<double> jitter(0.0, cfg_.marker_jitter);
        truth.markers.reserve(rest_.size());
        Point total;
        for (std::size_t i = 0; i < rest_.size(); ++i) {
            const Point q = rest_[i] - centre;
            const double r = norm(q);
            Point d;
            if (r > 0.0 && press != 0.0) {
                const double u = r / params_.press_sigma;
                d = (press * u * std::exp(0.5 * (1.0 - u * u)) / r) * q;
            }
            const double patch = std::exp(-r * r / (2.0 * params_.contact_sigma * params_.contact_sigma));
            d = d + patch * shear_;
            if (pressed_) d = d + patch * texture_[i];
            if (cfg_.marker_jitter > 0.0) d = d + Point{jitter(rng_), jitter(rng_)};
            Point p = rest_[i] + d;
            p.x = std::clamp(p.x, cfg_.marker_radius, cfg_.width - 1 - cfg_.marker_radius);
            p.y = std::clamp(p.y, cfg_.marker_radius, cfg_.height - 1 - cfg_.marker_radius);
            total = total + (p - rest_[i]);
            truth.markers.push_back(p);
        }
        truth.average_displacement = (1.0 / static_cast<double>(rest_.size())) * total;
        return truth;
    }

    GrayFrame render(std::span<const Point> markers, std::int64_t timestamp = 0) {
        return render_markers(markers, cfg_, rng_, timestamp);
    }

    /// Draw markers, glare and pixel noise. Noise is drawn from `rng`.
    static GrayFrame render_markers(std::span<const Point> markers, const SensorConfig& cfg, std::mt19937_64& rng,
                                    std::int64_t timestamp = 0) {
        std::vector<double> img(static_cast<std::size_t>(cfg.width) * cfg.height, cfg.background);
        auto paint_disc = [&](Point c, double radius, double intensity) {
            const int x0 = std::max(0, static_cast<int>(std::floor(c.x - radius - 1)));
            const int x1 = std::min(cfg.width - 1, static_cast<int>(std::ceil(c.x + radius + 1)));
            const int y0 = std::max(0, static_cast<int>(std::floor(c.y - radius - 1)));
            const int y1 = std::min(cfg.height - 1, static_cast<int>(std::ceil(c.y + radius + 1)));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const double cover = std::clamp(radius + 0.5 - std::hypot(x - c.x, y - c.y), 0.0, 1.0);
                    double& v = img[static_cast<std::size_t>(y) * cfg.width + x];
                    v = std::max(v, cfg.background + cover * (intensity - cfg.background));
                }
        };
        for (const Point& m : markers) paint_disc(m, cfg.marker_radius, cfg.marker_intensity);
        if (cfg.glare) paint_disc(cfg.glare->center, std::sqrt(cfg.glare->area / std::numbers::pi), 255.0);

        GrayFrame out(cfg.width, cfg.height, 0, timestamp);
        std::normal_distribution<double> noise(0.0, cfg.pixel_noise);
        for (std::size_t i = 0; i < img.size(); ++i) {
            const double v = img[i] + (cfg.pixel_noise > 0.0 ? noise(rng) : 0.0);
            out.data[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
        return out;
    }

private:
    // Periodic textures are a fixed relief whose phase follows the slide
    // distance; random textures are redrawn every frame in contact.
    void update_texture() {
        const Texture& t = surface_.texture;
        if (!pressed_ || t.amplitude == 0.0) {
            texture_started_ = false;
            return;
        }
        if (t.period > 0.0) {
            const double w = 2.0 * std::numbers::pi / t.period;
            for (std::size_t i = 0; i < rest_.size(); ++i)
                texture_[i] = {t.amplitude * std::sin(w * (rest_[i].x + slide_)),
                               t.amplitude * std::sin(w * (rest_[i].y + 0.5 * slide_) + 1.0)};
            return;
        }
        std::normal_distribution<double> n(0.0, t.amplitude);
        // Start from the stationary distribution so every frame has the same marginal.
        const double keep = texture_started_ ? t.persistence : 0.0;
        const double fresh = std::sqrt(1.0 - keep * keep);
        if (t.shared) {
            const Point j{keep * texture_[0].x + fresh * n(rng_), keep * texture_[0].y + fresh * n(rng_)};
            std::fill(texture_.begin(), texture_.end(), j);
        } else {
            for (Point& j : texture_) j = Point{keep * j.x + fresh * n(rng_), keep * j.y + fresh * n(rng_)};
        }
        texture_started_ = true;
    }

    SensorConfig cfg_;
    SurfaceSpec surface_;
    MembraneParams params_;
    std::vector<Point> rest_;
    std::vector<Point> texture_;
    std::mt19937_64 rng_;
    bool pressed_ = false;
    bool texture_started_ = false;
    double commanded_ = 0.0;
    double achieved_ = 0.0;
    double depth_ = 0.0;
    double slide_ = 0.0;
    Point shear_;
    Point contact_offset_;
};

struct Recording {
    FrameContainer container;
    Manifest manifest;
    std::vector<std::vector<Point>> markers;  // ground truth per frame
};

/// Run `script` for `trials` repetitions. Trial k uses seed + k and trial id
/// first_trial + k; frame indices run on across trials.
inline Recording generate_dataset(const StimulusScript& script, const SensorConfig& config, std::uint64_t seed,
                                  int trials = 1, std::int64_t first_trial = 0, const MembraneParams& params = {}) {
    script.validate();
    Recording rec;
    rec.container.width = config.width;
    rec.container.height = config.height;
    std::int64_t frame = 0;
    for (int k = 0; k < trials; ++k) {
        Simulator sim(config, script.surface, seed + static_cast<std::uint64_t>(k), params);
        for (const ScriptStep& step : script.steps)
            for (int i = 0; i < step.duration; ++i) {
                FrameTruth t = sim.step(step.action);
                rec.container.frames.push_back(sim.render(t.markers, frame));
                ManifestRow row;
                row.frame_index = frame++;
                row.trial_id = first_trial + k;
                row.label = t.contact ? script.surface.name : "no_touch";
                if (t.contact) row.pressure = t.force;
                row.contact = t.contact;
                row.disp_x = t.average_displacement.x;
                row.disp_y = t.average_displacement.y;
                rec.manifest.rows.push_back(std::move(row));
                rec.markers.push_back(std::move(t.markers));
            }
    }
    return rec;
}

/// Concatenate recordings, renumbering frames so indices stay increasing.
inline void append_recording(Recording& into, Recording&& more) {
    if (into.container.frames.empty()) {
        into.container.width = more.container.width;
        into.container.height = more.container.height;
    } else if (into.container.width != more.container.width || into.container.height != more.container.height) {
        throw ParameterError("append_recording: frame size mismatch");
    }
    const auto base = static_cast<std::int64_t>(into.container.frames.size());
    for (std::size_t i = 0; i < more.container.frames.size(); ++i) {
        more.container.frames[i].timestamp = base + static_cast<std::int64_t>(i);
        more.manifest.rows[i].frame_index = base + static_cast<std::int64_t>(i);
        into.container.frames.push_back(std::move(more.container.frames[i]));
        into.manifest.rows.push_back(std::move(more.manifest.rows[i]));
        into.markers.push_back(std::move(more.markers[i]));
    }
}

} // namespace tactip
