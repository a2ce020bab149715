#pragma once

// Frame containers, manifests, label vocabularies and trial-level splits.
//
// Container layout (all integers little-endian):
//   "TACF" | version u8 | width u16 | height u16 | frame_count u32 | frames
// where each frame is width*height raw row-major bytes.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tactip/binary_io.hpp"
#include "tactip/imagery.hpp"

namespace tactip {

inline constexpr std::uint8_t kContainerVersion = 1;

struct FrameContainer {
    int width = 0;
    int height = 0;
    std::vector<GrayFrame> frames;

    friend bool operator==(const FrameContainer&, const FrameContainer&) = default;
};

inline std::vector<std::uint8_t> encode_container(const FrameContainer& c) {
    if (c.width <= 0 || c.height <= 0 || c.width > 0xFFFF || c.height > 0xFFFF)
        throw ParameterError("container dimensions must fit in u16 and be positive");
    ByteWriter w;
    w.magic("TACF");
    w.u8(kContainerVersion);
    w.u16(static_cast<std::uint16_t>(c.width));
    w.u16(static_cast<std::uint16_t>(c.height));
    w.u32(static_cast<std::uint32_t>(c.frames.size()));
    for (const GrayFrame& f : c.frames) {
        if (f.width != c.width || f.height != c.height) throw ParameterError("container frame has wrong dimensions");
        w.bytes(f.data.data(), f.data.size());
    }
    return w.data();
}

inline FrameContainer decode_container(std::vector<std::uint8_t> bytes, const std::string& name = "<memory>") {
    ByteReader r(std::move(bytes), name);
    r.expect_magic("TACF");
    const std::size_t version_at = r.position();
    if (const std::uint8_t v = r.u8(); v != kContainerVersion)
        throw FormatError(name + ": unsupported container version " + std::to_string(v), version_at);
    FrameContainer c;
    c.width = r.u16();
    c.height = r.u16();
    if (c.width == 0 || c.height == 0) throw FormatError(name + ": zero frame dimension", r.position());
    const std::uint32_t count = r.u32();
    const std::size_t frame_bytes = static_cast<std::size_t>(c.width) * c.height;
    if (r.remaining() != frame_bytes * count)
        throw FormatError(name + ": payload holds " + std::to_string(r.remaining()) + " bytes, header promises " +
                              std::to_string(frame_bytes * count),
                          r.position() + std::min(r.remaining(), frame_bytes * count));
    c.frames.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        GrayFrame f(c.width, c.height, 0, i);
        r.bytes(f.data.data(), frame_bytes);
        c.frames.push_back(std::move(f));
    }
    return c;
}

inline void save_container(const FrameContainer& c, const std::string& path) {
    ByteWriter w;
    const auto bytes = encode_container(c);
    w.bytes(bytes.data(), bytes.size());
    w.save(path);
}

inline FrameContainer load_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_container(std::move(data), path);
}

// ---- Labels ----

class LabelVocabulary {
public:
    LabelVocabulary() : labels_{"soft", "hard", "slippery", "no_touch", "lego", "concrete", "smooth_wood"} {}

    void add(const std::string& label) {
        if (label.empty() || label.find_first_of(", \t\n") != std::string::npos)
            throw ParameterError("invalid label \"" + label + "\"");
        labels_.insert(label);
    }
    bool contains(const std::string& label) const { return labels_.count(label) != 0; }
    const std::set<std::string>& labels() const { return labels_; }

private:
    std::set<std::string> labels_;
};

// ---- Manifest ----

struct ManifestRow {
    std::int64_t frame_index = 0;
    std::int64_t trial_id = 0;
    std::string label;
    std::optional<double> pressure;
    bool contact = false;
    double disp_x = 0.0;
    double disp_y = 0.0;

    friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

struct Manifest {
    std::vector<ManifestRow> rows;

    friend bool operator==(const Manifest&, const Manifest&) = default;
};

inline constexpr const char* kManifestHeader = "frame_index,trial_id,label,pressure,contact,disp_x,disp_y";

inline std::string format_double(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

inline void write_manifest(std::ostream& out, const Manifest& m) {
    out << kManifestHeader << '\n';
    for (const ManifestRow& r : m.rows) {
        out << r.frame_index << ',' << r.trial_id << ',' << r.label << ','
            << (r.pressure ? format_double(*r.pressure) : std::string()) << ',' << (r.contact ? 1 : 0) << ','
            << format_double(r.disp_x) << ',' << format_double(r.disp_y) << '\n';
    }
}

inline void save_manifest(const Manifest& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_manifest(out, m);
}

inline Manifest read_manifest(std::istream& in, const std::string& name = "<manifest>") {
    std::string line;
    if (!std::getline(in, line) || line != kManifestHeader) throw FormatError(name + ": missing manifest header", 0);
    Manifest m;
    std::size_t lineno = 1;
    std::uint64_t offset = line.size() + 1;
    while (std::getline(in, line)) {
        ++lineno;
        const std::uint64_t row_offset = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (cells.size() != 7)
            throw FormatError(name + ": line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                                  " fields, expected 7",
                              row_offset);
        try {
            ManifestRow r;
            r.frame_index = std::stoll(cells[0]);
            r.trial_id = std::stoll(cells[1]);
            r.label = cells[2];
            if (!cells[3].empty()) r.pressure = std::stod(cells[3]);
            if (cells[4] != "0" && cells[4] != "1") throw std::invalid_argument("contact");
            r.contact = cells[4] == "1";
            r.disp_x = std::stod(cells[5]);
            r.disp_y = std::stod(cells[6]);
            m.rows.push_back(std::move(r));
        } catch (const std::exception&) {
            throw FormatError(name + ": line " + std::to_string(lineno) + " is malformed", row_offset);
        }
    }
    return m;
}

inline Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_manifest(in, path);
}

struct ValidationReport {
    std::vector<std::string> findings;

    bool ok() const { return findings.empty(); }
};

inline ValidationReport validate(const Manifest& manifest, const FrameContainer& container,
                                 const LabelVocabulary& vocab = {}) {
    ValidationReport report;
    if (manifest.rows.size() != container.frames.size())
        report.findings.push_back("manifest has " + std::to_string(manifest.rows.size()) + " rows but container has " +
                                  std::to_string(container.frames.size()) + " frames");
    for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
        const ManifestRow& r = manifest.rows[i];
        if (!vocab.contains(r.label))
            report.findings.push_back("row " + std::to_string(i) + ": unknown label \"" + r.label + "\"");
        if (i > 0 && r.frame_index <= manifest.rows[i - 1].frame_index)
            report.findings.push_back("row " + std::to_string(i) + ": frame_index " + std::to_string(r.frame_index) +
                                      " is not strictly increasing");
        if (r.frame_index < 0 || (r.frame_index >= static_cast<std::int64_t>(container.frames.size())))
            report.findings.push_back("row " + std::to_string(i) + ": frame_index " + std::to_string(r.frame_index) +
                                      " outside container");
        if (r.pressure && *r.pressure < 0.0)
            report.findings.push_back("row " + std::to_string(i) + ": negative pressure");
    }
    return report;
}

// ---- Gating and splitting ----

struct Split {
    std::vector<std::size_t> train;  // manifest row indices
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
};

struct SplitSpec {
    double test_fraction = 0.25;
    std::vector<std::string> classes;  // empty: every label present
};

/// A trial is keyed by its first label other than no_touch.
inline std::map<std::int64_t, std::string> trial_labels(const Manifest& m) {
    std::map<std::int64_t, std::string> out;
    for (const ManifestRow& r : m.rows) {
        auto [it, inserted] = out.emplace(r.trial_id, r.label);
        if (!inserted && it->second == "no_touch" && r.label != "no_touch") it->second = r.label;
    }
    return out;
}

/// Rows that may end a T-frame stack: the contact flag must agree with the
/// label (set for touch labels, clear for no_touch) and the same trial must
/// hold at least T-1 earlier rows.
inline std::vector<std::size_t> gate_candidates(const Manifest& m, std::span<const bool> flags, int T,
                                                const std::vector<std::string>& classes = {}) {
    if (flags.size() != m.rows.size()) throw DataError("gate: contact flags are not aligned with manifest rows");
    if (T < 1) throw ParameterError("gate: T must be >= 1");
    std::vector<std::size_t> out;
    std::size_t trial_start = 0;
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        if (i == 0 || m.rows[i].trial_id != m.rows[i - 1].trial_id) trial_start = i;
        const ManifestRow& r = m.rows[i];
        if (!classes.empty() && std::find(classes.begin(), classes.end(), r.label) == classes.end()) continue;
        const bool want_contact = r.label != "no_touch";
        if (flags[i] != want_contact) continue;
        if (i - trial_start + 1 < static_cast<std::size_t>(T)) continue;
        out.push_back(i);
    }
    return out;
}

inline Split gate_and_split(const Manifest& m, std::span<const bool> flags, int T, std::uint64_t seed,
                            const SplitSpec& spec = {}) {
    const std::vector<std::size_t> candidates = gate_candidates(m, flags, T, spec.classes);
    if (candidates.empty()) throw DataError("gate_and_split: no contact-gated candidates");

    // Stratify whole trials by their label.
    const auto labels = trial_labels(m);
    std::map<std::string, std::vector<std::int64_t>> by_label;
    std::set<std::int64_t> seen;
    for (std::size_t i : candidates) {
        const std::int64_t t = m.rows[i].trial_id;
        if (seen.insert(t).second) by_label[labels.at(t)].push_back(t);
    }
    std::mt19937_64 rng(seed);
    std::set<std::int64_t> test_trials;
    for (auto& [label, trials] : by_label) {
        std::shuffle(trials.begin(), trials.end(), rng);
        if (trials.size() < 2) continue;
        auto k = static_cast<std::size_t>(std::ceil(spec.test_fraction * static_cast<double>(trials.size())));
        k = std::clamp<std::size_t>(k, 1, trials.size() - 1);
        test_trials.insert(trials.begin(), trials.begin() + static_cast<std::ptrdiff_t>(k));
    }
    Split split;
    split.seed = seed;
    for (std::size_t i : candidates) (test_trials.count(m.rows[i].trial_id) ? split.test : split.train).push_back(i);
    return split;
}

} // namespace tactip
