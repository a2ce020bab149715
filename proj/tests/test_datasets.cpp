#include <gtest/gtest.h>

#include <filesystem>
#include <memory>
#include <sstream>

#include "tactip/experiments.hpp"

using namespace tactip;

namespace {

Manifest session(int trials, const std::vector<std::string>& labels, int frames_per_trial = 6) {
    Manifest m;
    std::int64_t f = 0;
    for (int t = 0; t < trials; ++t) {
        const std::string& l = labels[static_cast<std::size_t>(t) % labels.size()];
        for (int i = 0; i < frames_per_trial; ++i) {
            ManifestRow r;
            r.frame_index = f++;
            r.trial_id = t;
            r.label = (i == 0 || i == frames_per_trial - 1) ? "no_touch" : l;
            r.contact = r.label != "no_touch";
            if (r.contact) r.pressure = 10.0 * i;
            m.rows.push_back(r);
        }
    }
    return m;
}

struct Flags {
    std::unique_ptr<bool[]> data;
    std::size_t size;
    std::span<const bool> span() const { return {data.get(), size}; }
};

Flags flags_of(const Manifest& m, bool all = false, bool value = false) {
    Flags f{std::make_unique<bool[]>(m.rows.size()), m.rows.size()};
    for (std::size_t i = 0; i < m.rows.size(); ++i) f.data[i] = all ? value : m.rows[i].contact;
    return f;
}

std::string temp(const std::string& name) { return (std::filesystem::temp_directory_path() / name).string(); }

} // namespace

TEST(Container, SaveLoadIsByteIdentical) {
    FrameContainer c{6, 4, {}};
    for (int i = 0; i < 10; ++i) {
        GrayFrame f(6, 4, static_cast<std::uint8_t>(i * 20), i);
        f.at(i % 6, i % 4) = 255;
        c.frames.push_back(f);
    }
    const std::string path = temp("tactip_container.tacf");
    save_container(c, path);
    const FrameContainer back = load_container(path);
    EXPECT_EQ(encode_container(back), encode_container(c));
    EXPECT_EQ(back.frames.size(), 10u);
    std::filesystem::remove(path);
}

TEST(Container, CorruptBytesGiveOffsets) {
    FrameContainer c{2, 2, {GrayFrame(2, 2, 1)}};
    auto bytes = encode_container(c);
    auto bad = bytes;
    bad[1] = 'Z';
    try {
        decode_container(bad);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset, 0u);
    }
    auto version = bytes;
    version[4] = 9;
    try {
        decode_container(version);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset, 4u);
    }
    auto cut = bytes;
    cut.pop_back();
    EXPECT_THROW(decode_container(cut), FormatError);
    cut.push_back(0);
    cut.push_back(0);
    EXPECT_THROW(decode_container(cut), FormatError);
}

TEST(Manifest, RoundTripThroughCsv) {
    const Manifest m = session(3, {"soft", "hard"});
    std::stringstream ss;
    write_manifest(ss, m);
    EXPECT_EQ(read_manifest(ss), m);
}

TEST(Manifest, MalformedCsvIsAFormatError) {
    std::stringstream header_only(std::string(kManifestHeader) + "\n0,0,soft,abc,1,0,0\n");
    EXPECT_THROW(read_manifest(header_only), FormatError);
    std::stringstream wrong_header("a,b\n");
    EXPECT_THROW(read_manifest(wrong_header), FormatError);
}

TEST(Validate, ReportsUnknownLabelsAndOrder) {
    Manifest m = session(2, {"soft"});
    FrameContainer c{2, 2, std::vector<GrayFrame>(m.rows.size(), GrayFrame(2, 2))};
    EXPECT_TRUE(validate(m, c).ok());
    m.rows[4].label = "wet";
    std::swap(m.rows[7].frame_index, m.rows[8].frame_index);
    c.frames.pop_back();
    const ValidationReport r = validate(m, c);
    ASSERT_GE(r.findings.size(), 3u);
    bool named = false;
    for (const auto& f : r.findings) named |= f.find("row 4") != std::string::npos && f.find("wet") != std::string::npos;
    EXPECT_TRUE(named);
}

TEST(Vocabulary, AddRejectsBadNames) {
    LabelVocabulary v;
    EXPECT_TRUE(v.contains("no_touch"));
    EXPECT_FALSE(v.contains("jitter_fast"));
    v.add("jitter_fast");
    EXPECT_TRUE(v.contains("jitter_fast"));
    EXPECT_THROW(v.add("a,b"), ParameterError);
    EXPECT_THROW(v.add(""), ParameterError);
}

TEST(GateAndSplit, AllNoContactIsADataError) {
    Manifest m = session(4, {"soft"});
    for (auto& r : m.rows) r.label = "soft";
    const Flags none = flags_of(m, true, false);
    EXPECT_THROW(gate_and_split(m, none.span(), 1, 0), DataError);
}

TEST(GateAndSplit, WholeTrialsOnEachSide) {
    const Manifest m = session(4, {"soft", "hard"});  // two trials per class
    const Flags f = flags_of(m);
    const Split s = gate_and_split(m, f.span(), 2, 5, {0.5, {}});
    std::set<std::int64_t> train, test;
    for (std::size_t i : s.train) train.insert(m.rows[i].trial_id);
    for (std::size_t i : s.test) test.insert(m.rows[i].trial_id);
    for (std::int64_t t : test) EXPECT_FALSE(train.count(t));
    EXPECT_EQ(test.size(), 2u);
    // Every held-out trial contributes all of its candidates.
    const auto cands = gate_candidates(m, f.span(), 2);
    EXPECT_EQ(s.train.size() + s.test.size(), cands.size());
}

TEST(GateAndSplit, CandidatesNeedPredecessorsAndAgreeingFlags) {
    const Manifest m = session(2, {"soft"}, 6);
    const Flags f = flags_of(m);
    // Contact rows are 1..4 of each trial; T = 3 needs two earlier rows in the trial.
    const auto c = gate_candidates(m, f.span(), 3);
    std::vector<std::size_t> expect;
    for (std::size_t t = 0; t < 2; ++t)
        for (std::size_t i : {2, 3, 4, 5}) expect.push_back(t * 6 + i);  // row 5 is a gated no_touch row
    EXPECT_EQ(c, expect);
    EXPECT_THROW(gate_candidates(m, std::span<const bool>(f.data.get(), 3), 1), DataError);
}

TEST(GateAndSplit, SameSeedSameSplit) {
    const Manifest m = session(12, {"soft", "hard", "slippery"});
    const Flags f = flags_of(m);
    const Split a = gate_and_split(m, f.span(), 2, 77);
    const Split b = gate_and_split(m, f.span(), 2, 77);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
}

TEST(TaskStacks, FourStateIncludesNoTouch) {
    const TaskSpec spec = task_spec(TaskKind::four_state);
    ASSERT_EQ(spec.classes.size(), 4u);
    TaskRecipe r = task_recipe(TaskKind::four_state);
    r.slide.legs = 2;
    const Recording rec = task_recording(spec, 2, 3, SensorConfig{}, r.slide);
    EXPECT_TRUE(validate(rec.manifest, rec.container, task_vocabulary(spec)).ok());
    const TaskStacks st = task_stacks(task_features(rec, r.features), 3, 1, spec.classes);
    std::set<std::string> seen;
    for (const auto& s : st.train) seen.insert(s.label);
    for (const auto& s : st.test) seen.insert(s.label);
    EXPECT_EQ(seen, std::set<std::string>(spec.classes.begin(), spec.classes.end()));
    for (const auto& s : st.train) EXPECT_EQ(s.height(), 3 * 32);
}
