#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cvoam/segmenter.hpp"
#include "test_util.hpp"

using namespace cvoam;
using testutil::TempDir;

namespace {

AlignmentTrack make_track(std::vector<PhoneInterval> intervals) {
    AlignmentTrack t;
    t.utterance_id = "t";
    t.intervals = std::move(intervals);
    return t;
}

}  // namespace

TEST_CASE("find_vowel_onsets: basic CV detection") {
    PhoneInventory inv = PhoneInventory::defaults();
    auto onsets = find_vowel_onsets(make_track({{"P", 0.0, 0.08}, {"ER", 0.08, 0.2}}), inv);
    REQUIRE(onsets.size() == 1);
    CHECK(onsets[0].time_s == doctest::Approx(0.08));
    CHECK(onsets[0].vowel == "ER");
    CHECK(onsets[0].preceding_consonant == "P");

    // utterance-initial vowel is skipped, T->IY detected
    onsets = find_vowel_onsets(
        make_track({{"AA", 0.0, 0.1}, {"T", 0.1, 0.15}, {"IY", 0.15, 0.3}}), inv);
    REQUIRE(onsets.size() == 1);
    CHECK(onsets[0].vowel == "IY");
    CHECK(onsets[0].preceding_consonant == "T");

    // vowel-vowel pairs yield nothing
    onsets = find_vowel_onsets(make_track({{"AA", 0.0, 0.1}, {"IY", 0.1, 0.2}}), inv);
    CHECK(onsets.empty());
}

TEST_CASE("find_vowel_onsets: invariant under re-sorting already-sorted input") {
    PhoneInventory inv = PhoneInventory::defaults();
    std::mt19937_64 rng(123);
    AlignmentTrack track = make_track(testutil::random_track(rng, 40, inv));
    AlignmentTrack resorted = track;
    std::stable_sort(resorted.intervals.begin(), resorted.intervals.end(),
                     [](const PhoneInterval& a, const PhoneInterval& b) {
                         return a.start_s < b.start_s;
                     });
    auto a = find_vowel_onsets(track, inv);
    auto b = find_vowel_onsets(resorted, inv);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].time_s == b[i].time_s);
        CHECK(a[i].vowel == b[i].vowel);
        CHECK(a[i].preceding_consonant == b[i].preceding_consonant);
    }
}

TEST_CASE("find_vowel_onsets: matches brute-force adjacent pair scan") {
    PhoneInventory inv = PhoneInventory::defaults();
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        auto intervals = testutil::random_track(rng, 30, inv);
        AlignmentTrack track = make_track(intervals);
        auto onsets = find_vowel_onsets(track, inv);

        int expected = 0;
        for (size_t i = 1; i < intervals.size(); ++i) {
            bool prev_is_consonant = inv.consonant_index(intervals[i - 1].label) >= 0;
            bool cur_is_vowel = inv.vowels.count(intervals[i].label) > 0;
            if (prev_is_consonant && cur_is_vowel) ++expected;
        }
        CHECK(static_cast<int>(onsets.size()) == expected);
    }
}

TEST_CASE("cut_segment: shape, centering, zero padding") {
    AudioClip clip = testutil::sine_clip(440.0, 2.0);
    VowelOnset onset{1.0, "AA", "P"};
    CVSegment seg = cut_segment(clip, onset, 160);
    REQUIRE(seg.samples.size() == 2560);
    CHECK(seg.window_ms == 160);
    CHECK(seg.target_consonant == "P");
    // window spans [0.92 s, 1.08 s)
    const int start = static_cast<int>(1.0 * 16000) - 1280;
    for (int k = 0; k < 2560; ++k) {
        CHECK(seg.samples[k] == clip.samples[start + k]);
    }

    // early onset: first 60 ms are zeros
    CVSegment early = cut_segment(clip, {0.02, "AA", "P"}, 160);
    REQUIRE(early.samples.size() == 2560);
    for (int k = 0; k < 960; ++k) CHECK(early.samples[k] == 0.0);
    CHECK(early.samples[960] == clip.samples[0]);

    CHECK_THROWS_AS(cut_segment(clip, onset, 165), Error);
    CHECK_THROWS_AS(cut_segment(clip, onset, 40), Error);
}

TEST_CASE("cut_segment: center sample equals clip sample at onset for random onsets") {
    AudioClip clip = testutil::sine_clip(777.0, 3.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> pos(0.0, 3.0);
    for (int i = 0; i < 1000; ++i) {
        const double t = pos(rng);
        CVSegment seg = cut_segment(clip, {t, "AA", "P"}, 160);
        const long long center = std::llround(t * 16000);
        const double expected =
            (center >= 0 && center < static_cast<long long>(clip.samples.size()))
                ? clip.samples[center]
                : 0.0;
        CHECK(seg.samples[1280] == expected);
    }
}

TEST_CASE("cut_segment: every window length in the sweep keeps the shape contract") {
    AudioClip clip = testutil::sine_clip(500.0, 1.0);
    for (int w = 60; w <= 200; w += 20) {
        CVSegment seg = cut_segment(clip, {0.5, "AA", "T"}, w);
        CHECK(static_cast<int>(seg.samples.size()) == w * 16);
        // onset at the very edge still yields a full-length (padded) window
        CVSegment edge = cut_segment(clip, {0.0, "AA", "T"}, w);
        CHECK(static_cast<int>(edge.samples.size()) == w * 16);
    }
}

TEST_CASE("segment_corpus: counts match per-file brute force") {
    TempDir dir;
    auto corpus = testutil::make_disk_corpus(dir, 20, 3, 1234);
    Manifest manifest = load_manifest(corpus.manifest_path);
    PhoneInventory inv = PhoneInventory::defaults();
    auto segments = segment_corpus(manifest, inv, 160);
    CHECK(static_cast<int>(segments.size()) == corpus.total_cv_pairs);

    // deterministic order: manifest order then onset time
    size_t row = 0;
    double last_onset = -1.0;
    for (const CVSegment& seg : segments) {
        while (row < manifest.rows.size() && manifest.rows[row].utterance_id != seg.utterance_id) {
            ++row;
            last_onset = -1.0;
        }
        REQUIRE(row < manifest.rows.size());
        CHECK(seg.onset_s > last_onset);
        last_onset = seg.onset_s;
        CHECK(seg.speaker_id == manifest.rows[row].speaker_id);
    }

    Manifest empty;
    CHECK(segment_corpus(empty, inv, 160).empty());
}

TEST_CASE("jitter_onsets: sigma zero is the identity, same seed reproduces") {
    PhoneInventory inv = PhoneInventory::defaults();
    std::mt19937_64 rng(11);
    AlignmentTrack track = make_track(testutil::random_track(rng, 40, inv));

    AlignmentTrack same = jitter_onsets(track, inv, 0.0, 7);
    REQUIRE(same.intervals.size() == track.intervals.size());
    for (size_t i = 0; i < track.intervals.size(); ++i) {
        CHECK(same.intervals[i].start_s == track.intervals[i].start_s);
        CHECK(same.intervals[i].end_s == track.intervals[i].end_s);
    }

    AlignmentTrack a = jitter_onsets(track, inv, 15.0, 7);
    AlignmentTrack b = jitter_onsets(track, inv, 15.0, 7);
    for (size_t i = 0; i < a.intervals.size(); ++i) {
        CHECK(a.intervals[i].start_s == b.intervals[i].start_s);
    }

    // intervals stay sorted, non-overlapping, positive-duration
    AlignmentTrack big = jitter_onsets(track, inv, 50.0, 3);
    for (size_t i = 0; i < big.intervals.size(); ++i) {
        CHECK(big.intervals[i].start_s < big.intervals[i].end_s);
        if (i > 0) CHECK(big.intervals[i - 1].end_s <= big.intervals[i].start_s + 1e-9);
    }
}

TEST_CASE("jitter_onsets: empirical std matches sigma within 5%") {
    PhoneInventory inv = PhoneInventory::defaults();
    // long alternating track: clamping never bites at sigma = 20 ms
    std::vector<PhoneInterval> intervals;
    double t = 0.0;
    for (int i = 0; i < 10000; ++i) {
        intervals.push_back({"T", t, t + 1.0});
        t += 1.0;
        intervals.push_back({"AA", t, t + 1.0});
        t += 1.0;
    }
    AlignmentTrack track = make_track(intervals);
    AlignmentTrack jittered = jitter_onsets(track, inv, 20.0, 42);

    double sum = 0.0, sumsq = 0.0;
    int n = 0;
    for (size_t i = 0; i < intervals.size(); ++i) {
        if (inv.is_vowel(intervals[i].label)) {
            const double shift_ms = (jittered.intervals[i].start_s - intervals[i].start_s) * 1000.0;
            sum += shift_ms;
            sumsq += shift_ms * shift_ms;
            ++n;
        }
    }
    REQUIRE(n == 10000);
    const double mean = sum / n;
    const double std_dev = std::sqrt(sumsq / n - mean * mean);
    CHECK(std_dev == doctest::Approx(20.0).epsilon(0.05));
}
