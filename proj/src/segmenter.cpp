#include "cvoam/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cvoam {

std::vector<VowelOnset> find_vowel_onsets(const AlignmentTrack& track,
                                          const PhoneInventory& inventory) {
    std::vector<VowelOnset> onsets;
    for (size_t i = 1; i < track.intervals.size(); ++i) {
        const PhoneInterval& prev = track.intervals[i - 1];
        const PhoneInterval& cur = track.intervals[i];
        if (inventory.is_vowel(cur.label) && inventory.is_consonant(prev.label)) {
            onsets.push_back({cur.start_s, cur.label, prev.label});
        }
    }
    return onsets;
}

CVSegment cut_segment(const AudioClip& clip, const VowelOnset& onset, int window_ms) {
    if (window_ms % 2 != 0 || window_ms < 60 || window_ms > 200) {
        fail(ErrKind::InvalidArgument,
             "window_ms must be even and in [60, 200], got " + std::to_string(window_ms));
    }
    const int n = window_ms * 16;  // samples at 16 kHz
    const long long center = std::llround(onset.time_s * clip.sample_rate_hz);
    const long long start = center - n / 2;
    CVSegment seg;
    seg.target_consonant = onset.preceding_consonant;
    seg.onset_s = onset.time_s;
    seg.window_ms = window_ms;
    seg.samples.assign(n, 0.0);
    const long long len = static_cast<long long>(clip.samples.size());
    for (int k = 0; k < n; ++k) {
        const long long idx = start + k;
        if (idx >= 0 && idx < len) seg.samples[k] = clip.samples[idx];
    }
    return seg;
}

std::vector<CVSegment> segment_corpus(const Manifest& manifest, const PhoneInventory& inventory,
                                      int window_ms, const std::string& tier_name) {
    std::vector<CVSegment> segments;
    for (const ManifestRow& row : manifest.rows) {
        try {
            AudioClip clip = load_wav(row.audio_path);
            AlignmentTrack track = parse_alignment(row.alignment_path, tier_name);
            for (const VowelOnset& onset : find_vowel_onsets(track, inventory)) {
                CVSegment seg = cut_segment(clip, onset, window_ms);
                seg.utterance_id = row.utterance_id;
                seg.speaker_id = row.speaker_id;
                segments.push_back(std::move(seg));
            }
        } catch (const Error& e) {
            throw Error(e.kind(), "utterance '" + row.utterance_id + "': " + e.what());
        }
    }
    return segments;
}

AlignmentTrack jitter_onsets(const AlignmentTrack& track, const PhoneInventory& inventory,
                             double sigma_ms, uint64_t seed) {
    if (sigma_ms < 0) fail(ErrKind::InvalidArgument, "sigma_ms must be >= 0");
    AlignmentTrack out = track;
    if (sigma_ms == 0.0) return out;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma_ms / 1000.0);
    constexpr double kMinDur = 1e-3;  // every interval keeps at least this

    for (size_t i = 0; i < out.intervals.size(); ++i) {
        PhoneInterval& cur = out.intervals[i];
        if (!inventory.is_vowel(cur.label)) continue;

        const double delta = noise(rng);
        const double cur_eps = std::min(kMinDur, (cur.end_s - cur.start_s) / 2.0);
        double lo = 0.0;
        PhoneInterval* prev = (i > 0) ? &out.intervals[i - 1] : nullptr;
        bool contiguous = false;
        if (prev) {
            contiguous = std::abs(prev->end_s - cur.start_s) < 1e-9;
            const double prev_eps = std::min(kMinDur, (prev->end_s - prev->start_s) / 2.0);
            lo = contiguous ? prev->start_s + prev_eps : prev->end_s;
        }
        const double hi = cur.end_s - cur_eps;
        double shifted = cur.start_s + delta;
        shifted = std::min(std::max(shifted, lo), std::max(lo, hi));
        cur.start_s = shifted;
        if (contiguous) prev->end_s = shifted;
    }
    return out;
}

}  // namespace cvoam
