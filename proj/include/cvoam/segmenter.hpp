#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cvoam/corpus.hpp"

namespace cvoam {

struct VowelOnset {
    double time_s = 0.0;
    std::string vowel;
    std::string preceding_consonant;
};

// A fixed-length audio window centered on a vowel onset. The label is the
// consonant immediately before the vowel.
struct CVSegment {
    std::string utterance_id;
    std::string speaker_id;
    std::string target_consonant;
    double onset_s = 0.0;
    int window_ms = 160;
    std::vector<double> samples;  // exactly window_ms * 16 samples
};

// One onset per vowel interval whose immediately preceding interval is an
// inventory consonant. Onset time is the vowel's start.
std::vector<VowelOnset> find_vowel_onsets(const AlignmentTrack& track, const PhoneInventory& inventory);

// Cuts [onset - w/2, onset + w/2]; out-of-range audio is zero padded so the
// window always has window_ms * 16 samples. window_ms must be even and in
// [60, 200].
CVSegment cut_segment(const AudioClip& clip, const VowelOnset& onset, int window_ms);

// All CV segments of a manifest in deterministic order: manifest row order,
// then onset time. Loader failures are rethrown with the utterance id.
std::vector<CVSegment> segment_corpus(const Manifest& manifest, const PhoneInventory& inventory,
                                      int window_ms, const std::string& tier_name = "phones");

// Shifts each vowel start boundary by N(0, sigma_ms) for alignment-error
// experiments. Contiguous predecessor boundaries move along; shifts are
// clamped so every interval keeps a positive duration. sigma_ms == 0 returns
// the track unchanged.
AlignmentTrack jitter_onsets(const AlignmentTrack& track, const PhoneInventory& inventory,
                             double sigma_ms, uint64_t seed);

}  // namespace cvoam
