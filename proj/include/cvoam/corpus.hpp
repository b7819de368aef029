#pragma once

#include <set>
#include <string>
#include <vector>

#include "cvoam/errors.hpp"

namespace cvoam {

// Mono PCM audio, fixed at 16 kHz. Samples live in [-1, 1].
struct AudioClip {
    std::vector<double> samples;
    int sample_rate_hz = 16000;

    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate_hz;
    }
};

// One aligned phone. Labels are ARPABET with stress digits stripped.
struct PhoneInterval {
    std::string label;
    double start_s = 0.0;
    double end_s = 0.0;
};

struct AlignmentTrack {
    std::string utterance_id;
    std::vector<PhoneInterval> intervals;  // sorted by start_s, non-overlapping
};

// The consonant order is load-bearing: it defines the CNN output index.
struct PhoneInventory {
    std::vector<std::string> consonants;
    std::set<std::string> vowels;

    static PhoneInventory defaults();
    static PhoneInventory from_json_file(const std::string& path);

    int size() const { return static_cast<int>(consonants.size()); }
    bool is_vowel(const std::string& label) const { return vowels.count(label) > 0; }
    bool is_consonant(const std::string& label) const;
    int consonant_index(const std::string& label) const;  // -1 if absent

    void validate() const;
};

struct ManifestRow {
    std::string utterance_id;
    std::string speaker_id;
    std::string audio_path;
    std::string alignment_path;
};

struct Manifest {
    std::vector<ManifestRow> rows;
};

struct RatingRow {
    std::string speaker_id;
    double rating = 0.0;
};

struct RatingTable {
    std::vector<RatingRow> rows;
};

// Upper-cases and strips trailing stress digits (0/1/2). Idempotent.
std::string normalize_label(const std::string& raw);

// True for the aligner's non-speech labels: "", SIL, SP, SPN (post-normalize).
bool is_silence_label(const std::string& normalized);

AudioClip load_wav(const std::string& path);
void write_wav(const std::string& path, const AudioClip& clip);

// Praat TextGrid, long or short "ooTextFile" form. Silence intervals are
// dropped, labels normalized. utterance_id is the file stem.
AlignmentTrack parse_textgrid(const std::string& path, const std::string& tier_name);

// Fallback alignment format: CSV with header phone,start_s,end_s.
AlignmentTrack parse_alignment_csv(const std::string& path);

// Dispatches on extension: .textgrid -> parse_textgrid, .csv -> parse_alignment_csv.
AlignmentTrack parse_alignment(const std::string& path, const std::string& tier_name);

// Manifest CSV header: utterance_id,speaker_id,audio_path,alignment_path.
// Relative paths are resolved against the manifest's directory and must
// exist at load time.
Manifest load_manifest(const std::string& path);

// Ratings CSV header: speaker_id,rating.
RatingTable load_ratings(const std::string& path);

}  // namespace cvoam
