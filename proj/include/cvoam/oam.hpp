#pragma once

#include <map>
#include <string>
#include <vector>

#include "cvoam/network.hpp"

namespace cvoam {

// Per-instance articulation score: target posterior over the maximum
// posterior, in (0, 1], equal to 1 exactly when the target tops the ranking.
struct OamScore {
    std::string utterance_id;
    std::string speaker_id;
    std::string target_consonant;
    double onset_s = 0.0;
    double value = 0.0;
    std::string predicted_consonant;
};

struct SpeakerReport {
    std::string speaker_id;
    std::map<std::string, double> consonant_mean;  // only consonants with instances
    std::map<std::string, int> consonant_count;
    double speaker_level_oam = 0.0;  // unweighted mean of present consonant means
    int instances = 0;
};

// Eq. OAM(c_i) = p_i / max(P).
double oam_instance(const PosteriorVector& posterior, int target_index);

// segment -> melspec -> forward -> oam_instance for the whole manifest, in
// manifest order then onset time.
std::vector<OamScore> score_corpus(const ModelParams& params, const Manifest& manifest,
                                   const PhoneInventory& inventory, int window_ms,
                                   const std::string& tier_name = "phones");

// Two-stage averaging: instances -> consonant means -> unweighted speaker
// mean. Reports are ordered by speaker id.
std::vector<SpeakerReport> aggregate(const std::vector<OamScore>& scores);

std::string scores_to_csv(const std::vector<OamScore>& scores);
std::vector<OamScore> load_scores_csv(const std::string& path);
std::string speaker_report_to_csv(const std::vector<SpeakerReport>& reports,
                                  const std::vector<std::string>& consonant_order);

}  // namespace cvoam
