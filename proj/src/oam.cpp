#include "cvoam/oam.hpp"

#include <algorithm>
#include <cmath>

#include "cvoam/csv.hpp"
#include "cvoam/features.hpp"
#include "cvoam/segmenter.hpp"

namespace cvoam {

double oam_instance(const PosteriorVector& posterior, int target_index) {
    if (target_index < 0 || static_cast<size_t>(target_index) >= posterior.size()) {
        fail(ErrKind::IndexOutOfRange, "target index " + std::to_string(target_index) +
                                           " outside posterior of size " +
                                           std::to_string(posterior.size()));
    }
    const double mx = *std::max_element(posterior.begin(), posterior.end());
    return posterior[target_index] / mx;
}

std::vector<OamScore> score_corpus(const ModelParams& params, const Manifest& manifest,
                                   const PhoneInventory& inventory, int window_ms,
                                   const std::string& tier_name) {
    if (inventory.size() != params.net.n_classes) {
        fail(ErrKind::ShapeMismatch, "inventory size does not match the model's class count");
    }
    std::vector<CVSegment> segments = segment_corpus(manifest, inventory, window_ms, tier_name);
    const MelFilterbank bank = build_filterbank(params.mel);

    std::vector<OamScore> scores;
    scores.reserve(segments.size());
    constexpr size_t kChunk = 32;
    std::vector<MelSpectrogram> mels(segments.size());
    for (size_t i = 0; i < segments.size(); ++i) mels[i] = melspec(segments[i], bank);

    for (size_t pos = 0; pos < segments.size(); pos += kChunk) {
        const size_t end = std::min(pos + kChunk, segments.size());
        std::vector<const MelSpectrogram*> chunk;
        for (size_t i = pos; i < end; ++i) chunk.push_back(&mels[i]);
        BatchCache cache = forward_batch(params, chunk);
        for (size_t i = pos; i < end; ++i) {
            const double* p = cache.probs.row(static_cast<int>(i - pos));
            PosteriorVector posterior(p, p + params.net.n_classes);
            const int target = inventory.consonant_index(segments[i].target_consonant);
            OamScore s;
            s.utterance_id = segments[i].utterance_id;
            s.speaker_id = segments[i].speaker_id;
            s.target_consonant = segments[i].target_consonant;
            s.onset_s = segments[i].onset_s;
            s.value = oam_instance(posterior, target);
            s.predicted_consonant = inventory.consonants[argmax_class(posterior)];
            scores.push_back(std::move(s));
        }
    }
    return scores;
}

std::vector<SpeakerReport> aggregate(const std::vector<OamScore>& scores) {
    if (scores.empty()) fail(ErrKind::InvalidArgument, "aggregate: no scores");
    std::map<std::string, std::map<std::string, std::pair<double, int>>> sums;
    for (const OamScore& s : scores) {
        auto& cell = sums[s.speaker_id][s.target_consonant];
        cell.first += s.value;
        cell.second += 1;
    }
    std::vector<SpeakerReport> reports;
    for (const auto& [speaker, consonants] : sums) {
        SpeakerReport report;
        report.speaker_id = speaker;
        double total = 0.0;
        for (const auto& [consonant, cell] : consonants) {
            const double mean = cell.first / cell.second;
            report.consonant_mean[consonant] = mean;
            report.consonant_count[consonant] = cell.second;
            report.instances += cell.second;
            total += mean;
        }
        report.speaker_level_oam = total / static_cast<double>(consonants.size());
        reports.push_back(std::move(report));
    }
    return reports;
}

std::string scores_to_csv(const std::vector<OamScore>& scores) {
    std::string out = "utterance_id,speaker_id,consonant,onset_s,oam,predicted\n";
    for (const OamScore& s : scores) {
        out += csv_escape(s.utterance_id);
        out += ',';
        out += csv_escape(s.speaker_id);
        out += ',';
        out += csv_escape(s.target_consonant);
        out += ',';
        out += format_double(s.onset_s);
        out += ',';
        out += format_double(s.value);
        out += ',';
        out += csv_escape(s.predicted_consonant);
        out += '\n';
    }
    return out;
}

std::vector<OamScore> load_scores_csv(const std::string& path) {
    CsvTable table = read_csv(path);
    const std::vector<std::string> expected = {"utterance_id", "speaker_id", "consonant",
                                               "onset_s", "oam", "predicted"};
    if (table.header != expected) {
        fail(ErrKind::MalformedCsv,
             path + ": expected header utterance_id,speaker_id,consonant,onset_s,oam,predicted");
    }
    std::vector<OamScore> scores;
    for (size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string ctx = path + ":" + std::to_string(i + 2);
        OamScore s;
        s.utterance_id = row[0];
        s.speaker_id = row[1];
        s.target_consonant = row[2];
        s.onset_s = parse_double_field(row[3], ctx);
        s.value = parse_double_field(row[4], ctx);
        s.predicted_consonant = row[5];
        if (s.value <= 0.0 || s.value > 1.0) {
            fail(ErrKind::MalformedCsv, ctx + ": oam outside (0, 1]");
        }
        scores.push_back(std::move(s));
    }
    return scores;
}

std::string speaker_report_to_csv(const std::vector<SpeakerReport>& reports,
                                  const std::vector<std::string>& consonant_order) {
    std::string out = "speaker_id";
    for (const std::string& c : consonant_order) {
        out += ',';
        out += csv_escape(c);
    }
    out += ",speaker_oam,instances\n";
    for (const SpeakerReport& r : reports) {
        out += csv_escape(r.speaker_id);
        for (const std::string& c : consonant_order) {
            out += ',';
            auto it = r.consonant_mean.find(c);
            if (it != r.consonant_mean.end()) out += format_double(it->second);
        }
        out += ',';
        out += format_double(r.speaker_level_oam);
        out += ',';
        out += std::to_string(r.instances);
        out += '\n';
    }
    return out;
}

}  // namespace cvoam
