#include "cvoam/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "cvoam/csv.hpp"

namespace cvoam {

const char* to_string(ErrKind kind) {
    switch (kind) {
        case ErrKind::UnsupportedFormat: return "UnsupportedFormat";
        case ErrKind::CorruptFile: return "CorruptFile";
        case ErrKind::MissingTier: return "MissingTier";
        case ErrKind::MalformedTextGrid: return "MalformedTextGrid";
        case ErrKind::MalformedCsv: return "MalformedCsv";
        case ErrKind::NonMonotonicIntervals: return "NonMonotonicIntervals";
        case ErrKind::DuplicateId: return "DuplicateId";
        case ErrKind::MissingFile: return "MissingFile";
        case ErrKind::InvalidBand: return "InvalidBand";
        case ErrKind::ShapeMismatch: return "ShapeMismatch";
        case ErrKind::EmptyTrainingSet: return "EmptyTrainingSet";
        case ErrKind::InvalidClass: return "InvalidClass";
        case ErrKind::VersionMismatch: return "VersionMismatch";
        case ErrKind::IndexOutOfRange: return "IndexOutOfRange";
        case ErrKind::ZeroMean: return "ZeroMean";
        case ErrKind::ConstantInput: return "ConstantInput";
        case ErrKind::DegenerateInput: return "DegenerateInput";
        case ErrKind::NoOverlap: return "NoOverlap";
        case ErrKind::InvalidArgument: return "InvalidArgument";
    }
    return "Error";
}

std::string normalize_label(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    for (char ch : raw) {
        out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
    }
    while (!out.empty() && (out.back() == '0' || out.back() == '1' || out.back() == '2')) {
        out.pop_back();
    }
    return out;
}

bool is_silence_label(const std::string& normalized) {
    return normalized.empty() || normalized == "SIL" || normalized == "SP" || normalized == "SPN";
}

PhoneInventory PhoneInventory::defaults() {
    PhoneInventory inv;
    inv.consonants = {"B",  "D",  "G",  "P",  "T",  "K", "Z",  "V",  "S", "SH", "F",
                      "HH", "TH", "DH", "CH", "JH", "N", "M",  "NG", "L", "R"};
    inv.vowels = {"AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER",
                  "EY", "IH", "IY", "OW", "OY", "UH", "UW"};
    return inv;
}

bool PhoneInventory::is_consonant(const std::string& label) const {
    return consonant_index(label) >= 0;
}

int PhoneInventory::consonant_index(const std::string& label) const {
    for (size_t i = 0; i < consonants.size(); ++i) {
        if (consonants[i] == label) return static_cast<int>(i);
    }
    return -1;
}

void PhoneInventory::validate() const {
    if (consonants.empty()) fail(ErrKind::InvalidArgument, "inventory has no consonants");
    if (vowels.empty()) fail(ErrKind::InvalidArgument, "inventory has no vowels");
    std::unordered_set<std::string> seen;
    for (const auto& c : consonants) {
        if (normalize_label(c) != c) {
            fail(ErrKind::InvalidArgument, "consonant not normalized: " + c);
        }
        if (!seen.insert(c).second) fail(ErrKind::DuplicateId, "duplicate consonant: " + c);
        if (vowels.count(c)) {
            fail(ErrKind::InvalidArgument, "symbol in both consonants and vowels: " + c);
        }
    }
    for (const auto& v : vowels) {
        if (normalize_label(v) != v) fail(ErrKind::InvalidArgument, "vowel not normalized: " + v);
    }
}

PhoneInventory PhoneInventory::from_json_file(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrKind::CorruptFile, path + ": " + e.what());
    }
    PhoneInventory inv;
    if (!doc.contains("consonants") || !doc.contains("vowels")) {
        fail(ErrKind::CorruptFile, path + ": expected keys 'consonants' and 'vowels'");
    }
    for (const auto& c : doc["consonants"]) inv.consonants.push_back(normalize_label(c.get<std::string>()));
    for (const auto& v : doc["vowels"]) inv.vowels.insert(normalize_label(v.get<std::string>()));
    inv.validate();
    return inv;
}

namespace {

std::string resolve_path(const std::filesystem::path& base_dir, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_absolute()) return path.string();
    return (base_dir / path).lexically_normal().string();
}

}  // namespace

Manifest load_manifest(const std::string& path) {
    CsvTable table = read_csv(path);
    const std::vector<std::string> expected = {"utterance_id", "speaker_id", "audio_path",
                                               "alignment_path"};
    if (table.header != expected) {
        fail(ErrKind::MalformedCsv,
             path + ": expected header utterance_id,speaker_id,audio_path,alignment_path");
    }
    std::filesystem::path base = std::filesystem::path(path).parent_path();
    Manifest manifest;
    std::unordered_set<std::string> ids;
    for (size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        ManifestRow m;
        m.utterance_id = row[0];
        m.speaker_id = row[1];
        m.audio_path = resolve_path(base, row[2]);
        m.alignment_path = resolve_path(base, row[3]);
        if (m.utterance_id.empty()) {
            fail(ErrKind::MalformedCsv, path + ": empty utterance_id in row " + std::to_string(i + 2));
        }
        if (!ids.insert(m.utterance_id).second) {
            fail(ErrKind::DuplicateId, path + ": duplicate utterance_id '" + m.utterance_id + "'");
        }
        if (!std::filesystem::exists(m.audio_path)) fail(ErrKind::MissingFile, m.audio_path);
        if (!std::filesystem::exists(m.alignment_path)) fail(ErrKind::MissingFile, m.alignment_path);
        manifest.rows.push_back(std::move(m));
    }
    return manifest;
}

RatingTable load_ratings(const std::string& path) {
    CsvTable table = read_csv(path);
    const std::vector<std::string> expected = {"speaker_id", "rating"};
    if (table.header != expected) {
        fail(ErrKind::MalformedCsv, path + ": expected header speaker_id,rating");
    }
    RatingTable ratings;
    std::unordered_set<std::string> ids;
    for (size_t i = 0; i < table.rows.size(); ++i) {
        RatingRow r;
        r.speaker_id = table.rows[i][0];
        r.rating = parse_double_field(table.rows[i][1], path + ":" + std::to_string(i + 2));
        if (!ids.insert(r.speaker_id).second) {
            fail(ErrKind::DuplicateId, path + ": duplicate speaker_id '" + r.speaker_id + "'");
        }
        ratings.rows.push_back(std::move(r));
    }
    return ratings;
}

AlignmentTrack parse_alignment(const std::string& path, const std::string& tier_name) {
    std::string ext = std::filesystem::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (ext == ".textgrid") return parse_textgrid(path, tier_name);
    if (ext == ".csv") return parse_alignment_csv(path);
    fail(ErrKind::UnsupportedFormat, path + ": unknown alignment extension '" + ext + "'");
}

AlignmentTrack parse_alignment_csv(const std::string& path) {
    CsvTable table = read_csv(path);
    const std::vector<std::string> expected = {"phone", "start_s", "end_s"};
    if (table.header != expected) {
        fail(ErrKind::MalformedCsv, path + ": expected header phone,start_s,end_s");
    }
    AlignmentTrack track;
    track.utterance_id = std::filesystem::path(path).stem().string();
    for (size_t i = 0; i < table.rows.size(); ++i) {
        const std::string ctx = path + ":" + std::to_string(i + 2);
        std::string label = normalize_label(table.rows[i][0]);
        double start = parse_double_field(table.rows[i][1], ctx);
        double end = parse_double_field(table.rows[i][2], ctx);
        if (is_silence_label(label)) continue;
        if (start < 0.0 || start >= end) {
            fail(ErrKind::MalformedCsv, ctx + ": bad interval [" + format_double(start) + ", " +
                                            format_double(end) + "]");
        }
        track.intervals.push_back({std::move(label), start, end});
    }
    std::stable_sort(track.intervals.begin(), track.intervals.end(),
                     [](const PhoneInterval& a, const PhoneInterval& b) { return a.start_s < b.start_s; });
    for (size_t i = 1; i < track.intervals.size(); ++i) {
        if (track.intervals[i - 1].end_s > track.intervals[i].start_s + 1e-6) {
            fail(ErrKind::NonMonotonicIntervals,
                 path + ": intervals '" + track.intervals[i - 1].label + "' and '" +
                     track.intervals[i].label + "' overlap");
        }
    }
    return track;
}

}  // namespace cvoam
