#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "cvoam/corpus.hpp"
#include "cvoam/csv.hpp"

namespace cvoam {

namespace {

// Both TextGrid forms carry the same sequence of numbers and quoted strings;
// the long form merely decorates it with "key =" prefixes and "[index]:"
// headers. Reducing the file to that value stream parses both uniformly.
struct Token {
    bool is_number = false;
    double number = 0.0;
    std::string text;
};

std::vector<Token> tokenize(const std::string& content, const std::string& path) {
    std::vector<Token> tokens;
    size_t i = 0;
    const size_t n = content.size();
    while (i < n) {
        char ch = content[i];
        if (std::isspace(static_cast<unsigned char>(ch))) {
            ++i;
        } else if (ch == '"') {
            std::string s;
            ++i;
            bool closed = false;
            while (i < n) {
                if (content[i] == '"') {
                    if (i + 1 < n && content[i + 1] == '"') {
                        s.push_back('"');
                        i += 2;
                    } else {
                        ++i;
                        closed = true;
                        break;
                    }
                } else {
                    s.push_back(content[i++]);
                }
            }
            if (!closed) fail(ErrKind::MalformedTextGrid, path + ": unterminated string");
            tokens.push_back({false, 0.0, std::move(s)});
        } else if (ch == '[') {
            while (i < n && content[i] != ']') ++i;
            if (i < n) ++i;
        } else if (ch == '<') {  // flags such as <exists>
            while (i < n && content[i] != '>') ++i;
            if (i < n) ++i;
        } else {
            size_t j = i;
            while (j < n && !std::isspace(static_cast<unsigned char>(content[j])) &&
                   content[j] != '"' && content[j] != '[' && content[j] != '<') {
                ++j;
            }
            std::string word = content.substr(i, j - i);
            double value = 0.0;
            auto res = std::from_chars(word.data(), word.data() + word.size(), value);
            if (res.ec == std::errc() && res.ptr == word.data() + word.size()) {
                tokens.push_back({true, value, {}});
            }
            // anything else ("xmin", "=", "intervals:", ...) is structure, not data
            i = j;
        }
    }
    return tokens;
}

class TokenStream {
  public:
    TokenStream(std::vector<Token> tokens, std::string path)
        : tokens_(std::move(tokens)), path_(std::move(path)) {}

    bool exhausted() const { return pos_ >= tokens_.size(); }
    bool next_is_number() const { return pos_ < tokens_.size() && tokens_[pos_].is_number; }

    double number(const char* what) {
        if (pos_ >= tokens_.size() || !tokens_[pos_].is_number) {
            fail(ErrKind::MalformedTextGrid, path_ + ": expected number (" + what + ")");
        }
        return tokens_[pos_++].number;
    }

    std::string text(const char* what) {
        if (pos_ >= tokens_.size() || tokens_[pos_].is_number) {
            fail(ErrKind::MalformedTextGrid, path_ + ": expected string (" + what + ")");
        }
        return tokens_[pos_++].text;
    }

    const std::string& path() const { return path_; }

  private:
    std::vector<Token> tokens_;
    std::string path_;
    size_t pos_ = 0;
};

int checked_count(double v, TokenStream& ts, const char* what) {
    if (v < 0 || v != std::floor(v) || v > 1e7) {
        fail(ErrKind::MalformedTextGrid, ts.path() + ": bad count for " + what);
    }
    return static_cast<int>(v);
}

}  // namespace

AlignmentTrack parse_textgrid(const std::string& path, const std::string& tier_name) {
    TokenStream ts(tokenize(read_text_file(path), path), path);

    if (ts.text("file type") != "ooTextFile") {
        fail(ErrKind::MalformedTextGrid, path + ": not an ooTextFile");
    }
    if (ts.text("object class") != "TextGrid") {
        fail(ErrKind::MalformedTextGrid, path + ": not a TextGrid");
    }
    double grid_xmin = ts.number("xmin");
    double grid_xmax = ts.number("xmax");
    if (!(grid_xmin <= grid_xmax) || grid_xmin < 0) {
        fail(ErrKind::MalformedTextGrid, path + ": inconsistent xmin/xmax");
    }
    if (!ts.next_is_number()) fail(ErrKind::MissingTier, path + ": no tiers, wanted '" + tier_name + "'");
    int n_tiers = checked_count(ts.number("tier count"), ts, "tiers");

    for (int t = 0; t < n_tiers; ++t) {
        std::string cls = ts.text("tier class");
        std::string name = ts.text("tier name");
        double txmin = ts.number("tier xmin");
        double txmax = ts.number("tier xmax");
        if (!(txmin <= txmax)) fail(ErrKind::MalformedTextGrid, path + ": tier xmin > xmax");
        int count = checked_count(ts.number("item count"), ts, name.c_str());

        if (cls == "IntervalTier") {
            bool wanted = (name == tier_name);
            AlignmentTrack track;
            track.utterance_id = std::filesystem::path(path).stem().string();
            for (int k = 0; k < count; ++k) {
                double xmin = ts.number("interval xmin");
                double xmax = ts.number("interval xmax");
                std::string label = ts.text("interval text");
                if (!wanted) continue;
                if (xmin < 0 || xmin > xmax) {
                    fail(ErrKind::MalformedTextGrid, path + ": inconsistent interval bounds");
                }
                std::string norm = normalize_label(label);
                if (is_silence_label(norm)) continue;
                if (xmin == xmax) {
                    fail(ErrKind::MalformedTextGrid, path + ": empty interval with label '" + norm + "'");
                }
                track.intervals.push_back({std::move(norm), xmin, xmax});
            }
            if (wanted) {
                for (size_t i = 1; i < track.intervals.size(); ++i) {
                    if (track.intervals[i].start_s < track.intervals[i - 1].start_s ||
                        track.intervals[i - 1].end_s > track.intervals[i].start_s + 1e-6) {
                        fail(ErrKind::MalformedTextGrid, path + ": intervals out of order or overlapping");
                    }
                }
                return track;
            }
        } else if (cls == "TextTier") {
            for (int k = 0; k < count; ++k) {
                ts.number("point time");
                ts.text("point mark");
            }
        } else {
            fail(ErrKind::MalformedTextGrid, path + ": unknown tier class '" + cls + "'");
        }
    }
    fail(ErrKind::MissingTier, path + ": no IntervalTier named '" + tier_name + "'");
}

}  // namespace cvoam
