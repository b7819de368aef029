#pragma once

#include <string>
#include <vector>

#include "cvoam/oam.hpp"
#include "cvoam/tensor.hpp"

namespace cvoam {

// Instance scores of one consonant for one speaker.
struct ConsonantScoreSet {
    std::string speaker_id;
    std::string consonant;
    std::vector<double> values;
};

// Coefficient of variation: population std over |mean|.
double cov(const ConsonantScoreSet& set);

struct CorrelationResult {
    double r = 0.0;
    int n = 0;
    double t_stat = 0.0;
    double p_value = 1.0;
};

// Pearson r with the two-sided p of H0: r = 0 (Student t via the regularized
// incomplete beta).
CorrelationResult pearson(const std::vector<double>& x, const std::vector<double>& y);

struct TTestResult {
    double t = 0.0;
    int df = 0;
    double p = 1.0;
};

// Paired-samples t-test with sample (n-1) standard deviation.
TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b);

double student_t_two_sided_p(double t, int df);

struct SelectionConfig {
    double stop_threshold = 1e-3;  // minimum gain in inner leave-one-out r
    int max_features = 10;
    double ridge = 1e-6;  // damping added to the normal equations
};

struct SelectionStep {
    int feature = -1;
    double criterion = 0.0;  // inner leave-one-out r after adding the feature
};

struct LinearModel {
    std::vector<int> features;      // selected column indices, in order
    std::vector<double> weights;    // one per selected feature
    double intercept = 0.0;
    std::vector<SelectionStep> trace;
    std::vector<double> column_means;  // imputation values per input column
    bool rank_deficient = false;
};

// Greedy forward selection maximizing the inner leave-one-out Pearson r,
// then a ridge-damped least-squares fit on the selected features. Missing
// cells (NaN) are imputed with the training column mean.
LinearModel fit_forward_linear(const Matrix& features, const std::vector<double>& ratings,
                               const SelectionConfig& cfg = {});

double predict(const LinearModel& model, const std::vector<double>& row);

struct LosoResult {
    std::vector<double> predictions;  // one per input row
    CorrelationResult corr;           // predictions vs ratings
};

// Leave-one-speaker-out: refits selection and weights without the held-out
// row, then predicts it.
LosoResult loso_evaluate(const Matrix& features, const std::vector<double>& ratings,
                         const SelectionConfig& cfg = {});

// Speaker x consonant matrix of consonant-level OAM means, rows matched with
// ratings by speaker id (inner join, sorted by speaker id).
struct FeatureTable {
    std::vector<std::string> speaker_ids;
    std::vector<std::string> feature_names;
    Matrix values;  // NaN marks a consonant the speaker never produced
    std::vector<double> ratings;
};

FeatureTable build_feature_table(const std::vector<OamScore>& scores, const RatingTable& ratings,
                                 const std::vector<std::string>& consonant_order);

struct GammaCell {
    std::string speaker_id;
    std::string consonant;
    double gamma = 0.0;
};

// Coefficient of variation per (speaker, consonant) cell.
std::vector<GammaCell> gamma_table(const std::vector<OamScore>& scores);

struct CovCompareResult {
    std::vector<std::string> speaker_ids;  // matched cells
    std::vector<std::string> consonants;
    std::vector<double> gamma_a, gamma_b;
    TTestResult ttest;
};

// Matches (speaker, consonant) cells present in both score tables and runs a
// paired t-test on their coefficients of variation.
CovCompareResult cov_compare(const std::vector<OamScore>& scores_a,
                             const std::vector<OamScore>& scores_b);

}  // namespace cvoam
