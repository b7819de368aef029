#include "cvoam/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace cvoam {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// continued fraction for the incomplete beta (Lentz's method)
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16, kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

double betai(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                               a * std::log(x) + b * std::log(1.0 - x));
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

double student_t_two_sided_p(double t, int df) {
    if (df < 1) fail(ErrKind::InvalidArgument, "t-test needs df >= 1");
    if (!std::isfinite(t)) return 0.0;
    return betai(0.5 * df, 0.5, df / (df + t * t));
}

double cov(const ConsonantScoreSet& set) {
    if (set.values.empty()) fail(ErrKind::InvalidArgument, "cov: empty score set");
    const double mu = mean_of(set.values);
    if (mu == 0.0) fail(ErrKind::ZeroMean, "cov: zero mean for " + set.consonant);
    double ss = 0.0;
    for (double v : set.values) ss += (v - mu) * (v - mu);
    const double sigma = std::sqrt(ss / static_cast<double>(set.values.size()));
    return sigma / std::fabs(mu);
}

namespace {

// r alone, NaN when either side is constant
double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    const double mx = mean_of(x), my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return kNaN;
    double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

}  // namespace

CorrelationResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) fail(ErrKind::ShapeMismatch, "pearson: length mismatch");
    if (x.size() < 3) fail(ErrKind::InvalidArgument, "pearson: need at least 3 pairs");
    const double r = pearson_r(x, y);
    if (std::isnan(r)) fail(ErrKind::ConstantInput, "pearson: constant input");
    CorrelationResult result;
    result.r = r;
    result.n = static_cast<int>(x.size());
    const int df = result.n - 2;
    if (std::fabs(r) >= 1.0) {
        result.t_stat = std::numeric_limits<double>::infinity() * (r > 0 ? 1.0 : -1.0);
        result.p_value = 0.0;
    } else {
        result.t_stat = r * std::sqrt(df / (1.0 - r * r));
        result.p_value = student_t_two_sided_p(result.t_stat, df);
    }
    return result;
}

TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) fail(ErrKind::ShapeMismatch, "paired_ttest: length mismatch");
    const size_t n = a.size();
    if (n < 2) fail(ErrKind::InvalidArgument, "paired_ttest: need at least 2 pairs");
    std::vector<double> d(n);
    for (size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    const double md = mean_of(d);
    double ss = 0.0;
    for (double v : d) ss += (v - md) * (v - md);
    TTestResult result;
    result.df = static_cast<int>(n) - 1;
    if (ss == 0.0) {
        // identical vectors give t = 0 and p = 1 by convention; a constant
        // nonzero difference has no sampling variance to test against
        if (md == 0.0) {
            result.t = 0.0;
            result.p = 1.0;
            return result;
        }
        fail(ErrKind::DegenerateInput, "paired_ttest: constant nonzero differences");
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    result.t = md / (sd / std::sqrt(static_cast<double>(n)));
    result.p = student_t_two_sided_p(result.t, result.df);
    return result;
}

namespace {

// ordinary least squares with ridge damping on the normal equations;
// columns = selected features + intercept
struct Solve {
    std::vector<double> coef;  // features then intercept
    bool rank_deficient = false;
};

Solve ridge_solve(const Matrix& X, const std::vector<double>& y, const std::vector<int>& cols,
                  double ridge, const std::vector<int>& rows) {
    const int p = static_cast<int>(cols.size()) + 1;  // + intercept
    std::vector<double> G(static_cast<size_t>(p) * p, 0.0);
    std::vector<double> rhs(p, 0.0);
    auto value = [&](int row, int j) {
        return j < static_cast<int>(cols.size()) ? X.at(row, cols[j]) : 1.0;
    };
    for (int row : rows) {
        for (int i = 0; i < p; ++i) {
            const double vi = value(row, i);
            rhs[i] += vi * y[row];
            for (int j = 0; j <= i; ++j) G[static_cast<size_t>(i) * p + j] += vi * value(row, j);
        }
    }
    for (int i = 0; i < p; ++i) {
        for (int j = i + 1; j < p; ++j) G[static_cast<size_t>(i) * p + j] = G[static_cast<size_t>(j) * p + i];
        G[static_cast<size_t>(i) * p + i] += ridge;
    }

    // Gaussian elimination with partial pivoting
    Solve solve;
    solve.coef.assign(p, 0.0);
    for (int col = 0; col < p; ++col) {
        int pivot = col;
        for (int r = col + 1; r < p; ++r) {
            if (std::fabs(G[static_cast<size_t>(r) * p + col]) >
                std::fabs(G[static_cast<size_t>(pivot) * p + col])) {
                pivot = r;
            }
        }
        if (pivot != col) {
            for (int j = 0; j < p; ++j) {
                std::swap(G[static_cast<size_t>(col) * p + j], G[static_cast<size_t>(pivot) * p + j]);
            }
            std::swap(rhs[col], rhs[pivot]);
        }
        double diag = G[static_cast<size_t>(col) * p + col];
        if (std::fabs(diag) < 1e-10) {
            solve.rank_deficient = true;
            if (diag == 0.0) {
                diag = 1e-12;
                G[static_cast<size_t>(col) * p + col] = diag;
            }
        }
        for (int r = col + 1; r < p; ++r) {
            const double f = G[static_cast<size_t>(r) * p + col] / diag;
            if (f == 0.0) continue;
            for (int j = col; j < p; ++j) {
                G[static_cast<size_t>(r) * p + j] -= f * G[static_cast<size_t>(col) * p + j];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    for (int i = p - 1; i >= 0; --i) {
        double v = rhs[i];
        for (int j = i + 1; j < p; ++j) v -= G[static_cast<size_t>(i) * p + j] * solve.coef[j];
        solve.coef[i] = v / G[static_cast<size_t>(i) * p + i];
    }
    return solve;
}

double predict_with(const Matrix& X, int row, const std::vector<int>& cols,
                    const std::vector<double>& coef) {
    double v = coef[cols.size()];  // intercept
    for (size_t j = 0; j < cols.size(); ++j) v += coef[j] * X.at(row, cols[j]);
    return v;
}

// criterion: Pearson r between leave-one-out predictions and ratings
double inner_loo_r(const Matrix& X, const std::vector<double>& y, const std::vector<int>& cols,
                   double ridge) {
    const int n = X.rows;
    std::vector<double> preds(n);
    std::vector<int> rows;
    rows.reserve(n - 1);
    for (int held = 0; held < n; ++held) {
        rows.clear();
        for (int r = 0; r < n; ++r) {
            if (r != held) rows.push_back(r);
        }
        const Solve solve = ridge_solve(X, y, cols, ridge, rows);
        preds[held] = predict_with(X, held, cols, solve.coef);
    }
    return pearson_r(preds, y);
}

Matrix impute_columns(const Matrix& features, std::vector<double>& col_means) {
    Matrix X = features;
    col_means.assign(X.cols, 0.0);
    for (int j = 0; j < X.cols; ++j) {
        double sum = 0.0;
        int count = 0;
        for (int i = 0; i < X.rows; ++i) {
            if (!std::isnan(X.at(i, j))) {
                sum += X.at(i, j);
                ++count;
            }
        }
        col_means[j] = count > 0 ? sum / count : 0.0;
        for (int i = 0; i < X.rows; ++i) {
            if (std::isnan(X.at(i, j))) X.at(i, j) = col_means[j];
        }
    }
    return X;
}

}  // namespace

namespace {

// core fit without the public row-count precondition; LOSO refits call this
// on n-1 rows
LinearModel fit_forward_linear_core(const Matrix& features, const std::vector<double>& ratings,
                                    const SelectionConfig& cfg) {
    if (static_cast<size_t>(features.rows) != ratings.size()) {
        fail(ErrKind::ShapeMismatch, "feature rows and ratings disagree");
    }

    LinearModel model;
    Matrix X = impute_columns(features, model.column_means);

    double current = -std::numeric_limits<double>::infinity();
    while (static_cast<int>(model.features.size()) < cfg.max_features) {
        int best_feature = -1;
        double best_r = -std::numeric_limits<double>::infinity();
        for (int f = 0; f < X.cols; ++f) {
            if (std::find(model.features.begin(), model.features.end(), f) != model.features.end()) {
                continue;
            }
            std::vector<int> candidate = model.features;
            candidate.push_back(f);
            const double r = inner_loo_r(X, ratings, candidate, cfg.ridge);
            if (!std::isnan(r) && r > best_r) {
                best_r = r;
                best_feature = f;
            }
        }
        if (best_feature < 0 || best_r - current < cfg.stop_threshold) break;
        model.features.push_back(best_feature);
        model.trace.push_back({best_feature, best_r});
        current = best_r;
    }

    std::vector<int> rows(X.rows);
    for (int i = 0; i < X.rows; ++i) rows[i] = i;
    const Solve solve = ridge_solve(X, ratings, model.features, cfg.ridge, rows);
    model.weights.assign(solve.coef.begin(), solve.coef.begin() + model.features.size());
    model.intercept = solve.coef[model.features.size()];
    model.rank_deficient = solve.rank_deficient;
    return model;
}

}  // namespace

LinearModel fit_forward_linear(const Matrix& features, const std::vector<double>& ratings,
                               const SelectionConfig& cfg) {
    if (features.rows < 4) fail(ErrKind::InvalidArgument, "need at least 4 speakers");
    return fit_forward_linear_core(features, ratings, cfg);
}

double predict(const LinearModel& model, const std::vector<double>& row) {
    double v = model.intercept;
    for (size_t j = 0; j < model.features.size(); ++j) {
        const int f = model.features[j];
        double x = row[f];
        if (std::isnan(x)) x = model.column_means[f];
        v += model.weights[j] * x;
    }
    return v;
}

LosoResult loso_evaluate(const Matrix& features, const std::vector<double>& ratings,
                         const SelectionConfig& cfg) {
    const int n = features.rows;
    if (n < 4) fail(ErrKind::InvalidArgument, "need at least 4 speakers");
    LosoResult result;
    result.predictions.resize(n);
    for (int held = 0; held < n; ++held) {
        Matrix train(n - 1, features.cols);
        std::vector<double> y;
        y.reserve(n - 1);
        int r = 0;
        for (int i = 0; i < n; ++i) {
            if (i == held) continue;
            std::copy(features.row(i), features.row(i) + features.cols, train.row(r));
            y.push_back(ratings[i]);
            ++r;
        }
        const LinearModel model = fit_forward_linear_core(train, y, cfg);
        std::vector<double> row(features.row(held), features.row(held) + features.cols);
        result.predictions[held] = predict(model, row);
    }
    result.corr = pearson(result.predictions, ratings);
    return result;
}

FeatureTable build_feature_table(const std::vector<OamScore>& scores, const RatingTable& ratings,
                                 const std::vector<std::string>& consonant_order) {
    std::map<std::string, double> rating_by_speaker;
    for (const RatingRow& row : ratings.rows) rating_by_speaker[row.speaker_id] = row.rating;

    std::map<std::string, std::map<std::string, std::pair<double, int>>> sums;
    for (const OamScore& s : scores) {
        auto& cell = sums[s.speaker_id][s.target_consonant];
        cell.first += s.value;
        cell.second += 1;
    }

    FeatureTable table;
    table.feature_names = consonant_order;
    for (const auto& [speaker, _] : sums) {
        if (rating_by_speaker.count(speaker)) table.speaker_ids.push_back(speaker);
    }
    if (table.speaker_ids.empty()) {
        fail(ErrKind::NoOverlap, "no speakers common to scores and ratings");
    }
    table.values = Matrix(static_cast<int>(table.speaker_ids.size()),
                          static_cast<int>(consonant_order.size()));
    std::fill(table.values.data.begin(), table.values.data.end(), kNaN);
    for (size_t i = 0; i < table.speaker_ids.size(); ++i) {
        const auto& consonants = sums[table.speaker_ids[i]];
        for (size_t j = 0; j < consonant_order.size(); ++j) {
            auto it = consonants.find(consonant_order[j]);
            if (it != consonants.end()) {
                table.values.at(static_cast<int>(i), static_cast<int>(j)) =
                    it->second.first / it->second.second;
            }
        }
        table.ratings.push_back(rating_by_speaker[table.speaker_ids[i]]);
    }
    return table;
}

std::vector<GammaCell> gamma_table(const std::vector<OamScore>& scores) {
    std::map<std::string, std::map<std::string, std::vector<double>>> cells;
    for (const OamScore& s : scores) cells[s.speaker_id][s.target_consonant].push_back(s.value);
    std::vector<GammaCell> out;
    for (const auto& [speaker, consonants] : cells) {
        for (const auto& [consonant, values] : consonants) {
            out.push_back({speaker, consonant, cov({speaker, consonant, values})});
        }
    }
    return out;
}

CovCompareResult cov_compare(const std::vector<OamScore>& scores_a,
                             const std::vector<OamScore>& scores_b) {
    const std::vector<GammaCell> a = gamma_table(scores_a);
    const std::vector<GammaCell> b = gamma_table(scores_b);
    std::map<std::pair<std::string, std::string>, double> b_index;
    for (const GammaCell& cell : b) b_index[{cell.speaker_id, cell.consonant}] = cell.gamma;

    CovCompareResult result;
    for (const GammaCell& cell : a) {
        auto it = b_index.find({cell.speaker_id, cell.consonant});
        if (it == b_index.end()) continue;
        result.speaker_ids.push_back(cell.speaker_id);
        result.consonants.push_back(cell.consonant);
        result.gamma_a.push_back(cell.gamma);
        result.gamma_b.push_back(it->second);
    }
    if (result.gamma_a.empty()) {
        fail(ErrKind::NoOverlap, "no (speaker, consonant) cells common to both tables");
    }
    result.ttest = paired_ttest(result.gamma_a, result.gamma_b);
    return result;
}

}  // namespace cvoam
