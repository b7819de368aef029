// cvoam: consonant-vowel articulation measure toolkit.
//
// Subcommands cover the full pipeline: train / eval / score turn audio +
// alignments into consonant posteriors and OAM scores; correlate / fit / cov
// run the rating analyses; sweep, saliency and jitter are the supporting
// experiments. All outputs are CSV, written atomically, and every source of
// randomness goes through --seed, so identical invocations produce identical
// bytes.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cvoam/analytics.hpp"
#include "cvoam/csv.hpp"
#include "cvoam/network.hpp"
#include "cvoam/oam.hpp"
#include "cvoam/parallel.hpp"
#include "cvoam/pipeline.hpp"
#include "cvoam/segmenter.hpp"

using namespace cvoam;

namespace {

struct CommonOpts {
    uint64_t seed = 42;
    int threads = 0;
    std::string tier = "phones";
    std::string inventory_path;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--seed", opts.seed, "Seed for every random choice")->capture_default_str();
    cmd->add_option("--threads", opts.threads, "Worker threads (0 = machine cores)")
        ->capture_default_str();
    cmd->add_option("--tier", opts.tier, "TextGrid tier holding the phones")
        ->capture_default_str();
    cmd->add_option("--inventory", opts.inventory_path,
                    "JSON file with {\"consonants\": [...], \"vowels\": [...]}");
}

PhoneInventory resolve_inventory(const CommonOpts& opts) {
    if (!opts.inventory_path.empty()) return PhoneInventory::from_json_file(opts.inventory_path);
    return PhoneInventory::defaults();
}

std::string training_log_csv(const std::vector<EpochStats>& log) {
    std::string out = "epoch,loss,train_accuracy\n";
    for (const EpochStats& row : log) {
        out += std::to_string(row.epoch);
        out += ',';
        out += format_double(row.loss);
        out += ',';
        out += format_double(row.train_accuracy);
        out += '\n';
    }
    return out;
}

std::string confusion_csv(const EvalResult& eval, const std::vector<std::string>& consonants) {
    std::string out = "true";
    for (const auto& c : consonants) {
        out += ',';
        out += csv_escape(c);
    }
    out += '\n';
    for (size_t i = 0; i < consonants.size(); ++i) {
        out += csv_escape(consonants[i]);
        for (size_t j = 0; j < consonants.size(); ++j) {
            out += ',';
            out += std::to_string(static_cast<long long>(eval.confusion.at(static_cast<int>(i),
                                                                           static_cast<int>(j))));
        }
        out += '\n';
    }
    return out;
}

int run_train(const CommonOpts& common, const std::string& manifest_path,
              const std::string& out_path, const std::string& log_path, const TrainConfig& cfg,
              int window_ms) {
    PhoneInventory inventory = resolve_inventory(common);
    Manifest manifest = load_manifest(manifest_path);
    MelParams mel;
    NetConfig net;
    net.input_h = mel.n_mels;
    net.input_w = window_ms / 5;
    net.n_classes = inventory.size();

    auto data = featurize_manifest(manifest, inventory, window_ms, mel, common.tier);
    TrainResult result = train(data, net, cfg, inventory, window_ms, mel);
    save_model(result.params, out_path);
    write_file_atomic(log_path, training_log_csv(result.log));
    std::printf("trained %zu utterances, final loss %s, train accuracy %s\n", data.size(),
                format_double(result.log.back().loss).c_str(),
                format_double(result.log.back().train_accuracy).c_str());
    std::printf("model: %s\nlog: %s\n", out_path.c_str(), log_path.c_str());
    return 0;
}

int run_eval(const CommonOpts& common, const std::string& manifest_path,
             const std::string& model_path, const std::string& confusion_path) {
    ModelParams model = load_model(model_path);
    Manifest manifest = load_manifest(manifest_path);
    EvalResult eval = evaluate_manifest(model, manifest, common.tier);
    if (!confusion_path.empty()) {
        write_file_atomic(confusion_path, confusion_csv(eval, model.inventory.consonants));
    }
    std::printf("segments=%d accuracy=%s\n", eval.total, format_double(eval.accuracy).c_str());
    return 0;
}

int run_score(const CommonOpts& common, const std::string& manifest_path,
              const std::string& model_path, const std::string& scores_path,
              const std::string& report_path) {
    ModelParams model = load_model(model_path);
    Manifest manifest = load_manifest(manifest_path);
    auto scores = score_corpus(model, manifest, model.inventory, model.window_ms, common.tier);
    write_file_atomic(scores_path, scores_to_csv(scores));
    if (!report_path.empty()) {
        if (scores.empty()) fail(ErrKind::EmptyTrainingSet, "no CV instances to aggregate");
        write_file_atomic(report_path,
                          speaker_report_to_csv(aggregate(scores), model.inventory.consonants));
    }
    std::printf("scored %zu CV instances\n", scores.size());
    return 0;
}

int run_correlate(const std::string& scores_path, const std::string& ratings_path,
                  const std::string& out_path) {
    auto scores = load_scores_csv(scores_path);
    RatingTable ratings = load_ratings(ratings_path);
    if (scores.empty()) fail(ErrKind::EmptyTrainingSet, "empty scores table");
    auto reports = aggregate(scores);

    std::vector<double> x, y;
    std::string csv = "speaker_id,rating,speaker_oam\n";
    for (const RatingRow& row : ratings.rows) {
        for (const SpeakerReport& report : reports) {
            if (report.speaker_id == row.speaker_id) {
                x.push_back(row.rating);
                y.push_back(report.speaker_level_oam);
                csv += csv_escape(row.speaker_id);
                csv += ',';
                csv += format_double(row.rating);
                csv += ',';
                csv += format_double(report.speaker_level_oam);
                csv += '\n';
            }
        }
    }
    if (x.empty()) fail(ErrKind::NoOverlap, "no speakers common to scores and ratings");
    write_file_atomic(out_path, csv);
    CorrelationResult corr = pearson(x, y);
    std::printf("n=%d r=%s t=%s p=%s\n", corr.n, format_double(corr.r).c_str(),
                format_double(corr.t_stat).c_str(), format_double(corr.p_value).c_str());
    return 0;
}

std::string trace_csv(const LinearModel& model, const std::vector<std::string>& names) {
    std::string out = "step,consonant,criterion\n";
    for (size_t s = 0; s < model.trace.size(); ++s) {
        out += std::to_string(s + 1);
        out += ',';
        out += csv_escape(names[model.trace[s].feature]);
        out += ',';
        out += format_double(model.trace[s].criterion);
        out += '\n';
    }
    return out;
}

int run_fit(const CommonOpts& common, const std::string& scores_path,
            const std::string& ratings_path, bool loso, const std::string& predictions_path,
            const std::string& trace_path, const SelectionConfig& sel) {
    PhoneInventory inventory = resolve_inventory(common);
    auto scores = load_scores_csv(scores_path);
    RatingTable ratings = load_ratings(ratings_path);
    FeatureTable table = build_feature_table(scores, ratings, inventory.consonants);

    LinearModel model = fit_forward_linear(table.values, table.ratings, sel);
    if (!trace_path.empty()) write_file_atomic(trace_path, trace_csv(model, table.feature_names));
    std::printf("selected %zu features:", model.features.size());
    for (size_t j = 0; j < model.features.size(); ++j) {
        std::printf(" %s=%s", table.feature_names[model.features[j]].c_str(),
                    format_double(model.weights[j]).c_str());
    }
    std::printf(" intercept=%s\n", format_double(model.intercept).c_str());
    if (model.rank_deficient) std::printf("warning: rank-deficient normal equations\n");

    std::vector<double> predictions;
    CorrelationResult corr;
    if (loso) {
        LosoResult result = loso_evaluate(table.values, table.ratings, sel);
        predictions = result.predictions;
        corr = result.corr;
    } else {
        for (int i = 0; i < table.values.rows; ++i) {
            std::vector<double> row(table.values.row(i), table.values.row(i) + table.values.cols);
            predictions.push_back(predict(model, row));
        }
        corr = pearson(predictions, table.ratings);
    }
    std::string csv = "speaker_id,rating,predicted\n";
    for (size_t i = 0; i < table.speaker_ids.size(); ++i) {
        csv += csv_escape(table.speaker_ids[i]);
        csv += ',';
        csv += format_double(table.ratings[i]);
        csv += ',';
        csv += format_double(predictions[i]);
        csv += '\n';
    }
    write_file_atomic(predictions_path, csv);
    std::printf("%s n=%d r=%s p=%s\n", loso ? "loso" : "in-sample", corr.n,
                format_double(corr.r).c_str(), format_double(corr.p_value).c_str());
    return 0;
}

int run_sweep(const CommonOpts& common, const std::string& train_path, const std::string& test_path,
              int from, int to, int step, const std::string& out_path, const TrainConfig& cfg) {
    if (step <= 0 || from > to) fail(ErrKind::InvalidArgument, "bad sweep range");
    PhoneInventory inventory = resolve_inventory(common);
    Manifest train_manifest = load_manifest(train_path);
    Manifest test_manifest = load_manifest(test_path);
    MelParams mel;
    NetConfig net;
    net.n_classes = inventory.size();
    std::vector<int> windows;
    for (int w = from; w <= to; w += step) windows.push_back(w);

    auto rows = sweep_window(train_manifest, test_manifest, net, cfg, inventory, mel, windows,
                             common.tier);
    std::string csv = "window_ms,accuracy\n";
    for (const SweepRow& row : rows) {
        csv += std::to_string(row.window_ms);
        csv += ',';
        csv += format_double(row.accuracy);
        csv += '\n';
        std::printf("window %d ms: accuracy %s\n", row.window_ms,
                    format_double(row.accuracy).c_str());
    }
    write_file_atomic(out_path, csv);
    return 0;
}

int run_saliency(const CommonOpts& common, const std::string& model_path,
                 const std::string& wav_path, const std::string& alignment_path, int onset_index,
                 const std::string& out_path, const std::string& mel_out_path, bool plain) {
    ModelParams model = load_model(model_path);
    AudioClip clip = load_wav(wav_path);
    AlignmentTrack track = parse_alignment(alignment_path, common.tier);
    auto onsets = find_vowel_onsets(track, model.inventory);
    if (onsets.empty()) fail(ErrKind::InvalidArgument, "no CV transitions in " + alignment_path);
    if (onset_index < 0 || onset_index >= static_cast<int>(onsets.size())) {
        fail(ErrKind::IndexOutOfRange, "--onset-index " + std::to_string(onset_index) +
                                           " outside [0, " + std::to_string(onsets.size()) + ")");
    }
    const VowelOnset& onset = onsets[onset_index];
    CVSegment segment = cut_segment(clip, onset, model.window_ms);
    MelFilterbank bank = build_filterbank(model.mel);
    MelSpectrogram mel = melspec(segment, bank);
    const int target = model.inventory.consonant_index(onset.preceding_consonant);

    SaliencyOptions options;
    options.guided = !plain;
    MelSpectrogram map = saliency(model, mel, target, options);
    write_file_atomic(out_path, melspec_to_csv(map));
    if (!mel_out_path.empty()) write_file_atomic(mel_out_path, melspec_to_csv(mel));
    std::printf("onset %d: consonant %s, vowel %s at %s s\n", onset_index,
                onset.preceding_consonant.c_str(), onset.vowel.c_str(),
                format_double(onset.time_s).c_str());
    return 0;
}

int run_cov(const std::string& scores_path, const std::string& scores_b_path,
            const std::string& out_path, const std::string& report_path) {
    auto scores = load_scores_csv(scores_path);
    if (scores.empty()) fail(ErrKind::EmptyTrainingSet, "empty scores table");
    if (scores_b_path.empty()) {
        std::string csv = "speaker_id,consonant,gamma\n";
        for (const GammaCell& cell : gamma_table(scores)) {
            csv += csv_escape(cell.speaker_id);
            csv += ',';
            csv += csv_escape(cell.consonant);
            csv += ',';
            csv += format_double(cell.gamma);
            csv += '\n';
        }
        write_file_atomic(out_path, csv);
        return 0;
    }
    auto scores_b = load_scores_csv(scores_b_path);
    CovCompareResult result = cov_compare(scores, scores_b);
    std::string csv = "speaker_id,consonant,gamma_a,gamma_b\n";
    for (size_t i = 0; i < result.gamma_a.size(); ++i) {
        csv += csv_escape(result.speaker_ids[i]);
        csv += ',';
        csv += csv_escape(result.consonants[i]);
        csv += ',';
        csv += format_double(result.gamma_a[i]);
        csv += ',';
        csv += format_double(result.gamma_b[i]);
        csv += '\n';
    }
    write_file_atomic(out_path, csv);
    std::string report = "matched_cells=" + std::to_string(result.gamma_a.size()) +
                         "\nt=" + format_double(result.ttest.t) +
                         "\ndf=" + std::to_string(result.ttest.df) +
                         "\np=" + format_double(result.ttest.p) + "\n";
    if (!report_path.empty()) write_file_atomic(report_path, report);
    std::printf("%s", report.c_str());
    return 0;
}

int run_jitter(const CommonOpts& common, const std::string& manifest_path, double sigma_ms,
               const std::string& out_dir) {
    PhoneInventory inventory = resolve_inventory(common);
    Manifest manifest = load_manifest(manifest_path);
    namespace fs = std::filesystem;
    std::vector<std::pair<std::string, std::string>> outputs;  // path, content
    std::string new_manifest = "utterance_id,speaker_id,audio_path,alignment_path\n";
    for (size_t i = 0; i < manifest.rows.size(); ++i) {
        const ManifestRow& row = manifest.rows[i];
        AlignmentTrack track = parse_alignment(row.alignment_path, common.tier);
        AlignmentTrack jittered =
            jitter_onsets(track, inventory, sigma_ms, common.seed + static_cast<uint64_t>(i));
        std::string csv = "phone,start_s,end_s\n";
        for (const PhoneInterval& iv : jittered.intervals) {
            csv += csv_escape(iv.label);
            csv += ',';
            csv += format_double(iv.start_s);
            csv += ',';
            csv += format_double(iv.end_s);
            csv += '\n';
        }
        const std::string name = row.utterance_id + ".csv";
        outputs.emplace_back((fs::path(out_dir) / name).string(), std::move(csv));
        new_manifest += csv_escape(row.utterance_id) + "," + csv_escape(row.speaker_id) + "," +
                        csv_escape(fs::absolute(row.audio_path).string()) + "," + name + "\n";
    }
    outputs.emplace_back((fs::path(out_dir) / "manifest.csv").string(), std::move(new_manifest));
    for (const auto& [path, content] : outputs) write_file_atomic(path, content);
    std::printf("wrote %zu jittered alignments to %s\n", manifest.rows.size(), out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cvoam: objective articulation measure from CV transitions"};
    app.require_subcommand(1);

    CommonOpts common;

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the consonant CNN from a manifest");
    std::string train_manifest, train_out, train_log;
    TrainConfig train_cfg;
    int train_window = 160;
    train_cmd->add_option("--manifest", train_manifest, "Training manifest CSV")->required();
    train_cmd->add_option("--out", train_out, "Output model file")->required();
    train_cmd->add_option("--log", train_log, "Training log CSV (default: <out>.log.csv)");
    train_cmd->add_option("--epochs", train_cfg.epochs)->capture_default_str();
    train_cmd->add_option("--lr", train_cfg.learning_rate)->capture_default_str();
    train_cmd->add_option("--batch-sentences", train_cfg.sentences_per_batch)
        ->capture_default_str();
    train_cmd->add_option("--fixed-batch", train_cfg.fixed_segments_per_batch,
                          "Fixed segments per batch instead of 8-sentence batching (0 = off)")
        ->capture_default_str();
    train_cmd->add_option("--window-ms", train_window, "CV window length")
        ->check(CLI::IsMember({60, 80, 100, 120, 140, 160, 180, 200}))
        ->capture_default_str();
    add_common(train_cmd, common);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Consonant accuracy + confusion matrix");
    std::string eval_manifest, eval_model, eval_confusion;
    eval_cmd->add_option("--manifest", eval_manifest)->required();
    eval_cmd->add_option("--model", eval_model)->required();
    eval_cmd->add_option("--confusion", eval_confusion, "Confusion matrix CSV");
    add_common(eval_cmd, common);

    // score
    auto* score_cmd = app.add_subcommand("score", "Per-instance OAM scores + speaker report");
    std::string score_manifest, score_model, score_out, score_report;
    score_cmd->add_option("--manifest", score_manifest)->required();
    score_cmd->add_option("--model", score_model)->required();
    score_cmd->add_option("--scores", score_out, "Scores CSV")->required();
    score_cmd->add_option("--report", score_report, "Speaker report CSV");
    add_common(score_cmd, common);

    // correlate
    auto* corr_cmd = app.add_subcommand("correlate", "Speaker-level OAM vs perceptual ratings");
    std::string corr_scores, corr_ratings, corr_out;
    corr_cmd->add_option("--scores", corr_scores)->required();
    corr_cmd->add_option("--ratings", corr_ratings)->required();
    corr_cmd->add_option("--out", corr_out, "Scatter CSV (speaker_id,rating,speaker_oam)")
        ->required();
    add_common(corr_cmd, common);

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Forward-selection linear model on consonant OAM");
    std::string fit_scores, fit_ratings, fit_predictions, fit_trace;
    bool fit_loso = false;
    SelectionConfig fit_sel;
    fit_cmd->add_option("--scores", fit_scores)->required();
    fit_cmd->add_option("--ratings", fit_ratings)->required();
    fit_cmd->add_option("--predictions", fit_predictions, "Predictions CSV")->required();
    fit_cmd->add_option("--trace", fit_trace, "Selection trace CSV");
    fit_cmd->add_flag("--loso", fit_loso, "Leave-one-speaker-out evaluation");
    fit_cmd->add_option("--max-features", fit_sel.max_features)->capture_default_str();
    fit_cmd->add_option("--stop-threshold", fit_sel.stop_threshold)->capture_default_str();
    fit_cmd->add_option("--ridge", fit_sel.ridge)->capture_default_str();
    add_common(fit_cmd, common);

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Accuracy across CV window lengths");
    std::string sweep_train, sweep_test, sweep_out;
    int sweep_from = 60, sweep_to = 200, sweep_step = 20;
    TrainConfig sweep_cfg;
    sweep_cmd->add_option("--train-manifest", sweep_train)->required();
    sweep_cmd->add_option("--test-manifest", sweep_test)->required();
    sweep_cmd->add_option("--from", sweep_from)->capture_default_str();
    sweep_cmd->add_option("--to", sweep_to)->capture_default_str();
    sweep_cmd->add_option("--step", sweep_step)->capture_default_str();
    sweep_cmd->add_option("--out", sweep_out, "window_ms,accuracy CSV")->required();
    sweep_cmd->add_option("--epochs", sweep_cfg.epochs)->capture_default_str();
    sweep_cmd->add_option("--lr", sweep_cfg.learning_rate)->capture_default_str();
    sweep_cmd->add_option("--batch-sentences", sweep_cfg.sentences_per_batch)
        ->capture_default_str();
    add_common(sweep_cmd, common);

    // saliency
    auto* sal_cmd = app.add_subcommand("saliency", "Guided-backprop saliency map for one CV onset");
    std::string sal_model, sal_wav, sal_alignment, sal_out, sal_mel_out;
    int sal_index = 0;
    bool sal_plain = false;
    sal_cmd->add_option("--model", sal_model)->required();
    sal_cmd->add_option("--wav", sal_wav)->required();
    sal_cmd->add_option("--alignment", sal_alignment)->required();
    sal_cmd->add_option("--onset-index", sal_index, "Which CV onset in the utterance")
        ->capture_default_str();
    sal_cmd->add_option("--out", sal_out, "Saliency CSV (40 rows x frames)")->required();
    sal_cmd->add_option("--mel-out", sal_mel_out, "Companion mel-spectrogram CSV");
    sal_cmd->add_flag("--plain", sal_plain, "Plain gradient instead of guided backprop");
    add_common(sal_cmd, common);

    // cov
    auto* cov_cmd = app.add_subcommand("cov", "Coefficient of variation per (speaker, consonant)");
    std::string cov_scores, cov_scores_b, cov_out, cov_report;
    cov_cmd->add_option("--scores", cov_scores)->required();
    cov_cmd->add_option("--scores-b", cov_scores_b, "Second table for a paired comparison");
    cov_cmd->add_option("--out", cov_out, "Gamma CSV")->required();
    cov_cmd->add_option("--report", cov_report, "Paired t-test report (two-table mode)");
    add_common(cov_cmd, common);

    // jitter
    auto* jit_cmd = app.add_subcommand("jitter", "Perturb vowel onsets with Gaussian noise");
    std::string jit_manifest, jit_dir;
    double jit_sigma = 20.0;
    jit_cmd->add_option("--manifest", jit_manifest)->required();
    jit_cmd->add_option("--sigma-ms", jit_sigma, "Onset noise std in milliseconds")
        ->capture_default_str();
    jit_cmd->add_option("--out-dir", jit_dir, "Directory for jittered alignments + manifest")
        ->required();
    add_common(jit_cmd, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        set_num_threads(common.threads);
        train_cfg.seed = common.seed;
        sweep_cfg.seed = common.seed;
        if (train_cmd->parsed()) {
            if (train_log.empty()) train_log = train_out + ".log.csv";
            return run_train(common, train_manifest, train_out, train_log, train_cfg, train_window);
        }
        if (eval_cmd->parsed()) return run_eval(common, eval_manifest, eval_model, eval_confusion);
        if (score_cmd->parsed()) {
            return run_score(common, score_manifest, score_model, score_out, score_report);
        }
        if (corr_cmd->parsed()) return run_correlate(corr_scores, corr_ratings, corr_out);
        if (fit_cmd->parsed()) {
            return run_fit(common, fit_scores, fit_ratings, fit_loso, fit_predictions, fit_trace,
                           fit_sel);
        }
        if (sweep_cmd->parsed()) {
            return run_sweep(common, sweep_train, sweep_test, sweep_from, sweep_to, sweep_step,
                             sweep_out, sweep_cfg);
        }
        if (sal_cmd->parsed()) {
            return run_saliency(common, sal_model, sal_wav, sal_alignment, sal_index, sal_out,
                                sal_mel_out, sal_plain);
        }
        if (cov_cmd->parsed()) return run_cov(cov_scores, cov_scores_b, cov_out, cov_report);
        if (jit_cmd->parsed()) return run_jitter(common, jit_manifest, jit_sigma, jit_dir);
        std::fprintf(stderr, "no subcommand\n");
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 3;
    }
}
