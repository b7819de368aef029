#include "cvoam/pipeline.hpp"

#include <algorithm>

#include "cvoam/parallel.hpp"
#include "cvoam/segmenter.hpp"

namespace cvoam {

std::vector<TrainUtterance> featurize_manifest(const Manifest& manifest,
                                               const PhoneInventory& inventory, int window_ms,
                                               const MelParams& mel,
                                               const std::string& tier_name) {
    const std::vector<CVSegment> segments = segment_corpus(manifest, inventory, window_ms, tier_name);
    const MelFilterbank bank = build_filterbank(mel);

    std::vector<MelSpectrogram> mels(segments.size());
    parallel_for(0, static_cast<int>(segments.size()), [&](int i0, int i1) {
        for (int i = i0; i < i1; ++i) mels[i] = melspec(segments[i], bank);
    });

    // segments arrive in manifest order; group on utterance boundaries
    std::vector<TrainUtterance> utterances;
    for (size_t i = 0; i < segments.size(); ++i) {
        if (utterances.empty() || utterances.back().utterance_id != segments[i].utterance_id) {
            utterances.push_back({segments[i].utterance_id, {}, {}});
        }
        utterances.back().inputs.push_back(std::move(mels[i]));
        utterances.back().labels.push_back(inventory.consonant_index(segments[i].target_consonant));
    }
    return utterances;
}

EvalResult evaluate_manifest(const ModelParams& params, const Manifest& manifest,
                             const std::string& tier_name) {
    const std::vector<TrainUtterance> data =
        featurize_manifest(manifest, params.inventory, params.window_ms, params.mel, tier_name);
    std::vector<const MelSpectrogram*> inputs;
    std::vector<int> labels;
    for (const TrainUtterance& utt : data) {
        for (size_t i = 0; i < utt.inputs.size(); ++i) {
            inputs.push_back(&utt.inputs[i]);
            labels.push_back(utt.labels[i]);
        }
    }
    return evaluate(params, inputs, labels);
}

std::vector<SweepRow> sweep_window(const Manifest& train_manifest, const Manifest& test_manifest,
                                   const NetConfig& net, const TrainConfig& cfg,
                                   const PhoneInventory& inventory, const MelParams& mel,
                                   const std::vector<int>& windows, const std::string& tier_name) {
    for (int w : windows) {
        if (w < 60 || w > 200 || w % 20 != 0) {
            fail(ErrKind::InvalidArgument,
                 "sweep windows must lie in {60, 80, ..., 200}, got " + std::to_string(w));
        }
    }
    std::vector<SweepRow> rows;
    for (int w : windows) {
        NetConfig net_w = net;
        net_w.input_h = mel.n_mels;
        net_w.input_w = w / 5;  // frame count follows the window
        const auto train_data = featurize_manifest(train_manifest, inventory, w, mel, tier_name);
        TrainResult trained = train(train_data, net_w, cfg, inventory, w, mel);

        const auto test_data = featurize_manifest(test_manifest, inventory, w, mel, tier_name);
        std::vector<const MelSpectrogram*> inputs;
        std::vector<int> labels;
        for (const TrainUtterance& utt : test_data) {
            for (size_t i = 0; i < utt.inputs.size(); ++i) {
                inputs.push_back(&utt.inputs[i]);
                labels.push_back(utt.labels[i]);
            }
        }
        EvalResult eval = evaluate(trained.params, inputs, labels);
        rows.push_back({w, eval.accuracy});
    }
    return rows;
}

}  // namespace cvoam
