#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cvoam/network.hpp"
#include "cvoam/parallel.hpp"

namespace cvoam {

namespace {

struct ParamView {
    double* w;
    const double* g;
    size_t n;
};

std::vector<ParamView> param_views(ModelParams& p, const Gradients& g) {
    return {
        {p.conv1_w.data.data(), g.conv1_w.data.data(), p.conv1_w.data.size()},
        {p.conv1_b.data(), g.conv1_b.data(), p.conv1_b.size()},
        {p.conv2_w.data.data(), g.conv2_w.data.data(), p.conv2_w.data.size()},
        {p.conv2_b.data(), g.conv2_b.data(), p.conv2_b.size()},
        {p.fc1_w.data.data(), g.fc1_w.data.data(), p.fc1_w.data.size()},
        {p.fc1_b.data(), g.fc1_b.data(), p.fc1_b.size()},
        {p.fc2_w.data.data(), g.fc2_w.data.data(), p.fc2_w.data.size()},
        {p.fc2_b.data(), g.fc2_b.data(), p.fc2_b.size()},
        {p.fc3_w.data.data(), g.fc3_w.data.data(), p.fc3_w.data.size()},
        {p.fc3_b.data(), g.fc3_b.data(), p.fc3_b.size()},
        {p.out_w.data.data(), g.out_w.data.data(), p.out_w.data.size()},
        {p.out_b.data(), g.out_b.data(), p.out_b.size()},
    };
}

class Adam {
  public:
    Adam(size_t total, const TrainConfig& cfg) : cfg_(cfg), m_(total, 0.0), v_(total, 0.0) {}

    void step(ModelParams& params, const Gradients& grads) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
        const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
        size_t offset = 0;
        for (const ParamView& view : param_views(params, grads)) {
            double* m = m_.data() + offset;
            double* v = v_.data() + offset;
            double* w = view.w;
            const double* g = view.g;
            const double b1 = cfg_.beta1, b2 = cfg_.beta2;
            const double lr = cfg_.learning_rate, eps = cfg_.epsilon;
            parallel_for(0, static_cast<int>(view.n), [&](int i0, int i1) {
                for (int i = i0; i < i1; ++i) {
                    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                    w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
                }
            });
            offset += view.n;
        }
    }

  private:
    TrainConfig cfg_;
    int t_ = 0;
    std::vector<double> m_, v_;
};

size_t total_params(const ModelParams& p) {
    return p.conv1_w.size() + p.conv1_b.size() + p.conv2_w.size() + p.conv2_b.size() +
           p.fc1_w.size() + p.fc1_b.size() + p.fc2_w.size() + p.fc2_b.size() + p.fc3_w.size() +
           p.fc3_b.size() + p.out_w.size() + p.out_b.size();
}

struct Batch {
    std::vector<const MelSpectrogram*> inputs;
    std::vector<int> labels;
};

// Sentence batching: each batch holds every CV transition of
// `sentences_per_batch` consecutive (shuffled) utterances, so the segment
// count varies across batches.
std::vector<Batch> make_batches(const std::vector<TrainUtterance>& data,
                                const std::vector<int>& order, const TrainConfig& cfg) {
    std::vector<Batch> batches;
    if (cfg.fixed_segments_per_batch > 0) {
        Batch cur;
        for (int u : order) {
            for (size_t i = 0; i < data[u].inputs.size(); ++i) {
                cur.inputs.push_back(&data[u].inputs[i]);
                cur.labels.push_back(data[u].labels[i]);
                if (static_cast<int>(cur.inputs.size()) == cfg.fixed_segments_per_batch) {
                    batches.push_back(std::move(cur));
                    cur = Batch{};
                }
            }
        }
        if (!cur.inputs.empty()) batches.push_back(std::move(cur));
        return batches;
    }
    for (size_t pos = 0; pos < order.size(); pos += cfg.sentences_per_batch) {
        Batch cur;
        const size_t end = std::min(pos + cfg.sentences_per_batch, order.size());
        for (size_t k = pos; k < end; ++k) {
            const TrainUtterance& utt = data[order[k]];
            for (size_t i = 0; i < utt.inputs.size(); ++i) {
                cur.inputs.push_back(&utt.inputs[i]);
                cur.labels.push_back(utt.labels[i]);
            }
        }
        if (!cur.inputs.empty()) batches.push_back(std::move(cur));
    }
    return batches;
}

}  // namespace

TrainResult train(const std::vector<TrainUtterance>& data, const NetConfig& net,
                  const TrainConfig& cfg, const PhoneInventory& inventory, int window_ms,
                  const MelParams& mel) {
    size_t total_segments = 0;
    for (const TrainUtterance& utt : data) {
        if (utt.inputs.size() != utt.labels.size()) {
            fail(ErrKind::ShapeMismatch, "utterance '" + utt.utterance_id + "': input/label mismatch");
        }
        for (int label : utt.labels) {
            if (label < 0 || label >= net.n_classes) {
                fail(ErrKind::IndexOutOfRange, "utterance '" + utt.utterance_id + "': bad label");
            }
        }
        total_segments += utt.inputs.size();
    }
    if (total_segments == 0) fail(ErrKind::EmptyTrainingSet, "no CV segments to train on");
    if (cfg.epochs < 1 || cfg.learning_rate <= 0 || cfg.sentences_per_batch < 1 ||
        cfg.beta1 <= 0 || cfg.beta1 >= 1 || cfg.beta2 <= 0 || cfg.beta2 >= 1 || cfg.epsilon <= 0) {
        fail(ErrKind::InvalidArgument, "bad training configuration");
    }

    std::mt19937_64 rng(cfg.seed);
    TrainResult result;
    result.params = init_params(net, inventory, window_ms, mel, rng);
    Adam adam(total_params(result.params), cfg);

    std::vector<int> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    BatchCache cache;  // workspaces live across batches
    Gradients grads;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        size_t correct = 0, seen = 0;
        for (Batch& batch : make_batches(data, order, cfg)) {
            forward_batch(result.params, batch.inputs, cache);
            epoch_loss += cross_entropy(cache.probs, batch.labels);
            for (int i = 0; i < cache.batch; ++i) {
                const double* p = cache.probs.row(i);
                const int pred = static_cast<int>(std::max_element(p, p + net.n_classes) - p);
                if (pred == batch.labels[i]) ++correct;
            }
            seen += batch.inputs.size();
            backward_batch(result.params, cache, batch.labels, grads);
            adam.step(result.params, grads);
        }
        result.log.push_back({epoch, epoch_loss / static_cast<double>(total_segments),
                              static_cast<double>(correct) / static_cast<double>(seen)});
    }
    return result;
}

}  // namespace cvoam
