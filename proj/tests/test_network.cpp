#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cvoam/csv.hpp"
#include "cvoam/network.hpp"
#include "naive_net.hpp"
#include "synthetic_data.hpp"
#include "test_util.hpp"

using namespace cvoam;
using testutil::TempDir;

namespace {

NetConfig tiny_net() {
    NetConfig net;
    net.input_h = 12;
    net.input_w = 10;
    net.conv1_h = 3;
    net.conv1_w = 3;
    net.conv1_filters = 8;
    net.conv2_h = 3;
    net.conv2_w = 2;
    net.conv2_filters = 8;
    net.fc_width = 32;
    net.n_classes = 4;
    return net;
}

ModelParams tiny_model(uint64_t seed) {
    return init_params(tiny_net(), synth::small_inventory(4), 160, MelParams{}, seed);
}

void check_tensor_close(const Tensor& a, const Tensor& b, double tol) {
    REQUIRE(a.data.size() == b.data.size());
    for (size_t i = 0; i < a.data.size(); ++i) {
        CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(tol));
    }
}

}  // namespace

TEST_CASE("shape arithmetic of the full architecture") {
    NetConfig net;  // default architecture
    CHECK(net.conv1_out_h() == 32);
    CHECK(net.conv1_out_w() == 28);
    CHECK(net.pool1_out_h() == 31);
    CHECK(net.pool1_out_w() == 27);
    CHECK(net.conv2_out_h() == 27);
    CHECK(net.conv2_out_w() == 25);
    CHECK(net.pool2_out_h() == 26);
    CHECK(net.pool2_out_w() == 24);
    CHECK(net.flatten_dim() == 39936);
    net.validate();

    NetConfig bad = net;
    bad.input_h = 8;  // collapses under the 9-tall first kernel
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("forward: softmax is a probability vector for random inputs") {
    std::mt19937_64 rng(1);
    ModelParams model = tiny_model(7);
    for (int trial = 0; trial < 50; ++trial) {
        MelSpectrogram mel = synth::random_mel(12, 10, rng);
        PosteriorVector p = forward(model, mel);
        REQUIRE(p.size() == 4);
        double sum = 0.0;
        for (double v : p) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("forward: all-zero parameters give the uniform posterior") {
    ModelParams model = tiny_model(3);
    for (auto* t : {&model.conv1_w.data, &model.conv2_w.data, &model.fc1_w.data, &model.fc2_w.data,
                    &model.fc3_w.data, &model.out_w.data}) {
        std::fill(t->begin(), t->end(), 0.0);
    }
    std::mt19937_64 rng(2);
    MelSpectrogram mel = synth::random_mel(12, 10, rng);
    PosteriorVector p = forward(model, mel);
    for (double v : p) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("forward: every layer matches the naive loop implementation") {
    std::mt19937_64 rng(41);
    ModelParams model = tiny_model(19);
    for (int trial = 0; trial < 3; ++trial) {
        MelSpectrogram mel = synth::random_mel(12, 10, rng);
        BatchCache cache = forward_batch(model, {&mel});
        naive::Layers ref = naive::forward(model, mel);

        check_tensor_close(cache.conv1_pre[0], ref.conv1_pre, 1e-5);
        check_tensor_close(cache.conv1_act[0], ref.conv1_act, 1e-5);
        check_tensor_close(cache.pool1[0], ref.pool1, 1e-5);
        check_tensor_close(cache.conv2_pre[0], ref.conv2_pre, 1e-5);
        check_tensor_close(cache.pool2[0], ref.pool2, 1e-5);
        for (int j = 0; j < cache.fc1_pre.cols; ++j) {
            CHECK(cache.fc1_pre.at(0, j) == doctest::Approx(ref.fc1_pre[j]).epsilon(1e-5));
        }
        for (int j = 0; j < cache.fc3_act.cols; ++j) {
            CHECK(cache.fc3_act.at(0, j) == doctest::Approx(ref.fc3_act[j]).epsilon(1e-5));
        }
        for (int j = 0; j < cache.logits.cols; ++j) {
            CHECK(cache.logits.at(0, j) == doctest::Approx(ref.logits[j]).epsilon(1e-5));
            CHECK(cache.probs.at(0, j) == doctest::Approx(ref.probs[j]).epsilon(1e-5));
        }
    }
}

TEST_CASE("forward: batched path equals one-at-a-time path") {
    std::mt19937_64 rng(55);
    ModelParams model = tiny_model(23);
    std::vector<MelSpectrogram> mels;
    for (int i = 0; i < 7; ++i) mels.push_back(synth::random_mel(12, 10, rng));
    std::vector<const MelSpectrogram*> ptrs;
    for (const auto& m : mels) ptrs.push_back(&m);
    BatchCache batch = forward_batch(model, ptrs);
    for (int i = 0; i < 7; ++i) {
        PosteriorVector single = forward(model, mels[i]);
        for (int j = 0; j < 4; ++j) {
            CHECK(batch.probs.at(i, j) == doctest::Approx(single[j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("forward: shape mismatch is rejected") {
    ModelParams model = tiny_model(9);
    std::mt19937_64 rng(4);
    MelSpectrogram wrong = synth::random_mel(12, 11, rng);
    CHECK_THROWS_AS(forward(model, wrong), Error);
}

TEST_CASE("loss: perfect prediction, uniform prediction, scalar-loop oracle") {
    // perfect one-hot: floored log keeps the loss at machine scale
    Matrix probs(1, 4);
    probs.at(0, 2) = 1.0;
    CHECK(std::fabs(cross_entropy(probs, {2})) <= 1e-11);

    // uniform over K = 21
    Matrix uniform(1, 21);
    for (int j = 0; j < 21; ++j) uniform.at(0, j) = 1.0 / 21.0;
    CHECK(cross_entropy(uniform, {5}) == doctest::Approx(std::log(21.0)).epsilon(1e-12));
    CHECK(cross_entropy(uniform, {5}) == doctest::Approx(3.0445).epsilon(1e-4));

    // random batch of 8 against a scalar double loop over one-hot labels
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> dist(0.01, 1.0);
    Matrix batch(8, 5);
    std::vector<int> labels;
    for (int i = 0; i < 8; ++i) {
        double sum = 0.0;
        for (int j = 0; j < 5; ++j) {
            batch.at(i, j) = dist(rng);
            sum += batch.at(i, j);
        }
        for (int j = 0; j < 5; ++j) batch.at(i, j) /= sum;
        labels.push_back(i % 5);
    }
    double expected = 0.0;
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 5; ++j) {
            const double y = (j == labels[i]) ? 1.0 : 0.0;
            expected -= y * std::log(batch.at(i, j));
        }
    }
    CHECK(cross_entropy(batch, labels) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("loss: permutation invariance and exact duplication scaling") {
    std::mt19937_64 rng(13);
    ModelParams model = tiny_model(29);
    std::vector<MelSpectrogram> mels;
    std::vector<int> labels;
    for (int i = 0; i < 6; ++i) {
        mels.push_back(synth::random_mel(12, 10, rng));
        labels.push_back(i % 4);
    }
    std::vector<const MelSpectrogram*> ptrs;
    for (const auto& m : mels) ptrs.push_back(&m);
    const double base = cross_entropy(forward_batch(model, ptrs).probs, labels);

    // permutation
    std::vector<const MelSpectrogram*> shuffled = {ptrs[3], ptrs[0], ptrs[5],
                                                   ptrs[1], ptrs[4], ptrs[2]};
    std::vector<int> shuffled_labels = {labels[3], labels[0], labels[5],
                                        labels[1], labels[4], labels[2]};
    const double permuted = cross_entropy(forward_batch(model, shuffled).probs, shuffled_labels);
    CHECK(permuted == doctest::Approx(base).epsilon(1e-12));

    // duplication doubles the loss and every gradient entry
    std::vector<const MelSpectrogram*> doubled = ptrs;
    doubled.insert(doubled.end(), ptrs.begin(), ptrs.end());
    std::vector<int> doubled_labels = labels;
    doubled_labels.insert(doubled_labels.end(), labels.begin(), labels.end());
    BatchCache c1 = forward_batch(model, ptrs);
    BatchCache c2 = forward_batch(model, doubled);
    CHECK(cross_entropy(c2.probs, doubled_labels) == doctest::Approx(2.0 * base).epsilon(1e-12));

    Gradients g1 = backward_batch(model, c1, labels);
    Gradients g2 = backward_batch(model, c2, doubled_labels);
    for (size_t i = 0; i < g1.fc1_w.data.size(); ++i) {
        CHECK(g2.fc1_w.data[i] == doctest::Approx(2.0 * g1.fc1_w.data[i]).epsilon(1e-12));
    }
    for (size_t i = 0; i < g1.conv1_w.data.size(); ++i) {
        CHECK(g2.conv1_w.data[i] == doctest::Approx(2.0 * g1.conv1_w.data[i]).epsilon(1e-12));
    }
    for (size_t i = 0; i < g1.out_b.size(); ++i) {
        CHECK(g2.out_b[i] == doctest::Approx(2.0 * g1.out_b[i]).epsilon(1e-12));
    }
}

TEST_CASE("backward: near-zero output gradient at a confident correct prediction") {
    ModelParams model = tiny_model(17);
    for (auto* t : {&model.conv1_w.data, &model.conv2_w.data, &model.fc1_w.data, &model.fc2_w.data,
                    &model.fc3_w.data, &model.out_w.data}) {
        std::fill(t->begin(), t->end(), 0.0);
    }
    model.out_b[1] = 40.0;  // posterior collapses onto class 1
    std::mt19937_64 rng(6);
    MelSpectrogram mel = synth::random_mel(12, 10, rng);
    BatchCache cache = forward_batch(model, {&mel});
    Gradients g = backward_batch(model, cache, {1});
    for (double v : g.out_b) CHECK(std::fabs(v) < 1e-6);
}

TEST_CASE("evaluate: constant predictor, confusion bookkeeping, trace identity") {
    ModelParams model = tiny_model(77);
    for (auto* t : {&model.conv1_w.data, &model.conv2_w.data, &model.fc1_w.data, &model.fc2_w.data,
                    &model.fc3_w.data, &model.out_w.data}) {
        std::fill(t->begin(), t->end(), 0.0);
    }
    model.out_b[0] = 5.0;  // always predicts class 0

    std::mt19937_64 rng(10);
    std::vector<MelSpectrogram> mels;
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) {
        mels.push_back(synth::random_mel(12, 10, rng));
        labels.push_back(i % 4);  // balanced
    }
    std::vector<const MelSpectrogram*> ptrs;
    for (const auto& m : mels) ptrs.push_back(&m);
    EvalResult eval = evaluate(model, ptrs, labels);
    CHECK(eval.accuracy == doctest::Approx(0.25));

    double total = 0.0, trace = 0.0;
    std::vector<double> row_sums(4, 0.0);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            total += eval.confusion.at(i, j);
            row_sums[i] += eval.confusion.at(i, j);
        }
        trace += eval.confusion.at(i, i);
    }
    CHECK(total == 40.0);
    for (double rs : row_sums) CHECK(rs == 10.0);
    CHECK(trace / total == doctest::Approx(eval.accuracy));
}

TEST_CASE("model io: save/load round trip is bitwise for float32 values") {
    TempDir dir;
    ModelParams model = tiny_model(101);
    const std::string path = dir.file("m.cvoam");
    save_model(model, path);
    ModelParams once = load_model(path);

    // after one float32 quantization the values are exactly representable,
    // so the next round trip must be bitwise
    const std::string path2 = dir.file("m2.cvoam");
    save_model(once, path2);
    ModelParams twice = load_model(path2);
    CHECK(read_text_file(path) == read_text_file(path2));
    REQUIRE(once.fc1_w.data.size() == twice.fc1_w.data.size());
    for (size_t i = 0; i < once.fc1_w.data.size(); ++i) {
        CHECK(once.fc1_w.data[i] == twice.fc1_w.data[i]);
    }
    for (size_t i = 0; i < once.conv2_w.data.size(); ++i) {
        CHECK(once.conv2_w.data[i] == twice.conv2_w.data[i]);
    }
    CHECK(once.inventory.consonants == model.inventory.consonants);
    CHECK(once.window_ms == model.window_ms);
    CHECK(once.net.flatten_dim() == model.net.flatten_dim());
}

TEST_CASE("model io: truncation, bad magic, version and shape edits") {
    TempDir dir;
    ModelParams model = tiny_model(55);
    const std::string path = dir.file("m.cvoam");
    save_model(model, path);
    std::string bytes = read_text_file(path);

    testutil::write_text(dir.file("trunc.cvoam"), bytes.substr(0, bytes.size() - 17));
    try {
        load_model(dir.file("trunc.cvoam"));
        FAIL("expected CorruptFile");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrKind::CorruptFile);
    }

    std::string magic_edit = bytes;
    magic_edit.replace(magic_edit.find("CVOAM1"), 6, "NOPE42");
    testutil::write_text(dir.file("magic.cvoam"), magic_edit);
    try {
        load_model(dir.file("magic.cvoam"));
        FAIL("expected CorruptFile");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrKind::CorruptFile);
    }

    std::string version_edit = bytes;
    version_edit.replace(version_edit.find("\"version\":1"), 11, "\"version\":9");
    testutil::write_text(dir.file("ver.cvoam"), version_edit);
    try {
        load_model(dir.file("ver.cvoam"));
        FAIL("expected VersionMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrKind::VersionMismatch);
    }

    // mutate one declared tensor shape: must disagree with the architecture
    std::string shape_edit = bytes;
    const std::string needle = "{\"name\":\"fc1_b\",\"shape\":[32]}";
    REQUIRE(shape_edit.find(needle) != std::string::npos);
    shape_edit.replace(shape_edit.find(needle), needle.size(),
                       "{\"name\":\"fc1_b\",\"shape\":[31]}");
    testutil::write_text(dir.file("shape.cvoam"), shape_edit);
    try {
        load_model(dir.file("shape.cvoam"));
        FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrKind::ShapeMismatch);
    }
}
