#include "cvoam/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "cvoam/parallel.hpp"
#include "net_kernels.hpp"

namespace cvoam {

void NetConfig::validate() const {
    if (input_h < 1 || input_w < 1 || conv1_filters < 1 || conv2_filters < 1 || fc_width < 1 ||
        n_classes < 2 || pool < 1 || pool_stride < 1) {
        fail(ErrKind::ShapeMismatch, "non-positive network dimension");
    }
    if (conv1_out_h() < 1 || conv1_out_w() < 1 || pool1_out_h() < 1 || pool1_out_w() < 1 ||
        conv2_out_h() < 1 || conv2_out_w() < 1 || pool2_out_h() < 1 || pool2_out_w() < 1) {
        fail(ErrKind::ShapeMismatch, "input " + std::to_string(input_h) + "x" +
                                         std::to_string(input_w) +
                                         " is too small for the convolution stack");
    }
}

namespace detail {

// reuse buffers across batches: training allocates these once, so the hot
// loops never touch fresh pages
void ensure_tensor(Tensor& t, int h, int w, int c) {
    const size_t n = static_cast<size_t>(h) * w * c;
    t.h = h;
    t.w = w;
    t.c = c;
    if (t.data.size() != n) t.data.resize(n);
}

void ensure_matrix(Matrix& m, int rows, int cols) {
    const size_t n = static_cast<size_t>(rows) * cols;
    m.rows = rows;
    m.cols = cols;
    if (m.data.size() != n) m.data.resize(n);
}

// four fixed-order accumulators: deterministic and still vectorizable
double dot4(const double* a, const double* b, int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return ((s0 + s1) + (s2 + s3)) + tail;
}

void conv_forward(const Tensor& in, const ConvKernel& K, const std::vector<double>& bias,
                  Tensor& out) {
    const int oh = in.h - K.kh + 1, ow = in.w - K.kw + 1;
    const int ic = K.in_c, oc = K.out_c;
    ensure_tensor(out, oh, ow, oc);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double* o = &out.at(y, x, 0);
            std::copy(bias.begin(), bias.end(), o);
            for (int ky = 0; ky < K.kh; ++ky) {
                const double* irow = &in.at(y + ky, x, 0);
                const double* krow = &K.at(ky, 0, 0, 0);
                for (int t = 0; t < K.kw * ic; ++t) {
                    const double a = irow[t];
                    if (a == 0.0) continue;
                    const double* w = krow + static_cast<size_t>(t) * oc;
                    for (int j = 0; j < oc; ++j) o[j] += a * w[j];
                }
            }
        }
    }
}

// dW[ky][kx][c][oc] += sum_(y,x) in[y+ky][x+kx][c] * dout[y][x][oc]; sequential,
// callers parallelize across samples with their own partial buffers
void conv_backward_weights(const Tensor& in, const Tensor& dout, ConvKernel& gw,
                           std::vector<double>& gb) {
    const int oh = dout.h, ow = dout.w, oc = dout.c, ic = in.c;
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            const double* dO = &dout.at(y, x, 0);
            for (int ky = 0; ky < gw.kh; ++ky) {
                const double* irow = &in.at(y + ky, x, 0);
                double* grow = &gw.at(ky, 0, 0, 0);
                for (int t = 0; t < gw.kw * ic; ++t) {
                    const double a = irow[t];
                    if (a == 0.0) continue;
                    double* g = grow + static_cast<size_t>(t) * oc;
                    for (int j = 0; j < oc; ++j) g[j] += a * dO[j];
                }
            }
            for (int j = 0; j < oc; ++j) gb[j] += dO[j];
        }
    }
}

// din[y+ky][x+kx][c] += sum_oc K[ky][kx][c][oc] * dout[y][x][oc]; din must be
// zeroed by the caller
void conv_backward_input(const Tensor& dout, const ConvKernel& K, Tensor& din) {
    const int oh = dout.h, ow = dout.w, oc = K.out_c, ic = K.in_c;
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            const double* dO = &dout.at(y, x, 0);
            for (int ky = 0; ky < K.kh; ++ky) {
                for (int kx = 0; kx < K.kw; ++kx) {
                    double* drow = &din.at(y + ky, x + kx, 0);
                    const double* krow = &K.at(ky, kx, 0, 0);
                    for (int c = 0; c < ic; ++c) {
                        drow[c] += dot4(krow + static_cast<size_t>(c) * oc, dO, oc);
                    }
                }
            }
        }
    }
}

void maxpool_forward(const Tensor& in, int pool, int stride, Tensor& out,
                     std::vector<int>& argmax) {
    const int oh = (in.h - pool) / stride + 1, ow = (in.w - pool) / stride + 1, c = in.c;
    ensure_tensor(out, oh, ow, c);
    argmax.assign(out.size(), 0);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double* o = &out.at(y, x, 0);
            int* arg = argmax.data() + (static_cast<size_t>(y) * ow + x) * c;
            bool first = true;
            for (int py = 0; py < pool; ++py) {
                for (int px = 0; px < pool; ++px) {
                    const int iy = y * stride + py, ix = x * stride + px;
                    const double* v = &in.at(iy, ix, 0);
                    const int base = (iy * in.w + ix) * c;
                    if (first) {
                        for (int ch = 0; ch < c; ++ch) {
                            o[ch] = v[ch];
                            arg[ch] = base + ch;
                        }
                        first = false;
                    } else {
                        // strict > keeps the first (row-major) cell on ties
                        for (int ch = 0; ch < c; ++ch) {
                            if (v[ch] > o[ch]) {
                                o[ch] = v[ch];
                                arg[ch] = base + ch;
                            }
                        }
                    }
                }
            }
        }
    }
}

void maxpool_backward(const Tensor& dout, const std::vector<int>& argmax, Tensor& din) {
    for (size_t i = 0; i < dout.data.size(); ++i) {
        din.data[argmax[i]] += dout.data[i];
    }
}

// Y = X W + b, W streamed once per batch (threads own column blocks)
void fc_forward(const Matrix& X, const Matrix& W, const std::vector<double>& b, Matrix& Y) {
    const int B = X.rows, n = W.rows, m = W.cols;
    ensure_matrix(Y, B, m);
    for (int i = 0; i < B; ++i) std::copy(b.begin(), b.end(), Y.row(i));
    parallel_for(0, m, [&](int j0, int j1) {
        for (int k = 0; k < n; ++k) {
            const double* w = W.row(k);
            for (int i = 0; i < B; ++i) {
                const double a = X.at(i, k);
                if (a == 0.0) continue;
                double* y = Y.row(i);
                for (int j = j0; j < j1; ++j) y[j] += a * w[j];
            }
        }
    });
}

// dX = dY W^T
void fc_backward_input(const Matrix& dY, const Matrix& W, Matrix& dX) {
    const int B = dY.rows, m = W.cols, n = W.rows;
    ensure_matrix(dX, B, n);
    parallel_for(0, n, [&](int k0, int k1) {
        for (int k = k0; k < k1; ++k) {
            const double* w = W.row(k);
            for (int i = 0; i < B; ++i) dX.at(i, k) = dot4(dY.row(i), w, m);
        }
    });
}

// dW = X^T dY, db = column sums of dY. Each dW row accumulates in a local
// buffer and stores once, so the batch makes a single pass over dW.
void fc_backward_weights(const Matrix& X, const Matrix& dY, Matrix& dW, std::vector<double>& db) {
    const int B = X.rows, n = X.cols, m = dY.cols;
    ensure_matrix(dW, n, m);
    parallel_for(0, n, [&](int k0, int k1) {
        std::vector<double> acc(m);
        for (int k = k0; k < k1; ++k) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int i = 0; i < B; ++i) {
                const double a = X.at(i, k);
                if (a == 0.0) continue;
                const double* dy = dY.row(i);
                for (int j = 0; j < m; ++j) acc[j] += a * dy[j];
            }
            std::copy(acc.begin(), acc.end(), dW.row(k));
        }
    });
    db.assign(m, 0.0);
    for (int i = 0; i < B; ++i) {
        const double* dy = dY.row(i);
        for (int j = 0; j < m; ++j) db[j] += dy[j];
    }
}

void softmax_rows(const Matrix& logits, Matrix& probs) {
    ensure_matrix(probs, logits.rows, logits.cols);
    for (int i = 0; i < logits.rows; ++i) {
        const double* z = logits.row(i);
        double* p = probs.row(i);
        double mx = z[0];
        for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, z[j]);
        double sum = 0.0;
        for (int j = 0; j < logits.cols; ++j) {
            p[j] = std::exp(z[j] - mx);
            sum += p[j];
        }
        for (int j = 0; j < logits.cols; ++j) p[j] /= sum;
    }
}

Tensor tensor_from_mel(const MelSpectrogram& mel) {
    Tensor t(mel.n_mels, mel.n_frames, 1);
    std::copy(mel.values.begin(), mel.values.end(), t.data.begin());
    return t;
}

}  // namespace detail

using namespace detail;

ModelParams init_params(const NetConfig& net, const PhoneInventory& inventory, int window_ms,
                        const MelParams& mel, std::mt19937_64& rng) {
    net.validate();
    if (net.n_classes != inventory.size()) {
        fail(ErrKind::ShapeMismatch, "n_classes " + std::to_string(net.n_classes) +
                                         " != inventory size " + std::to_string(inventory.size()));
    }
    ModelParams p;
    p.net = net;
    p.inventory = inventory;
    p.window_ms = window_ms;
    p.mel = mel;

    auto fill_normal = [&rng](std::vector<double>& v, int fan_in) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        for (double& x : v) x = dist(rng);
    };

    p.conv1_w = ConvKernel(net.conv1_h, net.conv1_w, 1, net.conv1_filters);
    fill_normal(p.conv1_w.data, net.conv1_h * net.conv1_w);
    p.conv1_b.assign(net.conv1_filters, 0.0);

    p.conv2_w = ConvKernel(net.conv2_h, net.conv2_w, net.conv1_filters, net.conv2_filters);
    fill_normal(p.conv2_w.data, net.conv2_h * net.conv2_w * net.conv1_filters);
    p.conv2_b.assign(net.conv2_filters, 0.0);

    p.fc1_w = Matrix(net.flatten_dim(), net.fc_width);
    fill_normal(p.fc1_w.data, net.flatten_dim());
    p.fc1_b.assign(net.fc_width, 0.0);

    p.fc2_w = Matrix(net.fc_width, net.fc_width);
    fill_normal(p.fc2_w.data, net.fc_width);
    p.fc2_b.assign(net.fc_width, 0.0);

    p.fc3_w = Matrix(net.fc_width, net.fc_width);
    fill_normal(p.fc3_w.data, net.fc_width);
    p.fc3_b.assign(net.fc_width, 0.0);

    p.out_w = Matrix(net.fc_width, net.n_classes);
    fill_normal(p.out_w.data, net.fc_width);
    p.out_b.assign(net.n_classes, 0.0);
    return p;
}

ModelParams init_params(const NetConfig& net, const PhoneInventory& inventory, int window_ms,
                        const MelParams& mel, uint64_t seed) {
    std::mt19937_64 rng(seed);
    return init_params(net, inventory, window_ms, mel, rng);
}

void forward_batch(const ModelParams& params, const std::vector<const MelSpectrogram*>& inputs,
                   BatchCache& cache, Activation activation) {
    const NetConfig& net = params.net;
    const int B = static_cast<int>(inputs.size());
    cache.batch = B;
    cache.input.resize(B);
    cache.conv1_pre.resize(B);
    cache.conv1_act.resize(B);
    cache.pool1.resize(B);
    cache.pool1_arg.resize(B);
    cache.conv2_pre.resize(B);
    cache.conv2_act.resize(B);
    cache.pool2.resize(B);
    cache.pool2_arg.resize(B);

    for (int s = 0; s < B; ++s) {
        if (inputs[s]->n_mels != net.input_h || inputs[s]->n_frames != net.input_w) {
            fail(ErrKind::ShapeMismatch,
                 "input " + std::to_string(inputs[s]->n_mels) + "x" +
                     std::to_string(inputs[s]->n_frames) + ", model expects " +
                     std::to_string(net.input_h) + "x" + std::to_string(net.input_w));
        }
    }

    parallel_for(0, B, [&](int s0, int s1) {
        for (int s = s0; s < s1; ++s) {
            ensure_tensor(cache.input[s], net.input_h, net.input_w, 1);
            std::copy(inputs[s]->values.begin(), inputs[s]->values.end(),
                      cache.input[s].data.begin());
            conv_forward(cache.input[s], params.conv1_w, params.conv1_b, cache.conv1_pre[s]);
            cache.conv1_act[s] = cache.conv1_pre[s];
            if (activation == Activation::Relu) {
                for (double& v : cache.conv1_act[s].data) v = v > 0.0 ? v : 0.0;
            }
            maxpool_forward(cache.conv1_act[s], net.pool, net.pool_stride, cache.pool1[s],
                            cache.pool1_arg[s]);
            conv_forward(cache.pool1[s], params.conv2_w, params.conv2_b, cache.conv2_pre[s]);
            cache.conv2_act[s] = cache.conv2_pre[s];
            if (activation == Activation::Relu) {
                for (double& v : cache.conv2_act[s].data) v = v > 0.0 ? v : 0.0;
            }
            maxpool_forward(cache.conv2_act[s], net.pool, net.pool_stride, cache.pool2[s],
                            cache.pool2_arg[s]);
        }
    });

    ensure_matrix(cache.flat, B, net.flatten_dim());
    for (int s = 0; s < B; ++s) {
        std::copy(cache.pool2[s].data.begin(), cache.pool2[s].data.end(), cache.flat.row(s));
    }

    auto relu_rows = [&](const Matrix& pre, Matrix& act) {
        ensure_matrix(act, pre.rows, pre.cols);
        if (activation == Activation::Relu) {
            for (size_t i = 0; i < pre.data.size(); ++i) {
                act.data[i] = pre.data[i] > 0.0 ? pre.data[i] : 0.0;
            }
        } else {
            std::copy(pre.data.begin(), pre.data.end(), act.data.begin());
        }
    };

    fc_forward(cache.flat, params.fc1_w, params.fc1_b, cache.fc1_pre);
    relu_rows(cache.fc1_pre, cache.fc1_act);
    fc_forward(cache.fc1_act, params.fc2_w, params.fc2_b, cache.fc2_pre);
    relu_rows(cache.fc2_pre, cache.fc2_act);
    fc_forward(cache.fc2_act, params.fc3_w, params.fc3_b, cache.fc3_pre);
    relu_rows(cache.fc3_pre, cache.fc3_act);
    fc_forward(cache.fc3_act, params.out_w, params.out_b, cache.logits);
    softmax_rows(cache.logits, cache.probs);
}

BatchCache forward_batch(const ModelParams& params, const std::vector<const MelSpectrogram*>& inputs,
                         Activation activation) {
    BatchCache cache;
    forward_batch(params, inputs, cache, activation);
    return cache;
}

PosteriorVector forward(const ModelParams& params, const MelSpectrogram& input) {
    BatchCache cache = forward_batch(params, {&input});
    return PosteriorVector(cache.probs.row(0), cache.probs.row(0) + cache.probs.cols);
}

double cross_entropy(const Matrix& probs, const std::vector<int>& labels) {
    if (static_cast<size_t>(probs.rows) != labels.size()) {
        fail(ErrKind::ShapeMismatch, "loss: posterior/label count mismatch");
    }
    double loss = 0.0;
    for (int i = 0; i < probs.rows; ++i) {
        const int label = labels[i];
        if (label < 0 || label >= probs.cols) fail(ErrKind::IndexOutOfRange, "label out of range");
        loss -= std::log(std::max(probs.at(i, label), 1e-12));
    }
    return loss;
}

void backward_batch(const ModelParams& params, const BatchCache& cache,
                    const std::vector<int>& labels, Gradients& g) {
    const NetConfig& net = params.net;
    const int B = cache.batch;
    if (static_cast<size_t>(B) != labels.size()) {
        fail(ErrKind::ShapeMismatch, "backward: batch/label count mismatch");
    }

    // softmax + summed cross-entropy: d logits = probs - onehot
    Matrix d_logits = cache.probs;
    for (int i = 0; i < B; ++i) d_logits.at(i, labels[i]) -= 1.0;

    fc_backward_weights(cache.fc3_act, d_logits, g.out_w, g.out_b);
    Matrix d_fc3_act;
    fc_backward_input(d_logits, params.out_w, d_fc3_act);
    for (size_t i = 0; i < d_fc3_act.data.size(); ++i) {
        if (cache.fc3_pre.data[i] <= 0.0) d_fc3_act.data[i] = 0.0;
    }

    fc_backward_weights(cache.fc2_act, d_fc3_act, g.fc3_w, g.fc3_b);
    Matrix d_fc2_act;
    fc_backward_input(d_fc3_act, params.fc3_w, d_fc2_act);
    for (size_t i = 0; i < d_fc2_act.data.size(); ++i) {
        if (cache.fc2_pre.data[i] <= 0.0) d_fc2_act.data[i] = 0.0;
    }

    fc_backward_weights(cache.fc1_act, d_fc2_act, g.fc2_w, g.fc2_b);
    Matrix d_fc1_act;
    fc_backward_input(d_fc2_act, params.fc2_w, d_fc1_act);
    for (size_t i = 0; i < d_fc1_act.data.size(); ++i) {
        if (cache.fc1_pre.data[i] <= 0.0) d_fc1_act.data[i] = 0.0;
    }

    fc_backward_weights(cache.flat, d_fc1_act, g.fc1_w, g.fc1_b);
    Matrix d_flat;
    fc_backward_input(d_fc1_act, params.fc1_w, d_flat);

    // conv gradients: per-sample partials computed in parallel, reduced in
    // fixed sample order so the bits never depend on the thread count
    std::vector<ConvKernel> p2w(B);
    std::vector<std::vector<double>> p2b(B);
    std::vector<ConvKernel> p1w(B);
    std::vector<std::vector<double>> p1b(B);
    parallel_for(0, B, [&](int s0, int s1) {
        Tensor d_pool2, d_conv2, d_pool1, d_conv1;
        for (int s = s0; s < s1; ++s) {
            ensure_tensor(d_pool2, net.pool2_out_h(), net.pool2_out_w(), net.conv2_filters);
            std::copy(d_flat.row(s), d_flat.row(s) + d_flat.cols, d_pool2.data.begin());

            ensure_tensor(d_conv2, net.conv2_out_h(), net.conv2_out_w(), net.conv2_filters);
            std::fill(d_conv2.data.begin(), d_conv2.data.end(), 0.0);
            maxpool_backward(d_pool2, cache.pool2_arg[s], d_conv2);
            for (size_t i = 0; i < d_conv2.data.size(); ++i) {
                if (cache.conv2_pre[s].data[i] <= 0.0) d_conv2.data[i] = 0.0;
            }
            p2w[s] = ConvKernel(net.conv2_h, net.conv2_w, net.conv1_filters, net.conv2_filters);
            p2b[s].assign(net.conv2_filters, 0.0);
            conv_backward_weights(cache.pool1[s], d_conv2, p2w[s], p2b[s]);

            ensure_tensor(d_pool1, net.pool1_out_h(), net.pool1_out_w(), net.conv1_filters);
            std::fill(d_pool1.data.begin(), d_pool1.data.end(), 0.0);
            conv_backward_input(d_conv2, params.conv2_w, d_pool1);

            ensure_tensor(d_conv1, net.conv1_out_h(), net.conv1_out_w(), net.conv1_filters);
            std::fill(d_conv1.data.begin(), d_conv1.data.end(), 0.0);
            maxpool_backward(d_pool1, cache.pool1_arg[s], d_conv1);
            for (size_t i = 0; i < d_conv1.data.size(); ++i) {
                if (cache.conv1_pre[s].data[i] <= 0.0) d_conv1.data[i] = 0.0;
            }
            p1w[s] = ConvKernel(net.conv1_h, net.conv1_w, 1, net.conv1_filters);
            p1b[s].assign(net.conv1_filters, 0.0);
            conv_backward_weights(cache.input[s], d_conv1, p1w[s], p1b[s]);
        }
    });

    g.conv1_w = ConvKernel(net.conv1_h, net.conv1_w, 1, net.conv1_filters);
    g.conv1_b.assign(net.conv1_filters, 0.0);
    g.conv2_w = ConvKernel(net.conv2_h, net.conv2_w, net.conv1_filters, net.conv2_filters);
    g.conv2_b.assign(net.conv2_filters, 0.0);
    for (int s = 0; s < B; ++s) {
        for (size_t i = 0; i < g.conv2_w.data.size(); ++i) g.conv2_w.data[i] += p2w[s].data[i];
        for (size_t i = 0; i < g.conv2_b.size(); ++i) g.conv2_b[i] += p2b[s][i];
        for (size_t i = 0; i < g.conv1_w.data.size(); ++i) g.conv1_w.data[i] += p1w[s].data[i];
        for (size_t i = 0; i < g.conv1_b.size(); ++i) g.conv1_b[i] += p1b[s][i];
    }
}

Gradients backward_batch(const ModelParams& params, const BatchCache& cache,
                         const std::vector<int>& labels) {
    Gradients g;
    backward_batch(params, cache, labels, g);
    return g;
}

int argmax_class(const PosteriorVector& posterior) {
    return static_cast<int>(std::max_element(posterior.begin(), posterior.end()) -
                            posterior.begin());
}

EvalResult evaluate(const ModelParams& params, const std::vector<const MelSpectrogram*>& inputs,
                    const std::vector<int>& labels) {
    if (inputs.empty()) fail(ErrKind::EmptyTrainingSet, "evaluate: empty test set");
    if (inputs.size() != labels.size()) fail(ErrKind::ShapeMismatch, "evaluate: input/label mismatch");
    const int K = params.net.n_classes;
    EvalResult result;
    result.confusion = Matrix(K, K);
    result.total = static_cast<int>(inputs.size());
    int correct = 0;
    constexpr size_t kChunk = 32;
    BatchCache cache;
    for (size_t pos = 0; pos < inputs.size(); pos += kChunk) {
        const size_t end = std::min(pos + kChunk, inputs.size());
        std::vector<const MelSpectrogram*> chunk(inputs.begin() + pos, inputs.begin() + end);
        forward_batch(params, chunk, cache);
        for (size_t i = pos; i < end; ++i) {
            const double* p = cache.probs.row(static_cast<int>(i - pos));
            const int pred = static_cast<int>(std::max_element(p, p + K) - p);
            const int truth = labels[i];
            if (truth < 0 || truth >= K) fail(ErrKind::IndexOutOfRange, "label out of range");
            result.confusion.at(truth, pred) += 1.0;
            if (pred == truth) ++correct;
        }
    }
    result.accuracy = static_cast<double>(correct) / result.total;
    return result;
}

}  // namespace cvoam
