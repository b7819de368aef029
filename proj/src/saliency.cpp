#include <algorithm>
#include <cmath>

#include "cvoam/network.hpp"
#include "net_kernels.hpp"

namespace cvoam {

namespace {

// guided rule: pass gradient only where the forward activation was positive
// AND the incoming gradient is positive; plain ReLU backprop drops the second
// condition; Identity activations skip gating entirely
void gate(std::vector<double>& grad, const std::vector<double>& pre, const SaliencyOptions& opt) {
    if (opt.activation == Activation::Identity) return;
    for (size_t i = 0; i < grad.size(); ++i) {
        const bool pass = pre[i] > 0.0 && (!opt.guided || grad[i] > 0.0);
        if (!pass) grad[i] = 0.0;
    }
}

}  // namespace

MelSpectrogram saliency(const ModelParams& params, const MelSpectrogram& input, int target_class,
                        const SaliencyOptions& options) {
    const NetConfig& net = params.net;
    if (target_class < 0 || target_class >= net.n_classes) {
        fail(ErrKind::InvalidClass, "target class " + std::to_string(target_class) +
                                        " outside [0, " + std::to_string(net.n_classes) + ")");
    }
    BatchCache cache = forward_batch(params, {&input}, options.activation);

    // gradient of the target-class pre-softmax score
    Matrix d_logits(1, net.n_classes);
    d_logits.at(0, target_class) = 1.0;

    Matrix d_fc3_act;
    detail::fc_backward_input(d_logits, params.out_w, d_fc3_act);
    gate(d_fc3_act.data, cache.fc3_pre.data, options);

    Matrix d_fc2_act;
    detail::fc_backward_input(d_fc3_act, params.fc3_w, d_fc2_act);
    gate(d_fc2_act.data, cache.fc2_pre.data, options);

    Matrix d_fc1_act;
    detail::fc_backward_input(d_fc2_act, params.fc2_w, d_fc1_act);
    gate(d_fc1_act.data, cache.fc1_pre.data, options);

    Matrix d_flat;
    detail::fc_backward_input(d_fc1_act, params.fc1_w, d_flat);

    Tensor d_pool2(net.pool2_out_h(), net.pool2_out_w(), net.conv2_filters);
    std::copy(d_flat.row(0), d_flat.row(0) + d_flat.cols, d_pool2.data.begin());

    Tensor d_conv2(net.conv2_out_h(), net.conv2_out_w(), net.conv2_filters);
    detail::maxpool_backward(d_pool2, cache.pool2_arg[0], d_conv2);
    gate(d_conv2.data, cache.conv2_pre[0].data, options);

    Tensor d_pool1(net.pool1_out_h(), net.pool1_out_w(), net.conv1_filters);
    detail::conv_backward_input(d_conv2, params.conv2_w, d_pool1);

    Tensor d_conv1(net.conv1_out_h(), net.conv1_out_w(), net.conv1_filters);
    detail::maxpool_backward(d_pool1, cache.pool1_arg[0], d_conv1);
    gate(d_conv1.data, cache.conv1_pre[0].data, options);

    Tensor d_input(net.input_h, net.input_w, 1);
    detail::conv_backward_input(d_conv1, params.conv1_w, d_input);

    MelSpectrogram map;
    map.n_mels = net.input_h;
    map.n_frames = net.input_w;
    map.values = d_input.data;
    if (options.raw_gradient) return map;
    for (double& v : map.values) v = std::abs(v);

    const double mx = *std::max_element(map.values.begin(), map.values.end());
    const double mn = *std::min_element(map.values.begin(), map.values.end());
    if (mx > mn) {
        for (double& v : map.values) v = (v - mn) / (mx - mn);
    } else {
        std::fill(map.values.begin(), map.values.end(), 0.0);
    }
    return map;
}

}  // namespace cvoam
