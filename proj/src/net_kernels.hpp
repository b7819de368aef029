#pragma once

// Internal layer kernels shared between the forward/backward pass and the
// guided-backprop saliency path. Not part of the public headers.

#include <vector>

#include "cvoam/features.hpp"
#include "cvoam/tensor.hpp"

namespace cvoam::detail {

double dot4(const double* a, const double* b, int n);

void ensure_tensor(Tensor& t, int h, int w, int c);
void ensure_matrix(Matrix& m, int rows, int cols);

// conv kernels are sequential; callers parallelize across samples
void conv_forward(const Tensor& in, const ConvKernel& K, const std::vector<double>& bias,
                  Tensor& out);
void conv_backward_weights(const Tensor& in, const Tensor& dout, ConvKernel& gw,
                           std::vector<double>& gb);
void conv_backward_input(const Tensor& dout, const ConvKernel& K, Tensor& din);

void maxpool_forward(const Tensor& in, int pool, int stride, Tensor& out, std::vector<int>& argmax);
void maxpool_backward(const Tensor& dout, const std::vector<int>& argmax, Tensor& din);

void fc_forward(const Matrix& X, const Matrix& W, const std::vector<double>& b, Matrix& Y);
void fc_backward_input(const Matrix& dY, const Matrix& W, Matrix& dX);
void fc_backward_weights(const Matrix& X, const Matrix& dY, Matrix& dW, std::vector<double>& db);

void softmax_rows(const Matrix& logits, Matrix& probs);

Tensor tensor_from_mel(const MelSpectrogram& mel);

}  // namespace cvoam::detail
