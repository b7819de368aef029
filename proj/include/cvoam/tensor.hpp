#pragma once

#include <cstddef>
#include <vector>

namespace cvoam {

// Activation tensor, channels-last: index (y * w + x) * c + ch.
struct Tensor {
    int h = 0, w = 0, c = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int h_, int w_, int c_)
        : h(h_), w(w_), c(c_), data(static_cast<size_t>(h_) * w_ * c_, 0.0) {}

    double& at(int y, int x, int ch) { return data[(static_cast<size_t>(y) * w + x) * c + ch]; }
    const double& at(int y, int x, int ch) const { return data[(static_cast<size_t>(y) * w + x) * c + ch]; }
    size_t size() const { return data.size(); }
};

// Row-major matrix.
struct Matrix {
    int rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    const double& at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return data.size(); }
};

// Convolution weights, kh x kw x in_c x out_c with out_c contiguous.
struct ConvKernel {
    int kh = 0, kw = 0, in_c = 0, out_c = 0;
    std::vector<double> data;

    ConvKernel() = default;
    ConvKernel(int kh_, int kw_, int ic, int oc)
        : kh(kh_), kw(kw_), in_c(ic), out_c(oc),
          data(static_cast<size_t>(kh_) * kw_ * ic * oc, 0.0) {}

    double& at(int ky, int kx, int ic, int oc) {
        return data[((static_cast<size_t>(ky) * kw + kx) * in_c + ic) * out_c + oc];
    }
    const double& at(int ky, int kx, int ic, int oc) const {
        return data[((static_cast<size_t>(ky) * kw + kx) * in_c + ic) * out_c + oc];
    }
    size_t size() const { return data.size(); }
};

}  // namespace cvoam
