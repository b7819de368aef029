#include "cvoam/features.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "cvoam/csv.hpp"

namespace cvoam {

double mel_from_hz(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double hz_from_mel(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

const std::vector<double>& hamming_window() {
    static const std::vector<double> window = [] {
        std::vector<double> w(kFrameLen);
        for (int n = 0; n < kFrameLen; ++n) {
            w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (kFrameLen - 1));
        }
        return w;
    }();
    return window;
}

std::vector<std::vector<double>> frame_segment(const CVSegment& segment) {
    const int n_frames = segment.window_ms / 5;
    const size_t expected = static_cast<size_t>(segment.window_ms) * 16;
    if (segment.samples.size() != expected) {
        fail(ErrKind::ShapeMismatch, "segment has " + std::to_string(segment.samples.size()) +
                                         " samples, expected " + std::to_string(expected));
    }
    // right-padding by 240 samples makes the last frame complete, so the
    // frame count is exactly window_ms / 5
    std::vector<double> padded(expected + kFrameLen - kFrameShift, 0.0);
    std::copy(segment.samples.begin(), segment.samples.end(), padded.begin());

    const std::vector<double>& window = hamming_window();
    std::vector<std::vector<double>> frames(n_frames, std::vector<double>(kFrameLen));
    for (int k = 0; k < n_frames; ++k) {
        const double* src = padded.data() + static_cast<size_t>(k) * kFrameShift;
        for (int j = 0; j < kFrameLen; ++j) frames[k][j] = src[j] * window[j];
    }
    return frames;
}

void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
    const size_t n = re.size();
    // bit-reversal permutation
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
        const double wr = std::cos(angle), wi = std::sin(angle);
        for (size_t i = 0; i < n; i += len) {
            double cur_r = 1.0, cur_i = 0.0;
            for (size_t k = 0; k < len / 2; ++k) {
                const size_t a = i + k, b = i + k + len / 2;
                const double tr = re[b] * cur_r - im[b] * cur_i;
                const double ti = re[b] * cur_i + im[b] * cur_r;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                const double nr = cur_r * wr - cur_i * wi;
                cur_i = cur_r * wi + cur_i * wr;
                cur_r = nr;
            }
        }
    }
}

std::vector<double> power_spectrum(const std::vector<double>& frame) {
    if (frame.size() != kFrameLen) {
        fail(ErrKind::ShapeMismatch, "frame has " + std::to_string(frame.size()) +
                                         " samples, expected " + std::to_string(kFrameLen));
    }
    std::vector<double> re(kFftSize, 0.0), im(kFftSize, 0.0);
    std::copy(frame.begin(), frame.end(), re.begin());
    fft_radix2(re, im);
    std::vector<double> power(kSpectrumBins);
    for (int k = 0; k < kSpectrumBins; ++k) power[k] = re[k] * re[k] + im[k] * im[k];
    return power;
}

MelFilterbank build_filterbank(const MelParams& params) {
    if (params.fmin_hz >= params.fmax_hz) {
        fail(ErrKind::InvalidBand, "fmin must be below fmax");
    }
    if (params.fmax_hz > params.sample_rate_hz / 2.0) {
        fail(ErrKind::InvalidBand, "fmax above Nyquist");
    }
    if (params.n_mels < 1) fail(ErrKind::InvalidBand, "need at least one filter");

    const int n_bins = params.nfft / 2 + 1;
    const double mel_lo = mel_from_hz(params.fmin_hz);
    const double mel_hi = mel_from_hz(params.fmax_hz);

    // n_mels + 2 edge points, equally spaced in mel, snapped to FFT bins
    std::vector<int> edges(params.n_mels + 2);
    for (int e = 0; e < params.n_mels + 2; ++e) {
        const double mel = mel_lo + (mel_hi - mel_lo) * e / (params.n_mels + 1);
        const double hz = hz_from_mel(mel);
        edges[e] = static_cast<int>(std::llround(hz * params.nfft / params.sample_rate_hz));
    }
    for (int e = 1; e < params.n_mels + 2; ++e) {
        if (edges[e] <= edges[e - 1]) {
            fail(ErrKind::InvalidBand, "filter edges collapse onto the same FFT bin; "
                                       "widen the band or reduce n_mels");
        }
    }

    MelFilterbank bank;
    bank.params = params;
    bank.n_bins = n_bins;
    bank.weights.assign(static_cast<size_t>(params.n_mels) * n_bins, 0.0);
    bank.center_bins.resize(params.n_mels);
    for (int m = 0; m < params.n_mels; ++m) {
        const int left = edges[m], center = edges[m + 1], right = edges[m + 2];
        bank.center_bins[m] = center;
        for (int k = left + 1; k <= center; ++k) {
            bank.weights[static_cast<size_t>(m) * n_bins + k] =
                static_cast<double>(k - left) / (center - left);
        }
        for (int k = center + 1; k < right; ++k) {
            bank.weights[static_cast<size_t>(m) * n_bins + k] =
                static_cast<double>(right - k) / (right - center);
        }
    }
    return bank;
}

MelSpectrogram melspec(const CVSegment& segment, const MelFilterbank& bank) {
    const auto frames = frame_segment(segment);
    MelSpectrogram mel;
    mel.n_mels = bank.params.n_mels;
    mel.n_frames = static_cast<int>(frames.size());
    mel.values.assign(static_cast<size_t>(mel.n_mels) * mel.n_frames, 0.0);
    for (int t = 0; t < mel.n_frames; ++t) {
        const std::vector<double> power = power_spectrum(frames[t]);
        for (int m = 0; m < mel.n_mels; ++m) {
            const double* w = bank.weights.data() + static_cast<size_t>(m) * bank.n_bins;
            double energy = 0.0;
            for (int k = 0; k < bank.n_bins; ++k) energy += w[k] * power[k];
            mel.at(m, t) = std::log(std::max(energy, kLogFloor));
        }
    }
    return mel;
}

std::string melspec_to_csv(const MelSpectrogram& mel) {
    std::string out;
    for (int m = 0; m < mel.n_mels; ++m) {
        for (int t = 0; t < mel.n_frames; ++t) {
            if (t) out += ',';
            out += format_double(mel.at(m, t));
        }
        out += '\n';
    }
    return out;
}

}  // namespace cvoam
