#pragma once

#include <string>
#include <vector>

#include "cvoam/segmenter.hpp"

namespace cvoam {

inline constexpr int kFrameLen = 320;      // 20 ms at 16 kHz
inline constexpr int kFrameShift = 80;     // 5 ms
inline constexpr int kFftSize = 512;
inline constexpr int kSpectrumBins = kFftSize / 2 + 1;
inline constexpr double kLogFloor = 1e-10;

struct MelParams {
    int n_mels = 40;
    double fmin_hz = 100.0;
    double fmax_hz = 7800.0;
    int sample_rate_hz = 16000;
    int nfft = kFftSize;
};

// Triangular filters over one-sided power-spectrum bins. Edge frequencies are
// equally spaced on the mel scale and snapped to FFT bins, so every filter
// peaks at exactly 1.0 on its center bin.
struct MelFilterbank {
    MelParams params;
    int n_bins = kSpectrumBins;
    std::vector<double> weights;   // n_mels x n_bins, row-major
    std::vector<int> center_bins;  // peak bin per filter

    double weight(int mel, int bin) const { return weights[static_cast<size_t>(mel) * n_bins + bin]; }
};

struct MelSpectrogram {
    int n_mels = 0;
    int n_frames = 0;
    std::vector<double> values;  // row-major [mel][frame]

    double at(int mel, int frame) const { return values[static_cast<size_t>(mel) * n_frames + frame]; }
    double& at(int mel, int frame) { return values[static_cast<size_t>(mel) * n_frames + frame]; }
};

double mel_from_hz(double hz);
double hz_from_mel(double mel);

// Hamming coefficients w[n] = 0.54 - 0.46 cos(2 pi n / 319), cached.
const std::vector<double>& hamming_window();

// Splits a segment into window_ms / 5 Hamming-windowed frames of 320 samples
// (frame k starts at sample 80k; the tail is zero padded by 240 samples).
std::vector<std::vector<double>> frame_segment(const CVSegment& segment);

// |DFT|^2 of a 320-sample frame zero padded to 512, bins 0..256.
std::vector<double> power_spectrum(const std::vector<double>& frame);

MelFilterbank build_filterbank(const MelParams& params = {});

// Full front-end: frames -> power spectra -> filterbank -> ln(max(e, 1e-10)).
// Output is n_mels x (window_ms / 5), i.e. 40x32 for the default window.
MelSpectrogram melspec(const CVSegment& segment, const MelFilterbank& bank);

// Debug export, one row per mel bin (row 0 = lowest), comma separated.
std::string melspec_to_csv(const MelSpectrogram& mel);

// In-place radix-2 FFT; n must be a power of two. Exposed for tests.
void fft_radix2(std::vector<double>& re, std::vector<double>& im);

}  // namespace cvoam
