// Python bindings for the cvoam core: mel front-end, CNN train/infer,
// OAM scoring and the statistics used by the analyses. Matrices cross the
// boundary as numpy float64 arrays.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cvoam/analytics.hpp"
#include "cvoam/corpus.hpp"
#include "cvoam/features.hpp"
#include "cvoam/network.hpp"
#include "cvoam/oam.hpp"
#include "cvoam/parallel.hpp"
#include "cvoam/segmenter.hpp"

namespace py = pybind11;
using namespace cvoam;

namespace {

MelSpectrogram mel_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw py::value_error("expected a 2-D array (mels x frames)");
    MelSpectrogram mel;
    mel.n_mels = static_cast<int>(arr.shape(0));
    mel.n_frames = static_cast<int>(arr.shape(1));
    mel.values.assign(arr.data(), arr.data() + arr.size());
    return mel;
}

py::array_t<double> array_from_mel(const MelSpectrogram& mel) {
    py::array_t<double> out({mel.n_mels, mel.n_frames});
    std::copy(mel.values.begin(), mel.values.end(), out.mutable_data());
    return out;
}

py::array_t<double> array_from_matrix(const Matrix& m) {
    py::array_t<double> out({m.rows, m.cols});
    std::copy(m.data.begin(), m.data.end(), out.mutable_data());
    return out;
}

Matrix matrix_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw py::value_error("expected a 2-D array");
    Matrix m(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
    std::copy(arr.data(), arr.data() + arr.size(), m.data.begin());
    return m;
}

}  // namespace

PYBIND11_MODULE(cvoam, m) {
    m.doc() = "Objective articulation measure from consonant-vowel transitions";

    py::register_exception<Error>(m, "CvoamError");

    py::class_<PhoneInventory>(m, "PhoneInventory")
        .def(py::init<>())
        .def_static("defaults", &PhoneInventory::defaults)
        .def_static("from_json_file", &PhoneInventory::from_json_file)
        .def_readwrite("consonants", &PhoneInventory::consonants)
        .def_readwrite("vowels", &PhoneInventory::vowels)
        .def("consonant_index", &PhoneInventory::consonant_index)
        .def("is_vowel", &PhoneInventory::is_vowel)
        .def("__len__", &PhoneInventory::size);

    py::class_<PhoneInterval>(m, "PhoneInterval")
        .def(py::init([](std::string label, double start, double end) {
                 return PhoneInterval{std::move(label), start, end};
             }),
             py::arg("label"), py::arg("start_s"), py::arg("end_s"))
        .def_readwrite("label", &PhoneInterval::label)
        .def_readwrite("start_s", &PhoneInterval::start_s)
        .def_readwrite("end_s", &PhoneInterval::end_s);

    py::class_<AlignmentTrack>(m, "AlignmentTrack")
        .def(py::init<>())
        .def_readwrite("utterance_id", &AlignmentTrack::utterance_id)
        .def_readwrite("intervals", &AlignmentTrack::intervals);

    py::class_<VowelOnset>(m, "VowelOnset")
        .def_readonly("time_s", &VowelOnset::time_s)
        .def_readonly("vowel", &VowelOnset::vowel)
        .def_readonly("preceding_consonant", &VowelOnset::preceding_consonant);

    py::class_<CVSegment>(m, "CVSegment")
        .def_readonly("utterance_id", &CVSegment::utterance_id)
        .def_readonly("target_consonant", &CVSegment::target_consonant)
        .def_readonly("onset_s", &CVSegment::onset_s)
        .def_readonly("window_ms", &CVSegment::window_ms)
        .def_property_readonly("samples", [](const CVSegment& seg) {
            py::array_t<double> out(static_cast<py::ssize_t>(seg.samples.size()));
            std::copy(seg.samples.begin(), seg.samples.end(), out.mutable_data());
            return out;
        });

    m.def("load_wav", [](const std::string& path) {
        AudioClip clip = load_wav(path);
        py::array_t<double> samples(static_cast<py::ssize_t>(clip.samples.size()));
        std::copy(clip.samples.begin(), clip.samples.end(), samples.mutable_data());
        return py::make_tuple(samples, clip.sample_rate_hz);
    });
    m.def("write_wav", [](const std::string& path,
                          const py::array_t<double, py::array::c_style | py::array::forcecast>& samples) {
        AudioClip clip;
        clip.samples.assign(samples.data(), samples.data() + samples.size());
        write_wav(path, clip);
    });
    m.def("parse_textgrid", &parse_textgrid, py::arg("path"), py::arg("tier_name") = "phones");
    m.def("parse_alignment_csv", &parse_alignment_csv);
    m.def("normalize_label", &normalize_label);

    m.def("find_vowel_onsets", &find_vowel_onsets);
    m.def("cut_segment",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& samples,
             double onset_s, const std::string& consonant, const std::string& vowel,
             int window_ms) {
              AudioClip clip;
              clip.samples.assign(samples.data(), samples.data() + samples.size());
              return cut_segment(clip, {onset_s, vowel, consonant}, window_ms);
          },
          py::arg("samples"), py::arg("onset_s"), py::arg("consonant"), py::arg("vowel"),
          py::arg("window_ms") = 160);

    m.def("melspec",
          [](const CVSegment& segment) {
              MelFilterbank bank = build_filterbank();
              return array_from_mel(melspec(segment, bank));
          },
          "Log-mel spectrogram of a CV segment (40 x window_ms/5)");
    m.def("melspec_from_samples",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& samples,
             int window_ms) {
              CVSegment seg;
              seg.window_ms = window_ms;
              seg.samples.assign(samples.data(), samples.data() + samples.size());
              MelFilterbank bank = build_filterbank();
              return array_from_mel(melspec(seg, bank));
          },
          py::arg("samples"), py::arg("window_ms") = 160);

    py::class_<NetConfig>(m, "NetConfig")
        .def(py::init<>())
        .def_readwrite("input_h", &NetConfig::input_h)
        .def_readwrite("input_w", &NetConfig::input_w)
        .def_readwrite("conv1_h", &NetConfig::conv1_h)
        .def_readwrite("conv1_w", &NetConfig::conv1_w)
        .def_readwrite("conv1_filters", &NetConfig::conv1_filters)
        .def_readwrite("conv2_h", &NetConfig::conv2_h)
        .def_readwrite("conv2_w", &NetConfig::conv2_w)
        .def_readwrite("conv2_filters", &NetConfig::conv2_filters)
        .def_readwrite("pool", &NetConfig::pool)
        .def_readwrite("pool_stride", &NetConfig::pool_stride)
        .def_readwrite("fc_width", &NetConfig::fc_width)
        .def_readwrite("n_classes", &NetConfig::n_classes)
        .def("flatten_dim", &NetConfig::flatten_dim);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("sentences_per_batch", &TrainConfig::sentences_per_batch)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("fixed_segments_per_batch", &TrainConfig::fixed_segments_per_batch);

    py::class_<ModelParams>(m, "Model")
        .def_readonly("window_ms", &ModelParams::window_ms)
        .def_readonly("inventory", &ModelParams::inventory)
        .def_property_readonly("net", [](const ModelParams& p) { return p.net; });

    m.def("train",
          [](const std::vector<std::pair<std::vector<py::array_t<double>>, std::vector<int>>>& utterances,
             const NetConfig& net, const TrainConfig& cfg, const PhoneInventory& inventory,
             int window_ms) {
              std::vector<TrainUtterance> data;
              for (size_t u = 0; u < utterances.size(); ++u) {
                  TrainUtterance utt;
                  utt.utterance_id = "u" + std::to_string(u);
                  for (const auto& arr : utterances[u].first) {
                      utt.inputs.push_back(mel_from_array(arr));
                  }
                  utt.labels = utterances[u].second;
                  data.push_back(std::move(utt));
              }
              TrainResult result = train(data, net, cfg, inventory, window_ms, MelParams{});
              py::list log;
              for (const EpochStats& row : result.log) {
                  log.append(py::make_tuple(row.epoch, row.loss, row.train_accuracy));
              }
              return py::make_tuple(std::move(result.params), log);
          },
          py::arg("utterances"), py::arg("net"), py::arg("config"), py::arg("inventory"),
          py::arg("window_ms") = 160);

    m.def("forward", [](const ModelParams& model, const py::array_t<double>& input) {
        PosteriorVector p = forward(model, mel_from_array(input));
        py::array_t<double> out(static_cast<py::ssize_t>(p.size()));
        std::copy(p.begin(), p.end(), out.mutable_data());
        return out;
    });
    m.def("evaluate",
          [](const ModelParams& model, const std::vector<py::array_t<double>>& inputs,
             const std::vector<int>& labels) {
              std::vector<MelSpectrogram> mels;
              for (const auto& arr : inputs) mels.push_back(mel_from_array(arr));
              std::vector<const MelSpectrogram*> ptrs;
              for (const auto& mel : mels) ptrs.push_back(&mel);
              EvalResult eval = evaluate(model, ptrs, labels);
              return py::make_tuple(eval.accuracy, array_from_matrix(eval.confusion));
          });
    m.def("saliency",
          [](const ModelParams& model, const py::array_t<double>& input, int target_class,
             bool guided) {
              SaliencyOptions options;
              options.guided = guided;
              return array_from_mel(saliency(model, mel_from_array(input), target_class, options));
          },
          py::arg("model"), py::arg("input"), py::arg("target_class"), py::arg("guided") = true);

    m.def("save_model", &save_model);
    m.def("load_model", &load_model);

    m.def("oam_instance", &oam_instance, py::arg("posterior"), py::arg("target_index"));

    m.def("cov", [](const std::vector<double>& values) {
        return cov({"", "", values});
    });
    m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) {
        CorrelationResult r = pearson(x, y);
        return py::make_tuple(r.r, r.n, r.t_stat, r.p_value);
    });
    m.def("paired_ttest", [](const std::vector<double>& a, const std::vector<double>& b) {
        TTestResult t = paired_ttest(a, b);
        return py::make_tuple(t.t, t.df, t.p);
    });
    m.def("fit_forward_linear",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& features,
             const std::vector<double>& ratings) {
              LinearModel model = fit_forward_linear(matrix_from_array(features), ratings);
              py::dict out;
              out["features"] = model.features;
              out["weights"] = model.weights;
              out["intercept"] = model.intercept;
              return out;
          });
    m.def("loso_evaluate",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& features,
             const std::vector<double>& ratings) {
              LosoResult result = loso_evaluate(matrix_from_array(features), ratings);
              return py::make_tuple(result.predictions, result.corr.r, result.corr.p_value);
          });

    m.def("set_num_threads", &set_num_threads);
}
