#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "cvoam/csv.hpp"
#include "cvoam/network.hpp"

namespace cvoam {

namespace {

constexpr const char* kMagic = "CVOAM1";
constexpr int kVersion = 1;

struct TensorRef {
    const char* name;
    const std::vector<double>* data;
    std::vector<int> shape;
};

std::vector<TensorRef> tensor_refs(const ModelParams& p) {
    const NetConfig& n = p.net;
    return {
        {"conv1_w", &p.conv1_w.data, {n.conv1_h, n.conv1_w, 1, n.conv1_filters}},
        {"conv1_b", &p.conv1_b, {n.conv1_filters}},
        {"conv2_w", &p.conv2_w.data, {n.conv2_h, n.conv2_w, n.conv1_filters, n.conv2_filters}},
        {"conv2_b", &p.conv2_b, {n.conv2_filters}},
        {"fc1_w", &p.fc1_w.data, {n.flatten_dim(), n.fc_width}},
        {"fc1_b", &p.fc1_b, {n.fc_width}},
        {"fc2_w", &p.fc2_w.data, {n.fc_width, n.fc_width}},
        {"fc2_b", &p.fc2_b, {n.fc_width}},
        {"fc3_w", &p.fc3_w.data, {n.fc_width, n.fc_width}},
        {"fc3_b", &p.fc3_b, {n.fc_width}},
        {"out_w", &p.out_w.data, {n.fc_width, n.n_classes}},
        {"out_b", &p.out_b, {n.n_classes}},
    };
}

void append_f32_le(std::string& out, double v) {
    const uint32_t bits = std::bit_cast<uint32_t>(static_cast<float>(v));
    out.push_back(static_cast<char>(bits & 0xff));
    out.push_back(static_cast<char>((bits >> 8) & 0xff));
    out.push_back(static_cast<char>((bits >> 16) & 0xff));
    out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

double read_f32_le(const std::string& bytes, size_t off) {
    uint32_t bits = static_cast<uint8_t>(bytes[off]) |
                    (static_cast<uint32_t>(static_cast<uint8_t>(bytes[off + 1])) << 8) |
                    (static_cast<uint32_t>(static_cast<uint8_t>(bytes[off + 2])) << 16) |
                    (static_cast<uint32_t>(static_cast<uint8_t>(bytes[off + 3])) << 24);
    return static_cast<double>(std::bit_cast<float>(bits));
}

size_t shape_product(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    return n;
}

}  // namespace

std::string serialize_model(const ModelParams& params) {
    params.net.validate();
    nlohmann::json header;
    header["magic"] = kMagic;
    header["version"] = kVersion;
    const NetConfig& n = params.net;
    header["net"] = {{"input_h", n.input_h},

                     {"input_w", n.input_w},
                     {"conv1", {n.conv1_h, n.conv1_w, n.conv1_filters}},
                     {"conv2", {n.conv2_h, n.conv2_w, n.conv2_filters}},
                     {"pool", n.pool},
                     {"pool_stride", n.pool_stride},
                     {"fc_width", n.fc_width},
                     {"n_classes", n.n_classes}};
    header["window_ms"] = params.window_ms;
    header["mel"] = {{"n_mels", params.mel.n_mels},
                     {"fmin_hz", params.mel.fmin_hz},
                     {"fmax_hz", params.mel.fmax_hz},
                     {"sample_rate_hz", params.mel.sample_rate_hz},
                     {"nfft", params.mel.nfft}};
    header["inventory"] = {{"consonants", params.inventory.consonants},
                           {"vowels", params.inventory.vowels}};
    nlohmann::json tensors = nlohmann::json::array();
    for (const TensorRef& ref : tensor_refs(params)) {
        tensors.push_back({{"name", ref.name}, {"shape", ref.shape}});
    }
    header["tensors"] = tensors;

    std::string out = header.dump();
    out += '\n';
    for (const TensorRef& ref : tensor_refs(params)) {
        if (ref.data->size() != shape_product(ref.shape)) {
            fail(ErrKind::ShapeMismatch, std::string("tensor ") + ref.name + " size mismatch");
        }
        for (double v : *ref.data) append_f32_le(out, v);
    }
    return out;
}

void save_model(const ModelParams& params, const std::string& path) {
    write_file_atomic(path, serialize_model(params));
}

ModelParams load_model(const std::string& path) {
    const std::string bytes = read_text_file(path);
    const size_t eol = bytes.find('\n');
    if (eol == std::string::npos) fail(ErrKind::CorruptFile, path + ": missing header line");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(0, eol));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrKind::CorruptFile, path + ": bad header: " + e.what());
    }
    try {
        if (header.value("magic", "") != kMagic) {
            fail(ErrKind::CorruptFile, path + ": not a cvoam model file");
        }
        if (header.value("version", -1) != kVersion) {
            fail(ErrKind::VersionMismatch,
                 path + ": model version " + header["version"].dump() + ", expected 1");
        }

        ModelParams p;
        const auto& n = header.at("net");
        p.net.input_h = n.at("input_h").get<int>();
        p.net.input_w = n.at("input_w").get<int>();
        p.net.conv1_h = n.at("conv1").at(0).get<int>();
        p.net.conv1_w = n.at("conv1").at(1).get<int>();
        p.net.conv1_filters = n.at("conv1").at(2).get<int>();
        p.net.conv2_h = n.at("conv2").at(0).get<int>();
        p.net.conv2_w = n.at("conv2").at(1).get<int>();
        p.net.conv2_filters = n.at("conv2").at(2).get<int>();
        p.net.pool = n.at("pool").get<int>();
        p.net.pool_stride = n.at("pool_stride").get<int>();
        p.net.fc_width = n.at("fc_width").get<int>();
        p.net.n_classes = n.at("n_classes").get<int>();
        p.net.validate();

        p.window_ms = header.at("window_ms").get<int>();
        const auto& mel = header.at("mel");
        p.mel.n_mels = mel.at("n_mels").get<int>();
        p.mel.fmin_hz = mel.at("fmin_hz").get<double>();
        p.mel.fmax_hz = mel.at("fmax_hz").get<double>();
        p.mel.sample_rate_hz = mel.at("sample_rate_hz").get<int>();
        p.mel.nfft = mel.at("nfft").get<int>();

        const auto& inv = header.at("inventory");
        p.inventory.consonants = inv.at("consonants").get<std::vector<std::string>>();
        for (const auto& v : inv.at("vowels")) p.inventory.vowels.insert(v.get<std::string>());
        p.inventory.validate();
        if (p.net.n_classes != p.inventory.size()) {
            fail(ErrKind::ShapeMismatch, path + ": n_classes disagrees with inventory size");
        }

        p.conv1_w = ConvKernel(p.net.conv1_h, p.net.conv1_w, 1, p.net.conv1_filters);
        p.conv2_w = ConvKernel(p.net.conv2_h, p.net.conv2_w, p.net.conv1_filters, p.net.conv2_filters);
        p.fc1_w = Matrix(p.net.flatten_dim(), p.net.fc_width);
        p.fc2_w = Matrix(p.net.fc_width, p.net.fc_width);
        p.fc3_w = Matrix(p.net.fc_width, p.net.fc_width);
        p.out_w = Matrix(p.net.fc_width, p.net.n_classes);
        p.conv1_b.assign(p.net.conv1_filters, 0.0);
        p.conv2_b.assign(p.net.conv2_filters, 0.0);
        p.fc1_b.assign(p.net.fc_width, 0.0);
        p.fc2_b.assign(p.net.fc_width, 0.0);
        p.fc3_b.assign(p.net.fc_width, 0.0);
        p.out_b.assign(p.net.n_classes, 0.0);

        std::vector<TensorRef> refs = tensor_refs(p);
        const auto& tensors = header.at("tensors");
        if (tensors.size() != refs.size()) {
            fail(ErrKind::ShapeMismatch, path + ": expected " + std::to_string(refs.size()) +
                                             " tensors, header lists " + std::to_string(tensors.size()));
        }
        for (size_t i = 0; i < refs.size(); ++i) {
            if (tensors[i].at("name").get<std::string>() != refs[i].name) {
                fail(ErrKind::ShapeMismatch, path + ": unexpected tensor order");
            }
            const auto declared = tensors[i].at("shape").get<std::vector<int>>();
            if (declared != refs[i].shape) {
                fail(ErrKind::ShapeMismatch, path + ": tensor " + refs[i].name +
                                                 " shape disagrees with the architecture");
            }
        }

        size_t off = eol + 1;
        for (TensorRef& ref : refs) {
            auto* data = const_cast<std::vector<double>*>(ref.data);
            const size_t need = data->size() * 4;
            if (off + need > bytes.size()) {
                fail(ErrKind::CorruptFile, path + ": truncated tensor data");
            }
            for (size_t i = 0; i < data->size(); ++i) {
                (*data)[i] = read_f32_le(bytes, off + i * 4);
            }
            off += need;
        }
        if (off != bytes.size()) fail(ErrKind::CorruptFile, path + ": trailing bytes after tensors");
        return p;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrKind::CorruptFile, path + ": bad header: " + e.what());
    }
}

}  // namespace cvoam
