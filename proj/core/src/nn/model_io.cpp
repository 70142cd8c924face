#include "lungcam/nn/model_io.hpp"

#include <bit>
#include <cstring>
#include <set>
#include <sstream>

#include "lungcam/digest.hpp"
#include "lungcam/files.hpp"

namespace lungcam::nn {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kReserved = {"format", "version", "seed", "input", "layer_count", "param_count", "payload"};

std::string layer_line(const LayerSpec& l) {
    std::ostringstream s;
    s << to_string(l.kind);
    if (!l.inputs.empty()) {
        s << " inputs=";
        for (std::size_t i = 0; i < l.inputs.size(); ++i) s << (i ? "," : "") << l.inputs[i];
    }
    if (l.kind == LayerKind::Conv || l.kind == LayerKind::Dense) s << " out=" << l.out_channels;
    if (l.kind == LayerKind::Conv) s << " k=" << l.kernel;
    if (l.kind == LayerKind::Upsample) s << " mode=" << (l.mode == UpsampleMode::Bilinear ? "bilinear" : "nearest");
    if (!l.name.empty()) s << " name=" << l.name;
    return s.str();
}

LayerSpec parse_layer_line(const std::string& line, const std::string& origin) {
    std::istringstream in(line);
    std::string tok;
    in >> tok;
    LayerSpec l;
    l.kind = parse_layer_kind(tok);
    while (in >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw FormatError(origin + ": bad layer token '" + tok + "'");
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        if (key == "inputs") {
            for (const auto& f : split(val, ',')) l.inputs.push_back(static_cast<int>(parse_int(f, "layer input")));
        } else if (key == "out") {
            l.out_channels = static_cast<int>(parse_int(val, "out"));
        } else if (key == "k") {
            l.kernel = static_cast<int>(parse_int(val, "k"));
        } else if (key == "mode") {
            if (val != "nearest" && val != "bilinear") throw FormatError(origin + ": bad upsample mode " + val);
            l.mode = val == "bilinear" ? UpsampleMode::Bilinear : UpsampleMode::Nearest;
        } else if (key == "name") {
            l.name = val;
        } else {
            throw FormatError(origin + ": unknown layer attribute '" + key + "'");
        }
    }
    return l;
}

std::string weight_bytes(const Network<float>& net) {
    std::string out;
    out.reserve(net.parameter_count() * 4);
    for (const auto& p : net.params())
        for (float v : p.value) {
            std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
            for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
        }
    return out;
}

}  // namespace

void save_model(const fs::path& path, const Network<float>& net, const KeyValueText& extra) {
    fs::path payload = path;
    payload.replace_extension(".weights");
    std::ostringstream m;
    m << "format: lungcam-model\n"
      << "version: 1\n"
      << "seed: " << net.seed() << '\n'
      << "input: " << net.input_channels() << ' ' << net.input_height() << ' ' << net.input_width() << '\n'
      << "layer_count: " << net.layers().size() << '\n';
    for (std::size_t i = 0; i < net.layers().size(); ++i) m << "layer." << i << ": " << layer_line(net.layers()[i]) << '\n';
    m << "param_count: " << net.params().size() << '\n';
    for (std::size_t i = 0; i < net.params().size(); ++i) {
        m << "param." << i << ": " << net.params()[i].name << ' ' << net.params()[i].value.size() << '\n';
    }
    m << "payload: " << payload.filename().string() << '\n';
    for (const auto& [k, v] : extra.values()) {
        if (kReserved.contains(k) || k.starts_with("layer.") || k.starts_with("param.")) {
            throw ArgumentError("model metadata key '" + k + "' is reserved");
        }
        m << k << ": " << v << '\n';
    }
    write_file_atomic(payload, weight_bytes(net));
    write_file_atomic(path, m.str());
}

LoadedModel load_model(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("model file not found: " + path.string());
    auto kv = KeyValueText::load(path);
    const std::string origin = path.string();
    if (kv.get("format") != "lungcam-model") throw FormatError(origin + ": not a lungcam model");
    if (kv.get("version") != "1") throw FormatError(origin + ": unsupported model version");
    const auto input = kv.fields("input");
    if (input.size() != 3) throw FormatError(origin + ": input needs three values");
    const int c = static_cast<int>(parse_int(input[0], "input channels"));
    const int h = static_cast<int>(parse_int(input[1], "input height"));
    const int w = static_cast<int>(parse_int(input[2], "input width"));

    const auto n_layers = parse_int(kv.get("layer_count"), "layer_count");
    std::vector<LayerSpec> layers;
    for (long long i = 0; i < n_layers; ++i) layers.push_back(parse_layer_line(kv.get("layer." + std::to_string(i)), origin));

    const auto n_params = parse_int(kv.get("param_count"), "param_count");
    std::vector<Param<float>> params;
    std::size_t total = 0;
    for (long long i = 0; i < n_params; ++i) {
        std::istringstream in(kv.get("param." + std::to_string(i)));
        std::string name;
        std::size_t count = 0;
        if (!(in >> name >> count)) throw FormatError(origin + ": bad param line " + std::to_string(i));
        params.push_back({name, std::vector<float>(count)});
        total += count;
    }

    const std::string raw = read_file(path.parent_path() / kv.get("payload"));
    if (raw.size() != total * 4) {
        throw FormatError(origin + ": weight payload has " + std::to_string(raw.size()) + " bytes, expected " +
                          std::to_string(total * 4));
    }
    std::size_t off = 0;
    for (auto& p : params)
        for (auto& v : p.value) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[off + b])) << (8 * b);
            v = std::bit_cast<float>(bits);
            off += 4;
        }

    const auto seed = static_cast<std::uint64_t>(std::stoull(kv.get("seed")));
    Network<float> net;
    try {
        net = Network<float>(c, h, w, std::move(layers), std::move(params), seed);
    } catch (const ShapeError& e) {
        throw FormatError(origin + ": " + e.what());
    }
    return {std::move(net), std::move(kv)};
}

std::string weights_digest(const Network<float>& net) { return sha256_hex(weight_bytes(net)); }

}  // namespace lungcam::nn
