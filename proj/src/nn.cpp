#include "transim/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

namespace transim::nn {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "blob I/O assumes a little-endian host");

std::size_t NetworkSpec::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers) {
        if (l.kind == LayerKind::Dense) {
            n += static_cast<std::size_t>(l.in) * static_cast<std::size_t>(l.out) + static_cast<std::size_t>(l.out);
        }
    }
    return n;
}

namespace {

Activation parse_activation(const std::string& s, const std::string& where) {
    if (s == "identity" || s == "linear" || s.empty()) return Activation::Identity;
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    throw Error(ErrorCode::SchemaError, where + ": unsupported activation '" + s + "'");
}

std::string_view activation_name(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
    }
    return "identity";
}

void apply(Activation a, Eigen::VectorXd& x) {
    switch (a) {
        case Activation::Identity: break;
        case Activation::Tanh: x = x.array().tanh(); break;
        case Activation::Relu: x = x.array().max(0.0); break;
    }
}

}  // namespace

NetworkSpec parse_spec(const json& j) {
    if (!j.is_object() || !j.contains("input_dim") || !j.contains("layers") || !j["layers"].is_array()) {
        throw Error(ErrorCode::SchemaError, "network spec needs 'input_dim' and a 'layers' array");
    }
    NetworkSpec spec;
    try {
        spec.input_dim = j.at("input_dim").get<Index>();
        std::set<std::string> names;
        for (std::size_t i = 0; i < j["layers"].size(); ++i) {
            const auto& o = j["layers"][i];
            LayerSpec l;
            l.name = o.value("name", "layer" + std::to_string(i));
            const std::string where = "layer '" + l.name + "'";
            const auto kind = o.at("kind").get<std::string>();
            if (kind == "dense" || kind == "linear") {
                l.kind = LayerKind::Dense;
            } else if (kind == "activation") {
                l.kind = LayerKind::Activation;
            } else {
                throw Error(ErrorCode::SchemaError, where + ": unsupported layer kind '" + kind + "'");
            }
            l.in = o.at("in").get<Index>();
            l.out = o.at("out").get<Index>();
            l.activation = parse_activation(o.value("activation", "identity"), where);
            if (l.in <= 0 || l.out <= 0) {
                throw Error(ErrorCode::SchemaError, where + ": dimensions must be positive");
            }
            if (!names.insert(l.name).second) {
                throw Error(ErrorCode::SchemaError, where + ": duplicate layer name");
            }
            spec.layers.push_back(std::move(l));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaError, e.what());
    }
    if (spec.input_dim <= 0) {
        throw Error(ErrorCode::SchemaError, "input_dim must be positive");
    }
    Index expected = spec.input_dim;
    for (const auto& l : spec.layers) {
        if (l.in != expected) {
            throw Error(ErrorCode::DimensionChainBroken, "layer '" + l.name + "' expects input " + std::to_string(l.in) +
                                                             " but receives " + std::to_string(expected));
        }
        if (l.kind == LayerKind::Activation && l.in != l.out) {
            throw Error(ErrorCode::DimensionChainBroken, "activation layer '" + l.name + "' must keep its dimension");
        }
        expected = l.out;
    }
    return spec;
}

json spec_to_json(const NetworkSpec& spec) {
    json layers = json::array();
    for (const auto& l : spec.layers) {
        layers.push_back({{"name", l.name},
                          {"kind", l.kind == LayerKind::Dense ? "dense" : "activation"},
                          {"in", l.in},
                          {"out", l.out},
                          {"activation", std::string(activation_name(l.activation))}});
    }
    return {{"input_dim", spec.input_dim}, {"layers", std::move(layers)}};
}

Network::Network(NetworkSpec spec, std::span<const double> parameters) : spec_(std::move(spec)) {
    std::size_t offset = 0;
    for (const auto& l : spec_.layers) {
        if (l.kind != LayerKind::Dense) {
            continue;
        }
        const auto need = static_cast<std::size_t>(l.in) * static_cast<std::size_t>(l.out) + static_cast<std::size_t>(l.out);
        if (offset + need > parameters.size()) {
            throw Error(ErrorCode::BlobSizeMismatch, "blob ends inside layer '" + l.name + "' (has " +
                                                         std::to_string(parameters.size()) + " values, need " +
                                                         std::to_string(spec_.parameter_count()) + ")");
        }
        Dense d;
        d.weights.resize(l.out, l.in);
        for (Index r = 0; r < l.out; ++r) {
            for (Index c = 0; c < l.in; ++c) {
                d.weights(r, c) = parameters[offset++];
            }
        }
        d.bias.resize(l.out);
        for (Index r = 0; r < l.out; ++r) {
            d.bias(r) = parameters[offset++];
        }
        dense_.push_back(std::move(d));
    }
    if (offset != parameters.size()) {
        const std::string last = spec_.layers.empty() ? std::string("<none>") : spec_.layers.back().name;
        throw Error(ErrorCode::BlobSizeMismatch, std::to_string(parameters.size() - offset) +
                                                     " trailing value(s) after last layer '" + last + "'");
    }
}

std::vector<double> Network::parameters() const {
    std::vector<double> out;
    out.reserve(spec_.parameter_count());
    for (const auto& d : dense_) {
        for (Index r = 0; r < d.weights.rows(); ++r) {
            for (Index c = 0; c < d.weights.cols(); ++c) {
                out.push_back(d.weights(r, c));
            }
        }
        for (Index r = 0; r < d.bias.size(); ++r) {
            out.push_back(d.bias(r));
        }
    }
    return out;
}

std::vector<double> Network::forward(std::span<const double> x) const {
    if (static_cast<Index>(x.size()) != spec_.input_dim) {
        throw Error(ErrorCode::DimensionMismatch, "network input has " + std::to_string(x.size()) +
                                                      " values, expected " + std::to_string(spec_.input_dim));
    }
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    std::size_t dense = 0;
    for (const auto& l : spec_.layers) {
        if (l.kind == LayerKind::Dense) {
            const auto& d = dense_[dense++];
            a = d.weights * a + d.bias;
        }
        apply(l.activation, a);
    }
    return {a.data(), a.data() + a.size()};
}

std::vector<double> read_blob(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open parameter blob '" + path.string() + "'");
    }
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes % sizeof(double) != 0) {
        throw Error(ErrorCode::BlobSizeMismatch, "blob size " + std::to_string(bytes) + " is not a multiple of 8 bytes");
    }
    std::vector<double> values(bytes / sizeof(double));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
    return values;
}

void write_blob(std::span<const double> values, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write parameter blob '" + path.string() + "'");
    }
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
}

Network load_network(const std::filesystem::path& spec_file, const std::filesystem::path& blob_file) {
    std::ifstream in(spec_file);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open network spec '" + spec_file.string() + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::SchemaError, spec_file.string() + ": " + e.what());
    }
    auto spec = parse_spec(j);
    const auto blob = read_blob(blob_file);
    return Network(std::move(spec), blob);
}

void save_network(const Network& net, const std::filesystem::path& spec_file, const std::filesystem::path& blob_file) {
    std::ofstream out(spec_file);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write network spec '" + spec_file.string() + "'");
    }
    out << spec_to_json(net.spec()).dump(2) << '\n';
    write_blob(net.parameters(), blob_file);
}

std::vector<StateChannel> parse_layout(std::span<const std::string> names) {
    std::vector<StateChannel> layout;
    for (const auto& n : names) {
        if (n == "delta") {
            layout.push_back(StateChannel::Delta);
        } else if (n == "omega") {
            layout.push_back(StateChannel::Omega);
        } else if (n == "e_prime") {
            layout.push_back(StateChannel::EPrime);
        } else {
            throw Error(ErrorCode::InterfaceMismatch, "unknown state channel '" + n + "'");
        }
    }
    return layout;
}

namespace {

double read_channel(const MachineState& x, StateChannel c) {
    switch (c) {
        case StateChannel::Delta: return x.delta;
        case StateChannel::Omega: return x.omega;
        case StateChannel::EPrime: return x.e_prime;
    }
    return 0.0;
}

}  // namespace

NeuralMachine::NeuralMachine(std::shared_ptr<const Network> net, std::vector<StateChannel> layout, double xd_prime)
    : net_(std::move(net)), layout_(std::move(layout)), xd_(xd_prime) {
    if (!net_) {
        throw Error(ErrorCode::InterfaceMismatch, "no network supplied");
    }
    const auto width = static_cast<Index>(layout_.size());
    if (net_->input_dim() != width + 2 || net_->output_dim() != width) {
        throw Error(ErrorCode::InterfaceMismatch,
                    "network maps " + std::to_string(net_->input_dim()) + " -> " + std::to_string(net_->output_dim()) +
                        " but the state layout needs " + std::to_string(width + 2) + " -> " + std::to_string(width));
    }
    if (std::find(layout_.begin(), layout_.end(), StateChannel::Delta) == layout_.end()) {
        throw Error(ErrorCode::InterfaceMismatch, "state layout must expose the rotor angle");
    }
    std::set<StateChannel> unique(layout_.begin(), layout_.end());
    if (unique.size() != layout_.size()) {
        throw Error(ErrorCode::InterfaceMismatch, "state layout repeats a channel");
    }
    if (!(xd_ > 0.0)) {
        throw Error(ErrorCode::InterfaceMismatch, "terminal reactance must be positive");
    }
}

MachineDerivative NeuralMachine::derivative(const MachineState& x, Complex v_terminal) const {
    std::vector<double> input;
    input.reserve(layout_.size() + 2);
    for (const auto c : layout_) {
        input.push_back(read_channel(x, c));
    }
    input.push_back(v_terminal.real());
    input.push_back(v_terminal.imag());
    const auto out = net_->forward(input);
    MachineDerivative d;
    for (std::size_t i = 0; i < layout_.size(); ++i) {
        switch (layout_[i]) {
            case StateChannel::Delta: d.d_delta = out[i]; break;
            case StateChannel::Omega: d.d_omega = out[i]; break;
            case StateChannel::EPrime: d.d_e_prime = out[i]; break;
        }
    }
    return d;
}

Complex NeuralMachine::injection(const MachineState& x) const {
    return std::polar(x.e_prime, x.delta) / Complex{0.0, xd_};
}

std::shared_ptr<const DeviceModel> as_derivative_model(std::shared_ptr<const Network> net,
                                                       std::vector<StateChannel> layout, double xd_prime) {
    return std::make_shared<NeuralMachine>(std::move(net), std::move(layout), xd_prime);
}

}  // namespace transim::nn
