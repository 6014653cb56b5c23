#pragma once

#include "transim/common.hpp"
#include "transim/dynamics.hpp"

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace transim::nn {

enum class LayerKind { Dense, Activation };
enum class Activation { Identity, Tanh, Relu };

struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::Dense;
    Index in = 0;
    Index out = 0;
    Activation activation = Activation::Identity;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
    Index input_dim = 0;
    std::vector<LayerSpec> layers;

    [[nodiscard]] Index output_dim() const noexcept { return layers.empty() ? input_dim : layers.back().out; }
    /// Sum of in*out + out over dense layers.
    [[nodiscard]] std::size_t parameter_count() const noexcept;

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Checks the schema and dimension chaining; SchemaError / DimensionChainBroken.
[[nodiscard]] NetworkSpec parse_spec(const nlohmann::json& j);
[[nodiscard]] nlohmann::json spec_to_json(const NetworkSpec& spec);

/// Immutable feed-forward network. forward() is safe to call concurrently.
class Network {
public:
    /// Blob layout: per dense layer, weights row-major (out x in) then bias.
    Network(NetworkSpec spec, std::span<const double> parameters);

    [[nodiscard]] const NetworkSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] Index input_dim() const noexcept { return spec_.input_dim; }
    [[nodiscard]] Index output_dim() const noexcept { return spec_.output_dim(); }
    /// Flat parameter vector in blob order.
    [[nodiscard]] std::vector<double> parameters() const;

    [[nodiscard]] std::vector<double> forward(std::span<const double> x) const;

private:
    struct Dense {
        Eigen::MatrixXd weights;
        Eigen::VectorXd bias;
    };

    NetworkSpec spec_;
    std::vector<Dense> dense_;  // one per dense layer, in order
};

[[nodiscard]] std::vector<double> read_blob(const std::filesystem::path& path);
void write_blob(std::span<const double> values, const std::filesystem::path& path);

[[nodiscard]] Network load_network(const std::filesystem::path& spec_file, const std::filesystem::path& blob_file);
void save_network(const Network& net, const std::filesystem::path& spec_file, const std::filesystem::path& blob_file);

enum class StateChannel { Delta, Omega, EPrime };

[[nodiscard]] std::vector<StateChannel> parse_layout(std::span<const std::string> names);

/// Generator whose state derivative is the network output. Inputs are the
/// declared state channels in layout order followed by Re V and Im V at the
/// terminal bus; outputs are the derivatives of the same channels. The Norton
/// equivalent is E'∠δ behind jx'd.
class NeuralMachine final : public DeviceModel {
public:
    NeuralMachine(std::shared_ptr<const Network> net, std::vector<StateChannel> layout, double xd_prime);

    [[nodiscard]] MachineDerivative derivative(const MachineState& x, Complex v_terminal) const override;
    [[nodiscard]] Complex injection(const MachineState& x) const override;
    [[nodiscard]] Complex norton_admittance() const override { return 1.0 / Complex{0.0, xd_}; }
    [[nodiscard]] std::string_view kind() const noexcept override { return "neural"; }

    [[nodiscard]] const std::vector<StateChannel>& layout() const noexcept { return layout_; }

private:
    std::shared_ptr<const Network> net_;
    std::vector<StateChannel> layout_;
    double xd_;
};

/// Throws InterfaceMismatch unless input = |layout| + 2 and output = |layout|.
[[nodiscard]] std::shared_ptr<const DeviceModel> as_derivative_model(std::shared_ptr<const Network> net,
                                                                     std::vector<StateChannel> layout,
                                                                     double xd_prime);

}  // namespace transim::nn
