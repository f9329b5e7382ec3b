#pragma once

#include "tactile/tensor.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace tactile::nn {

/// Fully connected: y = x W^T + b, W is [out, in].
struct Dense {
    std::string name;
    size_t in = 0;
    size_t out = 0;
    double init_gain = 1.4142135623730951;
};

/// 2D convolution over NCHW tensors with square kernels.
struct Conv2d {
    std::string name;
    size_t cin = 0;
    size_t cout = 0;
    size_t kernel = 3;
    size_t stride = 1;
    size_t pad = 1;
    double init_gain = 1.4142135623730951;
};

/// out = conv2(relu(conv1(x))) + skip(x). The skip path is the identity when
/// stride is 1 and channels match, otherwise a strided 1x1 convolution.
/// There is no activation after the sum.
struct ResidualBlock {
    std::string name;
    size_t cin = 0;
    size_t cout = 0;
    size_t stride = 1;

    [[nodiscard]] bool identity_skip() const { return stride == 1 && cin == cout; }
    [[nodiscard]] Conv2d conv1() const { return {name + ".conv1", cin, cout, 3, stride, 1}; }
    [[nodiscard]] Conv2d conv2() const { return {name + ".conv2", cout, cout, 3, 1, 1, 0.5}; }
    [[nodiscard]] Conv2d skip() const { return {name + ".skip", cin, cout, 1, stride, 0, 1.0}; }
};

struct Relu { std::string name = "relu"; };
struct Sigmoid { std::string name = "sigmoid"; };
/// Nearest-neighbour x2 upsampling.
struct Upsample2x { std::string name = "upsample"; };
struct Flatten { std::string name = "flatten"; };
/// Learned per-element offset with the shape of one sample, parameter `<name>.b`.
struct Bias {
    std::string name;
    Shape sample_dims;
};
/// Reshape the per-sample part of a batch tensor.
struct Reshape {
    std::string name = "reshape";
    Shape sample_dims;
};

using Layer = std::variant<Dense, Conv2d, ResidualBlock, Relu, Sigmoid, Upsample2x, Flatten, Reshape, Bias>;

std::string layer_name(const Layer& l);

struct ParamSpec {
    std::string name;
    Shape dims;
    size_t fan_in = 1;
    double gain = 1.0;
    bool is_bias = false;
};

template <typename T>
struct LayerCache {
    std::vector<Tensor<T>> saved;
};

/// Activations recorded by one forward call, consumed by backward.
template <typename T>
struct ForwardPass {
    Tensor<T> output;
    std::vector<LayerCache<T>> caches;
    const void* network_identity = nullptr;
    const void* params_identity = nullptr;
    uint64_t params_version = 0;
};

/// A sequential stack of layers. Parameters live outside the network in a
/// Parameters map so one description can serve float and double models.
class Network {
  public:
    Network() = default;
    Network(std::string name, Shape sample_input, std::vector<Layer> layers);

    [[nodiscard]] const std::string& name() const { return name_; }
    [[nodiscard]] const Shape& sample_input() const { return sample_input_; }
    [[nodiscard]] const Shape& sample_output() const { return sample_output_; }
    [[nodiscard]] const std::vector<Layer>& layers() const { return layers_; }

    [[nodiscard]] std::vector<ParamSpec> param_specs() const;

    /// Adds freshly initialised parameters (fan-in scaled uniform, zero bias).
    template <typename T>
    void init_params(Parameters<T>& params, std::mt19937_64& rng) const;

    template <typename T>
    ForwardPass<T> forward(const Parameters<T>& params, const Tensor<T>& input) const;

    /// Accumulates parameter gradients into grads and returns the input gradient.
    template <typename T>
    Tensor<T> backward(const Parameters<T>& params, const ForwardPass<T>& pass, const Tensor<T>& grad_output,
                       Parameters<T>& grads) const;

    /// Appends one byte per ReLU input recorded in pass: 1 when positive.
    template <typename T>
    void relu_mask(const ForwardPass<T>& pass, std::vector<uint8_t>& out) const;

  private:
    std::string name_;
    Shape sample_input_;
    Shape sample_output_;
    std::vector<Layer> layers_;
    std::vector<Shape> layer_inputs_;
};

/// Output per-sample shape of a layer, or ShapeError naming the layer.
Shape layer_output_shape(const Layer& layer, const Shape& sample_in);

} // namespace tactile::nn
