#include "tactile/nn.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace tactile::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <class... Ts>
struct overloaded : Ts... { using Ts::operator()...; };
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void shape_fail(const std::string& layer, const std::string& what) {
    throw ShapeError("layer '" + layer + "': " + what);
}

size_t conv_out(size_t in, const Conv2d& c) { return (in + 2 * c.pad - c.kernel) / c.stride + 1; }

Shape conv_shape(const Conv2d& c, const Shape& in) {
    if (in.size() != 3 || in[0] != c.cin) {
        shape_fail(c.name, "expected [" + std::to_string(c.cin) + ",H,W], got " + shape_str(in));
    }
    if (in[1] + 2 * c.pad < c.kernel || in[2] + 2 * c.pad < c.kernel) shape_fail(c.name, "input smaller than kernel");
    return {c.cout, conv_out(in[1], c), conv_out(in[2], c)};
}

// cols is [cin*k*k, Ho*Wo] for one sample.
template <typename T>
void im2col(const T* x, size_t cin, size_t h, size_t w, const Conv2d& c, size_t ho, size_t wo, T* cols) {
    const size_t k = c.kernel;
    const size_t p = ho * wo;
    for (size_t ci = 0; ci < cin; ++ci) {
        const T* xc = x + ci * h * w;
        for (size_t ky = 0; ky < k; ++ky) {
            for (size_t kx = 0; kx < k; ++kx) {
                T* row = cols + ((ci * k + ky) * k + kx) * p;
                for (size_t oy = 0; oy < ho; ++oy) {
                    const long iy = static_cast<long>(oy * c.stride + ky) - static_cast<long>(c.pad);
                    T* dst = row + oy * wo;
                    if (iy < 0 || iy >= static_cast<long>(h)) {
                        std::fill_n(dst, wo, T{});
                        continue;
                    }
                    const T* src = xc + static_cast<size_t>(iy) * w;
                    for (size_t ox = 0; ox < wo; ++ox) {
                        const long ix = static_cast<long>(ox * c.stride + kx) - static_cast<long>(c.pad);
                        dst[ox] = (ix < 0 || ix >= static_cast<long>(w)) ? T{} : src[ix];
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* cols, size_t cin, size_t h, size_t w, const Conv2d& c, size_t ho, size_t wo, T* dx) {
    const size_t k = c.kernel;
    const size_t p = ho * wo;
    for (size_t ci = 0; ci < cin; ++ci) {
        T* dxc = dx + ci * h * w;
        for (size_t ky = 0; ky < k; ++ky) {
            for (size_t kx = 0; kx < k; ++kx) {
                const T* row = cols + ((ci * k + ky) * k + kx) * p;
                for (size_t oy = 0; oy < ho; ++oy) {
                    const long iy = static_cast<long>(oy * c.stride + ky) - static_cast<long>(c.pad);
                    if (iy < 0 || iy >= static_cast<long>(h)) continue;
                    T* dst = dxc + static_cast<size_t>(iy) * w;
                    const T* src = row + oy * wo;
                    for (size_t ox = 0; ox < wo; ++ox) {
                        const long ix = static_cast<long>(ox * c.stride + kx) - static_cast<long>(c.pad);
                        if (ix >= 0 && ix < static_cast<long>(w)) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

template <typename T>
Tensor<T> conv_forward(const Conv2d& c, const Parameters<T>& params, const Tensor<T>& x) {
    const size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const Shape out = conv_shape(c, {x.dim(1), h, w});
    const size_t ho = out[1], wo = out[2], p = ho * wo, kk = c.cin * c.kernel * c.kernel;
    const auto& wt = params.at(c.name + ".w");
    const auto& bt = params.at(c.name + ".b");
    Tensor<T> y({n, c.cout, ho, wo});
    Eigen::Map<const RowMat<T>> wm(wt.data(), static_cast<long>(c.cout), static_cast<long>(kk));
    Eigen::Map<const Vec<T>> bv(bt.data(), static_cast<long>(c.cout));
    const bool direct = c.kernel == 1 && c.stride == 1 && c.pad == 0;
    AlignedVector<T> cols(direct ? 0 : kk * p);
    for (size_t s = 0; s < n; ++s) {
        const T* xs = x.data() + s * c.cin * h * w;
        const T* src = xs;
        if (!direct) {
            im2col(xs, c.cin, h, w, c, ho, wo, cols.data());
            src = cols.data();
        }
        Eigen::Map<const RowMat<T>> cm(src, static_cast<long>(kk), static_cast<long>(p));
        Eigen::Map<RowMat<T>> ym(y.data() + s * c.cout * p, static_cast<long>(c.cout), static_cast<long>(p));
        ym.noalias() = wm * cm;
        ym.colwise() += bv;
    }
    return y;
}

template <typename T>
Tensor<T> conv_backward(const Conv2d& c, const Parameters<T>& params, const Tensor<T>& x, const Tensor<T>& dy,
                        Parameters<T>& grads) {
    const size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const size_t ho = dy.dim(2), wo = dy.dim(3), p = ho * wo, kk = c.cin * c.kernel * c.kernel;
    const auto& wt = params.at(c.name + ".w");
    Eigen::Map<const RowMat<T>> wm(wt.data(), static_cast<long>(c.cout), static_cast<long>(kk));
    auto& gw = grads.mutable_at(c.name + ".w");
    auto& gb = grads.mutable_at(c.name + ".b");
    Eigen::Map<RowMat<T>> gwm(gw.data(), static_cast<long>(c.cout), static_cast<long>(kk));
    Eigen::Map<Vec<T>> gbv(gb.data(), static_cast<long>(c.cout));
    Tensor<T> dx(x.dims());
    const bool direct = c.kernel == 1 && c.stride == 1 && c.pad == 0;
    AlignedVector<T> cols(direct ? 0 : kk * p);
    RowMat<T> dcols(static_cast<long>(kk), static_cast<long>(p));
    for (size_t s = 0; s < n; ++s) {
        const T* xs = x.data() + s * c.cin * h * w;
        const T* src = xs;
        if (!direct) {
            im2col(xs, c.cin, h, w, c, ho, wo, cols.data());
            src = cols.data();
        }
        Eigen::Map<const RowMat<T>> cm(src, static_cast<long>(kk), static_cast<long>(p));
        Eigen::Map<const RowMat<T>> dym(dy.data() + s * c.cout * p, static_cast<long>(c.cout), static_cast<long>(p));
        gwm.noalias() += dym * cm.transpose();
        gbv += dym.rowwise().sum();
        T* dxs = dx.data() + s * c.cin * h * w;
        if (direct) {
            Eigen::Map<RowMat<T>> dxm(dxs, static_cast<long>(kk), static_cast<long>(p));
            dxm.noalias() = wm.transpose() * dym;
        } else {
            dcols.noalias() = wm.transpose() * dym;
            col2im_add(dcols.data(), c.cin, h, w, c, ho, wo, dxs);
        }
    }
    return dx;
}

template <typename T>
Tensor<T> dense_forward(const Dense& d, const Parameters<T>& params, const Tensor<T>& x) {
    const size_t n = x.dim(0);
    const auto& wt = params.at(d.name + ".w");
    const auto& bt = params.at(d.name + ".b");
    Tensor<T> y({n, d.out});
    Eigen::Map<const RowMat<T>> xm(x.data(), static_cast<long>(n), static_cast<long>(d.in));
    Eigen::Map<const RowMat<T>> wm(wt.data(), static_cast<long>(d.out), static_cast<long>(d.in));
    Eigen::Map<const Vec<T>> bv(bt.data(), static_cast<long>(d.out));
    Eigen::Map<RowMat<T>> ym(y.data(), static_cast<long>(n), static_cast<long>(d.out));
    ym.noalias() = xm * wm.transpose();
    ym.rowwise() += bv.transpose();
    return y;
}

template <typename T>
Tensor<T> dense_backward(const Dense& d, const Parameters<T>& params, const Tensor<T>& x, const Tensor<T>& dy,
                         Parameters<T>& grads) {
    const size_t n = x.dim(0);
    const auto& wt = params.at(d.name + ".w");
    Eigen::Map<const RowMat<T>> xm(x.data(), static_cast<long>(n), static_cast<long>(d.in));
    Eigen::Map<const RowMat<T>> wm(wt.data(), static_cast<long>(d.out), static_cast<long>(d.in));
    Eigen::Map<const RowMat<T>> dym(dy.data(), static_cast<long>(n), static_cast<long>(d.out));
    auto& gw = grads.mutable_at(d.name + ".w");
    auto& gb = grads.mutable_at(d.name + ".b");
    Eigen::Map<RowMat<T>> gwm(gw.data(), static_cast<long>(d.out), static_cast<long>(d.in));
    Eigen::Map<Vec<T>> gbv(gb.data(), static_cast<long>(d.out));
    gwm.noalias() += dym.transpose() * xm;
    gbv += dym.colwise().sum().transpose();
    Tensor<T> dx(x.dims());
    Eigen::Map<RowMat<T>> dxm(dx.data(), static_cast<long>(n), static_cast<long>(d.in));
    dxm.noalias() = dym * wm;
    return dx;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
    Tensor<T> y(x.dims());
    for (size_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T{} ? x[i] : T{};
    return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
    Tensor<T> dx(x.dims());
    for (size_t i = 0; i < x.numel(); ++i) dx[i] = x[i] > T{} ? dy[i] : T{};
    return dx;
}

template <typename T>
void add_into(Tensor<T>& a, const Tensor<T>& b) {
    for (size_t i = 0; i < a.numel(); ++i) a[i] += b[i];
}

void add_conv_specs(const Conv2d& c, std::vector<ParamSpec>& out) {
    const size_t fan = c.cin * c.kernel * c.kernel;
    out.push_back({c.name + ".w", {c.cout, c.cin, c.kernel, c.kernel}, fan, c.init_gain, false});
    out.push_back({c.name + ".b", {c.cout}, fan, 0.0, true});
}

Shape batch_shape(size_t n, const Shape& sample) {
    Shape s{n};
    s.insert(s.end(), sample.begin(), sample.end());
    return s;
}

} // namespace

std::string layer_name(const Layer& l) {
    return std::visit([](const auto& x) { return x.name; }, l);
}

Shape layer_output_shape(const Layer& layer, const Shape& in) {
    return std::visit(
        overloaded{
            [&](const Dense& d) -> Shape {
                if (in.size() != 1 || in[0] != d.in) {
                    shape_fail(d.name, "expected [" + std::to_string(d.in) + "], got " + shape_str(in));
                }
                return {d.out};
            },
            [&](const Conv2d& c) -> Shape { return conv_shape(c, in); },
            [&](const ResidualBlock& r) -> Shape {
                Shape a = conv_shape(r.conv1(), in);
                Shape b = conv_shape(r.conv2(), a);
                Shape s = r.identity_skip() ? in : conv_shape(r.skip(), in);
                if (b != s) shape_fail(r.name, "branch and skip shapes differ");
                return b;
            },
            [&](const Relu&) -> Shape { return in; },
            [&](const Sigmoid&) -> Shape { return in; },
            [&](const Upsample2x& u) -> Shape {
                if (in.size() != 3) shape_fail(u.name, "expected [C,H,W], got " + shape_str(in));
                return {in[0], in[1] * 2, in[2] * 2};
            },
            [&](const Flatten&) -> Shape { return {shape_numel(in)}; },
            [&](const Bias& b) -> Shape {
                if (in != b.sample_dims) shape_fail(b.name, "expected " + shape_str(b.sample_dims) + ", got " + shape_str(in));
                return in;
            },
            [&](const Reshape& r) -> Shape {
                if (shape_numel(r.sample_dims) != shape_numel(in)) {
                    shape_fail(r.name, "cannot reshape " + shape_str(in) + " to " + shape_str(r.sample_dims));
                }
                return r.sample_dims;
            },
        },
        layer);
}

Network::Network(std::string name, Shape sample_input, std::vector<Layer> layers)
    : name_(std::move(name)), sample_input_(std::move(sample_input)), layers_(std::move(layers)) {
    Shape s = sample_input_;
    for (const auto& l : layers_) {
        layer_inputs_.push_back(s);
        s = layer_output_shape(l, s);
    }
    sample_output_ = s;
}

std::vector<ParamSpec> Network::param_specs() const {
    std::vector<ParamSpec> out;
    for (const auto& l : layers_) {
        std::visit(overloaded{
                       [&](const Dense& d) {
                           out.push_back({d.name + ".w", {d.out, d.in}, d.in, d.init_gain, false});
                           out.push_back({d.name + ".b", {d.out}, d.in, 0.0, true});
                       },
                       [&](const Conv2d& c) { add_conv_specs(c, out); },
                       [&](const ResidualBlock& r) {
                           add_conv_specs(r.conv1(), out);
                           add_conv_specs(r.conv2(), out);
                           if (!r.identity_skip()) add_conv_specs(r.skip(), out);
                       },
                       [&](const Bias& b) { out.push_back({b.name + ".b", b.sample_dims, 1, 0.0, true}); },
                       [](const auto&) {},
                   },
                   l);
    }
    return out;
}

template <typename T>
void Network::init_params(Parameters<T>& params, std::mt19937_64& rng) const {
    for (const auto& spec : param_specs()) {
        Tensor<T> t(spec.dims);
        if (!spec.is_bias && spec.gain != 0.0) {
            const double bound = spec.gain * std::sqrt(3.0 / static_cast<double>(spec.fan_in));
            // Raw 53-bit draws keep initialisation independent of <random> distributions.
            for (size_t i = 0; i < t.numel(); ++i) {
                const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
                t[i] = static_cast<T>((2.0 * u - 1.0) * bound);
            }
        }
        params.add(spec.name, std::move(t));
    }
}

template <typename T>
ForwardPass<T> Network::forward(const Parameters<T>& params, const Tensor<T>& input) const {
    if (input.rank() != sample_input_.size() + 1 ||
        !std::equal(sample_input_.begin(), sample_input_.end(), input.dims().begin() + 1)) {
        const std::string first = layers_.empty() ? name_ : layer_name(layers_.front());
        shape_fail(first, "network '" + name_ + "' expects samples of " + shape_str(sample_input_) + ", got " +
                              shape_str(input.dims()));
    }
    const size_t n = input.dim(0);
    ForwardPass<T> pass;
    pass.network_identity = this;
    pass.params_identity = &params;
    pass.params_version = params.version();
    pass.caches.resize(layers_.size());
    Tensor<T> x = input;
    for (size_t li = 0; li < layers_.size(); ++li) {
        auto& cache = pass.caches[li];
        Tensor<T> y = std::visit(
            overloaded{
                [&](const Dense& d) {
                    cache.saved = {x};
                    return dense_forward(d, params, x);
                },
                [&](const Conv2d& c) {
                    cache.saved = {x};
                    return conv_forward(c, params, x);
                },
                [&](const ResidualBlock& r) {
                    Tensor<T> a1 = conv_forward(r.conv1(), params, x);
                    Tensor<T> h = relu_forward(a1);
                    Tensor<T> out = conv_forward(r.conv2(), params, h);
                    if (r.identity_skip()) {
                        add_into(out, x);
                    } else {
                        add_into(out, conv_forward(r.skip(), params, x));
                    }
                    cache.saved = {x, std::move(a1), std::move(h)};
                    return out;
                },
                [&](const Relu&) {
                    cache.saved = {x};
                    return relu_forward(x);
                },
                [&](const Sigmoid&) {
                    Tensor<T> y(x.dims());
                    for (size_t i = 0; i < x.numel(); ++i) y[i] = T{1} / (T{1} + std::exp(-x[i]));
                    cache.saved = {y};
                    return y;
                },
                [&](const Upsample2x&) {
                    const size_t c = x.dim(1), h = x.dim(2), w = x.dim(3);
                    Tensor<T> y({n, c, 2 * h, 2 * w});
                    for (size_t s = 0; s < n * c; ++s) {
                        const T* src = x.data() + s * h * w;
                        T* dst = y.data() + s * 4 * h * w;
                        for (size_t i = 0; i < 2 * h; ++i)
                            for (size_t j = 0; j < 2 * w; ++j) dst[i * 2 * w + j] = src[(i / 2) * w + j / 2];
                    }
                    return y;
                },
                [&](const Flatten&) { return x.reshaped({n, shape_numel(Shape(x.dims().begin() + 1, x.dims().end()))}); },
                [&](const Reshape& r) { return x.reshaped(batch_shape(n, r.sample_dims)); },
                [&](const Bias& b) {
                    const auto& bt = params.at(b.name + ".b");
                    Tensor<T> y = x;
                    const size_t m = bt.numel();
                    for (size_t s = 0; s < n; ++s)
                        for (size_t i = 0; i < m; ++i) y[s * m + i] += bt[i];
                    return y;
                },
            },
            layers_[li]);
        x = std::move(y);
    }
    pass.output = std::move(x);
    return pass;
}

template <typename T>
Tensor<T> Network::backward(const Parameters<T>& params, const ForwardPass<T>& pass, const Tensor<T>& grad_output,
                            Parameters<T>& grads) const {
    if (pass.network_identity != this || pass.caches.size() != layers_.size()) {
        throw UsageError("network '" + name_ + "': forward cache does not belong to this network");
    }
    if (pass.params_identity != &params || pass.params_version != params.version()) {
        throw UsageError("network '" + name_ + "': stale forward cache, parameters changed since forward");
    }
    if (grad_output.dims() != pass.output.dims()) {
        throw ShapeError("network '" + name_ + "': output gradient " + shape_str(grad_output.dims()) +
                         " does not match output " + shape_str(pass.output.dims()));
    }
    Tensor<T> g = grad_output;
    for (size_t li = layers_.size(); li-- > 0;) {
        const auto& cache = pass.caches[li];
        Tensor<T> dx = std::visit(
            overloaded{
                [&](const Dense& d) { return dense_backward(d, params, cache.saved[0], g, grads); },
                [&](const Conv2d& c) { return conv_backward(c, params, cache.saved[0], g, grads); },
                [&](const ResidualBlock& r) {
                    const auto& x = cache.saved[0];
                    Tensor<T> dh = conv_backward(r.conv2(), params, cache.saved[2], g, grads);
                    Tensor<T> da1 = relu_backward(cache.saved[1], dh);
                    Tensor<T> dx = conv_backward(r.conv1(), params, x, da1, grads);
                    if (r.identity_skip()) {
                        add_into(dx, g);
                    } else {
                        add_into(dx, conv_backward(r.skip(), params, x, g, grads));
                    }
                    return dx;
                },
                [&](const Relu&) { return relu_backward(cache.saved[0], g); },
                [&](const Sigmoid&) {
                    const auto& y = cache.saved[0];
                    Tensor<T> dx(y.dims());
                    for (size_t i = 0; i < y.numel(); ++i) dx[i] = g[i] * y[i] * (T{1} - y[i]);
                    return dx;
                },
                [&](const Upsample2x&) {
                    const size_t n = g.dim(0), c = g.dim(1), h = g.dim(2) / 2, w = g.dim(3) / 2;
                    Tensor<T> dx({n, c, h, w});
                    for (size_t s = 0; s < n * c; ++s) {
                        const T* src = g.data() + s * 4 * h * w;
                        T* dst = dx.data() + s * h * w;
                        for (size_t i = 0; i < 2 * h; ++i)
                            for (size_t j = 0; j < 2 * w; ++j) dst[(i / 2) * w + j / 2] += src[i * 2 * w + j];
                    }
                    return dx;
                },
                [&](const Flatten&) { return g.reshaped(batch_shape(g.dim(0), layer_inputs_[li])); },
                [&](const Reshape&) { return g.reshaped(batch_shape(g.dim(0), layer_inputs_[li])); },
                [&](const Bias& b) {
                    auto& gb = grads.mutable_at(b.name + ".b");
                    const size_t m = gb.numel();
                    for (size_t s = 0; s < g.dim(0); ++s)
                        for (size_t i = 0; i < m; ++i) gb[i] += g[s * m + i];
                    return g;
                },
            },
            layers_[li]);
        g = std::move(dx);
    }
    return g;
}

template <typename T>
void Network::relu_mask(const ForwardPass<T>& pass, std::vector<uint8_t>& out) const {
    if (pass.caches.size() != layers_.size()) throw UsageError(name_ + ": forward pass from another network");
    for (size_t li = 0; li < layers_.size(); ++li) {
        const Tensor<T>* pre = nullptr;
        if (std::holds_alternative<Relu>(layers_[li])) pre = &pass.caches[li].saved[0];
        else if (std::holds_alternative<ResidualBlock>(layers_[li])) pre = &pass.caches[li].saved[1];
        if (!pre) continue;
        for (size_t i = 0; i < pre->numel(); ++i) out.push_back((*pre)[i] > T{0} ? 1 : 0);
    }
}

template void Network::init_params<float>(Parameters<float>&, std::mt19937_64&) const;
template void Network::init_params<double>(Parameters<double>&, std::mt19937_64&) const;
template ForwardPass<float> Network::forward(const Parameters<float>&, const Tensor<float>&) const;
template ForwardPass<double> Network::forward(const Parameters<double>&, const Tensor<double>&) const;
template Tensor<float> Network::backward(const Parameters<float>&, const ForwardPass<float>&, const Tensor<float>&,
                                         Parameters<float>&) const;
template Tensor<double> Network::backward(const Parameters<double>&, const ForwardPass<double>&,
                                          const Tensor<double>&, Parameters<double>&) const;

template void Network::relu_mask(const ForwardPass<float>&, std::vector<uint8_t>&) const;
template void Network::relu_mask(const ForwardPass<double>&, std::vector<uint8_t>&) const;

} // namespace tactile::nn
