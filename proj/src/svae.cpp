#include "tactile/svae.hpp"

#include "tactile/errors.hpp"
#include "tactile/latent.hpp"
#include "tactile/parallel.hpp"
#include "tactile/rng.hpp"

#include <cmath>

namespace tactile {

void SVAEArchitecture::validate() const {
    if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
    if (channels.empty()) throw ConfigError("channel plan must list at least one block");
    for (int c : channels)
        if (c < 1) throw ConfigError("channel counts must be positive");
    for (int h : regressor_hidden)
        if (h < 1) throw ConfigError("regressor widths must be positive");
    const int div = 1 << channels.size();
    if (input_height < div || input_width < div || input_height % div || input_width % div) {
        throw ConfigError("input " + std::to_string(input_height) + "x" + std::to_string(input_width) +
                          " must be divisible by " + std::to_string(div));
    }
}

SVAEArchitecture SVAEArchitecture::micro() {
    SVAEArchitecture a;
    a.input_height = 16;
    a.input_width = 16;
    a.latent_dim = 4;
    a.channels = {2, 2, 2, 2};
    a.regressor_hidden = {8};
    return a;
}

std::string to_string(LossMode m) {
    switch (m) {
        case LossMode::Supervised: return "svae";
        case LossMode::PredictionOnly: return "convnet";
        case LossMode::ReconstructionOnly: return "vae";
    }
    return "svae";
}

LossMode loss_mode_from_string(const std::string& s) {
    if (s == "svae") return LossMode::Supervised;
    if (s == "convnet") return LossMode::PredictionOnly;
    if (s == "vae") return LossMode::ReconstructionOnly;
    throw ConfigError("unknown loss mode '" + s + "'");
}

void LossConfig::validate() const {
    if (!(alpha >= 0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and >= 0");
    if (!(beta >= 0) || !std::isfinite(beta)) throw ConfigError("beta must be finite and >= 0");
}

// recon = 1 - pred makes the two task weights sum to exactly 1 in floating point.
double LossConfig::pred_weight() const {
    switch (mode) {
        case LossMode::Supervised: return 1.0 / (1.0 + alpha);
        case LossMode::PredictionOnly: return 1.0;
        case LossMode::ReconstructionOnly: return 0.0;
    }
    return 0.0;
}

double LossConfig::recon_weight() const { return 1.0 - pred_weight(); }

double LossConfig::kl_weight() const { return mode == LossMode::PredictionOnly ? 0.0 : beta; }

LabelNormalizer LabelNormalizer::fit(const std::vector<Wrench>& labels) {
    if (labels.empty()) throw DataError("cannot fit label normalization on an empty split");
    LabelNormalizer n;
    const double count = static_cast<double>(labels.size());
    n.mean.fill(0);
    for (const auto& w : labels) {
        auto v = w.values();
        for (size_t a = 0; a < kWrenchDim; ++a) n.mean[a] += v[a];
    }
    for (auto& m : n.mean) m /= count;
    std::array<double, kWrenchDim> var{};
    for (const auto& w : labels) {
        auto v = w.values();
        for (size_t a = 0; a < kWrenchDim; ++a) var[a] += (v[a] - n.mean[a]) * (v[a] - n.mean[a]);
    }
    for (size_t a = 0; a < kWrenchDim; ++a) {
        const double sd = std::sqrt(var[a] / count);
        n.stddev[a] = sd > 1e-12 ? sd : 1.0;
    }
    return n;
}

std::array<double, kWrenchDim> LabelNormalizer::normalize(const Wrench& w) const {
    auto v = w.values();
    std::array<double, kWrenchDim> out{};
    for (size_t a = 0; a < kWrenchDim; ++a) out[a] = (v[a] - mean[a]) / stddev[a];
    return out;
}

Wrench LabelNormalizer::denormalize(std::span<const double> v) const {
    if (v.size() != kWrenchDim) throw ShapeError("denormalize expects 6 values");
    std::array<double, kWrenchDim> out{};
    for (size_t a = 0; a < kWrenchDim; ++a) out[a] = v[a] * stddev[a] + mean[a];
    return Wrench::from_values(out, Frame::FingerBase);
}

namespace {

nn::Network build_encoder(const SVAEArchitecture& a) {
    std::vector<nn::Layer> layers;
    const size_t c0 = static_cast<size_t>(a.channels[0]);
    layers.emplace_back(nn::Conv2d{"enc.stem", 1, c0, 3, 1, 1});
    layers.emplace_back(nn::Relu{});
    size_t prev = c0;
    for (size_t i = 0; i < a.channels.size(); ++i) {
        const size_t c = static_cast<size_t>(a.channels[i]);
        layers.emplace_back(nn::ResidualBlock{"enc.block" + std::to_string(i), prev, c, 2});
        layers.emplace_back(nn::Relu{});
        prev = c;
    }
    layers.emplace_back(nn::Flatten{});
    return {"encoder", {1, static_cast<size_t>(a.input_height), static_cast<size_t>(a.input_width)}, std::move(layers)};
}

size_t feature_count(const SVAEArchitecture& a) {
    return static_cast<size_t>(a.channels.back()) * a.feature_height() * a.feature_width();
}

nn::Network build_decoder(const SVAEArchitecture& a) {
    std::vector<nn::Layer> layers;
    const size_t d = static_cast<size_t>(a.latent_dim);
    const size_t last = static_cast<size_t>(a.channels.back());
    layers.emplace_back(nn::Dense{"dec.fc", d, feature_count(a)});
    layers.emplace_back(nn::Relu{});
    layers.emplace_back(nn::Reshape{"dec.reshape",
                                    {last, static_cast<size_t>(a.feature_height()), static_cast<size_t>(a.feature_width())}});
    for (size_t i = a.channels.size(); i-- > 0;) {
        const size_t cin = static_cast<size_t>(a.channels[i]);
        const size_t cout = static_cast<size_t>(i == 0 ? a.channels[0] : a.channels[i - 1]);
        layers.emplace_back(nn::Upsample2x{});
        layers.emplace_back(nn::ResidualBlock{"dec.block" + std::to_string(i), cin, cout, 1});
        layers.emplace_back(nn::Relu{});
    }
    layers.emplace_back(nn::Conv2d{"dec.out", static_cast<size_t>(a.channels[0]), 1, 3, 1, 1, 1.0});
    layers.emplace_back(nn::Bias{"dec.pixel", {1, static_cast<size_t>(a.input_height), static_cast<size_t>(a.input_width)}});
    layers.emplace_back(nn::Sigmoid{});
    return {"decoder", {d}, std::move(layers)};
}

nn::Network build_regressor(const SVAEArchitecture& a) {
    std::vector<nn::Layer> layers;
    size_t prev = static_cast<size_t>(a.latent_dim);
    for (size_t j = 0; j < a.regressor_hidden.size(); ++j) {
        const size_t h = static_cast<size_t>(a.regressor_hidden[j]);
        layers.emplace_back(nn::Dense{"reg.fc" + std::to_string(j), prev, h});
        layers.emplace_back(nn::Relu{});
        prev = h;
    }
    layers.emplace_back(nn::Dense{"reg.out", prev, kWrenchDim, 1.0});
    return {"regressor", {static_cast<size_t>(a.latent_dim)}, std::move(layers)};
}

const SVAEArchitecture& validated(const SVAEArchitecture& a) {
    a.validate();
    return a;
}

} // namespace

Svae::Svae(SVAEArchitecture arch)
    : arch_(validated(arch)),
      encoder_(build_encoder(arch_)),
      mu_head_("mu_head", {feature_count(arch_)},
               {nn::Dense{"lat.mu", feature_count(arch_), static_cast<size_t>(arch_.latent_dim), 1.0}}),
      logvar_head_("logvar_head", {feature_count(arch_)},
                   {nn::Dense{"lat.logvar", feature_count(arch_), static_cast<size_t>(arch_.latent_dim), 0.1}}),
      decoder_(build_decoder(arch_)),
      regressor_(build_regressor(arch_)) {}

template <typename T>
Parameters<T> Svae::init_params(uint64_t seed) const {
    Parameters<T> params;
    std::mt19937_64 rng(derive_seed(seed, 0x1417));
    encoder_.init_params(params, rng);
    mu_head_.init_params(params, rng);
    logvar_head_.init_params(params, rng);
    decoder_.init_params(params, rng);
    regressor_.init_params(params, rng);
    return params;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> Svae::encode(const Parameters<T>& params, const Tensor<T>& images) const {
    auto enc = encoder_.forward(params, images);
    auto mu = mu_head_.forward(params, enc.output);
    auto lv = logvar_head_.forward(params, enc.output);
    return {std::move(mu.output), std::move(lv.output)};
}

template <typename T>
Tensor<T> Svae::decode(const Parameters<T>& params, const Tensor<T>& z) const {
    return decoder_.forward(params, z).output;
}

template <typename T>
Tensor<T> Svae::regress(const Parameters<T>& params, const Tensor<T>& mu) const {
    return regressor_.forward(params, mu).output;
}

template <typename T>
LossBreakdown Svae::loss(const Parameters<T>& params, const Tensor<T>& images, const Tensor<T>& labels,
                         const Tensor<T>& eps, const LossConfig& cfg, Parameters<T>* grads) const {
    cfg.validate();
    const size_t n = images.rank() > 0 ? images.dim(0) : 0;
    const size_t d = static_cast<size_t>(arch_.latent_dim);
    if (n == 0) throw DataError("loss: empty batch");
    if (labels.dims() != Shape{n, kWrenchDim}) throw ShapeError("loss: labels must be [N,6], got " + shape_str(labels.dims()));
    if (eps.dims() != Shape{n, d}) throw ShapeError("loss: eps must be [N,d], got " + shape_str(eps.dims()));

    const double wr = cfg.recon_weight();
    const double wp = cfg.pred_weight();
    const double wk = cfg.kl_weight();

    auto enc = encoder_.forward(params, images);
    auto mu_pass = mu_head_.forward(params, enc.output);
    auto lv_pass = logvar_head_.forward(params, enc.output);
    const Tensor<T>& mu = mu_pass.output;
    const Tensor<T>& lv = lv_pass.output;

    Tensor<T> z(mu.dims());
    for (size_t s = 0; s < n; ++s) {
        auto zs = reparameterize<T>(std::span(mu.data() + s * d, d), std::span(lv.data() + s * d, d),
                                    std::span(eps.data() + s * d, d));
        std::copy(zs.begin(), zs.end(), z.data() + s * d);
    }

    auto dec = decoder_.forward(params, z);
    auto reg = regressor_.forward(params, mu);

    LossBreakdown out;
    const size_t pixels = images.numel() / n;
    for (size_t i = 0; i < images.numel(); ++i) {
        const double e = static_cast<double>(dec.output[i]) - images[i];
        out.recon += e * e;
    }
    out.recon /= static_cast<double>(n * pixels);
    for (size_t i = 0; i < labels.numel(); ++i) {
        const double e = static_cast<double>(reg.output[i]) - labels[i];
        out.pred += e * e;
    }
    out.pred /= static_cast<double>(n * kWrenchDim);
    for (size_t s = 0; s < n; ++s) {
        out.kl += kl_diag_gaussian<T>(std::span(mu.data() + s * d, d), std::span(lv.data() + s * d, d));
    }
    out.kl /= static_cast<double>(n * d);
    out.total = wr * out.recon + wp * out.pred + wk * out.kl;

    if (!grads) return out;

    Tensor<T> dmu(mu.dims());
    Tensor<T> dlv(lv.dims());
    if (wr > 0) {
        Tensor<T> dxh(dec.output.dims());
        const double scale = 2.0 * wr / static_cast<double>(n * pixels);
        for (size_t i = 0; i < dxh.numel(); ++i) dxh[i] = static_cast<T>(scale * (dec.output[i] - images[i]));
        Tensor<T> dz = decoder_.backward(params, dec, dxh, *grads);
        for (size_t i = 0; i < dz.numel(); ++i) {
            dmu[i] += dz[i];
            dlv[i] += dz[i] * eps[i] * T{0.5} * std::exp(lv[i] / T{2});
        }
    }
    if (wp > 0) {
        Tensor<T> dyh(reg.output.dims());
        const double scale = 2.0 * wp / static_cast<double>(n * kWrenchDim);
        for (size_t i = 0; i < dyh.numel(); ++i) dyh[i] = static_cast<T>(scale * (reg.output[i] - labels[i]));
        Tensor<T> dm = regressor_.backward(params, reg, dyh, *grads);
        for (size_t i = 0; i < dm.numel(); ++i) dmu[i] += dm[i];
    }
    if (wk > 0) {
        const double scale = wk / static_cast<double>(n * d);
        for (size_t i = 0; i < mu.numel(); ++i) {
            dmu[i] += static_cast<T>(scale * mu[i]);
            dlv[i] += static_cast<T>(scale * 0.5 * std::expm1(static_cast<double>(lv[i])));
        }
    }
    Tensor<T> dfeat = mu_head_.backward(params, mu_pass, dmu, *grads);
    Tensor<T> dfeat_lv = logvar_head_.backward(params, lv_pass, dlv, *grads);
    for (size_t i = 0; i < dfeat.numel(); ++i) dfeat[i] += dfeat_lv[i];
    encoder_.backward(params, enc, dfeat, *grads);
    return out;
}

template Parameters<float> Svae::init_params<float>(uint64_t) const;
template Parameters<double> Svae::init_params<double>(uint64_t) const;
template std::pair<Tensor<float>, Tensor<float>> Svae::encode(const Parameters<float>&, const Tensor<float>&) const;
template std::pair<Tensor<double>, Tensor<double>> Svae::encode(const Parameters<double>&, const Tensor<double>&) const;
template Tensor<float> Svae::decode(const Parameters<float>&, const Tensor<float>&) const;
template Tensor<double> Svae::decode(const Parameters<double>&, const Tensor<double>&) const;
template Tensor<float> Svae::regress(const Parameters<float>&, const Tensor<float>&) const;
template Tensor<double> Svae::regress(const Parameters<double>&, const Tensor<double>&) const;
template LossBreakdown Svae::loss(const Parameters<float>&, const Tensor<float>&, const Tensor<float>&,
                                  const Tensor<float>&, const LossConfig&, Parameters<float>*) const;
template LossBreakdown Svae::loss(const Parameters<double>&, const Tensor<double>&, const Tensor<double>&,
                                  const Tensor<double>&, const LossConfig&, Parameters<double>*) const;

template <typename T>
std::vector<uint8_t> Svae::relu_mask(const Parameters<T>& params, const Tensor<T>& images, const Tensor<T>& eps) const {
    const size_t n = images.dim(0);
    const size_t d = static_cast<size_t>(arch_.latent_dim);
    auto enc = encoder_.forward(params, images);
    const Tensor<T> mu = mu_head_.forward(params, enc.output).output;
    const Tensor<T> lv = logvar_head_.forward(params, enc.output).output;
    Tensor<T> z(mu.dims());
    for (size_t s = 0; s < n; ++s) {
        auto zs = reparameterize<T>(std::span(mu.data() + s * d, d), std::span(lv.data() + s * d, d),
                                    std::span(eps.data() + s * d, d));
        std::copy(zs.begin(), zs.end(), z.data() + s * d);
    }
    std::vector<uint8_t> mask;
    encoder_.relu_mask(enc, mask);
    decoder_.relu_mask(decoder_.forward(params, z), mask);
    regressor_.relu_mask(regressor_.forward(params, mu), mask);
    return mask;
}

template std::vector<uint8_t> Svae::relu_mask(const Parameters<float>&, const Tensor<float>&, const Tensor<float>&) const;
template std::vector<uint8_t> Svae::relu_mask(const Parameters<double>&, const Tensor<double>&,
                                              const Tensor<double>&) const;

Tensor<float> images_to_tensor(const std::vector<TactileImage>& images, size_t first, size_t count) {
    if (count == 0 || first + count > images.size()) throw ShapeError("images_to_tensor: bad range");
    const auto h = static_cast<size_t>(images[first].height), w = static_cast<size_t>(images[first].width);
    Tensor<float> t({count, 1, h, w});
    for (size_t i = 0; i < count; ++i) {
        const auto& img = images[first + i];
        if (static_cast<size_t>(img.height) != h || static_cast<size_t>(img.width) != w) {
            throw ShapeError("images_to_tensor: image sizes differ");
        }
        std::copy(img.pixels.begin(), img.pixels.end(), t.data() + i * h * w);
    }
    return t;
}

SvaeModel::SvaeModel(Checkpoint ckpt) : ckpt_(std::move(ckpt)), net_(ckpt_.arch) {
    Parameters<float> expected = net_.init_params<float>(0);
    expected.require_same_layout(ckpt_.params, "checkpoint parameters");
}

LatentCode SvaeModel::encode(const TactileImage& img) const { return encode_batch({img}).front(); }

std::vector<LatentCode> SvaeModel::encode_batch(const std::vector<TactileImage>& imgs) const {
    if (imgs.empty()) return {};
    for (const auto& img : imgs) {
        if (img.height != ckpt_.arch.input_height || img.width != ckpt_.arch.input_width) {
            throw ShapeError("encode: image is " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                             ", model expects " + std::to_string(ckpt_.arch.input_height) + "x" +
                             std::to_string(ckpt_.arch.input_width));
        }
    }
    auto [mu, lv] = net_.encode(ckpt_.params, images_to_tensor(imgs, 0, imgs.size()));
    const size_t d = static_cast<size_t>(latent_dim());
    std::vector<LatentCode> out(imgs.size());
    for (size_t s = 0; s < imgs.size(); ++s) {
        out[s].mu.assign(mu.data() + s * d, mu.data() + (s + 1) * d);
        out[s].logvar.assign(lv.data() + s * d, lv.data() + (s + 1) * d);
    }
    return out;
}

TactileImage SvaeModel::decode_image(std::span<const float> z) const {
    const size_t d = static_cast<size_t>(latent_dim());
    if (z.size() != d) throw ShapeError("decode_image: z has length " + std::to_string(z.size()) + ", expected " + std::to_string(d));
    Tensor<float> zt({1, d}, std::vector<float>(z.begin(), z.end()));
    Tensor<float> x = net_.decode(ckpt_.params, zt);
    TactileImage img(ckpt_.arch.input_height, ckpt_.arch.input_width);
    std::copy(x.data(), x.data() + x.numel(), img.pixels.begin());
    return img;
}

Wrench SvaeModel::predict_wrench(std::span<const float> mu) const {
    const size_t d = static_cast<size_t>(latent_dim());
    if (mu.size() != d) throw ShapeError("predict_wrench: mu has length " + std::to_string(mu.size()) + ", expected " + std::to_string(d));
    Tensor<float> y = net_.regress(ckpt_.params, Tensor<float>({1, d}, std::vector<float>(mu.begin(), mu.end())));
    std::array<double, kWrenchDim> v{};
    for (size_t a = 0; a < kWrenchDim; ++a) v[a] = y[a];
    return ckpt_.meta.normalizer.denormalize(v);
}

Evaluation evaluate(const SvaeModel& model, const std::vector<TactileImage>& images, int threads, size_t chunk) {
    Evaluation ev;
    const size_t n = images.size();
    ev.codes.resize(n);
    ev.predictions.resize(n);
    ev.recon_mse.resize(n);
    if (n == 0) return ev;
    chunk = std::max<size_t>(1, chunk);
    const size_t chunks = (n + chunk - 1) / chunk;
    const auto& net = model.network();
    const auto& params = model.checkpoint().params;
    const auto& norm = model.checkpoint().meta.normalizer;
    const size_t d = static_cast<size_t>(model.latent_dim());
    parallel_for(chunks, threads, [&](size_t c) {
        const size_t first = c * chunk;
        const size_t count = std::min(chunk, n - first);
        Tensor<float> x = images_to_tensor(images, first, count);
        auto [mu, lv] = net.encode(params, x);
        Tensor<float> xh = net.decode(params, mu);
        Tensor<float> yh = net.regress(params, mu);
        const size_t pixels = x.numel() / count;
        for (size_t s = 0; s < count; ++s) {
            auto& code = ev.codes[first + s];
            code.mu.assign(mu.data() + s * d, mu.data() + (s + 1) * d);
            code.logvar.assign(lv.data() + s * d, lv.data() + (s + 1) * d);
            std::array<double, kWrenchDim> v{};
            for (size_t a = 0; a < kWrenchDim; ++a) v[a] = yh[s * kWrenchDim + a];
            ev.predictions[first + s] = norm.denormalize(v);
            double acc = 0;
            for (size_t p = 0; p < pixels; ++p) {
                const double e = static_cast<double>(xh[s * pixels + p]) - x[s * pixels + p];
                acc += e * e;
            }
            ev.recon_mse[first + s] = acc / static_cast<double>(pixels);
        }
    });
    return ev;
}

} // namespace tactile
