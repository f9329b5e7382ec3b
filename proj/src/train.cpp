#include "tactile/errors.hpp"
#include "tactile/metrics.hpp"
#include "tactile/rng.hpp"
#include "tactile/svae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tactile {

namespace {

struct PreparedSet {
    std::vector<TactileImage> images;
    std::vector<std::array<double, kWrenchDim>> labels;
};

PreparedSet prepare(const LabeledSet& set, const LabelNormalizer& norm, const SVAEArchitecture& arch,
                    const char* what) {
    if (set.images.size() != set.wrenches.size()) throw DataError(std::string(what) + ": images and labels differ in count");
    if (set.images.empty()) throw DataError(std::string(what) + " split is empty");
    PreparedSet p;
    p.images = set.images;
    for (const auto& img : p.images) {
        if (img.height != arch.input_height || img.width != arch.input_width) {
            throw ShapeError(std::string(what) + ": image size does not match the architecture");
        }
    }
    for (const auto& w : set.wrenches) p.labels.push_back(norm.normalize(w));
    return p;
}

Tensor<float> label_tensor(const PreparedSet& s, std::span<const size_t> idx) {
    Tensor<float> t({idx.size(), kWrenchDim});
    for (size_t i = 0; i < idx.size(); ++i)
        for (size_t a = 0; a < kWrenchDim; ++a) t[i * kWrenchDim + a] = static_cast<float>(s.labels[idx[i]][a]);
    return t;
}

Tensor<float> image_tensor(const PreparedSet& s, std::span<const size_t> idx) {
    const size_t h = static_cast<size_t>(s.images[idx[0]].height), w = static_cast<size_t>(s.images[idx[0]].width);
    Tensor<float> t({idx.size(), 1, h, w});
    for (size_t i = 0; i < idx.size(); ++i) {
        const auto& px = s.images[idx[i]].pixels;
        std::copy(px.begin(), px.end(), t.data() + i * h * w);
    }
    return t;
}

struct ValidationResult {
    LossBreakdown loss;
    std::optional<double> mean_r2;
};

// Deterministic pass with eps = 0 (z = mu).
ValidationResult validate(const Svae& net, const ModelParameters& params, const PreparedSet& set,
                          const LossConfig& cfg, size_t batch) {
    ValidationResult r;
    const size_t n = set.images.size();
    const size_t d = static_cast<size_t>(net.arch().latent_dim);
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::array<std::vector<double>, kWrenchDim> pred, truth;
    for (size_t first = 0; first < n; first += batch) {
        const size_t count = std::min(batch, n - first);
        std::span<const size_t> sel(idx.data() + first, count);
        Tensor<float> x = image_tensor(set, sel);
        Tensor<float> y = label_tensor(set, sel);
        LossBreakdown lb = net.loss(params, x, y, Tensor<float>({count, d}), cfg);
        const double wgt = static_cast<double>(count) / static_cast<double>(n);
        r.loss.recon += wgt * lb.recon;
        r.loss.pred += wgt * lb.pred;
        r.loss.kl += wgt * lb.kl;
        r.loss.total += wgt * lb.total;
        auto [mu, lv] = net.encode(params, x);
        Tensor<float> yh = net.regress(params, mu);
        for (size_t s = 0; s < count; ++s) {
            for (size_t a = 0; a < kWrenchDim; ++a) {
                pred[a].push_back(yh[s * kWrenchDim + a]);
                truth[a].push_back(y[s * kWrenchDim + a]);
            }
        }
    }
    double acc = 0;
    int defined = 0;
    for (size_t a = 0; a < kWrenchDim; ++a) {
        try {
            acc += r2(pred[a], truth[a]);
            ++defined;
        } catch (const UndefinedMetric&) {
        }
    }
    if (defined > 0) r.mean_r2 = acc / defined;
    return r;
}

void require_finite(const ModelParameters& p) {
    for (const auto& [name, t] : p.entries()) {
        if (!t.all_finite()) throw NumericError("parameter '" + name + "' became non-finite during training");
    }
}

// Starts the decoder at the logit of the training mean image. With the small
// fixed learning rate the output bias cannot travel that far on its own.
void init_pixel_bias(ModelParameters& params, const std::vector<TactileImage>& images) {
    auto& b = params.mutable_at("dec.pixel.b");
    std::vector<double> mean(b.numel(), 0.0);
    for (const auto& img : images)
        for (size_t i = 0; i < mean.size(); ++i) mean[i] += img.pixels[i];
    for (size_t i = 0; i < mean.size(); ++i) {
        const double m = std::clamp(mean[i] / static_cast<double>(images.size()), 0.01, 0.99);
        b[i] = static_cast<float>(std::log(m / (1.0 - m)));
    }
}

} // namespace

Checkpoint train(const LabeledSet& train_set, const LabeledSet& validation_set, const SVAEArchitecture& arch,
                 const LossConfig& loss, const TrainHyper& hyper, const EpochCallback& on_epoch) {
    arch.validate();
    loss.validate();
    if (hyper.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (hyper.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(hyper.adam.learning_rate > 0)) throw ConfigError("learning rate must be positive");
    if (train_set.size() == 0) throw DataError("train split is empty");
    if (validation_set.size() == 0) throw DataError("validation split is empty");

    Checkpoint ck;
    ck.arch = arch;
    ck.meta.epochs = hyper.epochs;
    ck.meta.seed = hyper.seed;
    ck.meta.batch_size = hyper.batch_size;
    ck.meta.loss = loss;
    ck.meta.adam = hyper.adam;
    ck.meta.normalizer = LabelNormalizer::fit(train_set.wrenches);
    ck.meta.train_samples = train_set.size();
    ck.meta.validation_samples = validation_set.size();

    const PreparedSet tr = prepare(train_set, ck.meta.normalizer, arch, "train");
    const PreparedSet va = prepare(validation_set, ck.meta.normalizer, arch, "validation");

    const Svae net(arch);
    ck.params = net.init_params<float>(hyper.seed);
    init_pixel_bias(ck.params, tr.images);
    ModelParameters grads = ck.params.zeros_like();
    AdamState<float> adam = AdamState<float>::create(ck.params, hyper.adam);

    std::mt19937_64 order_rng(derive_seed(hyper.seed, 1));
    std::mt19937_64 eps_rng(derive_seed(hyper.seed, 2));
    const size_t batch = static_cast<size_t>(hyper.batch_size);
    const size_t d = static_cast<size_t>(arch.latent_dim);

    ck.meta.initial_validation = validate(net, ck.params, va, loss, batch).loss;

    std::vector<size_t> order(tr.images.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        adam.epoch = epoch;
        shuffle_in_place(order.begin(), order.end(), order_rng);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.learning_rate = adam.current_learning_rate();
        for (size_t first = 0; first < order.size(); first += batch) {
            const size_t count = std::min(batch, order.size() - first);
            std::span<const size_t> sel(order.data() + first, count);
            Tensor<float> x = image_tensor(tr, sel);
            Tensor<float> y = label_tensor(tr, sel);
            Tensor<float> eps({count, d});
            for (size_t i = 0; i < eps.numel(); ++i) eps[i] = static_cast<float>(standard_normal(eps_rng));
            grads.set_zero();
            const LossBreakdown lb = net.loss(ck.params, x, y, eps, loss, &grads);
            if (!std::isfinite(lb.total)) throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch));
            ck.params.require_same_layout(grads, "gradient");
            adam_step(ck.params, grads, adam);
            const double wgt = static_cast<double>(count) / static_cast<double>(order.size());
            rec.train.recon += wgt * lb.recon;
            rec.train.pred += wgt * lb.pred;
            rec.train.kl += wgt * lb.kl;
            rec.train.total += wgt * lb.total;
        }
        require_finite(ck.params);
        const ValidationResult v = validate(net, ck.params, va, loss, batch);
        rec.validation = v.loss;
        rec.validation_mean_r2 = v.mean_r2;
        ck.meta.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }

    // Reconstruction statistics on the training split, decoding mu.
    double sum = 0, worst = 0;
    for (size_t first = 0; first < tr.images.size(); first += batch) {
        const size_t count = std::min(batch, tr.images.size() - first);
        Tensor<float> x = images_to_tensor(tr.images, first, count);
        auto [mu, lv] = net.encode(ck.params, x);
        Tensor<float> xh = net.decode(ck.params, mu);
        const size_t pixels = x.numel() / count;
        for (size_t s = 0; s < count; ++s) {
            double acc = 0;
            for (size_t p = 0; p < pixels; ++p) {
                const double e = static_cast<double>(xh[s * pixels + p]) - x[s * pixels + p];
                acc += e * e;
            }
            acc /= static_cast<double>(pixels);
            sum += acc;
            worst = std::max(worst, acc);
        }
    }
    ck.meta.train_recon_mse = sum / static_cast<double>(tr.images.size());
    ck.meta.recon_mse_ceiling = worst;
    return ck;
}

} // namespace tactile
