#pragma once

#include "tactile/adam.hpp"
#include "tactile/image.hpp"
#include "tactile/nn.hpp"
#include "tactile/plant.hpp"
#include "tactile/tensor.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tactile {

inline constexpr size_t kWrenchDim = 6;

struct SVAEArchitecture {
    int input_height = 64;
    int input_width = 64;
    int latent_dim = 32;
    /// Stem width is channels[0]; residual block i outputs channels[i] at half
    /// the previous resolution. The decoder mirrors the plan.
    std::vector<int> channels{8, 16, 32, 64};
    std::vector<int> regressor_hidden{64, 64};

    void validate() const;
    [[nodiscard]] int feature_height() const { return input_height >> channels.size(); }
    [[nodiscard]] int feature_width() const { return input_width >> channels.size(); }

    /// 16x16 input with two channels per block; a few thousand parameters.
    static SVAEArchitecture micro();

    friend bool operator==(const SVAEArchitecture&, const SVAEArchitecture&) = default;
};

enum class LossMode {
    Supervised,         ///< full weighted objective
    PredictionOnly,     ///< ConvNet baseline: prediction loss only, no KL
    ReconstructionOnly, ///< VAE baseline: reconstruction + KL, regressor untouched
};

std::string to_string(LossMode m);
LossMode loss_mode_from_string(const std::string& s);

struct LossConfig {
    double alpha = 1.0;
    double beta = 0.1;
    LossMode mode = LossMode::Supervised;

    void validate() const;
    [[nodiscard]] double recon_weight() const;
    [[nodiscard]] double pred_weight() const;
    [[nodiscard]] double kl_weight() const;
};

struct LossBreakdown {
    double recon = 0;
    double pred = 0;
    double kl = 0;
    double total = 0;
};

struct LatentCode {
    std::vector<float> mu;
    std::vector<float> logvar;
};

/// Per-axis affine map taking physical wrench units to zero mean, unit variance.
struct LabelNormalizer {
    std::array<double, kWrenchDim> mean{};
    std::array<double, kWrenchDim> stddev{1, 1, 1, 1, 1, 1};

    static LabelNormalizer fit(const std::vector<Wrench>& labels);
    [[nodiscard]] std::array<double, kWrenchDim> normalize(const Wrench& w) const;
    [[nodiscard]] Wrench denormalize(std::span<const double> v) const;

    friend bool operator==(const LabelNormalizer&, const LabelNormalizer&) = default;
};

/// Encoder, latent heads, image decoder and wrench regressor. Holds no
/// parameters: every call takes a Parameters map so the same model can run in
/// float (training) and double (gradient checking).
class Svae {
  public:
    explicit Svae(SVAEArchitecture arch);

    [[nodiscard]] const SVAEArchitecture& arch() const { return arch_; }
    [[nodiscard]] const nn::Network& encoder() const { return encoder_; }
    [[nodiscard]] const nn::Network& decoder() const { return decoder_; }
    [[nodiscard]] const nn::Network& regressor() const { return regressor_; }

    template <typename T>
    [[nodiscard]] Parameters<T> init_params(uint64_t seed) const;

    /// images [N,1,H,W] -> (mu [N,d], logvar [N,d])
    template <typename T>
    std::pair<Tensor<T>, Tensor<T>> encode(const Parameters<T>& params, const Tensor<T>& images) const;
    /// z [N,d] -> images [N,1,H,W] in [0,1]
    template <typename T>
    Tensor<T> decode(const Parameters<T>& params, const Tensor<T>& z) const;
    /// mu [N,d] -> normalized wrench [N,6]
    template <typename T>
    Tensor<T> regress(const Parameters<T>& params, const Tensor<T>& mu) const;

    /// Objective over a batch: reconstruction of the reparameterized sample
    /// (per pixel), prediction from mu (per axis) and KL to the unit Gaussian
    /// (per latent coordinate), each averaged over the batch. When grads is non-null the gradient of `total` is accumulated.
    template <typename T>
    LossBreakdown loss(const Parameters<T>& params, const Tensor<T>& images, const Tensor<T>& labels,
                       const Tensor<T>& eps, const LossConfig& cfg, Parameters<T>* grads = nullptr) const;

    /// Signs of every ReLU input along the loss forward path. Two parameter
    /// settings with equal masks lie on the same smooth piece of the loss.
    template <typename T>
    std::vector<uint8_t> relu_mask(const Parameters<T>& params, const Tensor<T>& images, const Tensor<T>& eps) const;

  private:
    SVAEArchitecture arch_;
    nn::Network encoder_;
    nn::Network mu_head_;
    nn::Network logvar_head_;
    nn::Network decoder_;
    nn::Network regressor_;
};

struct EpochRecord {
    int epoch = 0;
    double learning_rate = 0;
    LossBreakdown train;
    LossBreakdown validation;
    std::optional<double> validation_mean_r2; ///< unset when no axis has variance
};

struct TrainingMetadata {
    int epochs = 0;
    uint64_t seed = 0;
    int batch_size = 64;
    LossConfig loss;
    AdamConfig adam;
    LabelNormalizer normalizer;
    LossBreakdown initial_validation;
    std::vector<EpochRecord> history;
    /// Largest per-image reconstruction MSE over the training split (z = mu).
    double recon_mse_ceiling = 0;
    double train_recon_mse = 0;
    size_t train_samples = 0;
    size_t validation_samples = 0;
};

struct Checkpoint {
    static constexpr uint32_t kFormatVersion = 1;
    SVAEArchitecture arch;
    ModelParameters params;
    TrainingMetadata meta;

    bool operator==(const Checkpoint& o) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::vector<uint8_t> checkpoint_bytes(const Checkpoint& ckpt);
Checkpoint checkpoint_from_bytes(std::span<const uint8_t> bytes);

nlohmann::json to_json(const SVAEArchitecture& a);
SVAEArchitecture architecture_from_json(const nlohmann::json& j);

/// Images paired with base wrenches.
struct LabeledSet {
    std::vector<TactileImage> images;
    std::vector<Wrench> wrenches;

    [[nodiscard]] size_t size() const { return images.size(); }
};

struct TrainHyper {
    int batch_size = 64;
    int epochs = 30;
    uint64_t seed = 1;
    AdamConfig adam;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

Checkpoint train(const LabeledSet& train_set, const LabeledSet& validation_set, const SVAEArchitecture& arch,
                 const LossConfig& loss, const TrainHyper& hyper, const EpochCallback& on_epoch = {});

/// A checkpoint ready for inference.
class SvaeModel {
  public:
    explicit SvaeModel(Checkpoint ckpt);

    [[nodiscard]] const Checkpoint& checkpoint() const { return ckpt_; }
    [[nodiscard]] const Svae& network() const { return net_; }
    [[nodiscard]] int latent_dim() const { return ckpt_.arch.latent_dim; }

    [[nodiscard]] LatentCode encode(const TactileImage& img) const;
    [[nodiscard]] std::vector<LatentCode> encode_batch(const std::vector<TactileImage>& imgs) const;
    [[nodiscard]] TactileImage decode_image(std::span<const float> z) const;
    [[nodiscard]] Wrench predict_wrench(std::span<const float> mu) const;

  private:
    Checkpoint ckpt_;
    Svae net_;
};

struct Evaluation {
    std::vector<LatentCode> codes;
    std::vector<Wrench> predictions;
    std::vector<double> recon_mse; ///< per image, decoding mu
};

/// Batched inference over a set; chunks may run on several threads and are
/// collected in input order.
Evaluation evaluate(const SvaeModel& model, const std::vector<TactileImage>& images, int threads = 1,
                    size_t chunk = 64);

Tensor<float> images_to_tensor(const std::vector<TactileImage>& images, size_t first, size_t count);

} // namespace tactile
