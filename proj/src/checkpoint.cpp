#include "tactile/errors.hpp"
#include "tactile/svae.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace tactile {

using nlohmann::json;

namespace {

constexpr std::array<uint8_t, 4> kMagic{0x53, 0x56, 0x41, 0x45}; // "SVAE"
constexpr size_t kPreambleBytes = 4 + 4 + 8;

template <typename U>
void put_le(std::vector<uint8_t>& out, U v) {
    for (size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<uint8_t>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(std::span<const uint8_t> b, size_t pos) {
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<uint64_t>(b[pos + i]) << (8 * i);
    return static_cast<U>(v);
}

json loss_json(const LossBreakdown& l) { return {{"recon", l.recon}, {"pred", l.pred}, {"kl", l.kl}, {"total", l.total}}; }

LossBreakdown loss_from(const json& j) {
    return {j.at("recon").get<double>(), j.at("pred").get<double>(), j.at("kl").get<double>(), j.at("total").get<double>()};
}

json meta_json(const TrainingMetadata& m) {
    json hist = json::array();
    for (const auto& e : m.history) {
        hist.push_back({{"epoch", e.epoch},
                        {"learning_rate", e.learning_rate},
                        {"train", loss_json(e.train)},
                        {"validation", loss_json(e.validation)},
                        {"validation_mean_r2", e.validation_mean_r2 ? json(*e.validation_mean_r2) : json(nullptr)}});
    }
    return {{"epochs", m.epochs},
            {"seed", m.seed},
            {"batch_size", m.batch_size},
            {"loss", {{"alpha", m.loss.alpha}, {"beta", m.loss.beta}, {"mode", to_string(m.loss.mode)}}},
            {"adam",
             {{"learning_rate", m.adam.learning_rate},
              {"epoch_decay", m.adam.epoch_decay},
              {"beta1", m.adam.beta1},
              {"beta2", m.adam.beta2},
              {"epsilon", m.adam.epsilon}}},
            {"label_mean", m.normalizer.mean},
            {"label_std", m.normalizer.stddev},
            {"initial_validation", loss_json(m.initial_validation)},
            {"history", hist},
            {"recon_mse_ceiling", m.recon_mse_ceiling},
            {"train_recon_mse", m.train_recon_mse},
            {"train_samples", m.train_samples},
            {"validation_samples", m.validation_samples}};
}

TrainingMetadata meta_from(const json& j) {
    TrainingMetadata m;
    m.epochs = j.at("epochs").get<int>();
    m.seed = j.at("seed").get<uint64_t>();
    m.batch_size = j.at("batch_size").get<int>();
    const auto& l = j.at("loss");
    m.loss = {l.at("alpha").get<double>(), l.at("beta").get<double>(), loss_mode_from_string(l.at("mode").get<std::string>())};
    const auto& a = j.at("adam");
    m.adam = {a.at("learning_rate").get<double>(), a.at("epoch_decay").get<double>(), a.at("beta1").get<double>(),
              a.at("beta2").get<double>(), a.at("epsilon").get<double>()};
    m.normalizer.mean = j.at("label_mean").get<std::array<double, kWrenchDim>>();
    m.normalizer.stddev = j.at("label_std").get<std::array<double, kWrenchDim>>();
    m.initial_validation = loss_from(j.at("initial_validation"));
    for (const auto& e : j.at("history")) {
        EpochRecord r;
        r.epoch = e.at("epoch").get<int>();
        r.learning_rate = e.at("learning_rate").get<double>();
        r.train = loss_from(e.at("train"));
        r.validation = loss_from(e.at("validation"));
        if (!e.at("validation_mean_r2").is_null()) r.validation_mean_r2 = e.at("validation_mean_r2").get<double>();
        m.history.push_back(r);
    }
    m.recon_mse_ceiling = j.at("recon_mse_ceiling").get<double>();
    m.train_recon_mse = j.at("train_recon_mse").get<double>();
    m.train_samples = j.at("train_samples").get<size_t>();
    m.validation_samples = j.at("validation_samples").get<size_t>();
    return m;
}

} // namespace

json to_json(const SVAEArchitecture& a) {
    return {{"input_height", a.input_height},
            {"input_width", a.input_width},
            {"latent_dim", a.latent_dim},
            {"channels", a.channels},
            {"regressor_hidden", a.regressor_hidden},
            {"wrench_dim", kWrenchDim}};
}

SVAEArchitecture architecture_from_json(const json& j) {
    SVAEArchitecture a;
    a.input_height = j.at("input_height").get<int>();
    a.input_width = j.at("input_width").get<int>();
    a.latent_dim = j.at("latent_dim").get<int>();
    a.channels = j.at("channels").get<std::vector<int>>();
    a.regressor_hidden = j.at("regressor_hidden").get<std::vector<int>>();
    if (j.contains("wrench_dim") && j.at("wrench_dim").get<size_t>() != kWrenchDim) {
        throw ConfigError("architecture wrench_dim must be 6");
    }
    a.validate();
    return a;
}

bool Checkpoint::operator==(const Checkpoint& o) const {
    return arch == o.arch && params == o.params && meta_json(meta) == meta_json(o.meta);
}

std::vector<uint8_t> checkpoint_bytes(const Checkpoint& ckpt) {
    json dir = json::array();
    uint64_t offset = 0;
    for (const auto& [name, t] : ckpt.params.entries()) {
        const uint64_t len = t.numel() * sizeof(float);
        dir.push_back({{"name", name}, {"dims", t.dims()}, {"offset", offset}, {"length", len}});
        offset += len;
    }
    json header = {{"architecture", to_json(ckpt.arch)}, {"metadata", meta_json(ckpt.meta)}, {"tensors", dir}};
    const std::string text = header.dump();

    std::vector<uint8_t> out(kMagic.begin(), kMagic.end());
    put_le<uint32_t>(out, Checkpoint::kFormatVersion);
    put_le<uint64_t>(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    out.reserve(out.size() + offset);
    for (const auto& [name, t] : ckpt.params.entries()) {
        for (float v : t.values()) put_le<uint32_t>(out, std::bit_cast<uint32_t>(v));
    }
    return out;
}

Checkpoint checkpoint_from_bytes(std::span<const uint8_t> b) {
    if (b.size() < kPreambleBytes) {
        throw FormatError("checkpoint truncated in preamble at byte " + std::to_string(b.size()));
    }
    if (!std::equal(kMagic.begin(), kMagic.end(), b.begin())) throw FormatError("bad checkpoint magic at byte 0");
    const auto version = get_le<uint32_t>(b, 4);
    if (version != Checkpoint::kFormatVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version) + " at byte 4");
    }
    const auto header_len = get_le<uint64_t>(b, 8);
    if (header_len > b.size() - kPreambleBytes) {
        throw FormatError("checkpoint header truncated: needs bytes [16, " + std::to_string(kPreambleBytes + header_len) +
                          "), file ends at byte " + std::to_string(b.size()));
    }
    json header;
    try {
        header = json::parse(b.begin() + kPreambleBytes, b.begin() + static_cast<long>(kPreambleBytes + header_len));
    } catch (const json::exception& e) {
        throw FormatError(std::string("invalid checkpoint header at byte 16: ") + e.what());
    }
    const size_t payload = kPreambleBytes + header_len;

    Checkpoint ck;
    try {
        ck.arch = architecture_from_json(header.at("architecture"));
        ck.meta = meta_from(header.at("metadata"));
        uint64_t expected_offset = 0;
        for (const auto& entry : header.at("tensors")) {
            const auto name = entry.at("name").get<std::string>();
            const auto dims = entry.at("dims").get<Shape>();
            const auto offset = entry.at("offset").get<uint64_t>();
            const auto length = entry.at("length").get<uint64_t>();
            if (offset != expected_offset || length != shape_numel(dims) * sizeof(float)) {
                throw FormatError("tensor '" + name + "' directory entry inconsistent at payload offset " +
                                  std::to_string(offset));
            }
            if (payload + offset + length > b.size()) {
                throw FormatError("tensor '" + name + "' truncated: needs bytes [" + std::to_string(payload + offset) +
                                  ", " + std::to_string(payload + offset + length) + "), file ends at byte " +
                                  std::to_string(b.size()));
            }
            std::vector<float> data(shape_numel(dims));
            for (size_t i = 0; i < data.size(); ++i) {
                data[i] = std::bit_cast<float>(get_le<uint32_t>(b, payload + offset + 4 * i));
            }
            ck.params.add(name, Tensor<float>(dims, std::move(data)));
            expected_offset += length;
        }
        if (payload + expected_offset != b.size()) {
            throw FormatError("checkpoint has " + std::to_string(b.size() - payload - expected_offset) +
                              " trailing bytes after byte " + std::to_string(payload + expected_offset));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed checkpoint header at byte 16: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint header at byte 16: ") + e.what());
    } catch (const ShapeError& e) {
        throw FormatError(std::string("checkpoint header at byte 16: ") + e.what());
    }
    return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto bytes = checkpoint_bytes(ckpt);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return checkpoint_from_bytes(bytes);
}

} // namespace tactile
