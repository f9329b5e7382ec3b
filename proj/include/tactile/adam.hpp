#pragma once

#include "tactile/tensor.hpp"

#include <cmath>
#include <cstdint>

namespace tactile {

struct AdamConfig {
    double learning_rate = 5e-5;
    double epoch_decay = 0.97; ///< lr multiplier applied once per epoch
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
    AdamConfig config;
    Parameters<T> first_moment;
    Parameters<T> second_moment;
    uint64_t step = 0;
    int epoch = 0;

    static AdamState create(const Parameters<T>& params, const AdamConfig& cfg = {}) {
        return {cfg, params.zeros_like(), params.zeros_like(), 0, 0};
    }
    [[nodiscard]] double current_learning_rate() const {
        return config.learning_rate * std::pow(config.epoch_decay, epoch);
    }
};

/// One bias-corrected Adam update at the scheduled learning rate.
template <typename T>
void adam_step(Parameters<T>& params, const Parameters<T>& grads, AdamState<T>& state);

} // namespace tactile
