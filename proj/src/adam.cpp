#include "tactile/adam.hpp"

namespace tactile {

template <typename T>
void adam_step(Parameters<T>& params, const Parameters<T>& grads, AdamState<T>& state) {
    params.require_same_layout(grads, "adam_step gradients");
    params.require_same_layout(state.first_moment, "adam_step first moment");
    params.require_same_layout(state.second_moment, "adam_step second moment");

    state.step += 1;
    const auto& c = state.config;
    const double lr = state.current_learning_rate();
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));

    for (const auto& [name, g] : grads.entries()) {
        auto& p = params.mutable_at(name);
        auto& m = state.first_moment.mutable_at(name);
        auto& v = state.second_moment.mutable_at(name);
        for (size_t i = 0; i < p.numel(); ++i) {
            const double gi = g[i];
            const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
            const double vi = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            p[i] = static_cast<T>(p[i] - lr * (mi / bc1) / (std::sqrt(vi / bc2) + c.epsilon));
        }
    }
}

template void adam_step(Parameters<float>&, const Parameters<float>&, AdamState<float>&);
template void adam_step(Parameters<double>&, const Parameters<double>&, AdamState<double>&);

} // namespace tactile
