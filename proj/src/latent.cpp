#include "tactile/latent.hpp"

#include "tactile/errors.hpp"

#include <cmath>
#include <string>

namespace tactile {

template <typename T>
std::vector<T> reparameterize(std::span<const T> mu, std::span<const T> logvar, std::span<const T> eps) {
    if (mu.size() != logvar.size() || mu.size() != eps.size()) {
        throw ShapeError("reparameterize: lengths differ (" + std::to_string(mu.size()) + ", " +
                         std::to_string(logvar.size()) + ", " + std::to_string(eps.size()) + ")");
    }
    std::vector<T> z(mu.size());
    for (size_t i = 0; i < mu.size(); ++i) z[i] = mu[i] + std::exp(logvar[i] / T{2}) * eps[i];
    return z;
}

template <typename T>
double kl_diag_gaussian(std::span<const T> mu, std::span<const T> logvar) {
    if (mu.size() != logvar.size()) throw ShapeError("kl_diag_gaussian: lengths differ");
    double acc = 0.0;
    for (size_t i = 0; i < mu.size(); ++i) {
        const double m = mu[i], lv = logvar[i];
        if (!std::isfinite(m) || !std::isfinite(lv)) throw NumericError("kl_diag_gaussian: non-finite input");
        // expm1 keeps exp(lv) - 1 - lv accurate near lv = 0.
        acc += m * m + (std::expm1(lv) - lv);
    }
    return 0.5 * acc;
}

template std::vector<float> reparameterize(std::span<const float>, std::span<const float>, std::span<const float>);
template std::vector<double> reparameterize(std::span<const double>, std::span<const double>, std::span<const double>);
template double kl_diag_gaussian(std::span<const float>, std::span<const float>);
template double kl_diag_gaussian(std::span<const double>, std::span<const double>);

} // namespace tactile
