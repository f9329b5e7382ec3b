#pragma once

#include <span>
#include <vector>

namespace tactile {

/// z = mu + exp(logvar / 2) * eps, elementwise. eps is standard normal noise
/// supplied by the caller.
template <typename T>
std::vector<T> reparameterize(std::span<const T> mu, std::span<const T> logvar, std::span<const T> eps);

/// KL(N(mu, diag(exp(logvar))) || N(0, I)) = 0.5 * sum(mu^2 + exp(logvar) - 1 - logvar).
template <typename T>
double kl_diag_gaussian(std::span<const T> mu, std::span<const T> logvar);

} // namespace tactile
