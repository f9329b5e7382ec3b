#pragma once

#include <optional>
#include <span>
#include <vector>

namespace tactile {

/// Coefficient of determination 1 - SS_res / SS_tot. Throws UndefinedMetric
/// for constant truth and ShapeError for empty or unequal inputs.
double r2(std::span<const double> pred, std::span<const double> truth);

double mse(std::span<const double> pred, std::span<const double> truth);

/// Pearson correlation; nullopt when either side has zero variance.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

} // namespace tactile
