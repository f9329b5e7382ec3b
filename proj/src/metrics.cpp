#include "tactile/metrics.hpp"

#include "tactile/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tactile {

namespace {
void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.empty() || a.size() != b.size()) {
        throw ShapeError(std::string(what) + ": inputs must be nonempty and of equal length");
    }
}
} // namespace

double r2(std::span<const double> pred, std::span<const double> truth) {
    check_pair(pred, truth, "r2");
    double mean = 0;
    for (double t : truth) mean += t;
    mean /= static_cast<double>(truth.size());
    double ss_res = 0, ss_tot = 0;
    for (size_t i = 0; i < truth.size(); ++i) {
        ss_res += (pred[i] - truth[i]) * (pred[i] - truth[i]);
        ss_tot += (truth[i] - mean) * (truth[i] - mean);
    }
    if (!(ss_tot > 0)) throw UndefinedMetric("r2: truth is constant");
    return 1.0 - ss_res / ss_tot;
}

double mse(std::span<const double> pred, std::span<const double> truth) {
    check_pair(pred, truth, "mse");
    double acc = 0;
    for (size_t i = 0; i < truth.size(); ++i) acc += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    return acc / static_cast<double>(truth.size());
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    check_pair(a, b, "pearson");
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    // Relative floor so float round-off in a constant column counts as zero variance.
    const double floor_a = 1e-24 * std::max(1.0, ma * ma) * n;
    const double floor_b = 1e-24 * std::max(1.0, mb * mb) * n;
    if (saa <= floor_a || sbb <= floor_b) return std::nullopt;
    const double r = sab / std::sqrt(saa * sbb);
    return std::clamp(r, -1.0, 1.0);
}

} // namespace tactile
