#include "tactile/analysis.hpp"

#include "tactile/errors.hpp"
#include "tactile/metrics.hpp"
#include "tactile/parallel.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace tactile {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string csv_num(double v) {
    if (!std::isfinite(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::vector<double> axis(const std::vector<Wrench>& w, size_t a) {
    std::vector<double> out(w.size());
    for (size_t i = 0; i < w.size(); ++i) out[i] = w[i].values()[a];
    return out;
}

} // namespace

// ---------------------------------------------------------------- metrics

MetricsReport metrics_report(const std::vector<Wrench>& pred, const std::vector<Wrench>& truth,
                             const std::vector<double>& recon_mse) {
    if (pred.size() != truth.size()) throw ShapeError("metrics: prediction and truth counts differ");
    if (pred.empty()) throw DataError("metrics: empty set");
    MetricsReport r;
    r.count = pred.size();
    double sum = 0;
    int used = 0;
    for (size_t a = 0; a < kWrenchDim; ++a) {
        const auto p = axis(pred, a);
        const auto t = axis(truth, a);
        r.mse[a] = mse(p, t);
        try {
            r.r2[a] = r2(p, t);
            sum += r.r2[a];
            ++used;
        } catch (const UndefinedMetric&) {
            r.r2[a] = kNaN;
        }
    }
    r.mean_r2 = used ? sum / used : kNaN;
    double rs = 0;
    for (double v : recon_mse) rs += v;
    r.recon_mse = recon_mse.empty() ? kNaN : rs / static_cast<double>(recon_mse.size());
    return r;
}

MetricsReport evaluate_set(const SvaeModel& model, const LabeledSet& set, int threads) {
    if (set.size() == 0) throw DataError("evaluate: empty set");
    const Evaluation ev = evaluate(model, set.images, threads);
    return metrics_report(ev.predictions, set.wrenches, ev.recon_mse);
}

// ---------------------------------------------------------------- histograms

std::vector<Bin> default_force_bins() { return {{0, 2}, {2, 4}, {4, 6}, {6, 8}, {8, 10}}; }

std::vector<Bin> default_torque_bins() { return {{0, 120}, {120, 240}, {240, 360}, {360, 480}, {480, 600}}; }

std::vector<BinStats> error_histogram(std::span<const double> pred, std::span<const double> truth,
                                      const std::vector<Bin>& bins) {
    if (pred.size() != truth.size()) throw ShapeError("error_histogram: prediction and truth counts differ");
    if (bins.empty()) throw ConfigError("error_histogram: no bins");
    for (size_t b = 0; b < bins.size(); ++b) {
        if (!(bins[b].lower < bins[b].upper)) throw ConfigError("error_histogram: empty or inverted bin");
        if (b > 0 && bins[b].lower < bins[b - 1].upper) throw ConfigError("error_histogram: overlapping bins");
        if (b > 0 && bins[b].lower > bins[b - 1].upper) throw ConfigError("error_histogram: bins leave a gap");
    }
    std::vector<BinStats> out;
    std::vector<double> sum(bins.size(), 0.0), sq(bins.size(), 0.0);
    for (const auto& b : bins) out.push_back({b.lower, b.upper, 0, 0, 0});
    for (size_t i = 0; i < truth.size(); ++i) {
        const double key = std::abs(truth[i]);
        for (size_t b = 0; b < bins.size(); ++b) {
            if (key >= bins[b].lower && key < bins[b].upper) {
                const double e = pred[i] - truth[i];
                sum[b] += e;
                sq[b] += e * e;
                ++out[b].count;
                break;
            }
        }
    }
    for (size_t b = 0; b < bins.size(); ++b) {
        if (out[b].count == 0) continue;
        const double n = static_cast<double>(out[b].count);
        out[b].error_mean = sum[b] / n;
        out[b].error_std = std::sqrt(std::max(0.0, sq[b] / n - out[b].error_mean * out[b].error_mean));
    }
    return out;
}

// ---------------------------------------------------------------- correlation

double CorrelationMatrix::mean_abs_off_diagonal() const {
    double s = 0;
    size_t n = 0;
    for (size_t i = 0; i < rows; ++i)
        for (size_t j = 0; j < cols; ++j)
            if (i != j && !is_flagged(i, j)) {
                s += std::abs(at(i, j));
                ++n;
            }
    return n ? s / static_cast<double>(n) : kNaN;
}

CorrelationMatrix correlation_matrix(const std::vector<std::vector<double>>& columns) {
    const size_t d = columns.size();
    CorrelationMatrix m;
    m.rows = m.cols = d;
    m.values.assign(d * d, kNaN);
    m.flagged.assign(d * d, 0);
    for (size_t i = 0; i < d; ++i) {
        for (size_t j = i; j < d; ++j) {
            const auto r = pearson(columns[i], columns[j]);
            const double v = r ? (i == j ? 1.0 : *r) : kNaN;
            m.values[i * d + j] = m.values[j * d + i] = v;
            m.flagged[i * d + j] = m.flagged[j * d + i] = r ? 0 : 1;
        }
    }
    return m;
}

CorrelationMatrix cross_correlation(const std::vector<std::vector<double>>& a,
                                    const std::vector<std::vector<double>>& b) {
    CorrelationMatrix m;
    m.rows = a.size();
    m.cols = b.size();
    m.values.assign(m.rows * m.cols, kNaN);
    m.flagged.assign(m.rows * m.cols, 0);
    for (size_t i = 0; i < m.rows; ++i)
        for (size_t j = 0; j < m.cols; ++j) {
            const auto r = pearson(a[i], b[j]);
            m.values[i * m.cols + j] = r.value_or(kNaN);
            m.flagged[i * m.cols + j] = r ? 0 : 1;
        }
    return m;
}

std::vector<std::vector<double>> latent_columns(const std::vector<LatentCode>& codes) {
    if (codes.empty()) throw DataError("latent analysis: no samples");
    const size_t d = codes.front().mu.size();
    std::vector<std::vector<double>> cols(d, std::vector<double>(codes.size()));
    for (size_t s = 0; s < codes.size(); ++s)
        for (size_t k = 0; k < d; ++k) cols[k][s] = codes[s].mu[k];
    return cols;
}

std::vector<std::vector<double>> wrench_columns(const std::vector<Wrench>& w) {
    std::vector<std::vector<double>> cols;
    for (size_t a = 0; a < kWrenchDim; ++a) cols.push_back(axis(w, a));
    return cols;
}

CorrelationMatrix latent_correlation(const SvaeModel& model, const std::vector<TactileImage>& images, int threads) {
    if (images.empty()) throw DataError("latent_correlation: empty split");
    return correlation_matrix(latent_columns(evaluate(model, images, threads).codes));
}

CorrelationMatrix latent_wrench_correlation(const SvaeModel& model, const LabeledSet& set, int threads) {
    if (set.size() == 0) throw DataError("latent_wrench_correlation: empty split");
    return cross_correlation(latent_columns(evaluate(model, set.images, threads).codes), wrench_columns(set.wrenches));
}

// ---------------------------------------------------------------- traversal

std::vector<double> traversal_values(double lo, double hi, int steps) {
    if (steps < 2) throw ConfigError("traversal: need at least 2 steps");
    if (!(lo < hi)) throw ConfigError("traversal: empty range");
    std::vector<double> v(static_cast<size_t>(steps));
    for (int i = 0; i < steps; ++i) v[i] = lo + (hi - lo) * i / (steps - 1);
    return v;
}

std::vector<std::vector<TactileImage>> latent_traversal(const SvaeModel& model, const std::vector<int>& dims,
                                                        double lo, double hi, int steps) {
    const auto values = traversal_values(lo, hi, steps);
    const int d = model.latent_dim();
    for (int k : dims)
        if (k < 0 || k >= d)
            throw ConfigError("traversal: latent index " + std::to_string(k) + " outside [0, " + std::to_string(d) + ")");
    std::vector<std::vector<TactileImage>> grid;
    for (int k : dims) {
        std::vector<TactileImage> row;
        for (double v : values) {
            std::vector<float> z(static_cast<size_t>(d), 0.0f);
            z[static_cast<size_t>(k)] = static_cast<float>(v);
            row.push_back(model.decode_image(z));
        }
        grid.push_back(std::move(row));
    }
    return grid;
}

// ---------------------------------------------------------------- domain shift

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw ShapeError("cosine_similarity: length mismatch");
    double ab = 0, aa = 0, bb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        ab += double(a[i]) * b[i];
        aa += double(a[i]) * a[i];
        bb += double(b[i]) * b[i];
    }
    if (aa == 0.0 || bb == 0.0) return aa == bb ? 1.0 : 0.0;
    return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

DomainShiftReport domain_shift_report(const SvaeModel& model, const std::vector<TactileImage>& land,
                                      const std::vector<TactileImage>& water, const std::vector<Wrench>& wrenches,
                                      int threads) {
    if (land.empty()) throw DataError("domain_shift_report: no pairs");
    if (land.size() != water.size() || land.size() != wrenches.size())
        throw DataError("domain_shift_report: " + std::to_string(land.size()) + " land, " +
                        std::to_string(water.size()) + " water and " + std::to_string(wrenches.size()) +
                        " labels do not pair up");
    const Evaluation el = evaluate(model, land, threads);
    const Evaluation ew = evaluate(model, water, threads);
    DomainShiftReport r;
    const size_t d = static_cast<size_t>(model.latent_dim());
    r.mean_abs_latent_diff.assign(d, 0.0);
    double sum = 0;
    for (size_t i = 0; i < land.size(); ++i) {
        const double c = cosine_similarity(el.codes[i].mu, ew.codes[i].mu);
        r.cosine.push_back(c);
        sum += c;
        for (size_t k = 0; k < d; ++k) r.mean_abs_latent_diff[k] += std::abs(el.codes[i].mu[k] - ew.codes[i].mu[k]);
    }
    const double n = static_cast<double>(land.size());
    r.mean_cosine = sum / n;
    for (double& v : r.mean_abs_latent_diff) v /= n;
    r.land = metrics_report(el.predictions, wrenches, el.recon_mse);
    r.water = metrics_report(ew.predictions, wrenches, ew.recon_mse);
    return r;
}

// ---------------------------------------------------------------- sweeps

namespace {

void check_sets(const SweepSets& s) {
    if (!s.train || !s.validation || !s.test) throw ConfigError("sweep: train, validation and test sets required");
    if (s.test->size() == 0) throw DataError("sweep: empty test split");
}

struct Cell {
    std::string label;
    LossConfig loss;
    SVAEArchitecture arch;
    double alpha = 0;
};

std::vector<SweepRow> run_cells(const std::vector<Cell>& cells, const SweepSets& sets, const TrainHyper& hyper,
                                int threads) {
    std::vector<SweepRow> rows(cells.size());
    parallel_for(cells.size(), threads, [&](size_t i) {
        const Cell& c = cells[i];
        Checkpoint ck = train(*sets.train, *sets.validation, c.arch, c.loss, hyper);
        SvaeModel model(std::move(ck));
        rows[i] = {c.label, c.loss.mode, c.alpha, c.arch.latent_dim, evaluate_set(model, *sets.test)};
    });
    return rows;
}

} // namespace

std::vector<SweepRow> alpha_sweep(const std::vector<double>& alphas, const SweepSets& sets,
                                  const SVAEArchitecture& arch, double beta, const TrainHyper& hyper, bool baselines,
                                  int threads) {
    if (alphas.size() < 2) throw ConfigError("alpha sweep: need at least 2 alphas");
    check_sets(sets);
    std::vector<Cell> cells;
    for (double a : alphas) {
        LossConfig l{a, beta, LossMode::Supervised};
        l.validate();
        char buf[48];
        std::snprintf(buf, sizeof buf, "svae alpha=%g", a);
        cells.push_back({buf, l, arch, a});
    }
    if (baselines) {
        cells.push_back({"convnet", {0.0, 0.0, LossMode::PredictionOnly}, arch, 0.0});
        cells.push_back({"vae", {1.0, beta, LossMode::ReconstructionOnly}, arch, kNaN});
    }
    return run_cells(cells, sets, hyper, threads);
}

std::vector<SweepRow> latent_dim_sweep(const std::vector<int>& dims, const SweepSets& sets,
                                       const SVAEArchitecture& arch, double alpha, double beta,
                                       const TrainHyper& hyper, int threads) {
    if (dims.size() < 2) throw ConfigError("latent-dim sweep: need at least 2 latent sizes");
    check_sets(sets);
    LossConfig l{alpha, beta, LossMode::Supervised};
    l.validate();
    std::vector<Cell> cells;
    for (int d : dims) {
        SVAEArchitecture a = arch;
        a.latent_dim = d;
        a.validate();
        cells.push_back({"latent=" + std::to_string(d), l, a, alpha});
    }
    return run_cells(cells, sets, hyper, threads);
}

// ---------------------------------------------------------------- output

json to_json(const MetricsReport& r) {
    json per_axis = json::object();
    for (size_t a = 0; a < kWrenchDim; ++a)
        per_axis[kWrenchAxes[a]] = {{"r2", number_or_null(r.r2[a])}, {"mse", number_or_null(r.mse[a])}};
    return {{"axes", per_axis},
            {"mean_r2", number_or_null(r.mean_r2)},
            {"recon_mse", number_or_null(r.recon_mse)},
            {"count", r.count}};
}

json to_json(const std::vector<BinStats>& bins) {
    json out = json::array();
    for (const auto& b : bins)
        out.push_back({{"lower", b.lower},
                       {"upper", b.upper},
                       {"error_mean", b.error_mean},
                       {"error_std", b.error_std},
                       {"count", b.count}});
    return out;
}

json to_json(const CorrelationMatrix& m) {
    json rows = json::array();
    for (size_t i = 0; i < m.rows; ++i) {
        json row = json::array();
        for (size_t j = 0; j < m.cols; ++j) row.push_back(number_or_null(m.at(i, j)));
        rows.push_back(row);
    }
    json flagged = json::array();
    for (size_t i = 0; i < m.rows; ++i)
        for (size_t j = 0; j < m.cols; ++j)
            if (m.is_flagged(i, j)) flagged.push_back({i, j});
    return {{"rows", m.rows}, {"cols", m.cols}, {"values", rows}, {"flagged", flagged}};
}

json to_json(const DomainShiftReport& r) {
    return {{"pairs", r.cosine.size()},
            {"mean_cosine", r.mean_cosine},
            {"cosine", r.cosine},
            {"mean_abs_latent_diff", r.mean_abs_latent_diff},
            {"land", to_json(r.land)},
            {"water", to_json(r.water)}};
}

json to_json(const std::vector<SweepRow>& rows) {
    json out = json::array();
    for (const auto& r : rows)
        out.push_back({{"label", r.label},
                       {"mode", to_string(r.mode)},
                       {"alpha", number_or_null(r.alpha)},
                       {"latent_dim", r.latent_dim},
                       {"test", to_json(r.test)}});
    return out;
}

std::string metrics_csv(const MetricsReport& r) {
    std::ostringstream os;
    os << "metric,axis,value\n";
    for (size_t a = 0; a < kWrenchDim; ++a) os << "r2," << kWrenchAxes[a] << ',' << csv_num(r.r2[a]) << '\n';
    for (size_t a = 0; a < kWrenchDim; ++a) os << "mse," << kWrenchAxes[a] << ',' << csv_num(r.mse[a]) << '\n';
    os << "mean_r2,," << csv_num(r.mean_r2) << '\n';
    os << "recon_mse,," << csv_num(r.recon_mse) << '\n';
    os << "count,," << r.count << '\n';
    return os.str();
}

std::string histogram_csv(const std::vector<std::pair<std::string, std::vector<BinStats>>>& per_axis) {
    std::ostringstream os;
    os << "axis,lower,upper,error_mean,error_std,count\n";
    for (const auto& [name, bins] : per_axis)
        for (const auto& b : bins)
            os << name << ',' << csv_num(b.lower) << ',' << csv_num(b.upper) << ',' << csv_num(b.error_mean) << ','
               << csv_num(b.error_std) << ',' << b.count << '\n';
    return os.str();
}

std::string correlation_csv(const CorrelationMatrix& m) {
    std::ostringstream os;
    os << "row,col,value,flagged\n";
    for (size_t i = 0; i < m.rows; ++i)
        for (size_t j = 0; j < m.cols; ++j)
            os << i << ',' << j << ',' << csv_num(m.at(i, j)) << ',' << (m.is_flagged(i, j) ? 1 : 0) << '\n';
    return os.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "label,mode,alpha,latent_dim,recon_mse,mean_r2";
    for (const char* a : kWrenchAxes) os << ",r2_" << a;
    os << '\n';
    for (const auto& r : rows) {
        os << r.label << ',' << to_string(r.mode) << ',' << csv_num(r.alpha) << ',' << r.latent_dim << ','
           << csv_num(r.test.recon_mse) << ',' << csv_num(r.test.mean_r2);
        for (double v : r.test.r2) os << ',' << csv_num(v);
        os << '\n';
    }
    return os.str();
}

} // namespace tactile
