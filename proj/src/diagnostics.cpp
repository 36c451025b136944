#include "lrsense/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lrsense {

double EnergyPair::deviation() const { return std::abs(measured - signal); }

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

namespace {

InjectivityScan summarize(std::vector<EnergyPair> pairs) {
    InjectivityScan scan;
    std::vector<double> deviations;
    deviations.reserve(pairs.size());
    for (const EnergyPair& p : pairs) {
        deviations.push_back(p.deviation());
        scan.delta_hat = std::max(scan.delta_hat, p.deviation());
    }
    scan.median_deviation = median(std::move(deviations));
    scan.pairs = std::move(pairs);
    return scan;
}

}  // namespace

InjectivityScan scan_signals(const MeasurementOperator& op, std::span<const Matrix> signals) {
    std::vector<EnergyPair> pairs;
    pairs.reserve(signals.size());
    for (const Matrix& z : signals) pairs.push_back({z.squaredNorm(), op.forward(z).squaredNorm()});
    return summarize(std::move(pairs));
}

InjectivityScan injectivity_scan(const MeasurementOperator& op, const SignalClassSpec& spec, int n_samples,
                                 Rng& rng, double dense_fraction) {
    if (n_samples < 1) throw std::invalid_argument("injectivity_scan: n_samples must be >= 1");
    if (spec.n1 != op.n1() || spec.n2 != op.n2())
        throw std::invalid_argument("injectivity_scan: spec dimensions do not match the operator");
    std::vector<EnergyPair> pairs;
    pairs.reserve(static_cast<std::size_t>(n_samples));
    for (int k = 0; k < n_samples; ++k) {
        Matrix z = sample_ground_truth(spec, dense_fraction, rng).product();
        if (k % 2 == 1) z -= sample_ground_truth(spec, dense_fraction, rng).product();
        pairs.push_back({z.squaredNorm(), op.forward(z).squaredNorm()});
    }
    return summarize(std::move(pairs));
}

Envelope fit_lower_envelope(std::span<const EnergyPair> pairs) {
    if (pairs.size() < 2) throw std::invalid_argument("fit_lower_envelope: need at least two pairs");
    const bool all_zero = std::all_of(pairs.begin(), pairs.end(),
                                      [](const EnergyPair& p) { return p.signal == 0.0 && p.measured == 0.0; });
    if (all_zero) return {1.0, 0.0};

    double mean_signal = 0.0;
    for (const EnergyPair& p : pairs) mean_signal += p.signal;
    mean_signal /= static_cast<double>(pairs.size());

    constexpr int grid = 100;
    Envelope best{};
    double best_score = -std::numeric_limits<double>::infinity();
    for (int j = grid; j >= 1; --j) {
        const double gamma = static_cast<double>(j) / grid;
        double delta = 0.0;
        for (const EnergyPair& p : pairs) delta = std::max(delta, gamma * p.signal - p.measured);
        // Nudge upward until the inequality holds exactly in floating point.
        for (const EnergyPair& p : pairs)
            while (p.measured < gamma * p.signal - delta)
                delta = std::nextafter(delta, std::numeric_limits<double>::infinity());
        const double score = gamma * mean_signal - delta;
        if (score > best_score) {
            best_score = score;
            best = {gamma, delta};
        }
    }
    return best;
}

}  // namespace lrsense
