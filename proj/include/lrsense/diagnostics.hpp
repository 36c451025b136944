#pragma once

#include "lrsense/measure.hpp"
#include "lrsense/model.hpp"

#include <span>
#include <vector>

namespace lrsense {

/// One probe signal: x = ||Z||_F^2, y = ||A(Z)||_2^2.
struct EnergyPair {
    double signal = 0.0;
    double measured = 0.0;
    [[nodiscard]] double deviation() const;
};

struct InjectivityScan {
    double delta_hat = 0.0;         // max |y - x|
    double median_deviation = 0.0;  // median |y - x|
    std::vector<EnergyPair> pairs;
};

/// Energies of the given signals under op.
InjectivityScan scan_signals(const MeasurementOperator& op, std::span<const Matrix> signals);

/// Probes op with products of ground-truth draws at `spec`; odd-numbered samples are
/// differences Z - Z' of two independent draws.
InjectivityScan injectivity_scan(const MeasurementOperator& op, const SignalClassSpec& spec, int n_samples,
                                 Rng& rng, double dense_fraction = 0.1);

struct Envelope {
    double gamma = 1.0;
    double delta = 0.0;
};

/// Lower envelope y >= gamma * x - delta over a 100-point gamma grid on (0, 1].
/// For each grid gamma, delta is the smallest value keeping every pair above the line;
/// the chosen grid point gives the tightest envelope at the mean signal energy
/// (largest gamma * mean(x) - delta), ties going to the larger gamma.
Envelope fit_lower_envelope(std::span<const EnergyPair> pairs);

/// Zero for an empty list.
double median(std::vector<double> values);

}  // namespace lrsense
