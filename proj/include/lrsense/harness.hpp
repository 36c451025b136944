#pragma once

#include "lrsense/diagnostics.hpp"
#include "lrsense/tuning.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lrsense {

/// Invalid experiment configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Experiment { param_sweep, ensemble_compare, phase_transition, injectivity };

std::string_view to_string(Experiment e);
std::optional<Experiment> parse_experiment(std::string_view name);

struct ExperimentConfig {
    Experiment experiment = Experiment::param_sweep;

    // Signal class and measurements
    int n1 = 20;
    int n2 = 300;
    int rank = 1;
    double s1 = 20.0;
    double s2 = 20.0;
    double gamma = 1.0;
    double dense_fraction = 0.1;
    double init_error = 0.6;
    std::vector<Ensemble> ensembles{Ensemble::gaussian};
    std::vector<int> m_grid{160};
    double noise_rel = 0.05;

    // Runs
    int trials = 20;
    std::uint64_t seed = 1;
    int jobs = 1;
    SolverKind solver = SolverKind::am;
    MetricKind tuning = MetricKind::oracle_error;
    SolveConfig solve;
    std::optional<double> success_threshold;
    bool timing = false;  // adds a wall_ms column; output is then no longer reproducible byte-for-byte
    std::string out;

    // param-sweep: mu_k = mu0 * 2^-k, k < mu_steps; mu0 <= 0 picks the largest zero-forcing value
    double mu0 = 0.0;
    int mu_steps = 14;

    // ensemble-compare: square problem used for rank-1 measurements
    int rank1_n1 = 50;
    int rank1_n2 = 50;
    double rank1_s = 10.0;
    std::vector<int> rank1_m_grid{50, 100, 150, 200, 300};

    // phase-transition: s/n2 in (0, s_frac_max], m/(n1 n2) in [m_frac_min, m_frac_max]
    int grid_s = 4;
    int grid_m = 4;
    double s_frac_max = 0.3;
    double m_frac_min = 0.05;
    double m_frac_max = 0.3;

    // injectivity
    int samples = 200;
    std::string pairs_out;

    /// Throws ConfigError.
    void validate() const;
};

/// Paper-scale defaults for each experiment.
ExperimentConfig default_config(Experiment e);

/// Applies one "key = value" setting; throws ConfigError on unknown keys or bad values.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);
/// Reads a flat key=value file ('#' starts a comment).
void apply_config_file(ExperimentConfig& cfg, const std::string& path);

/// FNV-1a digest of every setting that influences results, as 16 hex digits.
std::string config_digest(const ExperimentConfig& cfg);

struct TrialRecord {
    std::uint64_t seed = 0;
    std::string config_digest;
    double relative_error = 0.0;
    double misfit = 0.0;
    double eta_norm = 0.0;
    double effective_sparsity = 0.0;  // of V, per rank
    double hard_sparsity = 0.0;       // of V
    int outer_iters = 0;
    double wall_ms = 0.0;
    bool thresholded = false;  // a success threshold was configured
    bool success = false;
};

/// One recovery problem instance: truth, operator, noisy data and perturbed start.
struct Problem {
    Factorization truth;
    Matrix truth_product;
    MeasurementOperator op;
    NoisySample sample;
    Factorization init;
};

Problem make_problem(const SignalClassSpec& spec, Ensemble ensemble, int m, double noise_rel,
                     double dense_fraction, double init_error, std::uint64_t seed);

TrialRecord make_record(const Problem& problem, const SolveResult& result, std::uint64_t seed,
                        const std::string& digest, std::optional<double> threshold, double wall_ms);

struct ParamSweepRow {
    ParamMode mode = ParamMode::equal;
    int mu_index = 0;
    double mu = 0.0;
    int trial = 0;
    TrialRecord record;
};

struct EnsembleCompareRow {
    Ensemble ensemble = Ensemble::gaussian;
    int m = 0;
    int trial = 0;
    SolverKind solver = SolverKind::am;
    double best_mu = 0.0;
    TrialRecord record;
};

struct PhaseCell {
    MetricKind tuning = MetricKind::oracle_error;
    double s_frac = 0.0;
    double m_frac = 0.0;
    double s = 0.0;
    int m = 0;
    int trials = 0;
    int successes = 0;
    double median_relative_error = 0.0;
    std::vector<TrialRecord> records;
};

struct InjectivityRow {
    Ensemble ensemble = Ensemble::gaussian;
    int m = 0;
    std::uint64_t seed = 0;
    int samples = 0;
    double median_deviation = 0.0;
    double max_deviation = 0.0;
    Envelope envelope;
    std::vector<EnergyPair> pairs;
};

std::vector<ParamSweepRow> run_param_sweep(const ExperimentConfig& cfg);
std::vector<EnsembleCompareRow> run_ensemble_compare(const ExperimentConfig& cfg);
std::vector<PhaseCell> run_phase_transition(const ExperimentConfig& cfg);
std::vector<InjectivityRow> run_injectivity(const ExperimentConfig& cfg);

std::string to_csv(const std::vector<ParamSweepRow>& rows, bool timing);
std::string to_csv(const std::vector<EnsembleCompareRow>& rows, bool timing);
std::string to_csv(const std::vector<PhaseCell>& cells);
std::string to_csv(const std::vector<InjectivityRow>& rows);
std::string pairs_csv(const std::vector<InjectivityRow>& rows);

/// Runs the configured experiment and returns its CSV table.
std::string run_experiment_csv(const ExperimentConfig& cfg);

/// Writes the table to cfg.out.
void write_output(const ExperimentConfig& cfg, const std::string& csv);

/// Runs task(i) for i in [0, n) on `jobs` worker threads; rethrows the first failure.
void parallel_for(int n, int jobs, const std::function<void(int)>& task);

/// The phase-transition grid coordinates.
std::vector<double> s_fraction_grid(const ExperimentConfig& cfg);
std::vector<double> m_fraction_grid(const ExperimentConfig& cfg);

}  // namespace lrsense
