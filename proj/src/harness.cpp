#include "lrsense/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace lrsense {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view value) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= value.size()) {
        const auto comma = value.find(',', start);
        const auto end = comma == std::string_view::npos ? value.size() : comma;
        auto item = trim(value.substr(start, end - start));
        if (!item.empty()) out.push_back(std::move(item));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

template <class T>
T parse_number(std::string_view key, std::string_view raw) {
    const auto text = trim(raw);
    T v{};
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (text.empty() || ec != std::errc() || ptr != last)
        throw ConfigError("invalid value '" + text + "' for " + std::string(key));
    return v;
}

bool parse_bool(std::string_view key, std::string_view raw) {
    const auto text = trim(raw);
    if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
    if (text == "0" || text == "false" || text == "no" || text == "off") return false;
    throw ConfigError("invalid boolean '" + text + "' for " + std::string(key));
}

std::vector<int> parse_int_list(std::string_view key, std::string_view raw) {
    std::vector<int> out;
    for (const auto& item : split_list(raw)) out.push_back(parse_number<int>(key, item));
    return out;
}

std::vector<Ensemble> parse_ensemble_list(std::string_view key, std::string_view raw) {
    std::vector<Ensemble> out;
    for (const auto& item : split_list(raw)) {
        const auto e = parse_ensemble(item);
        if (!e || *e == Ensemble::custom) throw ConfigError("unknown ensemble '" + item + "' in " + std::string(key));
        out.push_back(*e);
    }
    return out;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

SignalClassSpec base_spec(const ExperimentConfig& cfg) {
    return SignalClassSpec{cfg.n1, cfg.n2, cfg.rank, cfg.s1, cfg.s2, cfg.gamma};
}

std::string record_header(bool timing) {
    std::string h = "seed,config_digest,relative_error,misfit,eta_norm,effective_sparsity,hard_sparsity,outer_iters";
    if (timing) h += ",wall_ms";
    return h + ",success";
}

std::string record_fields(const TrialRecord& r, bool timing) {
    std::string s = std::to_string(r.seed) + ',' + r.config_digest + ',' + num(r.relative_error) + ',' +
                    num(r.misfit) + ',' + num(r.eta_norm) + ',' + num(r.effective_sparsity) + ',' +
                    num(r.hard_sparsity) + ',' + std::to_string(r.outer_iters);
    if (timing) s += ',' + num(r.wall_ms);
    s += ',';
    s += r.thresholded ? (r.success ? "1" : "0") : "NA";
    return s;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << content;
    if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace

std::string_view to_string(Experiment e) {
    switch (e) {
        case Experiment::param_sweep: return "param-sweep";
        case Experiment::ensemble_compare: return "ensemble-compare";
        case Experiment::phase_transition: return "phase-transition";
        case Experiment::injectivity: return "injectivity";
    }
    return "param-sweep";
}

std::optional<Experiment> parse_experiment(std::string_view name) {
    for (auto e : {Experiment::param_sweep, Experiment::ensemble_compare, Experiment::phase_transition,
                   Experiment::injectivity}) {
        auto canonical = std::string(to_string(e));
        auto underscored = canonical;
        std::replace(underscored.begin(), underscored.end(), '-', '_');
        if (name == canonical || name == underscored) return e;
    }
    return std::nullopt;
}

void ExperimentConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(what);
    };
    require(n1 >= 1 && n2 >= 1, "dimensions must be positive");
    require(rank >= 1 && rank <= std::min(n1, n2), "rank must lie in [1, min(n1, n2)]");
    require(s1 > 0.0 && s2 > 0.0, "sparsity levels must be positive");
    require(gamma > 0.0, "gamma must be positive");
    require(dense_fraction >= 0.0, "dense_fraction must be non-negative");
    require(init_error > 0.0, "init_error must be positive");
    require(noise_rel >= 0.0, "noise_rel must be non-negative");
    require(trials >= 1, "trials must be at least 1");
    require(jobs >= 0, "jobs must be non-negative");
    require(!ensembles.empty(), "ensemble list is empty");
    require(!m_grid.empty(), "m grid is empty");
    for (int m : m_grid) require(m >= 1, "m values must be positive");
    require(!success_threshold || *success_threshold >= 0.0, "success threshold must be non-negative");
    try {
        solve.validate();
        base_spec(*this).validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    switch (experiment) {
        case Experiment::param_sweep:
            require(solver != SolverKind::baseline, "param-sweep needs a regularized solver (am or palm)");
            require(mu_steps >= 1, "mu_steps must be at least 1");
            require(ensembles.size() == 1 && m_grid.size() == 1, "param-sweep takes one ensemble and one m");
            break;
        case Experiment::ensemble_compare:
            for (auto e : ensembles) {
                if (e == Ensemble::rank1) {
                    require(rank1_n1 == rank1_n2, "rank-1 measurements need square matrices");
                    require(rank1_n1 >= 1 && rank1_s > 0.0, "invalid rank-1 problem size");
                    require(!rank1_m_grid.empty(), "rank-1 m grid is empty");
                    for (int m : rank1_m_grid) require(m >= 1, "m values must be positive");
                }
                if (e == Ensemble::identity) require(false, "ensemble-compare does not take the identity ensemble");
            }
            break;
        case Experiment::phase_transition:
            require(success_threshold.has_value(), "phase-transition needs success_threshold");
            require(grid_s >= 1 && grid_m >= 1, "phase-transition grid must be non-empty");
            require(s_frac_max > 0.0 && s_frac_max <= 1.0, "s_frac_max must lie in (0, 1]");
            require(m_frac_min > 0.0 && m_frac_min <= m_frac_max, "need 0 < m_frac_min <= m_frac_max");
            require(ensembles.size() == 1 && ensembles.front() != Ensemble::identity,
                    "phase-transition takes one random ensemble");
            break;
        case Experiment::injectivity:
            require(samples >= 2, "injectivity needs at least 2 samples");
            for (auto e : ensembles)
                if (e == Ensemble::rank1) require(n1 == n2, "rank-1 measurements need square matrices");
            break;
    }
}

ExperimentConfig default_config(Experiment e) {
    ExperimentConfig cfg;
    cfg.experiment = e;
    switch (e) {
        case Experiment::param_sweep:
            break;
        case Experiment::ensemble_compare:
            cfg.ensembles = {Ensemble::gaussian, Ensemble::lognormal, Ensemble::rank1};
            cfg.m_grid = {100, 150, 200, 300, 400};
            cfg.noise_rel = 0.1;
            break;
        case Experiment::phase_transition:
            cfg.n1 = 16;
            cfg.n2 = 100;
            cfg.rank = 3;
            cfg.s1 = 16.0;
            cfg.s2 = 10.0;
            cfg.noise_rel = 0.2;
            cfg.trials = 5;
            cfg.success_threshold = 0.4;
            break;
        case Experiment::injectivity:
            cfg.n1 = 16;
            cfg.n2 = 16;
            cfg.s1 = 4.0;
            cfg.s2 = 4.0;
            cfg.ensembles = {Ensemble::gaussian, Ensemble::identity};
            cfg.m_grid = {256, 1024, 4096};
            break;
    }
    return cfg;
}

void apply_setting(ExperimentConfig& cfg, std::string_view key_raw, std::string_view value) {
    const std::string key = trim(key_raw);
    if (key == "experiment") {
        const auto e = parse_experiment(trim(value));
        if (!e) throw ConfigError("unknown experiment '" + trim(value) + "'");
        cfg.experiment = *e;
    } else if (key == "n1") cfg.n1 = parse_number<int>(key, value);
    else if (key == "n2") cfg.n2 = parse_number<int>(key, value);
    else if (key == "rank" || key == "R") cfg.rank = parse_number<int>(key, value);
    else if (key == "s1") cfg.s1 = parse_number<double>(key, value);
    else if (key == "s2") cfg.s2 = parse_number<double>(key, value);
    else if (key == "s") cfg.s1 = cfg.s2 = parse_number<double>(key, value);
    else if (key == "gamma") cfg.gamma = parse_number<double>(key, value);
    else if (key == "dense_fraction") cfg.dense_fraction = parse_number<double>(key, value);
    else if (key == "init_error") cfg.init_error = parse_number<double>(key, value);
    else if (key == "ensemble" || key == "ensembles") cfg.ensembles = parse_ensemble_list(key, value);
    else if (key == "m" || key == "m_grid") cfg.m_grid = parse_int_list(key, value);
    else if (key == "noise_rel") cfg.noise_rel = parse_number<double>(key, value);
    else if (key == "trials") cfg.trials = parse_number<int>(key, value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "jobs") cfg.jobs = parse_number<int>(key, value);
    else if (key == "solver") {
        const auto s = parse_solver(trim(value));
        if (!s) throw ConfigError("unknown solver '" + trim(value) + "'");
        cfg.solver = *s;
    } else if (key == "tuning") {
        const auto t = parse_metric(trim(value));
        if (!t) throw ConfigError("unknown tuning mode '" + trim(value) + "'");
        cfg.tuning = *t;
    } else if (key == "max_outer_iters") cfg.solve.max_outer_iters = parse_number<int>(key, value);
    else if (key == "outer_tol") cfg.solve.outer_tol = parse_number<double>(key, value);
    else if (key == "inner_max_iters") cfg.solve.inner_max_iters = parse_number<int>(key, value);
    else if (key == "inner_tol") cfg.solve.inner_tol = parse_number<double>(key, value);
    else if (key == "success_threshold") {
        const auto text = trim(value);
        if (text.empty() || text == "none") cfg.success_threshold.reset();
        else cfg.success_threshold = parse_number<double>(key, text);
    } else if (key == "timing") cfg.timing = parse_bool(key, value);
    else if (key == "out") cfg.out = trim(value);
    else if (key == "mu0") cfg.mu0 = parse_number<double>(key, value);
    else if (key == "mu_steps") cfg.mu_steps = parse_number<int>(key, value);
    else if (key == "rank1_n1") cfg.rank1_n1 = parse_number<int>(key, value);
    else if (key == "rank1_n2") cfg.rank1_n2 = parse_number<int>(key, value);
    else if (key == "rank1_s") cfg.rank1_s = parse_number<double>(key, value);
    else if (key == "rank1_m_grid") cfg.rank1_m_grid = parse_int_list(key, value);
    else if (key == "grid_s") cfg.grid_s = parse_number<int>(key, value);
    else if (key == "grid_m") cfg.grid_m = parse_number<int>(key, value);
    else if (key == "s_frac_max") cfg.s_frac_max = parse_number<double>(key, value);
    else if (key == "m_frac_min") cfg.m_frac_min = parse_number<double>(key, value);
    else if (key == "m_frac_max") cfg.m_frac_max = parse_number<double>(key, value);
    else if (key == "samples") cfg.samples = parse_number<int>(key, value);
    else if (key == "pairs_out") cfg.pairs_out = trim(value);
    else throw ConfigError("unknown setting '" + key + "'");
}

void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        apply_setting(cfg, std::string_view(line).substr(0, eq), std::string_view(line).substr(eq + 1));
    }
}

std::string config_digest(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << to_string(cfg.experiment) << '|' << cfg.n1 << '|' << cfg.n2 << '|' << cfg.rank << '|' << num(cfg.s1)
       << '|' << num(cfg.s2) << '|' << num(cfg.gamma) << '|' << num(cfg.dense_fraction) << '|'
       << num(cfg.init_error) << '|';
    for (auto e : cfg.ensembles) os << to_string(e) << ',';
    os << '|';
    for (int m : cfg.m_grid) os << m << ',';
    os << '|' << num(cfg.noise_rel) << '|' << cfg.trials << '|' << cfg.seed << '|' << to_string(cfg.solver) << '|'
       << to_string(cfg.tuning) << '|' << cfg.solve.max_outer_iters << '|' << num(cfg.solve.outer_tol) << '|'
       << cfg.solve.inner_max_iters << '|' << num(cfg.solve.inner_tol) << '|'
       << (cfg.success_threshold ? num(*cfg.success_threshold) : "none") << '|' << num(cfg.mu0) << '|'
       << cfg.mu_steps << '|' << cfg.rank1_n1 << '|' << cfg.rank1_n2 << '|' << num(cfg.rank1_s) << '|';
    for (int m : cfg.rank1_m_grid) os << m << ',';
    os << '|' << cfg.grid_s << '|' << cfg.grid_m << '|' << num(cfg.s_frac_max) << '|' << num(cfg.m_frac_min) << '|'
       << num(cfg.m_frac_max) << '|' << cfg.samples;

    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : os.str()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Problem make_problem(const SignalClassSpec& spec, Ensemble ensemble, int m, double noise_rel,
                     double dense_fraction, double init_error, std::uint64_t seed) {
    Rng rng(seed);
    Factorization truth = sample_ground_truth(spec, dense_fraction, rng);
    Matrix x = truth.product();
    MeasurementOperator op = make_operator(ensemble, spec.n1, spec.n2, m, rng, seed);
    NoisySample sample = add_noise(op.forward(x), noise_rel, x.norm(), rng);
    Factorization init = perturb_initialization(truth, init_error, rng);
    return Problem{std::move(truth), std::move(x), std::move(op), std::move(sample), std::move(init)};
}

TrialRecord make_record(const Problem& problem, const SolveResult& result, std::uint64_t seed,
                        const std::string& digest, std::optional<double> threshold, double wall_ms) {
    TrialRecord r;
    r.seed = seed;
    r.config_digest = digest;
    r.relative_error = relative_error(problem.truth_product, result.final.product());
    r.misfit = result.misfit;
    r.eta_norm = problem.sample.eta_norm;
    r.effective_sparsity = effective_sparsity(result.final.V, result.final.rank());
    r.hard_sparsity = hard_sparsity(result.final.V, result.final.rank());
    r.outer_iters = result.outer_iters;
    r.wall_ms = wall_ms;
    r.thresholded = threshold.has_value();
    r.success = threshold && r.relative_error <= *threshold;
    return r;
}

void parallel_for(int n, int jobs, const std::function<void(int)>& task) {
    if (n <= 0) return;
    if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    jobs = std::min(jobs, n);
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (int i = next++; i < n && !failed; i = next++) {
            try {
                task(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed = true;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// param-sweep

std::vector<ParamSweepRow> run_param_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.experiment != Experiment::param_sweep) throw ConfigError("run_param_sweep: wrong experiment");
    const auto spec = base_spec(cfg);
    const auto digest = config_digest(cfg);
    const Ensemble ensemble = cfg.ensembles.front();
    const int m = cfg.m_grid.front();
    auto seed_of = [&](int t) { return derive_seed(cfg.seed, static_cast<std::uint64_t>(t)); };
    auto problem_of = [&](int t) {
        return make_problem(spec, ensemble, m, cfg.noise_rel, cfg.dense_fraction, cfg.init_error, seed_of(t));
    };

    // A common grid: the largest per-trial zero-forcing value unless mu0 is given.
    double mu0 = cfg.mu0;
    if (!(mu0 > 0.0)) {
        std::vector<double> starts(cfg.trials);
        parallel_for(cfg.trials, cfg.jobs, [&](int t) {
            const auto p = problem_of(t);
            starts[t] = default_mu0(p.sample.y, p.op, p.init);
        });
        mu0 = *std::max_element(starts.begin(), starts.end());
    }

    const ParamMode modes[] = {ParamMode::equal, ParamMode::theorem_locked};
    const double s_lock = std::max(cfg.s1, cfg.s2);
    const int steps = cfg.mu_steps;
    std::vector<ParamSweepRow> rows(2 * static_cast<std::size_t>(steps) * cfg.trials);

    parallel_for(2 * cfg.trials, cfg.jobs, [&](int task) {
        const int mode_index = task / cfg.trials;
        const int t = task % cfg.trials;
        const ParamPolicy policy{modes[mode_index], cfg.gamma, s_lock};
        const auto problem = problem_of(t);
        Factorization start = problem.init;
        for (int k = 0; k < steps; ++k) {
            const double mu = std::ldexp(mu0, -k);
            const auto t0 = std::chrono::steady_clock::now();
            auto result = run_solver(cfg.solver, problem.sample.y, problem.op, policy.at(mu), start, cfg.solve);
            const double wall = elapsed_ms(t0);
            auto& row = rows[(static_cast<std::size_t>(mode_index) * steps + k) * cfg.trials + t];
            row.mode = modes[mode_index];
            row.mu_index = k;
            row.mu = mu;
            row.trial = t;
            row.record = make_record(problem, result, seed_of(t), digest, cfg.success_threshold, wall);
            // Warm start along the grid, unless a rank-one term has died (it could never revive).
            start = result.final.has_dead_component() ? problem.init : std::move(result.final);
        }
    });
    return rows;
}

std::string to_csv(const std::vector<ParamSweepRow>& rows, bool timing) {
    std::string out = "mode,mu_index,mu,trial," + record_header(timing) + "\n";
    for (const auto& r : rows) {
        out += std::string(to_string(r.mode)) + ',' + std::to_string(r.mu_index) + ',' + num(r.mu) + ',' +
               std::to_string(r.trial) + ',' + record_fields(r.record, timing) + '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// ensemble-compare

std::vector<EnsembleCompareRow> run_ensemble_compare(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.experiment != Experiment::ensemble_compare) throw ConfigError("run_ensemble_compare: wrong experiment");
    const auto digest = config_digest(cfg);

    struct Cell {
        Ensemble ensemble;
        SignalClassSpec spec;
        int m;
        std::uint64_t stream;
    };
    std::vector<Cell> cells;
    for (std::size_t e = 0; e < cfg.ensembles.size(); ++e) {
        const Ensemble ens = cfg.ensembles[e];
        SignalClassSpec spec = base_spec(cfg);
        const std::vector<int>* grid = &cfg.m_grid;
        if (ens == Ensemble::rank1) {
            spec = SignalClassSpec{cfg.rank1_n1, cfg.rank1_n2, cfg.rank, cfg.rank1_s, cfg.rank1_s, cfg.gamma};
            grid = &cfg.rank1_m_grid;
        }
        for (std::size_t k = 0; k < grid->size(); ++k)
            cells.push_back({ens, spec, (*grid)[k], derive_seed(cfg.seed, (e << 16) | k)});
    }

    const bool tuned = cfg.solver != SolverKind::baseline;
    const int per_trial = tuned ? 2 : 1;
    const int n_tasks = static_cast<int>(cells.size()) * cfg.trials;
    std::vector<EnsembleCompareRow> rows(static_cast<std::size_t>(n_tasks) * per_trial);

    parallel_for(n_tasks, cfg.jobs, [&](int task) {
        const auto& cell = cells[task / cfg.trials];
        const int t = task % cfg.trials;
        const std::uint64_t seed = derive_seed(cell.stream, static_cast<std::uint64_t>(t));
        const auto problem =
            make_problem(cell.spec, cell.ensemble, cell.m, cfg.noise_rel, cfg.dense_fraction, cfg.init_error, seed);
        auto* slot = &rows[static_cast<std::size_t>(task) * per_trial];
        auto fill = [&](EnsembleCompareRow& row, SolverKind solver, double best_mu, const SolveResult& result,
                        double wall) {
            row.ensemble = cell.ensemble;
            row.m = cell.m;
            row.trial = t;
            row.solver = solver;
            row.best_mu = best_mu;
            row.record = make_record(problem, result, seed, digest, cfg.success_threshold, wall);
        };
        if (tuned) {
            const auto metric = cfg.tuning == MetricKind::oracle_error
                                    ? TuningMetric::oracle(problem.truth_product)
                                    : TuningMetric::discrepancy(problem.sample.eta_norm);
            const auto t0 = std::chrono::steady_clock::now();
            const auto tuning = tune_shrink(problem.sample.y, problem.op, problem.init, metric,
                                            default_mu0(problem.sample.y, problem.op, problem.init), cfg.solver,
                                            cfg.solve);
            fill(*slot++, cfg.solver, tuning.best_mu, tuning.best_result, elapsed_ms(t0));
        }
        const auto t0 = std::chrono::steady_clock::now();
        const auto base = altmin_sense_baseline(problem.sample.y, problem.op, problem.init, cfg.solve);
        fill(*slot, SolverKind::baseline, 0.0, base, elapsed_ms(t0));
    });
    return rows;
}

std::string to_csv(const std::vector<EnsembleCompareRow>& rows, bool timing) {
    std::string out = "ensemble,m,trial,solver,best_mu," + record_header(timing) + "\n";
    for (const auto& r : rows)
        out += std::string(to_string(r.ensemble)) + ',' + std::to_string(r.m) + ',' + std::to_string(r.trial) + ',' +
               std::string(to_string(r.solver)) + ',' + num(r.best_mu) + ',' + record_fields(r.record, timing) +
               '\n';
    return out;
}

// ---------------------------------------------------------------------------
// phase-transition

std::vector<double> s_fraction_grid(const ExperimentConfig& cfg) {
    std::vector<double> g(cfg.grid_s);
    for (int j = 0; j < cfg.grid_s; ++j) g[j] = cfg.s_frac_max * (j + 1) / cfg.grid_s;
    return g;
}

std::vector<double> m_fraction_grid(const ExperimentConfig& cfg) {
    std::vector<double> g(cfg.grid_m);
    for (int k = 0; k < cfg.grid_m; ++k)
        g[k] = cfg.grid_m == 1 ? cfg.m_frac_min
                               : cfg.m_frac_min + (cfg.m_frac_max - cfg.m_frac_min) * k / (cfg.grid_m - 1);
    return g;
}

std::vector<PhaseCell> run_phase_transition(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.experiment != Experiment::phase_transition) throw ConfigError("run_phase_transition: wrong experiment");
    const auto digest = config_digest(cfg);
    const auto s_grid = s_fraction_grid(cfg);
    const auto m_grid = m_fraction_grid(cfg);
    const MetricKind tunings[] = {MetricKind::oracle_error, MetricKind::discrepancy};
    const int n_cells = cfg.grid_s * cfg.grid_m;

    std::vector<PhaseCell> cells(2 * static_cast<std::size_t>(n_cells));
    for (int q = 0; q < 2; ++q)
        for (int j = 0; j < cfg.grid_s; ++j)
            for (int k = 0; k < cfg.grid_m; ++k) {
                auto& c = cells[static_cast<std::size_t>(q) * n_cells + j * cfg.grid_m + k];
                c.tuning = tunings[q];
                c.s_frac = s_grid[j];
                c.m_frac = m_grid[k];
                c.s = s_grid[j] * cfg.n2;
                c.m = std::max(1, static_cast<int>(std::lround(m_grid[k] * cfg.n1 * cfg.n2)));
                c.trials = cfg.trials;
                c.records.resize(cfg.trials);
            }

    parallel_for(n_cells * cfg.trials, cfg.jobs, [&](int task) {
        const int cell_index = task / cfg.trials;
        const int t = task % cfg.trials;
        const auto& proto = cells[cell_index];
        SignalClassSpec spec = base_spec(cfg);
        spec.s2 = proto.s;
        const std::uint64_t seed = derive_seed(derive_seed(cfg.seed, static_cast<std::uint64_t>(cell_index)),
                                               static_cast<std::uint64_t>(t));
        const auto problem = make_problem(spec, cfg.ensembles.front(), proto.m, cfg.noise_rel, cfg.dense_fraction,
                                          cfg.init_error, seed);
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<SolveResult> results;
        if (cfg.solver == SolverKind::baseline) {
            results.assign(2, altmin_sense_baseline(problem.sample.y, problem.op, problem.init, cfg.solve));
        } else {
            // One shared sweep serves both tunings.
            auto tuned = tune_shrink(problem.sample.y, problem.op, problem.init,
                                     {TuningMetric::oracle(problem.truth_product),
                                      TuningMetric::discrepancy(problem.sample.eta_norm)},
                                     default_mu0(problem.sample.y, problem.op, problem.init), cfg.solver, cfg.solve);
            for (auto& r : tuned) results.push_back(std::move(r.best_result));
        }
        const double wall = elapsed_ms(t0);
        for (int q = 0; q < 2; ++q)
            cells[static_cast<std::size_t>(q) * n_cells + cell_index].records[t] =
                make_record(problem, results[q], seed, digest, cfg.success_threshold, wall);
    });

    for (auto& c : cells) {
        std::vector<double> errors;
        for (const auto& r : c.records) {
            c.successes += r.success ? 1 : 0;
            errors.push_back(r.relative_error);
        }
        c.median_relative_error = median(std::move(errors));
    }
    return cells;
}

std::string to_csv(const std::vector<PhaseCell>& cells) {
    std::string out = "tuning,s_frac,m_frac,s,m,trials,successes,success_rate,median_relative_error\n";
    for (const auto& c : cells)
        out += std::string(to_string(c.tuning)) + ',' + num(c.s_frac) + ',' + num(c.m_frac) + ',' + num(c.s) + ',' +
               std::to_string(c.m) + ',' + std::to_string(c.trials) + ',' + std::to_string(c.successes) + ',' +
               num(static_cast<double>(c.successes) / c.trials) + ',' + num(c.median_relative_error) + '\n';
    return out;
}

// ---------------------------------------------------------------------------
// injectivity

std::vector<InjectivityRow> run_injectivity(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.experiment != Experiment::injectivity) throw ConfigError("run_injectivity: wrong experiment");
    const auto spec = base_spec(cfg);
    const int n_m = static_cast<int>(cfg.m_grid.size());
    std::vector<InjectivityRow> rows(cfg.ensembles.size() * cfg.m_grid.size());

    parallel_for(static_cast<int>(rows.size()), cfg.jobs, [&](int task) {
        const int e = task / n_m;
        const int k = task % n_m;
        auto& row = rows[task];
        row.ensemble = cfg.ensembles[e];
        row.seed = derive_seed(cfg.seed, (static_cast<std::uint64_t>(e) << 16) | static_cast<std::uint64_t>(k));
        Rng rng(row.seed);
        const auto op = make_operator(row.ensemble, cfg.n1, cfg.n2, cfg.m_grid[k], rng, row.seed);
        row.m = op.m();
        row.samples = cfg.samples;
        auto scan = injectivity_scan(op, spec, cfg.samples, rng, cfg.dense_fraction);
        row.median_deviation = scan.median_deviation;
        row.max_deviation = scan.delta_hat;
        row.envelope = fit_lower_envelope(scan.pairs);
        row.pairs = std::move(scan.pairs);
    });
    return rows;
}

std::string to_csv(const std::vector<InjectivityRow>& rows) {
    std::string out = "ensemble,m,seed,samples,median_deviation,max_deviation,gamma_hat,delta_hat\n";
    for (const auto& r : rows)
        out += std::string(to_string(r.ensemble)) + ',' + std::to_string(r.m) + ',' + std::to_string(r.seed) + ',' +
               std::to_string(r.samples) + ',' + num(r.median_deviation) + ',' + num(r.max_deviation) + ',' +
               num(r.envelope.gamma) + ',' + num(r.envelope.delta) + '\n';
    return out;
}

std::string pairs_csv(const std::vector<InjectivityRow>& rows) {
    std::string out = "ensemble,m,sample,signal_energy,measured_energy\n";
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.pairs.size(); ++i)
            out += std::string(to_string(r.ensemble)) + ',' + std::to_string(r.m) + ',' + std::to_string(i) + ',' +
                   num(r.pairs[i].signal) + ',' + num(r.pairs[i].measured) + '\n';
    return out;
}

std::string run_experiment_csv(const ExperimentConfig& cfg) {
    switch (cfg.experiment) {
        case Experiment::param_sweep: return to_csv(run_param_sweep(cfg), cfg.timing);
        case Experiment::ensemble_compare: return to_csv(run_ensemble_compare(cfg), cfg.timing);
        case Experiment::phase_transition: return to_csv(run_phase_transition(cfg));
        case Experiment::injectivity: {
            const auto rows = run_injectivity(cfg);
            if (!cfg.pairs_out.empty()) write_file(cfg.pairs_out, pairs_csv(rows));
            return to_csv(rows);
        }
    }
    throw ConfigError("unknown experiment");
}

void write_output(const ExperimentConfig& cfg, const std::string& csv) {
    if (cfg.out.empty()) throw ConfigError("no output path configured");
    write_file(cfg.out, csv);
}

}  // namespace lrsense
