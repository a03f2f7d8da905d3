#pragma once

// Monte Carlo experiment runner. Every trial draws one channel realization
// that all schemes and power points share; per-trial results are stored by
// trial index and reduced sequentially, so rows do not depend on the number
// of worker threads.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstring>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rdars/isac.hpp"

namespace rdars {

enum class Scenario { uplink, isac };

enum class Scheme { rdars_opt, rdars_rand_index, rdars_rand_phase, das, passive_ris };
inline constexpr std::size_t kSchemeCount = 5;

inline constexpr std::string_view scheme_name(Scheme s)
{
    switch (s) {
    case Scheme::rdars_opt: return "rdars_opt";
    case Scheme::rdars_rand_index: return "rdars_rand_index";
    case Scheme::rdars_rand_phase: return "rdars_rand_phase";
    case Scheme::das: return "das";
    case Scheme::passive_ris: return "passive_ris";
    }
    return "?";
}

inline std::optional<Scheme> scheme_from_name(std::string_view s)
{
    for (std::size_t i = 0; i < kSchemeCount; ++i)
        if (scheme_name(static_cast<Scheme>(i)) == s)
            return static_cast<Scheme>(i);
    return std::nullopt;
}

inline constexpr std::string_view scenario_name(Scenario s) { return s == Scenario::uplink ? "uplink" : "isac"; }

struct ExperimentConfig {
    Scenario scenario = Scenario::uplink;
    Eigen::Index M = 4;
    Eigen::Index N = 64;
    std::vector<Eigen::Index> a_values{2};
    std::vector<double> power_sweep_dbm{0, 5, 10, 15, 20, 25, 30};
    std::optional<double> gamma_th_db{};
    int trials = 500;
    std::uint64_t base_seed = 1;
    std::vector<Scheme> schemes{Scheme::rdars_opt, Scheme::rdars_rand_index, Scheme::rdars_rand_phase, Scheme::das,
                                Scheme::passive_ris};
    Geometry geometry{};
    FadingParams fading{};
    double noise_power_dbm = -90.0;
    double rcs_gain_db = -10.0; // |alpha|^2
    double rcs_phase_rad = 0.0;
    OptimizerOptions optimizer{};

    double noise_power() const { return dbm_to_watt(noise_power_dbm); }
    cd alpha() const { return std::polar(std::sqrt(db_to_linear(rcs_gain_db)), rcs_phase_rad); }

    void validate() const
    {
        if (M < 1 || N < 1)
            throw InvalidConfig("M and N must be >= 1");
        if (trials < 1)
            throw InvalidConfig("trials must be >= 1");
        if (a_values.empty())
            throw InvalidConfig("a_values must not be empty");
        for (auto a : a_values)
            if (a < 0 || a > N)
                throw InvalidConfig("a_values entry " + std::to_string(a) + " outside [0, N]");
        if (power_sweep_dbm.empty())
            throw InvalidConfig("power_sweep_dbm must not be empty");
        if (schemes.empty())
            throw InvalidConfig("schemes must not be empty");
        if (scenario == Scenario::isac) {
            if (!gamma_th_db)
                throw InvalidConfig("isac scenario requires gamma_th_db");
            if (!geometry.target_position)
                throw InvalidConfig("isac scenario requires target_position");
        }
        fading.validate();
        try {
            optimizer.validate();
        } catch (const InvalidParameter& e) {
            throw InvalidConfig(e.what());
        }
    }
};

struct ResultRow {
    Scenario scenario = Scenario::uplink;
    Scheme scheme = Scheme::rdars_opt;
    double tx_power_dbm = 0.0;
    Eigen::Index n_total = 0;
    Eigen::Index n_connected = 0; // sweep value of a; passive_ris ignores it
    int trials = 0;
    int feasible_trials = 0;
    double mean_rate_bpshz = 0.0;
    double std_rate_bpshz = 0.0;
    double mean_comm_snr_db = 0.0;
    double mean_radar_snr_db = std::numeric_limits<double>::quiet_NaN();
    double mean_gain_reflection = std::numeric_limits<double>::quiet_NaN();
    double mean_gain_distribution = std::numeric_limits<double>::quiet_NaN();
    double mean_gain_selection = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t base_seed = 0;
};

/// Per-trial uplink outcome of one scheme at one a. SNR at power p is
/// objective * p / sigma^2; gains are against the default first-a modes.
struct UplinkTrialOutcome {
    double objective = 0.0;
    GainDecomposition gains; // computed at p = sigma^2 (unit transmit SNR)
};

/// Per-trial ISAC outcome of one scheme at one (a, power).
struct IsacTrialOutcome {
    bool feasible = false;
    double comm_snr = 0.0;
    double radar_snr = 0.0;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::vector<std::uint64_t> channel_hashes; // one per trial
    // uplink: [trial][a_index][scheme]
    std::vector<std::vector<std::array<UplinkTrialOutcome, kSchemeCount>>> uplink;
    // isac: [trial][a_index][power_index][scheme]
    std::vector<std::vector<std::vector<std::array<IsacTrialOutcome, kSchemeCount>>>> isac;
};

inline std::uint64_t channel_hash(const ChannelSet& ch)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](const cd* p, Eigen::Index n) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < static_cast<std::size_t>(n) * sizeof(cd); ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    feed(ch.G.data(), ch.G.size());
    feed(ch.h_d.data(), ch.h_d.size());
    feed(ch.h_r.data(), ch.h_r.size());
    for (const auto* v : {&ch.u_d, &ch.u_r, &ch.t_d, &ch.t_r})
        if (*v)
            feed((*v)->data(), (*v)->size());
    return h;
}

namespace detail {

enum Stream : std::uint64_t { channel_stream = 0, optimizer_stream = 1, index_stream = 2, phase_stream = 3 };

inline std::vector<Eigen::Index> random_subset(Eigen::Index N, Eigen::Index a, Rng& rng)
{
    std::vector<Eigen::Index> pool(static_cast<std::size_t>(N));
    std::iota(pool.begin(), pool.end(), Eigen::Index{0});
    for (Eigen::Index i = 0; i < a; ++i) {
        std::uniform_int_distribution<Eigen::Index> pick(i, N - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
    }
    pool.resize(static_cast<std::size_t>(a));
    std::sort(pool.begin(), pool.end());
    return pool;
}

/// Runs fn(trial) for every trial on `threads` workers; the first exception wins.
template <typename F>
void parallel_trials(int trials, int threads, F&& fn)
{
    threads = std::max(1, std::min(threads, trials));
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const int t = next.fetch_add(1);
            if (t >= trials)
                return;
            try {
                fn(t);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = std::current_exception();
                next.store(trials);
                return;
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < threads; ++i)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }
    if (error)
        std::rethrow_exception(error);
}

struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
    int n = 0;

    void add(double v)
    {
        sum += v;
        sum_sq += v * v;
        ++n;
    }
    double mean() const { return n > 0 ? sum / n : 0.0; }
    double stddev() const
    {
        if (n < 2)
            return 0.0;
        const double m = mean();
        return std::sqrt(std::max(0.0, (sum_sq - n * m * m) / (n - 1)));
    }
};

inline bool has_scheme(const ExperimentConfig& cfg, Scheme s)
{
    return std::find(cfg.schemes.begin(), cfg.schemes.end(), s) != cfg.schemes.end();
}

inline std::array<UplinkTrialOutcome, kSchemeCount> uplink_trial(const ExperimentConfig& cfg, const ChannelSet& ch,
                                                                 int trial, std::size_t a_index,
                                                                 const UplinkSolution& passive)
{
    const Eigen::Index a = cfg.a_values[a_index];
    const Eigen::Index N = cfg.N;
    const auto trial_u = static_cast<std::uint64_t>(trial);
    const auto a_u = static_cast<std::uint64_t>(a);
    OptimizerOptions opts = cfg.optimizer;
    opts.seed = derive_seed(cfg.base_seed, {trial_u, optimizer_stream, a_u});
    const ModeSelection default_mode = ModeSelection::first(N, a);

    std::array<UplinkTrialOutcome, kSchemeCount> out{};
    auto record = [&](Scheme s, const PhaseProfile& phases, const ModeSelection& mode) {
        auto& o = out[static_cast<std::size_t>(s)];
        o.gains = gain_decomposition(ch, phases, mode, default_mode, 1.0, 1.0);
        o.objective = uplink_snr(effective_uplink_channel(ch, mode, phases), 1.0, 1.0);
    };

    const bool need_opt = has_scheme(cfg, Scheme::rdars_opt) || has_scheme(cfg, Scheme::rdars_rand_phase);
    std::optional<UplinkSolution> opt;
    if (need_opt)
        opt = solve_p1(ch, a, opts);
    if (has_scheme(cfg, Scheme::rdars_opt))
        record(Scheme::rdars_opt, opt->phases, opt->mode);

    if (has_scheme(cfg, Scheme::rdars_rand_index)) {
        Rng rng = make_rng(cfg.base_seed, {trial_u, index_stream, a_u});
        const ModeSelection mode(N, random_subset(N, a, rng));
        const auto problem = PhaseProblem::uplink(ch);
        auto cand = optimize_phases_multistart(problem, mode, selected_power(ch.h_r, mode), opts);
        record(Scheme::rdars_rand_index, PhaseProfile(std::move(cand.theta)), mode);
    }
    if (has_scheme(cfg, Scheme::rdars_rand_phase)) {
        Rng rng = make_rng(cfg.base_seed, {trial_u, phase_stream, a_u});
        record(Scheme::rdars_rand_phase, PhaseProfile::random(N, rng), opt->mode);
    }
    if (has_scheme(cfg, Scheme::das)) {
        auto& o = out[static_cast<std::size_t>(Scheme::das)];
        o.gains.reflection_gain = ch.h_d.squaredNorm();
        o.gains.distribution_gain = selected_power(ch.h_r, default_mode);
        o.gains.selection_gain = 0.0;
        o.gains.total_snr = o.gains.reflection_gain + o.gains.distribution_gain;
        o.objective = o.gains.total_snr;
    }
    if (has_scheme(cfg, Scheme::passive_ris)) {
        auto& o = out[static_cast<std::size_t>(Scheme::passive_ris)];
        o.objective = passive.objective;
        o.gains = passive.gains;
    }
    return out;
}

inline std::vector<std::array<IsacTrialOutcome, kSchemeCount>>
isac_trial(const ExperimentConfig& cfg, const ChannelSet& ch, int trial, std::size_t a_index,
           const std::vector<std::optional<IsacSolution>>& passive)
{
    const Eigen::Index a = cfg.a_values[a_index];
    const Eigen::Index N = cfg.N;
    const auto trial_u = static_cast<std::uint64_t>(trial);
    const auto a_u = static_cast<std::uint64_t>(a);
    OptimizerOptions opts = cfg.optimizer;
    opts.seed = derive_seed(cfg.base_seed, {trial_u, optimizer_stream, a_u});

    Rng index_rng = make_rng(cfg.base_seed, {trial_u, index_stream, a_u});
    const ModeSelection rand_mode(N, random_subset(N, a, index_rng));
    Rng phase_rng = make_rng(cfg.base_seed, {trial_u, phase_stream, a_u});
    const PhaseProfile rand_phases = PhaseProfile::random(N, phase_rng);
    const ModeSelection default_mode = ModeSelection::first(N, a);

    std::vector<std::array<IsacTrialOutcome, kSchemeCount>> out(cfg.power_sweep_dbm.size());
    for (std::size_t pi = 0; pi < cfg.power_sweep_dbm.size(); ++pi) {
        IsacProblem pr;
        pr.tx_power = dbm_to_watt(cfg.power_sweep_dbm[pi]);
        pr.gamma_th = db_to_linear(*cfg.gamma_th_db);
        pr.alpha = cfg.alpha();
        pr.noise_power = cfg.noise_power();
        auto& row = out[pi];
        auto put = [&](Scheme s, const std::optional<IsacSolution>& sol) {
            auto& o = row[static_cast<std::size_t>(s)];
            o.feasible = sol.has_value();
            if (sol) {
                o.comm_snr = sol->comm_snr;
                o.radar_snr = sol->radar_snr;
            }
        };

        std::optional<IsacSolution> opt;
        const bool need_opt = has_scheme(cfg, Scheme::rdars_opt) || has_scheme(cfg, Scheme::rdars_rand_phase);
        if (need_opt) {
            try {
                opt = solve_p2(ch, a, pr, opts);
            } catch (const Infeasible&) {
            }
        }
        if (has_scheme(cfg, Scheme::rdars_opt))
            put(Scheme::rdars_opt, opt);
        if (has_scheme(cfg, Scheme::rdars_rand_index))
            put(Scheme::rdars_rand_index, optimize_isac_for_mode(ch, rand_mode, pr, opts));
        if (has_scheme(cfg, Scheme::rdars_rand_phase)) {
            const ModeSelection mode = opt ? opt->mode : ModeSelection(N, top_indices(*ch.t_r, a));
            put(Scheme::rdars_rand_phase, evaluate_isac_config(isac_effective_channels(ch, mode, rand_phases), pr));
        }
        if (has_scheme(cfg, Scheme::das))
            put(Scheme::das, evaluate_isac_config(das_effective_channels(ch, default_mode), pr));
        if (has_scheme(cfg, Scheme::passive_ris))
            put(Scheme::passive_ris, passive[pi]);
    }
    return out;
}

inline double safe_db(double lin)
{
    return lin > 0.0 ? linear_to_db(lin) : -std::numeric_limits<double>::infinity();
}

} // namespace detail

/// Uplink sweep. Scheme semantics:
///   rdars_opt         joint optimum (solve_p1)
///   rdars_rand_index  uniform random a-subset, optimized phases
///   rdars_rand_phase  optimized subset, uniform random phases
///   das               first-a elements connected, no reflection term
///   passive_ris       a = 0, optimized phases
inline ExperimentResult run_uplink_experiment(const ExperimentConfig& cfg, int threads = 1)
{
    cfg.validate();
    if (cfg.scenario != Scenario::uplink)
        throw InvalidConfig("run_uplink_experiment requires scenario = uplink");

    ExperimentResult res;
    res.channel_hashes.assign(static_cast<std::size_t>(cfg.trials), 0);
    res.uplink.assign(static_cast<std::size_t>(cfg.trials), {});

    detail::parallel_trials(cfg.trials, threads, [&](int trial) {
        const auto trial_u = static_cast<std::uint64_t>(trial);
        Rng rng = make_rng(cfg.base_seed, {trial_u, detail::channel_stream});
        const ChannelSet ch = generate_uplink_channels(cfg.geometry, cfg.fading, cfg.M, cfg.N, rng);
        res.channel_hashes[static_cast<std::size_t>(trial)] = channel_hash(ch);

        UplinkSolution passive;
        if (detail::has_scheme(cfg, Scheme::passive_ris)) {
            OptimizerOptions opts = cfg.optimizer;
            opts.seed = derive_seed(cfg.base_seed, {trial_u, detail::optimizer_stream, 0});
            passive = solve_p1(ch, 0, opts);
        }
        auto& slot = res.uplink[static_cast<std::size_t>(trial)];
        for (std::size_t ai = 0; ai < cfg.a_values.size(); ++ai)
            slot.push_back(detail::uplink_trial(cfg, ch, trial, ai, passive));
    });

    const double noise = cfg.noise_power();
    for (std::size_t ai = 0; ai < cfg.a_values.size(); ++ai) {
        for (auto s : cfg.schemes) {
            const auto si = static_cast<std::size_t>(s);
            for (double pdbm : cfg.power_sweep_dbm) {
                const double snr_scale = dbm_to_watt(pdbm) / noise;
                detail::Moments rate, snr, refl, dist, sel;
                for (const auto& trial : res.uplink) {
                    const auto& o = trial[ai][si];
                    const double g = snr_scale * o.objective;
                    rate.add(std::log2(1.0 + g));
                    snr.add(g);
                    refl.add(o.gains.reflection_gain);
                    dist.add(o.gains.distribution_gain);
                    sel.add(o.gains.selection_gain);
                }
                ResultRow r;
                r.scenario = Scenario::uplink;
                r.scheme = s;
                r.tx_power_dbm = pdbm;
                r.n_total = cfg.N;
                r.n_connected = cfg.a_values[ai];
                r.trials = cfg.trials;
                r.feasible_trials = cfg.trials;
                r.mean_rate_bpshz = rate.mean();
                r.std_rate_bpshz = rate.stddev();
                r.mean_comm_snr_db = detail::safe_db(snr.mean());
                r.mean_gain_reflection = refl.mean();
                r.mean_gain_distribution = dist.mean();
                r.mean_gain_selection = sel.mean();
                r.base_seed = cfg.base_seed;
                res.rows.push_back(r);
            }
        }
    }
    return res;
}

/// ISAC sweep. rdars_opt and passive_ris use solve_p2; rdars_rand_index a random
/// subset with optimized phases; rdars_rand_phase the optimized subset with
/// random phases; das the first-a elements plus the BS with the echo received
/// over the direct link. Every scheme uses the QoS beamformer and w = t_b.
/// A trial where the QoS cannot be met counts as an outage: it adds zero to the
/// SNR and rate means and is excluded from feasible_trials.
inline ExperimentResult run_isac_experiment(const ExperimentConfig& cfg, int threads = 1)
{
    cfg.validate();
    if (cfg.scenario != Scenario::isac)
        throw InvalidConfig("run_isac_experiment requires scenario = isac");

    const std::size_t n_power = cfg.power_sweep_dbm.size();
    ExperimentResult res;
    res.channel_hashes.assign(static_cast<std::size_t>(cfg.trials), 0);
    res.isac.assign(static_cast<std::size_t>(cfg.trials), {});

    detail::parallel_trials(cfg.trials, threads, [&](int trial) {
        const auto trial_u = static_cast<std::uint64_t>(trial);
        Rng rng = make_rng(cfg.base_seed, {trial_u, detail::channel_stream});
        const ChannelSet ch = generate_isac_channels(cfg.geometry, cfg.fading, cfg.M, cfg.N, rng);
        res.channel_hashes[static_cast<std::size_t>(trial)] = channel_hash(ch);

        std::vector<std::optional<IsacSolution>> passive(n_power);
        if (detail::has_scheme(cfg, Scheme::passive_ris)) {
            OptimizerOptions opts = cfg.optimizer;
            opts.seed = derive_seed(cfg.base_seed, {trial_u, detail::optimizer_stream, 0});
            for (std::size_t pi = 0; pi < n_power; ++pi) {
                IsacProblem pr;
                pr.tx_power = dbm_to_watt(cfg.power_sweep_dbm[pi]);
                pr.gamma_th = db_to_linear(*cfg.gamma_th_db);
                pr.alpha = cfg.alpha();
                pr.noise_power = cfg.noise_power();
                try {
                    passive[pi] = solve_p2(ch, 0, pr, opts);
                } catch (const Infeasible&) {
                }
            }
        }
        auto& slot = res.isac[static_cast<std::size_t>(trial)];
        for (std::size_t ai = 0; ai < cfg.a_values.size(); ++ai)
            slot.push_back(detail::isac_trial(cfg, ch, trial, ai, passive));
    });

    for (std::size_t ai = 0; ai < cfg.a_values.size(); ++ai) {
        for (auto s : cfg.schemes) {
            const auto si = static_cast<std::size_t>(s);
            for (std::size_t pi = 0; pi < n_power; ++pi) {
                detail::Moments rate, comm, radar;
                int feasible = 0;
                for (const auto& trial : res.isac) {
                    const auto& o = trial[ai][pi][si];
                    feasible += o.feasible ? 1 : 0;
                    rate.add(o.feasible ? std::log2(1.0 + o.comm_snr) : 0.0);
                    comm.add(o.feasible ? o.comm_snr : 0.0);
                    radar.add(o.feasible ? o.radar_snr : 0.0);
                }
                ResultRow r;
                r.scenario = Scenario::isac;
                r.scheme = s;
                r.tx_power_dbm = cfg.power_sweep_dbm[pi];
                r.n_total = cfg.N;
                r.n_connected = cfg.a_values[ai];
                r.trials = cfg.trials;
                r.feasible_trials = feasible;
                r.mean_rate_bpshz = rate.mean();
                r.std_rate_bpshz = rate.stddev();
                r.mean_comm_snr_db = detail::safe_db(comm.mean());
                r.mean_radar_snr_db = detail::safe_db(radar.mean());
                r.base_seed = cfg.base_seed;
                res.rows.push_back(r);
            }
        }
    }
    return res;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads = 1)
{
    return cfg.scenario == Scenario::uplink ? run_uplink_experiment(cfg, threads) : run_isac_experiment(cfg, threads);
}

} // namespace rdars
