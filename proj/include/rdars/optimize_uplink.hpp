#pragma once

// Joint phase-shift / mode-selection maximization of the uplink MRC SNR.
//
// Phases: cyclic coordinate ascent. With every other entry fixed the
// objective in theta_n is |c + theta_n g_n|^2, maximized by
// theta_n = g_n^H c / |g_n^H c|, so each update is exact and the objective
// never decreases.
//
// Modes: exhaustive enumeration of the C(N, a) subsets (lexicographic,
// with an exact upper-bound prune) or a top-a start followed by swap
// hill-climbing.

#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "rdars/core.hpp"

namespace rdars {

enum class ModeSearch { exhaustive, greedy_swap };

struct OptimizerOptions {
    int max_iterations = 100;
    double convergence_tol = 1e-9;
    int n_random_starts = 3;
    /// exhaustive: enumerate when C(N, a) <= exhaustive_cap, otherwise fall back
    /// to greedy. greedy_swap: always greedy.
    ModeSearch mode_search = ModeSearch::exhaustive;
    int greedy_max_swaps = 16;
    std::uint64_t exhaustive_cap = 100000;
    std::uint64_t seed = 0; // random starts

    void validate() const
    {
        if (max_iterations < 1)
            throw InvalidParameter("max_iterations must be >= 1");
        if (!(convergence_tol > 0.0))
            throw InvalidParameter("convergence_tol must be > 0");
        if (n_random_starts < 1)
            throw InvalidParameter("n_random_starts must be >= 1");
        if (greedy_max_swaps < 0)
            throw InvalidParameter("greedy_max_swaps must be >= 0");
    }
};

struct UplinkSolution {
    PhaseProfile phases;
    ModeSelection mode;
    double objective = 0.0; // |h_b|^2 + |h_c|^2
    double snr = 0.0;       // objective * p / sigma^2
    std::vector<double> objective_trace;
    GainDecomposition gains; // against the default (first-a) modes
};

/// Objective |direct + sum_{n reflecting} theta_n g_n|^2 + offset, where
/// g_n = via_n conj(G_n,:)^T is the n-th cascaded column.
class PhaseProblem {
public:
    PhaseProblem(const CVec& direct, const CMat& G, const CVec& via)
        : direct_(direct), cascade_(G.rows() > 0 ? G.cols() : direct.size(), G.rows())
    {
        if (direct.size() != G.cols() || via.size() != G.rows())
            throw DimensionMismatch("phase problem dimensions inconsistent");
        for (Eigen::Index n = 0; n < G.rows(); ++n)
            cascade_.col(n) = via[n] * G.row(n).adjoint();
        col_norm_.resize(G.rows());
        for (Eigen::Index n = 0; n < G.rows(); ++n)
            col_norm_[n] = cascade_.col(n).norm();
    }

    static PhaseProblem uplink(const ChannelSet& ch)
    {
        ch.check_uplink();
        return {ch.h_d, ch.G, ch.h_r};
    }

    Eigen::Index elements() const { return cascade_.cols(); }
    const CVec& direct() const { return direct_; }
    const CMat& cascade() const { return cascade_; }

    CVec combined(const ModeSelection& mode, const CVec& theta) const
    {
        CVec s = direct_;
        for (Eigen::Index n = 0; n < elements(); ++n)
            if (!mode.is_connected(n))
                s += theta[n] * cascade_.col(n);
        return s;
    }

    double reflected_power(const ModeSelection& mode, const CVec& theta) const
    {
        return combined(mode, theta).squaredNorm();
    }

    /// max over theta of the reflected power, bounded by the triangle inequality.
    double reflected_power_bound(const ModeSelection& mode) const
    {
        double r = direct_.norm();
        for (Eigen::Index n = 0; n < elements(); ++n)
            if (!mode.is_connected(n))
                r += col_norm_[n];
        return r * r;
    }

    /// Warm start: every cascaded term co-phased with the first entry of the direct channel.
    CVec aligned_start() const
    {
        CVec t(elements());
        const double ref = direct_.size() > 0 ? std::arg(direct_[0]) : 0.0;
        for (Eigen::Index n = 0; n < elements(); ++n) {
            const cd g0 = cascade_.rows() > 0 ? cascade_(0, n) : cd{};
            t[n] = g0 == cd{} ? cd{1.0, 0.0} : std::polar(1.0, ref - std::arg(g0));
        }
        return t;
    }

    /// Cyclic coordinate ascent in place. Returns the per-sweep reflected power
    /// (the first entry is the starting value).
    std::vector<double> ascend(const ModeSelection& mode, CVec& theta, int max_iterations,
                               double tol) const
    {
        std::vector<double> trace;
        trace.push_back(reflected_power(mode, theta));
        if (direct_.size() == 1) {
            // Single receive antenna: co-phasing every term with h_d is optimal,
            // while the sweeps below would only converge linearly towards it.
            const CVec aligned = aligned_start();
            for (Eigen::Index n = 0; n < elements(); ++n)
                if (!mode.is_connected(n))
                    theta[n] = aligned[n];
            trace.push_back(reflected_power(mode, theta));
            return trace;
        }
        for (int it = 0; it < max_iterations; ++it) {
            // Rebuilt every sweep so rounding in the running sum does not accumulate.
            CVec s = combined(mode, theta);
            for (Eigen::Index n = 0; n < elements(); ++n) {
                if (mode.is_connected(n))
                    continue;
                const auto g = cascade_.col(n);
                CVec c = s - theta[n] * g;
                const cd z = g.dot(c); // g^H c
                const double mag = std::abs(z);
                if (mag > 0.0)
                    theta[n] = z / mag;
                s = c + theta[n] * g;
            }
            const double obj = s.squaredNorm();
            const double prev = trace.back();
            trace.push_back(obj);
            if (std::abs(obj - prev) <= tol * std::max(obj, std::numeric_limits<double>::min()))
                break;
        }
        return trace;
    }

private:
    CVec direct_;
    CMat cascade_;
    Eigen::VectorXd col_norm_;
};

namespace detail {

inline std::uint64_t subset_key(const std::vector<Eigen::Index>& idx)
{
    std::uint64_t k = 0x51ed270b27e8a9d3ULL;
    for (auto i : idx)
        k = splitmix64(k ^ static_cast<std::uint64_t>(i));
    return k;
}

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k)
{
    if (k > n)
        return 0;
    k = std::min(k, n - k);
    long double r = 1.0L;
    for (std::uint64_t i = 1; i <= k; ++i) {
        r = r * static_cast<long double>(n - k + i) / static_cast<long double>(i);
        if (r > 1.8e19L)
            return std::numeric_limits<std::uint64_t>::max();
    }
    return static_cast<std::uint64_t>(r + 0.5L);
}

// Advances a sorted k-subset of {0..n-1} to its lexicographic successor.
inline bool next_combination(std::vector<Eigen::Index>& idx, Eigen::Index n)
{
    const auto k = static_cast<Eigen::Index>(idx.size());
    Eigen::Index i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i)
        --i;
    if (i < 0)
        return false;
    ++idx[static_cast<std::size_t>(i)];
    for (Eigen::Index j = i + 1; j < k; ++j)
        idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    return true;
}

inline std::vector<Eigen::Index> top_indices(const CVec& v, Eigen::Index a)
{
    std::vector<Eigen::Index> order(static_cast<std::size_t>(v.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index x, Eigen::Index y) { return std::norm(v[x]) > std::norm(v[y]); });
    order.resize(static_cast<std::size_t>(a));
    std::sort(order.begin(), order.end());
    return order;
}

struct Candidate {
    ModeSelection mode;
    CVec theta;
    double objective = -1.0;
    std::vector<double> trace;
};

// True when (value, idx) should replace the incumbent: larger value, or equal
// value with a lexicographically smaller index set.
inline bool better(double value, const std::vector<Eigen::Index>& idx, const Candidate& inc)
{
    if (value > inc.objective)
        return true;
    return value == inc.objective && idx < inc.mode.connected();
}

} // namespace detail

/// Single-start coordinate ascent on the uplink objective from `init`.
inline PhaseProfile optimize_phases(const ChannelSet& ch, const ModeSelection& mode,
                                    const PhaseProfile& init, const OptimizerOptions& opts,
                                    std::vector<double>* trace = nullptr)
{
    opts.validate();
    detail::check_config(ch, mode, init);
    const auto problem = PhaseProblem::uplink(ch);
    CVec theta = init.theta();
    auto tr = problem.ascend(mode, theta, opts.max_iterations, opts.convergence_tol);
    if (trace) {
        const double offset = selected_power(ch.h_r, mode);
        for (auto& v : tr)
            v += offset;
        *trace = std::move(tr);
    }
    return PhaseProfile(std::move(theta));
}

/// Multi-start phase optimization for a fixed mode: the aligned warm start
/// plus n_random_starts - 1 uniform draws seeded from (opts.seed, mode).
/// `offset` is added to the reflected power to form the objective.
inline detail::Candidate optimize_phases_multistart(const PhaseProblem& problem, const ModeSelection& mode,
                                                    double offset, const OptimizerOptions& opts)
{
    detail::Candidate best{mode, {}, -1.0, {}};
    Rng rng = make_rng(opts.seed, {detail::subset_key(mode.connected())});
    for (int s = 0; s < opts.n_random_starts; ++s) {
        CVec theta = s == 0 ? problem.aligned_start() : PhaseProfile::random(problem.elements(), rng).theta();
        auto trace = problem.ascend(mode, theta, opts.max_iterations, opts.convergence_tol);
        const double obj = trace.back() + offset;
        if (obj > best.objective) {
            for (auto& v : trace)
                v += offset;
            best.theta = std::move(theta);
            best.objective = obj;
            best.trace = std::move(trace);
        }
    }
    return best;
}

namespace detail {

inline UplinkSolution finish_uplink(const ChannelSet& ch, Candidate&& c, double tx_power, double noise_power)
{
    UplinkSolution sol;
    sol.phases = PhaseProfile(std::move(c.theta));
    sol.mode = std::move(c.mode);
    sol.objective = c.objective;
    sol.snr = tx_power / noise_power * c.objective;
    sol.objective_trace = std::move(c.trace);
    sol.gains = gain_decomposition(ch, sol.phases, sol.mode,
                                   ModeSelection::first(ch.elements(), sol.mode.n_connected()),
                                   tx_power, noise_power);
    return sol;
}

inline void check_a(const ChannelSet& ch, Eigen::Index a)
{
    if (a < 0 || a > ch.elements())
        throw InvalidParameter("number of connected elements a=" + std::to_string(a) +
                               " must lie in [0, N=" + std::to_string(ch.elements()) + "]");
}

} // namespace detail

inline UplinkSolution select_modes_exhaustive(const ChannelSet& ch, Eigen::Index a,
                                              const OptimizerOptions& opts, double tx_power = 1.0,
                                              double noise_power = 1.0)
{
    opts.validate();
    check_powers(tx_power, noise_power);
    ch.check_uplink();
    detail::check_a(ch, a);
    const Eigen::Index N = ch.elements();
    const auto count = detail::binomial(static_cast<std::uint64_t>(N), static_cast<std::uint64_t>(a));
    if (count > opts.exhaustive_cap)
        throw SearchCapExceeded("exhaustive mode search needs C(" + std::to_string(N) + ", " +
                                std::to_string(a) + ") subsets, above exhaustive_cap=" +
                                std::to_string(opts.exhaustive_cap));

    const auto problem = PhaseProblem::uplink(ch);
    // Incumbent from the top-a start so the bound prunes most subsets early.
    const ModeSelection seed_mode(N, detail::top_indices(ch.h_r, a));
    detail::Candidate best =
        optimize_phases_multistart(problem, seed_mode, selected_power(ch.h_r, seed_mode), opts);

    std::vector<Eigen::Index> idx(static_cast<std::size_t>(a));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    do {
        if (idx == seed_mode.connected())
            continue;
        const ModeSelection mode(N, idx);
        const double offset = selected_power(ch.h_r, mode);
        // Subsets whose bound cannot beat the incumbent are skipped; a tie is still evaluated.
        if (offset + problem.reflected_power_bound(mode) < best.objective)
            continue;
        auto cand = optimize_phases_multistart(problem, mode, offset, opts);
        if (detail::better(cand.objective, idx, best))
            best = std::move(cand);
    } while (detail::next_combination(idx, N));

    return detail::finish_uplink(ch, std::move(best), tx_power, noise_power);
}

inline UplinkSolution select_modes_greedy(const ChannelSet& ch, Eigen::Index a, const OptimizerOptions& opts,
                                          double tx_power = 1.0, double noise_power = 1.0)
{
    opts.validate();
    check_powers(tx_power, noise_power);
    ch.check_uplink();
    detail::check_a(ch, a);
    const Eigen::Index N = ch.elements();
    const auto problem = PhaseProblem::uplink(ch);

    // Top-a |h_r|^2 maximizes the selection term on its own.
    const ModeSelection start(N, detail::top_indices(ch.h_r, a));
    detail::Candidate best = optimize_phases_multistart(problem, start, selected_power(ch.h_r, start), opts);

    for (int swap = 0; swap < opts.greedy_max_swaps; ++swap) {
        const auto current = best.mode.connected();
        std::optional<detail::Candidate> step;
        const double floor = best.objective * (1.0 + 1e-12);
        for (std::size_t i = 0; i < current.size(); ++i) {
            for (Eigen::Index j = 0; j < N; ++j) {
                if (best.mode.is_connected(j))
                    continue;
                auto idx = current;
                idx[i] = j;
                std::sort(idx.begin(), idx.end());
                const ModeSelection mode(N, idx);
                const double offset = selected_power(ch.h_r, mode);
                const double bar = step ? std::max(step->objective, floor) : floor;
                if (offset + problem.reflected_power_bound(mode) < bar)
                    continue;
                auto cand = optimize_phases_multistart(problem, mode, offset, opts);
                if (cand.objective <= floor)
                    continue;
                if (!step || detail::better(cand.objective, idx, *step))
                    step = std::move(cand);
            }
        }
        if (!step)
            break;
        best = std::move(*step);
    }
    return detail::finish_uplink(ch, std::move(best), tx_power, noise_power);
}

/// Exhaustive search when allowed and under the cap, greedy swap otherwise.
inline UplinkSolution solve_p1(const ChannelSet& ch, Eigen::Index a, const OptimizerOptions& opts,
                               double tx_power = 1.0, double noise_power = 1.0)
{
    ch.check_uplink();
    detail::check_a(ch, a);
    const auto count = detail::binomial(static_cast<std::uint64_t>(ch.elements()), static_cast<std::uint64_t>(a));
    if (opts.mode_search == ModeSearch::exhaustive && count <= opts.exhaustive_cap)
        return select_modes_exhaustive(ch, a, opts, tx_power, noise_power);
    return select_modes_greedy(ch, a, opts, tx_power, noise_power);
}

} // namespace rdars
