#include <gtest/gtest.h>

#include <numbers>

#include "test_util.hpp"

using namespace rdars;
using namespace rdars::testing;

namespace {

OptimizerOptions small_opts(std::uint64_t seed = 1)
{
    OptimizerOptions o;
    o.max_iterations = 200;
    o.convergence_tol = 1e-12;
    o.n_random_starts = 4;
    o.seed = seed;
    return o;
}

double phase_gap(cd a, cd b) { return std::abs(std::arg(a * std::conj(b))); }

void expect_monotone(const std::vector<double>& trace)
{
    for (std::size_t i = 1; i < trace.size(); ++i)
        EXPECT_GE(trace[i], trace[i - 1] * (1.0 - 1e-10)) << "step " << i;
}

ChannelSet default_geometry_channels(std::uint64_t seed, Eigen::Index M = 4, Eigen::Index N = 64)
{
    Rng rng(seed);
    return generate_uplink_channels(Geometry{}, FadingParams{}, M, N, rng);
}

} // namespace

TEST(OptimizePhases, SingleAntennaAlignsWithDirectPath)
{
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto ch = random_uplink(1, 5, 40 + s);
        const auto mode = ModeSelection::first(5, 0);
        std::vector<double> trace;
        const auto th = optimize_phases(ch, mode, PhaseProfile::ones(5), small_opts(), &trace);
        expect_monotone(trace);
        for (Eigen::Index n = 0; n < 5; ++n) {
            const double expected = std::arg(ch.h_d[0]) - std::arg(std::conj(ch.G(n, 0))) - std::arg(ch.h_r[n]);
            EXPECT_LT(phase_gap(th[n], std::polar(1.0, expected)), 1e-9) << "seed " << s << " n " << n;
        }
    }
}

TEST(OptimizePhases, TwoPhasorExample)
{
    ChannelSet ch;
    ch.h_d = CVec::Ones(1);
    ch.G = CMat::Ones(1, 1);
    ch.h_r = CVec::Constant(1, std::polar(1.0, -std::numbers::pi / 3));
    const auto mode = ModeSelection::first(1, 0);
    const auto th = optimize_phases(ch, mode, PhaseProfile::ones(1), small_opts());
    EXPECT_LT(phase_gap(th[0], std::polar(1.0, std::numbers::pi / 3)), 1e-12);
    EXPECT_NEAR(uplink_snr(effective_uplink_channel(ch, mode, th), 1.0, 1.0), 4.0, 1e-12);
}

TEST(OptimizePhases, ZeroInnerProductKeepsValue)
{
    ChannelSet ch;
    ch.h_d = CVec::Zero(2);
    ch.G = CMat::Zero(3, 2);
    ch.h_r = CVec::Ones(3);
    Rng rng(1);
    const auto init = PhaseProfile::random(3, rng);
    const auto th = optimize_phases(ch, ModeSelection::first(3, 0), init, small_opts());
    EXPECT_TRUE((th.theta().array() == init.theta().array()).all());
}

TEST(OptimizePhases, NearGridOptimum)
{
    // N = 6 reflecting elements, M = 2, against the 16-level exhaustive grid.
    const auto mode = ModeSelection::first(6, 0);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto ch = random_uplink(2, 6, 900 + s);
        const auto grid = oracle::brute_phase_grid(ch, mode, 16);
        const auto problem = PhaseProblem::uplink(ch);
        const auto best = optimize_phases_multistart(problem, mode, 0.0, small_opts(s));
        EXPECT_GE(best.objective, 0.98 * grid.objective) << "seed " << s;
        expect_monotone(best.trace);
    }
}

TEST(SelectModesExhaustive, NoConnectionIsPassiveRis)
{
    const auto ch = random_uplink(2, 6, 3);
    const auto sol = select_modes_exhaustive(ch, 0, small_opts());
    EXPECT_EQ(sol.mode.n_connected(), 0);
    EXPECT_EQ(sol.gains.distribution_gain, 0.0);
}

TEST(SelectModesExhaustive, SeparableObjectivePicksStrongestElement)
{
    ChannelSet ch;
    ch.h_d = CVec::Constant(1, cd{0.2, 0.1});
    ch.G = CMat::Zero(3, 1);
    ch.h_r = CVec(3);
    ch.h_r << cd{0.1, 0.0}, cd{0.0, 0.9}, cd{0.5, 0.0};
    const auto sol = select_modes_exhaustive(ch, 1, small_opts());
    EXPECT_EQ(sol.mode.connected(), std::vector<Eigen::Index>{1});
    EXPECT_NEAR(sol.objective, ch.h_d.squaredNorm() + 0.81, 1e-12);
}

TEST(SelectModesExhaustive, MatchesJointBruteForce)
{
    const auto ch = random_uplink(2, 6, 7);
    const auto sol = select_modes_exhaustive(ch, 2, small_opts(7));
    const auto brute = oracle::brute_mode_search(ch, 2, 16);
    EXPECT_EQ(sol.mode, brute.mode);
    EXPECT_GE(sol.objective, brute.objective * (1.0 - 1e-12));
    EXPECT_GE(sol.objective, 0.98 * brute.objective);
}

TEST(SelectModesExhaustive, RefusesAboveCap)
{
    const auto ch = random_uplink(2, 64, 3);
    auto opts = small_opts();
    opts.exhaustive_cap = 1000;
    try {
        select_modes_exhaustive(ch, 4, opts);
        FAIL() << "expected SearchCapExceeded";
    } catch (const SearchCapExceeded& e) {
        EXPECT_NE(std::string(e.what()).find("exhaustive_cap=1000"), std::string::npos);
    }
}

TEST(SelectModesGreedy, SeparableObjectiveKeepsTopIndices)
{
    auto ch = random_uplink(2, 8, 4);
    ch.G.setZero();
    const auto sol = select_modes_greedy(ch, 3, small_opts());
    EXPECT_EQ(sol.mode.connected(), detail::top_indices(ch.h_r, 3));
}

TEST(SelectModesGreedy, AllConnected)
{
    const auto ch = random_uplink(2, 5, 4);
    const auto sol = select_modes_greedy(ch, 5, small_opts());
    EXPECT_EQ(sol.mode.n_connected(), 5);
    EXPECT_NEAR(sol.objective, ch.h_d.squaredNorm() + ch.h_r.squaredNorm(), 1e-12);
}

TEST(SelectModesGreedy, NeverWorseThanTopAStart)
{
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto ch = random_uplink(3, 10, 60 + s);
        const auto opts = small_opts(s);
        const auto sol = select_modes_greedy(ch, 3, opts);
        const ModeSelection start(10, detail::top_indices(ch.h_r, 3));
        const auto init = optimize_phases_multistart(PhaseProblem::uplink(ch), start, selected_power(ch.h_r, start), opts);
        EXPECT_GE(sol.objective, init.objective);
    }
}

TEST(SelectModesGreedy, CloseToExhaustive)
{
    int good = 0;
    const int trials = 50;
    for (std::uint64_t s = 0; s < trials; ++s) {
        const auto ch = random_uplink(2, 6, 300 + s);
        const auto g = select_modes_greedy(ch, 2, small_opts(s));
        const auto e = select_modes_exhaustive(ch, 2, small_opts(s));
        if (g.objective >= 0.95 * e.objective)
            ++good;
    }
    EXPECT_GE(good, 48); // >= 95 %
}

TEST(SolveP1, DegenerateDispatch)
{
    const auto ch = random_uplink(2, 6, 5);
    const auto none = solve_p1(ch, 0, small_opts());
    const auto phase_only = optimize_phases_multistart(PhaseProblem::uplink(ch), ModeSelection::first(6, 0), 0.0, small_opts());
    EXPECT_EQ(none.objective, phase_only.objective);

    const auto all = solve_p1(ch, 6, small_opts());
    EXPECT_NEAR(all.objective, ch.h_d.squaredNorm() + ch.h_r.squaredNorm(), 1e-12);
}

TEST(SolveP1, Deterministic)
{
    const auto ch = default_geometry_channels(5, 4, 16);
    const auto a = solve_p1(ch, 2, small_opts(9));
    const auto b = solve_p1(ch, 2, small_opts(9));
    EXPECT_EQ(a.mode, b.mode);
    EXPECT_TRUE((a.phases.theta().array() == b.phases.theta().array()).all());
    EXPECT_EQ(a.objective, b.objective);
    EXPECT_EQ(a.objective_trace, b.objective_trace);
}

TEST(SolveP1, InvariantsOnRandomInstances)
{
    Rng rng(17);
    for (std::uint64_t s = 0; s < 15; ++s) {
        const auto ch = random_uplink(3, 8, 700 + s);
        const auto opts = small_opts(s);
        const auto sol = solve_p1(ch, 2, opts, 2.0, 0.5);
        expect_monotone(sol.objective_trace);
        EXPECT_EQ(sol.mode.n_connected(), 2);
        for (Eigen::Index n = 0; n < 8; ++n)
            EXPECT_LE(std::abs(std::abs(sol.phases[n]) - 1.0), 1e-12);
        const double snr = uplink_snr(effective_uplink_channel(ch, sol.mode, sol.phases), 2.0, 0.5);
        EXPECT_LT(rel_diff(sol.snr, snr), 1e-12);

        // Random mode with optimized phases, optimized mode with random phases.
        const auto rmode = random_mode(8, 2, rng);
        const auto rm = optimize_phases_multistart(PhaseProblem::uplink(ch), rmode, selected_power(ch.h_r, rmode), opts);
        EXPECT_GE(sol.objective, rm.objective - 1e-9 * sol.objective);
        const double rp = uplink_snr(effective_uplink_channel(ch, sol.mode, PhaseProfile::random(8, rng)), 1.0, 1.0);
        EXPECT_GE(sol.objective, rp - 1e-9 * sol.objective);
    }
}

TEST(SolveP1, ScaleEquivariance)
{
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto ch = random_uplink(2, 8, 800 + s);
        const auto a = solve_p1(ch, 2, small_opts(s));
        const auto b = solve_p1(ch.scaled_terminal_links(3.0), 2, small_opts(s));
        EXPECT_EQ(a.mode, b.mode);
        EXPECT_LT(rel_diff(b.objective, 9.0 * a.objective), 1e-9);
    }
}

TEST(SolveP1, BeatsPassiveRisAndDasOnDefaultGeometry)
{
    OptimizerOptions opts;
    int wins = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        const auto ch = default_geometry_channels(static_cast<std::uint64_t>(t) + 10000);
        opts.seed = static_cast<std::uint64_t>(t);
        const auto rdars = solve_p1(ch, 2, opts);
        const auto ris = solve_p1(ch, 0, opts);
        const double das = ch.h_d.squaredNorm() + selected_power(ch.h_r, ModeSelection::first(64, 2));
        if (rdars.objective > ris.objective && rdars.objective > das)
            ++wins;
    }
    EXPECT_GE(wins, 180);
}
