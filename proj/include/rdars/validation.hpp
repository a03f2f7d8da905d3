#pragma once

// Small-instance oracle checks behind `rdars_sim validate`. Every check
// compares a solver result against an independent brute-force or closed-form
// reference from oracles.hpp.

#include <sstream>
#include <string>
#include <vector>

#include "rdars/oracles.hpp"

namespace rdars {

struct ValidationCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace validation_detail {

inline CVec cn_vector(Eigen::Index n, Rng& rng)
{
    CVec v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v[i] = complex_normal(rng);
    return v;
}

inline ChannelSet cn_channels(Eigen::Index M, Eigen::Index N, Rng& rng)
{
    ChannelSet ch;
    ch.G.resize(N, M);
    for (Eigen::Index j = 0; j < M; ++j)
        ch.G.col(j) = cn_vector(N, rng);
    ch.h_d = cn_vector(M, rng);
    ch.h_r = cn_vector(N, rng);
    ch.u_d = cn_vector(M, rng);
    ch.u_r = cn_vector(N, rng);
    ch.t_d = cn_vector(M, rng);
    ch.t_r = cn_vector(N, rng);
    return ch;
}

inline std::string ratio_text(double worst, int ok, int total)
{
    std::ostringstream o;
    o << ok << "/" << total << " instances, worst ratio " << worst;
    return o.str();
}

} // namespace validation_detail

inline std::vector<ValidationCheck> run_validation(std::uint64_t seed)
{
    using namespace validation_detail;
    std::vector<ValidationCheck> out;
    OptimizerOptions opts;
    opts.seed = seed;

    {
        Rng rng = make_rng(seed, {1});
        double worst = 0.0;
        for (int i = 0; i < 200; ++i) {
            const auto ch = cn_channels(1 + i % 4, 8, rng);
            const ModeSelection opt(8, {static_cast<Eigen::Index>(i % 8)});
            const auto dflt = ModeSelection::first(8, 1);
            const auto ph = PhaseProfile::random(8, rng);
            const auto g = gain_decomposition(ch, ph, opt, dflt, 2.0, 0.5);
            const double snr = uplink_snr(effective_uplink_channel(ch, opt, ph), 2.0, 0.5);
            const double sum = 4.0 * (g.reflection_gain + g.distribution_gain + g.selection_gain);
            worst = std::max(worst, std::abs(sum - snr) / snr);
        }
        std::ostringstream d;
        d << "max relative error " << worst;
        out.push_back({"gain decomposition identity", worst <= 1e-12, d.str()});
    }
    {
        Rng rng = make_rng(seed, {2});
        int ok = 0;
        double worst = 10.0;
        const int total = 10;
        for (int i = 0; i < total; ++i) {
            const auto ch = cn_channels(2, 5, rng);
            const auto sol = solve_p1(ch, 1, opts);
            const auto brute = oracle::brute_mode_search(ch, 1, 8);
            const double r = sol.objective / brute.objective;
            worst = std::min(worst, r);
            ok += r >= 0.98 ? 1 : 0;
        }
        out.push_back({"uplink solver vs brute force (N=5, a=1, 8 levels)", ok == total, ratio_text(worst, ok, total)});
    }
    {
        Rng rng = make_rng(seed, {3});
        int ok = 0;
        double worst = 10.0;
        const int total = 50;
        for (int i = 0; i < total; ++i) {
            const CVec u = cn_vector(4, rng), t = cn_vector(4, rng);
            const double gamma = (0.2 + 0.015 * i) * u.squaredNorm();
            const CVec f = qos_transmit_beam(u, t, 1.0, gamma, 1.0);
            const auto v = oracle::beam_value_dual(u, t, 1.0, gamma);
            const double r = std::norm(t.dot(f)) / *v;
            worst = std::min(worst, r);
            const bool feasible = comm_snr(u, f, 1.0) >= gamma * (1.0 - 1e-9) &&
                                  std::abs(f.squaredNorm() - 1.0) <= 1e-9;
            ok += (feasible && std::abs(r - 1.0) <= 1e-6) ? 1 : 0;
        }
        out.push_back({"QoS beamformer vs dual value", ok == total, ratio_text(worst, ok, total)});
    }
    {
        Rng rng = make_rng(seed, {4});
        int ok = 0;
        double worst = 10.0;
        const int total = 6;
        IsacProblem pr;
        pr.gamma_th = 10.0;
        for (int i = 0; i < total; ++i) {
            const auto ch = cn_channels(2, 4, rng);
            const auto brute = oracle::brute_isac_search(ch, 1, 8, pr);
            if (!brute.feasible) {
                ++ok;
                continue;
            }
            double got = 0.0;
            try {
                got = solve_p2(ch, 1, pr, opts).radar_snr;
            } catch (const Infeasible&) {
            }
            const double r = got / brute.radar_snr;
            worst = std::min(worst, r);
            ok += r >= 0.95 ? 1 : 0;
        }
        out.push_back({"ISAC solver vs brute force (N=4, a=1, 8 levels)", ok == total, ratio_text(worst, ok, total)});
    }
    return out;
}

} // namespace rdars
