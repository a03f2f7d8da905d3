#pragma once

// Downlink ISAC with a single user and a single point target. The BS and the
// connection-mode elements transmit one shared symbol through f = [f_b; f_r];
// only the BS antennas receive the echo (filter w).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "rdars/optimize_uplink.hpp"

namespace rdars {

struct IsacEffectiveChannels {
    CVec u;   // user, stacked [u_b; u_c], length M + a
    CVec t_b; // BS <-> target incl. reflected paths, length M
    CVec t_c; // connection-mode elements -> target, length a

    CVec t() const
    {
        CVec s(t_b.size() + t_c.size());
        s << t_b, t_c;
        return s;
    }
};

struct IsacBeamformer {
    CVec f_b; // BS antennas
    CVec f_r; // connection-mode elements
    CVec w;   // echo receive filter at the BS

    CVec f() const
    {
        CVec s(f_b.size() + f_r.size());
        s << f_b, f_r;
        return s;
    }

    static IsacBeamformer from_stacked(const CVec& f, Eigen::Index bs_antennas, CVec w)
    {
        return {f.head(bs_antennas), f.tail(f.size() - bs_antennas), std::move(w)};
    }
};

struct IsacSolution {
    PhaseProfile phases;
    ModeSelection mode;
    IsacBeamformer beamformer;
    double comm_snr = 0.0;
    double radar_snr = 0.0;
    std::vector<double> radar_trace; // radar SNR after each alternating pass
};

inline IsacEffectiveChannels isac_effective_channels(const ChannelSet& ch, const ModeSelection& mode,
                                                     const PhaseProfile& phases)
{
    ch.check_isac();
    detail::check_config(ch, mode, phases);
    const CVec u_b = reflected_channel(*ch.u_d, ch.G, *ch.u_r, mode, phases);
    const CVec u_c = mode.gather(*ch.u_r);
    IsacEffectiveChannels out;
    out.u.resize(u_b.size() + u_c.size());
    out.u << u_b, u_c;
    out.t_b = reflected_channel(*ch.t_d, ch.G, *ch.t_r, mode, phases);
    out.t_c = mode.gather(*ch.t_r);
    return out;
}

/// Distributed-antenna baseline: connection elements in `mode` plus the BS,
/// no reflection at all. The echo comes back over the direct link only.
inline IsacEffectiveChannels das_effective_channels(const ChannelSet& ch, const ModeSelection& mode)
{
    ch.check_isac();
    if (mode.n_total() != ch.elements())
        throw DimensionMismatch("mode selection does not match the channel");
    const CVec u_c = mode.gather(*ch.u_r);
    IsacEffectiveChannels out;
    out.u.resize(ch.u_d->size() + u_c.size());
    out.u << *ch.u_d, u_c;
    out.t_b = *ch.t_d;
    out.t_c = mode.gather(*ch.t_r);
    return out;
}

inline double comm_snr(const CVec& u, const CVec& f, double noise_power)
{
    if (!(noise_power > 0.0))
        throw InvalidParameter("noise power must be > 0");
    if (u.size() != f.size())
        throw DimensionMismatch("user channel and beamformer lengths differ");
    return std::norm(u.dot(f)) / noise_power;
}

/// |alpha|^2 |w^H t_b|^2 |t^H f|^2 / (sigma^2 |w|^2).
inline double radar_snr(const IsacEffectiveChannels& ch, const IsacBeamformer& bf, cd alpha, double noise_power)
{
    if (!(noise_power > 0.0))
        throw InvalidParameter("noise power must be > 0");
    if (bf.w.size() != ch.t_b.size() || bf.f_b.size() != ch.t_b.size() || bf.f_r.size() != ch.t_c.size())
        throw DimensionMismatch("beamformer dimensions do not match the effective channels");
    const double wn = bf.w.squaredNorm();
    if (!(wn > 0.0))
        throw DegenerateChannel("receive filter is zero");
    const double echo = std::norm(bf.w.dot(ch.t_b));
    const double illum = std::norm(ch.t_b.dot(bf.f_b) + ch.t_c.dot(bf.f_r));
    return std::norm(alpha) * echo * illum / (noise_power * wn);
}

/// MRC receive + MRT transmit: (p/sigma^2) |alpha|^2 (|t_b|^2 + |t_c|^2) |t_b|^2.
inline double radar_snr_mrc_mrt(const IsacEffectiveChannels& ch, double tx_power, cd alpha, double noise_power)
{
    check_powers(tx_power, noise_power);
    const double tb = ch.t_b.squaredNorm();
    if (!(tb > 0.0))
        throw DegenerateChannel("t_b is zero, MRC echo filter undefined");
    return tx_power / noise_power * std::norm(alpha) * (tb + ch.t_c.squaredNorm()) * tb;
}

/// Same quantity in the expanded form |t_b|^4 + sum_n a_n |[t_r]_n|^2 |t_b|^2.
inline double radar_snr_mrc_mrt_expanded(const ChannelSet& ch, const ModeSelection& mode,
                                         const PhaseProfile& phases, double tx_power, cd alpha,
                                         double noise_power)
{
    ch.check_isac();
    detail::check_config(ch, mode, phases);
    check_powers(tx_power, noise_power);
    const double tb = reflected_channel(*ch.t_d, ch.G, *ch.t_r, mode, phases).squaredNorm();
    if (!(tb > 0.0))
        throw DegenerateChannel("t_b is zero, MRC echo filter undefined");
    return tx_power / noise_power * std::norm(alpha) * (tb * tb + selected_power(*ch.t_r, mode) * tb);
}

namespace detail {

/// Maximizer of a unimodal function on [lo, hi].
template <typename F>
double golden_section_max(F&& fn, double lo, double hi, double tol = 1e-10)
{
    constexpr double inv_phi = 0.6180339887498948482;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = fn(x1), f2 = fn(x2);
    while (hi - lo > tol) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = fn(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = fn(x1);
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

/// Transmit beam maximizing |t^H f|^2 s.t. |u^H f|^2 >= gamma_th sigma^2 and
/// |f|^2 = p. The optimum lies in span{u, t}; with e1 = u/|u| and e2 the unit
/// part of t orthogonal to e1, f = sqrt(p) (cos b e^{j arg(e1^H t)} e1 + sin b e2)
/// and the objective (|tau1| cos b + tau2 sin b)^2 is unimodal in b, so the
/// constrained optimum is MRT when feasible and the QoS boundary otherwise.
inline CVec qos_transmit_beam(const CVec& u, const CVec& t, double tx_power, double gamma_th, double noise_power)
{
    if (!(noise_power > 0.0))
        throw InvalidParameter("noise power must be > 0");
    if (!(tx_power > 0.0))
        throw InvalidParameter("transmit power must be > 0");
    if (!(gamma_th >= 0.0))
        throw InvalidParameter("QoS threshold must be >= 0 (linear)");
    if (u.size() != t.size())
        throw DimensionMismatch("user and target channels differ in length");

    const double un = u.norm();
    const double best_comm = tx_power * un * un / noise_power;
    // Relative slack so a threshold of exactly p|u|^2/sigma^2 is not lost to rounding.
    if (best_comm < gamma_th * (1.0 - 1e-12) || (un == 0.0 && gamma_th > 0.0))
        throw Infeasible("QoS infeasible: max comm SNR " + std::to_string(best_comm) + " < threshold " +
                         std::to_string(gamma_th));

    const double sp = std::sqrt(tx_power);
    const double tn = t.norm();
    if (!(tn > 0.0)) {
        if (un == 0.0)
            throw DegenerateChannel("user and target channels are both zero");
        return sp * u / un;
    }
    const CVec mrt = sp * t / tn;
    if (comm_snr(u, mrt, noise_power) >= gamma_th)
        return mrt;

    const CVec e1 = u / un;
    const cd tau1 = e1.dot(t);
    CVec perp = t - tau1 * e1;
    const double tau2 = perp.norm();
    const cd rot = std::polar(1.0, std::arg(tau1));
    if (!(tau2 > 1e-14 * tn))
        return sp * rot * e1; // t colinear with u
    const CVec e2 = perp / tau2;

    // Largest angle toward e2 that still meets the QoS: cos^2 b = gamma_th sigma^2 / (p |u|^2).
    const double rho = std::clamp(gamma_th / best_comm, 0.0, 1.0);
    const double b_max = std::acos(std::sqrt(rho));
    const double b_free = std::atan2(tau2, std::abs(tau1));
    double b = std::min(b_max, b_free);
    CVec f = sp * (std::cos(b) * rot * e1 + std::sin(b) * e2);

    const bool ok = f.allFinite() && comm_snr(u, f, noise_power) >= gamma_th * (1.0 - 1e-12);
    if (!ok) {
        const double ta = std::abs(tau1);
        b = detail::golden_section_max([&](double x) { return ta * std::cos(x) + tau2 * std::sin(x); }, 0.0,
                                       b_max);
        f = sp * (std::cos(b) * rot * e1 + std::sin(b) * e2);
    }
    return f;
}

/// Beamformer for fixed (theta, A): QoS-constrained transmit beam, w = t_b.
inline IsacBeamformer optimize_beamformer_qos(const IsacEffectiveChannels& ch, double tx_power, double gamma_th,
                                              double noise_power)
{
    const CVec f = qos_transmit_beam(ch.u, ch.t(), tx_power, gamma_th, noise_power);
    return IsacBeamformer::from_stacked(f, ch.t_b.size(), ch.t_b);
}

struct IsacProblem {
    double tx_power = 1.0;
    double gamma_th = 0.0; // linear
    cd alpha{1.0, 0.0};
    double noise_power = 1.0;

    void validate() const
    {
        check_powers(tx_power, noise_power);
        if (!(tx_power > 0.0))
            throw InvalidParameter("transmit power must be > 0");
        if (!(gamma_th >= 0.0))
            throw InvalidParameter("QoS threshold must be >= 0 (linear)");
    }
};

/// Radar SNR achieved by the QoS beamformer with w = t_b; nullopt when the QoS
/// cannot be met or the echo channel vanishes.
inline std::optional<IsacSolution> evaluate_isac_config(const IsacEffectiveChannels& eff, const IsacProblem& pr)
{
    if (!(eff.t_b.squaredNorm() > 0.0))
        return std::nullopt;
    try {
        IsacSolution s;
        s.beamformer = optimize_beamformer_qos(eff, pr.tx_power, pr.gamma_th, pr.noise_power);
        s.comm_snr = comm_snr(eff.u, s.beamformer.f(), pr.noise_power);
        s.radar_snr = radar_snr(eff, s.beamformer, pr.alpha, pr.noise_power);
        return s;
    } catch (const Infeasible&) {
        return std::nullopt;
    }
}

namespace detail {

/// max |t^H f|^2 over |f|^2 = p, |u^H f|^2 >= c from the Gram quantities
/// |u|^2, |t|^2, |u^H t|^2 (same closed form as qos_transmit_beam). Negative
/// when the QoS cannot be met.
inline double qos_beam_value(double uu, double tt, double ut2, double p, double c)
{
    if (p * uu < c * (1.0 - 1e-12) || (uu == 0.0 && c > 0.0))
        return -1.0;
    if (!(tt > 0.0))
        return 0.0;
    if (p * ut2 >= c * tt)
        return p * tt;
    const double t1sq = ut2 / uu;
    const double tau1 = std::sqrt(t1sq), tau2 = std::sqrt(std::max(tt - t1sq, 0.0));
    const double cb2 = std::clamp(c / (p * uu), 0.0, 1.0);
    const double v = tau1 * std::sqrt(cb2) + tau2 * std::sqrt(1.0 - cb2);
    return p * v * v;
}

/// Per-element coordinate ascent on the radar SNR itself, with the transmit
/// beam at its QoS optimum for every candidate theta_n and w = t_b. For a
/// single element |t_b|^2, |u_b|^2 and u^H t are affine in (theta_n, conj(theta_n)),
/// so a candidate costs O(1); theta_n is chosen by a phase grid followed by a
/// golden-section refinement around the best grid point. Moves are accepted only
/// when they improve, so the returned trace (one value per sweep, start value
/// first) never decreases. Infeasible configurations score -1.
class IsacPhaseAscent {
public:
    static constexpr int kGrid = 16;

    IsacPhaseAscent(const ChannelSet& ch, const ModeSelection& mode, const IsacProblem& pr)
        : ch_(ch), mode_(mode), p_(pr.tx_power), c_(pr.gamma_th * pr.noise_power),
          scale_(std::norm(pr.alpha) / pr.noise_power)
    {
        const Eigen::Index N = ch.elements();
        gt_.resize(ch.bs_antennas(), N);
        gu_.resize(ch.bs_antennas(), N);
        for (Eigen::Index n = 0; n < N; ++n) {
            gt_.col(n) = (*ch.t_r)[n] * ch.G.row(n).adjoint();
            gu_.col(n) = (*ch.u_r)[n] * ch.G.row(n).adjoint();
        }
        const CVec t_c = mode.gather(*ch.t_r), u_c = mode.gather(*ch.u_r);
        tc2_ = t_c.squaredNorm();
        uc2_ = u_c.squaredNorm();
        uct_ = u_c.dot(t_c);
    }

    double value(const CVec& t_b, const CVec& u_b) const
    {
        const double tb2 = t_b.squaredNorm();
        return score(tb2, u_b.squaredNorm(), u_b.dot(t_b) + uct_);
    }

    /// True when MRT on t meets the QoS at theta, i.e. the constraint is inactive.
    bool mrt_feasible(const CVec& theta) const
    {
        CVec t_b, u_b;
        rebuild(theta, t_b, u_b);
        const double tt = t_b.squaredNorm() + tc2_;
        return tt > 0.0 && p_ * std::norm(u_b.dot(t_b) + uct_) >= c_ * tt;
    }

    std::vector<double> ascend(CVec& theta, int max_sweeps, double tol) const
    {
        std::vector<double> trace;
        CVec t_b, u_b;
        rebuild(theta, t_b, u_b);
        trace.push_back(value(t_b, u_b));
        for (int sweep = 0; sweep < max_sweeps; ++sweep) {
            double cur = trace.back();
            for (Eigen::Index n = 0; n < theta.size(); ++n) {
                if (mode_.is_connected(n))
                    continue;
                const auto gt = gt_.col(n), gu = gu_.col(n);
                const CVec tr = t_b - theta[n] * gt, ur = u_b - theta[n] * gu;
                const double t0 = tr.squaredNorm() + gt.squaredNorm(), u0 = ur.squaredNorm() + gu.squaredNorm();
                const cd xt = tr.dot(gt), xu = ur.dot(gu);
                const cd k0 = ur.dot(tr) + gu.dot(gt) + uct_, k1 = ur.dot(gt), k2 = gu.dot(tr);
                auto at = [&](double phi) {
                    const cd th = std::polar(1.0, phi);
                    return score(t0 + 2.0 * std::real(th * xt), u0 + 2.0 * std::real(th * xu),
                                 k0 + th * k1 + std::conj(th) * k2);
                };
                const double phi0 = std::arg(theta[n]);
                double best_phi = phi0, best = at(phi0);
                for (int k = 1; k < kGrid; ++k) {
                    const double phi = phi0 + 2.0 * std::numbers::pi * k / kGrid;
                    const double v = at(phi);
                    if (v > best) {
                        best = v;
                        best_phi = phi;
                    }
                }
                const double h = 2.0 * std::numbers::pi / kGrid;
                const double ref = golden_section_max(at, best_phi - h, best_phi + h, 1e-9);
                if (const double v = at(ref); v > best) {
                    best = v;
                    best_phi = ref;
                }
                if (best > cur) {
                    theta[n] = std::polar(1.0, best_phi);
                    t_b = tr + theta[n] * gt;
                    u_b = ur + theta[n] * gu;
                    cur = best;
                }
            }
            rebuild(theta, t_b, u_b);
            const double prev = trace.back();
            const double now = value(t_b, u_b);
            trace.push_back(now);
            if (now - prev <= tol * std::abs(now))
                break;
        }
        return trace;
    }

private:
    double score(double tb2, double ub2, cd ut) const
    {
        const double v = qos_beam_value(ub2 + uc2_, tb2 + tc2_, std::norm(ut), p_, c_);
        return v < 0.0 ? -1.0 : scale_ * tb2 * v;
    }

    void rebuild(const CVec& theta, CVec& t_b, CVec& u_b) const
    {
        t_b = *ch_.t_d;
        u_b = *ch_.u_d;
        for (Eigen::Index n = 0; n < theta.size(); ++n) {
            if (mode_.is_connected(n))
                continue;
            t_b += theta[n] * gt_.col(n);
            u_b += theta[n] * gu_.col(n);
        }
    }

    const ChannelSet& ch_;
    const ModeSelection& mode_;
    double p_, c_, scale_;
    CMat gt_, gu_;
    double tc2_ = 0.0, uc2_ = 0.0;
    cd uct_{};
};

struct IsacCandidate {
    IsacSolution sol;
    bool feasible = false;
};

inline bool better_isac(const IsacSolution& s, const IsacCandidate& inc)
{
    if (!inc.feasible || s.radar_snr > inc.sol.radar_snr)
        return true;
    return s.radar_snr == inc.sol.radar_snr && s.mode.connected() < inc.sol.mode.connected();
}

inline std::optional<IsacSolution> optimize_isac_for_mode(const ChannelSet& ch, const ModeSelection& mode,
                                                          const IsacProblem& pr, const OptimizerOptions& opts,
                                                          const PhaseProblem& radar_phases,
                                                          const PhaseProblem& comm_phases)
{
    const IsacPhaseAscent joint(ch, mode, pr);
    IsacCandidate best;
    bool best_unconstrained = false;

    auto finish = [&](CVec theta, std::vector<double> trace, bool unconstrained) {
        const PhaseProfile phases(std::move(theta));
        auto s = evaluate_isac_config(isac_effective_channels(ch, mode, phases), pr);
        if (!s)
            return;
        s->phases = phases;
        s->mode = mode;
        s->radar_trace = std::move(trace);
        if (!best.feasible || s->radar_snr > best.sol.radar_snr) {
            best.sol = std::move(*s);
            best.feasible = true;
            best_unconstrained = unconstrained;
        }
    };
    // With MRT feasible at a stationary point of |t_b|^2 the radar SNR is
    // increasing in |t_b|^2 there, so no single-element move can improve it
    // and the joint sweep is skipped.
    auto run = [&](CVec theta) {
        if (joint.mrt_feasible(theta)) {
            CVec copy = theta;
            finish(std::move(theta), joint.ascend(copy, 0, opts.convergence_tol), true);
        } else {
            auto trace = joint.ascend(theta, opts.max_iterations, opts.convergence_tol);
            finish(std::move(theta), std::move(trace), false);
        }
    };

    Rng rng = make_rng(opts.seed, {subset_key(mode.connected()), 0x15acULL});
    for (int start = 0; start < opts.n_random_starts; ++start) {
        CVec theta = start == 0 ? radar_phases.aligned_start() : PhaseProfile::random(ch.elements(), rng).theta();
        radar_phases.ascend(mode, theta, opts.max_iterations, opts.convergence_tol);
        run(std::move(theta));
    }
    // Communication-oriented start, needed when the QoS binds or fails at the radar optima.
    if (!best.feasible || !best_unconstrained) {
        CVec theta = comm_phases.aligned_start();
        comm_phases.ascend(mode, theta, opts.max_iterations, opts.convergence_tol);
        run(std::move(theta));
    }
    if (!best.feasible)
        return std::nullopt;
    return std::move(best.sol);
}

} // namespace detail

/// Phase optimization for a fixed mode selection. Starts (the co-phased
/// warm start and n_random_starts - 1 random draws) are pushed to a
/// stationary point of |t_b|^2 by the closed-form uplink ascent, then refined
/// by coordinate ascent on the radar SNR with the QoS beamformer re-solved for
/// every candidate phase. When the QoS binds or fails at every radar start, a
/// start maximizing |u_b|^2 is added. Returns the best feasible start with its
/// beamformer (w = t_b).
inline std::optional<IsacSolution> optimize_isac_for_mode(const ChannelSet& ch, const ModeSelection& mode,
                                                          const IsacProblem& pr, const OptimizerOptions& opts)
{
    ch.check_isac();
    return detail::optimize_isac_for_mode(ch, mode, pr, opts, PhaseProblem(*ch.t_d, ch.G, *ch.t_r),
                                          PhaseProblem(*ch.u_d, ch.G, *ch.u_r));
}

namespace detail {

// Upper bound on the radar SNR of any (theta, f) for the mode.
inline double radar_bound(const PhaseProblem& radar_phases, const ChannelSet& ch, const ModeSelection& mode,
                          const IsacProblem& pr)
{
    const double tb = radar_phases.reflected_power_bound(mode);
    return std::norm(pr.alpha) * tb * pr.tx_power * (tb + selected_power(*ch.t_r, mode)) / pr.noise_power;
}

} // namespace detail

/// Alternating solver over (A, theta, f, w). Mode search follows
/// opts.mode_search with the same cap rule as the uplink solver; the mode
/// objective is the radar SNR of optimize_isac_for_mode.
inline IsacSolution solve_p2(const ChannelSet& ch, Eigen::Index a, const IsacProblem& pr, const OptimizerOptions& opts)
{
    opts.validate();
    pr.validate();
    ch.check_isac();
    detail::check_a(ch, a);
    const Eigen::Index N = ch.elements();
    const PhaseProblem radar_phases(*ch.t_d, ch.G, *ch.t_r);
    const PhaseProblem comm_phases(*ch.u_d, ch.G, *ch.u_r);

    detail::IsacCandidate best;
    auto evaluate = [&](const std::vector<Eigen::Index>& idx, double bar) -> std::optional<IsacSolution> {
        const ModeSelection mode(N, idx);
        if (bar >= 0.0 && detail::radar_bound(radar_phases, ch, mode, pr) < bar)
            return std::nullopt;
        return detail::optimize_isac_for_mode(ch, mode, pr, opts, radar_phases, comm_phases);
    };

    const auto start = detail::top_indices(*ch.t_r, a);
    if (auto s = evaluate(start, -1.0)) {
        best.sol = std::move(*s);
        best.feasible = true;
    }

    const auto count = detail::binomial(static_cast<std::uint64_t>(N), static_cast<std::uint64_t>(a));
    if (opts.mode_search == ModeSearch::exhaustive && count <= opts.exhaustive_cap) {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(a));
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        do {
            if (idx == start)
                continue;
            auto s = evaluate(idx, best.feasible ? best.sol.radar_snr : -1.0);
            if (s && detail::better_isac(*s, best)) {
                best.sol = std::move(*s);
                best.feasible = true;
            }
        } while (detail::next_combination(idx, N));
    } else {
        for (int swap = 0; swap < opts.greedy_max_swaps; ++swap) {
            const auto current = best.feasible ? best.sol.mode.connected() : start;
            const ModeSelection cur_mode(N, current);
            std::optional<IsacSolution> step;
            const double floor = best.feasible ? best.sol.radar_snr * (1.0 + 1e-12) : -1.0;
            for (std::size_t i = 0; i < current.size(); ++i) {
                for (Eigen::Index j = 0; j < N; ++j) {
                    if (cur_mode.is_connected(j))
                        continue;
                    auto idx = current;
                    idx[i] = j;
                    std::sort(idx.begin(), idx.end());
                    const double bar = step ? std::max(step->radar_snr, floor) : floor;
                    auto s = evaluate(idx, bar);
                    if (!s || s->radar_snr <= floor)
                        continue;
                    if (!step || s->radar_snr > step->radar_snr ||
                        (s->radar_snr == step->radar_snr && s->mode.connected() < step->mode.connected()))
                        step = std::move(s);
                }
            }
            if (!step)
                break;
            best.sol = std::move(*step);
            best.feasible = true;
        }
    }

    if (!best.feasible)
        throw Infeasible("no feasible (mode, phase) configuration meets the QoS threshold");
    return std::move(best.sol);
}

} // namespace rdars
