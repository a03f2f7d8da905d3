#pragma once

// Brute-force references for small instances. These evaluate objectives
// through the plain effective-channel formulas and never call the
// optimizers they are used to check.

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "rdars/isac.hpp"

namespace rdars::oracle {

inline constexpr double kPhaseGridBits = 24.0;
inline constexpr std::uint64_t kModeCap = 10000;

struct PhaseGridResult {
    PhaseProfile phases;
    double objective = 0.0; // |h_b|^2 + |h_c|^2
};

namespace detail {

// Odometer over levels^(#reflecting) phase assignments, first reflecting index fastest.
class PhaseOdometer {
public:
    PhaseOdometer(const ModeSelection& mode, int levels) : levels_(levels)
    {
        for (Eigen::Index n = 0; n < mode.n_total(); ++n)
            if (!mode.is_connected(n))
                slots_.push_back(n);
        digits_.assign(slots_.size(), 0);
        theta_ = CVec::Ones(mode.n_total());
        for (int k = 0; k < levels; ++k)
            table_.push_back(std::polar(1.0, 2.0 * std::numbers::pi * k / levels));
    }

    const CVec& theta() const { return theta_; }
    // Number of leading slots touched by the last next(); 1 means only the fastest digit moved.
    std::size_t changed() const { return changed_; }
    Eigen::Index slot(std::size_t i) const { return slots_[i]; }

    bool next()
    {
        for (std::size_t i = 0; i < slots_.size(); ++i) {
            if (++digits_[i] < levels_) {
                theta_[slots_[i]] = table_[static_cast<std::size_t>(digits_[i])];
                changed_ = i + 1;
                return true;
            }
            digits_[i] = 0;
            theta_[slots_[i]] = table_[0];
        }
        return false;
    }

private:
    int levels_;
    std::vector<Eigen::Index> slots_;
    std::vector<int> digits_;
    std::vector<cd> table_;
    CVec theta_;
    std::size_t changed_ = 0;
};

inline void check_phase_cap(Eigen::Index reflecting, int levels)
{
    if (levels < 1)
        throw InvalidParameter("phase grid needs at least one level");
    const double bits = static_cast<double>(reflecting) * std::log2(static_cast<double>(levels));
    if (bits > kPhaseGridBits)
        throw SearchCapExceeded("phase grid of " + std::to_string(levels) + "^" + std::to_string(reflecting) +
                                " points exceeds the 2^24 cap");
}

inline void check_mode_cap(Eigen::Index N, Eigen::Index a)
{
    if (a < 0 || a > N)
        throw InvalidParameter("a must lie in [0, N]");
    if (rdars::detail::binomial(static_cast<std::uint64_t>(N), static_cast<std::uint64_t>(a)) > kModeCap)
        throw SearchCapExceeded("mode enumeration exceeds the C(N, a) <= 10^4 cap");
}

} // namespace detail

/// Exhaustive search over theta_n in {exp(j 2 pi k / levels)} for every
/// reflecting element. Connected elements keep theta_n = 1.
inline PhaseGridResult brute_phase_grid(const ChannelSet& ch, const ModeSelection& mode, int levels)
{
    ch.check_uplink();
    detail::check_phase_cap(mode.n_total() - mode.n_connected(), levels);
    if (mode.n_total() != ch.elements())
        throw DimensionMismatch("mode selection does not match the channel");
    // Dense G^H (I - A) diag(h_r) and |A_a h_r|^2, fixed for the whole grid.
    const Eigen::VectorXd keep = Eigen::VectorXd::Ones(mode.n_total()) - mode.diagonal();
    const CMat B = ch.G.adjoint() * keep.cast<cd>().asDiagonal() * ch.h_r.asDiagonal();
    const double hc = (mode.selector().cast<cd>() * ch.h_r).squaredNorm();
    detail::PhaseOdometer odo(mode, levels);
    CVec best_theta = odo.theta();
    CVec sum = ch.h_d + B * odo.theta();
    CVec prev_first = odo.theta();
    double best = sum.squaredNorm() + hc;
    while (odo.next()) {
        if (odo.changed() == 1) {
            const Eigen::Index n = odo.slot(0);
            sum += B.col(n) * (odo.theta()[n] - prev_first[n]);
            prev_first[n] = odo.theta()[n];
        } else {
            sum = ch.h_d + B * odo.theta();
            prev_first = odo.theta();
        }
        const double v = sum.squaredNorm() + hc;
        if (v > best) {
            best = v;
            best_theta = odo.theta();
        }
    }
    return {PhaseProfile(best_theta), (ch.h_d + B * best_theta).squaredNorm() + hc};
}

struct ModeSearchResult {
    ModeSelection mode;
    PhaseProfile phases;
    double objective = 0.0;
};

/// Joint enumeration: all cardinality-a subsets times the phase grid.
inline ModeSearchResult brute_mode_search(const ChannelSet& ch, Eigen::Index a, int levels)
{
    ch.check_uplink();
    const Eigen::Index N = ch.elements();
    detail::check_mode_cap(N, a);
    detail::check_phase_cap(N - a, levels);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(a));
    for (Eigen::Index i = 0; i < a; ++i)
        idx[static_cast<std::size_t>(i)] = i;
    std::optional<ModeSearchResult> best;
    do {
        ModeSelection mode(N, idx);
        auto r = brute_phase_grid(ch, mode, levels);
        if (!best || r.objective > best->objective)
            best = ModeSearchResult{std::move(mode), std::move(r.phases), r.objective};
    } while (rdars::detail::next_combination(idx, N));
    return std::move(*best);
}

/// Per-instance slack between a levels-point phase grid and continuous phases:
/// 2 (1 - cos(pi / levels)) (|h_d| + sum_n |g_n|)^2 over reflecting n, where
/// g_n is the n-th cascaded term.
inline double quantization_bound(const ChannelSet& ch, const ModeSelection& mode, int levels)
{
    double amp = ch.h_d.norm();
    for (Eigen::Index n = 0; n < ch.elements(); ++n)
        if (!mode.is_connected(n))
            amp += std::abs(ch.h_r[n]) * ch.G.row(n).norm();
    return 2.0 * (1.0 - std::cos(std::numbers::pi / levels)) * amp * amp;
}

struct BeamGridResult {
    bool feasible = false;
    CVec f;
    double objective = 0.0; // |t^H f|^2
};

/// Grid over f = sqrt(p) (cos b e^{j phi} e1 + sin b e2), b in [0, pi/2]
/// (inclusive, n_beta points), phi in [0, 2pi) (n_phi points), with e1 = u/|u|
/// and e2 the normalized component of t orthogonal to u.
inline BeamGridResult brute_beamformer_grid(const CVec& u, const CVec& t, double tx_power, double gamma_th,
                                            double noise_power, int n_beta, int n_phi)
{
    if (n_beta < 100 || n_phi < 100)
        throw InvalidParameter("beamformer grid needs at least 100 points per axis");
    if (!(noise_power > 0.0) || !(tx_power > 0.0))
        throw InvalidParameter("powers must be positive");
    const double un = u.norm();
    BeamGridResult res;
    if (!(un > 0.0))
        return res;
    const CVec e1 = u / un;
    CVec perp = t - e1.dot(t) * e1;
    CVec e2;
    if (perp.norm() > 1e-14 * t.norm()) {
        e2 = perp / perp.norm();
    } else {
        // t colinear with u: any unit vector orthogonal to e1.
        e2 = CVec::Zero(u.size());
        for (Eigen::Index k = 0; k < u.size() && e2.norm() == 0.0; ++k) {
            CVec ek = CVec::Zero(u.size());
            ek[k] = 1.0;
            CVec r = ek - e1.dot(ek) * e1;
            if (r.norm() > 1e-8)
                e2 = r / r.norm();
        }
    }
    const double sp = std::sqrt(tx_power);
    const cd ue1 = u.dot(e1), ue2 = u.dot(e2), te1 = t.dot(e1), te2 = t.dot(e2);
    for (int ib = 0; ib < n_beta; ++ib) {
        const double b = 0.5 * std::numbers::pi * ib / (n_beta - 1);
        const double cb = std::cos(b), sb = std::sin(b);
        for (int ip = 0; ip < n_phi; ++ip) {
            const cd rot = std::polar(1.0, 2.0 * std::numbers::pi * ip / n_phi);
            const cd uf = sp * (cb * rot * ue1 + sb * ue2);
            if (std::norm(uf) / noise_power < gamma_th)
                continue;
            const double obj = std::norm(sp * (cb * rot * te1 + sb * te2));
            if (!res.feasible || obj > res.objective) {
                res.feasible = true;
                res.objective = obj;
                res.f = sp * (cb * rot * e1 + sb * e2);
            }
        }
    }
    return res;
}

/// max |t^H f|^2 s.t. |u^H f|^2 >= c, |f|^2 = p through the Lagrange dual
/// min_{lambda >= 0} p lambda_max(t t^H + lambda u u^H) - lambda c
/// (tight for this two-constraint complex QCQP). Returns nullopt when infeasible.
inline std::optional<double> beam_value_dual(const CVec& u, const CVec& t, double tx_power, double c)
{
    const double uu = u.squaredNorm(), tt = t.squaredNorm();
    const double ut2 = std::norm(u.dot(t));
    if (tx_power * uu < c)
        return std::nullopt;
    auto dual = [&](double lam) {
        const double a = tt, d = lam * uu;
        const double lmax = 0.5 * (a + d) + std::sqrt(0.25 * (a - d) * (a - d) + lam * ut2);
        return tx_power * lmax - lam * c;
    };
    // MRT satisfies the constraint: the constraint is inactive.
    if (tt > 0.0 && tx_power * ut2 / tt >= c)
        return tx_power * tt;
    double hi = 1.0;
    while (dual(2.0 * hi) < dual(hi) && hi < 1e300)
        hi *= 2.0;
    hi *= 2.0;
    const double lam = rdars::detail::golden_section_max([&](double x) { return -dual(x); }, 0.0, hi,
                                                          1e-12 * hi);
    return dual(lam);
}

struct IsacSearchResult {
    bool feasible = false;
    ModeSelection mode;
    PhaseProfile phases;
    double radar_snr = 0.0;
};

/// Joint discretized search for the ISAC problem: subsets x phase grid, with the
/// transmit beam valued by the dual route and w = t_b. Configurations whose
/// bound |alpha|^2 |t_b|^2 p |t|^2 / sigma^2 cannot beat the incumbent are skipped.
inline IsacSearchResult brute_isac_search(const ChannelSet& ch, Eigen::Index a, int levels, const IsacProblem& pr)
{
    ch.check_isac();
    const Eigen::Index N = ch.elements();
    detail::check_mode_cap(N, a);
    detail::check_phase_cap(N - a, levels);
    const double scale = std::norm(pr.alpha) / pr.noise_power;
    const double c = pr.gamma_th * pr.noise_power;
    IsacSearchResult best;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(a));
    for (Eigen::Index i = 0; i < a; ++i)
        idx[static_cast<std::size_t>(i)] = i;
    do {
        const ModeSelection mode(N, idx);
        const Eigen::VectorXd keep = Eigen::VectorXd::Ones(N) - mode.diagonal();
        const Eigen::MatrixXd sel = mode.selector();
        const CVec t_c = sel.cast<cd>() * *ch.t_r;
        const CVec u_c = sel.cast<cd>() * *ch.u_r;
        const CMat GhK = ch.G.adjoint() * keep.cast<cd>().asDiagonal();
        detail::PhaseOdometer odo(mode, levels);
        do {
            const CVec& th = odo.theta();
            const CVec t_b = *ch.t_d + GhK * th.cwiseProduct(*ch.t_r);
            const double tb = t_b.squaredNorm();
            const double tt = tb + t_c.squaredNorm();
            const double bound = scale * tb * pr.tx_power * tt;
            if (best.feasible && bound <= best.radar_snr)
                continue;
            const CVec u_b = *ch.u_d + GhK * th.cwiseProduct(*ch.u_r);
            CVec u(u_b.size() + u_c.size()), t(t_b.size() + t_c.size());
            u << u_b, u_c;
            t << t_b, t_c;
            const auto v = beam_value_dual(u, t, pr.tx_power, c);
            if (!v)
                continue;
            const double snr = scale * tb * *v;
            if (!best.feasible || snr > best.radar_snr) {
                best.feasible = true;
                best.mode = mode;
                best.phases = PhaseProfile(th);
                best.radar_snr = snr;
            }
        } while (odo.next());
    } while (rdars::detail::next_combination(idx, N));
    return best;
}

} // namespace rdars::oracle
