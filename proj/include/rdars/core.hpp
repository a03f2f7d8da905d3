#pragma once

// Mode selection, phase profiles and the uplink effective-channel / SNR
// algebra of a surface whose elements either reflect (unit-modulus phase
// shift) or are wired to the BS as distributed antennas.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rdars/channel.hpp"

namespace rdars {

/// Which of the N elements operate in connection mode. Indices are kept
/// sorted, so the i-th connected index is the i-th row of A_a.
class ModeSelection {
public:
    ModeSelection() = default;

    ModeSelection(Eigen::Index n_total, std::vector<Eigen::Index> connected)
        : n_total_(n_total), connected_(std::move(connected))
    {
        if (n_total_ < 0)
            throw InvalidParameter("ModeSelection: negative element count");
        for (std::size_t i = 0; i < connected_.size(); ++i) {
            if (connected_[i] < 0 || connected_[i] >= n_total_)
                throw InvalidParameter("ModeSelection: index " + std::to_string(connected_[i]) +
                                       " out of range [0, " + std::to_string(n_total_) + ")");
            if (i > 0 && connected_[i] <= connected_[i - 1])
                throw InvalidParameter("ModeSelection: indices must be strictly increasing");
        }
        mask_.assign(static_cast<std::size_t>(n_total_), false);
        for (auto n : connected_)
            mask_[static_cast<std::size_t>(n)] = true;
    }

    /// Default reference modes: the first a elements connected.
    static ModeSelection first(Eigen::Index n_total, Eigen::Index a)
    {
        if (a < 0 || a > n_total)
            throw InvalidParameter("ModeSelection: a must lie in [0, N]");
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(a));
        for (Eigen::Index i = 0; i < a; ++i)
            idx[static_cast<std::size_t>(i)] = i;
        return {n_total, std::move(idx)};
    }

    Eigen::Index n_total() const { return n_total_; }
    Eigen::Index n_connected() const { return static_cast<Eigen::Index>(connected_.size()); }
    const std::vector<Eigen::Index>& connected() const { return connected_; }
    bool is_connected(Eigen::Index n) const { return mask_[static_cast<std::size_t>(n)]; }

    /// Diagonal of A.
    Eigen::VectorXd diagonal() const
    {
        Eigen::VectorXd d = Eigen::VectorXd::Zero(n_total_);
        for (auto n : connected_)
            d[n] = 1.0;
        return d;
    }

    /// A_a: a x N row selector.
    Eigen::MatrixXd selector() const
    {
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n_connected(), n_total_);
        for (Eigen::Index i = 0; i < n_connected(); ++i)
            s(i, connected_[static_cast<std::size_t>(i)]) = 1.0;
        return s;
    }

    /// Picks the connected entries of v in index order (A_a v).
    CVec gather(const CVec& v) const
    {
        CVec out(n_connected());
        for (Eigen::Index i = 0; i < n_connected(); ++i)
            out[i] = v[connected_[static_cast<std::size_t>(i)]];
        return out;
    }

    friend bool operator==(const ModeSelection& a, const ModeSelection& b)
    {
        return a.n_total_ == b.n_total_ && a.connected_ == b.connected_;
    }

private:
    Eigen::Index n_total_ = 0;
    std::vector<Eigen::Index> connected_;
    std::vector<bool> mask_;
};

class PhaseProfile {
public:
    static constexpr double kModulusTol = 1e-12;

    PhaseProfile() = default;

    explicit PhaseProfile(CVec theta) : theta_(std::move(theta))
    {
        for (Eigen::Index n = 0; n < theta_.size(); ++n)
            if (!(std::abs(std::abs(theta_[n]) - 1.0) <= kModulusTol))
                throw InvalidParameter("PhaseProfile: entry " + std::to_string(n) +
                                       " is not unit modulus");
    }

    static PhaseProfile ones(Eigen::Index n) { return PhaseProfile(CVec::Ones(n)); }

    static PhaseProfile from_angles(const Eigen::VectorXd& angles)
    {
        CVec t(angles.size());
        for (Eigen::Index n = 0; n < angles.size(); ++n)
            t[n] = std::polar(1.0, angles[n]);
        return PhaseProfile(std::move(t));
    }

    static PhaseProfile random(Eigen::Index n, Rng& rng)
    {
        CVec t(n);
        for (Eigen::Index i = 0; i < n; ++i)
            t[i] = std::polar(1.0, uniform_phase(rng));
        return PhaseProfile(std::move(t));
    }

    const CVec& theta() const { return theta_; }
    Eigen::Index size() const { return theta_.size(); }
    cd operator[](Eigen::Index n) const { return theta_[n]; }

private:
    CVec theta_;
};

struct UplinkEffectiveChannel {
    CVec h_b; // BS antennas, including the reflected paths
    CVec h_c; // connection-mode elements

    CVec stacked() const
    {
        CVec h(h_b.size() + h_c.size());
        h << h_b, h_c;
        return h;
    }
};

struct GainDecomposition {
    double reflection_gain = 0.0;
    double distribution_gain = 0.0;
    double selection_gain = 0.0;
    double total_snr = 0.0;
};

namespace detail {

inline void check_config(const ChannelSet& ch, const ModeSelection& mode, const PhaseProfile& phases)
{
    if (mode.n_total() != ch.elements())
        throw DimensionMismatch("mode selection covers " + std::to_string(mode.n_total()) +
                                " elements, channel has " + std::to_string(ch.elements()));
    if (phases.size() != ch.elements())
        throw DimensionMismatch("phase profile has " + std::to_string(phases.size()) +
                                " entries, channel has " + std::to_string(ch.elements()));
}

} // namespace detail

/// direct + G^H (I - A) diag(theta) via. Connected elements are skipped, so
/// their theta entries never influence the result.
inline CVec reflected_channel(const CVec& direct, const CMat& G, const CVec& via,
                              const ModeSelection& mode, const PhaseProfile& phases)
{
    CVec out = direct;
    for (Eigen::Index n = 0; n < G.rows(); ++n) {
        if (mode.is_connected(n))
            continue;
        out += (phases[n] * via[n]) * G.row(n).adjoint();
    }
    return out;
}

inline UplinkEffectiveChannel effective_uplink_channel(const ChannelSet& ch, const ModeSelection& mode,
                                                       const PhaseProfile& phases)
{
    ch.check_uplink();
    detail::check_config(ch, mode, phases);
    return {reflected_channel(ch.h_d, ch.G, ch.h_r, mode, phases), mode.gather(ch.h_r)};
}

inline void check_powers(double tx_power, double noise_power)
{
    if (!(noise_power > 0.0))
        throw InvalidParameter("noise power must be > 0");
    if (!(tx_power >= 0.0))
        throw InvalidParameter("transmit power must be >= 0");
}

/// MRC output SNR: (p / sigma^2) (|h_b|^2 + |h_c|^2), equal noise on BS and
/// connection-mode receivers.
inline double uplink_snr(const UplinkEffectiveChannel& eff, double tx_power, double noise_power)
{
    check_powers(tx_power, noise_power);
    return tx_power / noise_power * (eff.h_b.squaredNorm() + eff.h_c.squaredNorm());
}

inline CVec mrc_combiner(const UplinkEffectiveChannel& eff)
{
    const CVec h = eff.stacked();
    const double nrm = h.norm();
    if (!(nrm > 0.0))
        throw DegenerateChannel("MRC combiner undefined for a zero channel");
    return h / nrm;
}

/// Post-combining SNR of an arbitrary combiner v for the stacked channel.
inline double combined_snr(const UplinkEffectiveChannel& eff, const CVec& combiner, double tx_power,
                           double noise_power)
{
    check_powers(tx_power, noise_power);
    const CVec h = eff.stacked();
    if (combiner.size() != h.size())
        throw DimensionMismatch("combiner length differs from stacked channel length");
    const double vn = combiner.squaredNorm();
    if (!(vn > 0.0))
        throw DegenerateChannel("zero combiner");
    return tx_power * std::norm(combiner.dot(h)) / (noise_power * vn);
}

/// sum_n a_n |v_n|^2 for the given mode.
inline double selected_power(const CVec& v, const ModeSelection& mode)
{
    double s = 0.0;
    for (auto n : mode.connected())
        s += std::norm(v[n]);
    return s;
}

inline GainDecomposition gain_decomposition(const ChannelSet& ch, const PhaseProfile& phases_opt,
                                            const ModeSelection& mode_opt,
                                            const ModeSelection& mode_default, double tx_power,
                                            double noise_power)
{
    ch.check_uplink();
    detail::check_config(ch, mode_opt, phases_opt);
    if (mode_default.n_total() != mode_opt.n_total())
        throw DimensionMismatch("optimal and default mode selections differ in N");
    check_powers(tx_power, noise_power);

    GainDecomposition g;
    g.reflection_gain = reflected_channel(ch.h_d, ch.G, ch.h_r, mode_opt, phases_opt).squaredNorm();
    g.distribution_gain = selected_power(ch.h_r, mode_default);
    g.selection_gain = selected_power(ch.h_r, mode_opt) - g.distribution_gain;
    g.total_snr = tx_power / noise_power * (g.reflection_gain + g.distribution_gain + g.selection_gain);
    return g;
}

struct ApproxGains {
    double ris = 0.0; // full surface reflecting, no mask
    double das = 0.0;
    double selection = 0.0;
};

inline ApproxGains ris_approx_gains(const ChannelSet& ch, const PhaseProfile& phases_opt,
                                    const ModeSelection& mode_opt, const ModeSelection& mode_default)
{
    ch.check_uplink();
    detail::check_config(ch, mode_opt, phases_opt);
    if (mode_default.n_total() != mode_opt.n_total())
        throw DimensionMismatch("optimal and default mode selections differ in N");
    const ModeSelection none = ModeSelection::first(ch.elements(), 0);
    ApproxGains g;
    g.ris = reflected_channel(ch.h_d, ch.G, ch.h_r, none, phases_opt).squaredNorm();
    g.das = selected_power(ch.h_r, mode_default);
    g.selection = selected_power(ch.h_r, mode_opt) - g.das;
    return g;
}

} // namespace rdars
