#pragma once

// Random channel realizations for the uplink and ISAC scenarios:
// distance-based path loss, Rician/Rayleigh small-scale fading and ULA
// steering vectors for the line-of-sight component.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

#include "rdars/errors.hpp"
#include "rdars/random.hpp"

namespace rdars {

using cd = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

using Position = std::array<double, 3>;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

inline double distance(const Position& a, const Position& b)
{
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

struct Geometry {
    Position bs_position{0.0, 0.0, 10.0};
    Position rdars_position{50.0, 0.0, 10.0};
    Position user_position{45.0, 5.0, 1.5};
    std::optional<Position> target_position{};

    // Array axes of the two ULAs. The BS array lies along y, the surface along x.
    Position bs_axis{0.0, 1.0, 0.0};
    Position rdars_axis{1.0, 0.0, 0.0};
};

enum class Link { bs_rdars, user_rdars, user_bs, target_rdars, target_bs };
inline constexpr std::size_t kLinkCount = 5;

inline constexpr std::string_view link_name(Link l)
{
    switch (l) {
    case Link::bs_rdars: return "bs_rdars";
    case Link::user_rdars: return "user_rdars";
    case Link::user_bs: return "user_bs";
    case Link::target_rdars: return "target_rdars";
    case Link::target_bs: return "target_bs";
    }
    return "?";
}

inline std::optional<Link> link_from_name(std::string_view s)
{
    for (std::size_t i = 0; i < kLinkCount; ++i)
        if (link_name(static_cast<Link>(i)) == s)
            return static_cast<Link>(i);
    return std::nullopt;
}

struct FadingParams {
    double pathloss_ref_gain = 1e-3; // -30 dB
    double pathloss_ref_distance = 1.0;
    std::array<double, kLinkCount> exponent{2.2, 2.5, 3.5, 2.5, 3.5};
    std::array<double, kLinkCount> rician_k{10.0, 0.0, 0.0, 0.0, 0.0}; // linear; 10 dB on bs_rdars

    double exponent_of(Link l) const { return exponent[static_cast<std::size_t>(l)]; }
    double k_factor_of(Link l) const { return rician_k[static_cast<std::size_t>(l)]; }

    void validate() const
    {
        if (!(pathloss_ref_gain > 0.0))
            throw InvalidParameter("pathloss_ref_gain must be > 0");
        if (!(pathloss_ref_distance > 0.0))
            throw InvalidParameter("pathloss_ref_distance must be > 0");
        for (std::size_t i = 0; i < kLinkCount; ++i) {
            const auto name = std::string(link_name(static_cast<Link>(i)));
            if (!(exponent[i] >= 0.0))
                throw InvalidParameter("path-loss exponent of " + name + " must be >= 0");
            if (!(rician_k[i] >= 0.0))
                throw InvalidParameter("Rician K-factor of " + name + " must be >= 0");
        }
    }
};

/// Channel realization. The uplink fields (h_d, h_r) and the ISAC fields
/// (u_d, u_r, t_d, t_r) are alternatives; G is shared.
struct ChannelSet {
    CVec h_d; // user -> BS, length M
    CVec h_r; // user -> surface, length N
    CMat G;   // N x M, BS <-> surface
    std::optional<CVec> u_d, u_r, t_d, t_r;

    Eigen::Index bs_antennas() const { return G.cols(); }
    Eigen::Index elements() const { return G.rows(); }
    bool has_isac() const { return u_d.has_value(); }

    void check_uplink() const
    {
        if (h_d.size() != G.cols() || h_r.size() != G.rows())
            throw DimensionMismatch("uplink channel dimensions inconsistent with G");
    }

    void check_isac() const
    {
        const bool any = u_d || u_r || t_d || t_r;
        const bool all = u_d && u_r && t_d && t_r;
        if (!all)
            throw InvalidConfig(any ? "ISAC channels partially populated" : "ISAC channels missing");
        if (u_d->size() != G.cols() || t_d->size() != G.cols() || u_r->size() != G.rows() ||
            t_r->size() != G.rows())
            throw DimensionMismatch("ISAC channel dimensions inconsistent with G");
    }

    /// Scales every user/target link by c; G is left untouched, so every
    /// effective channel scales by c as well.
    ChannelSet scaled_terminal_links(double c) const
    {
        ChannelSet out = *this;
        out.h_d *= c;
        out.h_r *= c;
        for (auto* v : {&out.u_d, &out.u_r, &out.t_d, &out.t_r})
            if (*v)
                **v *= c;
        return out;
    }
};

inline double path_loss(double dist, const FadingParams& params, Link link)
{
    if (!(dist > 0.0) || !std::isfinite(dist))
        throw InvalidGeometry("distance on link " + std::string(link_name(link)) +
                              " must be positive, got " + std::to_string(dist));
    return params.pathloss_ref_gain *
           std::pow(dist / params.pathloss_ref_distance, -params.exponent_of(link));
}

/// Entry k = exp(j 2pi spacing k sin(angle)).
inline CVec steering_vector(Eigen::Index n_elements, double angle, double spacing_wavelengths = 0.5)
{
    CVec v(n_elements);
    const double step = 2.0 * std::numbers::pi * spacing_wavelengths * std::sin(angle);
    for (Eigen::Index k = 0; k < n_elements; ++k)
        v[k] = std::polar(1.0, step * static_cast<double>(k));
    return v;
}

/// sqrt(P) (sqrt(K/(K+1)) mean + sqrt(1/(K+1)) w), w ~ CN(0, 1) i.i.d.
/// The mean component determines the shape of the output.
inline CMat sample_fading(const CMat& mean_component, double k_factor, double avg_power, Rng& rng)
{
    if (!(avg_power >= 0.0))
        throw InvalidParameter("average power must be >= 0");
    if (!(k_factor >= 0.0))
        throw InvalidParameter("K-factor must be >= 0");
    const double los = std::sqrt(k_factor / (k_factor + 1.0));
    const double nlos = std::sqrt(1.0 / (k_factor + 1.0));
    const double amp = std::sqrt(avg_power);
    CMat out(mean_component.rows(), mean_component.cols());
    // Column-major fill order; all draws are consumed even when avg_power is 0
    // so the stream position does not depend on the power.
    for (Eigen::Index c = 0; c < out.cols(); ++c)
        for (Eigen::Index r = 0; r < out.rows(); ++r) {
            const cd w = complex_normal(rng);
            out(r, c) = amp * (los * mean_component(r, c) + nlos * w);
        }
    return out;
}

namespace detail {

// Angle between the array broadside and the direction from `from` to `to`,
// measured so that sin(angle) is the projection on the array axis.
inline double array_angle(const Position& from, const Position& to, const Position& axis)
{
    const double d = distance(from, to);
    const double an = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    double proj = 0.0;
    for (int i = 0; i < 3; ++i)
        proj += (to[i] - from[i]) * axis[i];
    proj /= d * an;
    return std::asin(std::clamp(proj, -1.0, 1.0));
}

inline CVec link_vector(const Position& node, const Position& array_pos, const Position& axis,
                        Eigen::Index n, const FadingParams& params, Link link, Rng& rng)
{
    const double pl = path_loss(distance(node, array_pos), params, link);
    const CVec mean = steering_vector(n, array_angle(array_pos, node, axis));
    return sample_fading(CMat(mean), params.k_factor_of(link), pl, rng).col(0);
}

inline CMat bs_rdars_matrix(const Geometry& geo, const FadingParams& params, Eigen::Index M,
                            Eigen::Index N, Rng& rng)
{
    const double pl = path_loss(distance(geo.bs_position, geo.rdars_position), params, Link::bs_rdars);
    const CVec a_r = steering_vector(N, array_angle(geo.rdars_position, geo.bs_position, geo.rdars_axis));
    const CVec a_b = steering_vector(M, array_angle(geo.bs_position, geo.rdars_position, geo.bs_axis));
    const CMat mean = a_r * a_b.adjoint();
    return sample_fading(mean, params.k_factor_of(Link::bs_rdars), pl, rng);
}

inline void check_dims(Eigen::Index M, Eigen::Index N)
{
    if (M < 1 || N < 1)
        throw InvalidParameter("M and N must be >= 1");
}

} // namespace detail

/// Draw order: G, h_d, h_r.
inline ChannelSet generate_uplink_channels(const Geometry& geo, const FadingParams& params,
                                           Eigen::Index M, Eigen::Index N, Rng& rng)
{
    detail::check_dims(M, N);
    params.validate();
    ChannelSet ch;
    ch.G = detail::bs_rdars_matrix(geo, params, M, N, rng);
    ch.h_d = detail::link_vector(geo.user_position, geo.bs_position, geo.bs_axis, M, params,
                                 Link::user_bs, rng);
    ch.h_r = detail::link_vector(geo.user_position, geo.rdars_position, geo.rdars_axis, N, params,
                                 Link::user_rdars, rng);
    return ch;
}

/// Draw order: G, u_d, u_r, t_d, t_r. h_d/h_r are left empty.
inline ChannelSet generate_isac_channels(const Geometry& geo, const FadingParams& params,
                                         Eigen::Index M, Eigen::Index N, Rng& rng)
{
    if (!geo.target_position)
        throw InvalidConfig("ISAC scenario requires target_position");
    detail::check_dims(M, N);
    params.validate();
    const Position& tgt = *geo.target_position;
    ChannelSet ch;
    ch.G = detail::bs_rdars_matrix(geo, params, M, N, rng);
    ch.u_d = detail::link_vector(geo.user_position, geo.bs_position, geo.bs_axis, M, params,
                                 Link::user_bs, rng);
    ch.u_r = detail::link_vector(geo.user_position, geo.rdars_position, geo.rdars_axis, N, params,
                                 Link::user_rdars, rng);
    ch.t_d = detail::link_vector(tgt, geo.bs_position, geo.bs_axis, M, params, Link::target_bs, rng);
    ch.t_r = detail::link_vector(tgt, geo.rdars_position, geo.rdars_axis, N, params,
                                 Link::target_rdars, rng);
    ch.h_d = CVec::Zero(M);
    ch.h_r = CVec::Zero(N);
    return ch;
}

} // namespace rdars
