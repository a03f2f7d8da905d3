#pragma once

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "rdars/harness.hpp"

namespace rdars {

inline constexpr std::string_view kCsvHeader =
    "scenario,scheme,tx_power_dbm,n_total,n_connected,trials,feasible_trials,mean_rate_bpshz,std_rate_bpshz,"
    "mean_comm_snr_db,mean_radar_snr_db,mean_gain_reflection,mean_gain_distribution,mean_gain_selection,base_seed";

/// 9 significant digits; non-finite values print as nan / inf / -inf.
inline std::string format_g9(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

/// Sorted by (scheme name, n_connected, tx_power_dbm).
inline std::vector<ResultRow> sorted_rows(std::vector<ResultRow> rows)
{
    std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        return std::forward_as_tuple(scheme_name(a.scheme), a.n_connected, a.tx_power_dbm) <
               std::forward_as_tuple(scheme_name(b.scheme), b.n_connected, b.tx_power_dbm);
    });
    return rows;
}

inline void write_csv(std::ostream& out, const std::vector<ResultRow>& rows)
{
    out << kCsvHeader << '\n';
    for (const auto& r : sorted_rows(rows)) {
        out << scenario_name(r.scenario) << ',' << scheme_name(r.scheme) << ',' << format_g9(r.tx_power_dbm) << ','
            << r.n_total << ',' << r.n_connected << ',' << r.trials << ',' << r.feasible_trials << ','
            << format_g9(r.mean_rate_bpshz) << ',' << format_g9(r.std_rate_bpshz) << ','
            << format_g9(r.mean_comm_snr_db) << ',' << format_g9(r.mean_radar_snr_db) << ','
            << format_g9(r.mean_gain_reflection) << ',' << format_g9(r.mean_gain_distribution) << ','
            << format_g9(r.mean_gain_selection) << ',' << r.base_seed << '\n';
    }
}

} // namespace rdars
