#pragma once

#include <cstddef>
#include <vector>

#include "vds/model.hpp"

namespace vds {

/// View of an allocation through the lens of a single virtual server holding
/// the concatenated capacities c_r = sum_i c_{i,r}.
struct GlobalShares {
    std::vector<double> share;         // s_n = x_n * max_r d_{n,r} / c_r
    std::vector<double> gamma_total;   // gamma_n = sum_i gamma_{n,i}
    std::vector<std::size_t> dominant; // argmax_r d_{n,r} / c_r, lowest index on ties
};

[[nodiscard]] GlobalShares global_shares(const Cluster& c, const Allocation& x);

/// Per-server progressive filling: every user's weighted virtual dominant
/// share rises on a common clock, judged at the user's best still-open
/// server; users freeze when no residual capacity can raise their total with
/// everyone else's total held. Event-driven (exact saturation times from an
/// LP), so fixture outputs are exact up to roundoff.
[[nodiscard]] Allocation solve_psdsf(const Cluster& c, SharingMode mode = SharingMode::divisible);

/// Lexicographic max-min on global dominant shares s_n / w_n via iterated
/// linear programs: maximize the minimum share, pin users that cannot exceed
/// it, repeat.
[[nodiscard]] Allocation solve_drfh(const Cluster& c);

/// Lexicographic max-min on x_n / (gamma_n * w_n), where gamma_n sums the
/// user's per-server task capacities over servers that can run it.
[[nodiscard]] Allocation solve_tsf(const Cluster& c);

}  // namespace vds
