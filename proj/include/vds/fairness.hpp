#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vds/model.hpp"
#include "vds/utility.hpp"

namespace vds {

/// Outcome of one property validator. A failing verdict always carries a
/// witness describing the worst offender and the margin by which it misses
/// (negative margin = size of the violation).
struct PropertyReport {
    std::string property;
    bool pass = false;
    bool applicable = true;  // false: the property's precondition is absent
    std::string witness;
    double margin = 0.0;
    double tolerance = 0.0;
};

/// Every user runs at least as many tasks as under the weighted equal split:
/// x_n >= (w_n / sum_m w_m) * sum_i gamma_{n,i} - tol.
[[nodiscard]] PropertyReport check_sharing_incentive(const Cluster& c, const Allocation& x,
                                                     double tol = 1e-6);

/// No user would swap aggregate bundles: running user m's bundle scaled by
/// w_n / w_m completes no more of n's tasks than n already runs.
[[nodiscard]] PropertyReport check_envy_freeness(const Cluster& c, const Allocation& x,
                                                 double tol = 1e-6);

/// Per-server and overall bottleneck resources. A resource is the bottleneck
/// of a server when every eligible user requests it at least as intensely
/// (relative to capacity) as any other resource there; an overall bottleneck
/// is one resource that qualifies at every server. no_resource when absent;
/// ties resolve to the lowest resource index.
struct BottleneckInfo {
    std::size_t overall = no_resource;
    std::vector<std::size_t> per_server;
};
[[nodiscard]] BottleneckInfo find_bottleneck(const Cluster& c);

/// At each server with a bottleneck: weighted max-min on the bottleneck
/// shares. For every eligible user, an LP checks whether its task count at
/// that server could rise (its cells elsewhere held, totals of weakly-poorer
/// users protected, placement free). Inapplicable when no server has a
/// bottleneck.
[[nodiscard]] PropertyReport check_bottleneck_fairness(const Cluster& c, const Allocation& x,
                                                       double tol = 1e-6);

/// No user's total can rise without lowering another's (free re-placement):
/// maximize the summed increases by LP and require the optimum be ~zero.
[[nodiscard]] PropertyReport check_pareto(const Cluster& c, const Allocation& x,
                                          double tol = 1e-6);

/// Variational characterization of the equilibrium: at every server, the
/// linear functional y -> sum_n y_{n,i} g'_i(s~_{n,i}) / gamma_{n,i} attains
/// its maximum over the server's feasible set at the allocation itself.
/// Inapplicable when some user has zero total tasks.
[[nodiscard]] PropertyReport check_alpha_pf_vds(const Cluster& c, const UtilitySet& u,
                                                const Allocation& x, double tol = 1e-6);

/// Per-server fairness audit: no user's total can rise using residual
/// capacity plus capacity taken from strictly-richer cells (cells whose
/// virtual dominant share exceeds the user's own at that server).
[[nodiscard]] PropertyReport check_psdsf(const Cluster& c, const Allocation& x,
                                         double tol = 1e-6);

/// Placement-weighted relative gap between the user's virtual dominant share
/// and the smallest share of an actively served user at each server it uses.
/// NaN when the user runs nothing (or a server minimum degenerates to zero).
[[nodiscard]] double deviation(const Cluster& c, const Allocation& x, std::size_t n);

/// Aggregate deviation over users with positive totals.
struct DeviationSummary {
    std::vector<double> per_user;  // NaN for unserved users
    double weighted_mean = 0.0;    // sum w_n D_n / sum w_n over served users
    double max = 0.0;
    bool degenerate = false;  // some served user had no well-defined deviation
};
[[nodiscard]] DeviationSummary deviation_summary(const Cluster& c, const Allocation& x);

}  // namespace vds
