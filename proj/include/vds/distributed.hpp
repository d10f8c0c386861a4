#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "vds/model.hpp"
#include "vds/psmfa.hpp"
#include "vds/utility.hpp"

namespace vds {

/// Order in which servers apply their updates within a round. The fixed
/// point does not depend on the order, only the path to it does.
enum class UpdateSchedule {
    round_robin,  // ascending server index, totals refreshed after each server
    shuffled,     // order redrawn each round from the seed, totals refreshed after each server
    parallel,     // every server steps against the round-start totals, refreshed once per round
};

struct DistributedConfig {
    double barrier_epsilon = 1e-2;   // capacity relaxation of the soft barrier prices
    std::vector<double> step_sizes;  // per-server kappa, used verbatim; empty selects the guarded default
    double residual_tol = 1e-4;      // stop once max |min(x_{n,i}, f_{n,i})| falls below this
    std::size_t max_rounds = 5000000;
    UpdateSchedule schedule = UpdateSchedule::round_robin;
    std::uint64_t seed = 0;          // order seed for the shuffled schedule
};

/// One point of the per-round complementarity residual curve. Early rounds
/// are kept densely; long runs are thinned to a bounded number of samples
/// with the round index preserved, so decay-rate fits stay exact.
struct ResidualSample {
    std::size_t round = 0;
    double residual = 0.0;
};

struct DistributedDiagnostics {
    double complementarity_residual = 0.0;  // max |min(x_{n,i}, f_{n,i})| at the final point
    double max_capacity_violation = 0.0;    // max over (server, resource) of usage - capacity, floored at 0
    std::vector<double> step_sizes;         // kappa each server ended on
};

struct DistributedResult {
    Allocation allocation;
    Multipliers multipliers;  // barrier prices evaluated at the final allocation
    std::vector<ResidualSample> residual_history;
    std::size_t rounds = 0;
    SolveStatus status = SolveStatus::max_iters;
    DistributedDiagnostics diagnostics;
};

/// Soft-barrier price estimates for server i, one per resource:
///
///     lambda_{i,r}(x) = max(usage_{i,r} - c_{i,r} + eps, 0) / eps^2,
///
/// zero while usage stays at least eps below capacity and 1/eps right at
/// capacity. Shrinking eps sharpens the estimate toward the exact
/// complementarity prices. Resources nobody at the server can demand
/// (capacity zero) get the vacuous value of the formula; every eligible
/// demand there is zero, so the price never enters a residual. Throws
/// std::invalid_argument on a bad server index or a non-positive eps.
[[nodiscard]] std::vector<double> barrier_multipliers(const Cluster& c, const Allocation& x,
                                                      std::size_t i, double barrier_epsilon);

/// Update direction for one cell under the barrier prices: the negated
/// stationarity residual -f_{n,i}(x, lambda(x)), clamped to max(-f, 0) when
/// x_{n,i} = 0 so a zero cell is never pushed negative. Computed from
/// server-local data only: the server's own capacities and usage, the demand
/// vectors of users placed on it, and the users' shared task totals. Throws
/// std::invalid_argument when the user cannot run at the server and
/// std::domain_error when the user has no tasks anywhere (the marginal
/// utility is singular at zero).
[[nodiscard]] double local_direction(const Cluster& c, const UtilitySet& u, const Allocation& x,
                                     std::size_t n, std::size_t i, double barrier_epsilon);

/// Barrier-based distributed iteration: each round, every server steps all
/// of its cells by x <- clamp(x + kappa_i * direction, 0, gamma_{n,i}) using
/// only local information, then user totals are shared. Stops once the
/// complementarity residual max |min(x_{n,i}, f_{n,i}(x, lambda(x)))| drops
/// below the configured tolerance (status converged) or rounds run out
/// (status max_iters, best-effort iterate and diagnostics still returned).
///
/// When step_sizes is empty each server picks kappa_i itself every round
/// from its own data: the spectral bound of its active barrier block caps
/// the step at 1.8 eps^2 / sum of squared demands on near-saturated
/// resources, the curvature of the marginal utility caps it for users still
/// far from their equilibrium share, and 10^-2 times the server's mean gamma
/// caps it while no resource is near saturation. A fixed kappa of the
/// latter magnitude oscillates across the barrier zone once a resource
/// saturates, so the bound ratchets down and stays down.
///
/// An explicit start allocation (nonnegative, zero off eligible pairs)
/// overrides the default of half the equal-split allocation; passing the
/// previous fixed point when re-solving at a smaller eps skips the long
/// transient. Throws std::invalid_argument on a malformed config or start.
[[nodiscard]] DistributedResult solve_distributed(const Cluster& c, const UtilitySet& u,
                                                  const DistributedConfig& config = {},
                                                  const std::optional<Allocation>& start = {});

}  // namespace vds
