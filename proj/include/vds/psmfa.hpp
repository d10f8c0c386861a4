#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "vds/model.hpp"
#include "vds/utility.hpp"

namespace vds {

/// Dense K x M table of per-(server, resource) values. Holds the capacity
/// prices of the complementarity system, where entries are nonnegative and
/// may be positive only while the resource is saturated; the same shape is
/// reused for price-space gradients and search directions, which carry
/// arbitrary signs.
class Multipliers {
  public:
    Multipliers() = default;
    Multipliers(std::size_t num_servers, std::size_t num_resources)
        : num_resources_(num_resources), values_(num_servers * num_resources, 0.0) {}

    [[nodiscard]] double at(std::size_t i, std::size_t r) const {
        return values_[i * num_resources_ + r];
    }
    double& at(std::size_t i, std::size_t r) { return values_[i * num_resources_ + r]; }

    [[nodiscard]] std::size_t num_servers() const noexcept {
        return num_resources_ == 0 ? 0 : values_.size() / num_resources_;
    }
    [[nodiscard]] std::size_t num_resources() const noexcept { return num_resources_; }

  private:
    std::size_t num_resources_ = 0;
    std::vector<double> values_;
};

struct SolverConfig {
    double epsilon_stop = 1e-6;      // stop once the joint direction norm falls below this
    double merit_tol = 1e-10;        // merit value accepted as solved
    std::size_t max_iters = 100000;
    double initial_step = 1.0;
    double backtrack_factor = 0.5;   // step shrink factor, must lie in (0,1)
    std::size_t max_backtracks = 60;
    double saturation_tol = 1e-8;    // relative slack below which a resource counts as saturated
};

enum class SolveStatus { converged, max_iters, stalled };

struct SolveDiagnostics {
    double user_complementarity = 0.0;      // max |min(x_{n,i}, f_user)| over eligible pairs
    double capacity_complementarity = 0.0;  // max price * |slack| over (server, resource)
    std::vector<std::size_t> positive_multipliers;  // per server: count of positive prices
    bool degenerate_saturation = false;  // a saturated resource ended with a zero price
    std::size_t multiplier_resets = 0;   // prices cleared when their resource left the saturated set
    double max_infeasibility = 0.0;      // worst relative capacity overshoot seen across iterates
    double max_support_violation = 0.0;  // largest price seen on an unsaturated resource
};

struct SolveResult {
    Allocation allocation;
    Multipliers multipliers;
    std::vector<double> merit_history;  // merit of every iterate, strictly decreasing
    std::size_t iterations = 0;
    SolveStatus status = SolveStatus::stalled;
    SolveDiagnostics diagnostics;
};

/// Fischer-Burmeister function sqrt(a^2 + b^2) - a - b: zero exactly when
/// a >= 0, b >= 0 and a*b = 0, positive or negative otherwise.
[[nodiscard]] double fb(double a, double b) noexcept;

/// Smoothed complementarity penalty: half the squared Fischer-Burmeister
/// value. Nonnegative, continuously differentiable, zero exactly on
/// complementary pairs.
[[nodiscard]] double psi(double a, double b) noexcept;

/// Partial derivatives of psi with respect to a and b. Both are zero at the
/// origin, the only point where the formula would divide by zero.
[[nodiscard]] std::pair<double, double> psi_partials(double a, double b) noexcept;

/// Remaining capacity of resource r at server i; negative if x oversubscribes.
[[nodiscard]] double f_capacity(const Cluster& c, const Allocation& x, std::size_t i,
                                std::size_t r);

/// Stationarity residual of user n at server i: the priced cost of one task
/// minus the marginal utility per task,
///     sum_r lambda_{i,r} d_{n,r} - g'_i(share) / gamma_{n,i}.
/// A solution pairs a zero residual with every positive x_{n,i} and a
/// nonnegative residual with every zero one. Throws std::invalid_argument if
/// the user cannot run at the server and std::domain_error if the user has no
/// tasks anywhere (the marginal utility is singular at zero).
[[nodiscard]] double f_user(const Cluster& c, const UtilitySet& u, const Allocation& x,
                            const Multipliers& lambda, std::size_t n, std::size_t i);

/// Total complementarity penalty: sum of psi(x_{n,i}, f_user(n,i)) over
/// eligible pairs. Zero exactly at equilibrium points. Domain errors from
/// f_user propagate.
[[nodiscard]] double merit(const Cluster& c, const UtilitySet& u, const Allocation& x,
                           const Multipliers& lambda);

struct MeritGradient {
    Allocation x;        // one component per eligible pair, zero elsewhere
    Multipliers lambda;  // one component per (server, resource)
};

/// Analytic gradient of merit. The allocation block couples across servers:
/// raising x_{n,i} raises user n's total and therefore shifts the residual at
/// every server the user can use.
[[nodiscard]] MeritGradient merit_gradient(const Cluster& c, const UtilitySet& u,
                                           const Allocation& x, const Multipliers& lambda);

/// One iterate of the solver with the derived quantities the direction and
/// step rules consume.
struct SolverState {
    Allocation x;
    Multipliers lambda;
    double merit_value = 0.0;
    MeritGradient gradient;
    std::vector<std::vector<std::size_t>> saturated;  // per server, resources with no slack left
};

/// Evaluates merit, gradient and the saturated sets at (x, lambda).
/// Zero-capacity resources are never reported saturated: no eligible user
/// demands them, so they carry no price and no constraint.
[[nodiscard]] SolverState make_state(const Cluster& c, const UtilitySet& u, Allocation x,
                                     Multipliers lambda, double saturation_tol = 1e-8);

/// Steepest-descent step on the allocation block, projected so that saturated
/// resources are not oversubscribed: per server, the negated gradient is
/// projected onto the cone that keeps priced saturated rows exactly level,
/// unpriced saturated rows non-increasing, and zero cells non-decreasing.
[[nodiscard]] Allocation direction_x(const Cluster& c, const SolverState& state);

/// Price-space direction. On saturated resources the negated gradient gets a
/// correction that pre-charges prices for rows the allocation step presses
/// against, clamped to keep zero prices from going negative; unsaturated
/// resources never move.
[[nodiscard]] Multipliers direction_lambda(const Cluster& c, const SolverState& state);

struct LineSearchResult {
    double step = 0.0;
    std::size_t backtracks = 0;
    bool accepted = false;
    double merit_after = 0.0;
};

/// Backtracking search for the largest step in (0, initial_step] that
/// strictly lowers the merit. The starting step is first capped at the exact
/// crossing of the nearest capacity face, zero task bound, or zero price
/// bound, so every candidate stays feasible. Not accepted when
/// max_backtracks halvings never find a decrease.
[[nodiscard]] LineSearchResult line_search(const Cluster& c, const UtilitySet& u,
                                           const SolverState& state, const Allocation& vx,
                                           const Multipliers& vlambda, const SolverConfig& config);

/// Starting point: half the equal-split allocation (strictly inside every
/// capacity region, every user served) with all prices zero.
[[nodiscard]] std::pair<Allocation, Multipliers> initialize(const Cluster& c,
                                                            const SolverConfig& config);

/// Full solve: projected-descent iteration on the complementarity merit.
/// Terminates with status converged once merit <= merit_tol, stalled when the
/// direction norm drops below epsilon_stop first or no admissible step
/// remains, and max_iters otherwise; the best iterate is always returned.
/// Throws std::invalid_argument on a malformed config.
[[nodiscard]] SolveResult solve_psmfa(const Cluster& c, const UtilitySet& u,
                                      const SolverConfig& config = {});

}  // namespace vds
