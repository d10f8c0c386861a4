#include "vds/distributed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace vds {

namespace {

// A user whose total momentarily hits zero has a singular marginal utility;
// the share is floored so the direction stays defined. The resulting huge
// growth step is absorbed by the per-cell gamma clamp, which restarts the
// user at the largest count its server could hold alone.
constexpr double total_floor = 1e-12;

// Residual samples stored in a run; longer histories are thinned in place.
constexpr std::size_t history_cap = 16384;

void validate_config(const Cluster& c, const DistributedConfig& config) {
    if (!(std::isfinite(config.barrier_epsilon) && config.barrier_epsilon > 0.0))
        throw std::invalid_argument("distributed: barrier_epsilon must be finite and positive");
    if (!config.step_sizes.empty()) {
        if (config.step_sizes.size() != c.num_servers())
            throw std::invalid_argument("distributed: step_sizes must list one kappa per server");
        for (double k : config.step_sizes)
            if (!(std::isfinite(k) && k > 0.0))
                throw std::invalid_argument("distributed: every kappa must be finite and positive");
    }
    if (!(std::isfinite(config.residual_tol) && config.residual_tol > 0.0))
        throw std::invalid_argument("distributed: residual_tol must be finite and positive");
    if (config.max_rounds == 0)
        throw std::invalid_argument("distributed: max_rounds must be at least 1");
}

void validate_start(const Cluster& c, const Allocation& start) {
    if (start.num_users() != c.num_users() || start.num_servers() != c.num_servers())
        throw std::invalid_argument("distributed: start allocation has the wrong shape");
    for (std::size_t n = 0; n < c.num_users(); ++n)
        for (std::size_t i = 0; i < c.num_servers(); ++i) {
            const double v = start.at(n, i);
            if (!std::isfinite(v) || v < 0.0)
                throw std::invalid_argument("distributed: start tasks must be finite and nonnegative");
            if (v > 0.0 && !c.eligible(n, i))
                throw std::invalid_argument("distributed: start places tasks on an ineligible pair");
        }
}

void fill_barrier(const Cluster& c, const Allocation& x, std::size_t i, double eps,
                  std::vector<double>& lambda) {
    const double inv2 = 1.0 / (eps * eps);
    for (std::size_t r = 0; r < c.num_resources(); ++r) {
        double used = 0.0;
        for (std::size_t n : c.users_at(i)) used += x.at(n, i) * c.demand(n, r);
        lambda[r] = std::max(used - c.capacity(i, r) + eps, 0.0) * inv2;
    }
}

struct Workspace {
    std::vector<double> lambda;     // per-resource barrier prices, reused per server
    std::vector<double> direction;  // per-user step directions within one server
};

// Stationarity residual of one cell against precomputed barrier prices.
double cell_residual(const Cluster& c, const UtilityParams& p, const std::vector<double>& lambda,
                     const std::vector<double>& totals, std::size_t n, std::size_t i) {
    const double gamma = c.gamma(n, i);
    double priced = 0.0;
    for (std::size_t r = 0; r < c.num_resources(); ++r) priced += lambda[r] * c.demand(n, r);
    const double share = std::max(totals[n], total_floor) / (c.weight(n) * gamma);
    return priced - g_prime(p, share) / gamma;
}

// Full evaluation pass: max |min(x_{n,i}, f_{n,i})| over eligible cells at
// the current point. Used for the stop decision and final diagnostics; the
// per-round curve uses the cheaper values seen during the sweep instead.
double complementarity_residual(const Cluster& c, const UtilitySet& u, const Allocation& x,
                                const std::vector<double>& totals, double eps, Workspace& ws) {
    double res = 0.0;
    for (std::size_t i = 0; i < c.num_servers(); ++i) {
        if (c.users_at(i).empty()) continue;
        fill_barrier(c, x, i, eps, ws.lambda);
        const UtilityParams& p = u.server(i);
        for (std::size_t n : c.users_at(i)) {
            const double f = cell_residual(c, p, ws.lambda, totals, n, i);
            res = std::max(res, std::min(std::abs(std::min(x.at(n, i), f)), 1e300));
        }
    }
    return res;
}

}  // namespace

std::vector<double> barrier_multipliers(const Cluster& c, const Allocation& x, std::size_t i,
                                        double barrier_epsilon) {
    if (i >= c.num_servers()) throw std::invalid_argument("barrier_multipliers: no such server");
    if (!(std::isfinite(barrier_epsilon) && barrier_epsilon > 0.0))
        throw std::invalid_argument("barrier_multipliers: barrier_epsilon must be positive");
    std::vector<double> lambda(c.num_resources(), 0.0);
    fill_barrier(c, x, i, barrier_epsilon, lambda);
    return lambda;
}

double local_direction(const Cluster& c, const UtilitySet& u, const Allocation& x, std::size_t n,
                       std::size_t i, double barrier_epsilon) {
    if (n >= c.num_users() || i >= c.num_servers() || !c.eligible(n, i))
        throw std::invalid_argument("local_direction: user cannot run at this server");
    if (x.total(n) <= 0.0)
        throw std::domain_error("local_direction: user has no tasks anywhere");
    const std::vector<double> lambda = barrier_multipliers(c, x, i, barrier_epsilon);
    const double gamma = c.gamma(n, i);
    double priced = 0.0;
    for (std::size_t r = 0; r < c.num_resources(); ++r) priced += lambda[r] * c.demand(n, r);
    const double share = x.total(n) / (c.weight(n) * gamma);
    double v = g_prime(u.server(i), share) / gamma - priced;
    if (x.at(n, i) <= 0.0) v = std::max(v, 0.0);
    return v;
}

DistributedResult solve_distributed(const Cluster& c, const UtilitySet& u,
                                    const DistributedConfig& config,
                                    const std::optional<Allocation>& start) {
    validate_config(c, config);
    if (start) validate_start(c, *start);

    const std::size_t num_servers = c.num_servers();
    const std::size_t num_resources = c.num_resources();
    const double eps = config.barrier_epsilon;

    DistributedResult result;
    Allocation& x = result.allocation;
    if (start) {
        x = *start;
    } else {
        x = uniform_allocation(c);
        for (std::size_t n = 0; n < c.num_users(); ++n)
            for (std::size_t i = 0; i < num_servers; ++i) x.at(n, i) *= 0.5;
    }
    std::vector<double> totals(c.num_users(), 0.0);
    for (std::size_t n = 0; n < c.num_users(); ++n) totals[n] = x.total(n);

    // Per-(server, resource) sums of squared demands: the spectral bound of a
    // barrier block is at most the sum over its active resources.
    std::vector<std::vector<double>> colnorm(num_servers,
                                             std::vector<double>(num_resources, 0.0));
    // Once a resource has come within 2 eps of saturation it stays counted in
    // the bound; dropping it again would let the step grow and bounce the
    // iterate across the barrier zone.
    std::vector<std::vector<char>> banded(num_servers, std::vector<char>(num_resources, 0));
    std::vector<double> kappa_free(num_servers, 0.0);
    for (std::size_t i = 0; i < num_servers; ++i) {
        double gamma_sum = 0.0;
        for (std::size_t n : c.users_at(i)) {
            gamma_sum += c.gamma(n, i);
            for (std::size_t r = 0; r < num_resources; ++r)
                colnorm[i][r] += c.demand(n, r) * c.demand(n, r);
        }
        if (!c.users_at(i).empty()) kappa_free[i] = 1e-2 * gamma_sum / c.users_at(i).size();
    }

    const bool adaptive = config.step_sizes.empty();
    std::vector<double> kappa = adaptive ? kappa_free : config.step_sizes;

    std::vector<std::size_t> order(num_servers);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(config.seed);

    Workspace ws;
    ws.lambda.assign(num_resources, 0.0);
    std::size_t widest = 0;
    for (std::size_t i = 0; i < num_servers; ++i) widest = std::max(widest, c.users_at(i).size());
    ws.direction.assign(widest, 0.0);

    std::vector<double> snapshot;
    std::size_t stride = 1;
    result.status = SolveStatus::max_iters;
    result.rounds = config.max_rounds;

    for (std::size_t h = 0; h < config.max_rounds; ++h) {
        if (config.schedule == UpdateSchedule::shuffled)
            std::shuffle(order.begin(), order.end(), rng);
        const bool parallel = config.schedule == UpdateSchedule::parallel;
        if (parallel) snapshot = totals;
        // Shared totals as each server sees them: live under the sequential
        // schedules, frozen at the round start when servers run in parallel.
        const std::vector<double>& seen = parallel ? snapshot : totals;

        double observed = 0.0;
        for (std::size_t i : order) {
            const auto& users = c.users_at(i);
            if (users.empty()) continue;
            fill_barrier(c, x, i, eps, ws.lambda);
            const UtilityParams& p = u.server(i);

            double band = 0.0;
            if (adaptive)
                for (std::size_t r = 0; r < num_resources; ++r) {
                    if (!banded[i][r]) {
                        double used = 0.0;
                        for (std::size_t n : users) used += x.at(n, i) * c.demand(n, r);
                        if (used >= c.capacity(i, r) - 2.0 * eps) banded[i][r] = 1;
                    }
                    if (banded[i][r]) band += colnorm[i][r];
                }

            double curvature = 0.0;
            for (std::size_t idx = 0; idx < users.size(); ++idx) {
                const std::size_t n = users[idx];
                const double gamma = c.gamma(n, i);
                double priced = 0.0;
                for (std::size_t r = 0; r < num_resources; ++r)
                    priced += ws.lambda[r] * c.demand(n, r);
                const double share = std::max(seen[n], total_floor) / (c.weight(n) * gamma);
                const Marginals m = g_marginals(p, share);
                const double f = priced - m.first / gamma;
                double v = -f;
                if (x.at(n, i) <= 0.0) v = std::max(v, 0.0);
                ws.direction[idx] = v;
                if (adaptive && seen[n] > total_floor)
                    curvature = std::max(curvature,
                                         m.second_magnitude / (c.weight(n) * gamma * gamma));
                observed = std::max(observed, std::min(std::abs(std::min(x.at(n, i), f)), 1e300));
            }

            if (adaptive) {
                // Keep kappa * (barrier stiffness + own curvature) under 2 so
                // the per-server map contracts; the curvature enters twice to
                // cover the coupling through a user's shared total. Far from
                // every wall the default 10^-2 * mean gamma applies.
                const double stiffness = band / (eps * eps) + 2.0 * curvature;
                if (stiffness > 0.0) kappa[i] = std::min(kappa_free[i], 1.8 / stiffness);
            }

            const double step = kappa[i];
            for (std::size_t idx = 0; idx < users.size(); ++idx) {
                const std::size_t n = users[idx];
                const double cell = x.at(n, i);
                const double next =
                    std::clamp(cell + step * ws.direction[idx], 0.0, c.gamma(n, i));
                totals[n] += next - cell;
                x.at(n, i) = next;
            }
        }

        if (h % stride == 0) {
            result.residual_history.push_back({h, observed});
            if (result.residual_history.size() >= history_cap) {
                auto& hist = result.residual_history;
                std::size_t keep = 0;
                for (std::size_t j = 0; j < hist.size(); j += 2) hist[keep++] = hist[j];
                hist.resize(keep);
                stride *= 2;
            }
        }

        if (observed <= config.residual_tol &&
            complementarity_residual(c, u, x, totals, eps, ws) <= config.residual_tol) {
            result.status = SolveStatus::converged;
            result.rounds = h + 1;
            break;
        }
    }

    result.diagnostics.complementarity_residual =
        complementarity_residual(c, u, x, totals, eps, ws);
    if (result.residual_history.empty() ||
        result.residual_history.back().round + 1 != result.rounds)
        result.residual_history.push_back(
            {result.rounds - 1, result.diagnostics.complementarity_residual});

    result.multipliers = Multipliers(num_servers, num_resources);
    for (std::size_t i = 0; i < num_servers; ++i) {
        fill_barrier(c, x, i, eps, ws.lambda);
        for (std::size_t r = 0; r < num_resources; ++r) {
            result.multipliers.at(i, r) = ws.lambda[r];
            double used = 0.0;
            for (std::size_t n : c.users_at(i)) used += x.at(n, i) * c.demand(n, r);
            result.diagnostics.max_capacity_violation = std::max(
                result.diagnostics.max_capacity_violation, used - c.capacity(i, r));
        }
    }
    result.diagnostics.max_capacity_violation =
        std::max(result.diagnostics.max_capacity_violation, 0.0);
    result.diagnostics.step_sizes = kappa;
    return result;
}

}  // namespace vds
