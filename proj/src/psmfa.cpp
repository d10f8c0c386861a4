#include "vds/psmfa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "vds/numerics.hpp"

namespace vds {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Cells at or below this count as sitting on the zero face; the projection
// then forbids further decrease instead of producing a direction the update
// would have to clamp away.
double zero_cell_tol(const Cluster& c, std::size_t n, std::size_t i) {
    return 1e-12 * std::max(1.0, c.gamma(n, i));
}

bool on_zero_face(const Cluster& c, const Allocation& x, std::size_t n, std::size_t i) {
    return x.at(n, i) <= zero_cell_tol(c, n, i);
}

// Merit with an infinite sentinel instead of the domain error, for candidate
// points probed by the line search: a step that starves a user out of the
// utility domain is simply never accepted.
double merit_or_inf(const Cluster& c, const UtilitySet& u, const Allocation& x,
                    const Multipliers& lambda) {
    for (std::size_t n = 0; n < c.num_users(); ++n)
        if (x.total(n) <= 0.0) return kInf;
    return merit(c, u, x, lambda);
}

// The point reached from state by a step of eta, with tasks and prices
// clamped to stay nonnegative against roundoff at an exactly-hit face.
std::pair<Allocation, Multipliers> candidate_point(const Cluster& c, const SolverState& state,
                                                   const Allocation& vx, const Multipliers& vlambda,
                                                   double eta) {
    Allocation x = state.x;
    Multipliers lambda = state.lambda;
    for (std::size_t n = 0; n < c.num_users(); ++n)
        for (std::size_t i : c.servers_of(n))
            x.at(n, i) = std::max(0.0, x.at(n, i) + eta * vx.at(n, i));
    for (std::size_t i = 0; i < c.num_servers(); ++i)
        for (std::size_t r = 0; r < c.num_resources(); ++r)
            lambda.at(i, r) = std::max(0.0, lambda.at(i, r) + eta * vlambda.at(i, r));
    return {std::move(x), std::move(lambda)};
}

// Worst relative capacity overshoot plus any negative task count; zero for a
// feasible allocation.
double infeasibility(const Cluster& c, const Allocation& x) {
    double worst = 0.0;
    for (std::size_t i = 0; i < c.num_servers(); ++i)
        for (std::size_t r = 0; r < c.num_resources(); ++r) {
            const double over = usage(c, x, i, r) - c.capacity(i, r);
            worst = std::max(worst, over / std::max(1.0, c.capacity(i, r)));
        }
    for (std::size_t n = 0; n < c.num_users(); ++n)
        for (std::size_t i = 0; i < c.num_servers(); ++i) worst = std::max(worst, -x.at(n, i));
    return std::max(0.0, worst);
}

// Largest price carried by a resource outside the saturated set.
double support_violation(const Cluster& c, const SolverState& state) {
    double worst = 0.0;
    for (std::size_t i = 0; i < c.num_servers(); ++i) {
        const auto& sat = state.saturated[i];
        for (std::size_t r = 0; r < c.num_resources(); ++r)
            if (std::find(sat.begin(), sat.end(), r) == sat.end())
                worst = std::max(worst, state.lambda.at(i, r));
    }
    return worst;
}

void validate_config(const SolverConfig& cfg) {
    const bool ok = cfg.epsilon_stop > 0.0 && cfg.merit_tol > 0.0 && cfg.max_iters > 0 &&
                    cfg.initial_step > 0.0 && cfg.backtrack_factor > 0.0 &&
                    cfg.backtrack_factor < 1.0 && cfg.max_backtracks > 0 &&
                    cfg.saturation_tol > 0.0;
    if (!ok) throw std::invalid_argument("solver config: all fields must be positive and the backtrack factor below one");
}

}  // namespace

double fb(double a, double b) noexcept { return std::hypot(a, b) - a - b; }

double psi(double a, double b) noexcept {
    const double v = fb(a, b);
    return 0.5 * v * v;
}

std::pair<double, double> psi_partials(double a, double b) noexcept {
    const double norm = std::hypot(a, b);
    if (norm == 0.0) return {0.0, 0.0};
    const double v = norm - a - b;
    return {v * (a / norm - 1.0), v * (b / norm - 1.0)};
}

double f_capacity(const Cluster& c, const Allocation& x, std::size_t i, std::size_t r) {
    return c.capacity(i, r) - usage(c, x, i, r);
}

double f_user(const Cluster& c, const UtilitySet& u, const Allocation& x,
              const Multipliers& lambda, std::size_t n, std::size_t i) {
    if (!c.eligible(n, i)) throw std::invalid_argument("f_user: user cannot run at this server");
    const double total = x.total(n);
    if (total <= 0.0) throw std::domain_error("f_user: user holds no tasks");
    double price = 0.0;
    for (std::size_t r = 0; r < c.num_resources(); ++r)
        price += lambda.at(i, r) * c.demand(n, r);
    const double gamma = c.gamma(n, i);
    const double share = total / (c.weight(n) * gamma);
    return price - g_prime(u.server(i), share) / gamma;
}

double merit(const Cluster& c, const UtilitySet& u, const Allocation& x,
             const Multipliers& lambda) {
    double sum = 0.0;
    for (std::size_t i = 0; i < c.num_servers(); ++i)
        for (std::size_t n : c.users_at(i)) sum += psi(x.at(n, i), f_user(c, u, x, lambda, n, i));
    return sum;
}

MeritGradient merit_gradient(const Cluster& c, const UtilitySet& u, const Allocation& x,
                             const Multipliers& lambda) {
    const std::size_t num_users = c.num_users();
    const std::size_t num_servers = c.num_servers();
    MeritGradient g{Allocation(num_users, num_servers), Multipliers(num_servers, c.num_resources())};

    // First pass: the two penalty partials of every eligible pair.
    Allocation da(num_users, num_servers);
    Allocation db(num_users, num_servers);
    for (std::size_t i = 0; i < num_servers; ++i)
        for (std::size_t n : c.users_at(i)) {
            const auto p = psi_partials(x.at(n, i), f_user(c, u, x, lambda, n, i));
            da.at(n, i) = p.first;
            db.at(n, i) = p.second;
        }

    // Allocation block. A task of user n added anywhere raises the user's
    // total, which moves the residual at every server the user can use by
    // -g''/(weight * gamma^2); that coupling term is shared by all of the
    // user's components.
    for (std::size_t n = 0; n < num_users; ++n) {
        double coupled = 0.0;
        const double total = x.total(n);
        const double w = c.weight(n);
        for (std::size_t j : c.servers_of(n)) {
            const double gamma = c.gamma(n, j);
            const double share = total / (w * gamma);
            coupled += db.at(n, j) * (-g_double_prime(u.server(j), share) / (w * gamma * gamma));
        }
        for (std::size_t i : c.servers_of(n)) g.x.at(n, i) = da.at(n, i) + coupled;
    }

    // Price block: a price move shifts every co-located residual by the
    // user's demand for that resource.
    for (std::size_t i = 0; i < num_servers; ++i)
        for (std::size_t r = 0; r < c.num_resources(); ++r) {
            double sum = 0.0;
            for (std::size_t m : c.users_at(i)) sum += db.at(m, i) * c.demand(m, r);
            g.lambda.at(i, r) = sum;
        }
    return g;
}

SolverState make_state(const Cluster& c, const UtilitySet& u, Allocation x, Multipliers lambda,
                       double saturation_tol) {
    SolverState s;
    s.x = std::move(x);
    s.lambda = std::move(lambda);
    s.merit_value = merit(c, u, s.x, s.lambda);
    s.gradient = merit_gradient(c, u, s.x, s.lambda);
    s.saturated.resize(c.num_servers());
    for (std::size_t i = 0; i < c.num_servers(); ++i)
        for (std::size_t r : saturated_resources(c, s.x, i, saturation_tol))
            if (c.capacity(i, r) > 0.0) s.saturated[i].push_back(r);
    return s;
}

Allocation direction_x(const Cluster& c, const SolverState& state) {
    Allocation v(c.num_users(), c.num_servers());
    for (std::size_t i = 0; i < c.num_servers(); ++i) {
        const auto& members = c.users_at(i);
        if (members.empty()) continue;
        std::vector<double> z(members.size());
        for (std::size_t k = 0; k < members.size(); ++k) z[k] = -state.gradient.x.at(members[k], i);

        std::vector<std::vector<double>> eq_rows;
        std::vector<std::vector<double>> in_rows;
        for (std::size_t r : state.saturated[i]) {
            std::vector<double> row(members.size());
            for (std::size_t k = 0; k < members.size(); ++k) row[k] = c.demand(members[k], r);
            if (state.lambda.at(i, r) > 0.0)
                eq_rows.push_back(std::move(row));
            else
                in_rows.push_back(std::move(row));
        }
        for (std::size_t k = 0; k < members.size(); ++k)
            if (on_zero_face(c, state.x, members[k], i)) {
                std::vector<double> row(members.size(), 0.0);
                row[k] = -1.0;  // enforce v_k >= 0: an empty cell cannot shrink
                in_rows.push_back(std::move(row));
            }

        const std::vector<double> p = project_onto_cone(z, eq_rows, in_rows);
        for (std::size_t k = 0; k < members.size(); ++k) v.at(members[k], i) = p[k];
    }
    return v;
}

Multipliers direction_lambda(const Cluster& c, const SolverState& state) {
    Multipliers v(c.num_servers(), c.num_resources());
    for (std::size_t i = 0; i < c.num_servers(); ++i)
        for (std::size_t r : state.saturated[i]) {
            // Pressure of the allocation step against this capacity face.
            double beta = 0.0;
            for (std::size_t n : c.users_at(i))
                beta -= state.gradient.x.at(n, i) * c.demand(n, r);
            const double dpsi = state.gradient.lambda.at(i, r);
            const double tilde = -dpsi + (-beta * dpsi >= 0.0 ? beta : 0.0);
            v.at(i, r) = state.lambda.at(i, r) > 0.0 ? tilde : std::max(tilde, 0.0);
        }
    return v;
}

LineSearchResult line_search(const Cluster& c, const UtilitySet& u, const SolverState& state,
                             const Allocation& vx, const Multipliers& vlambda,
                             const SolverConfig& config) {
    double eta = config.initial_step;

    // Cap the step at the first capacity face the direction genuinely moves
    // toward. Saturated rows are held level by the projection, so their usage
    // rate is pure residue from the projector (bounded well below this
    // threshold relative to the capacity); capping on it would divide a zero
    // slack by noise and crush the step.
    for (std::size_t i = 0; i < c.num_servers(); ++i)
        for (std::size_t r = 0; r < c.num_resources(); ++r) {
            if (c.capacity(i, r) <= 0.0) continue;
            double rate = 0.0;
            for (std::size_t n : c.users_at(i)) rate += vx.at(n, i) * c.demand(n, r);
            if (rate > 1e-10 * std::max(1.0, c.capacity(i, r)))
                eta = std::min(eta, std::max(0.0, f_capacity(c, state.x, i, r)) / rate);
        }
    // Zero task bound: stop exactly on the face. Cells already on it are
    // excluded; their direction is nonnegative up to projection roundoff and
    // the update clamps the remainder.
    for (std::size_t n = 0; n < c.num_users(); ++n)
        for (std::size_t i : c.servers_of(n)) {
            const double step_rate = vx.at(n, i);
            if (step_rate < 0.0 && !on_zero_face(c, state.x, n, i))
                eta = std::min(eta, state.x.at(n, i) / -step_rate);
        }
    // Zero price bound.
    for (std::size_t i = 0; i < c.num_servers(); ++i)
        for (std::size_t r = 0; r < c.num_resources(); ++r) {
            const double lam = state.lambda.at(i, r);
            const double rate = vlambda.at(i, r);
            if (rate < 0.0 && lam > 0.0) eta = std::min(eta, lam / -rate);
        }

    LineSearchResult out;
    out.step = eta;
    if (eta <= 0.0) return out;
    for (std::size_t k = 0; k <= config.max_backtracks; ++k) {
        const auto [x2, l2] = candidate_point(c, state, vx, vlambda, eta);
        const double m2 = merit_or_inf(c, u, x2, l2);
        if (m2 < state.merit_value) {
            out.step = eta;
            out.backtracks = k;
            out.accepted = true;
            out.merit_after = m2;
            return out;
        }
        eta *= config.backtrack_factor;
    }
    out.step = eta;
    return out;
}

std::pair<Allocation, Multipliers> initialize(const Cluster& c, const SolverConfig&) {
    Allocation x = uniform_allocation(c);
    for (std::size_t n = 0; n < c.num_users(); ++n)
        for (std::size_t i = 0; i < c.num_servers(); ++i) x.at(n, i) *= 0.5;
    return {std::move(x), Multipliers(c.num_servers(), c.num_resources())};
}

SolveResult solve_psmfa(const Cluster& c, const UtilitySet& u, const SolverConfig& config) {
    validate_config(config);
    auto [x0, l0] = initialize(c, config);
    SolverState state = make_state(c, u, std::move(x0), std::move(l0), config.saturation_tol);

    SolveResult res;
    res.merit_history.push_back(state.merit_value);
    res.diagnostics.max_infeasibility = infeasibility(c, state.x);
    res.diagnostics.max_support_violation = support_violation(c, state);

    SolveStatus status = SolveStatus::max_iters;
    std::size_t iters = 0;
    for (; iters < config.max_iters; ++iters) {
        if (state.merit_value <= config.merit_tol) {
            status = SolveStatus::converged;
            break;
        }
        const Allocation vx = direction_x(c, state);
        const Multipliers vl = direction_lambda(c, state);
        double norm_sq = 0.0;
        for (std::size_t n = 0; n < c.num_users(); ++n)
            for (std::size_t i : c.servers_of(n)) norm_sq += vx.at(n, i) * vx.at(n, i);
        for (std::size_t i = 0; i < c.num_servers(); ++i)
            for (std::size_t r = 0; r < c.num_resources(); ++r)
                norm_sq += vl.at(i, r) * vl.at(i, r);
        if (std::sqrt(norm_sq) <= config.epsilon_stop) {
            status = SolveStatus::stalled;
            break;
        }
        const LineSearchResult ls = line_search(c, u, state, vx, vl, config);
        if (!ls.accepted) {
            status = SolveStatus::stalled;
            break;
        }
        auto [x2, l2] = candidate_point(c, state, vx, vl, ls.step);
        // A price may outlive its face when drift desaturates the resource;
        // clear it so every iterate keeps prices supported on saturated rows.
        for (std::size_t i = 0; i < c.num_servers(); ++i) {
            const auto sat = saturated_resources(c, x2, i, config.saturation_tol);
            for (std::size_t r = 0; r < c.num_resources(); ++r)
                if (l2.at(i, r) > 0.0 && std::find(sat.begin(), sat.end(), r) == sat.end()) {
                    l2.at(i, r) = 0.0;
                    ++res.diagnostics.multiplier_resets;
                }
        }
        state = make_state(c, u, std::move(x2), std::move(l2), config.saturation_tol);
        res.merit_history.push_back(state.merit_value);
        res.diagnostics.max_infeasibility =
            std::max(res.diagnostics.max_infeasibility, infeasibility(c, state.x));
        res.diagnostics.max_support_violation =
            std::max(res.diagnostics.max_support_violation, support_violation(c, state));
    }

    res.iterations = iters;
    res.status = status;
    res.allocation = state.x;
    res.multipliers = state.lambda;

    auto& d = res.diagnostics;
    for (std::size_t i = 0; i < c.num_servers(); ++i)
        for (std::size_t n : c.users_at(i)) {
            const double f = f_user(c, u, state.x, state.lambda, n, i);
            d.user_complementarity =
                std::max(d.user_complementarity, std::abs(std::min(state.x.at(n, i), f)));
        }
    d.positive_multipliers.assign(c.num_servers(), 0);
    for (std::size_t i = 0; i < c.num_servers(); ++i) {
        for (std::size_t r = 0; r < c.num_resources(); ++r) {
            const double lam = state.lambda.at(i, r);
            if (lam > 0.0) ++d.positive_multipliers[i];
            d.capacity_complementarity = std::max(
                d.capacity_complementarity, lam * std::abs(f_capacity(c, state.x, i, r)));
        }
        for (std::size_t r : state.saturated[i])
            if (state.lambda.at(i, r) == 0.0) d.degenerate_saturation = true;
    }
    return res;
}

}  // namespace vds
