#include "vds/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "vds/numerics.hpp"

namespace vds {

namespace {

constexpr double kShareTieTol = 1e-7;

struct PairIndex {
    struct Cell {
        std::size_t n, i;
    };
    std::vector<Cell> cells;
    std::vector<std::vector<std::size_t>> of_user;

    explicit PairIndex(const Cluster& c) : of_user(c.num_users()) {
        for (std::size_t n = 0; n < c.num_users(); ++n)
            for (std::size_t i : c.servers_of(n)) {
                of_user[n].push_back(cells.size());
                cells.push_back({n, i});
            }
    }
    [[nodiscard]] std::size_t size() const { return cells.size(); }
};

std::vector<LpRow> capacity_rows(const Cluster& c, const PairIndex& px) {
    std::vector<LpRow> rows;
    for (std::size_t i = 0; i < c.num_servers(); ++i)
        for (std::size_t r = 0; r < c.num_resources(); ++r) {
            if (c.capacity(i, r) <= 0.0) continue;
            std::vector<double> row(px.size(), 0.0);
            bool any = false;
            for (std::size_t v = 0; v < px.size(); ++v)
                if (px.cells[v].i == i && c.demand(px.cells[v].n, r) > 0.0) {
                    row[v] = c.demand(px.cells[v].n, r);
                    any = true;
                }
            if (any) rows.push_back({std::move(row), Relation::le, c.capacity(i, r)});
        }
    return rows;
}

std::string pair_witness(const Cluster& c, std::size_t n, std::size_t i) {
    return "user " + c.user_id(n) + " at server " + c.server_id(i);
}

}  // namespace

PropertyReport check_sharing_incentive(const Cluster& c, const Allocation& x, double tol) {
    PropertyReport rep;
    rep.property = "sharing_incentive";
    rep.tolerance = tol;
    rep.pass = true;
    rep.margin = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < c.num_users(); ++n) {
        double gamma_total = 0.0;
        for (std::size_t i : c.servers_of(n)) gamma_total += c.gamma(n, i);
        const double bound = c.weight(n) / c.total_weight() * gamma_total;
        const double margin = x.total(n) - bound;
        if (margin < rep.margin) {
            rep.margin = margin;
            rep.witness = "user " + c.user_id(n) + ": total " + std::to_string(x.total(n)) +
                          " vs uniform-share bound " + std::to_string(bound);
        }
    }
    rep.pass = rep.margin >= -tol;
    if (rep.pass) rep.witness.clear();
    return rep;
}

PropertyReport check_envy_freeness(const Cluster& c, const Allocation& x, double tol) {
    PropertyReport rep;
    rep.property = "envy_freeness";
    rep.tolerance = tol;
    rep.margin = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < c.num_users(); ++n) {
        for (std::size_t m = 0; m < c.num_users(); ++m) {
            if (m == n) continue;
            ResourceVector bundle(c.num_resources());
            const double scale = c.weight(n) / c.weight(m) * x.total(m);
            for (std::size_t r = 0; r < c.num_resources(); ++r)
                bundle[r] = scale * c.demand(m, r);
            const double margin = x.total(n) - task_utility(c, n, bundle);
            if (margin < rep.margin) {
                rep.margin = margin;
                rep.witness = "user " + c.user_id(n) + " envies " + c.user_id(m) + " by " +
                              std::to_string(-margin) + " tasks";
            }
        }
    }
    if (c.num_users() < 2) rep.margin = std::numeric_limits<double>::infinity();
    rep.pass = rep.margin >= -tol;
    if (rep.pass) rep.witness.clear();
    return rep;
}

BottleneckInfo find_bottleneck(const Cluster& c) {
    const auto qualifies = [&](std::size_t i, std::size_t rho) {
        if (c.capacity(i, rho) <= 0.0) return false;
        for (std::size_t n : c.users_at(i)) {
            const double mine = c.demand(n, rho) / c.capacity(i, rho);
            for (std::size_t r = 0; r < c.num_resources(); ++r) {
                if (r == rho || c.capacity(i, r) <= 0.0) continue;
                if (c.demand(n, r) / c.capacity(i, r) > mine) return false;
            }
        }
        return true;
    };

    BottleneckInfo info;
    info.per_server.assign(c.num_servers(), no_resource);
    for (std::size_t i = 0; i < c.num_servers(); ++i)
        for (std::size_t r = 0; r < c.num_resources(); ++r)
            if (qualifies(i, r)) {
                info.per_server[i] = r;
                break;
            }
    for (std::size_t r = 0; r < c.num_resources(); ++r) {
        bool everywhere = true;
        for (std::size_t i = 0; i < c.num_servers() && everywhere; ++i)
            everywhere = qualifies(i, r);
        if (everywhere) {
            info.overall = r;
            break;
        }
    }
    return info;
}

PropertyReport check_bottleneck_fairness(const Cluster& c, const Allocation& x, double tol) {
    PropertyReport rep;
    rep.property = "bottleneck_fairness";
    rep.tolerance = tol;
    const BottleneckInfo info = find_bottleneck(c);
    if (std::none_of(info.per_server.begin(), info.per_server.end(),
                     [](std::size_t r) { return r != no_resource; })) {
        rep.applicable = false;
        rep.pass = false;
        rep.witness = "no server has a bottleneck resource";
        return rep;
    }

    const PairIndex px(c);
    const std::vector<LpRow> caps = capacity_rows(c, px);
    rep.margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < c.num_servers(); ++i) {
        if (info.per_server[i] == no_resource) continue;
        for (std::size_t n : c.users_at(i)) {
            const double mine = weighted_vds(c, x, n, i);
            LpProblem lp(px.size());
            lp.rows = caps;
            for (std::size_t v = 0; v < px.size(); ++v) {
                const auto [m, j] = px.cells[v];
                if (m == n) {
                    if (j == i)
                        lp.objective[v] = 1.0;
                    else {  // growth confined to server i
                        std::vector<double> row(px.size(), 0.0);
                        row[v] = 1.0;
                        lp.add_row(std::move(row), Relation::eq, x.at(n, j));
                    }
                }
            }
            for (std::size_t m = 0; m < c.num_users(); ++m) {
                if (m == n) continue;
                // The comparison at server i covers its eligible users: the
                // weakly-poorer of them are protected, strictly richer ones
                // may shrink. Users that cannot run at i are bystanders and
                // always keep their totals.
                if (c.eligible(m, i) &&
                    weighted_vds(c, x, m, i) > mine + kShareTieTol * (1.0 + mine))
                    continue;
                std::vector<double> row(px.size(), 0.0);
                for (std::size_t v : px.of_user[m]) row[v] = 1.0;
                lp.add_row(std::move(row), Relation::ge, x.total(m));
            }
            const LpSolution sol = solve_lp(lp);
            if (sol.status != LpStatus::optimal)
                throw std::runtime_error("check_bottleneck_fairness: audit LP failed");
            const double margin = x.at(n, i) - sol.objective;  // <= 0 always
            if (margin < rep.margin) {
                rep.margin = margin;
                rep.witness = pair_witness(c, n, i) + " could grow from " +
                              std::to_string(x.at(n, i)) + " to " + std::to_string(sol.objective);
            }
        }
    }
    rep.pass = rep.margin >= -tol;
    if (rep.pass) rep.witness.clear();
    return rep;
}

PropertyReport check_pareto(const Cluster& c, const Allocation& x, double tol) {
    PropertyReport rep;
    rep.property = "pareto_optimality";
    rep.tolerance = tol;
    const PairIndex px(c);
    LpProblem lp(px.size() + c.num_users());  // cells then per-user increases
    for (std::size_t n = 0; n < c.num_users(); ++n) lp.objective[px.size() + n] = 1.0;
    lp.rows = capacity_rows(c, px);
    for (auto& row : lp.rows) row.coeffs.resize(px.size() + c.num_users(), 0.0);
    for (std::size_t n = 0; n < c.num_users(); ++n) {
        std::vector<double> row(px.size() + c.num_users(), 0.0);
        for (std::size_t v : px.of_user[n]) row[v] = 1.0;
        row[px.size() + n] = -1.0;
        lp.add_row(std::move(row), Relation::eq, x.total(n));
    }
    const LpSolution sol = solve_lp(lp);
    if (sol.status != LpStatus::optimal)
        throw std::runtime_error("check_pareto: improvement LP failed");
    rep.margin = -sol.objective;
    rep.pass = sol.objective <= tol;
    if (!rep.pass) {
        std::size_t worst = 0;
        for (std::size_t n = 1; n < c.num_users(); ++n)
            if (sol.x[px.size() + n] > sol.x[px.size() + worst]) worst = n;
        rep.witness = "total tasks can rise by " + std::to_string(sol.objective) + " (user " +
                      c.user_id(worst) + " alone by " + std::to_string(sol.x[px.size() + worst]) +
                      ")";
    }
    return rep;
}

PropertyReport check_alpha_pf_vds(const Cluster& c, const UtilitySet& u, const Allocation& x,
                                  double tol) {
    PropertyReport rep;
    rep.property = "alpha_pf_vds";
    rep.tolerance = tol;
    for (std::size_t n = 0; n < c.num_users(); ++n)
        if (x.total(n) <= 0.0) {
            rep.applicable = false;
            rep.pass = false;
            rep.witness = "user " + c.user_id(n) + " has zero tasks";
            return rep;
        }

    rep.margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < c.num_servers(); ++i) {
        const std::vector<std::size_t>& users = c.users_at(i);
        if (users.empty()) continue;
        LpProblem lp(users.size());
        double at_x = 0.0;
        for (std::size_t k = 0; k < users.size(); ++k) {
            const std::size_t n = users[k];
            const double coeff =
                g_prime(u.server(i), weighted_vds(c, x, n, i)) / c.gamma(n, i);
            lp.objective[k] = coeff;
            at_x += coeff * x.at(n, i);
        }
        for (std::size_t r = 0; r < c.num_resources(); ++r) {
            if (c.capacity(i, r) <= 0.0) continue;
            std::vector<double> row(users.size(), 0.0);
            bool any = false;
            for (std::size_t k = 0; k < users.size(); ++k)
                if (c.demand(users[k], r) > 0.0) {
                    row[k] = c.demand(users[k], r);
                    any = true;
                }
            if (any) lp.add_row(std::move(row), Relation::le, c.capacity(i, r));
        }
        const LpSolution sol = solve_lp(lp);
        if (sol.status != LpStatus::optimal)
            throw std::runtime_error("check_alpha_pf_vds: server LP failed");
        const double scale = std::max(1.0, std::abs(at_x));
        const double margin = (at_x - sol.objective) / scale;  // <= 0 up to roundoff
        if (margin < rep.margin) {
            rep.margin = margin;
            rep.witness = "server " + c.server_id(i) + ": linearized value " +
                          std::to_string(at_x) + " vs optimum " + std::to_string(sol.objective);
        }
    }
    rep.pass = rep.margin >= -tol;
    if (rep.pass) rep.witness.clear();
    return rep;
}

PropertyReport check_psdsf(const Cluster& c, const Allocation& x, double tol) {
    PropertyReport rep;
    rep.property = "psdsf";
    rep.tolerance = tol;
    const PairIndex px(c);
    const std::vector<LpRow> caps = capacity_rows(c, px);
    rep.margin = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < c.num_users(); ++n) {
        LpProblem lp(px.size());
        lp.rows = caps;
        for (std::size_t v : px.of_user[n]) lp.objective[v] = 1.0;
        for (std::size_t v = 0; v < px.size(); ++v) {
            const auto [m, i] = px.cells[v];
            if (m == n) continue;
            // Cells of weakly-poorer users (by share at that server) keep
            // their tasks; strictly richer cells may be cannibalized.
            const double mine = weighted_vds(c, x, n, i);
            const double theirs = weighted_vds(c, x, m, i);
            if (c.eligible(n, i) && theirs > mine + kShareTieTol * (1.0 + mine)) continue;
            std::vector<double> row(px.size(), 0.0);
            row[v] = 1.0;
            lp.add_row(std::move(row), Relation::ge, x.at(m, i));
        }
        const LpSolution sol = solve_lp(lp);
        if (sol.status != LpStatus::optimal)
            throw std::runtime_error("check_psdsf: audit LP failed");
        const double margin = x.total(n) - sol.objective;
        if (margin < rep.margin) {
            rep.margin = margin;
            rep.witness = "user " + c.user_id(n) + " could grow from " +
                          std::to_string(x.total(n)) + " to " + std::to_string(sol.objective);
        }
    }
    rep.pass = rep.margin >= -tol;
    if (rep.pass) rep.witness.clear();
    return rep;
}

double deviation(const Cluster& c, const Allocation& x, std::size_t n) {
    const double total = x.total(n);
    if (total <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    double dev = 0.0;
    for (std::size_t i : c.servers_of(n)) {
        if (x.at(n, i) <= 0.0) continue;
        double least = std::numeric_limits<double>::infinity();
        for (std::size_t m : c.users_at(i))
            if (x.total(m) > 0.0) least = std::min(least, weighted_vds(c, x, m, i));
        if (!(least > 0.0) || !std::isfinite(least))
            return std::numeric_limits<double>::quiet_NaN();
        dev += x.at(n, i) / total * ((weighted_vds(c, x, n, i) - least) / least);
    }
    return dev;
}

DeviationSummary deviation_summary(const Cluster& c, const Allocation& x) {
    DeviationSummary s;
    s.per_user.resize(c.num_users());
    double wsum = 0.0, acc = 0.0;
    for (std::size_t n = 0; n < c.num_users(); ++n) {
        s.per_user[n] = deviation(c, x, n);
        if (x.total(n) <= 0.0) continue;
        if (std::isnan(s.per_user[n])) {
            s.degenerate = true;
            continue;
        }
        acc += c.weight(n) * s.per_user[n];
        wsum += c.weight(n);
        s.max = std::max(s.max, s.per_user[n]);
    }
    s.weighted_mean = wsum > 0.0 ? acc / wsum : 0.0;
    return s;
}

}  // namespace vds
