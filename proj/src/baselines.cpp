#include "vds/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "vds/numerics.hpp"

namespace vds {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shared pair indexing: LP variables are the eligible (user, server) cells.
struct PairIndex {
    struct Cell {
        std::size_t n, i;
    };
    std::vector<Cell> cells;
    std::vector<std::vector<std::size_t>> of_user;  // cell ids per user

    explicit PairIndex(const Cluster& c) : of_user(c.num_users()) {
        for (std::size_t n = 0; n < c.num_users(); ++n)
            for (std::size_t i : c.servers_of(n)) {
                of_user[n].push_back(cells.size());
                cells.push_back({n, i});
            }
    }
    [[nodiscard]] std::size_t size() const { return cells.size(); }
};

// Capacity rows of the placement polytope in the given sharing mode, over
// extra leading variables (used for the clock variable in the filling LP).
std::vector<LpRow> capacity_rows(const Cluster& c, const PairIndex& px, SharingMode mode,
                                 std::size_t extra_vars) {
    std::vector<LpRow> rows;
    const std::size_t nv = extra_vars + px.size();
    if (mode == SharingMode::time_shared) {
        for (std::size_t i = 0; i < c.num_servers(); ++i) {
            std::vector<double> row(nv, 0.0);
            bool any = false;
            for (std::size_t v = 0; v < px.size(); ++v)
                if (px.cells[v].i == i) {
                    row[extra_vars + v] = 1.0 / c.gamma(px.cells[v].n, i);
                    any = true;
                }
            if (any) rows.push_back({std::move(row), Relation::le, 1.0});
        }
        return rows;
    }
    for (std::size_t i = 0; i < c.num_servers(); ++i) {
        for (std::size_t r = 0; r < c.num_resources(); ++r) {
            if (c.capacity(i, r) <= 0.0) continue;  // eligible users never demand these
            std::vector<double> row(nv, 0.0);
            bool any = false;
            for (std::size_t v = 0; v < px.size(); ++v)
                if (px.cells[v].i == i && c.demand(px.cells[v].n, r) > 0.0) {
                    row[extra_vars + v] = c.demand(px.cells[v].n, r);
                    any = true;
                }
            if (any) rows.push_back({std::move(row), Relation::le, c.capacity(i, r)});
        }
    }
    return rows;
}

// Distributes fixed per-user totals across servers. Mass goes preferentially
// where the user's virtual dominant share is lowest, ties broken toward the
// lower server index, which reproduces the placements quoted in the worked
// examples.
Allocation place_totals(const Cluster& c, SharingMode mode, const std::vector<double>& totals) {
    const PairIndex px(c);
    LpProblem lp(px.size());
    for (std::size_t v = 0; v < px.size(); ++v) {
        const auto [n, i] = px.cells[v];
        const double vds = totals[n] / (c.weight(n) * c.gamma(n, i));
        lp.objective[v] = -(vds + 1e-6 * static_cast<double>(i));
    }
    lp.rows = capacity_rows(c, px, mode, 0);
    for (std::size_t n = 0; n < c.num_users(); ++n) {
        std::vector<double> row(px.size(), 0.0);
        for (std::size_t v : px.of_user[n]) row[v] = 1.0;
        lp.add_row(std::move(row), Relation::eq, totals[n]);
    }
    const LpSolution sol = solve_lp(lp);
    if (sol.status != LpStatus::optimal)
        throw std::runtime_error("place_totals: totals admit no placement");
    Allocation x(c.num_users(), c.num_servers());
    for (std::size_t v = 0; v < px.size(); ++v)
        x.at(px.cells[v].n, px.cells[v].i) = std::max(0.0, sol.x[v]);
    return x;
}

// ---------------------------------------------------------------------------
// Progressive filling for per-server fairness.

enum class FillState { growing, dormant, frozen };

class ProgressiveFill {
  public:
    ProgressiveFill(const Cluster& c, SharingMode mode)
        : c_(c),
          mode_(mode),
          px_(c),
          closed_(c.num_servers(),
                  std::vector<bool>(mode == SharingMode::time_shared ? 1 : c.num_resources(),
                                    false)),
          state_(c.num_users(), FillState::growing),
          total_(c.num_users(), 0.0),
          rate_(c.num_users(), 0.0),
          resume_at_(c.num_users(), 0.0) {
        for (std::size_t n = 0; n < c.num_users(); ++n) rate_[n] = best_rate(n);
    }

    std::vector<double> run() {
        const std::size_t guard =
            1000 * (c_.num_users() + c_.num_servers() * c_.num_resources() + 10);
        for (std::size_t iter = 0; iter < guard; ++iter) {
            if (!any_state(FillState::growing)) {
                if (!any_state(FillState::dormant)) return total_;
                wake_next();
                continue;
            }
            const double t_res = next_resume();
            const double t_sat = saturation_clock();
            const double t_next = std::min(t_res, t_sat);
            if (t_next > clock_ + 1e-12 * (1.0 + clock_)) {
                advance_to(t_next);
                if (t_res <= t_sat) {
                    wake_due();
                    continue;
                }
            }
            // Saturation event: freeze users that cannot grow any further.
            if (t_sat <= t_res && freeze_blocked()) continue;
            if (t_res < kInf && t_res <= clock_ + 1e-12 * (1.0 + clock_)) {
                wake_due();
                continue;
            }
            if (close_saturated_pair()) continue;
            freeze_least_headroom();
        }
        throw std::runtime_error("solve_psdsf: filling failed to terminate");
    }

  private:
    [[nodiscard]] std::size_t pseudo_resources() const {
        return mode_ == SharingMode::time_shared ? 1 : c_.num_resources();
    }
    // The time-shared budget row behaves like one resource everyone demands.
    [[nodiscard]] double pair_demand(std::size_t n, std::size_t i, std::size_t r) const {
        return mode_ == SharingMode::time_shared ? 1.0 / c_.gamma(n, i) : c_.demand(n, r);
    }
    [[nodiscard]] double pair_capacity(std::size_t i, std::size_t r) const {
        return mode_ == SharingMode::time_shared ? 1.0 : c_.capacity(i, r);
    }

    [[nodiscard]] bool open_for(std::size_t n, std::size_t i) const {
        if (!c_.eligible(n, i)) return false;
        for (std::size_t r = 0; r < pseudo_resources(); ++r)
            if (closed_[i][r] && pair_demand(n, i, r) > 0.0) return false;
        return true;
    }
    [[nodiscard]] double best_rate(std::size_t n) const {
        double best = 0.0;
        for (std::size_t i : c_.servers_of(n))
            if (open_for(n, i)) best = std::max(best, c_.gamma(n, i));
        return best;
    }
    [[nodiscard]] bool any_state(FillState s) const {
        for (FillState st : state_)
            if (st == s) return true;
        return false;
    }
    [[nodiscard]] double next_resume() const {
        double t = kInf;
        for (std::size_t n = 0; n < state_.size(); ++n)
            if (state_[n] == FillState::dormant) t = std::min(t, resume_at_[n]);
        return t;
    }
    void advance_to(double t) {
        clock_ = t;
        for (std::size_t n = 0; n < state_.size(); ++n)
            if (state_[n] == FillState::growing)
                total_[n] = c_.weight(n) * rate_[n] * clock_;
    }
    void wake_due() {
        for (std::size_t n = 0; n < state_.size(); ++n)
            if (state_[n] == FillState::dormant &&
                resume_at_[n] <= clock_ + 1e-9 * (1.0 + clock_))
                state_[n] = FillState::growing;
    }
    void wake_next() {
        const double t = next_resume();
        clock_ = std::max(clock_, t);
        wake_due();
    }

    // Largest clock the growing users can reach with current placement
    // freedom, everyone else's totals held fixed.
    [[nodiscard]] double saturation_clock() const {
        LpProblem lp(1 + px_.size());  // var 0 is the clock
        lp.objective[0] = 1.0;
        lp.rows = capacity_rows(c_, px_, mode_, 1);
        for (std::size_t n = 0; n < c_.num_users(); ++n) {
            std::vector<double> row(1 + px_.size(), 0.0);
            for (std::size_t v : px_.of_user[n]) row[1 + v] = 1.0;
            if (state_[n] == FillState::growing) {
                row[0] = -c_.weight(n) * rate_[n];
                lp.add_row(std::move(row), Relation::eq, 0.0);
            } else {
                lp.add_row(std::move(row), Relation::eq, total_[n]);
            }
        }
        const LpSolution sol = solve_lp(lp);
        if (sol.status != LpStatus::optimal)
            throw std::runtime_error("solve_psdsf: saturation clock LP failed");
        return sol.x[0];
    }

    // Headroom of user n's total with every other total pinned.
    [[nodiscard]] double headroom(std::size_t n) const {
        LpProblem lp(px_.size());
        for (std::size_t v : px_.of_user[n]) lp.objective[v] = 1.0;
        lp.rows = capacity_rows(c_, px_, mode_, 0);
        for (std::size_t m = 0; m < c_.num_users(); ++m) {
            if (m == n) continue;
            std::vector<double> row(px_.size(), 0.0);
            for (std::size_t v : px_.of_user[m]) row[v] = 1.0;
            lp.add_row(std::move(row), Relation::eq, total_[m]);
        }
        const LpSolution sol = solve_lp(lp);
        if (sol.status != LpStatus::optimal)
            throw std::runtime_error("solve_psdsf: headroom LP failed");
        return sol.objective - total_[n];
    }

    bool freeze_blocked() {
        bool froze = false;
        for (std::size_t n = 0; n < c_.num_users(); ++n) {
            if (state_[n] != FillState::growing) continue;
            if (headroom(n) <= 1e-9 * std::max(1.0, total_[n])) {
                state_[n] = FillState::frozen;
                froze = true;
            }
        }
        return froze;
    }

    // A (server, resource) is structurally saturated when no placement of the
    // current totals leaves it slack. Closing one stops growth through it;
    // affected users fall back to their next-best open server and wait for
    // the clock to catch up with the share they already hold there.
    bool close_saturated_pair() {
        for (std::size_t j = 0; j < c_.num_servers(); ++j) {
            for (std::size_t r = 0; r < pseudo_resources(); ++r) {
                if (closed_[j][r] || pair_capacity(j, r) <= 0.0) continue;
                bool affects = false;
                for (std::size_t n = 0; n < c_.num_users() && !affects; ++n)
                    affects = state_[n] == FillState::growing && open_for(n, j) &&
                              pair_demand(n, j, r) > 0.0 && c_.gamma(n, j) == rate_[n];
                if (!affects) continue;
                if (max_slack(j, r) > 1e-9 * std::max(1.0, pair_capacity(j, r))) continue;
                closed_[j][r] = true;
                retire_rate_losers();
                return true;
            }
        }
        return false;
    }

    [[nodiscard]] double max_slack(std::size_t j, std::size_t r) const {
        LpProblem lp(px_.size());
        for (std::size_t v = 0; v < px_.size(); ++v)
            if (px_.cells[v].i == j)
                lp.objective[v] = -pair_demand(px_.cells[v].n, j, r);
        lp.rows = capacity_rows(c_, px_, mode_, 0);
        for (std::size_t n = 0; n < c_.num_users(); ++n) {
            std::vector<double> row(px_.size(), 0.0);
            for (std::size_t v : px_.of_user[n]) row[v] = 1.0;
            lp.add_row(std::move(row), Relation::eq, total_[n]);
        }
        const LpSolution sol = solve_lp(lp);
        if (sol.status != LpStatus::optimal)
            throw std::runtime_error("solve_psdsf: slack LP failed");
        return pair_capacity(j, r) + sol.objective;
    }

    void retire_rate_losers() {
        for (std::size_t n = 0; n < c_.num_users(); ++n) {
            if (state_[n] != FillState::growing) continue;
            const double fresh = best_rate(n);
            if (fresh == rate_[n]) continue;
            if (fresh <= 0.0) {
                state_[n] = FillState::frozen;
                continue;
            }
            rate_[n] = fresh;
            state_[n] = FillState::dormant;
            resume_at_[n] = total_[n] / (c_.weight(n) * fresh);
        }
    }

    void freeze_least_headroom() {
        std::size_t pick = SIZE_MAX;
        double best = kInf;
        for (std::size_t n = 0; n < c_.num_users(); ++n) {
            if (state_[n] != FillState::growing) continue;
            const double h = headroom(n);
            if (h < best) {
                best = h;
                pick = n;
            }
        }
        if (pick == SIZE_MAX) throw std::runtime_error("solve_psdsf: stalled with no candidates");
        state_[pick] = FillState::frozen;
    }

    const Cluster& c_;
    SharingMode mode_;
    PairIndex px_;
    std::vector<std::vector<bool>> closed_;
    std::vector<FillState> state_;
    std::vector<double> total_;
    std::vector<double> rate_;
    std::vector<double> resume_at_;
    double clock_ = 0.0;
};

// ---------------------------------------------------------------------------
// Lexicographic max-min on a linear share functional share_n = sigma_n * x_n.

Allocation solve_maxmin(const Cluster& c, const std::vector<double>& sigma) {
    const PairIndex px(c);
    std::vector<bool> fixed(c.num_users(), false);
    std::vector<double> total(c.num_users(), 0.0);

    auto user_row = [&](std::size_t n, std::size_t nvars, double coeff) {
        std::vector<double> row(nvars, 0.0);
        for (std::size_t v : px.of_user[n]) row[v] = coeff;
        return row;
    };

    std::size_t remaining = c.num_users();
    while (remaining > 0) {
        // Raise the worst-off active share as far as it goes.
        LpProblem lp(px.size() + 1);  // last var is the common floor
        lp.objective[px.size()] = 1.0;
        lp.rows = capacity_rows(c, px, SharingMode::divisible, 0);
        for (auto& row : lp.rows) row.coeffs.push_back(0.0);
        for (std::size_t n = 0; n < c.num_users(); ++n) {
            std::vector<double> row = user_row(n, px.size() + 1, fixed[n] ? 1.0 : sigma[n]);
            if (fixed[n]) {
                lp.add_row(std::move(row), Relation::eq, total[n]);
            } else {
                row[px.size()] = -1.0;
                lp.add_row(std::move(row), Relation::ge, 0.0);
            }
        }
        const LpSolution floor_sol = solve_lp(lp);
        if (floor_sol.status != LpStatus::optimal)
            throw std::runtime_error("solve_maxmin: floor LP failed");
        const double theta = floor_sol.objective;

        // A user is done when it cannot rise above the floor while every
        // other active user keeps at least the floor.
        std::vector<std::size_t> blocked;
        double least = kInf;
        std::size_t least_n = SIZE_MAX;
        for (std::size_t n = 0; n < c.num_users(); ++n) {
            if (fixed[n]) continue;
            LpProblem probe(px.size());
            for (std::size_t v : px.of_user[n]) probe.objective[v] = sigma[n];
            probe.rows = capacity_rows(c, px, SharingMode::divisible, 0);
            for (std::size_t m = 0; m < c.num_users(); ++m) {
                if (m == n) continue;
                if (fixed[m])
                    probe.add_row(user_row(m, px.size(), 1.0), Relation::eq, total[m]);
                else
                    probe.add_row(user_row(m, px.size(), sigma[m]), Relation::ge, theta);
            }
            const LpSolution grow = solve_lp(probe);
            if (grow.status != LpStatus::optimal)
                throw std::runtime_error("solve_maxmin: probe LP failed");
            if (grow.objective <= theta + 1e-8 * (1.0 + std::abs(theta))) blocked.push_back(n);
            if (grow.objective < least) {
                least = grow.objective;
                least_n = n;
            }
        }
        if (blocked.empty()) blocked.push_back(least_n);  // defensive: guarantees progress
        for (std::size_t n : blocked) {
            fixed[n] = true;
            total[n] = theta / sigma[n];
            --remaining;
        }
    }
    return place_totals(c, SharingMode::divisible, total);
}

}  // namespace

GlobalShares global_shares(const Cluster& c, const Allocation& x) {
    GlobalShares g;
    g.share.resize(c.num_users());
    g.gamma_total.assign(c.num_users(), 0.0);
    g.dominant.assign(c.num_users(), no_resource);
    std::vector<double> pooled(c.num_resources(), 0.0);
    for (std::size_t r = 0; r < c.num_resources(); ++r)
        for (std::size_t i = 0; i < c.num_servers(); ++i) pooled[r] += c.capacity(i, r);
    for (std::size_t n = 0; n < c.num_users(); ++n) {
        double best = 0.0;
        for (std::size_t r = 0; r < c.num_resources(); ++r) {
            if (pooled[r] <= 0.0) continue;
            const double frac = c.demand(n, r) / pooled[r];
            if (frac > best) {
                best = frac;
                g.dominant[n] = r;
            }
        }
        g.share[n] = x.total(n) * best;
        for (std::size_t i : c.servers_of(n)) g.gamma_total[n] += c.gamma(n, i);
    }
    return g;
}

Allocation solve_psdsf(const Cluster& c, SharingMode mode) {
    ProgressiveFill fill(c, mode);
    return place_totals(c, mode, fill.run());
}

Allocation solve_drfh(const Cluster& c) {
    std::vector<double> pooled(c.num_resources(), 0.0);
    for (std::size_t r = 0; r < c.num_resources(); ++r)
        for (std::size_t i = 0; i < c.num_servers(); ++i) pooled[r] += c.capacity(i, r);
    std::vector<double> sigma(c.num_users());
    for (std::size_t n = 0; n < c.num_users(); ++n) {
        double best = 0.0;
        for (std::size_t r = 0; r < c.num_resources(); ++r)
            if (pooled[r] > 0.0) best = std::max(best, c.demand(n, r) / pooled[r]);
        sigma[n] = best / c.weight(n);
    }
    return solve_maxmin(c, sigma);
}

Allocation solve_tsf(const Cluster& c) {
    std::vector<double> sigma(c.num_users());
    for (std::size_t n = 0; n < c.num_users(); ++n) {
        double gamma_total = 0.0;
        for (std::size_t i : c.servers_of(n)) gamma_total += c.gamma(n, i);
        sigma[n] = 1.0 / (gamma_total * c.weight(n));
    }
    return solve_maxmin(c, sigma);
}

}  // namespace vds
