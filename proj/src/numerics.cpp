#include "vds/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vds {

void LpProblem::add_row(std::vector<double> coeffs, Relation rel, double rhs) {
    if (coeffs.size() != num_vars) throw std::invalid_argument("lp: row length mismatch");
    rows.push_back(LpRow{std::move(coeffs), rel, rhs});
}

namespace {

constexpr double kPivotEps = 1e-11;
constexpr double kCostEps = 1e-9;
constexpr double kRatioTie = 1e-12;

enum class StepOutcome { optimal, pivoted, unbounded };

struct Tableau {
    std::size_t m = 0;      // constraint rows
    std::size_t ncols = 0;  // columns excluding rhs
    std::vector<std::vector<double>> t;
    std::vector<std::size_t> basis;

    void pivot(std::size_t pr, std::size_t pc) {
        const double pv = t[pr][pc];
        for (double& v : t[pr]) v /= pv;
        t[pr][pc] = 1.0;
        for (std::size_t i = 0; i <= m; ++i) {
            if (i == pr) continue;
            const double f = t[i][pc];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j <= ncols; ++j) t[i][j] -= f * t[pr][j];
            t[i][pc] = 0.0;
        }
        basis[pr] = pc;
    }

    // One simplex step under Bland's rule: entering variable is the lowest
    // eligible column, leaving variable the lowest-indexed basic among the
    // minimum-ratio rows. last_col limits which columns may enter.
    StepOutcome step(std::size_t last_col) {
        std::size_t enter = ncols;
        for (std::size_t j = 0; j < last_col; ++j) {
            if (t[m][j] < -kCostEps) {
                enter = j;
                break;
            }
        }
        if (enter == ncols) return StepOutcome::optimal;

        // Minimum ratio first, then the smallest basic index within the tie
        // band (the Bland tie-break that rules out cycling).
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            if (t[i][enter] <= kPivotEps) continue;
            best = std::min(best, t[i][ncols] / t[i][enter]);
        }
        if (!std::isfinite(best)) return StepOutcome::unbounded;
        std::size_t leave = m;
        for (std::size_t i = 0; i < m; ++i) {
            if (t[i][enter] <= kPivotEps) continue;
            const double ratio = t[i][ncols] / t[i][enter];
            if (ratio <= best + kRatioTie * (1.0 + std::abs(best))) {
                if (leave == m || basis[i] < basis[leave]) leave = i;
            }
        }
        pivot(leave, enter);
        return StepOutcome::pivoted;
    }
};

}  // namespace

LpSolution solve_lp(const LpProblem& p) {
    const std::size_t n = p.num_vars;
    const std::size_t m = p.rows.size();

    // Normalize to nonnegative right hand sides.
    std::vector<std::vector<double>> coeffs(m);
    std::vector<Relation> rel(m);
    std::vector<double> rhs(m);
    for (std::size_t i = 0; i < m; ++i) {
        coeffs[i] = p.rows[i].coeffs;
        rel[i] = p.rows[i].rel;
        rhs[i] = p.rows[i].rhs;
        if (rhs[i] < 0.0) {
            for (double& v : coeffs[i]) v = -v;
            rhs[i] = -rhs[i];
            if (rel[i] == Relation::le)
                rel[i] = Relation::ge;
            else if (rel[i] == Relation::ge)
                rel[i] = Relation::le;
        }
    }

    std::size_t nslack = 0, nart = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (rel[i] != Relation::eq) ++nslack;
        if (rel[i] != Relation::le) ++nart;
    }
    const std::size_t slack0 = n;
    const std::size_t art0 = n + nslack;
    const std::size_t ncols = n + nslack + nart;

    Tableau tb;
    tb.m = m;
    tb.ncols = ncols;
    tb.t.assign(m + 1, std::vector<double>(ncols + 1, 0.0));
    tb.basis.assign(m, 0);

    std::size_t si = slack0, ai = art0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) tb.t[i][j] = coeffs[i][j];
        tb.t[i][ncols] = rhs[i];
        if (rel[i] == Relation::le) {
            tb.t[i][si] = 1.0;
            tb.basis[i] = si++;
        } else if (rel[i] == Relation::ge) {
            tb.t[i][si] = -1.0;
            ++si;
            tb.t[i][ai] = 1.0;
            tb.basis[i] = ai++;
        } else {
            tb.t[i][ai] = 1.0;
            tb.basis[i] = ai++;
        }
    }

    double scale = 1.0;
    for (std::size_t i = 0; i < m; ++i) scale = std::max(scale, rhs[i]);

    const std::size_t iter_cap = 200000;
    std::size_t iters = 0;

    if (nart > 0) {
        // Phase 1: maximize minus the sum of artificials. The objective row
        // carries -c + c_B B^-1 A, so artificials start at +1 and the row is
        // canonicalized by subtracting their basic rows.
        for (std::size_t j = art0; j < ncols; ++j) tb.t[m][j] = 1.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (tb.basis[i] >= art0)
                for (std::size_t j = 0; j <= ncols; ++j) tb.t[m][j] -= tb.t[i][j];
        }
        for (;;) {
            if (++iters > iter_cap) throw std::runtime_error("lp: iteration limit (phase 1)");
            StepOutcome s = tb.step(ncols);
            if (s == StepOutcome::optimal) break;
            if (s == StepOutcome::unbounded)
                throw std::runtime_error("lp: phase 1 objective cannot be unbounded");
        }
        if (tb.t[m][ncols] < -1e-8 * scale) return LpSolution{LpStatus::infeasible, 0.0, {}};

        // Pivot leftover artificials out of the basis or retire their rows.
        for (std::size_t i = 0; i < m; ++i) {
            if (tb.basis[i] < art0) continue;
            std::size_t pc = ncols;
            for (std::size_t j = 0; j < art0; ++j) {
                if (std::abs(tb.t[i][j]) > 1e-9) {
                    pc = j;
                    break;
                }
            }
            if (pc == ncols) {
                // Redundant constraint: blank the row so it never interferes.
                for (std::size_t j = 0; j <= ncols; ++j) tb.t[i][j] = 0.0;
            } else {
                tb.pivot(i, pc);
            }
        }
    }

    // Phase 2 objective row.
    for (std::size_t j = 0; j <= ncols; ++j) tb.t[m][j] = 0.0;
    for (std::size_t j = 0; j < n; ++j) tb.t[m][j] = -p.objective[j];
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t b = tb.basis[i];
        if (b < n && p.objective[b] != 0.0) {
            const double cb = p.objective[b];
            for (std::size_t j = 0; j <= ncols; ++j) tb.t[m][j] += cb * tb.t[i][j];
        }
    }
    for (;;) {
        if (++iters > iter_cap) throw std::runtime_error("lp: iteration limit (phase 2)");
        StepOutcome s = tb.step(art0);
        if (s == StepOutcome::optimal) break;
        if (s == StepOutcome::unbounded) return LpSolution{LpStatus::unbounded, 0.0, {}};
    }

    LpSolution sol;
    sol.status = LpStatus::optimal;
    sol.x.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        if (tb.basis[i] < n) sol.x[tb.basis[i]] = tb.t[i][ncols];
    sol.objective = tb.t[m][ncols];
    return sol;
}

std::vector<double> solve_psd(std::vector<std::vector<double>> G, std::vector<double> b) {
    const std::size_t k = b.size();
    double scale = 0.0;
    for (std::size_t j = 0; j < k; ++j) scale = std::max(scale, std::abs(G[j][j]));
    const double tol = 1e-12 * std::max(1.0, scale);

    std::vector<std::size_t> order;
    std::vector<bool> used(k, false);
    for (std::size_t step = 0; step < k; ++step) {
        std::size_t piv = k;
        double best = tol;
        for (std::size_t j = 0; j < k; ++j) {
            if (!used[j] && G[j][j] > best) {
                best = G[j][j];
                piv = j;
            }
        }
        if (piv == k) break;
        used[piv] = true;
        order.push_back(piv);
        for (std::size_t j = 0; j < k; ++j) {
            if (used[j]) continue;
            const double f = G[j][piv] / G[piv][piv];
            if (f == 0.0) continue;
            for (std::size_t l = 0; l < k; ++l) G[j][l] -= f * G[piv][l];
            b[j] -= f * b[piv];
        }
    }

    std::vector<double> mu(k, 0.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const std::size_t pRow = *it;
        double v = b[pRow];
        for (std::size_t l = 0; l < k; ++l)
            if (l != pRow) v -= G[pRow][l] * mu[l];
        mu[pRow] = v / G[pRow][pRow];
    }
    return mu;
}

std::vector<double> project_onto_cone(const std::vector<double>& z,
                                      const std::vector<std::vector<double>>& eq_rows,
                                      const std::vector<std::vector<double>>& in_rows) {
    const std::size_t nv = z.size();

    // Unit-normalize the generators; zero rows constrain nothing.
    std::vector<std::vector<double>> d;
    std::size_t num_eq = 0;
    auto push_rows = [&](const std::vector<std::vector<double>>& rows) {
        for (const auto& row : rows) {
            double nrm = 0.0;
            for (double v : row) nrm += v * v;
            nrm = std::sqrt(nrm);
            if (nrm <= 1e-300) continue;
            std::vector<double> u(row);
            for (double& v : u) v /= nrm;
            d.push_back(std::move(u));
        }
    };
    push_rows(eq_rows);
    num_eq = d.size();
    push_rows(in_rows);
    const std::size_t k = d.size();
    if (k == 0) return z;

    std::vector<std::vector<double>> G(k, std::vector<double>(k, 0.0));
    std::vector<double> q(k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a; b < k; ++b) {
            double s = 0.0;
            for (std::size_t j = 0; j < nv; ++j) s += d[a][j] * d[b][j];
            G[a][b] = G[b][a] = s;
        }
        double s = 0.0;
        for (std::size_t j = 0; j < nv; ++j) s += d[a][j] * z[j];
        q[a] = s;
    }

    double znorm = 0.0;
    for (double v : z) znorm += v * v;
    znorm = std::sqrt(znorm);
    const double tol = 1e-12 * std::max(1.0, znorm);

    // Closest point of the polar cone { sum nu_e e + sum mu_a a, mu >= 0 }:
    // Lawson-Hanson nonnegative least squares on the multipliers, with the
    // equality generators kept permanently passive (their multipliers are
    // free). The projection onto the original cone is then z minus that point.
    std::vector<bool> passive(k, false);
    for (std::size_t a = 0; a < num_eq; ++a) passive[a] = true;
    std::vector<double> mu(k, 0.0);

    auto solve_passive = [&]() {
        std::vector<std::size_t> idx;
        for (std::size_t a = 0; a < k; ++a)
            if (passive[a]) idx.push_back(a);
        std::vector<std::vector<double>> Gp(idx.size(), std::vector<double>(idx.size()));
        std::vector<double> qp(idx.size());
        for (std::size_t a = 0; a < idx.size(); ++a) {
            for (std::size_t b = 0; b < idx.size(); ++b) Gp[a][b] = G[idx[a]][idx[b]];
            qp[a] = q[idx[a]];
        }
        std::vector<double> sol = solve_psd(std::move(Gp), std::move(qp));
        std::vector<double> full(k, 0.0);
        for (std::size_t a = 0; a < idx.size(); ++a) full[idx[a]] = sol[a];
        return full;
    };

    if (num_eq > 0) mu = solve_passive();

    const std::size_t outer_cap = 100 + 20 * k;
    for (std::size_t outer = 0; outer < outer_cap; ++outer) {
        // Negative gradient of the residual with respect to each multiplier.
        std::size_t enter = k;
        double wbest = tol;
        for (std::size_t a = num_eq; a < k; ++a) {
            if (passive[a]) continue;
            double w = q[a];
            for (std::size_t b = 0; b < k; ++b) w -= G[a][b] * mu[b];
            if (w > wbest) {
                wbest = w;
                enter = a;
            }
        }
        if (enter == k) break;
        passive[enter] = true;

        for (std::size_t inner = 0; inner < outer_cap; ++inner) {
            std::vector<double> trial = solve_passive();
            bool ok = true;
            double alpha = 1.0;
            for (std::size_t a = num_eq; a < k; ++a) {
                if (!passive[a] || trial[a] > 0.0) continue;
                ok = false;
                const double denom = mu[a] - trial[a];
                if (denom > 0.0) alpha = std::min(alpha, mu[a] / denom);
            }
            if (ok) {
                mu = std::move(trial);
                break;
            }
            for (std::size_t a = 0; a < k; ++a) mu[a] += alpha * (trial[a] - mu[a]);
            for (std::size_t a = num_eq; a < k; ++a) {
                if (passive[a] && mu[a] <= tol * 1e-2) {
                    mu[a] = 0.0;
                    passive[a] = false;
                }
            }
        }
    }

    std::vector<double> v(z);
    for (std::size_t a = 0; a < k; ++a) {
        if (mu[a] == 0.0) continue;
        for (std::size_t j = 0; j < nv; ++j) v[j] -= mu[a] * d[a][j];
    }
    return v;
}

std::vector<double> central_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& x,
    double rel_step) {
    std::vector<double> grad(x.size(), 0.0);
    std::vector<double> pt(x);
    for (std::size_t j = 0; j < x.size(); ++j) {
        double h = rel_step * std::max(std::abs(x[j]), 1.0);
        // Snap the step to one exactly representable around x_j.
        volatile double hi = x[j] + h;
        volatile double lo = x[j] - h;
        const double twoh = hi - lo;
        pt[j] = hi;
        const double fp = f(pt);
        pt[j] = lo;
        const double fm = f(pt);
        pt[j] = x[j];
        grad[j] = (fp - fm) / twoh;
    }
    return grad;
}

}  // namespace vds
