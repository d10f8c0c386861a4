#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

#include "support/fixtures.hpp"
#include "vds/distributed.hpp"
#include "vds/psmfa.hpp"

using namespace vds;
using namespace vdstest;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

UtilitySet alpha_params(double alpha) { return UtilitySet({alpha, 1.0, 0.0}); }

// One user, one server, two resources; memory binds, so gamma = 5.
ClusterSpec lone_pair_spec() {
    ClusterSpec s;
    s.resources = {"cpu", "mem"};
    s.servers = {{"s1", {10.0, 10.0}}};
    s.users = {{"u1", 1.0, {1.0, 2.0}, {}}};
    return s;
}

std::vector<double> totals_of(const Cluster& c, const Allocation& x) {
    std::vector<double> t(c.num_users(), 0.0);
    for (std::size_t n = 0; n < c.num_users(); ++n) t[n] = x.total(n);
    return t;
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) d += (a[n] - b[n]) * (a[n] - b[n]);
    return std::sqrt(d);
}

// Least-squares slope of log(residual) against round index.
double log_slope(const std::vector<ResidualSample>& hist, std::size_t from, std::size_t to) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    double m = 0;
    for (std::size_t k = from; k < to; ++k) {
        if (hist[k].residual <= 0.0) continue;
        const double x = static_cast<double>(hist[k].round);
        const double y = std::log(hist[k].residual);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        m += 1.0;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

// Centralized equilibrium totals for fixture B at alpha = 3, used as the
// reference the barrier iteration should approach as eps shrinks. Users 3
// and 4 share only server 2's cpu there: equal marginal conditions give
// x3 = 16^(1/3) x4 and 0.25 x3 + x4 = 8.
std::vector<double> fixture_b_alpha3_totals() {
    const double x4 = 8.0 / (0.25 * std::cbrt(16.0) + 1.0);
    return {2.0, 6.0, std::cbrt(16.0) * x4, x4};
}

}  // namespace

TEST_CASE("barrier prices ramp linearly through the relaxed boundary") {
    Cluster c = build_cluster(lone_pair_spec());
    const double eps = 0.25;

    auto with_usage = [&](double mem_usage) {
        Allocation x(1, 1);
        x.at(0, 0) = mem_usage / 2.0;  // user demands 2 mem per task
        return barrier_multipliers(c, x, 0, eps);
    };

    SECTION("zero at one epsilon of slack, 1/eps at capacity, 2/eps beyond") {
        CHECK(with_usage(10.0 - eps)[1] == 0.0);
        CHECK_THAT(with_usage(10.0)[1], WithinRel(1.0 / eps, 1e-12));
        CHECK_THAT(with_usage(10.0 + eps)[1], WithinRel(2.0 / eps, 1e-12));
    }

    SECTION("deep slack keeps every price at zero") {
        const std::vector<double> lam = with_usage(4.0);
        CHECK(lam[0] == 0.0);  // cpu usage 2, far below 10
        CHECK(lam[1] == 0.0);
    }

    SECTION("malformed queries are rejected") {
        Allocation x(1, 1);
        CHECK_THROWS_AS(barrier_multipliers(c, x, 1, eps), std::invalid_argument);
        CHECK_THROWS_AS(barrier_multipliers(c, x, 0, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(barrier_multipliers(c, x, 0, -1.0), std::invalid_argument);
    }
}

TEST_CASE("local directions grow idle servers and never push below zero") {
    Cluster c = fixture_b();
    UtilitySet u = alpha_params(2.0);
    const double eps = 1e-2;

    SECTION("an unsaturated server offers the raw marginal gain") {
        Allocation x(c.num_users(), c.num_servers());
        x.at(2, 0) = 1.0;
        x.at(2, 1) = 2.0;  // server 2 usage far below capacity, prices zero
        const double gamma = c.gamma(2, 1);
        const double expected = g_prime(u.server(1), x.total(2) / gamma) / gamma;
        CHECK(local_direction(c, u, x, 2, 1, eps) == expected);
        CHECK(expected > 0.0);
    }

    SECTION("a zero cell facing a positive residual stays put") {
        Allocation x(c.num_users(), c.num_servers());
        x.at(2, 1) = 40.0;  // user 3 alone oversubscribes server 2's cpu
        x.at(3, 0) = 1.0;   // user 4 runs only on server 1, total positive
        CHECK(local_direction(c, u, x, 3, 1, eps) == 0.0);

        // The same cell with tasks on it is pulled down by the full residual.
        x.at(3, 1) = 0.5;
        CHECK(local_direction(c, u, x, 3, 1, eps) < 0.0);
    }

    SECTION("users that cannot run at the server are rejected") {
        Allocation x(c.num_users(), c.num_servers());
        x.at(0, 0) = 1.0;
        CHECK_THROWS_AS(local_direction(c, u, x, 0, 1, eps), std::invalid_argument);
    }

    SECTION("a user with no tasks anywhere has no defined direction") {
        Allocation x(c.num_users(), c.num_servers());
        CHECK_THROWS_AS(local_direction(c, u, x, 0, 0, eps), std::domain_error);
    }
}

TEST_CASE("a lone user converges to the closed-form barrier point") {
    Cluster c = build_cluster(lone_pair_spec());
    UtilitySet u = alpha_params(1.0);

    // g'(x/5)/5 = 1/x against the memory price 2(2x - 10 + eps)/eps^2 gives
    // 4x^2 + 2(eps - 10)x - eps^2 = 0, whose positive root approaches
    // gamma = 5 from below as the barrier sharpens.
    for (double eps : {1e-1, 1e-2, 1e-3}) {
        DistributedConfig cfg;
        cfg.barrier_epsilon = eps;
        cfg.residual_tol = 1e-8;
        DistributedResult res = solve_distributed(c, u, cfg);

        const double root =
            ((10.0 - eps) + std::sqrt((10.0 - eps) * (10.0 - eps) + 4.0 * eps * eps)) / 4.0;
        REQUIRE(res.status == SolveStatus::converged);
        CHECK_THAT(res.allocation.at(0, 0), WithinAbs(root, 1e-7));
        CHECK(5.0 - res.allocation.at(0, 0) > 0.0);
        CHECK(5.0 - res.allocation.at(0, 0) <= eps);
        CHECK(res.diagnostics.max_capacity_violation == 0.0);
    }
}

TEST_CASE("fixture B follows the centralized equilibrium at the default barrier") {
    Cluster c = fixture_b();
    UtilitySet u = alpha_params(3.0);
    DistributedResult res = solve_distributed(c, u);
    REQUIRE(res.status == SolveStatus::converged);

    SECTION("totals land within one percent of the equilibrium") {
        const std::vector<double> expected = fixture_b_alpha3_totals();
        for (std::size_t n = 0; n < c.num_users(); ++n)
            CHECK_THAT(res.allocation.total(n), WithinRel(expected[n], 1e-2));
    }

    SECTION("barrier prices approximate the equilibrium prices") {
        // Exact prices: server 1 memory 2 (from user 1), server 2 cpu
        // 1024 / x3^3 (from user 3).
        const double x3 = fixture_b_alpha3_totals()[2];
        CHECK_THAT(res.multipliers.at(0, 1), WithinRel(2.0, 2e-2));
        CHECK_THAT(res.multipliers.at(1, 0), WithinRel(1024.0 / (x3 * x3 * x3), 2e-2));
    }

    SECTION("the soft barrier never oversubscribes a resource here") {
        CHECK(res.diagnostics.max_capacity_violation <= res.diagnostics.complementarity_residual);
        CHECK(res.diagnostics.max_capacity_violation <= 1e-2);
    }

    SECTION("every converged direction is complementary within tolerance") {
        for (std::size_t i = 0; i < c.num_servers(); ++i)
            for (std::size_t n : c.users_at(i)) {
                const double v = local_direction(c, u, res.allocation, n, i, 1e-2);
                if (res.allocation.at(n, i) > 1e-6) {
                    CHECK(std::abs(v) <= 2e-4);
                } else {
                    CHECK(v >= 0.0);
                    CHECK(v <= 2e-4);
                }
            }
    }

    SECTION("the residual decays geometrically after the transient") {
        const auto& hist = res.residual_history;
        REQUIRE(hist.size() > 100);
        REQUIRE(hist.front().round == 0);
        REQUIRE(hist.back().round + 1 == res.rounds);
        for (std::size_t k = 0; k + 1 < hist.size(); ++k)
            REQUIRE(hist[k].round < hist[k + 1].round);

        // Fit the tail in two halves: both slopes negative and alike, the
        // signature of the linear convergence the plots report.
        const std::size_t tail = hist.size() / 5;
        const std::size_t mid = tail + (hist.size() - tail) / 2;
        const double first = log_slope(hist, tail, mid);
        const double second = log_slope(hist, mid, hist.size());
        CHECK(first < 0.0);
        CHECK(second < 0.0);
        CHECK(second / first > 1.0 / 3.0);
        CHECK(second / first < 3.0);
    }
}

TEST_CASE("server updates read only their own column and the shared totals") {
    Cluster c = fixture_b();
    UtilitySet u = alpha_params(2.0);
    const double eps = 1e-2;

    // Same users, same demands for everyone placed on server 2, same
    // allocation, but server 1 and the users confined to it look completely
    // different. Any dependence on remote capacities or remote demand
    // vectors would change the numbers below.
    ClusterSpec poisoned = fixture_b_spec();
    poisoned.servers[0].capacities = {5.0, 2.0, 10.0};
    poisoned.users[0].demand = {2.0, 0.5, 3.0};
    poisoned.users[1].demand = {1.0, 0.25, 1.0};
    Cluster other = build_cluster(poisoned);

    Allocation x(c.num_users(), c.num_servers());
    x.at(0, 0) = 1.0;
    x.at(1, 0) = 3.0;
    x.at(2, 0) = 0.5;
    x.at(2, 1) = 6.0;
    x.at(3, 0) = 0.25;
    x.at(3, 1) = 4.0;

    CHECK(barrier_multipliers(c, x, 1, eps) == barrier_multipliers(other, x, 1, eps));
    CHECK(local_direction(c, u, x, 2, 1, eps) == local_direction(other, u, x, 2, 1, eps));
    CHECK(local_direction(c, u, x, 3, 1, eps) == local_direction(other, u, x, 3, 1, eps));
}

TEST_CASE("iterates stay within bounds even under a violently unstable step") {
    Cluster c = fixture_b();
    UtilitySet u = alpha_params(3.0);

    DistributedConfig cfg;
    cfg.barrier_epsilon = 1e-3;
    cfg.step_sizes = {5.0, 5.0};  // far beyond any stable step
    cfg.residual_tol = 1e-8;

    // Reruns with a shorter round budget reproduce the state after every
    // prefix of the same deterministic trajectory.
    for (std::size_t rounds : {std::size_t{1}, std::size_t{2}, std::size_t{3}, std::size_t{7},
                               std::size_t{31}, std::size_t{200}}) {
        cfg.max_rounds = rounds;
        DistributedResult res = solve_distributed(c, u, cfg);
        CHECK(res.status == SolveStatus::max_iters);
        CHECK(res.rounds == rounds);
        for (std::size_t n = 0; n < c.num_users(); ++n)
            for (std::size_t i = 0; i < c.num_servers(); ++i) {
                CHECK(res.allocation.at(n, i) >= 0.0);
                CHECK(res.allocation.at(n, i) <= c.gamma(n, i));
            }
    }
}

TEST_CASE("an exhausted round budget still reports diagnostics") {
    Cluster c = fixture_b();
    UtilitySet u = alpha_params(3.0);
    DistributedConfig cfg;
    cfg.max_rounds = 50;
    DistributedResult res = solve_distributed(c, u, cfg);

    CHECK(res.status == SolveStatus::max_iters);
    CHECK(res.rounds == 50);
    CHECK(res.diagnostics.complementarity_residual > cfg.residual_tol);
    CHECK_FALSE(res.residual_history.empty());
    CHECK(res.diagnostics.step_sizes.size() == c.num_servers());
}

TEST_CASE("sharper barriers approach the centralized point monotonically") {
    Cluster c = fixture_b();
    UtilitySet u = alpha_params(3.0);

    SolverConfig central_cfg;
    central_cfg.epsilon_stop = 1e-14;
    central_cfg.merit_tol = 1e-15;
    const SolveResult central = solve_psmfa(c, u, central_cfg);
    REQUIRE(central.status == SolveStatus::converged);
    const std::vector<double> reference = totals_of(c, central.allocation);

    // Each leg restarts from the previous fixed point: the remaining error
    // is the gap between neighbouring barrier solutions, not the whole
    // transient, which keeps the sharpest leg affordable.
    std::vector<double> distances;
    std::optional<Allocation> warm;
    const double tols[] = {1e-3, 1e-4, 2.5e-4};
    std::size_t leg = 0;
    for (double eps : {1e-1, 1e-2, 1e-3}) {
        DistributedConfig cfg;
        cfg.barrier_epsilon = eps;
        cfg.residual_tol = tols[leg++];
        cfg.max_rounds = 100000000;
        DistributedResult res = solve_distributed(c, u, cfg, warm);
        REQUIRE(res.status == SolveStatus::converged);
        distances.push_back(distance(totals_of(c, res.allocation), reference));
        warm = res.allocation;
    }

    CHECK(distances[1] < distances[0]);
    CHECK(distances[2] < distances[1]);
}

TEST_CASE("every schedule settles on the same fixed point") {
    Cluster c = fixture_b();
    UtilitySet u = alpha_params(3.0);

    auto run = [&](UpdateSchedule schedule, std::uint64_t seed) {
        DistributedConfig cfg;
        cfg.schedule = schedule;
        cfg.seed = seed;
        DistributedResult res = solve_distributed(c, u, cfg);
        REQUIRE(res.status == SolveStatus::converged);
        return totals_of(c, res.allocation);
    };

    const std::vector<double> sequential = run(UpdateSchedule::round_robin, 0);
    const std::vector<double> parallel = run(UpdateSchedule::parallel, 0);
    const std::vector<double> shuffled = run(UpdateSchedule::shuffled, 7);

    for (std::size_t n = 0; n < c.num_users(); ++n) {
        CHECK_THAT(parallel[n], WithinAbs(sequential[n], 1e-3));
        CHECK_THAT(shuffled[n], WithinAbs(sequential[n], 1e-3));
    }

    SECTION("the shuffled order is reproducible from its seed") {
        const std::vector<double> again = run(UpdateSchedule::shuffled, 7);
        CHECK(again == shuffled);
        const std::vector<double> reseeded = run(UpdateSchedule::shuffled, 8);
        for (std::size_t n = 0; n < c.num_users(); ++n)
            CHECK_THAT(reseeded[n], WithinAbs(shuffled[n], 1e-3));
    }
}

TEST_CASE("distributed configs are validated before any work starts") {
    Cluster c = fixture_b();
    UtilitySet u = alpha_params(1.0);

    DistributedConfig cfg;
    cfg.barrier_epsilon = 0.0;
    CHECK_THROWS_AS(solve_distributed(c, u, cfg), std::invalid_argument);

    cfg = {};
    cfg.step_sizes = {1e-3};  // one kappa for two servers
    CHECK_THROWS_AS(solve_distributed(c, u, cfg), std::invalid_argument);

    cfg = {};
    cfg.step_sizes = {1e-3, 0.0};
    CHECK_THROWS_AS(solve_distributed(c, u, cfg), std::invalid_argument);

    cfg = {};
    cfg.residual_tol = -1.0;
    CHECK_THROWS_AS(solve_distributed(c, u, cfg), std::invalid_argument);

    cfg = {};
    cfg.max_rounds = 0;
    CHECK_THROWS_AS(solve_distributed(c, u, cfg), std::invalid_argument);

    SECTION("start allocations must fit the cluster and its placement") {
        Allocation wrong_shape(2, 2);
        CHECK_THROWS_AS(solve_distributed(c, u, {}, wrong_shape), std::invalid_argument);

        Allocation negative(c.num_users(), c.num_servers());
        negative.at(0, 0) = -1.0;
        CHECK_THROWS_AS(solve_distributed(c, u, {}, negative), std::invalid_argument);

        Allocation misplaced(c.num_users(), c.num_servers());
        misplaced.at(0, 1) = 1.0;  // user 1 is confined to server 1
        CHECK_THROWS_AS(solve_distributed(c, u, {}, misplaced), std::invalid_argument);
    }
}
