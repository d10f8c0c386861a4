#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>

#include "support/fixtures.hpp"
#include "vds/numerics.hpp"
#include "vds/utility.hpp"

using namespace vds;
using namespace vdstest;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("utility parameter validation") {
    CHECK_NOTHROW(validate(UtilityParams{1.0, 1.0, 0.0}));
    CHECK_NOTHROW(validate(UtilityParams{2.5, 0.0, 0.7}));
    CHECK_NOTHROW(validate(UtilityParams{1.0, 1.0, 0.5}));
    CHECK_THROWS_AS(validate(UtilityParams{0.0, 1.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(validate(UtilityParams{-1.0, 1.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(validate(UtilityParams{1.0, 0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(validate(UtilityParams{1.0, -0.5, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(validate(UtilityParams{std::nan(""), 1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("marginal utility closed forms") {
    SECTION("power family") {
        const UtilityParams p1{1.0, 1.0, 0.0};
        const UtilityParams p2{2.0, 1.0, 0.0};
        const UtilityParams p3{3.0, 1.0, 0.0};
        CHECK_THAT(g_prime(p1, 0.5), WithinRel(2.0, 1e-12));
        CHECK_THAT(g_prime(p1, 4.0), WithinRel(0.25, 1e-12));
        CHECK_THAT(g_prime(p2, 0.5), WithinRel(4.0, 1e-12));
        CHECK_THAT(g_prime(p3, 2.0), WithinRel(0.125, 1e-12));
    }
    SECTION("scale parameter enters through A^alpha") {
        const UtilityParams p{2.0, 3.0, 0.0};
        CHECK_THAT(g_prime(p, 2.0), WithinRel(9.0 / 4.0, 1e-12));
    }
    SECTION("logarithmic term adds B over z") {
        const UtilityParams p{2.0, 1.0, 0.5};
        CHECK_THAT(g_prime(p, 2.0), WithinRel(0.25 + 0.25, 1e-12));
        const UtilityParams only_log{5.0, 0.0, 2.0};
        CHECK_THAT(g_prime(only_log, 4.0), WithinRel(0.5, 1e-12));
    }
    SECTION("strictly decreasing") {
        const UtilityParams p{1.5, 1.0, 0.3};
        double prev = g_prime(p, 0.1);
        for (double z = 0.2; z < 5.0; z += 0.1) {
            const double cur = g_prime(p, z);
            CHECK(cur < prev);
            prev = cur;
        }
    }
}

TEST_CASE("derivatives are consistent with finite differences") {
    const UtilityParams params[] = {
        {1.0, 1.0, 0.0}, {2.0, 1.0, 0.0}, {3.0, 1.0, 0.0},
        {1.0, 1.0, 0.5}, {2.0, 1.0, 0.5}, {0.7, 2.0, 1.3},
    };
    for (const auto& p : params) {
        for (double z : {0.3, 0.9, 1.7, 3.2}) {
            const auto value = [&](const std::vector<double>& v) { return g_value(p, v[0]); };
            const auto marg = [&](const std::vector<double>& v) { return g_prime(p, v[0]); };
            const double fd_g = central_difference_gradient(value, {z})[0];
            const double fd_gp = central_difference_gradient(marg, {z})[0];
            CHECK_THAT(g_prime(p, z), WithinRel(fd_g, 1e-6));
            CHECK_THAT(g_double_prime(p, z), WithinRel(fd_gp, 1e-6));
            CHECK(g_double_prime(p, z) < 0.0);
        }
    }
}

TEST_CASE("utility antiderivative is gauged at one") {
    for (const UtilityParams& p :
         {UtilityParams{1.0, 1.0, 0.0}, UtilityParams{2.0, 1.0, 0.0}, UtilityParams{0.5, 2.0, 0.0},
          UtilityParams{1.0, 1.0, 0.5}, UtilityParams{3.0, 0.0, 1.0}}) {
        CHECK_THAT(g_value(p, 1.0), WithinAbs(0.0, 1e-14));
    }
    // alpha = 1: (A + B) log z.
    CHECK_THAT(g_value(UtilityParams{1.0, 1.0, 0.5}, 2.0), WithinRel(1.5 * std::log(2.0), 1e-12));
    // alpha = 2, A = 1: z^{-1} terms integrate to 1 - 1/z.
    CHECK_THAT(g_value(UtilityParams{2.0, 1.0, 0.0}, 4.0), WithinRel(1.0 - 0.25, 1e-12));
}

TEST_CASE("per-server utility set with overrides") {
    UtilitySet u(UtilityParams{1.0, 1.0, 0.0});
    CHECK(u.server(0).alpha == 1.0);
    CHECK(u.server(7).alpha == 1.0);
    u.set_server(1, UtilityParams{3.0, 1.0, 0.0});
    CHECK(u.server(0).alpha == 1.0);
    CHECK(u.server(1).alpha == 3.0);
    CHECK_THROWS_AS(u.set_server(2, UtilityParams{0.0, 1.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(UtilitySet(UtilityParams{1.0, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("server utility sums weighted marginal-integral values") {
    const Cluster b = fixture_b();
    const Allocation x = fixture_b_psdsf();
    UtilitySet u(UtilityParams{1.0, 1.0, 0.0});
    // At server two both users sit at weighted share 2/3.
    CHECK_THAT(server_utility(b, x, u, 1), WithinRel(2.0 * std::log(2.0 / 3.0), 1e-12));
    // Server one: shares 0.5, 0.5, 8/3, 2/3.
    const double expect_s1 =
        2.0 * std::log(0.5) + std::log(8.0 / 3.0) + std::log(2.0 / 3.0);
    CHECK_THAT(server_utility(b, x, u, 0), WithinRel(expect_s1, 1e-12));
    CHECK_THAT(total_utility(b, x, u), WithinRel(expect_s1 + 2.0 * std::log(2.0 / 3.0), 1e-12));

    SECTION("idle users make the diagnostic undefined") {
        const Allocation idle(b.num_users(), b.num_servers());
        CHECK_THROWS_AS(server_utility(b, idle, u, 0), std::domain_error);
    }
    SECTION("weights scale both the share and the summand") {
        ClusterSpec s = fixture_b_spec();
        s.users[0].weight = 2.0;
        const Cluster c2 = build_cluster(s);
        // u1's weighted share halves to 0.25 and its term doubles.
        const double expect =
            2.0 * std::log(0.25) + std::log(0.5) + std::log(8.0 / 3.0) + std::log(2.0 / 3.0);
        CHECK_THAT(server_utility(c2, x, u, 0), WithinRel(expect, 1e-12));
    }
}
