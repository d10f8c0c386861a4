#pragma once

#include "vds/model.hpp"

namespace vdstest {

// Two-server cluster used throughout the worked examples. S1 offers 12 CPU
// cores, 4 GB RAM and 75 Mb/s of network bandwidth; S2 has no network
// connectivity, which keeps the network-demanding users u1 and u2 off it.
// u3 and u4 may run anywhere.
//
// gamma table (tasks when monopolizing a server):
//          S1    S2
//   u1      4     0
//   u2     12     0
//   u3      4    16
//   u4      4    16     (variant B changes u4's demand: 8 and 8)
inline vds::ClusterSpec fixture_a_spec() {
    vds::ClusterSpec s;
    s.resources = {"cpu", "ram", "net"};
    s.servers = {{"S1", {12.0, 4.0, 75.0}}, {"S2", {8.0, 16.0, 0.0}}};
    s.users = {
        {"u1", 1.0, {1.0, 1.0, 6.0}, {"S1"}},
        {"u2", 1.0, {0.5, 1.0 / 3.0, 6.0}, {"S1"}},
        {"u3", 1.0, {0.25, 1.0, 0.0}, {"S1", "S2"}},
        {"u4", 1.0, {0.25, 1.0, 0.0}, {"S1", "S2"}},
    };
    return s;
}

inline vds::ClusterSpec fixture_b_spec() {
    vds::ClusterSpec s = fixture_a_spec();
    s.users[3].demand = {1.0, 0.5, 0.0};
    return s;
}

inline vds::Cluster fixture_a() { return vds::build_cluster(fixture_a_spec()); }
inline vds::Cluster fixture_b() { return vds::build_cluster(fixture_b_spec()); }

// Reference allocations quoted in the worked examples.
inline vds::Allocation fixture_a_psdsf() {
    vds::Allocation x(4, 2);
    x.at(0, 0) = 2.0;
    x.at(1, 0) = 6.0;
    x.at(2, 1) = 8.0;
    x.at(3, 1) = 8.0;
    return x;
}

inline vds::Allocation fixture_b_psdsf() {
    vds::Allocation x(4, 2);
    x.at(0, 0) = 2.0;
    x.at(1, 0) = 6.0;
    x.at(2, 1) = 32.0 / 3.0;
    x.at(3, 1) = 16.0 / 3.0;
    return x;
}

inline vds::Allocation fixture_a_drfh() {
    vds::Allocation x(4, 2);
    x.at(0, 0) = 3.0;
    x.at(1, 0) = 3.0;
    x.at(2, 1) = 8.0;
    x.at(3, 1) = 8.0;
    return x;
}

// Exact maximizers of sum_n log(total_n) over the placement polytope,
// derived by hand from the optimality conditions and certified inside the
// tests by reconstructing supporting prices.
//
// Fixture A: memory prices 1/2 at S1 and 1/8 at S2 support (2, 6, 8, 8) --
// the same totals progressive filling reaches, since every user is
// memory-bound wherever it can run.
inline vds::Allocation fixture_a_propfair() { return fixture_a_psdsf(); }

// Fixture B: u3 and u4 saturate both CPU and RAM at S2 (prices 5/24, 1/48),
// RAM alone binds at S1 (price 1/2). u4 stays off S1 because a task there
// costs 1/2 * 1/2 = 1/4 > 7/32, its marginal value.
inline vds::Allocation fixture_b_propfair() {
    vds::Allocation x(4, 2);
    x.at(0, 0) = 2.0;
    x.at(1, 0) = 6.0;
    x.at(2, 1) = 96.0 / 7.0;
    x.at(3, 1) = 32.0 / 7.0;
    return x;
}

}  // namespace vdstest
