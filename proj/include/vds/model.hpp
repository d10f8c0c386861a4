#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace vds {

/// Per-resource quantities, indexed in the order of Cluster::resource_names().
using ResourceVector = std::vector<double>;

struct ServerSpec {
    std::string id;
    ResourceVector capacities;
};

struct UserSpec {
    std::string id;
    double weight = 1.0;
    ResourceVector demand;                 // per-task demand, one entry per resource
    std::vector<std::string> eligible;     // server ids; empty means every server
};

struct ClusterSpec {
    std::vector<std::string> resources;
    std::vector<ServerSpec> servers;
    std::vector<UserSpec> users;
};

/// How a server's capacity is shared between users placed on it.
/// divisible:   each resource is a separate constraint, sum of task demands
///              per resource must fit within the server's capacity vector.
/// time_shared: the server runs one user at a time; a user consumes the
///              fraction x_{n,i} / gamma_{n,i} of the server's timeline and
///              the fractions must sum to at most one.
enum class SharingMode { divisible, time_shared };

constexpr std::size_t no_resource = std::numeric_limits<std::size_t>::max();

/// Validated cluster with the derived placement structure precomputed:
/// per-pair task capacities gamma_{n,i}, per-pair dominant resources, and
/// the eligibility relation restricted to servers that can actually run the
/// user (gamma > 0).
class Cluster {
  public:
    [[nodiscard]] std::size_t num_users() const noexcept { return weights_.size(); }
    [[nodiscard]] std::size_t num_servers() const noexcept { return server_ids_.size(); }
    [[nodiscard]] std::size_t num_resources() const noexcept { return resource_names_.size(); }

    [[nodiscard]] const std::string& user_id(std::size_t n) const { return user_ids_[n]; }
    [[nodiscard]] const std::string& server_id(std::size_t i) const { return server_ids_[i]; }
    [[nodiscard]] const std::string& resource_name(std::size_t r) const { return resource_names_[r]; }

    [[nodiscard]] double weight(std::size_t n) const { return weights_[n]; }
    [[nodiscard]] double total_weight() const noexcept { return total_weight_; }
    [[nodiscard]] double demand(std::size_t n, std::size_t r) const {
        return demands_[n * num_resources() + r];
    }
    [[nodiscard]] double capacity(std::size_t i, std::size_t r) const {
        return capacities_[i * num_resources() + r];
    }

    /// Largest number of the user's tasks that fit on the server alone:
    /// min over resources the user actually demands of capacity / demand.
    /// Zero when the user is not eligible at the server or cannot run there.
    [[nodiscard]] double gamma(std::size_t n, std::size_t i) const {
        return gamma_[n * num_servers() + i];
    }

    /// The resource maximizing demand / capacity at the server (ties broken
    /// toward the lowest resource index); no_resource when gamma is zero.
    [[nodiscard]] std::size_t dominant_resource(std::size_t n, std::size_t i) const {
        return dominant_[n * num_servers() + i];
    }

    [[nodiscard]] bool eligible(std::size_t n, std::size_t i) const {
        return gamma(n, i) > 0.0;
    }

    /// Users eligible at server i (ascending user index).
    [[nodiscard]] const std::vector<std::size_t>& users_at(std::size_t i) const {
        return users_at_[i];
    }
    /// Servers where user n is eligible (ascending server index).
    [[nodiscard]] const std::vector<std::size_t>& servers_of(std::size_t n) const {
        return servers_of_[n];
    }

    [[nodiscard]] std::size_t user_index(const std::string& id) const;
    [[nodiscard]] std::size_t server_index(const std::string& id) const;
    [[nodiscard]] std::size_t resource_index(const std::string& name) const;

    friend Cluster build_cluster(const ClusterSpec& spec);

  private:
    Cluster() = default;

    std::vector<std::string> resource_names_;
    std::vector<std::string> server_ids_;
    std::vector<std::string> user_ids_;
    std::vector<double> weights_;
    std::vector<double> demands_;     // N x M row-major
    std::vector<double> capacities_;  // K x M row-major
    std::vector<double> gamma_;       // N x K row-major
    std::vector<std::size_t> dominant_;
    std::vector<std::vector<std::size_t>> users_at_;
    std::vector<std::vector<std::size_t>> servers_of_;
    double total_weight_ = 0.0;
};

/// Validates the spec and computes the derived tables. Throws
/// std::invalid_argument on malformed input: empty dimensions, mismatched
/// vector lengths, negative or non-finite entries, non-positive weights,
/// duplicate or unknown ids, users with an all-zero demand vector, or users
/// that no eligible server can run.
[[nodiscard]] Cluster build_cluster(const ClusterSpec& spec);

/// Task counts per (user, server) pair, dense N x K row-major. Entries for
/// ineligible pairs are structurally zero.
class Allocation {
  public:
    Allocation() = default;
    Allocation(std::size_t num_users, std::size_t num_servers)
        : num_servers_(num_servers), tasks_(num_users * num_servers, 0.0) {}

    [[nodiscard]] double at(std::size_t n, std::size_t i) const {
        return tasks_[n * num_servers_ + i];
    }
    double& at(std::size_t n, std::size_t i) { return tasks_[n * num_servers_ + i]; }

    /// Total tasks of user n across servers.
    [[nodiscard]] double total(std::size_t n) const;

    [[nodiscard]] std::size_t num_users() const noexcept {
        return num_servers_ == 0 ? 0 : tasks_.size() / num_servers_;
    }
    [[nodiscard]] std::size_t num_servers() const noexcept { return num_servers_; }

  private:
    std::size_t num_servers_ = 0;
    std::vector<double> tasks_;
};

/// Amount of resource r in use at server i.
[[nodiscard]] double usage(const Cluster& c, const Allocation& x, std::size_t i, std::size_t r);

/// Fraction of server i's timeline in use (time-shared mode).
[[nodiscard]] double time_usage(const Cluster& c, const Allocation& x, std::size_t i);

/// Nonnegative tasks, zero off eligible pairs, and within capacity in the
/// given mode, all up to an absolute tolerance scaled by capacity.
[[nodiscard]] bool is_feasible(const Cluster& c, const Allocation& x, SharingMode mode,
                               double tol = 1e-9);

/// Resources of server i whose remaining slack is at most rel_tol * max(1, capacity).
[[nodiscard]] std::vector<std::size_t> saturated_resources(const Cluster& c, const Allocation& x,
                                                           std::size_t i, double rel_tol = 1e-8);

/// Virtual dominant share of user n at server i: total tasks over gamma.
/// Zero gamma (ineligible pair) yields +infinity for a user with tasks and 0
/// for an idle one, so ineligible pairs never look attractive.
[[nodiscard]] double virtual_dominant_share(const Cluster& c, const Allocation& x, std::size_t n,
                                            std::size_t i);

/// Weighted variant: total tasks over (weight * gamma).
[[nodiscard]] double weighted_vds(const Cluster& c, const Allocation& x, std::size_t n,
                                  std::size_t i);

/// The equal-split allocation x_{n,i} = gamma_{n,i} * w_n / sum_m w_m.
/// Feasible in both sharing modes.
[[nodiscard]] Allocation uniform_allocation(const Cluster& c);

/// Tasks completable from an arbitrary resource bundle: min over resources
/// the user demands of bundle_r / demand_r. Used by the envy check.
[[nodiscard]] double task_utility(const Cluster& c, std::size_t n, const ResourceVector& bundle);

/// Cluster-wide fraction of resource r in use.
[[nodiscard]] double resource_utilization(const Cluster& c, const Allocation& x, std::size_t r);

}  // namespace vds
