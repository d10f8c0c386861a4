#include "vds/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace vds {

namespace {

void require(bool cond, const std::string& message) {
    if (!cond) throw std::invalid_argument(message);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

std::size_t Cluster::user_index(const std::string& id) const {
    auto it = std::find(user_ids_.begin(), user_ids_.end(), id);
    require(it != user_ids_.end(), "unknown user id: " + id);
    return static_cast<std::size_t>(it - user_ids_.begin());
}

std::size_t Cluster::server_index(const std::string& id) const {
    auto it = std::find(server_ids_.begin(), server_ids_.end(), id);
    require(it != server_ids_.end(), "unknown server id: " + id);
    return static_cast<std::size_t>(it - server_ids_.begin());
}

std::size_t Cluster::resource_index(const std::string& name) const {
    auto it = std::find(resource_names_.begin(), resource_names_.end(), name);
    require(it != resource_names_.end(), "unknown resource: " + name);
    return static_cast<std::size_t>(it - resource_names_.begin());
}

Cluster build_cluster(const ClusterSpec& spec) {
    const std::size_t M = spec.resources.size();
    const std::size_t K = spec.servers.size();
    const std::size_t N = spec.users.size();
    require(M > 0, "cluster needs at least one resource");
    require(K > 0, "cluster needs at least one server");
    require(N > 0, "cluster needs at least one user");

    Cluster c;
    c.resource_names_ = spec.resources;
    {
        std::unordered_set<std::string> seen(spec.resources.begin(), spec.resources.end());
        require(seen.size() == M, "duplicate resource name");
    }

    std::unordered_map<std::string, std::size_t> server_idx;
    c.server_ids_.reserve(K);
    c.capacities_.resize(K * M);
    for (std::size_t i = 0; i < K; ++i) {
        const ServerSpec& s = spec.servers[i];
        require(!s.id.empty(), "server id must be non-empty");
        require(server_idx.emplace(s.id, i).second, "duplicate server id: " + s.id);
        require(s.capacities.size() == M,
                "server " + s.id + ": capacity vector length does not match resource count");
        for (std::size_t r = 0; r < M; ++r) {
            require(finite_nonneg(s.capacities[r]),
                    "server " + s.id + ": capacities must be finite and nonnegative");
            c.capacities_[i * M + r] = s.capacities[r];
        }
        c.server_ids_.push_back(s.id);
    }

    std::unordered_set<std::string> user_seen;
    c.user_ids_.reserve(N);
    c.weights_.reserve(N);
    c.demands_.resize(N * M);
    std::vector<std::vector<bool>> declared(N, std::vector<bool>(K, false));
    for (std::size_t n = 0; n < N; ++n) {
        const UserSpec& u = spec.users[n];
        require(!u.id.empty(), "user id must be non-empty");
        require(user_seen.insert(u.id).second, "duplicate user id: " + u.id);
        require(std::isfinite(u.weight) && u.weight > 0.0,
                "user " + u.id + ": weight must be finite and positive");
        require(u.demand.size() == M,
                "user " + u.id + ": demand vector length does not match resource count");
        bool any_positive = false;
        for (std::size_t r = 0; r < M; ++r) {
            require(finite_nonneg(u.demand[r]),
                    "user " + u.id + ": demands must be finite and nonnegative");
            c.demands_[n * M + r] = u.demand[r];
            any_positive = any_positive || u.demand[r] > 0.0;
        }
        require(any_positive, "user " + u.id + ": demand vector must have a positive entry");
        if (u.eligible.empty()) {
            declared[n].assign(K, true);
        } else {
            for (const std::string& sid : u.eligible) {
                auto it = server_idx.find(sid);
                require(it != server_idx.end(),
                        "user " + u.id + ": unknown eligible server id: " + sid);
                declared[n][it->second] = true;
            }
        }
        c.user_ids_.push_back(u.id);
        c.weights_.push_back(u.weight);
    }
    c.total_weight_ = std::accumulate(c.weights_.begin(), c.weights_.end(), 0.0);

    // gamma_{n,i}: how many of n's tasks fit on i alone, restricted to the
    // resources n actually demands. A zero-capacity resource the user needs
    // makes the server unusable for that user (gamma 0), as does a server the
    // user did not declare.
    c.gamma_.assign(N * K, 0.0);
    c.dominant_.assign(N * K, no_resource);
    c.users_at_.resize(K);
    c.servers_of_.resize(N);
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t i = 0; i < K; ++i) {
            if (!declared[n][i]) continue;
            double g = std::numeric_limits<double>::infinity();
            std::size_t dom = no_resource;
            double best_ratio = -1.0;
            for (std::size_t r = 0; r < M; ++r) {
                const double d = c.demands_[n * M + r];
                if (d <= 0.0) continue;
                const double cap = c.capacities_[i * M + r];
                g = std::min(g, cap / d);
                // Dominant resource: largest demand-to-capacity ratio. A
                // zero-capacity resource the user demands dominates trivially
                // but also forces gamma to 0, so the pair is dropped anyway.
                if (cap > 0.0) {
                    const double ratio = d / cap;
                    if (ratio > best_ratio + 0.0) {
                        best_ratio = ratio;
                        dom = r;
                    }
                }
            }
            if (!std::isfinite(g) || g <= 0.0) continue;
            c.gamma_[n * K + i] = g;
            c.dominant_[n * K + i] = dom;
            c.users_at_[i].push_back(n);
            c.servers_of_[n].push_back(i);
        }
    }
    for (std::size_t n = 0; n < N; ++n) {
        require(!c.servers_of_[n].empty(),
                "user " + c.user_ids_[n] + ": no eligible server can run this user");
    }
    return c;
}

double Allocation::total(std::size_t n) const {
    double t = 0.0;
    for (std::size_t i = 0; i < num_servers_; ++i) t += tasks_[n * num_servers_ + i];
    return t;
}

double usage(const Cluster& c, const Allocation& x, std::size_t i, std::size_t r) {
    double u = 0.0;
    for (std::size_t n : c.users_at(i)) u += x.at(n, i) * c.demand(n, r);
    return u;
}

double time_usage(const Cluster& c, const Allocation& x, std::size_t i) {
    double u = 0.0;
    for (std::size_t n : c.users_at(i)) u += x.at(n, i) / c.gamma(n, i);
    return u;
}

bool is_feasible(const Cluster& c, const Allocation& x, SharingMode mode, double tol) {
    if (x.num_users() != c.num_users() || x.num_servers() != c.num_servers()) return false;
    for (std::size_t n = 0; n < c.num_users(); ++n) {
        for (std::size_t i = 0; i < c.num_servers(); ++i) {
            const double v = x.at(n, i);
            if (!std::isfinite(v) || v < -tol) return false;
            if (!c.eligible(n, i) && v > tol) return false;
        }
    }
    for (std::size_t i = 0; i < c.num_servers(); ++i) {
        if (mode == SharingMode::time_shared) {
            if (time_usage(c, x, i) > 1.0 + tol) return false;
        } else {
            for (std::size_t r = 0; r < c.num_resources(); ++r) {
                const double cap = c.capacity(i, r);
                if (usage(c, x, i, r) > cap + tol * std::max(1.0, cap)) return false;
            }
        }
    }
    return true;
}

std::vector<std::size_t> saturated_resources(const Cluster& c, const Allocation& x, std::size_t i,
                                             double rel_tol) {
    std::vector<std::size_t> sat;
    for (std::size_t r = 0; r < c.num_resources(); ++r) {
        const double cap = c.capacity(i, r);
        if (cap <= 0.0) continue;  // unusable resource, nothing to saturate
        const double slack = cap - usage(c, x, i, r);
        if (slack <= rel_tol * std::max(1.0, cap)) sat.push_back(r);
    }
    return sat;
}

double virtual_dominant_share(const Cluster& c, const Allocation& x, std::size_t n,
                              std::size_t i) {
    const double g = c.gamma(n, i);
    const double t = x.total(n);
    if (g <= 0.0) return t > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return t / g;
}

double weighted_vds(const Cluster& c, const Allocation& x, std::size_t n, std::size_t i) {
    return virtual_dominant_share(c, x, n, i) / c.weight(n);
}

Allocation uniform_allocation(const Cluster& c) {
    Allocation x(c.num_users(), c.num_servers());
    for (std::size_t n = 0; n < c.num_users(); ++n)
        for (std::size_t i : c.servers_of(n))
            x.at(n, i) = c.gamma(n, i) * c.weight(n) / c.total_weight();
    return x;
}

double task_utility(const Cluster& c, std::size_t n, const ResourceVector& bundle) {
    double u = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < c.num_resources(); ++r) {
        const double d = c.demand(n, r);
        if (d <= 0.0) continue;
        const double have = r < bundle.size() ? bundle[r] : 0.0;
        u = std::min(u, have / d);
    }
    return std::isfinite(u) ? u : 0.0;
}

double resource_utilization(const Cluster& c, const Allocation& x, std::size_t r) {
    double used = 0.0;
    double cap = 0.0;
    for (std::size_t i = 0; i < c.num_servers(); ++i) {
        used += usage(c, x, i, r);
        cap += c.capacity(i, r);
    }
    return cap > 0.0 ? used / cap : 0.0;
}

}  // namespace vds
