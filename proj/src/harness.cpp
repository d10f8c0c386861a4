#include "vds/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "vds/baselines.hpp"
#include "vds/fairness.hpp"

namespace vds {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            return fields;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
}

bool parse_size(std::string_view s, std::size_t& out) {
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

TraceParse parse_trace(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("parse_trace: empty stream");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const std::vector<std::string_view> header = split_fields(line);
    if (header.size() < 3 || header[0] != "epoch" || header[1] != "user")
        throw std::invalid_argument("parse_trace: header must be epoch,user,<resource names...>");

    TraceParse out;
    for (std::size_t k = 2; k < header.size(); ++k) {
        if (header[k].empty())
            throw std::invalid_argument("parse_trace: empty resource name in header");
        if (std::find(out.resources.begin(), out.resources.end(), header[k]) !=
            out.resources.end())
            throw std::invalid_argument("parse_trace: duplicate resource name in header");
        out.resources.emplace_back(header[k]);
    }
    const std::size_t m = out.resources.size();

    // Rows of the same (epoch, user) are individual tasks of one job; the
    // job's demand is their sum. The map also delivers the sorted order.
    std::map<std::pair<std::size_t, std::string>, ResourceVector> sums;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;

        const std::vector<std::string_view> fields = split_fields(line);
        if (fields.size() != m + 2) {
            out.rejected.push_back("line " + std::to_string(lineno) + ": expected " +
                                   std::to_string(m + 2) + " fields, got " +
                                   std::to_string(fields.size()));
            continue;
        }
        std::size_t epoch = 0;
        if (!parse_size(fields[0], epoch)) {
            out.rejected.push_back("line " + std::to_string(lineno) +
                                   ": epoch is not a non-negative integer");
            continue;
        }
        if (fields[1].empty()) {
            out.rejected.push_back("line " + std::to_string(lineno) + ": empty user id");
            continue;
        }

        ResourceVector usage(m, 0.0);
        bool bad = false;
        for (std::size_t r = 0; r < m && !bad; ++r) {
            double v = 0.0;
            if (!parse_double(fields[r + 2], v) || !std::isfinite(v)) {
                out.rejected.push_back("line " + std::to_string(lineno) + ": unreadable " +
                                       out.resources[r] + " usage");
                bad = true;
            } else if (v < 0.0) {
                out.rejected.push_back("line " + std::to_string(lineno) + ": negative " +
                                       out.resources[r] + " usage");
                bad = true;
            } else {
                usage[r] = v;
            }
        }
        if (bad) continue;

        auto [it, fresh] = sums.try_emplace({epoch, std::string(fields[1])}, std::move(usage));
        if (!fresh)
            for (std::size_t r = 0; r < m; ++r) it->second[r] += usage[r];
    }

    out.records.reserve(sums.size());
    for (auto& [key, vec] : sums)
        out.records.push_back(TraceRecord{key.second, key.first, std::move(vec)});
    return out;
}

EpochJobs build_epoch_jobs(const std::vector<TraceRecord>& records, std::size_t epoch) {
    EpochJobs out;
    std::map<std::string, std::size_t> index;
    for (const TraceRecord& rec : records) {
        if (rec.epoch != epoch) continue;
        for (double v : rec.usage)
            if (!std::isfinite(v) || v < 0.0)
                throw std::invalid_argument("build_epoch_jobs: usage must be finite and >= 0");
        const auto [it, fresh] = index.try_emplace(rec.user, out.jobs.size());
        if (fresh) {
            JobState job;
            job.user = rec.user;
            job.demand = rec.usage;
            job.arrival = epoch;
            out.jobs.push_back(std::move(job));
        } else {
            ResourceVector& demand = out.jobs[it->second].demand;
            if (demand.size() != rec.usage.size())
                throw std::invalid_argument(
                    "build_epoch_jobs: records disagree on the resource count");
            for (std::size_t r = 0; r < demand.size(); ++r) demand[r] += rec.usage[r];
        }
    }

    std::vector<JobState> kept;
    kept.reserve(out.jobs.size());
    for (JobState& job : out.jobs) {
        const double peak =
            job.demand.empty() ? 0.0 : *std::max_element(job.demand.begin(), job.demand.end());
        if (peak <= 0.0) {
            out.notes.push_back("epoch " + std::to_string(epoch) + ": user " + job.user +
                                " has zero demand, skipped");
            continue;
        }
        job.unit.resize(job.demand.size());
        for (std::size_t r = 0; r < job.demand.size(); ++r) job.unit[r] = job.demand[r] / peak;
        job.quanta = epoch_seconds * peak;
        kept.push_back(std::move(job));
    }
    out.jobs = std::move(kept);
    return out;
}

namespace {

struct RunningJob {
    JobState state;
    double required = 0.0;          // quanta at epoch start, before any work
    std::vector<double> tasks;      // current allocation row, one entry per server
    double rate = 0.0;              // total tasks, i.e. quanta consumed per second
    bool active = true;
};

void validate_sim_inputs(const std::vector<std::string>& resources,
                         const std::vector<ServerSpec>& servers, const SimConfig& cfg) {
    if (resources.empty()) throw std::invalid_argument("run_simulation: no resources");
    if (servers.empty()) throw std::invalid_argument("run_simulation: no servers");
    for (const ServerSpec& s : servers) {
        if (s.capacities.size() != resources.size())
            throw std::invalid_argument("run_simulation: server " + s.id +
                                        " has the wrong capacity dimension");
        for (double cap : s.capacities)
            if (!std::isfinite(cap) || cap < 0.0)
                throw std::invalid_argument("run_simulation: server " + s.id +
                                            " has a negative or non-finite capacity");
    }
    if (!(cfg.accept_merit > 0.0) || !std::isfinite(cfg.accept_merit))
        throw std::invalid_argument("run_simulation: accept_merit must be positive");
    for (const auto& [user, ids] : cfg.eligibility)
        for (const std::string& id : ids)
            if (std::none_of(servers.begin(), servers.end(),
                             [&](const ServerSpec& s) { return s.id == id; }))
                throw std::invalid_argument("run_simulation: eligibility of " + user +
                                            " names unknown server " + id);
}

bool runnable_somewhere(const std::vector<ServerSpec>& servers, const ResourceVector& unit,
                        const std::vector<std::string>* eligible) {
    for (const ServerSpec& s : servers) {
        if (eligible && !eligible->empty() &&
            std::find(eligible->begin(), eligible->end(), s.id) == eligible->end())
            continue;
        bool fits = true;
        for (std::size_t r = 0; r < unit.size() && fits; ++r)
            if (unit[r] > 0.0 && s.capacities[r] <= 0.0) fits = false;
        if (fits) return true;
    }
    return false;
}

Cluster segment_cluster(const std::vector<std::string>& resources,
                        const std::vector<ServerSpec>& servers,
                        const std::vector<RunningJob*>& active, const SimConfig& cfg) {
    ClusterSpec spec;
    spec.resources = resources;
    spec.servers = servers;
    spec.users.reserve(active.size());
    for (const RunningJob* job : active) {
        UserSpec u;
        u.id = job->state.user;
        u.demand = job->state.unit;
        const auto it = cfg.eligibility.find(u.id);
        if (it != cfg.eligibility.end()) u.eligible = it->second;
        spec.users.push_back(std::move(u));
    }
    return build_cluster(spec);
}

/// Returns the mechanism's allocation; `accepted` reports whether an apf
/// solve met the acceptance threshold (other mechanisms always do).
Allocation allocate(const Cluster& c, const SimConfig& cfg, bool& accepted) {
    accepted = true;
    switch (cfg.mechanism) {
        case Mechanism::apf: {
            const SolveResult res = solve_psmfa(c, cfg.utility, cfg.solver);
            accepted = res.status == SolveStatus::converged ||
                       (!res.merit_history.empty() &&
                        res.merit_history.back() <= cfg.accept_merit);
            return res.allocation;
        }
        case Mechanism::psdsf:
            return solve_psdsf(c);
        case Mechanism::drfh:
            return solve_drfh(c);
        case Mechanism::tsf:
            return solve_tsf(c);
        case Mechanism::uniform:
            return uniform_allocation(c);
    }
    throw std::invalid_argument("run_simulation: unknown mechanism");
}

DelayStats summarize_delays(const std::vector<double>& delays) {
    DelayStats stats;
    stats.count = delays.size();
    if (delays.empty()) return stats;
    double sum = 0.0;
    for (const double d : delays) sum += d;
    stats.mean = sum / static_cast<double>(delays.size());
    double sq = 0.0;
    for (const double d : delays) sq += (d - stats.mean) * (d - stats.mean);
    stats.stddev = std::sqrt(sq / static_cast<double>(delays.size()));
    return stats;
}

}  // namespace

SimReport run_simulation(const std::vector<std::string>& resources,
                         const std::vector<ServerSpec>& servers,
                         const std::vector<TraceRecord>& trace, const SimConfig& config) {
    validate_sim_inputs(resources, servers, config);

    const std::size_t k = servers.size();
    const std::size_t m = resources.size();
    SimReport report;
    report.num_servers = k;
    report.num_resources = m;

    ResourceVector capacity_sum(m, 0.0);
    for (const ServerSpec& s : servers)
        for (std::size_t r = 0; r < m; ++r) capacity_sum[r] += s.capacities[r];

    std::size_t last_epoch = 0;
    bool any = false;
    for (const TraceRecord& rec : trace) {
        last_epoch = any ? std::max(last_epoch, rec.epoch) : rec.epoch;
        any = true;
    }
    if (!any) return report;

    std::vector<double> quanta_samples;
    std::vector<double> completion_samples;
    std::vector<double> short_delays;

    for (std::size_t e = 0; e <= last_epoch; ++e) {
        EpochStats st;
        st.epoch = e;
        st.utilization.assign(k * m, 0.0);

        EpochJobs ej = build_epoch_jobs(trace, e);
        for (std::string& note : ej.notes) report.notes.push_back(std::move(note));

        std::vector<RunningJob> jobs;
        jobs.reserve(ej.jobs.size());
        for (JobState& job : ej.jobs) {
            if (job.unit.size() != m)
                throw std::invalid_argument(
                    "run_simulation: trace and cluster disagree on the resource count");
            const auto it = config.eligibility.find(job.user);
            const std::vector<std::string>* eligible =
                it == config.eligibility.end() ? nullptr : &it->second;
            if (!runnable_somewhere(servers, job.unit, eligible)) {
                report.notes.push_back("epoch " + std::to_string(e) + ": user " + job.user +
                                       " fits no eligible server, skipped");
                continue;
            }
            RunningJob running;
            running.required = job.quanta;
            running.state = std::move(job);
            running.tasks.assign(k, 0.0);
            jobs.push_back(std::move(running));
        }

        st.jobs = jobs.size();
        for (const RunningJob& job : jobs) quanta_samples.push_back(job.required);

        ResourceVector cluster_use(m, 0.0);  // usage integrated over the epoch
        double deviation_integral = 0.0;
        double t = 0.0;
        bool have_allocation = false;

        while (t < epoch_seconds) {
            std::vector<RunningJob*> active;
            for (RunningJob& job : jobs)
                if (job.active) active.push_back(&job);
            if (active.empty()) break;

            const Cluster cluster = segment_cluster(resources, servers, active, config);
            bool accepted = true;
            Allocation x = allocate(cluster, config, accepted);
            if (accepted || !have_allocation) {
                for (std::size_t idx = 0; idx < active.size(); ++idx) {
                    active[idx]->rate = x.total(idx);
                    for (std::size_t i = 0; i < k; ++i) active[idx]->tasks[i] = x.at(idx, i);
                }
                have_allocation = true;
                if (!accepted) {
                    st.flagged = true;
                    report.notes.push_back("epoch " + std::to_string(e) +
                                           ": solver missed the acceptance threshold, best "
                                           "iterate adopted");
                }
            } else {
                // The rejected solve is discarded; survivors keep the rows
                // they already hold, which remain feasible because usage only
                // shrank when the departed jobs released their share.
                st.flagged = true;
                report.notes.push_back("epoch " + std::to_string(e) +
                                       ": solver missed the acceptance threshold, previous "
                                       "allocation retained");
                for (std::size_t idx = 0; idx < active.size(); ++idx)
                    for (std::size_t i = 0; i < k; ++i) x.at(idx, i) = active[idx]->tasks[i];
            }

            double until_finish = std::numeric_limits<double>::infinity();
            std::size_t first_done = active.size();  // argmin, completed exactly
            for (std::size_t idx = 0; idx < active.size(); ++idx) {
                if (active[idx]->rate <= 0.0) continue;
                const double need = active[idx]->state.quanta / active[idx]->rate;
                if (need < until_finish) {
                    until_finish = need;
                    first_done = idx;
                }
            }
            const bool finishes = until_finish <= epoch_seconds - t;
            const double seg_end = finishes ? t + until_finish : epoch_seconds;
            const double dt = seg_end - t;

            if (dt > 0.0) {
                for (std::size_t i = 0; i < k; ++i) {
                    for (std::size_t r = 0; r < m; ++r) {
                        double used = 0.0;
                        for (const RunningJob* job : active)
                            used += job->tasks[i] * job->state.unit[r];
                        st.utilization[i * m + r] += used * dt;
                        cluster_use[r] += used * dt;
                        report.max_capacity_overshoot = std::max(
                            report.max_capacity_overshoot, used - servers[i].capacities[r]);
                    }
                }
                const DeviationSummary devs = deviation_summary(cluster, x);
                st.max_deviation = std::max(st.max_deviation, devs.max);
                deviation_integral += dt * devs.weighted_mean;

                for (RunningJob* job : active)
                    job->state.quanta = std::max(0.0, job->state.quanta - job->rate * dt);
            }
            t = seg_end;
            if (!finishes) break;

            for (std::size_t idx = 0; idx < active.size(); ++idx) {
                RunningJob* job = active[idx];
                const double tol = 1e-9 * std::max(1.0, job->required);
                if (idx != first_done && job->state.quanta > tol) continue;
                job->state.quanta = 0.0;
                job->state.completion = t;
                job->active = false;
                st.completed += 1;
                completion_samples.push_back(t);
                if (job->required < 1.0 && job->rate > 0.0)
                    short_delays.push_back(1.0 / job->rate);
            }
        }

        // Jobs needing under one quantum report 1/x at whatever allocation
        // they ended the epoch on, finished or not.
        for (const RunningJob& job : jobs)
            if (job.active && job.required < 1.0 && job.rate > 0.0)
                short_delays.push_back(1.0 / job.rate);

        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t r = 0; r < m; ++r) {
                const double cap = servers[i].capacities[r];
                st.utilization[i * m + r] =
                    cap > 0.0 ? st.utilization[i * m + r] / (epoch_seconds * cap) : 0.0;
            }
        }
        double overall = 0.0;
        std::size_t counted = 0;
        for (std::size_t r = 0; r < m; ++r) {
            if (capacity_sum[r] <= 0.0) continue;
            overall += cluster_use[r] / (epoch_seconds * capacity_sum[r]);
            counted += 1;
        }
        st.overall_utilization = counted > 0 ? overall / static_cast<double>(counted) : 0.0;
        st.average_deviation = deviation_integral / epoch_seconds;
        report.epochs.push_back(std::move(st));
    }

    double util_sum = 0.0;
    double dev_sum = 0.0;
    for (const EpochStats& st : report.epochs) {
        util_sum += st.overall_utilization;
        dev_sum += st.average_deviation;
        report.max_deviation = std::max(report.max_deviation, st.max_deviation);
    }
    if (!report.epochs.empty()) {
        report.mean_overall_utilization = util_sum / static_cast<double>(report.epochs.size());
        report.mean_average_deviation = dev_sum / static_cast<double>(report.epochs.size());
    }

    report.short_job_delay = summarize_delays(short_delays);
    if (!completion_samples.empty()) report.completion_cdf = cdf(std::move(completion_samples));
    if (!quanta_samples.empty()) report.quanta_cdf = cdf(std::move(quanta_samples));
    return report;
}

std::vector<TraceRecord> generate_synthetic_trace(const SyntheticConfig& config,
                                                  std::uint64_t seed) {
    if (config.num_users == 0 || config.num_epochs == 0 || config.num_resources == 0)
        throw std::invalid_argument("generate_synthetic_trace: empty dimensions");
    if (!(config.activity >= 0.0) || !(config.activity <= 1.0))
        throw std::invalid_argument("generate_synthetic_trace: activity must lie in [0, 1]");
    if (!(config.quanta_min > 0.0) || !(config.quanta_max >= config.quanta_min) ||
        !std::isfinite(config.quanta_max))
        throw std::invalid_argument("generate_synthetic_trace: bad quanta range");
    if (!config.demand_probability.empty()) {
        if (config.demand_probability.size() != config.num_resources)
            throw std::invalid_argument(
                "generate_synthetic_trace: demand_probability dimension mismatch");
        bool possible = false;
        for (const double p : config.demand_probability) {
            if (!(p >= 0.0) || !(p <= 1.0))
                throw std::invalid_argument(
                    "generate_synthetic_trace: demand probabilities must lie in [0, 1]");
            if (p > 0.0) possible = true;
        }
        if (!possible)
            throw std::invalid_argument(
                "generate_synthetic_trace: at least one resource must be demandable");
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double lo = std::log10(config.quanta_min);
    const double hi = std::log10(config.quanta_max);

    std::size_t width = 2;
    for (std::size_t v = config.num_users - 1; v >= 100; v /= 10) ++width;

    std::vector<TraceRecord> records;
    for (std::size_t e = 0; e < config.num_epochs; ++e) {
        for (std::size_t u = 0; u < config.num_users; ++u) {
            if (unit(rng) >= config.activity) continue;

            const double quanta = std::pow(10.0, lo + (hi - lo) * unit(rng));
            const double peak = quanta / epoch_seconds;

            std::vector<bool> demanded(config.num_resources, true);
            if (!config.demand_probability.empty()) {
                std::size_t count = 0;
                for (std::size_t r = 0; r < config.num_resources; ++r) {
                    demanded[r] = unit(rng) < config.demand_probability[r];
                    if (demanded[r]) ++count;
                }
                if (count == 0) {
                    // A job must demand something; fall back to the most
                    // likely resource so the draw order stays fixed.
                    std::size_t pick = 0;
                    for (std::size_t r = 1; r < config.num_resources; ++r)
                        if (config.demand_probability[r] > config.demand_probability[pick])
                            pick = r;
                    demanded[pick] = true;
                }
            }

            std::vector<std::size_t> wanted;
            for (std::size_t r = 0; r < config.num_resources; ++r)
                if (demanded[r]) wanted.push_back(r);
            const std::size_t dominant =
                wanted[std::min(wanted.size() - 1,
                                static_cast<std::size_t>(unit(rng) *
                                                         static_cast<double>(wanted.size())))];

            ResourceVector usage(config.num_resources, 0.0);
            for (const std::size_t r : wanted)
                usage[r] = r == dominant ? peak : peak * (0.1 + 0.9 * unit(rng));

            std::string id = std::to_string(u);
            while (id.size() < width) id.insert(id.begin(), '0');
            records.push_back(TraceRecord{"u" + id, e, std::move(usage)});
        }
    }
    return records;
}

std::vector<std::pair<double, double>> cdf(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("cdf: no samples");
    for (const double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("cdf: non-finite sample");
    std::sort(values.begin(), values.end());
    std::vector<std::pair<double, double>> out;
    const double n = static_cast<double>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
        out.emplace_back(values[i], static_cast<double>(i + 1) / n);
    }
    return out;
}

}  // namespace vds
