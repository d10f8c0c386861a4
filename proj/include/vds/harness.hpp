#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vds/model.hpp"
#include "vds/psmfa.hpp"
#include "vds/utility.hpp"

namespace vds {

/// Seconds per trace epoch. Workloads are expressed in execution quanta: one
/// quantum is the job's normalized demand bundle held for one second, so a job
/// whose raw demand peaks at max_r d_{n,r} carries 300 * max_r d_{n,r} quanta
/// of work per epoch it appears in.
inline constexpr double epoch_seconds = 300.0;

/// One trace row after validation: the resource usage a user reported for an
/// epoch, with one entry per resource column of the trace.
struct TraceRecord {
    std::string user;
    std::size_t epoch = 0;
    ResourceVector usage;
};

struct TraceParse {
    std::vector<std::string> resources;  // resource column names from the header
    std::vector<TraceRecord> records;    // one per (epoch, user), usage summed
    std::vector<std::string> rejected;   // "line N: reason" per discarded row
};

/// Reads a CSV stream with header "epoch,user,<resource names...>". Rows that
/// do not parse -- wrong field count, non-integer epoch, negative or
/// non-finite usage -- are dropped and reported in `rejected` with their line
/// numbers rather than aborting the whole trace. Rows sharing an (epoch,
/// user) key are summed: each row is one task of the job, and the job's
/// demand is the sum of its tasks' usage. Records come back sorted by epoch
/// then user id. Throws std::invalid_argument when the header itself is
/// unusable, since no row can be interpreted without it.
[[nodiscard]] TraceParse parse_trace(std::istream& in);

/// A job's workload within one epoch. `unit` is the demand scaled so its
/// largest entry is one; mechanisms allocate in units of this bundle, and
/// `quanta` counts how many unit-bundle-seconds of work the epoch holds.
struct JobState {
    std::string user;
    ResourceVector demand;              // summed usage from the trace
    ResourceVector unit;                // demand / max_r demand
    double quanta = 0.0;                // remaining work, 300 * max_r demand
    std::size_t arrival = 0;            // epoch the job appeared in
    std::optional<double> completion;   // seconds into the epoch, once finished
};

struct EpochJobs {
    std::vector<JobState> jobs;
    std::vector<std::string> notes;  // e.g. all-zero-demand rows skipped
};

/// Jobs for one epoch, in record order. Records from other epochs are
/// ignored; records whose usage is all zeros produce a note instead of a job
/// because they carry no work and admit no normalized bundle.
[[nodiscard]] EpochJobs build_epoch_jobs(const std::vector<TraceRecord>& records,
                                         std::size_t epoch);

/// Allocation mechanism driving the simulation.
enum class Mechanism { apf, psdsf, drfh, tsf, uniform };

struct SimConfig {
    Mechanism mechanism = Mechanism::apf;
    UtilitySet utility;     // curvature of the apf objective; ignored otherwise
    SolverConfig solver;    // apf solver settings; per-epoch clusters are small
    /// An apf solve that stops on its iteration budget still yields its best
    /// iterate; the run is accepted when that iterate's merit is below this,
    /// and otherwise the epoch keeps the previous allocation and is flagged.
    /// The default is lenient on purpose: survivor clusters after departures
    /// often plateau within about a percent of equilibrium, and such iterates
    /// distort the metrics far less than holding a stale allocation does.
    double accept_merit = 1e-2;
    /// Server ids each user may run on; users absent from the map may run
    /// anywhere. This is how scheduling-class placement restrictions enter,
    /// since traces carry no eligibility columns.
    std::map<std::string, std::vector<std::string>> eligibility;
};

struct EpochStats {
    std::size_t epoch = 0;
    /// Time-averaged busy fraction per (server, resource), row-major K x M.
    std::vector<double> utilization;
    /// Mean over resources of the cluster-wide busy fraction.
    double overall_utilization = 0.0;
    /// Weight-averaged per-user deviation (the deviation_summary metric),
    /// time-averaged over the epoch; idle time counts as zero deviation.
    double average_deviation = 0.0;
    /// Largest per-user deviation seen in any segment of the epoch.
    double max_deviation = 0.0;
    bool flagged = false;  // an apf solve was rejected this epoch
    std::size_t jobs = 0;
    std::size_t completed = 0;  // jobs that finished within the epoch
};

struct DelayStats {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t count = 0;
};

struct SimReport {
    std::size_t num_servers = 0;
    std::size_t num_resources = 0;
    std::vector<EpochStats> epochs;
    /// Per-quantum delay 1/x_n at the job's final allocation, over jobs that
    /// need less than one quantum of work.
    DelayStats short_job_delay;
    /// Empirical CDF of completion seconds, over jobs that finished within
    /// their epoch. Empty when nothing completed.
    std::vector<std::pair<double, double>> completion_cdf;
    /// Empirical CDF of required quanta over every simulated job.
    std::vector<std::pair<double, double>> quanta_cdf;
    std::vector<std::string> notes;  // skipped jobs, flagged epochs
    double mean_overall_utilization = 0.0;  // mean of the per-epoch values
    double mean_average_deviation = 0.0;
    double max_deviation = 0.0;
    /// Largest amount by which any segment's usage exceeded a capacity;
    /// stays at zero when every snapshot respects the cluster.
    double max_capacity_overshoot = 0.0;
};

/// Replays a trace against a fixed set of servers. Every epoch the jobs
/// present are allocated task rates from their normalized bundles; a job
/// holding q quanta at rate x finishes after q / x seconds, at which point
/// its resources are released and the survivors are reallocated at that
/// instant. Work left at the epoch boundary is dropped: the next epoch's
/// records define the next epoch's jobs. Epoch indices absent from the trace
/// contribute idle rows so the series stays contiguous from epoch zero.
[[nodiscard]] SimReport run_simulation(const std::vector<std::string>& resources,
                                       const std::vector<ServerSpec>& servers,
                                       const std::vector<TraceRecord>& trace,
                                       const SimConfig& config);

struct SyntheticConfig {
    std::size_t num_users = 24;
    std::size_t num_epochs = 8;
    std::size_t num_resources = 2;
    /// Chance a user submits a job in any given epoch.
    double activity = 0.6;
    /// Required quanta are log-uniform over [quanta_min, quanta_max]; the
    /// default range spans five decades, so most jobs are brief while a few
    /// carry thousands of quanta, and roughly 80% fit inside one epoch.
    double quanta_min = 0.03;
    double quanta_max = 3000.0;
    /// Chance, per resource, that a job demands it at all; empty means every
    /// resource is always demanded. Zeroed entries steer jobs away from
    /// servers lacking those resources, which is what creates placement
    /// structure in generated workloads.
    std::vector<double> demand_probability;
};

/// Deterministic workload: the same config and seed always produce the same
/// records. Demands are scaled so that required quanta equal
/// 300 * max_r usage, i.e. rebuilding jobs from the records recovers the
/// drawn quanta exactly.
[[nodiscard]] std::vector<TraceRecord> generate_synthetic_trace(const SyntheticConfig& config,
                                                                std::uint64_t seed);

/// Empirical CDF: sorted distinct values paired with the fraction of samples
/// at or below each. Throws std::invalid_argument on empty input.
[[nodiscard]] std::vector<std::pair<double, double>> cdf(std::vector<double> values);

}  // namespace vds
