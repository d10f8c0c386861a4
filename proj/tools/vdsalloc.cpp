// vdsalloc — command-line front end for the allocation library.
//
// Subcommands: solve (equilibrium solvers), baseline (closed-form
// mechanisms), validate (property audits on a stored allocation), simulate
// (trace-driven epoch simulation), compare (side-by-side metrics table).
//
// Exit codes are fixed so scripts can assert on them: 0 success, 1 malformed
// input or usage error, 2 solver stopped before converging (best iterate is
// still written), 3 a validated property failed.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "vds/baselines.hpp"
#include "vds/distributed.hpp"
#include "vds/fairness.hpp"
#include "vds/harness.hpp"
#include "vds/io.hpp"
#include "vds/model.hpp"
#include "vds/psmfa.hpp"
#include "vds/utility.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_not_converged = 2;
constexpr int exit_property_failed = 3;

fs::path prepare_out(const std::string& dir) {
    fs::path path(dir);
    fs::create_directories(path);
    return path;
}

// Bundles are written in binary mode so reruns of the same command produce
// byte-identical files on every platform; nothing in a bundle carries a
// timestamp.
void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write " + path.string());
    out << text;
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

std::string status_name(vds::SolveStatus status) {
    switch (status) {
        case vds::SolveStatus::converged: return "converged";
        case vds::SolveStatus::max_iters: return "max_iters";
        default: return "stalled";
    }
}

std::string allocation_csv_text(const vds::Cluster& c, const vds::Allocation& x) {
    std::ostringstream out;
    vds::write_allocation_csv(out, c, x);
    return out.str();
}

json totals_json(const vds::Cluster& c, const vds::Allocation& x) {
    json out = json::object();
    for (std::size_t n = 0; n < c.num_users(); ++n)
        out[c.user_id(n)] = vds::round_number(x.total(n));
    return out;
}

json utilization_json(const vds::Cluster& c, const vds::Allocation& x) {
    json out = json::object();
    for (std::size_t r = 0; r < c.num_resources(); ++r)
        out[c.resource_name(r)] = vds::round_number(vds::resource_utilization(c, x, r));
    return out;
}

json multipliers_json(const vds::Cluster& c, const vds::Multipliers& lambda) {
    json out = json::object();
    for (std::size_t i = 0; i < c.num_servers(); ++i) {
        json row = json::object();
        for (std::size_t r = 0; r < c.num_resources(); ++r)
            row[c.resource_name(r)] = vds::round_number(lambda.at(i, r));
        out[c.server_id(i)] = row;
    }
    return out;
}

vds::UtilitySet make_utility(double alpha, double A, double B) {
    if (!std::isfinite(alpha))
        throw std::invalid_argument(
            "alpha must be finite; the infinite-alpha limit is the psdsf baseline");
    return vds::UtilitySet(vds::UtilityParams{alpha, A, B});
}

// ---------------------------------------------------------------- solve ----

struct SolveOptions {
    std::string cluster_path;
    std::string method = "psmfa";
    double alpha = 1.0;
    double A = 1.0;
    double B = 0.0;
    vds::SolverConfig solver;
    vds::DistributedConfig dist;
    std::string schedule = "round-robin";
    std::string out_dir = ".";
};

vds::UpdateSchedule parse_schedule(const std::string& name) {
    if (name == "round-robin") return vds::UpdateSchedule::round_robin;
    if (name == "shuffled") return vds::UpdateSchedule::shuffled;
    if (name == "parallel") return vds::UpdateSchedule::parallel;
    throw std::invalid_argument("unknown schedule: " + name);
}

int cmd_solve(const SolveOptions& opt) {
    const vds::ClusterFile file = vds::load_cluster_file(opt.cluster_path);
    const vds::Cluster cluster = vds::build_cluster(file.spec);
    const vds::UtilitySet utility = make_utility(opt.alpha, opt.A, opt.B);
    const fs::path out = prepare_out(opt.out_dir);

    vds::RunManifest manifest;
    manifest.command = "solve";
    manifest.inputs = {opt.cluster_path};
    manifest.mechanism = opt.method;
    manifest.output_dir = opt.out_dir;
    json params{{"alpha", vds::round_number(opt.alpha)},
                {"A", vds::round_number(opt.A)},
                {"B", vds::round_number(opt.B)}};

    json result_doc;
    bool converged = false;

    if (opt.method == "psmfa") {
        params["epsilon_stop"] = vds::round_number(opt.solver.epsilon_stop);
        params["merit_tol"] = vds::round_number(opt.solver.merit_tol);
        params["max_iters"] = opt.solver.max_iters;
        manifest.params = params;

        const vds::SolveResult result = vds::solve_psmfa(cluster, utility, opt.solver);
        converged = result.status == vds::SolveStatus::converged;

        write_file(out / "allocation.csv", allocation_csv_text(cluster, result.allocation));
        std::ostringstream merit;
        merit << "iteration,merit\n";
        for (std::size_t k = 0; k < result.merit_history.size(); ++k)
            merit << k << ',' << vds::format_number(result.merit_history[k]) << '\n';
        write_file(out / "merit.csv", merit.str());

        result_doc = {
            {"method", "psmfa"},
            {"status", status_name(result.status)},
            {"iterations", result.iterations},
            {"final_merit", vds::round_number(result.merit_history.back())},
            {"diagnostics",
             {{"user_complementarity", vds::round_number(result.diagnostics.user_complementarity)},
              {"capacity_complementarity",
               vds::round_number(result.diagnostics.capacity_complementarity)},
              {"degenerate_saturation", result.diagnostics.degenerate_saturation},
              {"multiplier_resets", result.diagnostics.multiplier_resets},
              {"max_infeasibility", vds::round_number(result.diagnostics.max_infeasibility)},
              {"max_support_violation",
               vds::round_number(result.diagnostics.max_support_violation)}}},
            {"totals", totals_json(cluster, result.allocation)},
            {"utilization", utilization_json(cluster, result.allocation)},
            {"multipliers", multipliers_json(cluster, result.multipliers)},
        };
        std::cout << "status " << status_name(result.status) << ", iterations "
                  << result.iterations << ", final merit "
                  << vds::format_number(result.merit_history.back()) << '\n';
    } else {
        vds::DistributedConfig config = opt.dist;
        config.schedule = parse_schedule(opt.schedule);
        params["barrier_epsilon"] = vds::round_number(config.barrier_epsilon);
        params["residual_tol"] = vds::round_number(config.residual_tol);
        params["max_rounds"] = config.max_rounds;
        params["schedule"] = opt.schedule;
        json steps = json::array();
        for (const double k : config.step_sizes) steps.push_back(vds::round_number(k));
        params["step_sizes"] = steps;
        manifest.params = params;
        manifest.seed = config.seed;

        const vds::DistributedResult result = vds::solve_distributed(cluster, utility, config);
        converged = result.status == vds::SolveStatus::converged;

        write_file(out / "allocation.csv", allocation_csv_text(cluster, result.allocation));
        std::ostringstream curve;
        curve << "round,residual\n";
        for (const vds::ResidualSample& sample : result.residual_history)
            curve << sample.round << ',' << vds::format_number(sample.residual) << '\n';
        write_file(out / "residual_curve.csv", curve.str());

        result_doc = {
            {"method", "distributed"},
            {"status", status_name(result.status)},
            {"rounds", result.rounds},
            {"final_residual", vds::round_number(result.diagnostics.complementarity_residual)},
            {"diagnostics",
             {{"complementarity_residual",
               vds::round_number(result.diagnostics.complementarity_residual)},
              {"max_capacity_violation",
               vds::round_number(result.diagnostics.max_capacity_violation)}}},
            {"totals", totals_json(cluster, result.allocation)},
            {"utilization", utilization_json(cluster, result.allocation)},
            {"multipliers", multipliers_json(cluster, result.multipliers)},
        };
        std::cout << "status " << status_name(result.status) << ", rounds " << result.rounds
                  << ", final residual "
                  << vds::format_number(result.diagnostics.complementarity_residual) << '\n';
    }

    result_doc["manifest"] = vds::manifest_json(manifest);
    write_file(out / "result.json", dump(result_doc));
    return converged ? exit_ok : exit_not_converged;
}

// ------------------------------------------------------------- baseline ----

struct BaselineOptions {
    std::string cluster_path;
    std::string mechanism;
    std::string out_dir = ".";
};

int cmd_baseline(const BaselineOptions& opt) {
    const vds::ClusterFile file = vds::load_cluster_file(opt.cluster_path);
    const vds::Cluster cluster = vds::build_cluster(file.spec);

    vds::Allocation x;
    if (opt.mechanism == "psdsf") x = vds::solve_psdsf(cluster);
    else if (opt.mechanism == "drfh") x = vds::solve_drfh(cluster);
    else if (opt.mechanism == "tsf") x = vds::solve_tsf(cluster);
    else if (opt.mechanism == "uniform") x = vds::uniform_allocation(cluster);
    else throw std::invalid_argument("unknown mechanism: " + opt.mechanism);

    const fs::path out = prepare_out(opt.out_dir);
    vds::RunManifest manifest;
    manifest.command = "baseline";
    manifest.inputs = {opt.cluster_path};
    manifest.mechanism = opt.mechanism;
    manifest.output_dir = opt.out_dir;

    write_file(out / "allocation.csv", allocation_csv_text(cluster, x));
    write_file(out / "result.json", dump(json{{"mechanism", opt.mechanism},
                                              {"totals", totals_json(cluster, x)},
                                              {"utilization", utilization_json(cluster, x)},
                                              {"manifest", vds::manifest_json(manifest)}}));
    for (std::size_t n = 0; n < cluster.num_users(); ++n)
        std::cout << cluster.user_id(n) << ' ' << vds::format_number(x.total(n)) << '\n';
    return exit_ok;
}

// ------------------------------------------------------------- validate ----

struct ValidateOptions {
    std::string cluster_path;
    std::string allocation_path;
    std::vector<std::string> properties;
    double tol = 1e-6;
    double alpha = 1.0;
    double A = 1.0;
    double B = 0.0;
    std::string out_dir = ".";
};

int cmd_validate(const ValidateOptions& opt) {
    const vds::ClusterFile file = vds::load_cluster_file(opt.cluster_path);
    const vds::Cluster cluster = vds::build_cluster(file.spec);
    const vds::Allocation x = vds::load_allocation_file(opt.allocation_path, cluster);

    // Unknown names are rejected before any check runs, so a typo cannot be
    // mistaken for a clean pass over the remaining properties.
    for (const std::string& name : opt.properties)
        if (name != "si" && name != "ef" && name != "pareto" && name != "bf" &&
            name != "psdsf" && name != "apf")
            throw std::invalid_argument("unknown property: " + name +
                                        " (known: si, ef, pareto, bf, psdsf, apf)");
    if (opt.properties.empty()) throw std::invalid_argument("at least one property is required");

    std::vector<vds::PropertyReport> reports;
    for (const std::string& name : opt.properties) {
        if (name == "si") reports.push_back(vds::check_sharing_incentive(cluster, x, opt.tol));
        else if (name == "ef") reports.push_back(vds::check_envy_freeness(cluster, x, opt.tol));
        else if (name == "pareto") reports.push_back(vds::check_pareto(cluster, x, opt.tol));
        else if (name == "bf") reports.push_back(vds::check_bottleneck_fairness(cluster, x, opt.tol));
        else if (name == "psdsf") reports.push_back(vds::check_psdsf(cluster, x, opt.tol));
        else reports.push_back(vds::check_alpha_pf_vds(cluster, make_utility(opt.alpha, opt.A, opt.B), x, opt.tol));
    }

    bool failed = false;
    json rows = json::array();
    for (std::size_t k = 0; k < reports.size(); ++k) {
        const vds::PropertyReport& rep = reports[k];
        rows.push_back(json{{"property", opt.properties[k]},
                            {"pass", rep.pass},
                            {"applicable", rep.applicable},
                            {"witness", rep.witness},
                            {"margin", vds::round_number(rep.margin)},
                            {"tolerance", vds::round_number(rep.tolerance)}});
        if (!rep.applicable) {
            std::cout << opt.properties[k] << ": inapplicable (" << rep.witness << ")\n";
        } else if (rep.pass) {
            std::cout << opt.properties[k] << ": pass (margin "
                      << vds::format_number(rep.margin) << ")\n";
        } else {
            std::cout << opt.properties[k] << ": FAIL (" << rep.witness << ", margin "
                      << vds::format_number(rep.margin) << ")\n";
            failed = true;
        }
    }

    vds::RunManifest manifest;
    manifest.command = "validate";
    manifest.inputs = {opt.cluster_path, opt.allocation_path};
    manifest.mechanism = "";
    manifest.params = {{"properties", opt.properties}, {"tol", vds::round_number(opt.tol)}};
    manifest.output_dir = opt.out_dir;

    const fs::path out = prepare_out(opt.out_dir);
    write_file(out / "report.json", dump(json{{"properties", rows},
                                              {"all_pass", !failed},
                                              {"manifest", vds::manifest_json(manifest)}}));
    return failed ? exit_property_failed : exit_ok;
}

// ------------------------------------------------------------- simulate ----

struct SimulateOptions {
    std::string cluster_path;
    std::string trace_path;
    bool synthetic = false;
    vds::SyntheticConfig synth;
    std::uint64_t seed = 0;
    std::string mechanism = "apf";
    double alpha = 1.0;
    double A = 1.0;
    double B = 0.0;
    double accept_merit = 1e-2;
    std::size_t max_iters = vds::SolverConfig{}.max_iters;
    std::string out_dir = ".";
};

std::string render_trace_csv(const std::vector<std::string>& resources,
                             const std::vector<vds::TraceRecord>& records) {
    std::ostringstream out;
    out << "epoch,user";
    for (const std::string& name : resources) out << ',' << name;
    out << '\n';
    for (const vds::TraceRecord& rec : records) {
        out << rec.epoch << ',' << rec.user;
        for (const double v : rec.usage) out << ',' << vds::format_number(v);
        out << '\n';
    }
    return out.str();
}

vds::Mechanism parse_mechanism(const std::string& name) {
    if (name == "apf") return vds::Mechanism::apf;
    if (name == "psdsf") return vds::Mechanism::psdsf;
    if (name == "drfh") return vds::Mechanism::drfh;
    if (name == "tsf") return vds::Mechanism::tsf;
    if (name == "uniform") return vds::Mechanism::uniform;
    throw std::invalid_argument("unknown mechanism: " + name);
}

int cmd_simulate(SimulateOptions& opt) {
    const vds::ClusterFile file = vds::load_cluster_file(opt.cluster_path);

    if (opt.synthetic && !opt.trace_path.empty())
        throw std::invalid_argument("give a trace file or --synthetic, not both");
    if (!opt.synthetic && opt.trace_path.empty())
        throw std::invalid_argument("a trace file or --synthetic is required");

    std::vector<vds::TraceRecord> records;
    std::string synthetic_text;
    if (opt.synthetic) {
        opt.synth.num_resources = file.spec.resources.size();
        records = vds::generate_synthetic_trace(opt.synth, opt.seed);
        synthetic_text = render_trace_csv(file.spec.resources, records);
    } else {
        std::ifstream in(opt.trace_path);
        if (!in) throw std::invalid_argument("cannot open trace file: " + opt.trace_path);
        vds::TraceParse parse = vds::parse_trace(in);
        if (!parse.rejected.empty()) {
            for (const std::string& reason : parse.rejected)
                std::cerr << "error: " << opt.trace_path << ": " << reason << '\n';
            return exit_usage;
        }
        if (parse.resources != file.spec.resources)
            throw std::invalid_argument(
                "trace resource columns must match the cluster's resources, in order");
        records = std::move(parse.records);
    }

    vds::SimConfig config;
    config.mechanism = parse_mechanism(opt.mechanism);
    // alpha = inf requests the max-min limit of the alpha-fair family, which
    // is the psdsf mechanism itself; the solver only accepts finite alpha.
    const bool infinite_alpha = config.mechanism == vds::Mechanism::apf && std::isinf(opt.alpha);
    if (infinite_alpha) config.mechanism = vds::Mechanism::psdsf;
    else if (config.mechanism == vds::Mechanism::apf)
        config.utility = make_utility(opt.alpha, opt.A, opt.B);
    config.solver.max_iters = opt.max_iters;
    config.accept_merit = opt.accept_merit;
    config.eligibility = file.eligibility;

    const vds::SimReport report =
        vds::run_simulation(file.spec.resources, file.spec.servers, records, config);

    vds::RunManifest manifest;
    manifest.command = "simulate";
    manifest.inputs = {opt.cluster_path};
    if (!opt.trace_path.empty()) manifest.inputs.push_back(opt.trace_path);
    manifest.mechanism = opt.mechanism;
    manifest.seed = opt.seed;
    manifest.output_dir = opt.out_dir;
    json params{{"A", vds::round_number(opt.A)},
                {"B", vds::round_number(opt.B)},
                {"accept_merit", vds::round_number(opt.accept_merit)},
                {"max_iters", opt.max_iters}};
    params["alpha"] = std::isfinite(opt.alpha) ? json(vds::round_number(opt.alpha)) : json("inf");
    if (opt.synthetic)
        params["synthetic"] = {{"users", opt.synth.num_users},
                               {"epochs", opt.synth.num_epochs},
                               {"activity", vds::round_number(opt.synth.activity)},
                               {"quanta_min", vds::round_number(opt.synth.quanta_min)},
                               {"quanta_max", vds::round_number(opt.synth.quanta_max)},
                               {"demand_probability", opt.synth.demand_probability}};
    manifest.params = params;

    const fs::path out = prepare_out(opt.out_dir);
    if (opt.synthetic) write_file(out / "trace.csv", synthetic_text);

    std::ostringstream util;
    util << "epoch,server,resource,utilization\n";
    std::ostringstream dev;
    dev << "epoch,average_deviation,max_deviation\n";
    std::size_t flagged = 0;
    for (const vds::EpochStats& st : report.epochs) {
        for (std::size_t i = 0; i < report.num_servers; ++i)
            for (std::size_t r = 0; r < report.num_resources; ++r)
                util << st.epoch << ',' << file.spec.servers[i].id << ','
                     << file.spec.resources[r] << ','
                     << vds::format_number(st.utilization[i * report.num_resources + r]) << '\n';
        dev << st.epoch << ',' << vds::format_number(st.average_deviation) << ','
            << vds::format_number(st.max_deviation) << '\n';
        if (st.flagged) ++flagged;
    }
    write_file(out / "utilization.csv", util.str());
    write_file(out / "deviation.csv", dev.str());

    std::ostringstream delay;
    delay << "count,mean,stddev\n"
          << report.short_job_delay.count << ',' << vds::format_number(report.short_job_delay.mean)
          << ',' << vds::format_number(report.short_job_delay.stddev) << '\n';
    write_file(out / "delay.csv", delay.str());

    const auto render_cdf = [](const std::vector<std::pair<double, double>>& points) {
        std::ostringstream text;
        text << "value,fraction\n";
        for (const auto& [value, fraction] : points)
            text << vds::format_number(value) << ',' << vds::format_number(fraction) << '\n';
        return text.str();
    };
    write_file(out / "cdf_completion.csv", render_cdf(report.completion_cdf));
    write_file(out / "cdf_quanta.csv", render_cdf(report.quanta_cdf));

    write_file(out / "summary.json",
               dump(json{{"mechanism", opt.mechanism},
                         {"num_servers", report.num_servers},
                         {"num_resources", report.num_resources},
                         {"epochs", report.epochs.size()},
                         {"mean_overall_utilization",
                          vds::round_number(report.mean_overall_utilization)},
                         {"mean_average_deviation",
                          vds::round_number(report.mean_average_deviation)},
                         {"max_deviation", vds::round_number(report.max_deviation)},
                         {"max_capacity_overshoot",
                          vds::round_number(report.max_capacity_overshoot)},
                         {"short_job_delay",
                          {{"count", report.short_job_delay.count},
                           {"mean", vds::round_number(report.short_job_delay.mean)},
                           {"stddev", vds::round_number(report.short_job_delay.stddev)}}},
                         {"flagged_epochs", flagged},
                         {"notes", report.notes},
                         {"manifest", vds::manifest_json(manifest)}}));

    std::cout << "epochs " << report.epochs.size() << ", mean overall utilization "
              << vds::format_number(report.mean_overall_utilization)
              << ", mean average deviation "
              << vds::format_number(report.mean_average_deviation) << ", flagged epochs "
              << flagged << '\n';
    return exit_ok;
}

// -------------------------------------------------------------- compare ----

struct CompareOptions {
    std::string cluster_path;
    std::vector<std::string> mechanisms;
    std::string out_dir = ".";
};

int cmd_compare(const CompareOptions& opt) {
    const vds::ClusterFile file = vds::load_cluster_file(opt.cluster_path);
    const vds::Cluster cluster = vds::build_cluster(file.spec);
    if (opt.mechanisms.empty()) throw std::invalid_argument("at least one mechanism is required");

    std::vector<vds::Allocation> columns;
    json statuses = json::object();
    for (const std::string& token : opt.mechanisms) {
        if (token == "psdsf") columns.push_back(vds::solve_psdsf(cluster));
        else if (token == "drfh") columns.push_back(vds::solve_drfh(cluster));
        else if (token == "tsf") columns.push_back(vds::solve_tsf(cluster));
        else if (token == "uniform") columns.push_back(vds::uniform_allocation(cluster));
        else if (token == "apf" || token.rfind("apf:", 0) == 0) {
            double alpha = 1.0;
            if (token.size() > 4) {
                const char* first = token.data() + 4;
                const char* last = token.data() + token.size();
                const auto [ptr, ec] = std::from_chars(first, last, alpha);
                if (ec != std::errc{} || ptr != last || !std::isfinite(alpha) || alpha <= 0.0)
                    throw std::invalid_argument("bad alpha in mechanism token: " + token);
            }
            const vds::SolveResult result =
                vds::solve_psmfa(cluster, make_utility(alpha, 1.0, 0.0));
            statuses[token] = status_name(result.status);
            columns.push_back(result.allocation);
        } else {
            throw std::invalid_argument("unknown mechanism: " + token +
                                        " (known: psdsf, drfh, tsf, uniform, apf, apf:<alpha>)");
        }
    }

    std::ostringstream table;
    table << "metric";
    for (const std::string& token : opt.mechanisms) table << ',' << token;
    table << '\n';
    for (std::size_t n = 0; n < cluster.num_users(); ++n) {
        table << "total:" << cluster.user_id(n);
        for (const vds::Allocation& x : columns) table << ',' << vds::format_number(x.total(n));
        table << '\n';
    }
    for (std::size_t r = 0; r < cluster.num_resources(); ++r) {
        table << "utilization:" << cluster.resource_name(r);
        for (const vds::Allocation& x : columns)
            table << ',' << vds::format_number(vds::resource_utilization(cluster, x, r));
        table << '\n';
    }

    vds::RunManifest manifest;
    manifest.command = "compare";
    manifest.inputs = {opt.cluster_path};
    manifest.mechanism = "";
    manifest.params = {{"mechanisms", opt.mechanisms}};
    manifest.output_dir = opt.out_dir;

    const fs::path out = prepare_out(opt.out_dir);
    write_file(out / "compare.csv", table.str());
    write_file(out / "summary.json", dump(json{{"mechanisms", opt.mechanisms},
                                               {"solver_status", statuses},
                                               {"manifest", vds::manifest_json(manifest)}}));
    std::cout << table.str();
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vdsalloc: efficient-and-fair multi-resource allocation across heterogeneous "
                 "servers with placement constraints"};
    app.require_subcommand(1);
    app.set_version_flag("--version", vds::tool_version);
    app.set_config("--config", "",
                   "Read option defaults from a TOML/INI file; command-line flags win");

    SolveOptions solve_opt;
    CLI::App* solve = app.add_subcommand(
        "solve", "Compute the alpha-fair equilibrium allocation for a cluster");
    solve->add_option("cluster", solve_opt.cluster_path, "cluster description (json)")->required();
    solve->add_option("--method", solve_opt.method, "solver backend")
        ->check(CLI::IsMember({"psmfa", "distributed"}))
        ->capture_default_str();
    solve->add_option("--alpha", solve_opt.alpha, "fairness curvature (must be finite)")
        ->capture_default_str();
    solve->add_option("--A", solve_opt.A, "marginal-utility scale of the power term")
        ->capture_default_str();
    solve->add_option("--B", solve_opt.B, "marginal-utility scale of the logarithmic term")
        ->capture_default_str();
    solve->add_option("--epsilon-stop", solve_opt.solver.epsilon_stop,
                      "psmfa: stop when the direction norm falls below this")
        ->capture_default_str();
    solve->add_option("--merit-tol", solve_opt.solver.merit_tol,
                      "psmfa: merit value accepted as converged")
        ->capture_default_str();
    solve->add_option("--max-iters", solve_opt.solver.max_iters, "psmfa: iteration budget")
        ->capture_default_str();
    solve->add_option("--barrier-epsilon", solve_opt.dist.barrier_epsilon,
                      "distributed: capacity relaxation of the barrier prices")
        ->capture_default_str();
    solve->add_option("--residual-tol", solve_opt.dist.residual_tol,
                      "distributed: complementarity residual accepted as converged")
        ->capture_default_str();
    solve->add_option("--max-rounds", solve_opt.dist.max_rounds, "distributed: round budget")
        ->capture_default_str();
    solve->add_option("--schedule", solve_opt.schedule, "distributed: server update order")
        ->check(CLI::IsMember({"round-robin", "shuffled", "parallel"}))
        ->capture_default_str();
    solve->add_option("--seed", solve_opt.dist.seed, "distributed: shuffle-order seed")
        ->capture_default_str();
    solve->add_option("--step-size", solve_opt.dist.step_sizes,
                      "distributed: fixed per-server step sizes (default: adaptive)")
        ->delimiter(',');
    solve->add_option("--out", solve_opt.out_dir, "output directory")->capture_default_str();

    BaselineOptions baseline_opt;
    CLI::App* baseline =
        app.add_subcommand("baseline", "Compute a closed-form baseline allocation");
    baseline->add_option("cluster", baseline_opt.cluster_path, "cluster description (json)")
        ->required();
    baseline->add_option("--mechanism", baseline_opt.mechanism, "baseline mechanism")
        ->check(CLI::IsMember({"psdsf", "drfh", "tsf", "uniform"}))
        ->required();
    baseline->add_option("--out", baseline_opt.out_dir, "output directory")
        ->capture_default_str();

    ValidateOptions validate_opt;
    CLI::App* validate =
        app.add_subcommand("validate", "Audit fairness properties of a stored allocation");
    validate->add_option("cluster", validate_opt.cluster_path, "cluster description (json)")
        ->required();
    validate->add_option("allocation", validate_opt.allocation_path, "allocation table (csv)")
        ->required();
    validate
        ->add_option("--properties", validate_opt.properties,
                     "properties to check: si (sharing incentive), ef (envy-freeness), pareto, "
                     "bf (bottleneck fairness), psdsf, apf (equilibrium audit)")
        ->delimiter(',')
        ->required();
    validate->add_option("--tol", validate_opt.tol, "audit tolerance")->capture_default_str();
    validate->add_option("--alpha", validate_opt.alpha, "apf audit: fairness curvature")
        ->capture_default_str();
    validate->add_option("--A", validate_opt.A, "apf audit: power-term scale")
        ->capture_default_str();
    validate->add_option("--B", validate_opt.B, "apf audit: logarithmic-term scale")
        ->capture_default_str();
    validate->add_option("--out", validate_opt.out_dir, "output directory")
        ->capture_default_str();

    SimulateOptions sim_opt;
    CLI::App* simulate =
        app.add_subcommand("simulate", "Replay a workload trace epoch by epoch");
    simulate->add_option("cluster", sim_opt.cluster_path,
                         "cluster description (json); its optional \"eligibility\" map pins "
                         "trace users to servers")
        ->required();
    simulate->add_option("trace", sim_opt.trace_path, "workload trace (csv)");
    simulate->add_flag("--synthetic", sim_opt.synthetic,
                       "generate the workload instead of reading a trace file");
    simulate->add_option("--users", sim_opt.synth.num_users, "synthetic: user count")
        ->capture_default_str();
    simulate->add_option("--epochs", sim_opt.synth.num_epochs, "synthetic: epoch count")
        ->capture_default_str();
    simulate->add_option("--activity", sim_opt.synth.activity,
                         "synthetic: probability a user is active in an epoch")
        ->capture_default_str();
    simulate->add_option("--quanta-min", sim_opt.synth.quanta_min,
                         "synthetic: smallest job size in quanta")
        ->capture_default_str();
    simulate->add_option("--quanta-max", sim_opt.synth.quanta_max,
                         "synthetic: largest job size in quanta")
        ->capture_default_str();
    simulate->add_option("--demand-prob", sim_opt.synth.demand_probability,
                         "synthetic: per-resource probability a job demands the resource")
        ->delimiter(',');
    simulate->add_option("--seed", sim_opt.seed, "synthetic workload seed")
        ->capture_default_str();
    simulate->add_option("--mechanism", sim_opt.mechanism, "allocation mechanism per epoch")
        ->check(CLI::IsMember({"apf", "psdsf", "drfh", "tsf", "uniform"}))
        ->capture_default_str();
    simulate->add_option("--alpha", sim_opt.alpha,
                         "apf fairness curvature; inf selects the max-min limit (psdsf)")
        ->capture_default_str();
    simulate->add_option("--A", sim_opt.A, "apf power-term scale")->capture_default_str();
    simulate->add_option("--B", sim_opt.B, "apf logarithmic-term scale")->capture_default_str();
    simulate->add_option("--accept-merit", sim_opt.accept_merit,
                         "apf: worst merit accepted from a non-converged epoch solve")
        ->capture_default_str();
    simulate->add_option("--max-iters", sim_opt.max_iters, "apf: per-solve iteration budget")
        ->capture_default_str();
    simulate->add_option("--out", sim_opt.out_dir, "output directory")->capture_default_str();

    CompareOptions compare_opt;
    CLI::App* compare =
        app.add_subcommand("compare", "Tabulate several mechanisms side by side");
    compare->add_option("cluster", compare_opt.cluster_path, "cluster description (json)")
        ->required();
    compare
        ->add_option("--mechanisms", compare_opt.mechanisms,
                     "comma-separated mechanisms: psdsf, drfh, tsf, uniform, apf, apf:<alpha>")
        ->delimiter(',')
        ->required();
    compare->add_option("--out", compare_opt.out_dir, "output directory")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (solve->parsed()) return cmd_solve(solve_opt);
        if (baseline->parsed()) return cmd_baseline(baseline_opt);
        if (validate->parsed()) return cmd_validate(validate_opt);
        if (simulate->parsed()) return cmd_simulate(sim_opt);
        if (compare->parsed()) return cmd_compare(compare_opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    }
    return exit_usage;
}
