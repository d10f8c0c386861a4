#include "vds/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string_view>
#include <system_error>
#include <utility>

namespace vds {

namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

[[noreturn]] void bad(const std::string& what) { throw std::invalid_argument(what); }

const json& need(const json& node, const char* key, const char* where) {
    const auto it = node.find(key);
    if (it == node.end()) bad(std::string("cluster json: ") + where + " is missing \"" + key + '"');
    return *it;
}

std::vector<std::string> string_list(const json& node, const char* where) {
    if (!node.is_array()) bad(std::string("cluster json: ") + where + " must be an array");
    std::vector<std::string> out;
    out.reserve(node.size());
    for (const json& item : node) {
        if (!item.is_string()) bad(std::string("cluster json: ") + where + " holds a non-string");
        out.push_back(item.get<std::string>());
    }
    return out;
}

ResourceVector number_list(const json& node, const char* where) {
    if (!node.is_array()) bad(std::string("cluster json: ") + where + " must be an array");
    ResourceVector out;
    out.reserve(node.size());
    for (const json& item : node) {
        if (!item.is_number()) bad(std::string("cluster json: ") + where + " holds a non-number");
        out.push_back(item.get<double>());
    }
    return out;
}

}  // namespace

std::string format_number(double v) {
    char buf[40];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
    if (ec != std::errc{}) bad("format_number: value does not fit");
    return std::string(buf, ptr);
}

double round_number(double v) {
    if (!std::isfinite(v)) return v;
    const std::string text = format_number(v);
    double out = v;
    std::from_chars(text.data(), text.data() + text.size(), out);
    return out;
}

ClusterFile read_cluster_json(std::istream& in) {
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        bad(std::string("cluster json: ") + e.what());
    }
    if (!root.is_object()) bad("cluster json: top level must be an object");

    ClusterFile out;
    out.spec.resources = string_list(need(root, "resources", "top level"), "\"resources\"");

    const json& servers = need(root, "servers", "top level");
    if (!servers.is_array()) bad("cluster json: \"servers\" must be an array");
    for (const json& node : servers) {
        if (!node.is_object()) bad("cluster json: each server must be an object");
        ServerSpec s;
        const json& id = need(node, "id", "a server");
        if (!id.is_string()) bad("cluster json: server \"id\" must be a string");
        s.id = id.get<std::string>();
        s.capacities = number_list(need(node, "capacities", "a server"), "server \"capacities\"");
        out.spec.servers.push_back(std::move(s));
    }

    if (const auto users = root.find("users"); users != root.end()) {
        if (!users->is_array()) bad("cluster json: \"users\" must be an array");
        for (const json& node : *users) {
            if (!node.is_object()) bad("cluster json: each user must be an object");
            UserSpec u;
            const json& id = need(node, "id", "a user");
            if (!id.is_string()) bad("cluster json: user \"id\" must be a string");
            u.id = id.get<std::string>();
            u.demand = number_list(need(node, "demand", "a user"), "user \"demand\"");
            if (const auto w = node.find("weight"); w != node.end()) {
                if (!w->is_number()) bad("cluster json: user \"weight\" must be a number");
                u.weight = w->get<double>();
            }
            if (const auto e = node.find("eligible"); e != node.end())
                u.eligible = string_list(*e, "user \"eligible\"");
            out.spec.users.push_back(std::move(u));
        }
    }

    if (const auto elig = root.find("eligibility"); elig != root.end()) {
        if (!elig->is_object()) bad("cluster json: \"eligibility\" must be an object");
        for (const auto& [user, list] : elig->items())
            out.eligibility.emplace(user, string_list(list, "an \"eligibility\" entry"));
    }
    return out;
}

ClusterFile load_cluster_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) bad("cannot open cluster file: " + path);
    return read_cluster_json(in);
}

void write_allocation_csv(std::ostream& out, const Cluster& c, const Allocation& x) {
    out << "user,server,tasks\n";
    for (std::size_t n = 0; n < c.num_users(); ++n)
        for (const std::size_t i : c.servers_of(n))
            out << c.user_id(n) << ',' << c.server_id(i) << ',' << format_number(x.at(n, i))
                << '\n';
}

Allocation read_allocation_csv(std::istream& in, const Cluster& c) {
    std::string line;
    if (!std::getline(in, line)) bad("allocation csv: empty stream");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line) != "user,server,tasks") bad("allocation csv: header must be user,server,tasks");

    Allocation x(c.num_users(), c.num_servers());
    std::vector<bool> seen(c.num_users() * c.num_servers(), false);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const std::string at = " at line " + std::to_string(lineno);

        const std::size_t c1 = line.find(',');
        const std::size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos)
            bad("allocation csv: expected user,server,tasks" + at);

        const std::string user(trim(std::string_view(line).substr(0, c1)));
        const std::string server(trim(std::string_view(line).substr(c1 + 1, c2 - c1 - 1)));
        const std::string_view value = trim(std::string_view(line).substr(c2 + 1));

        std::size_t n = 0, i = 0;
        try {
            n = c.user_index(user);
            i = c.server_index(server);
        } catch (const std::exception&) {
            bad("allocation csv: unknown user or server" + at);
        }
        double tasks = 0.0;
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), tasks);
        if (ec != std::errc{} || ptr != value.data() + value.size() || !std::isfinite(tasks))
            bad("allocation csv: unreadable task count" + at);
        if (tasks < 0.0) bad("allocation csv: negative task count" + at);
        if (tasks > 0.0 && !c.eligible(n, i))
            bad("allocation csv: tasks on ineligible pair " + user + '/' + server + at);
        if (seen[n * c.num_servers() + i]) bad("allocation csv: duplicate pair" + at);
        seen[n * c.num_servers() + i] = true;
        x.at(n, i) = tasks;
    }
    return x;
}

Allocation load_allocation_file(const std::string& path, const Cluster& c) {
    std::ifstream in(path);
    if (!in) bad("cannot open allocation file: " + path);
    return read_allocation_csv(in, c);
}

nlohmann::json manifest_json(const RunManifest& m) {
    return nlohmann::json{{"command", m.command},       {"inputs", m.inputs},
                          {"mechanism", m.mechanism},   {"params", m.params},
                          {"seed", m.seed},             {"output_dir", m.output_dir},
                          {"tool_version", m.version}};
}

}  // namespace vds
