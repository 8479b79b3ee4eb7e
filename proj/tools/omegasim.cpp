#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "omegasim/builtin_scenarios.hpp"
#include "omegasim/engine.hpp"
#include "omegasim/scenario.hpp"

namespace {

using namespace omegasim;

int log_level() {
    const char* env = std::getenv("OMEGA_SIM_LOG");
    if (env == nullptr) {
        return 1;
    }
    const std::string value(env);
    if (value == "debug") {
        return 2;
    }
    if (value == "quiet") {
        return 0;
    }
    return 1;
}

void log_debug(const std::string& message) {
    if (log_level() >= 2) {
        std::cerr << "[omegasim] " << message << "\n";
    }
}

std::string format_real(double v) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.9g", v);
    return buffer;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) {
        throw Error("cannot open scenario file '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str());
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out.good()) {
        throw Error("cannot write '" + path.string() + "'");
    }
    out << content;
}

std::vector<std::vector<std::size_t>> parse_groups(const std::string& spec) {
    std::vector<std::vector<std::size_t>> groups;
    std::istringstream stream(spec);
    std::string group;
    while (std::getline(stream, group, '/')) {
        std::vector<std::size_t> dims;
        std::istringstream inner(group);
        std::string token;
        while (std::getline(inner, token, ',')) {
            dims.push_back(std::stoul(token));
        }
        groups.push_back(std::move(dims));
    }
    return groups;
}

std::vector<std::vector<std::uint32_t>> parse_address_groups(const std::string& spec) {
    std::vector<std::vector<std::uint32_t>> groups;
    for (const auto& g : parse_groups(spec)) {
        std::vector<std::uint32_t> part;
        for (auto v : g) {
            part.push_back(static_cast<std::uint32_t>(v));
        }
        groups.push_back(std::move(part));
    }
    return groups;
}

int cmd_run(const std::string& scenario_path, std::uint64_t seed, bool seed_given,
            const std::string& out_dir, unsigned jobs) {
    Scenario scenario;
    try {
        scenario = load_scenario(scenario_path);
    } catch (const Error& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return 2;
    }
    const std::uint64_t effective_seed = seed_given ? seed : scenario.run.seed;
    log_debug("running " + scenario_path + " with seed " + std::to_string(effective_seed));
    try {
        (void)jobs; // a single run is strictly sequential and deterministic
        const auto result = run(scenario, effective_seed);
        std::filesystem::create_directories(out_dir);
        write_file(std::filesystem::path(out_dir) / "trace.csv", result.trace.to_csv());
        write_file(std::filesystem::path(out_dir) / "summary.json", result.summary.to_json());
        std::cout << result.summary.to_json();
        return 0;
    } catch (const UnrecoverableTransferError& e) {
        std::cerr << "unrecoverable run error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_analyze(const std::string& scenario_path, std::size_t budget, const std::string& out_dir,
                const std::string& curve_spec) {
    Scenario scenario;
    try {
        scenario = load_scenario(scenario_path);
    } catch (const Error& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return 2;
    }
    try {
        auto space = scenario.space();
        std::ostringstream json;
        json << "{\n";

        std::string hazard = "null";
        try {
            hazard = std::to_string(hazard_key(space));
        } catch (const NoHazardError&) {
        } catch (const CapacityError&) {
        }
        json << "  \"hazard_key\": " << hazard << ",\n";

        if (scenario.run.start_bits && scenario.run.goal_bits) {
            const auto start = decode(space, BitVec::from_string(*scenario.run.start_bits));
            const auto goal = decode(space, BitVec::from_string(*scenario.run.goal_bits));
            const auto report = detect_bridges_and_barriers(space, start, goal, budget);
            json << "  \"reachable\": " << (report.reachable ? "true" : "false") << ",\n";
            json << "  \"path\": [";
            for (std::size_t i = 0; i < report.path.size(); ++i) {
                json << (i == 0 ? "" : ", ") << "\"" << report.path[i].bits().to_string()
                     << "\"";
            }
            json << "],\n";
            json << "  \"min_budget\": " << report.min_budget << ",\n";
        } else {
            json << "  \"reachable\": null,\n  \"path\": [],\n  \"min_budget\": null,\n";
        }

        // Input-to-output redundancy of the stored patterns: patterns whose
        // deployable head selects the same plant configuration.
        const auto unit = scenario.build_unit();
        std::map<std::uint64_t, std::vector<std::uint32_t>> groups;
        for (const auto& [address, pattern] : unit.storages.front().patterns()) {
            BitVec head(space->total_bits());
            for (std::size_t i = 0; i < head.size(); ++i) {
                head.set(i, pattern.bits.get(i));
            }
            groups[detail::clamp_decode(*space, head)].push_back(address);
        }
        json << "  \"redundancy_groups\": [";
        bool first = true;
        for (const auto& [target, members] : groups) {
            if (members.size() < 2) {
                continue;
            }
            json << (first ? "" : ", ") << "[";
            for (std::size_t i = 0; i < members.size(); ++i) {
                json << (i == 0 ? "" : ", ") << members[i];
            }
            json << "]";
            first = false;
        }
        json << "]\n}\n";
        std::cout << json.str();

        if (!curve_spec.empty()) {
            TransferJob job;
            job.channel = Channel::m;
            for (const auto& part : parse_groups(curve_spec)) {
                if (part.size() != 2) {
                    throw Error("curve spec entries are bits,rank pairs separated by /");
                }
                job.segments.push_back(PrioritySegment{
                    part[0], static_cast<std::uint32_t>(part[1])});
                job.payload_bits += part[0];
            }
            const auto curve = prioritized_implement(job, scenario.channels);
            std::ostringstream csv;
            csv << "tick,mass_fraction\n";
            for (std::size_t i = 0; i < curve.mass_fraction.size(); ++i) {
                csv << (i + 1) << "," << format_real(curve.mass_fraction[i]) << "\n";
            }
            std::filesystem::create_directories(out_dir);
            write_file(std::filesystem::path(out_dir) / "curve.csv", csv.str());
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "analysis error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_reachability(const std::string& scenario_path, const std::string& budgets_csv,
                     std::uint64_t theta, bool theta_given, bool as_json,
                     const std::string& out_dir) {
    Scenario scenario;
    try {
        scenario = load_scenario(scenario_path);
    } catch (const Error& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return 2;
    }
    try {
        std::vector<std::size_t> budgets;
        if (!budgets_csv.empty()) {
            std::istringstream stream(budgets_csv);
            std::string token;
            while (std::getline(stream, token, ',')) {
                budgets.push_back(std::stoul(token));
            }
        } else {
            budgets = scenario.run.budgets;
        }
        if (budgets.empty()) {
            throw Error("no budgets given; use --budget or the scenario's RUN budgets");
        }
        const auto table = reachability_experiment(
            scenario, budgets, theta_given ? theta : scenario.run.theta);
        std::ostringstream csv;
        csv << "budget,reachable,path_steps,wall_ticks\n";
        for (const auto& row : table) {
            csv << row.budget << "," << (row.reachable ? 1 : 0) << "," << row.path_steps << ","
                << row.wall_ticks << "\n";
        }
        if (as_json) {
            std::ostringstream json;
            json << "[\n";
            for (std::size_t i = 0; i < table.size(); ++i) {
                json << "  {\"budget\": " << table[i].budget << ", \"reachable\": "
                     << (table[i].reachable ? "true" : "false")
                     << ", \"path_steps\": " << table[i].path_steps
                     << ", \"wall_ticks\": " << table[i].wall_ticks << "}"
                     << (i + 1 < table.size() ? "," : "") << "\n";
            }
            json << "]\n";
            std::cout << json.str();
        } else {
            std::cout << csv.str();
        }
        if (!out_dir.empty()) {
            std::filesystem::create_directories(out_dir);
            write_file(std::filesystem::path(out_dir) / "reachability.csv", csv.str());
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "analysis error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_safety(const std::string& scenario_path, std::uint64_t seed, bool seed_given) {
    Scenario scenario;
    try {
        scenario = load_scenario(scenario_path);
    } catch (const Error& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return 2;
    }
    try {
        const auto result = run(scenario, seed_given ? seed : scenario.run.seed);
        const auto& s = result.summary;
        std::ostringstream json;
        json << "{\n";
        json << "  \"h_k\": " << (s.h_k ? std::to_string(*s.h_k) : "null") << ",\n";
        json << "  \"h_kp\": " << (s.h_kp ? std::to_string(*s.h_kp) : "null") << ",\n";
        json << "  \"R\": " << format_real(s.reliability) << ",\n";
        json << "  \"S\": " << (s.product_safety ? format_real(*s.product_safety) : "null")
             << "\n}\n";
        std::cout << json.str();
        return 0;
    } catch (const Error& e) {
        std::cerr << "run error: " << e.what() << "\n";
        return 3;
    }
}

int cmd_decompose(const std::string& scenario_path, const std::string& op,
                  const std::string& split, std::uint64_t seed, bool seed_given) {
    Scenario scenario;
    try {
        scenario = load_scenario(scenario_path);
    } catch (const Error& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return 2;
    }
    std::string reason = "ok";
    bool permissible = true;
    bool trace_equal = false;
    try {
        auto unit = scenario.build_unit();
        const auto effective_seed = seed_given ? seed : scenario.run.seed;
        Scenario probe = scenario;
        probe.environment.faults.clear(); // probe the undisturbed plant behavior
        const auto reference = run_with_unit(probe, effective_seed, unit);

        std::vector<OmegaUnit> decomposed;
        if (op == "dec_s") {
            decomposed.push_back(dec_s(unit, parse_address_groups(split)));
        } else if (op == "dec_c") {
            decomposed.push_back(dec_c(unit, parse_groups(split)));
        } else if (op == "dec_p") {
            decomposed.push_back(dec_p(unit, parse_groups(split)));
        } else if (op == "dec_i") {
            auto staged = dec_p(unit, parse_groups(split));
            staged = dec_c(staged, parse_groups(split));
            // dec_i additionally needs per-fragment storage; report the check
            decomposed.push_back(std::move(staged));
            std::vector<std::vector<std::uint32_t>> halves;
            (void)dec_i(decomposed.front()); // throws when impermissible
        } else {
            std::cerr << "unknown operation '" << op << "'\n";
            return 2;
        }
        const auto probe_run = run_with_unit(probe, effective_seed, decomposed.front());
        trace_equal = probe_run.trace.per_tick == reference.trace.per_tick;
    } catch (const ImpermissibleDecompositionError& e) {
        permissible = false;
        reason = e.what();
    } catch (const Error& e) {
        permissible = false;
        reason = e.what();
    }
    std::ostringstream json;
    json << "{\n";
    json << "  \"operation\": \"" << op << "\",\n";
    json << "  \"permissible\": " << (permissible ? "true" : "false") << ",\n";
    json << "  \"reason\": \"" << reason << "\",\n";
    json << "  \"trace_equal\": " << (trace_equal ? "true" : "false") << "\n";
    json << "}\n";
    std::cout << json.str();
    return 0;
}

struct CheckResult {
    std::string name;
    std::string expected;
    std::string observed;
    bool pass = false;
};

int cmd_paper_check(bool as_json) {
    std::vector<CheckResult> checks;

    // Channel timing: 8 classes over q=1, 1024 patterns over r=5, 2048-bit
    // pattern over n=m=128.
    {
        const auto sc = parse_scenario(builtin::paper_5_1);
        const auto result = run(sc, sc.run.seed);
        const auto& s = result.summary;
        std::ostringstream observed;
        observed << s.identification_ticks << "+" << s.selection_ticks << "&" << s.transfer_ticks
                 << " wall " << s.reconf_wall_ticks << " frozen " << s.frozen_ticks;
        checks.push_back({"channel timing 19 ticks", "3+2&16 wall 19 frozen 16", observed.str(),
                          s.identification_ticks == 3 && s.selection_ticks == 2 &&
                              s.transfer_ticks == 16 && s.reconf_wall_ticks == 19 &&
                              s.frozen_ticks == 16});
    }
    // Fragmentation: an even 2-way split halves the transfer.
    {
        const auto sc = parse_scenario(builtin::fig40_split);
        auto unit = sc.build_unit();
        const auto whole = run_with_unit(sc, sc.run.seed, unit);
        const auto halves = run_with_unit(sc, sc.run.seed, dec_p(unit, {{0, 1}, {2, 3}}));
        std::ostringstream observed;
        observed << whole.summary.transfer_ticks << " -> " << halves.summary.transfer_ticks;
        checks.push_back({"2-way split transfer factor 2", "16 -> 8", observed.str(),
                          whole.summary.transfer_ticks == 16 &&
                              halves.summary.transfer_ticks == 8});

        Scenario probe = sc;
        probe.environment.faults.clear();
        auto probe_unit = probe.build_unit();
        const auto joint = run_with_unit(probe, probe.run.seed, probe_unit);
        const auto split = run_with_unit(probe, probe.run.seed, dec_p(probe_unit, {{0, 1}, {2, 3}}));
        const bool equal = joint.trace.per_tick == split.trace.per_tick;
        checks.push_back({"2-way split trace equivalence", "identical traces",
                          equal ? "identical traces" : "traces diverge", equal});
    }
    // Divergence selection sizes: 2 raw bits, 1.5 expected storage bits.
    {
        std::vector<Dimension> dims;
        for (int i = 0; i < 3; ++i) {
            dims.push_back(Dimension::boolean("b" + std::to_string(i)));
        }
        auto space = ConfigSpace::create(std::move(dims));
        std::vector<SubPlant> table(8);
        for (std::uint64_t i = 0; i < 8; ++i) {
            table[i].successor = i;
        }
        table[0].successor = 1;
        table[1].successor = 2;
        table[2].successor = 3;
        table[3].successor = 0;
        table[4].successor = 5;
        table[5].successor = 6;
        table[6].successor = 0;
        table[7].successor = 0;
        Plant plant = make_plant(space, std::move(table));
        plant.program = {0, 1, 2, 3};
        plant.divergence_points = {{"A", 1, {2, 4}}, {"B", 5, {6, 7}}};
        const auto stats = divergence_stats(plant);
        std::ostringstream observed;
        observed << stats.psi_bits << " bits, " << format_real(stats.expected_prefix_bits)
                 << " expected, " << stats.max_prefix_bits << " max";
        checks.push_back({"divergence selection sizes", "2 bits, 1.5 expected, 2 max",
                          observed.str(),
                          stats.psi_bits == 2 && stats.expected_prefix_bits == 1.5 &&
                              stats.max_prefix_bits == 2});
    }
    // Dwell-constrained reachability of the three-component transition.
    {
        const auto sc = parse_scenario(builtin::three_component);
        const auto table = reachability_experiment(sc, {3, 2}, sc.run.theta);
        std::ostringstream observed;
        observed << "budget 3 " << (table[0].reachable ? "reachable" : "unreachable")
                 << " in " << table[0].path_steps << ", budget 2 "
                 << (table[1].reachable ? "reachable" : "unreachable");
        checks.push_back({"three-component dwell transition",
                          "budget 3 reachable in 1, budget 2 unreachable", observed.str(),
                          table[0].reachable && table[0].path_steps == 1 &&
                              !table[1].reachable});
    }
    // Shrinking budgets never shorten the path.
    {
        const auto sc = parse_scenario(builtin::fig59_detour);
        const auto table = reachability_experiment(sc, sc.run.budgets, sc.run.theta);
        std::ostringstream observed;
        bool monotone = true;
        std::size_t previous = 0;
        for (std::size_t i = 0; i < table.size(); ++i) {
            observed << (i == 0 ? "" : ", ") << table[i].path_steps;
            monotone = monotone && table[i].reachable && table[i].path_steps >= previous;
            previous = table[i].path_steps;
        }
        checks.push_back(
            {"slower is a lot slower", "1, 2, 4", observed.str(),
             monotone && table[0].path_steps == 1 && table[2].path_steps == 4});
    }

    bool all_pass = true;
    if (as_json) {
        std::ostringstream json;
        json << "[\n";
        for (std::size_t i = 0; i < checks.size(); ++i) {
            const auto& c = checks[i];
            json << "  {\"check\": \"" << c.name << "\", \"expected\": \"" << c.expected
                 << "\", \"observed\": \"" << c.observed << "\", \"pass\": "
                 << (c.pass ? "true" : "false") << "}" << (i + 1 < checks.size() ? "," : "")
                 << "\n";
            all_pass = all_pass && c.pass;
        }
        json << "]\n";
        std::cout << json.str();
    } else {
        for (const auto& c : checks) {
            std::printf("%-34s expected: %-38s observed: %-38s %s\n", c.name.c_str(),
                        c.expected.c_str(), c.observed.c_str(), c.pass ? "PASS" : "FAIL");
            all_pass = all_pass && c.pass;
        }
    }
    return all_pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"omegasim: a discrete-time simulator for self-configuring units"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    std::size_t budget = 1;
    std::string budgets_csv;
    std::uint64_t theta = 1;
    bool as_json = false;
    std::string op;
    std::string split;
    std::string curve_spec;

    auto* run_cmd = app.add_subcommand("run", "simulate a scenario, write trace and summary");
    run_cmd->add_option("scenario", scenario_path)->required();
    auto* run_seed = run_cmd->add_option("--seed", seed, "override the scenario seed");
    run_cmd->add_option("--out", out_dir, "output directory");
    run_cmd->add_option("--jobs", jobs, "parallel batch workers");

    auto* analyze_cmd =
        app.add_subcommand("analyze", "configuration-space analysis of a scenario");
    analyze_cmd->add_option("scenario", scenario_path)->required();
    analyze_cmd->add_option("--budget", budget, "bits per reconfiguration step");
    analyze_cmd->add_option("--out", out_dir, "output directory");
    analyze_cmd->add_option("--curve", curve_spec,
                            "emit a prioritized service curve for bits,rank/... segments");

    auto* reach_cmd = app.add_subcommand("reachability", "speed-dependent reachability table");
    reach_cmd->add_option("scenario", scenario_path)->required();
    reach_cmd->add_option("--budget", budgets_csv, "comma-separated step budgets");
    auto* reach_theta = reach_cmd->add_option("--theta", theta, "dwell tolerance in ticks");
    reach_cmd->add_flag("--json", as_json, "machine-readable output");
    reach_cmd->add_option("--out", out_dir, "directory for the tidy CSV");

    auto* safety_cmd = app.add_subcommand("safety", "hazard keys and product safety");
    safety_cmd->add_option("scenario", scenario_path)->required();
    auto* safety_seed = safety_cmd->add_option("--seed", seed);

    auto* dec_cmd = app.add_subcommand("decompose", "check and apply a unit decomposition");
    dec_cmd->add_option("scenario", scenario_path)->required();
    dec_cmd->add_option("--op", op, "dec_s | dec_c | dec_p | dec_i")->required();
    dec_cmd->add_option("--split", split, "groups, e.g. 0,1/2,3");
    auto* dec_seed = dec_cmd->add_option("--seed", seed);

    auto* check_cmd = app.add_subcommand("paper-check", "reproduce the built-in worked examples");
    check_cmd->add_flag("--json", as_json, "machine-readable output");

    CLI11_PARSE(app, argc, argv);

    if (run_cmd->parsed()) {
        return cmd_run(scenario_path, seed, run_seed->count() > 0, out_dir, jobs);
    }
    if (analyze_cmd->parsed()) {
        return cmd_analyze(scenario_path, budget, out_dir, curve_spec);
    }
    if (reach_cmd->parsed()) {
        return cmd_reachability(scenario_path, budgets_csv, theta, reach_theta->count() > 0,
                                as_json, "");
    }
    if (safety_cmd->parsed()) {
        return cmd_safety(scenario_path, seed, safety_seed->count() > 0);
    }
    if (dec_cmd->parsed()) {
        return cmd_decompose(scenario_path, op, split, seed, dec_seed->count() > 0);
    }
    if (check_cmd->parsed()) {
        return cmd_paper_check(as_json);
    }
    return 0;
}
