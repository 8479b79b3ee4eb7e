#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "omegasim/channels.hpp"
#include "omegasim/configspace.hpp"
#include "omegasim/omega.hpp"
#include "omegasim/plant.hpp"
#include "omegasim/storage.hpp"

namespace omegasim {

// Scenario DSL: line-oriented sections (SPACE / LEGAL / PLANT / STORAGE /
// CHANNELS / CONTROLLER / ENVIRONMENT / RUN), `key = value` entries and
// indented tables, `#` comments, UTF-8 with LF line endings.

struct FaultEvent {
    std::uint64_t tick = 0;
    std::uint32_t error_class = 0;

    auto operator<=>(const FaultEvent&) const = default;
};

struct DisturbEvent {
    std::uint64_t tick = 0;
    std::string delta_bits;

    auto operator<=>(const DisturbEvent&) const = default;
};

struct DemandEvent {
    std::uint64_t tick = 0;
    std::int64_t output = 0;

    auto operator<=>(const DemandEvent&) const = default;
};

struct PlantSpec {
    std::uint64_t start = 0;
    ClockRate clock_rate;
    std::optional<std::size_t> psi_bits;
    bool strict_disturbances = false;
    std::map<std::uint64_t, std::pair<std::uint64_t, std::int64_t>> subs; // addr -> (succ, out)
    std::map<std::uint64_t, std::uint64_t> corrective;
    std::vector<std::uint64_t> program;
    std::vector<DivergencePoint> divergences;

    bool operator==(const PlantSpec& other) const {
        return start == other.start && clock_rate == other.clock_rate &&
               psi_bits == other.psi_bits && strict_disturbances == other.strict_disturbances &&
               subs == other.subs && corrective == other.corrective &&
               program == other.program && divergences.size() == other.divergences.size();
    }
};

struct StorageFill {
    std::uint32_t count = 0;
    std::size_t width = 0;
    std::uint64_t seed = 0;

    auto operator<=>(const StorageFill&) const = default;
};

struct StorageSpec {
    std::map<std::uint32_t, std::string> patterns; // addr -> bit string
    std::optional<StorageFill> fill;
    std::map<std::uint32_t, std::vector<std::uint32_t>> clusters;
    std::map<std::string, AssemblyRule> rules;
    std::vector<std::pair<std::string, std::uint32_t>> associations;
};

struct ControllerSpec {
    std::string family = "spontaneous"; // spontaneous | deterministic | stochastic | memory
    double damage_cap = std::numeric_limits<double>::infinity();
    double penalty_floor = 1e6;
    double attractor_weight = 1.0;
    double radius_weight = 0.125;
    std::size_t step_budget = 0; // 0 = unlimited
    std::optional<std::string> goal_bits;
    bool scheduled_switch = false; // false = greedy mode switching
    double temperature = 0.0;
    double temperature_decay = 0.95;
};

struct EnvironmentSpec {
    std::uint32_t error_classes = 2;
    std::vector<FaultEvent> faults;
    std::map<std::uint32_t, std::uint32_t> class_to_pattern;
    std::vector<DisturbEvent> disturbances;
    std::vector<DemandEvent> demands;
    double damage_weight = 1.0;
    std::vector<double> expect_plant;
    std::vector<double> expect_env;
    std::vector<std::uint32_t> env_script;
    std::optional<std::uint32_t> recovery;
    std::uint64_t erratic_window = 16;
    std::uint64_t erratic_threshold = 4;
    std::vector<Dimension> hybrid_dims;
    std::set<std::string> hybrid_blacklist; // hybrid point encodings
};

struct RunSpec {
    std::uint64_t ticks = 100;
    std::uint64_t seed = 0;
    std::uint64_t theta = 1;
    std::optional<std::string> start_bits;
    std::optional<std::string> goal_bits;
    std::vector<std::size_t> budgets;
};

struct Scenario {
    std::vector<Dimension> dims;
    std::vector<IntervalConstraint> legal_ranges;
    std::set<std::string> blacklist;  // point encodings
    std::set<std::string> whitelist;
    bool whitelist_mode = false;
    PlantSpec plant;
    StorageSpec storage;
    ChannelSet channels;
    double epsilon = 0.01; // technological unreliability, 1/s
    ControllerSpec controller;
    EnvironmentSpec environment;
    RunSpec run;

    SpacePtr space() const {
        LegalityMap legality;
        legality.constraints = legal_ranges;
        legality.whitelist_mode = whitelist_mode;
        auto probe = ConfigSpace::create(dims); // index conversion needs the space
        for (const auto& bits : blacklist) {
            legality.blacklist.insert(
                probe->index_of_ordinals(probe->decode_bits(BitVec::from_string(bits))));
        }
        for (const auto& bits : whitelist) {
            legality.whitelist.insert(
                probe->index_of_ordinals(probe->decode_bits(BitVec::from_string(bits))));
        }
        return ConfigSpace::create(dims, std::move(legality));
    }

    Plant build_plant(const SpacePtr& space_ptr) const {
        std::vector<SubPlant> table(space_ptr->point_count());
        for (std::uint64_t i = 0; i < table.size(); ++i) {
            table[i].successor = i;
        }
        for (const auto& [addr, spec] : plant.subs) {
            if (addr >= table.size() || spec.first >= table.size()) {
                throw RangeError("sub-plant address out of space");
            }
            table[addr].successor = spec.first;
            table[addr].output.constant = spec.second;
        }
        Plant p = make_plant(space_ptr, std::move(table), plant.start);
        p.clock_rate = plant.clock_rate;
        p.strict_disturbances = plant.strict_disturbances;
        for (const auto& [addr, succ] : plant.corrective) {
            if (addr >= p.table.size() || succ >= p.table.size()) {
                throw RangeError("corrective entry out of space");
            }
            p.corrective_field.emplace(addr, succ);
        }
        p.program = plant.program;
        p.divergence_points = plant.divergences;
        if (plant.psi_bits) {
            p.psi_bits = *plant.psi_bits;
        }
        return p;
    }

    Repository build_repository(const SpacePtr& space_ptr) const {
        Repository repo;
        const std::size_t width =
            plant.psi_bits.value_or(space_ptr->total_bits());
        if (storage.fill) {
            std::mt19937_64 rng(storage.fill->seed);
            for (std::uint32_t a = 0; a < storage.fill->count; ++a) {
                // Leading bits select a plant address so every filled
                // pattern stays deployable; the body is reproducible noise.
                BitVec bits = space_ptr->encode_ordinals(
                    space_ptr->ordinals_at(a % space_ptr->point_count()));
                while (bits.size() < storage.fill->width) {
                    bits.append_field(rng() & 1, 1);
                }
                repo.add_pattern(a, std::move(bits));
            }
        }
        for (const auto& [addr, bits] : storage.patterns) {
            repo.add_pattern(addr, BitVec::from_string(bits));
        }
        for (const auto& [address, pattern] : repo.patterns()) {
            if (pattern.kind == PatternKind::full && pattern.bits.size() != width) {
                throw ShapeError("pattern " + std::to_string(address) +
                                 " width does not match psi_bits");
            }
        }
        for (const auto& [id, members] : storage.clusters) {
            repo.set_cluster(id, members);
        }
        for (const auto& [name, rule] : storage.rules) {
            repo.add_rule(rule);
        }
        for (const auto& [trigger, addr] : storage.associations) {
            repo.associate(BitVec::from_string(trigger), addr);
        }
        return repo;
    }

    OmegaUnit build_unit() const {
        auto sp = space();
        Plant p = build_plant(sp);
        if (plant.psi_bits && *plant.psi_bits < sp->total_bits()) {
            throw ShapeError("psi_bits must cover the space width");
        }
        Repository repo = build_repository(sp);
        ControllerConfig cc;
        cc.damage_cap = controller.damage_cap;
        cc.penalty_floor = controller.penalty_floor;
        cc.attractor_weight = controller.attractor_weight;
        cc.radius_weight = controller.radius_weight;
        cc.step_budget = controller.step_budget == 0 ? SIZE_MAX : controller.step_budget;
        cc.expected_address_bits = repo.address_bits();
        return compose(std::move(repo), std::move(cc), std::move(p), channels);
    }

    std::string serialize() const;
};

// --- Parsing ----------------------------------------------------------------

namespace detail {

struct LineLexer {
    std::string text;
    std::size_t line_no = 0;

    std::vector<std::string> tokens;
    std::vector<std::size_t> columns;

    void split(const std::string& raw, std::size_t number) {
        line_no = number;
        tokens.clear();
        columns.clear();
        std::size_t i = 0;
        while (i < raw.size()) {
            if (raw[i] == '#') {
                break;
            }
            if (std::isspace(static_cast<unsigned char>(raw[i]))) {
                ++i;
                continue;
            }
            const std::size_t start = i;
            while (i < raw.size() && !std::isspace(static_cast<unsigned char>(raw[i])) &&
                   raw[i] != '#') {
                ++i;
            }
            tokens.push_back(raw.substr(start, i - start));
            columns.push_back(start + 1);
        }
    }

    [[noreturn]] void fail(std::size_t token_index, const std::string& what) const {
        const std::size_t column =
            token_index < columns.size() ? columns[token_index] : (columns.empty() ? 1 : columns.back());
        throw ParseError(line_no, column, what);
    }

    const std::string& at(std::size_t i) const {
        if (i >= tokens.size()) {
            fail(tokens.size() - 1, "unexpected end of line");
        }
        return tokens[i];
    }

    std::uint64_t u64(std::size_t i) const {
        const auto& t = at(i);
        std::uint64_t value = 0;
        const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
        if (ec != std::errc() || ptr != t.data() + t.size()) {
            fail(i, "expected a non-negative integer, got '" + t + "'");
        }
        return value;
    }

    std::int64_t i64(std::size_t i) const {
        const auto& t = at(i);
        std::int64_t value = 0;
        const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
        if (ec != std::errc() || ptr != t.data() + t.size()) {
            fail(i, "expected an integer, got '" + t + "'");
        }
        return value;
    }

    double real(std::size_t i) const {
        const auto& t = at(i);
        if (t == "inf") {
            return std::numeric_limits<double>::infinity();
        }
        try {
            std::size_t used = 0;
            const double value = std::stod(t, &used);
            if (used != t.size()) {
                fail(i, "expected a number, got '" + t + "'");
            }
            return value;
        } catch (const std::exception&) {
            fail(i, "expected a number, got '" + t + "'");
        }
    }

    bool boolean(std::size_t i) const {
        const auto& t = at(i);
        if (t == "true") {
            return true;
        }
        if (t == "false") {
            return false;
        }
        fail(i, "expected true or false, got '" + t + "'");
    }

    std::string bits(std::size_t i) const {
        const auto& t = at(i);
        for (char c : t) {
            if (c != '0' && c != '1') {
                fail(i, "expected a bit string, got '" + t + "'");
            }
        }
        return t;
    }

    void expect(std::size_t i, const char* literal) const {
        if (at(i) != literal) {
            fail(i, std::string("expected '") + literal + "', got '" + at(i) + "'");
        }
    }
};

inline std::string format_real(double v) {
    if (v == std::numeric_limits<double>::infinity()) {
        return "inf";
    }
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.9g", v);
    return buffer;
}

} // namespace detail

inline Scenario parse_scenario(const std::string& text) {
    Scenario sc;
    sc.channels = ChannelSet{.q = 1, .r = 1, .n = 1, .m = 1, .bit_error_rate = 0,
                             .duplex_repair = true};

    enum class Section { none, space, legal, plant, storage, channels, controller, environment, run };
    Section section = Section::none;
    detail::LineLexer lex;

    std::istringstream stream(text);
    std::string raw;
    std::size_t line_no = 0;
    bool saw_space = false;
    while (std::getline(stream, raw)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') {
            throw ParseError(line_no, raw.size(), "scenario files use LF line endings");
        }
        lex.split(raw, line_no);
        if (lex.tokens.empty()) {
            continue;
        }
        const std::string& head = lex.tokens[0];
        if (head == "SPACE") {
            section = Section::space;
            saw_space = true;
            continue;
        }
        if (head == "LEGAL") {
            section = Section::legal;
            continue;
        }
        if (head == "PLANT") {
            section = Section::plant;
            continue;
        }
        if (head == "STORAGE") {
            section = Section::storage;
            continue;
        }
        if (head == "CHANNELS") {
            section = Section::channels;
            continue;
        }
        if (head == "CONTROLLER") {
            section = Section::controller;
            continue;
        }
        if (head == "ENVIRONMENT") {
            section = Section::environment;
            continue;
        }
        if (head == "RUN") {
            section = Section::run;
            continue;
        }

        switch (section) {
            case Section::none:
                lex.fail(0, "content before the first section header");
            case Section::space: {
                lex.expect(0, "dim");
                const std::string name = lex.at(1);
                lex.expect(2, "=");
                const std::string kind = lex.at(3);
                if (kind == "bool") {
                    sc.dims.push_back(Dimension::boolean(name));
                } else if (kind == "int") {
                    sc.dims.push_back(Dimension::integer_range(name, lex.i64(4), lex.i64(5)));
                } else if (kind == "real") {
                    sc.dims.push_back(
                        Dimension::quantized(name, lex.real(4), lex.real(5), lex.u64(6)));
                } else {
                    lex.fail(3, "unknown dimension kind '" + kind + "'");
                }
                break;
            }
            case Section::legal: {
                if (head == "range") {
                    const std::string dim_name = lex.at(1);
                    std::size_t dim_index = SIZE_MAX;
                    for (std::size_t d = 0; d < sc.dims.size(); ++d) {
                        if (sc.dims[d].name() == dim_name) {
                            dim_index = d;
                        }
                    }
                    if (dim_index == SIZE_MAX) {
                        lex.fail(1, "unknown dimension '" + dim_name + "'");
                    }
                    sc.legal_ranges.push_back(
                        IntervalConstraint{dim_index, static_cast<std::uint32_t>(lex.u64(2)),
                                           static_cast<std::uint32_t>(lex.u64(3))});
                } else if (head == "blacklist") {
                    for (std::size_t i = 1; i < lex.tokens.size(); ++i) {
                        sc.blacklist.insert(lex.bits(i));
                    }
                } else if (head == "whitelist") {
                    for (std::size_t i = 1; i < lex.tokens.size(); ++i) {
                        sc.whitelist.insert(lex.bits(i));
                    }
                } else if (head == "whitelist_mode") {
                    lex.expect(1, "=");
                    sc.whitelist_mode = lex.boolean(2);
                } else {
                    lex.fail(0, "unknown LEGAL entry '" + head + "'");
                }
                break;
            }
            case Section::plant: {
                if (head == "start") {
                    lex.expect(1, "=");
                    sc.plant.start = lex.u64(2);
                } else if (head == "clock_rate") {
                    lex.expect(1, "=");
                    const std::string& t = lex.at(2);
                    const auto slash = t.find('/');
                    if (slash == std::string::npos) {
                        sc.plant.clock_rate = ClockRate{static_cast<std::uint32_t>(lex.u64(2)), 1};
                    } else {
                        try {
                            sc.plant.clock_rate =
                                ClockRate{static_cast<std::uint32_t>(std::stoul(t.substr(0, slash))),
                                          static_cast<std::uint32_t>(std::stoul(t.substr(slash + 1)))};
                        } catch (const std::exception&) {
                            lex.fail(2, "expected <num>/<den>");
                        }
                    }
                    if (sc.plant.clock_rate.den == 0) {
                        lex.fail(2, "clock denominator must be positive");
                    }
                } else if (head == "psi_bits") {
                    lex.expect(1, "=");
                    sc.plant.psi_bits = lex.u64(2);
                } else if (head == "strict_disturbances") {
                    lex.expect(1, "=");
                    sc.plant.strict_disturbances = lex.boolean(2);
                } else if (head == "sub") {
                    const auto addr = lex.u64(1);
                    lex.expect(2, "->");
                    const auto succ = lex.u64(3);
                    std::int64_t out = 0;
                    if (lex.tokens.size() > 4) {
                        lex.expect(4, "out");
                        out = lex.i64(5);
                    }
                    sc.plant.subs[addr] = {succ, out};
                } else if (head == "corrective") {
                    const auto addr = lex.u64(1);
                    lex.expect(2, "->");
                    sc.plant.corrective[addr] = lex.u64(3);
                } else if (head == "program") {
                    lex.expect(1, "=");
                    for (std::size_t i = 2; i < lex.tokens.size(); ++i) {
                        sc.plant.program.push_back(lex.u64(i));
                    }
                } else if (head == "divergence") {
                    DivergencePoint dp;
                    dp.name = lex.at(1);
                    lex.expect(2, "at");
                    dp.address = lex.u64(3);
                    lex.expect(4, "->");
                    for (std::size_t i = 5; i < lex.tokens.size(); ++i) {
                        dp.branches.push_back(lex.u64(i));
                    }
                    sc.plant.divergences.push_back(std::move(dp));
                } else {
                    lex.fail(0, "unknown PLANT entry '" + head + "'");
                }
                break;
            }
            case Section::storage: {
                if (head == "pattern") {
                    const auto addr = static_cast<std::uint32_t>(lex.u64(1));
                    lex.expect(2, "=");
                    sc.storage.patterns[addr] = lex.bits(3);
                } else if (head == "patterns_fill") {
                    lex.expect(1, "=");
                    lex.expect(2, "count");
                    StorageFill fill;
                    fill.count = static_cast<std::uint32_t>(lex.u64(3));
                    lex.expect(4, "width");
                    fill.width = lex.u64(5);
                    lex.expect(6, "seed");
                    fill.seed = lex.u64(7);
                    sc.storage.fill = fill;
                } else if (head == "cluster") {
                    const auto id = static_cast<std::uint32_t>(lex.u64(1));
                    lex.expect(2, "=");
                    std::vector<std::uint32_t> members;
                    for (std::size_t i = 3; i < lex.tokens.size(); ++i) {
                        members.push_back(static_cast<std::uint32_t>(lex.u64(i)));
                    }
                    sc.storage.clusters[id] = std::move(members);
                } else if (head == "rule") {
                    AssemblyRule rule;
                    rule.name = lex.at(1);
                    lex.expect(2, "=");
                    lex.expect(3, "total");
                    rule.total_bits = lex.u64(4);
                    lex.expect(5, "default");
                    rule.default_bit = lex.u64(6) != 0;
                    std::size_t i = 7;
                    while (i < lex.tokens.size()) {
                        lex.expect(i, "frag");
                        const auto addr = static_cast<std::uint32_t>(lex.u64(i + 1));
                        lex.expect(i + 2, "at");
                        rule.fragments.push_back(FragmentRef{addr, lex.u64(i + 3)});
                        i += 4;
                    }
                    sc.storage.rules[rule.name] = std::move(rule);
                } else if (head == "assoc") {
                    const auto trigger = lex.bits(1);
                    lex.expect(2, "->");
                    sc.storage.associations.emplace_back(trigger,
                                                         static_cast<std::uint32_t>(lex.u64(3)));
                } else {
                    lex.fail(0, "unknown STORAGE entry '" + head + "'");
                }
                break;
            }
            case Section::channels: {
                lex.expect(1, "=");
                if (head == "q") {
                    sc.channels.q = lex.real(2);
                } else if (head == "r") {
                    sc.channels.r = lex.real(2);
                } else if (head == "n") {
                    sc.channels.n = lex.real(2);
                } else if (head == "m") {
                    sc.channels.m = lex.real(2);
                } else if (head == "bit_error_rate") {
                    sc.channels.bit_error_rate = lex.real(2);
                } else if (head == "duplex_repair") {
                    sc.channels.duplex_repair = lex.boolean(2);
                } else if (head == "epsilon") {
                    sc.epsilon = lex.real(2);
                } else {
                    lex.fail(0, "unknown CHANNELS entry '" + head + "'");
                }
                break;
            }
            case Section::controller: {
                lex.expect(1, "=");
                if (head == "family") {
                    const std::string& f = lex.at(2);
                    if (f != "spontaneous" && f != "iterative" && f != "deterministic" &&
                        f != "stochastic" && f != "memory" && f != "mixing") {
                        lex.fail(2, "unknown controller family '" + f + "'");
                    }
                    sc.controller.family = f;
                } else if (head == "damage_cap") {
                    sc.controller.damage_cap = lex.real(2);
                } else if (head == "penalty_floor") {
                    sc.controller.penalty_floor = lex.real(2);
                } else if (head == "attractor_weight") {
                    sc.controller.attractor_weight = lex.real(2);
                } else if (head == "radius_weight") {
                    sc.controller.radius_weight = lex.real(2);
                } else if (head == "step_budget") {
                    sc.controller.step_budget = lex.u64(2);
                } else if (head == "goal") {
                    sc.controller.goal_bits = lex.bits(2);
                } else if (head == "switch_policy") {
                    const std::string& p = lex.at(2);
                    if (p == "greedy") {
                        sc.controller.scheduled_switch = false;
                    } else if (p == "scheduled") {
                        sc.controller.scheduled_switch = true;
                    } else {
                        lex.fail(2, "switch_policy is greedy or scheduled");
                    }
                } else if (head == "temperature") {
                    sc.controller.temperature = lex.real(2);
                    if (lex.tokens.size() > 3) {
                        sc.controller.temperature_decay = lex.real(3);
                    }
                } else {
                    lex.fail(0, "unknown CONTROLLER entry '" + head + "'");
                }
                break;
            }
            case Section::environment: {
                if (head == "error_classes") {
                    lex.expect(1, "=");
                    sc.environment.error_classes = static_cast<std::uint32_t>(lex.u64(2));
                    if (sc.environment.error_classes < 1) {
                        lex.fail(2, "need at least one error class");
                    }
                } else if (head == "fault") {
                    const auto tick = lex.u64(1);
                    lex.expect(2, "class");
                    sc.environment.faults.push_back(
                        FaultEvent{tick, static_cast<std::uint32_t>(lex.u64(3))});
                } else if (head == "map") {
                    lex.expect(1, "class");
                    const auto cls = static_cast<std::uint32_t>(lex.u64(2));
                    lex.expect(3, "->");
                    lex.expect(4, "pattern");
                    sc.environment.class_to_pattern[cls] = static_cast<std::uint32_t>(lex.u64(5));
                } else if (head == "disturb") {
                    const auto tick = lex.u64(1);
                    sc.environment.disturbances.push_back(DisturbEvent{tick, lex.bits(2)});
                } else if (head == "demand") {
                    const auto tick = lex.u64(1);
                    lex.expect(2, "output");
                    sc.environment.demands.push_back(DemandEvent{tick, lex.i64(3)});
                } else if (head == "damage_weight") {
                    lex.expect(1, "=");
                    sc.environment.damage_weight = lex.real(2);
                } else if (head == "expect") {
                    const std::string& which = lex.at(1);
                    lex.expect(2, "=");
                    std::vector<double> dist;
                    for (std::size_t i = 3; i < lex.tokens.size(); ++i) {
                        dist.push_back(lex.real(i));
                    }
                    if (which == "plant") {
                        sc.environment.expect_plant = std::move(dist);
                    } else if (which == "env") {
                        sc.environment.expect_env = std::move(dist);
                    } else {
                        lex.fail(1, "expect is for 'plant' or 'env'");
                    }
                } else if (head == "env_script") {
                    lex.expect(1, "=");
                    for (std::size_t i = 2; i < lex.tokens.size(); ++i) {
                        sc.environment.env_script.push_back(
                            static_cast<std::uint32_t>(lex.u64(i)));
                    }
                } else if (head == "recovery") {
                    lex.expect(1, "=");
                    sc.environment.recovery = static_cast<std::uint32_t>(lex.u64(2));
                } else if (head == "erratic_window") {
                    lex.expect(1, "=");
                    sc.environment.erratic_window = lex.u64(2);
                } else if (head == "erratic_threshold") {
                    lex.expect(1, "=");
                    sc.environment.erratic_threshold = lex.u64(2);
                } else if (head == "hybrid_dim") {
                    const std::string name = lex.at(1);
                    lex.expect(2, "=");
                    const std::string kind = lex.at(3);
                    if (kind == "bool") {
                        sc.environment.hybrid_dims.push_back(Dimension::boolean(name));
                    } else if (kind == "int") {
                        sc.environment.hybrid_dims.push_back(
                            Dimension::integer_range(name, lex.i64(4), lex.i64(5)));
                    } else {
                        lex.fail(3, "hybrid dimensions are bool or int");
                    }
                } else if (head == "hybrid_blacklist") {
                    for (std::size_t i = 1; i < lex.tokens.size(); ++i) {
                        sc.environment.hybrid_blacklist.insert(lex.bits(i));
                    }
                } else {
                    lex.fail(0, "unknown ENVIRONMENT entry '" + head + "'");
                }
                break;
            }
            case Section::run: {
                lex.expect(1, "=");
                if (head == "ticks") {
                    sc.run.ticks = lex.u64(2);
                } else if (head == "seed") {
                    sc.run.seed = lex.u64(2);
                } else if (head == "theta") {
                    sc.run.theta = lex.u64(2);
                    if (sc.run.theta < 1) {
                        lex.fail(2, "theta must be at least 1 tick");
                    }
                } else if (head == "start") {
                    sc.run.start_bits = lex.bits(2);
                } else if (head == "goal") {
                    sc.run.goal_bits = lex.bits(2);
                } else if (head == "budgets") {
                    for (std::size_t i = 2; i < lex.tokens.size(); ++i) {
                        sc.run.budgets.push_back(lex.u64(i));
                    }
                } else {
                    lex.fail(0, "unknown RUN entry '" + head + "'");
                }
                break;
            }
        }
    }
    if (!saw_space || sc.dims.empty()) {
        throw ParseError(line_no, 1, "scenario needs a SPACE section with at least one dimension");
    }
    // Cross-checks with location-free messages wrapped as parse errors.
    for (const auto& [cls, pattern] : sc.environment.class_to_pattern) {
        if (cls >= sc.environment.error_classes) {
            throw ParseError(line_no, 1,
                             "class " + std::to_string(cls) + " exceeds error_classes");
        }
    }
    return sc;
}

// --- Canonical serialization ---------------------------------------------------

inline std::string Scenario::serialize() const {
    std::ostringstream out;
    out << "SPACE\n";
    for (const auto& d : dims) {
        out << "  dim " << d.name() << " = ";
        switch (d.kind()) {
            case DimKind::boolean:
                out << "bool";
                break;
            case DimKind::integer_range:
                out << "int " << d.int_lo() << " " << d.int_hi();
                break;
            case DimKind::quantized_real:
                out << "real " << detail::format_real(d.real_lo()) << " "
                    << detail::format_real(d.real_hi()) << " " << d.cardinality();
                break;
        }
        out << "\n";
    }
    out << "LEGAL\n";
    for (const auto& c : legal_ranges) {
        out << "  range " << dims[c.dim].name() << " " << c.lo_ord << " " << c.hi_ord << "\n";
    }
    if (!blacklist.empty()) {
        out << "  blacklist";
        for (const auto& bits : blacklist) {
            out << " " << bits;
        }
        out << "\n";
    }
    if (!whitelist.empty()) {
        out << "  whitelist";
        for (const auto& bits : whitelist) {
            out << " " << bits;
        }
        out << "\n";
    }
    out << "  whitelist_mode = " << (whitelist_mode ? "true" : "false") << "\n";

    out << "PLANT\n";
    out << "  start = " << plant.start << "\n";
    out << "  clock_rate = " << plant.clock_rate.num << "/" << plant.clock_rate.den << "\n";
    if (plant.psi_bits) {
        out << "  psi_bits = " << *plant.psi_bits << "\n";
    }
    out << "  strict_disturbances = " << (plant.strict_disturbances ? "true" : "false") << "\n";
    for (const auto& [addr, spec] : plant.subs) {
        out << "  sub " << addr << " -> " << spec.first << " out " << spec.second << "\n";
    }
    for (const auto& [addr, succ] : plant.corrective) {
        out << "  corrective " << addr << " -> " << succ << "\n";
    }
    if (!plant.program.empty()) {
        out << "  program =";
        for (auto a : plant.program) {
            out << " " << a;
        }
        out << "\n";
    }
    for (const auto& dp : plant.divergences) {
        out << "  divergence " << dp.name << " at " << dp.address << " ->";
        for (auto b : dp.branches) {
            out << " " << b;
        }
        out << "\n";
    }

    out << "STORAGE\n";
    if (storage.fill) {
        out << "  patterns_fill = count " << storage.fill->count << " width "
            << storage.fill->width << " seed " << storage.fill->seed << "\n";
    }
    for (const auto& [addr, bits] : storage.patterns) {
        out << "  pattern " << addr << " = " << bits << "\n";
    }
    for (const auto& [id, members] : storage.clusters) {
        out << "  cluster " << id << " =";
        for (auto m : members) {
            out << " " << m;
        }
        out << "\n";
    }
    for (const auto& [name, rule] : storage.rules) {
        out << "  rule " << name << " = total " << rule.total_bits << " default "
            << (rule.default_bit ? 1 : 0);
        for (const auto& frag : rule.fragments) {
            out << " frag " << frag.address << " at " << frag.offset;
        }
        out << "\n";
    }
    for (const auto& [trigger, addr] : storage.associations) {
        out << "  assoc " << trigger << " -> " << addr << "\n";
    }

    out << "CHANNELS\n";
    out << "  q = " << detail::format_real(channels.q) << "\n";
    out << "  r = " << detail::format_real(channels.r) << "\n";
    out << "  n = " << detail::format_real(channels.n) << "\n";
    out << "  m = " << detail::format_real(channels.m) << "\n";
    out << "  bit_error_rate = " << detail::format_real(channels.bit_error_rate) << "\n";
    out << "  duplex_repair = " << (channels.duplex_repair ? "true" : "false") << "\n";
    out << "  epsilon = " << detail::format_real(epsilon) << "\n";

    out << "CONTROLLER\n";
    out << "  family = " << controller.family << "\n";
    out << "  damage_cap = " << detail::format_real(controller.damage_cap) << "\n";
    out << "  penalty_floor = " << detail::format_real(controller.penalty_floor) << "\n";
    out << "  attractor_weight = " << detail::format_real(controller.attractor_weight) << "\n";
    out << "  radius_weight = " << detail::format_real(controller.radius_weight) << "\n";
    out << "  step_budget = " << controller.step_budget << "\n";
    if (controller.goal_bits) {
        out << "  goal = " << *controller.goal_bits << "\n";
    }
    out << "  switch_policy = " << (controller.scheduled_switch ? "scheduled" : "greedy") << "\n";
    out << "  temperature = " << detail::format_real(controller.temperature) << " "
        << detail::format_real(controller.temperature_decay) << "\n";

    out << "ENVIRONMENT\n";
    out << "  error_classes = " << environment.error_classes << "\n";
    for (const auto& f : environment.faults) {
        out << "  fault " << f.tick << " class " << f.error_class << "\n";
    }
    for (const auto& [cls, pattern] : environment.class_to_pattern) {
        out << "  map class " << cls << " -> pattern " << pattern << "\n";
    }
    for (const auto& d : environment.disturbances) {
        out << "  disturb " << d.tick << " " << d.delta_bits << "\n";
    }
    for (const auto& d : environment.demands) {
        out << "  demand " << d.tick << " output " << d.output << "\n";
    }
    out << "  damage_weight = " << detail::format_real(environment.damage_weight) << "\n";
    if (!environment.expect_plant.empty()) {
        out << "  expect plant =";
        for (double p : environment.expect_plant) {
            out << " " << detail::format_real(p);
        }
        out << "\n";
    }
    if (!environment.expect_env.empty()) {
        out << "  expect env =";
        for (double p : environment.expect_env) {
            out << " " << detail::format_real(p);
        }
        out << "\n";
    }
    if (!environment.env_script.empty()) {
        out << "  env_script =";
        for (auto s : environment.env_script) {
            out << " " << s;
        }
        out << "\n";
    }
    if (environment.recovery) {
        out << "  recovery = " << *environment.recovery << "\n";
    }
    out << "  erratic_window = " << environment.erratic_window << "\n";
    out << "  erratic_threshold = " << environment.erratic_threshold << "\n";
    for (const auto& d : environment.hybrid_dims) {
        out << "  hybrid_dim " << d.name() << " = ";
        if (d.kind() == DimKind::boolean) {
            out << "bool";
        } else {
            out << "int " << d.int_lo() << " " << d.int_hi();
        }
        out << "\n";
    }
    if (!environment.hybrid_blacklist.empty()) {
        out << "  hybrid_blacklist";
        for (const auto& bits : environment.hybrid_blacklist) {
            out << " " << bits;
        }
        out << "\n";
    }

    out << "RUN\n";
    out << "  ticks = " << run.ticks << "\n";
    out << "  seed = " << run.seed << "\n";
    out << "  theta = " << run.theta << "\n";
    if (run.start_bits) {
        out << "  start = " << *run.start_bits << "\n";
    }
    if (run.goal_bits) {
        out << "  goal = " << *run.goal_bits << "\n";
    }
    if (!run.budgets.empty()) {
        out << "  budgets =";
        for (auto b : run.budgets) {
            out << " " << b;
        }
        out << "\n";
    }
    return out.str();
}

} // namespace omegasim
