#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "omegasim/configspace.hpp"

namespace omegasim {

/// f_i: a pure function of the functional input, tabulated or constant.
/// A nonempty table is read cyclically over the input value.
struct OutputFn {
    std::int64_t constant = 0;
    std::vector<std::int64_t> table;

    std::int64_t operator()(std::int64_t input) const {
        if (table.empty()) {
            return constant;
        }
        const auto n = static_cast<std::int64_t>(table.size());
        return table[static_cast<std::size_t>(((input % n) + n) % n)];
    }

    bool operator==(const OutputFn&) const = default;
};

/// One configuration of the plant: a constant successor address j_i and an
/// output function. The successor never depends on environment input;
/// alternates model activation unreliability.
struct SubPlant {
    std::uint64_t successor = 0;
    OutputFn output;
    std::vector<std::pair<double, std::uint64_t>> alternates;

    bool operator==(const SubPlant&) const = default;
};

/// Plant activity per engine tick, as an exact rational.
struct ClockRate {
    std::uint32_t num = 1;
    std::uint32_t den = 1;

    bool operator==(const ClockRate&) const = default;
};

/// A registered successor-switch: remapping replaces the successor of
/// `address` with the branch selected by the divergence value.
struct DivergencePoint {
    std::string name;
    std::uint64_t address = 0;
    std::vector<std::uint64_t> branches;
};

/// A dynamic plant: an automaton over its output configuration space with
/// one sub-plant per address, an optional corrective field guiding
/// off-program activations back, and a clock rate that is a plant
/// parameter outside the configuration space.
struct Plant {
    SpacePtr space;
    std::vector<SubPlant> table; // one entry per address, in index order
    std::uint64_t active = 0;
    ClockRate clock_rate;
    std::map<std::uint64_t, std::uint64_t> corrective_field;
    std::vector<std::uint64_t> program; // declared program path, in order
    std::vector<DivergencePoint> divergence_points;
    bool strict_disturbances = false;
    std::size_t psi_bits = 0; // most compact sub-plant selection, bits

    std::uint64_t effective_successor(std::uint64_t address) const {
        const auto it = corrective_field.find(address);
        return it != corrective_field.end() ? it->second : table[address].successor;
    }
};

inline constexpr std::size_t plant_address_cap = std::size_t{1} << 16;

inline Plant make_plant(SpacePtr space, std::vector<SubPlant> table, std::uint64_t start = 0) {
    if (space->point_count() > plant_address_cap) {
        throw CapacityError("tabulated plant exceeds the address cap");
    }
    if (table.size() != space->point_count()) {
        throw ShapeError("plant policy must be total: one sub-plant per address");
    }
    for (const auto& sp : table) {
        if (sp.successor >= table.size()) {
            throw RangeError("sub-plant successor address out of space");
        }
        if (!sp.alternates.empty()) {
            double sum = 0.0;
            for (const auto& [prob, succ] : sp.alternates) {
                if (succ >= table.size()) {
                    throw RangeError("alternate successor address out of space");
                }
                sum += prob;
            }
            if (std::abs(sum - 1.0) > 1e-9) {
                throw RangeError("alternate probabilities must sum to 1");
            }
        }
    }
    Plant p;
    p.space = std::move(space);
    p.table = std::move(table);
    p.active = start;
    p.psi_bits = p.space->total_bits();
    return p;
}

namespace detail {

inline std::uint64_t clamp_decode(const ConfigSpace& space, const BitVec& bits) {
    std::vector<std::uint32_t> ords(space.dimensions().size(), 0);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < space.dimensions().size(); ++i) {
        const auto& d = space.dimensions()[i];
        const auto field = bits.extract_field(pos, d.bit_width());
        ords[i] = static_cast<std::uint32_t>(std::min<std::uint64_t>(field, d.cardinality() - 1));
        pos += d.bit_width();
    }
    return space.index_of_ordinals(ords);
}

} // namespace detail

/// Applies an address-delta (bit flips on the canonical encoding). Codes
/// falling outside the space are clamped per dimension, or rejected when
/// the plant runs in strict mode.
inline std::uint64_t apply_disturbance(const Plant& plant, std::uint64_t address,
                                       const BitVec& delta) {
    const auto& space = *plant.space;
    if (delta.size() != space.total_bits()) {
        throw ShapeError("disturbance delta width does not match plant space");
    }
    const BitVec moved = space.encode_ordinals(space.ordinals_at(address)) ^ delta;
    if (plant.strict_disturbances) {
        try {
            return space.index_of_ordinals(space.decode_bits(moved));
        } catch (const RangeError&) {
            throw DisturbanceRangeError("disturbance left the configuration space");
        }
    }
    return detail::clamp_decode(space, moved);
}

struct StepResult {
    std::uint64_t active = 0;
    std::int64_t output = 0;
};

/// One plant step: emit f_active(input), then move to the successor (the
/// corrective field wins over the table, alternates are sampled when
/// present), then apply the disturbance delta.
inline StepResult step(Plant& plant, std::int64_t input,
                       const std::optional<BitVec>& disturbance = std::nullopt,
                       std::mt19937_64* rng = nullptr) {
    const auto& sub = plant.table[plant.active];
    StepResult result;
    result.output = sub.output(input);

    std::uint64_t next;
    const auto corrective = plant.corrective_field.find(plant.active);
    if (corrective != plant.corrective_field.end()) {
        next = corrective->second;
    } else if (!sub.alternates.empty()) {
        if (rng == nullptr) {
            throw DomainError("sub-plant with alternates needs a random source");
        }
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        double u = unit(*rng);
        next = sub.alternates.back().second;
        for (const auto& [prob, succ] : sub.alternates) {
            if (u < prob) {
                next = succ;
                break;
            }
            u -= prob;
        }
    } else {
        next = sub.successor;
    }
    if (disturbance) {
        next = apply_disturbance(plant, next, *disturbance);
    }
    plant.active = next;
    result.active = next;
    return result;
}

/// FNV-1a over the policy table and corrective field; the probe for
/// verifying that disturbances never rewrite the policy.
inline std::uint64_t table_hash(const Plant& plant) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (i * 8)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    for (const auto& sub : plant.table) {
        mix(sub.successor);
        mix(static_cast<std::uint64_t>(sub.output.constant));
        for (auto v : sub.output.table) {
            mix(static_cast<std::uint64_t>(v));
        }
        for (const auto& [prob, succ] : sub.alternates) {
            mix(std::bit_cast<std::uint64_t>(prob));
            mix(succ);
        }
    }
    for (const auto& [addr, succ] : plant.corrective_field) {
        mix(addr);
        mix(succ);
    }
    return h;
}

struct PseudoDecisionTrace {
    std::vector<std::uint64_t> actives;
    bool policy_unchanged = false;
};

/// Runs the plant under a deterministic disturbance schedule. The policy
/// table is verifiably identical before and after: apparent decisions come
/// from the schedule alone.
inline PseudoDecisionTrace pseudo_decision_run(Plant& plant,
                                               const std::map<std::uint64_t, BitVec>& schedule,
                                               std::uint64_t ticks, std::int64_t input = 0) {
    const auto before = table_hash(plant);
    PseudoDecisionTrace trace;
    trace.actives.reserve(ticks);
    for (std::uint64_t t = 0; t < ticks; ++t) {
        const auto it = schedule.find(t);
        const auto result =
            step(plant, input, it == schedule.end() ? std::nullopt : std::optional(it->second));
        trace.actives.push_back(result.active);
    }
    trace.policy_unchanged = table_hash(plant) == before;
    return trace;
}

/// Returns a plant whose successors at the named divergence addresses
/// follow the selected branches; all other successors are untouched.
inline Plant remap(const Plant& plant, const std::map<std::string, std::uint32_t>& params) {
    Plant out = plant;
    for (const auto& [name, value] : params) {
        bool found = false;
        for (const auto& dp : plant.divergence_points) {
            if (dp.name == name) {
                if (value >= dp.branches.size()) {
                    throw RangeError("divergence '" + name + "': branch out of range");
                }
                out.table[dp.address].successor = dp.branches[value];
                found = true;
                break;
            }
        }
        if (!found) {
            throw MappingError("unknown divergence dimension '" + name + "'");
        }
    }
    return out;
}

struct ReliabilityParams {
    double epsilon = 0.0;    // technological unreliability, 1/s
    double m_bits = 0.0;     // implementation bandwidth, bits/s
    double psi_bits = 0.0;   // pattern size, bits
};

/// R = m / (epsilon * psi); dimensionless.
inline double reliability(const ReliabilityParams& params) {
    if (params.epsilon <= 0.0 || params.psi_bits <= 0.0) {
        throw DomainError("reliability requires positive epsilon and psi");
    }
    return params.m_bits / (params.epsilon * params.psi_bits);
}

struct CycleReport {
    std::size_t entry_steps = 0;          // steps before the cycle is entered
    std::vector<std::uint64_t> cycle;     // the repeating address sequence
};

/// Follows the undisturbed successor chain until it repeats. Guaranteed to
/// terminate within |space| steps on a total deterministic policy.
inline CycleReport find_cycle(const Plant& plant, std::uint64_t start) {
    std::map<std::uint64_t, std::size_t> seen;
    std::vector<std::uint64_t> chain;
    std::uint64_t at = start;
    while (seen.find(at) == seen.end()) {
        seen.emplace(at, chain.size());
        chain.push_back(at);
        at = plant.effective_successor(at);
    }
    CycleReport report;
    report.entry_steps = seen.at(at);
    report.cycle.assign(chain.begin() + static_cast<std::ptrdiff_t>(report.entry_steps),
                        chain.end());
    return report;
}

// --- Divergence selection storage -----------------------------------------

struct DivergenceStats {
    std::size_t psi_bits = 0;            // raw selection width
    std::size_t distinct_tables = 0;     // distinct successor maps over all selections
    std::size_t distinct_behaviors = 0;  // distinct traces from the program head
    double expected_prefix_bits = 0.0;   // optimal prefix storage, mean
    std::size_t max_prefix_bits = 0;
};

namespace detail {

/// Optimal binary prefix code (Huffman) lengths for the given weights.
/// Deterministic merge order; a single symbol needs zero bits.
inline std::vector<std::size_t> huffman_lengths(const std::vector<std::uint64_t>& weights) {
    if (weights.size() <= 1) {
        return std::vector<std::size_t>(weights.size(), 0);
    }
    struct Node {
        std::uint64_t weight;
        std::size_t order;
        int left = -1;
        int right = -1;
        std::size_t symbol = SIZE_MAX;
    };
    std::vector<Node> nodes;
    auto cmp = [&nodes](int a, int b) {
        if (nodes[a].weight != nodes[b].weight) {
            return nodes[a].weight > nodes[b].weight;
        }
        return nodes[a].order > nodes[b].order;
    };
    std::priority_queue<int, std::vector<int>, decltype(cmp)> heap(cmp);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        nodes.push_back(Node{weights[i], i, -1, -1, i});
        heap.push(static_cast<int>(i));
    }
    while (heap.size() > 1) {
        const int a = heap.top();
        heap.pop();
        const int b = heap.top();
        heap.pop();
        nodes.push_back(Node{nodes[a].weight + nodes[b].weight, nodes.size(), a, b});
        heap.push(static_cast<int>(nodes.size() - 1));
    }
    std::vector<std::size_t> lengths(weights.size(), 0);
    // Depth-first from the root, accumulating depths.
    std::vector<std::pair<int, std::size_t>> stack = {{heap.top(), 0}};
    while (!stack.empty()) {
        const auto [node, depth] = stack.back();
        stack.pop_back();
        if (nodes[node].left < 0) {
            lengths[nodes[node].symbol] = depth;
        } else {
            stack.push_back({nodes[node].left, depth + 1});
            stack.push_back({nodes[node].right, depth + 1});
        }
    }
    return lengths;
}

} // namespace detail

/// Analyzes the divergence selection space: the raw width, how many
/// distinct successor maps the selections produce, how many distinct
/// behaviors (traces from the program head), and the optimal prefix
/// storage size of the behavior selection under uniform selections.
inline DivergenceStats divergence_stats(const Plant& plant) {
    DivergenceStats stats;
    std::uint64_t combinations = 1;
    for (const auto& dp : plant.divergence_points) {
        stats.psi_bits += std::bit_width(dp.branches.size() - 1);
        combinations *= dp.branches.size();
    }
    if (plant.divergence_points.empty()) {
        return stats;
    }
    const std::uint64_t start = plant.program.empty() ? plant.active : plant.program.front();
    const std::size_t horizon = 2 * plant.table.size() + 2;

    std::map<std::uint64_t, std::uint64_t> table_groups;    // table hash -> count
    std::map<std::vector<std::uint64_t>, std::uint64_t> behavior_groups;
    for (std::uint64_t sel = 0; sel < combinations; ++sel) {
        std::map<std::string, std::uint32_t> params;
        std::uint64_t rest = sel;
        for (const auto& dp : plant.divergence_points) {
            params[dp.name] = static_cast<std::uint32_t>(rest % dp.branches.size());
            rest /= dp.branches.size();
        }
        Plant variant = remap(plant, params);
        table_groups[table_hash(variant)] += 1;

        std::vector<std::uint64_t> trace;
        trace.reserve(horizon);
        std::uint64_t at = start;
        for (std::size_t s = 0; s < horizon; ++s) {
            trace.push_back(at);
            at = variant.effective_successor(at);
        }
        behavior_groups[trace] += 1;
    }
    stats.distinct_tables = table_groups.size();
    stats.distinct_behaviors = behavior_groups.size();

    std::vector<std::uint64_t> weights;
    weights.reserve(behavior_groups.size());
    for (const auto& [trace, count] : behavior_groups) {
        weights.push_back(count);
    }
    const auto lengths = detail::huffman_lengths(weights);
    double expected = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        expected += static_cast<double>(weights[i]) * static_cast<double>(lengths[i]);
        stats.max_prefix_bits = std::max(stats.max_prefix_bits, lengths[i]);
    }
    stats.expected_prefix_bits = expected / static_cast<double>(combinations);
    return stats;
}

// --- Nesting and flattening ------------------------------------------------

/// A plant whose sub-plant at `host` is itself a plant. While the host
/// address is active the inner plant produces the output and advances one
/// step per outer step; elsewhere it holds its state.
struct NestedPlant {
    Plant outer;
    std::uint64_t host = 0;
    Plant inner;
};

inline StepResult step(NestedPlant& nested, std::int64_t input) {
    if (nested.outer.active == nested.host) {
        const auto inner_result = step(nested.inner, input);
        const auto outer_result = step(nested.outer, input);
        return StepResult{outer_result.active, inner_result.output};
    }
    return step(nested.outer, input);
}

namespace detail {

inline void require_flattenable(const Plant& plant) {
    for (const auto& sub : plant.table) {
        if (!sub.alternates.empty()) {
            throw DomainError("flatten requires deterministic successor tables");
        }
    }
}

} // namespace detail

/// Expands the nested plant over the product address space, transferring
/// the inner selection into the final table. Behaviorally equivalent:
/// identical output sequences for all input sequences.
inline Plant flatten(const NestedPlant& nested) {
    detail::require_flattenable(nested.outer);
    detail::require_flattenable(nested.inner);
    if (nested.inner.clock_rate != ClockRate{} ) {
        throw DomainError("flatten requires an inner clock rate of 1");
    }
    const auto& outer_space = *nested.outer.space;
    const auto& inner_space = *nested.inner.space;
    std::vector<Dimension> dims = outer_space.dimensions();
    for (const auto& d : inner_space.dimensions()) {
        dims.push_back(d);
    }
    auto space = ConfigSpace::create(std::move(dims));
    if (space->point_count() > plant_address_cap) {
        throw CapacityError("flattened product space exceeds the address cap");
    }
    const std::uint64_t inner_count = inner_space.point_count();

    std::vector<SubPlant> table(space->point_count());
    for (std::uint64_t o = 0; o < outer_space.point_count(); ++o) {
        const std::uint64_t outer_next = nested.outer.effective_successor(o);
        for (std::uint64_t k = 0; k < inner_count; ++k) {
            SubPlant sub;
            if (o == nested.host) {
                sub.output = nested.inner.table[k].output;
                sub.successor = outer_next * inner_count + nested.inner.effective_successor(k);
            } else {
                sub.output = nested.outer.table[o].output;
                sub.successor = outer_next * inner_count + k;
            }
            table[o * inner_count + k] = std::move(sub);
        }
    }
    Plant flat = make_plant(space, std::move(table),
                            nested.outer.active * inner_count + nested.inner.active);
    flat.clock_rate = nested.outer.clock_rate;
    flat.strict_disturbances = nested.outer.strict_disturbances;
    return flat;
}

/// Flattening an already-flat plant is the identity.
inline Plant flatten(const Plant& plant) { return plant; }

} // namespace omegasim
