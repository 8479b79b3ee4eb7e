#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "omegasim/channels.hpp"
#include "omegasim/configspace.hpp"
#include "omegasim/controller.hpp"
#include "omegasim/plant.hpp"
#include "omegasim/storage.hpp"

namespace omegasim {

enum class LayerKind { storage, controller, plant };

inline const char* layer_symbol(LayerKind k) {
    switch (k) {
        case LayerKind::storage: return "Φ";    // Phi
        case LayerKind::controller: return "Θ"; // Theta
        case LayerKind::plant: return "Ψ";      // Psi
    }
    return "?";
}

/// Layer stack with per-layer fragmentation counts. A monolithic unit is
/// (Phi,1)(Theta,1)(Psi,1) and prints as Omega_111; composition order is
/// part of the identity, so (Phi,Theta) and (Theta,Phi) differ.
struct OmegaSignature {
    std::vector<std::pair<LayerKind, std::uint32_t>> layers;

    std::uint32_t count_of(LayerKind kind) const {
        std::uint32_t n = 0;
        for (const auto& [k, c] : layers) {
            if (k == kind) {
                n += c;
            }
        }
        return n;
    }

    std::string to_string() const {
        std::string s = "Ω_"; // Omega
        for (const auto& [kind, count] : layers) {
            s += std::to_string(count);
        }
        return s;
    }

    std::string organization() const {
        std::string s = "(";
        bool first = true;
        for (const auto& [kind, count] : layers) {
            for (std::uint32_t i = 0; i < count; ++i) {
                if (!first) {
                    s += ",";
                }
                s += layer_symbol(kind);
                first = false;
            }
        }
        return s + ")";
    }

    bool operator==(const OmegaSignature&) const = default;
};

enum class CapabilityClass {
    configurable,
    self_implementing,
    self_monitoring_implementing,
    self_3_configurable,
};

inline const char* capability_name(CapabilityClass c) {
    switch (c) {
        case CapabilityClass::configurable: return "configurable";
        case CapabilityClass::self_implementing: return "self-implementing";
        case CapabilityClass::self_monitoring_implementing:
            return "self-monitoring-implementing";
        case CapabilityClass::self_3_configurable: return "self-3-configurable";
    }
    return "?";
}

/// Which functions run inside the unit. Selection without monitoring
/// cannot act autonomously, so the class derives as the chain below.
struct CapabilityFeatures {
    bool self_implementing = true;
    bool self_monitoring = true;
    bool self_selecting = true;
};

inline CapabilityClass classify(const CapabilityFeatures& f) {
    if (f.self_implementing && f.self_monitoring && f.self_selecting) {
        return CapabilityClass::self_3_configurable;
    }
    if (f.self_implementing && f.self_monitoring) {
        return CapabilityClass::self_monitoring_implementing;
    }
    if (f.self_implementing) {
        return CapabilityClass::self_implementing;
    }
    return CapabilityClass::configurable;
}

/// Engine-facing controller parameters: cost field weights, damage cap and
/// the output dimensions this controller owns.
struct ControllerConfig {
    std::vector<std::size_t> dims; // controlled dimension indices, ascending
    double damage_cap = std::numeric_limits<double>::infinity();
    double penalty_floor = 1e6;
    double attractor_weight = 1.0;
    double radius_weight = 0.125;
    std::size_t step_budget = SIZE_MAX;
    std::size_t expected_address_bits = 0;
    std::function<double(const ConfigPoint&)> quality;
};

struct PlantFragment {
    Plant plant;
    std::vector<std::size_t> dims; // space dimensions this fragment covers, ascending
};

/// The composed unit: storage, controller and plant layers plus the
/// channel set. Layer vectors grow through the dec_* operations; an inner
/// unit hosted by the plant models nesting.
struct OmegaUnit {
    SpacePtr space; // the full output configuration space
    std::vector<Repository> storages;
    std::vector<ControllerConfig> controllers;
    std::vector<PlantFragment> plants;
    ChannelSet channels;
    CapabilityFeatures features;

    std::shared_ptr<const OmegaUnit> inner; // nested unit hosted by the plant
    std::uint64_t inner_host = 0;
    std::map<std::uint64_t, std::uint32_t> inner_hookup; // outer address -> inner pattern

    OmegaSignature signature() const {
        OmegaSignature sig;
        sig.layers = {{LayerKind::storage, static_cast<std::uint32_t>(storages.size())},
                      {LayerKind::controller, static_cast<std::uint32_t>(controllers.size())},
                      {LayerKind::plant, static_cast<std::uint32_t>(plants.size())}};
        return sig;
    }

    CapabilityClass capability_class() const { return classify(features); }

    /// Routes an address across the (possibly split) storages.
    const StoredPattern& retrieve(std::uint32_t address) const {
        for (const auto& storage : storages) {
            if (storage.has_pattern(address)) {
                return storage.pattern(address);
            }
        }
        throw NotFoundError("no pattern at address " + std::to_string(address) +
                            " in any storage");
    }

    bool has_pattern(std::uint32_t address) const {
        for (const auto& storage : storages) {
            if (storage.has_pattern(address)) {
                return true;
            }
        }
        return false;
    }

    std::set<std::uint32_t> all_addresses() const {
        std::set<std::uint32_t> addresses;
        for (const auto& storage : storages) {
            for (const auto& [address, pattern] : storage.patterns()) {
                addresses.insert(address);
            }
        }
        return addresses;
    }
};

/// Builds and validates the standard three-layer unit.
inline OmegaUnit compose(Repository storage, ControllerConfig controller, Plant plant,
                         ChannelSet channels, CapabilityFeatures features = {}) {
    if (controller.expected_address_bits != storage.address_bits()) {
        throw ShapeError("controller address width " +
                         std::to_string(controller.expected_address_bits) +
                         " does not match storage address width " +
                         std::to_string(storage.address_bits()));
    }
    if (plant.psi_bits < plant.space->total_bits()) {
        throw ShapeError("psi_bits must cover the plant space width");
    }
    for (const auto& [address, pattern] : storage.patterns()) {
        if (pattern.kind == PatternKind::full && pattern.bits.size() != plant.psi_bits) {
            throw ShapeError("full pattern at address " + std::to_string(address) +
                             " does not match the plant pattern size");
        }
    }
    OmegaUnit unit;
    unit.space = plant.space;
    if (controller.dims.empty()) {
        for (std::size_t d = 0; d < unit.space->dimensions().size(); ++d) {
            controller.dims.push_back(d);
        }
    }
    std::vector<std::size_t> all_dims = controller.dims;
    unit.storages.push_back(std::move(storage));
    unit.controllers.push_back(std::move(controller));
    unit.plants.push_back(PlantFragment{std::move(plant), std::move(all_dims)});
    unit.channels = channels;
    unit.features = features;
    return unit;
}

/// Phi + Psi without Theta is not a unit.
inline OmegaUnit compose(Repository, Plant, ChannelSet) {
    throw ForbiddenCompositionError(
        "storage cannot couple to a plant directly; a controller is required");
}

// --- dec_s: decomposition of storage -----------------------------------------

/// Splits the storage by the given address partition. Permissible only if
/// no pattern is lost: the parts must cover every stored address exactly
/// once.
inline OmegaUnit dec_s(const OmegaUnit& unit,
                       const std::vector<std::vector<std::uint32_t>>& partition) {
    const auto original = unit.all_addresses();
    std::set<std::uint32_t> seen;
    for (const auto& part : partition) {
        if (part.empty()) {
            throw ImpermissibleDecompositionError("dec_s: empty storage part");
        }
        for (auto address : part) {
            if (original.count(address) == 0) {
                throw ImpermissibleDecompositionError("dec_s: address " +
                                                      std::to_string(address) + " is not stored");
            }
            if (!seen.insert(address).second) {
                throw ImpermissibleDecompositionError("dec_s: address " +
                                                      std::to_string(address) + " assigned twice");
            }
        }
    }
    if (seen.size() != original.size()) {
        throw ImpermissibleDecompositionError(
            "dec_s: partition drops stored patterns; content would be lost");
    }

    OmegaUnit out = unit;
    out.storages.clear();
    for (const auto& part : partition) {
        Repository repo;
        for (auto address : part) {
            const auto& pattern = unit.retrieve(address);
            repo.add_pattern(address, pattern.bits, pattern.kind);
        }
        // Associations and assembly rules follow the pattern they name.
        for (const auto& storage : unit.storages) {
            for (const auto& [name, rule] : storage.rules()) {
                if (!rule.fragments.empty() &&
                    std::count(part.begin(), part.end(), rule.fragments[0].address) > 0) {
                    repo.add_rule(rule);
                }
            }
            for (const auto& [signature, address] : storage.associations()) {
                if (std::count(part.begin(), part.end(), address) > 0) {
                    repo.associate(signature, address);
                }
            }
        }
        out.storages.push_back(std::move(repo));
    }
    return out;
}

// --- dec_c: decomposition of the controller -----------------------------------

namespace detail {

/// Exhaustively checks that penalty + quality decompose additively over
/// the dimension groups: for every group, swapping the group assignment
/// changes the cost by an amount independent of the other dimensions.
inline bool goal_free_cost_separable(const OmegaUnit& unit,
                                     const std::vector<std::vector<std::size_t>>& groups,
                                     std::string* why) {
    const auto& space = *unit.space;
    if (space.point_count() > (std::uint64_t{1} << 14)) {
        throw CapacityError("dec_c separability check exceeds the enumeration cap");
    }
    const auto& controller = unit.controllers.front();
    CostField field{.goal = space.point_at(0),
                    .penalty_floor = controller.penalty_floor,
                    .quality = controller.quality};
    auto goal_free = [&field](const ConfigPoint& p) {
        return field.penalty(p) + field.quality_cost(p);
    };

    for (const auto& group : groups) {
        // Enumerate group assignments as joint indices of the sub-radices.
        std::uint64_t group_card = 1;
        for (auto d : group) {
            group_card *= space.dimensions()[d].cardinality();
        }
        auto with_assignment = [&](std::uint64_t point_index, std::uint64_t assignment) {
            auto ords = space.ordinals_at(point_index);
            std::uint64_t rest = assignment;
            for (std::size_t gi = group.size(); gi-- > 0;) {
                const auto d = group[gi];
                const auto card = space.dimensions()[d].cardinality();
                ords[d] = static_cast<std::uint32_t>(rest % card);
                rest /= card;
            }
            return space.index_of_ordinals(ords);
        };
        for (std::uint64_t a = 0; a + 1 < group_card; ++a) {
            double reference = 0.0;
            bool have_reference = false;
            for (std::uint64_t x = 0; x < space.point_count(); ++x) {
                const auto base = with_assignment(x, a);
                const auto moved = with_assignment(x, a + 1);
                const double delta =
                    goal_free(space.point_at(moved)) - goal_free(space.point_at(base));
                if (!have_reference) {
                    reference = delta;
                    have_reference = true;
                } else if (std::abs(delta - reference) > 1e-9) {
                    if (why != nullptr) {
                        *why = "cost coupling across dimension groups detected at point " +
                               std::to_string(x);
                    }
                    return false;
                }
            }
        }
    }
    return true;
}

inline void require_dim_partition(const ConfigSpace& space,
                                  const std::vector<std::vector<std::size_t>>& groups,
                                  const char* op) {
    std::vector<bool> covered(space.dimensions().size(), false);
    for (const auto& group : groups) {
        if (group.empty()) {
            throw ImpermissibleDecompositionError(std::string(op) + ": empty dimension group");
        }
        for (auto d : group) {
            if (d >= covered.size() || covered[d]) {
                throw ImpermissibleDecompositionError(std::string(op) +
                                                      ": dimension groups must partition the "
                                                      "space dimensions");
            }
            covered[d] = true;
        }
    }
    for (bool c : covered) {
        if (!c) {
            throw ImpermissibleDecompositionError(std::string(op) +
                                                  ": dimension groups must cover every dimension");
        }
    }
}

inline SpacePtr project_space(const ConfigSpace& space, const std::vector<std::size_t>& dims) {
    const auto& legality = space.legality();
    if (!legality.blacklist.empty() || legality.whitelist_mode) {
        throw ImpermissibleDecompositionError(
            "legality uses point lists and cannot be projected onto dimension groups");
    }
    std::vector<Dimension> sub_dims;
    LegalityMap sub_legality;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        sub_dims.push_back(space.dimensions()[dims[i]]);
        for (const auto& c : legality.constraints) {
            if (c.dim == dims[i]) {
                sub_legality.constraints.push_back(IntervalConstraint{i, c.lo_ord, c.hi_ord});
            }
        }
    }
    return ConfigSpace::create(std::move(sub_dims), std::move(sub_legality));
}

} // namespace detail

/// Splits the controller into parallel per-group controllers. Permissible
/// only when the goal-free cost field has no coupling across the groups;
/// identical groups are replication, not decomposition.
inline OmegaUnit dec_c(const OmegaUnit& unit,
                       const std::vector<std::vector<std::size_t>>& groups) {
    if (unit.controllers.size() != 1) {
        throw ImpermissibleDecompositionError("dec_c expects a monolithic controller");
    }
    for (std::size_t i = 0; i < groups.size(); ++i) {
        for (std::size_t j = i + 1; j < groups.size(); ++j) {
            if (groups[i] == groups[j]) {
                throw ImpermissibleDecompositionError(
                    "dec_c: identical groups are replication, not a decomposition");
            }
        }
    }
    detail::require_dim_partition(*unit.space, groups, "dec_c");
    std::string why;
    if (!detail::goal_free_cost_separable(unit, groups, &why)) {
        throw ImpermissibleDecompositionError("dec_c: " + why);
    }
    OmegaUnit out = unit;
    out.controllers.clear();
    for (const auto& group : groups) {
        ControllerConfig c = unit.controllers.front();
        c.dims = group;
        std::sort(c.dims.begin(), c.dims.end());
        out.controllers.push_back(std::move(c));
    }
    return out;
}

// --- dec_p: decomposition of the plant -----------------------------------------

/// Splits the plant over a dimension partition into parallel fragments,
/// each with a replicated m channel. Permissible only when successors and
/// outputs factorize per fragment: the successor of a fragment state may
/// depend on that fragment alone, and the output must decompose
/// additively.
inline OmegaUnit dec_p(const OmegaUnit& unit,
                       const std::vector<std::vector<std::size_t>>& groups) {
    if (unit.plants.size() != 1) {
        throw ImpermissibleDecompositionError("dec_p expects a monolithic plant");
    }
    detail::require_dim_partition(*unit.space, groups, "dec_p");
    const auto& plant = unit.plants.front().plant;
    const auto& space = *unit.space;
    if (space.point_count() > plant_address_cap) {
        throw CapacityError("dec_p factorization check exceeds the address cap");
    }
    for (const auto& sub : plant.table) {
        if (!sub.alternates.empty()) {
            throw ImpermissibleDecompositionError("dec_p requires deterministic successors");
        }
    }

    std::vector<SpacePtr> sub_spaces;
    sub_spaces.reserve(groups.size());
    for (const auto& group : groups) {
        sub_spaces.push_back(detail::project_space(space, group));
    }

    auto component_of = [&](std::uint64_t index, std::size_t g) {
        const auto ords = space.ordinals_at(index);
        std::vector<std::uint32_t> sub;
        sub.reserve(groups[g].size());
        for (auto d : groups[g]) {
            sub.push_back(ords[d]);
        }
        return sub_spaces[g]->index_of_ordinals(sub);
    };
    auto joint_of = [&](const std::vector<std::uint64_t>& components) {
        std::vector<std::uint32_t> ords(space.dimensions().size(), 0);
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const auto sub = sub_spaces[g]->ordinals_at(components[g]);
            for (std::size_t gi = 0; gi < groups[g].size(); ++gi) {
                ords[groups[g][gi]] = sub[gi];
            }
        }
        return space.index_of_ordinals(ords);
    };

    // Fragment successor tables from the zero context; then verify that
    // the joint successor factorizes everywhere.
    std::vector<std::vector<std::uint64_t>> frag_succ(groups.size());
    std::vector<std::vector<std::int64_t>> frag_out(groups.size());
    std::vector<std::uint64_t> zero(groups.size(), 0);
    const std::int64_t base_output = plant.table[joint_of(zero)].output(0);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        frag_succ[g].resize(sub_spaces[g]->point_count());
        frag_out[g].resize(sub_spaces[g]->point_count());
        for (std::uint64_t k = 0; k < sub_spaces[g]->point_count(); ++k) {
            auto components = zero;
            components[g] = k;
            const auto joint = joint_of(components);
            frag_succ[g][k] = component_of(plant.effective_successor(joint), g);
            frag_out[g][k] = plant.table[joint].output(0) - base_output;
        }
    }
    std::vector<std::uint64_t> offenders;
    for (std::uint64_t x = 0; x < space.point_count(); ++x) {
        const auto joint_next = plant.effective_successor(x);
        std::int64_t out_sum = base_output;
        bool ok = true;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const auto part = component_of(x, g);
            if (component_of(joint_next, g) != frag_succ[g][part]) {
                ok = false;
                break;
            }
            out_sum += frag_out[g][part];
        }
        if (!ok || out_sum != plant.table[x].output(0)) {
            offenders.push_back(x);
        }
    }
    if (!offenders.empty()) {
        std::string listing;
        for (std::size_t i = 0; i < std::min<std::size_t>(offenders.size(), 8); ++i) {
            listing += (i == 0 ? "" : ", ") + std::to_string(offenders[i]);
        }
        throw ImpermissibleDecompositionError(
            "dec_p: cross-fragment dependency at addresses " + listing);
    }

    OmegaUnit out = unit;
    out.plants.clear();
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::vector<SubPlant> table(sub_spaces[g]->point_count());
        for (std::uint64_t k = 0; k < table.size(); ++k) {
            table[k].successor = frag_succ[g][k];
            table[k].output.constant = frag_out[g][k] + (g == 0 ? base_output : 0);
        }
        Plant fragment = make_plant(sub_spaces[g], std::move(table),
                                    component_of(plant.active, g));
        fragment.clock_rate = plant.clock_rate;
        // Each fragment carries its proportional share of the pattern size.
        fragment.psi_bits =
            plant.psi_bits * sub_spaces[g]->total_bits() / space.total_bits();
        auto dims = groups[g];
        std::sort(dims.begin(), dims.end());
        out.plants.push_back(PlantFragment{std::move(fragment), std::move(dims)});
    }
    return out;
}

// --- dec_i: split into disjoint units ------------------------------------------

/// Once storage, controller and plant are decomposed along the same
/// lines, splits the unit into independent standard units. Impermissible
/// while any plant fragment depends on another fragment's storage.
inline std::vector<OmegaUnit> dec_i(const OmegaUnit& unit) {
    const std::size_t k = unit.plants.size();
    if (k < 2 || unit.storages.size() != k || unit.controllers.size() != k) {
        throw ImpermissibleDecompositionError(
            "dec_i needs equally decomposed storage, controller and plant layers");
    }
    for (std::size_t g = 0; g < k; ++g) {
        if (unit.controllers[g].dims != unit.plants[g].dims) {
            throw ImpermissibleDecompositionError(
                "dec_i: controller " + std::to_string(g) +
                " does not own its plant fragment's dimensions");
        }
        const auto width = unit.plants[g].plant.space->total_bits();
        for (const auto& [address, pattern] : unit.storages[g].patterns()) {
            if (pattern.kind == PatternKind::full && pattern.bits.size() != width) {
                throw ImpermissibleDecompositionError(
                    "dec_i: pattern " + std::to_string(address) + " in storage " +
                    std::to_string(g) + " spans foreign plant fragments");
            }
        }
    }
    std::vector<OmegaUnit> units;
    for (std::size_t g = 0; g < k; ++g) {
        OmegaUnit part;
        part.space = unit.plants[g].plant.space;
        part.storages.push_back(unit.storages[g]);
        ControllerConfig controller = unit.controllers[g];
        controller.dims.clear();
        for (std::size_t d = 0; d < part.space->dimensions().size(); ++d) {
            controller.dims.push_back(d);
        }
        controller.expected_address_bits = unit.storages[g].address_bits();
        part.controllers.push_back(std::move(controller));
        std::vector<std::size_t> local_dims = part.controllers[0].dims;
        part.plants.push_back(PlantFragment{unit.plants[g].plant, std::move(local_dims)});
        part.channels = unit.channels;
        part.features = unit.features;
        units.push_back(std::move(part));
    }
    return units;
}

// --- Nesting: t_a / t_b / t_c ----------------------------------------------------

struct FlattenStages {
    OmegaSignature hooked;       // after t_a
    OmegaSignature intermediate; // after t_b: the five-layer unit
    OmegaUnit consolidated;      // after t_c
};

/// Integrates a nested unit hosted in the outer plant. t_a verifies the
/// hookup (the inner storage selection is a function of the outer plant
/// configuration), t_b unframes the inner layers into a five-layer stack,
/// t_c joins the storages combinatorially and flattens the plant over the
/// product space.
inline FlattenStages flatten_nested(const OmegaUnit& outer) {
    if (!outer.inner) {
        throw CannotConsolidateError("no nested unit to flatten");
    }
    const OmegaUnit& inner = *outer.inner;
    if (outer.plants.size() != 1 || inner.plants.size() != 1 || outer.storages.size() != 1 ||
        inner.storages.size() != 1) {
        throw CannotConsolidateError("flatten_nested expects monolithic layers on both units");
    }

    // t_a: the hookup must be a total function outer address -> inner pattern.
    for (std::uint64_t address = 0; address < outer.space->point_count(); ++address) {
        const auto it = outer.inner_hookup.find(address);
        if (it == outer.inner_hookup.end()) {
            throw CannotConsolidateError(
                "inner storage is not a function of the outer plant configuration: address " +
                std::to_string(address) + " has no hookup");
        }
        if (!inner.has_pattern(it->second)) {
            throw CannotConsolidateError("hookup names a missing inner pattern " +
                                         std::to_string(it->second));
        }
    }

    FlattenStages stages;
    stages.hooked = outer.signature();

    // t_b: the unframed five-layer stack (Phi0, Theta0, Phi1, Theta1, Psi1).
    stages.intermediate.layers = {{LayerKind::storage, 1},
                                  {LayerKind::controller, 1},
                                  {LayerKind::storage, 1},
                                  {LayerKind::controller, 1},
                                  {LayerKind::plant, 1}};

    // t_c: join storages over the product and flatten the plant.
    Plant flat = flatten(NestedPlant{outer.plants.front().plant, outer.inner_host,
                                     inner.plants.front().plant});

    Repository joined;
    const auto& outer_repo = outer.storages.front();
    const auto& inner_repo = inner.storages.front();
    const std::uint32_t inner_count = static_cast<std::uint32_t>(inner_repo.pattern_count());
    std::uint32_t outer_rank = 0;
    for (const auto& [outer_address, outer_pattern] : outer_repo.patterns()) {
        std::uint32_t inner_rank = 0;
        for (const auto& [inner_address, inner_pattern] : inner_repo.patterns()) {
            BitVec bits = outer_pattern.bits;
            for (std::size_t i = 0; i < inner_pattern.bits.size(); ++i) {
                bits.append_field(inner_pattern.bits.get(i) ? 1 : 0, 1);
            }
            joined.add_pattern(outer_rank * inner_count + inner_rank, std::move(bits),
                               PatternKind::full);
            ++inner_rank;
        }
        ++outer_rank;
    }

    ControllerConfig controller = outer.controllers.front();
    controller.dims.clear();
    for (std::size_t d = 0; d < flat.space->dimensions().size(); ++d) {
        controller.dims.push_back(d);
    }
    controller.expected_address_bits = joined.address_bits();

    stages.consolidated = compose(std::move(joined), std::move(controller), std::move(flat),
                                  outer.channels, outer.features);
    return stages;
}

} // namespace omegasim
