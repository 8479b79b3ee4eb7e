#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "omegasim/channels.hpp"
#include "omegasim/configspace.hpp"
#include "omegasim/plant.hpp"
#include "omegasim/storage.hpp"

namespace omegasim {

enum class StrategyFamily { spontaneous, iterative, stochastic, memory, mixing };

inline const char* family_name(StrategyFamily f) {
    switch (f) {
        case StrategyFamily::spontaneous: return "spontaneous";
        case StrategyFamily::iterative: return "iterative";
        case StrategyFamily::stochastic: return "stochastic";
        case StrategyFamily::memory: return "memory";
        case StrategyFamily::mixing: return "mixing";
    }
    return "?";
}

/// One reconfiguration step: a full target encoding with its transport
/// payload split over the n and m links. The offset is the earliest
/// start, in ticks from the strategy's start.
struct StrategyStep {
    BitVec target;
    std::uint64_t offset_ticks = 0;
    std::uint64_t payload_n = 0;
    std::uint64_t payload_m = 0;
    std::optional<std::uint32_t> pattern_address; // set when drawn from storage
};

/// A timed sequence of reconfiguration steps. Cost is implementation
/// effort and contains no time term; time lives in t_reconf, which is
/// derived from the channel model by scheduling.
struct Strategy {
    std::uint64_t id = 0;
    StrategyFamily family = StrategyFamily::spontaneous;
    std::vector<StrategyStep> steps;
    double cost = 0.0;
    std::uint64_t t_reconf = 0;
    std::optional<std::uint64_t> deadline_ticks;
    bool approximate = false; // memory planner: nearest-match retrieval
};

struct ScheduledStep {
    std::uint64_t start = 0;
    std::uint64_t duration = 0;
    std::uint64_t completion = 0;
};

struct StrategySchedule {
    std::vector<ScheduledStep> steps;
    std::uint64_t t_reconf = 0;
};

/// Places the steps on the n/m links: a step streams its n and m payloads
/// in parallel and may start once the previous step completed. Violating
/// a declared deadline makes the strategy infeasible.
inline StrategySchedule schedule_strategy(const Strategy& strategy, const ChannelSet& channels) {
    StrategySchedule schedule;
    std::uint64_t clock = 0;
    for (const auto& step : strategy.steps) {
        ScheduledStep placed;
        placed.start = std::max(step.offset_ticks, clock);
        placed.duration = std::max(transfer_time(step.payload_n, channels.n),
                                   transfer_time(step.payload_m, channels.m));
        placed.completion = placed.start + placed.duration;
        clock = placed.completion;
        schedule.steps.push_back(placed);
    }
    schedule.t_reconf = clock;
    if (strategy.deadline_ticks && schedule.t_reconf > *strategy.deadline_ticks) {
        throw InfeasibleStrategyError("strategy misses its deadline: needs " +
                                      std::to_string(schedule.t_reconf) + " ticks, allowed " +
                                      std::to_string(*strategy.deadline_ticks));
    }
    return schedule;
}

/// d(t, alpha): damage at look-ahead tick t, supplied by a deterministic
/// clone simulation of the strategy's execution window.
using DamageFn = std::function<double(std::uint64_t tick)>;

/// Sum of d(t) over the strategy's real-time window t = 1..t_reconf.
inline double evaluate_damage(const Strategy& strategy, const ChannelSet& channels,
                              const DamageFn& damage) {
    const auto schedule = schedule_strategy(strategy, channels);
    double sum = 0.0;
    for (std::uint64_t t = 1; t <= schedule.t_reconf; ++t) {
        const double d = damage(t);
        if (d < 0.0) {
            throw RangeError("damage must be non-negative");
        }
        sum += d;
    }
    return sum;
}

/// D(A): the worst damage among the strategies.
inline double worst_case_damage(const std::vector<double>& damages) {
    double worst = 0.0;
    for (double d : damages) {
        worst = std::max(worst, d);
    }
    return worst;
}

/// Keeps the strategies whose damage sum stays strictly below the cap.
/// An empty result is valid and means "no safe strategy".
inline std::vector<std::size_t> eligible_strategies(const std::vector<double>& damages,
                                                    double cap) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < damages.size(); ++i) {
        if (damages[i] < cap) {
            eligible.push_back(i);
        }
    }
    return eligible;
}

/// Least effort wins; ties fall to shorter real time, then lower id.
inline const Strategy& select_strategy(const std::vector<Strategy>& strategies,
                                       const std::vector<std::size_t>& eligible) {
    if (eligible.empty()) {
        throw NoEligibleStrategyError("no strategy passes the damage cap");
    }
    const Strategy* best = nullptr;
    for (auto index : eligible) {
        const Strategy& s = strategies[index];
        if (best == nullptr || s.cost < best->cost ||
            (s.cost == best->cost && s.t_reconf < best->t_reconf) ||
            (s.cost == best->cost && s.t_reconf == best->t_reconf && s.id < best->id)) {
            best = &s;
        }
    }
    return *best;
}

// --- Guiding cost field (attractor + penalty + quality + radius) -------------

struct CostField {
    ConfigPoint goal;
    double attractor_weight = 1.0;
    double penalty_floor = 1e6;
    // Keeps single-bit progress toward the goal strictly profitable.
    double radius_weight = 0.125;
    std::function<double(const ConfigPoint&)> quality; // defaults to 0

    double attractor(const ConfigPoint& c2) const {
        return attractor_weight * static_cast<double>(bit_distance(c2, goal));
    }

    double penalty(const ConfigPoint& c2) const {
        const auto& space = *c2.space();
        const auto index = c2.index();
        if (space.index_is_legal(index)) {
            return 0.0;
        }
        // The more constraints violated, the higher the cost.
        double violations = 0.0;
        const auto& legality = space.legality();
        if (legality.whitelist_mode) {
            violations = 1.0;
        } else {
            if (legality.blacklist.count(index) > 0) {
                violations += 1.0;
            }
            const auto ords = space.ordinals_at(index);
            for (const auto& c : legality.constraints) {
                if (ords[c.dim] < c.lo_ord || ords[c.dim] > c.hi_ord) {
                    violations += 1.0;
                }
            }
        }
        return penalty_floor * std::max(violations, 1.0);
    }

    double quality_cost(const ConfigPoint& c2) const { return quality ? quality(c2) : 0.0; }

    double radius(const ConfigPoint& c1, const ConfigPoint& c2) const {
        return radius_weight * static_cast<double>(bit_distance(c1, c2));
    }
};

/// C(c2, c1) = a(c2) + p(c2) + q(c2) + r(c1, c2).
inline double guiding_cost(const CostField& field, const ConfigPoint& c1, const ConfigPoint& c2) {
    if (c1.space().get() != c2.space().get() || c1.space().get() != field.goal.space().get()) {
        throw SpaceMismatchError("cost field and points must share one space");
    }
    return field.attractor(c2) + field.penalty(c2) + field.quality_cost(c2) +
           field.radius(c1, c2);
}

// --- Planners ------------------------------------------------------------------

struct PlanResult {
    Strategy strategy;
    std::vector<std::uint64_t> path; // visited indices, start included
    bool reached_goal = false;
    bool local_minimum = false;
};

namespace detail {

inline std::vector<BitVec> all_codes(const ConfigSpace& space) {
    std::vector<BitVec> codes;
    codes.reserve(space.point_count());
    for (std::uint64_t i = 0; i < space.point_count(); ++i) {
        codes.push_back(space.encode_ordinals(space.ordinals_at(i)));
    }
    return codes;
}

inline Strategy path_to_strategy(const ConfigSpace& space, const std::vector<std::uint64_t>& path,
                                 const std::vector<BitVec>& codes, StrategyFamily family) {
    Strategy strategy;
    strategy.family = family;
    const std::size_t position_width =
        space.total_bits() <= 1 ? 1 : std::bit_width(space.total_bits() - 1);
    for (std::size_t i = 1; i < path.size(); ++i) {
        StrategyStep step;
        step.target = codes[path[i]];
        const auto changed = hamming(codes[path[i - 1]], codes[path[i]]);
        step.payload_n = changed * (position_width + 1); // delta entries
        step.payload_m = changed;                        // implemented bits
        strategy.steps.push_back(std::move(step));
        strategy.cost += static_cast<double>(changed * (position_width + 1));
    }
    if (strategy.steps.size() == 1) {
        strategy.family = StrategyFamily::spontaneous;
    }
    return strategy;
}

} // namespace detail

inline constexpr std::size_t planner_space_cap = std::size_t{1} << 16;

/// Greedy descent in the total cost field: from the current point, take
/// the reachable neighbor (within step_budget bits) of lowest cost, until
/// the goal, a local minimum, or the step cap. Fully reproducible.
inline PlanResult plan_deterministic(const SpacePtr& space, const ConfigPoint& start,
                                     const CostField& field, std::size_t step_budget,
                                     std::size_t step_cap = 0) {
    if (!start.legal()) {
        throw RangeError("deterministic planning requires a legal start");
    }
    if (space->point_count() > planner_space_cap) {
        throw CapacityError("space too large for neighborhood planning");
    }
    const auto codes = detail::all_codes(*space);
    const std::uint64_t goal = field.goal.index();
    if (step_cap == 0) {
        step_cap = 4 * static_cast<std::size_t>(space->point_count());
    }

    PlanResult result;
    std::uint64_t current = start.index();
    result.path.push_back(current);
    while (current != goal && result.path.size() <= step_cap) {
        const ConfigPoint here = space->point_at(current);
        const double stay = guiding_cost(field, here, here);
        double best_cost = stay;
        std::uint64_t best = current;
        for (std::uint64_t cand = 0; cand < space->point_count(); ++cand) {
            if (cand == current || hamming(codes[current], codes[cand]) > step_budget) {
                continue;
            }
            const double c = guiding_cost(field, here, space->point_at(cand));
            if (c < best_cost - 1e-12) {
                best_cost = c;
                best = cand;
            }
        }
        if (best == current) {
            result.local_minimum = true;
            break;
        }
        current = best;
        result.path.push_back(current);
    }
    result.reached_goal = current == goal;
    result.strategy =
        detail::path_to_strategy(*space, result.path, codes, StrategyFamily::iterative);
    return result;
}

struct TemperatureSchedule {
    double initial = 1.0;
    double decay = 0.95; // geometric, per step
};

/// Annealed walk in the cost field. At each step the move is drawn from a
/// Boltzmann distribution over the neighborhood, so an uphill candidate is
/// taken with probability proportional to exp(-dC/T). At temperature zero
/// this degenerates to the deterministic planner, tie-breaking included.
inline PlanResult plan_stochastic(const SpacePtr& space, const ConfigPoint& start,
                                  const CostField& field, std::size_t step_budget,
                                  std::uint64_t seed, const TemperatureSchedule& schedule,
                                  std::size_t step_cap = 0) {
    if (!start.legal()) {
        throw RangeError("stochastic planning requires a legal start");
    }
    if (space->point_count() > planner_space_cap) {
        throw CapacityError("space too large for neighborhood planning");
    }
    const auto codes = detail::all_codes(*space);
    const std::uint64_t goal = field.goal.index();
    if (step_cap == 0) {
        step_cap = 4 * static_cast<std::size_t>(space->point_count());
    }
    std::mt19937_64 rng(seed);

    PlanResult result;
    std::uint64_t current = start.index();
    result.path.push_back(current);
    double temperature = schedule.initial;
    while (current != goal && result.path.size() <= step_cap) {
        const ConfigPoint here = space->point_at(current);
        std::vector<std::uint64_t> candidates;
        std::vector<double> costs;
        double min_cost = std::numeric_limits<double>::infinity();
        for (std::uint64_t cand = 0; cand < space->point_count(); ++cand) {
            if (cand == current || hamming(codes[current], codes[cand]) > step_budget) {
                continue;
            }
            const double c = guiding_cost(field, here, space->point_at(cand));
            candidates.push_back(cand);
            costs.push_back(c);
            min_cost = std::min(min_cost, c);
        }
        if (candidates.empty()) {
            result.local_minimum = true;
            break;
        }
        std::uint64_t chosen;
        if (temperature <= 0.0) {
            const double stay = guiding_cost(field, here, here);
            chosen = current;
            double best_cost = stay;
            for (std::size_t i = 0; i < candidates.size(); ++i) {
                if (costs[i] < best_cost - 1e-12) {
                    best_cost = costs[i];
                    chosen = candidates[i];
                }
            }
            if (chosen == current) {
                result.local_minimum = true;
                break;
            }
        } else {
            std::vector<double> weights(candidates.size());
            double total = 0.0;
            for (std::size_t i = 0; i < candidates.size(); ++i) {
                weights[i] = std::exp(-(costs[i] - min_cost) / temperature);
                total += weights[i];
            }
            std::uniform_real_distribution<double> unit(0.0, total);
            double draw = unit(rng);
            std::size_t pick = candidates.size() - 1;
            for (std::size_t i = 0; i < candidates.size(); ++i) {
                if (draw < weights[i]) {
                    pick = i;
                    break;
                }
                draw -= weights[i];
            }
            chosen = candidates[pick];
        }
        current = chosen;
        result.path.push_back(current);
        temperature *= schedule.decay;
    }
    result.reached_goal = current == goal;
    result.strategy =
        detail::path_to_strategy(*space, result.path, codes, StrategyFamily::stochastic);
    return result;
}

/// Recalls the configuration whose stored trigger is nearest to the
/// observed one and returns it as a spontaneous single-step strategy.
inline Strategy plan_memory(const Repository& repo, const BitVec& trigger) {
    const auto hit = repo.recall(trigger);
    const auto& pattern = repo.pattern(hit.address);
    Strategy strategy;
    strategy.family = StrategyFamily::memory;
    strategy.approximate = !hit.exact;
    StrategyStep step;
    step.target = pattern.bits;
    step.pattern_address = hit.address;
    step.payload_n = pattern.bits.size();
    step.payload_m = pattern.bits.size();
    strategy.steps.push_back(std::move(step));
    strategy.cost = static_cast<double>(pattern.bits.size());
    return strategy;
}

// --- Mixing -------------------------------------------------------------------

/// Per-dimension convex combination of reference points, rounded to the
/// nearest level.
inline ConfigPoint mix_interpolate(const std::vector<ConfigPoint>& refs,
                                   const std::vector<double>& weights) {
    if (refs.size() < 2 || refs.size() != weights.size()) {
        throw ShapeError("interpolation needs >= 2 references with matching weights");
    }
    const auto& space = refs[0].space();
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) {
            throw RangeError("interpolation weights must be non-negative");
        }
        total += w;
    }
    if (total <= 0.0) {
        throw RangeError("interpolation weights must not all vanish");
    }
    std::vector<std::uint32_t> ords(space->dimensions().size());
    for (std::size_t d = 0; d < ords.size(); ++d) {
        double acc = 0.0;
        for (std::size_t i = 0; i < refs.size(); ++i) {
            if (refs[i].space().get() != space.get()) {
                throw SpaceMismatchError("mixing references must share one space");
            }
            acc += weights[i] * static_cast<double>(refs[i].ordinal(d));
        }
        ords[d] = static_cast<std::uint32_t>(std::llround(acc / total));
    }
    return space->point_from_ordinals(std::move(ords));
}

/// Least-squares line over the references per dimension, extended by
/// `extend` reference intervals and clamped into the dimension range.
inline ConfigPoint mix_extrapolate(const std::vector<ConfigPoint>& refs, double extend) {
    if (refs.size() < 2) {
        throw ShapeError("extrapolation needs >= 2 references");
    }
    const auto& space = refs[0].space();
    const double k = static_cast<double>(refs.size());
    const double x_mean = (k - 1.0) / 2.0;
    double den = 0.0;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        den += (static_cast<double>(i) - x_mean) * (static_cast<double>(i) - x_mean);
    }
    std::vector<std::uint32_t> ords(space->dimensions().size());
    for (std::size_t d = 0; d < ords.size(); ++d) {
        double y_mean = 0.0;
        for (const auto& r : refs) {
            y_mean += static_cast<double>(r.ordinal(d));
        }
        y_mean /= k;
        double num = 0.0;
        for (std::size_t i = 0; i < refs.size(); ++i) {
            num += (static_cast<double>(i) - x_mean) *
                   (static_cast<double>(refs[i].ordinal(d)) - y_mean);
        }
        const double slope = den == 0.0 ? 0.0 : num / den;
        const double value = y_mean + slope * (k - 1.0 + extend - x_mean);
        const auto card = space->dimensions()[d].cardinality();
        const double clamped = std::clamp(value, 0.0, static_cast<double>(card - 1));
        ords[d] = static_cast<std::uint32_t>(std::llround(clamped));
    }
    return space->point_from_ordinals(std::move(ords));
}

/// Splices dimension groups from the references: group i is copied from
/// reference i. Groups must partition the dimensions exactly.
inline ConfigPoint mix_assemble(const std::vector<ConfigPoint>& refs,
                                const std::vector<std::vector<std::size_t>>& groups) {
    if (refs.empty() || refs.size() != groups.size()) {
        throw ShapeError("assembly needs one dimension group per reference");
    }
    const auto& space = refs[0].space();
    std::vector<bool> covered(space->dimensions().size(), false);
    std::vector<std::uint32_t> ords(space->dimensions().size(), 0);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (refs[g].space().get() != space.get()) {
            throw SpaceMismatchError("mixing references must share one space");
        }
        for (auto d : groups[g]) {
            if (d >= covered.size() || covered[d]) {
                throw ConflictError("dimension groups overlap or repeat dimension " +
                                    std::to_string(d));
            }
            covered[d] = true;
            ords[d] = refs[g].ordinal(d);
        }
    }
    for (std::size_t d = 0; d < covered.size(); ++d) {
        if (!covered[d]) {
            throw ConflictError("dimension " + std::to_string(d) + " not covered by any group");
        }
    }
    return space->point_from_ordinals(std::move(ords));
}

/// Exponential smoothing towards a stream of target configurations.
inline std::vector<ConfigPoint> mix_filter(const ConfigPoint& start,
                                           const std::vector<ConfigPoint>& targets,
                                           double pass_coefficient) {
    if (pass_coefficient <= 0.0 || pass_coefficient > 1.0) {
        throw RangeError("pass coefficient must be in (0, 1]");
    }
    const auto& space = start.space();
    std::vector<double> state(space->dimensions().size());
    for (std::size_t d = 0; d < state.size(); ++d) {
        state[d] = static_cast<double>(start.ordinal(d));
    }
    std::vector<ConfigPoint> stream;
    stream.reserve(targets.size());
    for (const auto& target : targets) {
        if (target.space().get() != space.get()) {
            throw SpaceMismatchError("filter targets must share the start's space");
        }
        std::vector<std::uint32_t> ords(state.size());
        for (std::size_t d = 0; d < state.size(); ++d) {
            state[d] = pass_coefficient * static_cast<double>(target.ordinal(d)) +
                       (1.0 - pass_coefficient) * state[d];
            ords[d] = static_cast<std::uint32_t>(std::llround(state[d]));
        }
        stream.push_back(space->point_from_ordinals(std::move(ords)));
    }
    return stream;
}

// --- Clock synchronization ------------------------------------------------------

/// One observed deviation: where the plant was expected next on its
/// program, and where the disturbance actually put it.
struct SyncEvent {
    std::uint64_t expected = 0;
    std::uint64_t observed = 0;
};

struct ClockSyncResult {
    ClockRate new_rate;
    int backward_resets = 0; // plant too fast
    int forward_skips = 0;   // plant too slow
    int off_track = 0;       // controller must replan
    bool replan = false;
};

namespace detail {

inline ClockRate scale_rate(const ClockRate& rate, double factor) {
    const double value = static_cast<double>(rate.num) / rate.den * factor;
    const std::uint32_t den = 1000000;
    auto num = static_cast<std::uint64_t>(std::llround(value * den));
    num = std::max<std::uint64_t>(num, 1);
    const std::uint64_t g = std::gcd(num, static_cast<std::uint64_t>(den));
    return ClockRate{static_cast<std::uint32_t>(num / g), static_cast<std::uint32_t>(den / g)};
}

} // namespace detail

/// Classifies disturbances against the program path: a reset to an earlier
/// program point means the plant runs too fast (slow the clock down), a
/// skip ahead means it is too slow (speed it up), anything off the path
/// escalates to controller replanning and leaves the clock alone.
inline ClockSyncResult synchronize_clock(const Plant& plant, const std::vector<SyncEvent>& events,
                                         double gamma = 0.1) {
    if (plant.program.empty()) {
        throw RangeError("clock synchronization needs a declared program path");
    }
    auto program_pos = [&plant](std::uint64_t address) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < plant.program.size(); ++i) {
            if (plant.program[i] == address) {
                return i;
            }
        }
        return std::nullopt;
    };
    ClockSyncResult result;
    result.new_rate = plant.clock_rate;
    for (const auto& event : events) {
        const auto expected_pos = program_pos(event.expected);
        const auto observed_pos = program_pos(event.observed);
        if (!expected_pos || !observed_pos) {
            result.off_track += 1;
            result.replan = true;
            continue;
        }
        if (*observed_pos < *expected_pos) {
            result.backward_resets += 1;
            result.new_rate = detail::scale_rate(result.new_rate, 1.0 - gamma);
        } else if (*observed_pos > *expected_pos) {
            result.forward_skips += 1;
            result.new_rate = detail::scale_rate(result.new_rate, 1.0 + gamma);
        }
    }
    return result;
}

} // namespace omegasim
