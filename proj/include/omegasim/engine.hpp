#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "omegasim/channels.hpp"
#include "omegasim/configspace.hpp"
#include "omegasim/controller.hpp"
#include "omegasim/omega.hpp"
#include "omegasim/plant.hpp"
#include "omegasim/scenario.hpp"
#include "omegasim/storage.hpp"

namespace omegasim {

struct TraceRow {
    std::uint64_t tick = 0;
    std::uint64_t virtual_time = 0;
    std::string active;  // bit string of the active configuration
    std::string channel; // q, r, n, m or -
    std::uint64_t bits = 0;
    std::string event;
    double damage = 0.0;
};

struct Trace {
    std::vector<TraceRow> rows;
    // (output, active index) per tick; the trace-equivalence key.
    std::vector<std::pair<std::int64_t, std::uint64_t>> per_tick;

    std::string to_csv() const {
        std::ostringstream out;
        out << "tick,real_time,virtual_time,active_config,channel,bits,event,damage\n";
        char damage_buf[64];
        for (const auto& row : rows) {
            std::snprintf(damage_buf, sizeof(damage_buf), "%.9g", row.damage);
            out << row.tick << "," << row.tick << "," << row.virtual_time << "," << row.active
                << "," << row.channel << "," << row.bits << "," << row.event << ","
                << damage_buf << "\n";
        }
        return out.str();
    }
};

struct RunSummary {
    double total_damage = 0.0;
    std::uint64_t reconf_wall_ticks = 0;
    double reliability = 0.0; // R
    std::optional<std::size_t> h_k;
    std::optional<std::size_t> h_kp;
    std::optional<double> product_safety; // S = h_kp * R
    std::uint64_t mode_switches = 0;
    bool erratic = false;

    // supplementary measurements, not part of the summary JSON key set
    std::uint64_t identification_ticks = 0;
    std::uint64_t selection_ticks = 0;
    std::uint64_t transfer_ticks = 0;
    std::uint64_t frozen_ticks = 0;
    std::uint64_t reconfigurations = 0;
    double s_rate = 0.0;
    double a_rate = 0.0;

    std::string to_json() const {
        auto real = [](double v) {
            char buffer[64];
            std::snprintf(buffer, sizeof(buffer), "%.9g", v);
            return std::string(buffer);
        };
        std::string out = "{\n";
        out += "  \"total_damage\": " + real(total_damage) + ",\n";
        out += "  \"reconf_wall_ticks\": " + std::to_string(reconf_wall_ticks) + ",\n";
        out += "  \"R\": " + real(reliability) + ",\n";
        out += "  \"h_k\": " + (h_k ? std::to_string(*h_k) : "null") + ",\n";
        out += "  \"h_kp\": " + (h_kp ? std::to_string(*h_kp) : "null") + ",\n";
        out += "  \"S\": " + (product_safety ? real(*product_safety) : "null") + ",\n";
        out += "  \"mode_switches\": " + std::to_string(mode_switches) + ",\n";
        out += std::string("  \"erratic\": ") + (erratic ? "true" : "false") + "\n";
        out += "}\n";
        return out;
    }
};

struct EngineRun {
    Trace trace;
    RunSummary summary;
};

namespace detail {

/// Integer progress split: bits delivered in tick t of a D-tick transfer.
inline std::uint64_t progress_bits(std::uint64_t total, std::uint64_t duration,
                                   std::uint64_t tick_index) {
    if (duration == 0) {
        return 0;
    }
    const auto upto = [&](std::uint64_t t) { return total * t / duration; };
    return upto(tick_index) - upto(tick_index - 1);
}

/// One reconfiguration step as the engine executes it.
struct ExecStep {
    BitVec target;                // full-space head encoding (leading bits)
    std::uint64_t n_bits = 0;     // forward n-link bits incl. redundancy and re-requests
    std::uint64_t m_bits = 0;
    std::uint64_t nack_bits = 0;  // reverse duplex requests
    std::uint64_t duration = 0;
    std::uint64_t gap_before = 0; // idle ticks before this step starts
};

struct ExecPlan {
    std::vector<ExecStep> steps;
    std::uint64_t selection_duration = 0;
    std::uint64_t total_duration = 0;
    std::uint64_t start_delay = 0; // scheduled switching: wait for alignment
    bool freeze_plant = false;     // spontaneous: plant down during transfer
    std::uint64_t strategy_id = 0;
    StrategyFamily family = StrategyFamily::spontaneous;
    std::string decision_log; // candidate count, eligible size, damage, cost
};

/// The live plant layer: one or more fragments covering disjoint
/// dimension groups of the full space.
struct FragmentRuntime {
    SpacePtr space; // full space
    std::vector<PlantFragment>* fragments = nullptr;

    std::uint64_t joint_active() const {
        if (fragments->size() == 1) {
            return fragments->front().plant.active;
        }
        std::vector<std::uint32_t> ords(space->dimensions().size(), 0);
        for (const auto& frag : *fragments) {
            const auto sub = frag.plant.space->ordinals_at(frag.plant.active);
            for (std::size_t gi = 0; gi < frag.dims.size(); ++gi) {
                ords[frag.dims[gi]] = sub[gi];
            }
        }
        return space->index_of_ordinals(ords);
    }

    /// Extracts a fragment's share of a full-space encoding.
    BitVec slice(const PlantFragment& frag, const BitVec& head) const {
        BitVec out;
        std::size_t pos = 0;
        std::size_t dim_index = 0;
        for (const auto& d : space->dimensions()) {
            const bool mine =
                std::find(frag.dims.begin(), frag.dims.end(), dim_index) != frag.dims.end();
            if (mine) {
                out.append_field(head.extract_field(pos, d.bit_width()), d.bit_width());
            }
            pos += d.bit_width();
            ++dim_index;
        }
        return out;
    }

    void deploy(const BitVec& head) {
        for (auto& frag : *fragments) {
            const BitVec sub = fragments->size() == 1 ? head : slice(frag, head);
            frag.plant.active = clamp_decode(*frag.plant.space, sub);
        }
    }

    std::int64_t step_all(const std::optional<BitVec>& kick, std::mt19937_64* rng) {
        std::int64_t sum = 0;
        for (auto& frag : *fragments) {
            std::optional<BitVec> sub_kick;
            if (kick) {
                sub_kick = fragments->size() == 1 ? *kick : slice(frag, *kick);
            }
            sum += step(frag.plant, 0, sub_kick, rng).output;
        }
        return sum;
    }
};

} // namespace detail

/// Deterministic discrete-time simulation. Identification flows over q,
/// selection over r, retrieval over n and implementation over m;
/// selection and transfer are pipelined after identification, so one
/// reconfiguration costs ident + max(selection, transfer) wall ticks.
inline EngineRun run_with_unit(const Scenario& scenario, std::uint64_t seed, OmegaUnit unit) {
    EngineRun result;
    Trace& trace = result.trace;
    RunSummary& summary = result.summary;

    const SpacePtr space = unit.space;
    detail::FragmentRuntime runtime{space, &unit.plants};
    const bool monolithic = unit.plants.size() == 1;
    const auto& env = scenario.environment;
    const auto& controller_spec = scenario.controller;

    const std::size_t ident_bits_total =
        env.error_classes <= 1 ? 0 : std::bit_width<std::uint64_t>(env.error_classes - 1);
    const std::size_t address_bits = [&unit]() {
        std::size_t bits = 0;
        for (const auto& storage : unit.storages) {
            bits = std::max(bits, storage.address_bits());
        }
        return bits;
    }();

    std::mt19937_64 plant_rng(detail::splitmix64(seed ^ 0x706c616e74ull));
    std::uint64_t transfer_counter = 0;

    std::map<std::uint64_t, std::int64_t> demand_at;
    for (const auto& d : env.demands) {
        demand_at[d.tick] = d.output;
    }
    std::multimap<std::uint64_t, BitVec> disturb_at;
    for (const auto& d : env.disturbances) {
        disturb_at.emplace(d.tick, BitVec::from_string(d.delta_bits));
    }
    std::multimap<std::uint64_t, std::uint32_t> fault_at;
    for (const auto& f : env.faults) {
        fault_at.emplace(f.tick, f.error_class);
    }

    std::optional<std::int64_t> demand;
    std::deque<std::uint32_t> pending;

    enum class Phase { idle, identifying, executing };
    Phase phase = Phase::idle;
    std::uint64_t phase_tick = 0;
    std::uint32_t current_class = 0;

    detail::ExecPlan plan;
    std::uint64_t exec_tick = 0;
    std::size_t exec_step = 0;
    std::uint64_t step_tick = 0;
    std::uint64_t reconf_ident_ticks = 0;

    std::optional<std::uint64_t> deployed_pattern;
    std::deque<std::uint64_t> implemented_ticks;
    bool recovery_engaged = false;

    std::uint64_t virtual_time = 0;
    std::uint64_t clock_accum = 0;
    std::int64_t last_output = 0;

    std::map<std::int64_t, std::uint64_t> output_histogram;
    std::map<std::uint32_t, std::uint64_t> env_histogram;

    const std::size_t position_width =
        space->total_bits() <= 1 ? 1 : std::bit_width(space->total_bits() - 1);
    const ClockRate clock_rate = unit.plants.front().plant.clock_rate;

    auto decode_head_index = [&](const BitVec& pattern_bits) {
        BitVec head(space->total_bits());
        for (std::size_t i = 0; i < head.size(); ++i) {
            head.set(i, pattern_bits.get(i));
        }
        return detail::clamp_decode(*space, head);
    };

    // Transfer sizes: each fragment moves its psi share over its own n/m
    // replica; the slowest share bounds the duration.
    auto full_swap_step = [&](const BitVec& content, std::uint64_t gap) {
        detail::ExecStep step;
        step.target = content;
        std::uint64_t duration = 0;
        std::uint64_t forward_total = 0;
        std::uint64_t psi_total = 0;
        std::size_t share_index = 0;
        for (const auto& frag : unit.plants) {
            const std::uint64_t share = frag.plant.psi_bits;
            psi_total += share;
            std::uint64_t forward = share;
            if (unit.channels.bit_error_rate > 0.0 && share > 0) {
                BitVec wire(share);
                for (std::size_t i = 0; i < wire.size() && i < content.size(); ++i) {
                    wire.set(i, content.get(i));
                }
                const auto sent = transmit_with_errors(
                    wire, unit.channels,
                    detail::splitmix64(seed ^ (0x7472616eull + (++transfer_counter) * 131 +
                                               share_index)));
                forward = sent.forward_bits_total();
                step.nack_bits += sent.reverse_bits;
            }
            forward_total += forward;
            duration = std::max(duration, std::max(transfer_time(forward, unit.channels.n),
                                                   transfer_time(share, unit.channels.m)));
            ++share_index;
        }
        step.n_bits = forward_total;
        step.m_bits = psi_total;
        step.duration = duration;
        step.gap_before = gap;
        return step;
    };

    auto delta_step = [&](const BitVec& content, std::uint64_t changed_bits, std::uint64_t gap) {
        detail::ExecStep step;
        step.target = content;
        step.n_bits = changed_bits * (position_width + 1);
        step.m_bits = changed_bits;
        if (unit.channels.bit_error_rate > 0.0 && step.n_bits > 0) {
            BitVec wire(step.n_bits);
            const auto sent = transmit_with_errors(
                wire, unit.channels,
                detail::splitmix64(seed ^ (0x64656c74ull + (++transfer_counter) * 131)));
            step.n_bits = sent.forward_bits_total();
            step.nack_bits = sent.reverse_bits;
        }
        step.duration = std::max(transfer_time(step.n_bits, unit.channels.n),
                                 transfer_time(step.m_bits, unit.channels.m));
        step.gap_before = gap;
        return step;
    };

    auto plan_from_steps = [&](std::vector<detail::ExecStep> steps, bool freeze,
                               std::uint64_t selection_bits, StrategyFamily family,
                               std::uint64_t id) {
        detail::ExecPlan p;
        p.steps = std::move(steps);
        p.freeze_plant = freeze;
        p.family = family;
        p.strategy_id = id;
        p.selection_duration = transfer_time(selection_bits, unit.channels.r);
        std::uint64_t clock = 0;
        for (auto& step : p.steps) {
            clock += step.gap_before + step.duration;
        }
        p.total_duration = clock;
        return p;
    };

    // Deterministic look-ahead over the strategy window (Eq. 5): future
    // faults and disturbances are unknowable and excluded; demands evolve
    // per schedule.
    auto lookahead_damage = [&](const detail::ExecPlan& candidate, std::uint64_t now) {
        std::vector<PlantFragment> clone = unit.plants;
        detail::FragmentRuntime clone_runtime{space, &clone};
        std::uint64_t clone_accum = clock_accum;
        std::int64_t clone_output = last_output;
        auto clone_demand = demand;
        double damage_sum = 0.0;
        std::uint64_t tau = 0;
        std::size_t at_step = 0;
        std::uint64_t in_step = 0;
        const std::uint64_t window =
            std::max(candidate.total_duration, candidate.selection_duration);
        while (tau < window) {
            ++tau;
            const auto it = demand_at.find(now + tau);
            if (it != demand_at.end()) {
                clone_demand = it->second;
            }
            bool frozen = false;
            if (at_step < candidate.steps.size()) {
                const auto& step = candidate.steps[at_step];
                if (in_step < step.gap_before) {
                    ++in_step;
                } else {
                    frozen = candidate.freeze_plant;
                    ++in_step;
                    if (in_step >= step.gap_before + step.duration) {
                        clone_runtime.deploy(step.target);
                        ++at_step;
                        in_step = 0;
                    }
                }
            }
            if (!frozen) {
                clone_accum += clock_rate.num;
                while (clone_accum >= clock_rate.den) {
                    clone_accum -= clock_rate.den;
                    clone_output = clone_runtime.step_all(std::nullopt, nullptr);
                }
            }
            double violations = 0.0;
            if (clone_demand && clone_output != *clone_demand) {
                violations += 1.0;
            }
            if (!space->index_is_legal(clone_runtime.joint_active())) {
                violations += 1.0;
            }
            damage_sum += env.damage_weight * violations;
        }
        return damage_sum;
    };

    auto current_head = [&]() {
        return space->encode_ordinals(space->ordinals_at(runtime.joint_active()));
    };

    // Candidate generation per controller family, then Eq. 5/6 filtering
    // and least-cost selection.
    auto choose_plan = [&](std::uint32_t error_class, std::uint64_t now,
                           bool* no_eligible) -> detail::ExecPlan {
        struct Candidate {
            detail::ExecPlan plan;
            double cost = 0.0;
        };
        std::vector<Candidate> candidates;
        std::uint64_t psi_total = 0;
        for (const auto& frag : unit.plants) {
            psi_total += frag.plant.psi_bits;
        }

        std::optional<BitVec> target_pattern;
        const auto mapped = env.class_to_pattern.find(error_class);
        if (mapped != env.class_to_pattern.end() && unit.has_pattern(mapped->second)) {
            target_pattern = unit.retrieve(mapped->second).bits;
        }
        if (controller_spec.family == "memory" &&
            unit.storages.front().association_count() > 0) {
            BitVec trigger(std::max<std::size_t>(ident_bits_total, 1));
            for (std::size_t i = 0; i < trigger.size(); ++i) {
                trigger.set(i, (error_class >> (trigger.size() - 1 - i)) & 1u);
            }
            const Strategy memory = plan_memory(unit.storages.front(), trigger);
            candidates.push_back({plan_from_steps({full_swap_step(memory.steps[0].target, 0)},
                                                  true, address_bits, StrategyFamily::memory, 100),
                                  memory.cost + 8.0});
        }
        if (target_pattern) {
            candidates.push_back(
                {plan_from_steps({full_swap_step(*target_pattern, 0)}, true, address_bits,
                                 StrategyFamily::spontaneous, 0),
                 static_cast<double>(2 * psi_total) + 8.0});
            if (monolithic && controller_spec.family == "iterative") {
                const BitVec current = current_head();
                const auto target_index = decode_head_index(*target_pattern);
                const BitVec target_code =
                    space->encode_ordinals(space->ordinals_at(target_index));
                const auto changed = hamming(current, target_code);
                candidates.push_back(
                    {plan_from_steps({delta_step(*target_pattern, changed, 0)}, true,
                                     address_bits, StrategyFamily::iterative, 1),
                     static_cast<double>(changed * (position_width + 2)) + 8.0});
                if (changed > 1) {
                    BitVec midpoint = current;
                    std::uint64_t moved = 0;
                    for (std::size_t i = 0; i < midpoint.size() && moved < changed / 2; ++i) {
                        if (current.get(i) != target_code.get(i)) {
                            midpoint.set(i, target_code.get(i));
                            ++moved;
                        }
                    }
                    candidates.push_back(
                        {plan_from_steps({delta_step(midpoint, moved, 0),
                                          delta_step(*target_pattern, changed - moved, 1)},
                                         false, address_bits, StrategyFamily::iterative, 2),
                         static_cast<double>(changed * (position_width + 2)) + 16.0});
                }
            }
            if (monolithic && controller_spec.family == "mixing") {
                const auto goal_index = decode_head_index(*target_pattern);
                const auto here = space->point_at(runtime.joint_active());
                const auto there = space->point_at(goal_index);
                const auto midpoint = mix_interpolate({here, there}, {0.5, 0.5});
                const auto changed_a = hamming(here.bits(), midpoint.bits());
                const auto changed_b = hamming(midpoint.bits(), there.bits());
                candidates.push_back(
                    {plan_from_steps({delta_step(midpoint.bits(), changed_a, 0),
                                      delta_step(*target_pattern, changed_b, 1)},
                                     false, address_bits, StrategyFamily::mixing, 4),
                     static_cast<double>((changed_a + changed_b) * (position_width + 2)) + 16.0});
            }
            if (monolithic &&
                (controller_spec.family == "deterministic" ||
                 controller_spec.family == "stochastic") &&
                space->point_count() <= planner_space_cap) {
                const auto goal_index = decode_head_index(*target_pattern);
                CostField field{.goal = space->point_at(goal_index),
                                .attractor_weight = controller_spec.attractor_weight,
                                .penalty_floor = controller_spec.penalty_floor,
                                .radius_weight = controller_spec.radius_weight};
                const std::size_t budget = controller_spec.step_budget == 0
                                               ? space->total_bits()
                                               : controller_spec.step_budget;
                try {
                    const PlanResult planned =
                        controller_spec.family == "deterministic"
                            ? plan_deterministic(space, space->point_at(runtime.joint_active()),
                                                 field, budget)
                            : plan_stochastic(space, space->point_at(runtime.joint_active()),
                                              field, budget, detail::splitmix64(seed ^ now),
                                              TemperatureSchedule{
                                                  controller_spec.temperature,
                                                  controller_spec.temperature_decay});
                    if (planned.reached_goal && !planned.strategy.steps.empty()) {
                        std::vector<detail::ExecStep> steps;
                        for (std::size_t i = 0; i < planned.strategy.steps.size(); ++i) {
                            const auto& s = planned.strategy.steps[i];
                            steps.push_back(delta_step(s.target, s.payload_m, i == 0 ? 0 : 1));
                        }
                        candidates.push_back(
                            {plan_from_steps(std::move(steps), false, address_bits,
                                             controller_spec.family == "deterministic"
                                                 ? StrategyFamily::iterative
                                                 : StrategyFamily::stochastic,
                                             3),
                             planned.strategy.cost + 8.0});
                    }
                } catch (const Error&) {
                    // planner candidates are optional; the spontaneous swap remains
                }
            }
        }
        if (candidates.empty()) {
            *no_eligible = true;
            return {};
        }
        std::vector<Strategy> shells;
        std::vector<double> damages;
        for (const auto& c : candidates) {
            Strategy shell;
            shell.id = c.plan.strategy_id;
            shell.cost = c.cost;
            shell.t_reconf = std::max(c.plan.total_duration, c.plan.selection_duration);
            shells.push_back(std::move(shell));
            damages.push_back(lookahead_damage(c.plan, now));
        }
        const auto eligible = eligible_strategies(damages, controller_spec.damage_cap);
        if (eligible.empty()) {
            *no_eligible = true;
            return {};
        }
        const Strategy& chosen = select_strategy(shells, eligible);
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (candidates[i].plan.strategy_id == chosen.id) {
                char log[160];
                std::snprintf(log, sizeof(log),
                              "selected(cand=%zu elig=%zu alpha=%llu damage=%.9g cost=%.9g "
                              "t_reconf=%llu)",
                              candidates.size(), eligible.size(),
                              static_cast<unsigned long long>(chosen.id), damages[i],
                              chosen.cost, static_cast<unsigned long long>(chosen.t_reconf));
                candidates[i].plan.decision_log = log;
                return std::move(candidates[i].plan);
            }
        }
        return std::move(candidates.front().plan);
    };

    auto recovery_plan = [&]() -> std::optional<detail::ExecPlan> {
        if (!env.recovery || !unit.has_pattern(*env.recovery)) {
            return std::nullopt;
        }
        // Deployed spontaneously, bypassing strategy selection.
        return plan_from_steps({full_swap_step(unit.retrieve(*env.recovery).bits, 0)}, true, 0,
                               StrategyFamily::spontaneous, 999);
    };

    const std::uint64_t ticks = scenario.run.ticks;
    for (std::uint64_t t = 1; t <= ticks; ++t) {
        std::vector<std::string> events;
        std::uint64_t q_bits_row = 0;
        std::string q_event;
        std::uint64_t r_bits_row = 0;
        std::uint64_t n_bits_row = 0;
        std::uint64_t nack_bits_row = 0;
        std::uint64_t m_bits_row = 0;
        bool transfer_active = false;

        const auto demand_now = demand_at.find(t);
        if (demand_now != demand_at.end()) {
            demand = demand_now->second;
        }
        for (auto [it, end] = fault_at.equal_range(t); it != end; ++it) {
            pending.push_back(it->second);
            events.push_back("fault");
        }

        if (phase == Phase::idle && !pending.empty()) {
            current_class = pending.front();
            pending.pop_front();
            phase = Phase::identifying;
            phase_tick = 0;
            reconf_ident_ticks = 0;
        }

        if (phase == Phase::identifying) {
            ++phase_tick;
            ++reconf_ident_ticks;
            ++summary.identification_ticks;
            const std::uint64_t ident_duration =
                ident_bits_total == 0 ? 1 : transfer_time(ident_bits_total, unit.channels.q);
            q_bits_row = detail::progress_bits(ident_bits_total, ident_duration, phase_tick);
            if (phase_tick >= ident_duration) {
                q_event = "identified";
                bool no_eligible = false;
                detail::ExecPlan next = choose_plan(current_class, t, &no_eligible);
                if (!no_eligible && controller_spec.scheduled_switch && monolithic &&
                    !next.steps.empty()) {
                    // Scheduled switching: wait until the autonomous run
                    // drifts nearest to the target before deploying.
                    Plant& live = unit.plants.front().plant;
                    const BitVec target_code = space->encode_ordinals(
                        space->ordinals_at(decode_head_index(next.steps.back().target)));
                    // The plant still steps during this identification
                    // tick, so alignment is probed from the successor.
                    std::uint64_t probe = live.effective_successor(live.active);
                    std::size_t best_delay = 0;
                    std::size_t best_distance = SIZE_MAX;
                    for (std::size_t k = 0; k <= live.table.size(); ++k) {
                        const auto d = hamming(
                            space->encode_ordinals(space->ordinals_at(probe)), target_code);
                        if (d < best_distance) {
                            best_distance = d;
                            best_delay = k;
                        }
                        probe = live.effective_successor(probe);
                    }
                    next.start_delay = best_delay;
                }
                if (no_eligible) {
                    events.push_back("replan");
                    auto recovery = recovery_plan();
                    if (recovery) {
                        plan = std::move(*recovery);
                        events.push_back("recovery");
                        recovery_engaged = true;
                        phase = Phase::executing;
                    } else {
                        phase = Phase::idle;
                    }
                } else {
                    plan = std::move(next);
                    phase = Phase::executing;
                    if (!plan.decision_log.empty()) {
                        events.push_back(plan.decision_log);
                    }
                }
                exec_tick = 0;
                exec_step = 0;
                step_tick = 0;
            }
        } else if (phase == Phase::executing) {
            ++exec_tick;
            const std::uint64_t eff_tick =
                exec_tick > plan.start_delay ? exec_tick - plan.start_delay : 0;
            if (eff_tick >= 1 && eff_tick <= plan.selection_duration) {
                r_bits_row =
                    detail::progress_bits(address_bits, plan.selection_duration, eff_tick);
                ++summary.selection_ticks;
            }
            if (eff_tick >= 1 && exec_step < plan.steps.size()) {
                auto& step = plan.steps[exec_step];
                ++step_tick;
                if (step_tick > step.gap_before) {
                    const std::uint64_t inside = step_tick - step.gap_before;
                    n_bits_row += detail::progress_bits(step.n_bits, step.duration, inside);
                    m_bits_row += detail::progress_bits(step.m_bits, step.duration, inside);
                    nack_bits_row += detail::progress_bits(step.nack_bits, step.duration, inside);
                    ++summary.transfer_ticks;
                    transfer_active = true;
                    if (inside >= step.duration) {
                        runtime.deploy(step.target);
                        events.push_back("implemented");
                        implemented_ticks.push_back(t);
                        ++exec_step;
                        step_tick = 0;
                    }
                }
            }
            const bool steps_done = exec_step >= plan.steps.size();
            const bool selection_done = eff_tick >= plan.selection_duration;
            if (steps_done && selection_done) {
                summary.reconf_wall_ticks +=
                    reconf_ident_ticks + plan.start_delay +
                    std::max(plan.selection_duration, plan.total_duration);
                ++summary.reconfigurations;
                if (!plan.steps.empty()) {
                    const std::uint64_t deployed_key = plan.steps.back().target.hash();
                    if (deployed_pattern != deployed_key) {
                        ++summary.mode_switches;
                        events.push_back("mode_switch");
                    }
                    deployed_pattern = deployed_key;
                }
                phase = Phase::idle;
            }
        }

        // Plant activity: frozen during a spontaneous transfer window.
        const bool frozen = plan.freeze_plant && transfer_active;
        if (frozen) {
            ++summary.frozen_ticks;
        } else {
            clock_accum += clock_rate.num;
            bool first_step_this_tick = true;
            while (clock_accum >= clock_rate.den) {
                clock_accum -= clock_rate.den;
                std::optional<BitVec> kick;
                if (first_step_this_tick) {
                    const auto range = disturb_at.equal_range(t);
                    if (range.first != range.second) {
                        kick = range.first->second;
                    }
                }
                first_step_this_tick = false;
                last_output = runtime.step_all(kick, monolithic ? &plant_rng : nullptr);
                ++virtual_time;
            }
        }
        output_histogram[last_output] += 1;
        if (!env.env_script.empty()) {
            env_histogram[env.env_script[(t - 1) % env.env_script.size()]] += 1;
        }

        double violations = 0.0;
        if (demand && last_output != *demand) {
            violations += 1.0;
        }
        const std::uint64_t joint_active = runtime.joint_active();
        if (!space->index_is_legal(joint_active)) {
            violations += 1.0;
        }
        const double damage_now = env.damage_weight * violations;
        summary.total_damage += damage_now;

        // Erratic detection: too many implementations inside the window.
        while (!implemented_ticks.empty() &&
               implemented_ticks.front() + env.erratic_window <= t) {
            implemented_ticks.pop_front();
        }
        if (!summary.erratic && implemented_ticks.size() > env.erratic_threshold) {
            summary.erratic = true;
            events.push_back("erratic");
            if (!recovery_engaged) {
                auto recovery = recovery_plan();
                if (recovery) {
                    plan = std::move(*recovery);
                    phase = Phase::executing;
                    exec_tick = 0;
                    exec_step = 0;
                    step_tick = 0;
                    events.push_back("recovery");
                    recovery_engaged = true;
                }
            }
        }

        const std::string active_bits =
            space->encode_ordinals(space->ordinals_at(joint_active)).to_string();
        auto push_row = [&](const char* channel, std::uint64_t bits, const std::string& event) {
            trace.rows.push_back(
                TraceRow{t, virtual_time, active_bits, channel, bits, event, 0.0});
        };
        if (q_bits_row > 0 || !q_event.empty()) {
            push_row("q", q_bits_row, q_event);
        }
        if (r_bits_row > 0) {
            push_row("r", r_bits_row, "");
        }
        if (n_bits_row > 0) {
            push_row("n", n_bits_row, "");
        }
        if (nack_bits_row > 0) {
            push_row("n", nack_bits_row, "nack");
        }
        if (m_bits_row > 0) {
            push_row("m", m_bits_row, "");
        }
        std::string joined;
        for (const auto& e : events) {
            joined += (joined.empty() ? "" : "+") + e;
        }
        trace.rows.push_back(
            TraceRow{t, virtual_time, active_bits, "-", 0, joined, damage_now});
        trace.per_tick.emplace_back(last_output, joint_active);
    }

    // Information rates between plant and environment (KL in bits per
    // observation; zero when the run matches the declared expectations).
    const auto as_distribution = [](std::vector<double> counts) {
        double total = 0.0;
        for (double c : counts) {
            total += c;
        }
        if (total > 0.0) {
            for (double& c : counts) {
                c /= total;
            }
        }
        return counts;
    };
    if (!env.expect_plant.empty()) {
        std::vector<double> observed(env.expect_plant.size(), 0.0);
        for (const auto& [output, count] : output_histogram) {
            if (output >= 0 && static_cast<std::size_t>(output) < observed.size()) {
                observed[static_cast<std::size_t>(output)] += static_cast<double>(count);
            }
        }
        summary.a_rate = measure_q(env.expect_plant, as_distribution(std::move(observed)));
    }
    if (!env.expect_env.empty()) {
        std::vector<double> observed(env.expect_env.size(), 0.0);
        for (const auto& [symbol, count] : env_histogram) {
            if (symbol < observed.size()) {
                observed[symbol] += static_cast<double>(count);
            }
        }
        summary.s_rate = measure_q(env.expect_env, as_distribution(std::move(observed)));
    }

    // Safety metrics (Eq. 8-10).
    std::uint64_t psi_total = 0;
    for (const auto& frag : unit.plants) {
        psi_total += frag.plant.psi_bits;
    }
    summary.reliability = reliability(
        ReliabilityParams{scenario.epsilon, unit.channels.m, static_cast<double>(psi_total)});
    try {
        summary.h_k = hazard_key(space);
    } catch (const NoHazardError&) {
        summary.h_k = std::nullopt;
    } catch (const CapacityError&) {
        summary.h_k = std::nullopt;
    }
    if (!env.hybrid_dims.empty()) {
        std::vector<Dimension> hybrid_dims = space->dimensions();
        for (const auto& d : env.hybrid_dims) {
            hybrid_dims.push_back(d);
        }
        LegalityMap hybrid_legality;
        auto probe = ConfigSpace::create(hybrid_dims);
        for (const auto& bits : env.hybrid_blacklist) {
            hybrid_legality.blacklist.insert(
                probe->index_of_ordinals(probe->decode_bits(BitVec::from_string(bits))));
        }
        auto hybrid = ConfigSpace::create(hybrid_dims, std::move(hybrid_legality));
        try {
            summary.h_kp = hazard_key(hybrid);
        } catch (const NoHazardError&) {
            summary.h_kp = std::nullopt;
        }
    }
    if (summary.h_kp) {
        summary.product_safety = static_cast<double>(*summary.h_kp) * summary.reliability;
    }
    return result;
}

inline EngineRun run(const Scenario& scenario, std::uint64_t seed) {
    return run_with_unit(scenario, seed, scenario.build_unit());
}

// --- Dwell-constrained reachability ------------------------------------------

struct ReachabilityOutcome {
    std::size_t budget = 0;
    bool reachable = false;
    std::size_t path_steps = 0;
    std::size_t wall_ticks = 0;
    std::vector<std::uint64_t> path;
};

/// BFS over (point, ticks-away-from-legal) states: one step per tick, up
/// to `budget` bits per step. A transit through illegal territory must
/// re-enter legal space within theta ticks of leaving it.
inline ReachabilityOutcome dwell_reachability(const SpacePtr& space, std::uint64_t start,
                                              std::uint64_t goal, std::size_t budget,
                                              std::uint64_t theta,
                                              const AnalysisLimits& limits = {}) {
    if (space->point_count() > limits.enumeration_cap) {
        throw CapacityError("space too large for dwell-constrained search");
    }
    if (theta < 1) {
        throw RangeError("dwell tolerance must be at least 1 tick");
    }
    const auto count = space->point_count();
    std::vector<BitVec> codes;
    codes.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        codes.push_back(space->encode_ordinals(space->ordinals_at(i)));
    }
    ReachabilityOutcome outcome;
    outcome.budget = budget;
    if (!space->index_is_legal(start) || !space->index_is_legal(goal)) {
        return outcome;
    }
    if (start == goal) {
        outcome.reachable = true;
        outcome.path = {start};
        return outcome;
    }

    const auto state_of = [&](std::uint64_t point, std::uint64_t dwell) {
        return point * (theta + 1) + dwell;
    };
    std::vector<std::int64_t> parent(count * (theta + 1), -1);
    std::vector<std::uint8_t> seen(count * (theta + 1), 0);
    std::deque<std::uint64_t> queue;
    const auto start_state = state_of(start, 0);
    seen[start_state] = 1;
    queue.push_back(start_state);
    std::uint64_t goal_state = UINT64_MAX;
    while (!queue.empty() && goal_state == UINT64_MAX) {
        const auto state = queue.front();
        queue.pop_front();
        const std::uint64_t point = state / (theta + 1);
        const std::uint64_t dwell = state % (theta + 1);
        for (std::uint64_t next = 0; next < count; ++next) {
            if (next == point || hamming(codes[point], codes[next]) > budget) {
                continue;
            }
            std::uint64_t next_dwell;
            if (space->index_is_legal(next)) {
                next_dwell = 0;
            } else {
                next_dwell = dwell + 1;
                // One more tick is needed to re-enter legal space; prune
                // states that cannot make it within theta.
                if (next_dwell + 1 > theta) {
                    continue;
                }
            }
            const auto next_state = state_of(next, next_dwell);
            if (seen[next_state]) {
                continue;
            }
            seen[next_state] = 1;
            parent[next_state] = static_cast<std::int64_t>(state);
            if (next == goal) {
                goal_state = next_state;
                break;
            }
            queue.push_back(next_state);
        }
    }
    if (goal_state == UINT64_MAX) {
        return outcome;
    }
    outcome.reachable = true;
    std::vector<std::uint64_t> path;
    for (std::int64_t at = static_cast<std::int64_t>(goal_state); at >= 0; at = parent[at]) {
        path.push_back(static_cast<std::uint64_t>(at) / (theta + 1));
        if (parent[at] < 0) {
            break;
        }
    }
    std::reverse(path.begin(), path.end());
    outcome.path = path;
    outcome.path_steps = path.size() - 1;
    outcome.wall_ticks = outcome.path_steps;
    return outcome;
}

/// Speed-dependent reachability: the same transition attempted at several
/// step budgets.
inline std::vector<ReachabilityOutcome> reachability_experiment(
    const Scenario& scenario, const std::vector<std::size_t>& budgets, std::uint64_t theta) {
    auto space = scenario.space();
    if (!scenario.run.start_bits || !scenario.run.goal_bits) {
        throw RangeError("reachability needs start and goal configurations in RUN");
    }
    const auto start = space->index_of_ordinals(
        space->decode_bits(BitVec::from_string(*scenario.run.start_bits)));
    const auto goal = space->index_of_ordinals(
        space->decode_bits(BitVec::from_string(*scenario.run.goal_bits)));
    std::vector<ReachabilityOutcome> table;
    table.reserve(budgets.size());
    for (auto budget : budgets) {
        table.push_back(dwell_reachability(space, start, goal, budget, theta));
    }
    return table;
}

// --- Behavior metrics -----------------------------------------------------------

struct ModeSegment {
    std::uint64_t from_tick = 0;
    std::uint64_t to_tick = 0;
};

struct BehaviorReport {
    std::vector<ModeSegment> mode_segments;
    std::uint64_t switch_deviation_bits = 0; // movement spent on mode switches
    std::uint64_t self_propelled_episodes = 0;
    bool erratic = false;
};

/// Extracts mode segments (maximal runs between mode switches), the bit
/// distance spent on switching, q-triggered episodes and the erratic flag
/// from a completed trace.
inline BehaviorReport behavior_metrics(const Trace& trace) {
    BehaviorReport report;
    std::uint64_t segment_start = 1;
    std::uint64_t last_tick = 0;
    std::string previous_active;
    bool fault_seen_recently = false;
    for (const auto& row : trace.rows) {
        last_tick = row.tick;
        if (row.event.find("fault") != std::string::npos) {
            fault_seen_recently = true;
        }
        if (row.event.find("mode_switch") != std::string::npos) {
            report.mode_segments.push_back(ModeSegment{segment_start, row.tick});
            segment_start = row.tick + 1;
            if (!previous_active.empty() && previous_active.size() == row.active.size()) {
                report.switch_deviation_bits += hamming(BitVec::from_string(previous_active),
                                                        BitVec::from_string(row.active));
            }
            if (!fault_seen_recently) {
                ++report.self_propelled_episodes;
            }
            fault_seen_recently = false;
        }
        if (row.event.find("erratic") != std::string::npos) {
            report.erratic = true;
        }
        if (row.channel == "-") {
            previous_active = row.active;
        }
    }
    if (last_tick >= segment_start) {
        report.mode_segments.push_back(ModeSegment{segment_start, last_tick});
    }
    return report;
}

// --- Batch runner ----------------------------------------------------------------

/// Independent (scenario, seed) runs, optionally in parallel. No shared
/// mutable state: each run is self-contained and deterministic.
inline std::vector<EngineRun> batch_run(const Scenario& scenario,
                                        const std::vector<std::uint64_t>& seeds,
                                        unsigned jobs = 1) {
    std::vector<EngineRun> results(seeds.size());
    if (jobs <= 1 || seeds.size() <= 1) {
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            results[i] = run(scenario, seeds[i]);
        }
        return results;
    }
    std::vector<std::thread> workers;
    std::atomic<std::size_t> next{0};
    for (unsigned w = 0; w < jobs; ++w) {
        workers.emplace_back([&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= seeds.size()) {
                    return;
                }
                results[i] = run(scenario, seeds[i]);
            }
        });
    }
    for (auto& worker : workers) {
        worker.join();
    }
    return results;
}

} // namespace omegasim
