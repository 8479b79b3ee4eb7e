#include <catch2/catch_amalgamated.hpp>

#include "omegasim/builtin_scenarios.hpp"
#include "omegasim/engine.hpp"

using namespace omegasim;

TEST_CASE("channel-timing reproduction") {
    const auto sc = parse_scenario(builtin::paper_5_1);
    const auto result = run(sc, sc.run.seed);

    SECTION("identification, selection and transfer phases") {
        REQUIRE(result.summary.identification_ticks == 3);
        REQUIRE(result.summary.selection_ticks == 2);
        REQUIRE(result.summary.transfer_ticks == 16);
        REQUIRE(result.summary.reconf_wall_ticks == 19);
        REQUIRE(result.summary.frozen_ticks == 16);
        REQUIRE(result.summary.reconfigurations == 1);
    }
    SECTION("reliability from the channel parameters") {
        REQUIRE(result.summary.reliability == Catch::Approx(6.25)); // 128 / (0.01 * 2048)
    }
    SECTION("virtual time stands still during the spontaneous transfer") {
        std::uint64_t virtual_before = 0;
        std::uint64_t virtual_after = 0;
        for (const auto& row : result.trace.rows) {
            if (row.channel != "-") {
                continue;
            }
            if (row.tick == 3) {
                virtual_before = row.virtual_time;
            }
            if (row.tick == 19) {
                virtual_after = row.virtual_time;
            }
        }
        REQUIRE(virtual_before == virtual_after);
        const auto& last = result.trace.rows.back();
        REQUIRE(last.virtual_time > virtual_after); // resumes afterwards
    }
    SECTION("bit conservation on the n link at zero error rate") {
        std::uint64_t n_bits = 0;
        for (const auto& row : result.trace.rows) {
            if (row.channel == "n" && row.event != "nack") {
                n_bits += row.bits;
            }
        }
        REQUIRE(n_bits == 2048);
    }
    SECTION("q and r ledgers carry the identification and selection bits") {
        std::uint64_t q_bits = 0;
        std::uint64_t r_bits = 0;
        for (const auto& row : result.trace.rows) {
            if (row.channel == "q") {
                q_bits += row.bits;
            }
            if (row.channel == "r") {
                r_bits += row.bits;
            }
        }
        REQUIRE(q_bits == 3);  // ceil(log2(8)) error-class bits
        REQUIRE(r_bits == 10); // 1024 patterns
    }
}

TEST_CASE("determinism") {
    const auto sc = parse_scenario(builtin::paper_5_1);
    SECTION("the same scenario and seed give byte-identical traces") {
        const auto a = run(sc, 42);
        const auto b = run(sc, 42);
        REQUIRE(a.trace.to_csv() == b.trace.to_csv());
        REQUIRE(a.summary.to_json() == b.summary.to_json());
    }
    SECTION("batch runs are identical across thread counts") {
        const std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6};
        const auto serial = batch_run(sc, seeds, 1);
        const auto parallel = batch_run(sc, seeds, 4);
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            REQUIRE(serial[i].trace.to_csv() == parallel[i].trace.to_csv());
        }
    }
}

TEST_CASE("synchronized scenario") {
    const auto sc = parse_scenario(builtin::sync_zero);
    const auto result = run(sc, sc.run.seed);
    REQUIRE(result.summary.reconfigurations == 0);
    REQUIRE(result.summary.s_rate == 0.0);
    REQUIRE(result.summary.a_rate == 0.0);
    REQUIRE(result.summary.total_damage == 0.0);
}

TEST_CASE("noisy transfer with duplex repair") {
    const auto sc = parse_scenario(builtin::duplex_noise);
    const auto result = run(sc, sc.run.seed);

    SECTION("forward bits decompose into payload, redundancy and re-requests") {
        std::uint64_t n_bits = 0;
        std::uint64_t nack_bits = 0;
        for (const auto& row : result.trace.rows) {
            if (row.channel == "n" && row.event != "nack") {
                n_bits += row.bits;
            }
            if (row.channel == "n" && row.event == "nack") {
                nack_bits += row.bits;
            }
        }
        const std::uint64_t payload = 2048;
        const std::uint64_t redundancy = (2048 / 64) * 8;
        REQUIRE(n_bits >= payload + redundancy);
        const std::uint64_t rerequested = n_bits - payload - redundancy;
        REQUIRE(rerequested % 72 == 0); // whole blocks with their parity
        // each re-request names a block over the reverse channel: 5 bits
        REQUIRE(nack_bits == (rerequested / 72) * 5);
    }
    SECTION("total damage equals the per-tick sum") {
        double damage = 0.0;
        for (const auto& row : result.trace.rows) {
            damage += row.damage;
        }
        REQUIRE(damage == Catch::Approx(result.summary.total_damage));
    }
    SECTION("raising the error rate never shortens the transfer") {
        std::uint64_t previous = 0;
        for (double rate : {0.0, 0.001, 0.002, 0.004, 0.008}) {
            auto noisy = sc;
            noisy.channels.bit_error_rate = rate;
            const auto outcome = run(noisy, sc.run.seed);
            REQUIRE(outcome.summary.transfer_ticks >= previous);
            previous = outcome.summary.transfer_ticks;
        }
    }
}

TEST_CASE("iterative reconfiguration under a damage cap") {
    // A frozen swap would miss the demanded output while an interleaved
    // two-chunk update keeps the plant responding; the cap forces the
    // interleaved strategy.
    std::string text = R"(SPACE
  dim a = bool
  dim b = bool
  dim c = bool
PLANT
  start = 0
  psi_bits = 64
  sub 0 -> 0 out 5
  sub 4 -> 4 out 9
  sub 6 -> 6 out 9
  sub 7 -> 7 out 9
STORAGE
  pattern 0 = )" + std::string("000") + std::string(61, '0') +
                       "\n  pattern 1 = " + std::string("111") + std::string(61, '0') + R"(
CHANNELS
  q = 1
  r = 1
  n = 1
  m = 1
  bit_error_rate = 0
  duplex_repair = true
  epsilon = 0.01
CONTROLLER
  family = iterative
  damage_cap = 1
ENVIRONMENT
  error_classes = 2
  fault 1 class 1
  map class 1 -> pattern 1
  demand 4 output 9
RUN
  ticks = 20
  seed = 2
)";
    const auto sc = parse_scenario(text);
    const auto result = run(sc, sc.run.seed);

    SECTION("two partial implementations land instead of one swap") {
        int implemented = 0;
        for (const auto& row : result.trace.rows) {
            if (row.event.find("implemented") != std::string::npos) {
                ++implemented;
            }
        }
        REQUIRE(implemented == 2);
    }
    SECTION("virtual time advances between the steps") {
        std::vector<std::uint64_t> implement_vtimes;
        for (const auto& row : result.trace.rows) {
            if (row.event.find("implemented") != std::string::npos) {
                implement_vtimes.push_back(row.virtual_time);
            }
        }
        REQUIRE(implement_vtimes.size() == 2);
        REQUIRE(implement_vtimes[1] > implement_vtimes[0]);
    }
    SECTION("the interleaved run keeps damage at zero") {
        REQUIRE(result.summary.total_damage == 0.0);
    }
}

TEST_CASE("dwell-constrained reachability") {
    SECTION("three components: budget 3 transits, budget 2 cannot") {
        const auto sc = parse_scenario(builtin::three_component);
        const auto table = reachability_experiment(sc, {3, 2}, sc.run.theta);
        REQUIRE(table[0].reachable);
        REQUIRE(table[0].path_steps == 1);
        REQUIRE_FALSE(table[1].reachable);
    }
    SECTION("fig-59 style instance: shrinking budgets lengthen the path") {
        const auto sc = parse_scenario(builtin::fig59_detour);
        const auto table = reachability_experiment(sc, sc.run.budgets, sc.run.theta);
        REQUIRE(table.size() == 3);
        REQUIRE(table[0].path_steps == 1);
        REQUIRE(table[1].path_steps == 2);
        REQUIRE(table[2].path_steps == 4);
    }
    SECTION("a larger dwell tolerance admits illegal stopovers") {
        const auto sc = parse_scenario(builtin::three_component);
        const auto strict = reachability_experiment(sc, {2}, 1);
        REQUIRE_FALSE(strict[0].reachable);
        const auto relaxed = reachability_experiment(sc, {2}, 2);
        REQUIRE(relaxed[0].reachable);
        REQUIRE(relaxed[0].path_steps == 2);
    }
}

TEST_CASE("behavior metrics") {
    SECTION("a static run is one mode segment with no episodes") {
        const auto sc = parse_scenario(builtin::sync_zero);
        const auto result = run(sc, sc.run.seed);
        const auto report = behavior_metrics(result.trace);
        REQUIRE(report.mode_segments.size() == 1);
        REQUIRE(report.self_propelled_episodes == 0);
        REQUIRE_FALSE(report.erratic);
    }
    SECTION("scheduled switching deviates less than greedy switching") {
        const auto sc = parse_scenario(builtin::two_mode);
        const auto greedy = run(sc, sc.run.seed);
        auto scheduled_sc = sc;
        scheduled_sc.controller.scheduled_switch = true;
        const auto scheduled = run(scheduled_sc, sc.run.seed);

        const auto greedy_report = behavior_metrics(greedy.trace);
        const auto scheduled_report = behavior_metrics(scheduled.trace);
        REQUIRE(greedy_report.mode_segments.size() == 2);
        REQUIRE(scheduled_report.switch_deviation_bits <
                greedy_report.switch_deviation_bits);
    }
    SECTION("oscillating excitation above the threshold flags erratic") {
        const auto sc = parse_scenario(builtin::erratic);
        const auto result = run(sc, sc.run.seed);
        REQUIRE(result.summary.erratic);
        const auto report = behavior_metrics(result.trace);
        REQUIRE(report.erratic);
        bool recovery_seen = false;
        for (const auto& row : result.trace.rows) {
            if (row.event.find("recovery") != std::string::npos) {
                recovery_seen = true;
            }
        }
        REQUIRE(recovery_seen);
    }
}

TEST_CASE("safety metrics in the run summary") {
    const auto sc = parse_scenario(builtin::safety_hybrid);
    const auto result = run(sc, sc.run.seed);

    SECTION("hazard keys from the plant and hybrid spaces") {
        REQUIRE(result.summary.h_k == 1);  // 01 or 10 is one flip from 11
        REQUIRE(result.summary.h_kp == 1); // 1101 is one flip from 1111
    }
    SECTION("product safety is the hazard key scaled by reliability") {
        REQUIRE(result.summary.reliability == Catch::Approx(1.0)); // 16/(0.25*64)
        REQUIRE(result.summary.product_safety ==
                Catch::Approx(static_cast<double>(*result.summary.h_kp) *
                              result.summary.reliability));
    }
    SECTION("an all-legal space reports no hazard key") {
        const auto clean = parse_scenario(builtin::minimal);
        const auto outcome = run(clean, 0);
        REQUIRE_FALSE(outcome.summary.h_k.has_value());
        REQUIRE_FALSE(outcome.summary.product_safety.has_value());
    }
    SECTION("the summary JSON carries the fixed key set") {
        const auto json = result.summary.to_json();
        for (const char* key : {"total_damage", "reconf_wall_ticks", "R", "h_k", "h_kp", "S",
                                "mode_switches", "erratic"}) {
            REQUIRE_THAT(json, Catch::Matchers::ContainsSubstring(std::string("\"") + key +
                                                                  "\""));
        }
    }
}

TEST_CASE("decomposed units keep the plant trace") {
    const auto sc = parse_scenario(builtin::fig40_split);
    auto probe = sc;
    probe.environment.faults.clear(); // pure plant behavior probe
    probe.environment.disturbances.push_back(DisturbEvent{7, "0110"});
    probe.environment.disturbances.push_back(DisturbEvent{23, "1001"});

    auto unit = probe.build_unit();
    const auto joint = run_with_unit(probe, probe.run.seed, unit);
    const auto split = dec_p(unit, {{0, 1}, {2, 3}});
    const auto split_run = run_with_unit(probe, probe.run.seed, split);

    SECTION("golden trace equivalence over 50 ticks") {
        REQUIRE(joint.trace.per_tick == split_run.trace.per_tick);
    }
    SECTION("an even split halves the reconfiguration transfer") {
        auto with_fault_unit = sc.build_unit();
        const auto whole = run_with_unit(sc, sc.run.seed, with_fault_unit);
        const auto halves = run_with_unit(sc, sc.run.seed, dec_p(with_fault_unit, {{0, 1}, {2, 3}}));
        REQUIRE(whole.summary.transfer_ticks == 16);
        REQUIRE(halves.summary.transfer_ticks == 8);
        REQUIRE(whole.summary.frozen_ticks == 16);
        REQUIRE(halves.summary.frozen_ticks == 8);
    }
    SECTION("dec_s preserves the run exactly") {
        auto storage_split = dec_s(unit, {{0, 2}, {1, 3}});
        const auto split_s = run_with_unit(probe, probe.run.seed, storage_split);
        REQUIRE(joint.trace.per_tick == split_s.trace.per_tick);
    }
}
