#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "omegasim/channels.hpp"

using namespace omegasim;

namespace {

BitVec random_bits(std::size_t n, std::mt19937_64& rng) {
    BitVec v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v.set(i, rng() & 1);
    }
    return v;
}

} // namespace

TEST_CASE("transfer timing") {
    ChannelSet set{.q = 1.0, .r = 5.0, .n = 128.0, .m = 128.0};
    SECTION("2048 bits over m=128 take 16 ticks") {
        REQUIRE(transfer_time(TransferJob{Channel::m, 2048, {}}, set) == 16);
    }
    SECTION("a 10-bit address over r=5 takes 2 ticks") {
        REQUIRE(transfer_time(TransferJob{Channel::r, 10, {}}, set) == 2);
    }
    SECTION("a 3-bit error code over q=1 takes 3 ticks") {
        REQUIRE(transfer_time(TransferJob{Channel::q, 3, {}}, set) == 3);
    }
    SECTION("zero payload is free") {
        REQUIRE(transfer_time(TransferJob{Channel::n, 0, {}}, set) == 0);
    }
    SECTION("monotone in payload, antitone in rate") {
        std::mt19937_64 rng(41);
        for (int trial = 0; trial < 200; ++trial) {
            const std::uint64_t bits = rng() % 5000;
            const double rate = 1.0 + static_cast<double>(rng() % 100);
            REQUIRE(transfer_time(bits, rate) <= transfer_time(bits + 1 + rng() % 100, rate));
            REQUIRE(transfer_time(bits, rate + 1.0) <= transfer_time(bits, rate));
        }
    }
    SECTION("an even 2-way split halves the §-scale payload transfer") {
        REQUIRE(parallel_transfer_time(2048, 128.0, 2) == 8);
        REQUIRE(transfer_time(2048, 128.0) == 16);
    }
    SECTION("segment sums are validated") {
        TransferJob job{Channel::m, 10, {{4, 1}, {4, 2}}};
        REQUIRE_THROWS_AS(transfer_time(job, set), ShapeError);
    }
}

TEST_CASE("prioritized implementation") {
    ChannelSet set{.q = 1.0, .r = 1.0, .n = 64.0, .m = 10.0};
    SECTION("a single segment completes at ceil(bits/rate)") {
        const auto curve = prioritized_implement(TransferJob{Channel::m, 25, {}}, set);
        REQUIRE(curve.total_ticks == 3);
        REQUIRE(curve.completions.size() == 1);
        REQUIRE(curve.completions[0].completed_tick == 3);
        REQUIRE(curve.mass_fraction.back() == Catch::Approx(1.0));
    }
    SECTION("two equal segments: priority 1 finishes in half the total time") {
        TransferJob job{Channel::m, 200, {{100, 1}, {100, 2}}};
        const auto curve = prioritized_implement(job, set);
        REQUIRE(curve.total_ticks == 20);
        REQUIRE(curve.completions[0].priority == 1);
        REQUIRE(curve.completions[0].completed_tick == 10);
    }
    SECTION("the service curve is monotone with diminishing marginal mass") {
        TransferJob job{Channel::m, 175, {{25, 1}, {50, 2}, {100, 4}}};
        const auto curve = prioritized_implement(job, set);
        double previous = 0.0;
        double previous_gain = 1e9;
        for (double fraction : curve.mass_fraction) {
            REQUIRE(fraction >= previous - 1e-12);
            const double gain = fraction - previous;
            REQUIRE(gain <= previous_gain + 1e-9);
            previous_gain = gain;
            previous = fraction;
        }
        REQUIRE(curve.mass_fraction.back() == Catch::Approx(1.0));
    }
}

TEST_CASE("transmission with errors") {
    SECTION("error rate 0 delivers exactly with zero repairs") {
        std::mt19937_64 rng(51);
        const BitVec payload = random_bits(500, rng);
        ChannelSet set;
        set.bit_error_rate = 0.0;
        const auto result = transmit_with_errors(payload, set, 1);
        REQUIRE(result.exact);
        REQUIRE(result.received == payload);
        REQUIRE(result.repaired_blocks == 0);
        REQUIRE(result.rerequest_bits == 0);
        REQUIRE(result.redundancy_bits == 8 * 8); // ceil(500/64) blocks
    }
    SECTION("duplex repair fixes corrupted blocks") {
        std::mt19937_64 rng(52);
        const BitVec payload = random_bits(2048, rng);
        ChannelSet set;
        set.bit_error_rate = 2e-3;
        set.duplex_repair = true;
        int repaired_total = 0;
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            const auto result = transmit_with_errors(payload, set, seed);
            REQUIRE(result.exact);
            repaired_total += static_cast<int>(result.repaired_blocks);
            if (result.repaired_blocks > 0) {
                REQUIRE(result.rerequest_bits > 0);
                REQUIRE(result.reverse_bits > 0);
            }
        }
        REQUIRE(repaired_total > 0); // at this rate corruption certainly happened
    }
    SECTION("without duplex repair the divergence is reported in bits") {
        std::mt19937_64 rng(53);
        const BitVec payload = random_bits(2048, rng);
        ChannelSet set;
        set.bit_error_rate = 5e-3;
        set.duplex_repair = false;
        std::uint64_t divergences = 0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto result = transmit_with_errors(payload, set, seed);
            REQUIRE(result.divergence_bits == hamming(result.received, payload));
            divergences += result.divergence_bits;
        }
        REQUIRE(divergences > 0);
    }
    SECTION("bit accounting: forward total = payload + redundancy + re-requests") {
        std::mt19937_64 rng(54);
        const BitVec payload = random_bits(1024, rng);
        ChannelSet set;
        set.bit_error_rate = 2e-3;
        for (std::uint64_t seed = 100; seed < 120; ++seed) {
            const auto result = transmit_with_errors(payload, set, seed);
            REQUIRE(result.forward_bits_total() ==
                    result.payload_bits + result.redundancy_bits + result.rerequest_bits);
            REQUIRE(result.payload_bits == 1024);
        }
    }
}

TEST_CASE("divergence measurement") {
    SECTION("identical distributions have zero divergence") {
        REQUIRE(measure_q({0.25, 0.75}, {0.25, 0.75}) == 0.0);
        REQUIRE(measure_q({0.1, 0.2, 0.7}, {0.1, 0.2, 0.7}) == 0.0);
    }
    SECTION("worked two-bin example") {
        // 0.5*log2(2) + 0.5*log2(2/3)
        REQUIRE(measure_q({0.25, 0.75}, {0.5, 0.5}) == Catch::Approx(0.20751875).margin(1e-6));
    }
    SECTION("non-negative on random pairs") {
        std::mt19937_64 rng(55);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int trial = 0; trial < 10000; ++trial) {
            const std::size_t n = 2 + rng() % 6;
            std::vector<double> p(n);
            std::vector<double> o(n);
            for (std::size_t i = 0; i < n; ++i) {
                p[i] = unit(rng);
                o[i] = unit(rng);
            }
            REQUIRE(measure_q(p, o) >= 0.0);
        }
    }
    SECTION("support mismatch") {
        REQUIRE_THROWS_AS(measure_q({0.5, 0.5}, {1.0}), ShapeError);
    }
}

TEST_CASE("qr mask filtering") {
    const std::vector<double> divergences = {0.4, 0.4, 0.4, 0.4};
    SECTION("an all-off mask reports no q bits") {
        const auto report = qr_mask_filter(divergences, {false, false, false, false}, 4, 0.1);
        REQUIRE(report.q_bits == 0);
        for (double v : report.values) {
            REQUIRE(v == 0.0);
        }
    }
    SECTION("a full mask reports every fragment") {
        const auto report = qr_mask_filter(divergences, {true, true, true, true}, 4, 0.1);
        REQUIRE(report.q_bits == 16);
        for (double v : report.values) {
            REQUIRE(v == Catch::Approx(0.4));
        }
    }
    SECTION("half mask on uniform divergences gives exactly half the bits") {
        const auto full = qr_mask_filter(divergences, {true, true, true, true}, 4, 0.1);
        const auto half = qr_mask_filter(divergences, {true, false, true, false}, 4, 0.1);
        REQUIRE(half.q_bits * 2 == full.q_bits);
    }
    SECTION("mask length mismatch") {
        REQUIRE_THROWS_AS(qr_mask_filter(divergences, {true}, 4, 0.1), ShapeError);
    }
}
