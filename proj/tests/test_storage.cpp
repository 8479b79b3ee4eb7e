#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "omegasim/storage.hpp"

using namespace omegasim;

namespace {

BitVec random_bits(std::size_t n, std::mt19937_64& rng) {
    BitVec v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v.set(i, rng() & 1);
    }
    return v;
}

Repository repo_with(std::size_t count, std::size_t width, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Repository repo;
    for (std::size_t a = 0; a < count; ++a) {
        repo.add_pattern(static_cast<std::uint32_t>(a), random_bits(width, rng));
    }
    return repo;
}

} // namespace

TEST_CASE("retrieval and address cost") {
    SECTION("1024 patterns cost 10 address bits") {
        auto repo = repo_with(1024, 16, 1);
        REQUIRE(repo.address_bits() == 10);
        REQUIRE(repo.retrieve(512).address_cost_bits == 10);
    }
    SECTION("a single pattern costs 0 address bits") {
        auto repo = repo_with(1, 16, 2);
        REQUIRE(repo.address_bits() == 0);
    }
    SECTION("missing address") {
        auto repo = repo_with(4, 8, 3);
        REQUIRE_THROWS_AS(repo.retrieve(99), NotFoundError);
    }
    SECTION("duplicate address") {
        Repository repo;
        repo.add_pattern(7, BitVec(4));
        REQUIRE_THROWS_AS(repo.add_pattern(7, BitVec(4)), ConflictError);
    }
    SECTION("random counts against the ceil-log2 oracle") {
        std::mt19937_64 rng(4);
        for (int trial = 0; trial < 30; ++trial) {
            const std::size_t count = 1 + rng() % 300;
            auto repo = repo_with(count, 4, rng());
            std::size_t expected = 0;
            while ((std::size_t{1} << expected) < count) {
                ++expected;
            }
            REQUIRE(repo.address_bits() == expected);
        }
    }
}

TEST_CASE("relative addressing") {
    auto repo = repo_with(16, 8, 5);
    repo.set_cluster(0, {3, 7, 11, 2});

    SECTION("self reference costs 0 relative bits plus the flag") {
        const auto cost = repo.relative_address(7, 7);
        REQUIRE(cost.relative);
        REQUIRE(cost.payload_bits == 0);
        REQUIRE(cost.total() == 1);
    }
    SECTION("adjacent cluster members cost 1 relative bit plus the flag") {
        const auto cost = repo.relative_address(3, 7);
        REQUIRE(cost.relative);
        REQUIRE(cost.payload_bits == 1);
        REQUIRE(cost.total() == 2);
    }
    SECTION("cross-cluster lookups fall back to absolute") {
        const auto cost = repo.relative_address(3, 15);
        REQUIRE_FALSE(cost.relative);
        REQUIRE(cost.payload_bits == repo.address_bits());
    }
    SECTION("relative never exceeds absolute plus one flag bit") {
        auto big = repo_with(64, 8, 7);
        std::vector<std::uint32_t> members;
        for (std::uint32_t a = 0; a < 40; ++a) {
            members.push_back(a);
        }
        big.set_cluster(1, members);
        for (std::uint32_t from = 0; from < 64; ++from) {
            for (std::uint32_t to = 0; to < 64; ++to) {
                REQUIRE(big.relative_address(from, to).total() <= big.address_bits() + 1);
            }
        }
    }
}

TEST_CASE("delta encoding") {
    SECTION("identical patterns give an empty delta") {
        BitVec a = BitVec::from_string("10110");
        REQUIRE(delta_encode(a, a).positions.empty());
    }
    SECTION("one differing bit in 2048 gives exactly one entry") {
        std::mt19937_64 rng(8);
        BitVec a = random_bits(2048, rng);
        BitVec b = a;
        b.flip(777);
        const auto delta = delta_encode(a, b);
        REQUIRE(delta.positions == std::vector<std::size_t>{777});
        REQUIRE(delta.payload_bits(2048) == 11 + 1);
    }
    SECTION("length mismatch") {
        REQUIRE_THROWS_AS(delta_encode(BitVec(3), BitVec(4)), ShapeError);
    }
    SECTION("round-trip on random pairs") {
        std::mt19937_64 rng(9);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t n = 1 + rng() % 300;
            BitVec a = random_bits(n, rng);
            BitVec b = random_bits(n, rng);
            REQUIRE(apply_delta(delta_encode(a, b), a) == b);
        }
    }
}

TEST_CASE("compression") {
    SECTION("all-zero 2048-bit pattern compresses below 64 bits") {
        BitVec zeros(2048);
        const auto c = compress(zeros, CompressMode::lossless);
        REQUIRE(c.size() < 64);
        REQUIRE(decompress(c) == zeros);
    }
    SECTION("incompressible patterns expand by at most the header") {
        std::mt19937_64 rng(10);
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t n = 1 + rng() % 2000;
            BitVec bits = random_bits(n, rng);
            const auto c = compress(bits, CompressMode::lossless);
            REQUIRE(c.size() <= n + 16);
            REQUIRE(decompress(c) == bits);
        }
    }
    SECTION("lossless round-trip on structured patterns") {
        std::mt19937_64 rng(11);
        for (int trial = 0; trial < 50; ++trial) {
            BitVec bits(400);
            // long runs with occasional flips
            bool value = rng() & 1;
            for (std::size_t i = 0; i < bits.size(); ++i) {
                if (rng() % 37 == 0) {
                    value = !value;
                }
                bits.set(i, value);
            }
            REQUIRE(decompress(compress(bits, CompressMode::lossless)) == bits);
        }
    }
    SECTION("repairable mode drops covered bits for k minus overhead") {
        std::mt19937_64 rng(12);
        BitVec bits = random_bits(512, rng); // incompressible: raw body
        BitVec mask(512);
        std::size_t covered = 0;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            if (rng() % 4 == 0) {
                mask.set(i, true);
                ++covered;
            }
        }
        const auto lossless = compress(bits, CompressMode::lossless);
        const auto repairable = compress(bits, CompressMode::repairable, &mask);
        REQUIRE(lossless.size() - repairable.size() == covered - 8);

        const auto restored = decompress(repairable, &mask);
        for (std::size_t i = 0; i < bits.size(); ++i) {
            REQUIRE(restored.get(i) == (mask.get(i) ? false : bits.get(i)));
        }
    }
    SECTION("repairable mode without a mask") {
        REQUIRE_THROWS_AS(compress(BitVec(8), CompressMode::repairable), MissingMaskError);
        BitVec mask(8);
        mask.set(1, true);
        const auto c = compress(BitVec(8), CompressMode::repairable, &mask);
        REQUIRE_THROWS_AS(decompress(c), MissingMaskError);
        BitVec wrong(8);
        wrong.set(2, true);
        REQUIRE_THROWS_AS(decompress(c, &wrong), MissingMaskError);
    }
}

TEST_CASE("assembly") {
    Repository repo;
    repo.add_pattern(0, BitVec::from_string("1010"), PatternKind::fragment);
    repo.add_pattern(1, BitVec::from_string("0110"), PatternKind::fragment);
    repo.add_pattern(2, BitVec::from_string("11111111"), PatternKind::full);

    SECTION("a single full-coverage fragment is the identity") {
        AssemblyRule rule{"id", 8, false, {{2, 0}}};
        REQUIRE(assemble(repo, rule) == repo.pattern(2).bits);
    }
    SECTION("two half patterns splice like a manual copy") {
        AssemblyRule rule{"halves", 8, false, {{0, 0}, {1, 4}}};
        REQUIRE(assemble(repo, rule).to_string() == "10100110");
    }
    SECTION("uncovered ranges take the default") {
        AssemblyRule rule{"gap", 8, true, {{0, 2}}};
        REQUIRE(assemble(repo, rule).to_string() == "11101011");
    }
    SECTION("overlap is a conflict naming the range") {
        AssemblyRule rule{"overlap", 8, false, {{0, 0}, {1, 2}}};
        REQUIRE_THROWS_WITH(assemble(repo, rule), Catch::Matchers::ContainsSubstring("[2, 4)"));
    }
    SECTION("absent fragment address") {
        AssemblyRule rule{"missing", 8, false, {{9, 0}}};
        REQUIRE_THROWS_AS(assemble(repo, rule), NotFoundError);
    }
    SECTION("order of disjoint fragments does not matter") {
        AssemblyRule forward{"f", 8, false, {{0, 0}, {1, 4}}};
        AssemblyRule backward{"b", 8, false, {{1, 4}, {0, 0}}};
        REQUIRE(assemble(repo, forward) == assemble(repo, backward));
    }
}

TEST_CASE("reclustering") {
    SECTION("a single co-accessed pair ends up clustered together") {
        auto repo = repo_with(4, 8, 13);
        auto out = recluster(repo, {{1, 3}, {1, 3}, {3, 1}});
        REQUIRE(out.pattern(1).cluster.has_value());
        REQUIRE(out.pattern(1).cluster == out.pattern(3).cluster);
    }
    SECTION("an empty log changes nothing") {
        auto repo = repo_with(4, 8, 14);
        repo.set_cluster(5, {0, 1});
        auto out = recluster(repo, {});
        REQUIRE(out.clusters() == repo.clusters());
    }
    SECTION("two planted communities are recovered exactly") {
        auto repo = repo_with(8, 8, 15);
        std::vector<std::pair<std::uint32_t, std::uint32_t>> log;
        const std::vector<std::uint32_t> left = {0, 1, 2, 3};
        const std::vector<std::uint32_t> right = {4, 5, 6, 7};
        for (const auto& community : {left, right}) {
            for (std::size_t i = 0; i < community.size(); ++i) {
                for (std::size_t j = i + 1; j < community.size(); ++j) {
                    for (int rep = 0; rep < 3; ++rep) {
                        log.emplace_back(community[i], community[j]);
                    }
                }
            }
        }
        log.emplace_back(0, 4); // one weak inter-community access

        auto out = recluster(repo, log);
        REQUIRE(out.clusters().size() == 2);
        for (auto a : left) {
            REQUIRE(out.pattern(a).cluster == out.pattern(0).cluster);
        }
        for (auto a : right) {
            REQUIRE(out.pattern(a).cluster == out.pattern(4).cluster);
        }

        // Brute-force oracle: the best 2-partition by weighted modularity
        // is exactly the planted split.
        std::map<std::pair<std::uint32_t, std::uint32_t>, double> w;
        std::map<std::uint32_t, double> deg;
        double m = 0.0;
        for (auto [a, b] : log) {
            const auto key = std::minmax(a, b);
            w[{key.first, key.second}] += 1.0;
            deg[a] += 1.0;
            deg[b] += 1.0;
            m += 1.0;
        }
        auto modularity = [&](std::uint32_t membership_mask) {
            double q = 0.0;
            for (std::uint32_t a = 0; a < 8; ++a) {
                for (std::uint32_t b = 0; b < 8; ++b) {
                    const bool same = ((membership_mask >> a) & 1) == ((membership_mask >> b) & 1);
                    if (!same) {
                        continue;
                    }
                    const auto key = std::minmax(a, b);
                    const auto it = w.find({key.first, key.second});
                    const double wab = (a == b || it == w.end()) ? 0.0 : it->second;
                    q += wab / (2.0 * m) - deg[a] * deg[b] / (4.0 * m * m);
                }
            }
            return q;
        };
        double best_q = -1e9;
        std::uint32_t best_mask = 0;
        for (std::uint32_t mask = 1; mask < 255; ++mask) {
            const double q = modularity(mask);
            if (q > best_q) {
                best_q = q;
                best_mask = mask;
            }
        }
        REQUIRE((best_mask == 0b11110000 || best_mask == 0b00001111));
    }
    SECTION("mean relative-address cost over the log never increases") {
        std::mt19937_64 rng(16);
        for (int trial = 0; trial < 20; ++trial) {
            auto repo = repo_with(12, 8, rng());
            std::vector<std::pair<std::uint32_t, std::uint32_t>> log;
            const auto entries = 5 + rng() % 40;
            for (std::uint64_t i = 0; i < entries; ++i) {
                log.emplace_back(static_cast<std::uint32_t>(rng() % 12),
                                 static_cast<std::uint32_t>(rng() % 12));
            }
            auto out = recluster(repo, log);
            double before = 0.0;
            double after = 0.0;
            for (auto [a, b] : log) {
                before += static_cast<double>(repo.relative_address(a, b).total());
                after += static_cast<double>(out.relative_address(a, b).total());
            }
            REQUIRE(after <= before);
        }
    }
}

TEST_CASE("memory associations") {
    auto repo = repo_with(4, 8, 17);
    repo.associate(BitVec::from_string("000000"), 2);
    repo.associate(BitVec::from_string("111111"), 1);
    repo.associate(BitVec::from_string("110100"), 3);

    SECTION("exact trigger match") {
        const auto hit = repo.recall(BitVec::from_string("111111"));
        REQUIRE(hit.address == 1);
        REQUIRE(hit.exact);
    }
    SECTION("nearest signature wins, flagged approximate") {
        const auto hit = repo.recall(BitVec::from_string("110101"));
        REQUIRE(hit.address == 3);
        REQUIRE_FALSE(hit.exact);
    }
    SECTION("ties go to the lowest address") {
        const auto hit = repo.recall(BitVec::from_string("001011"));
        // distance 3 to both the all-zero and the all-one signature
        REQUIRE(hit.address == 1);
    }
    SECTION("empty memory") {
        Repository empty;
        REQUIRE_THROWS_AS(empty.recall(BitVec(4)), NoMemoryError);
    }
}
