#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <set>

#include "omegasim/configspace.hpp"

using namespace omegasim;

namespace {

SpacePtr boolean_space(std::size_t n, LegalityMap legality = {}) {
    std::vector<Dimension> dims;
    for (std::size_t i = 0; i < n; ++i) {
        dims.push_back(Dimension::boolean("b" + std::to_string(i)));
    }
    return ConfigSpace::create(std::move(dims), std::move(legality));
}

} // namespace

TEST_CASE("canonical encoding") {
    SECTION("all-minimum point in 3-boolean space") {
        auto space = boolean_space(3);
        REQUIRE(space->point_from_ordinals({0, 0, 0}).bits().to_string() == "000");
    }
    SECTION("integer-range(0,7) value 5") {
        auto space = ConfigSpace::create({Dimension::integer_range("x", 0, 7)});
        auto p = space->point_from_ordinals({space->dimensions()[0].ordinal_of_int(5)});
        REQUIRE(p.bits().to_string() == "101");
    }
    SECTION("out-of-range value names the dimension") {
        auto space = ConfigSpace::create({Dimension::integer_range("gain", 0, 7)});
        REQUIRE_THROWS_WITH(space->dimensions()[0].ordinal_of_int(9),
                            Catch::Matchers::ContainsSubstring("gain"));
    }
    SECTION("random round-trip over mixed dimensions") {
        auto space = ConfigSpace::create({Dimension::boolean("flag"),
                                          Dimension::integer_range("level", -3, 9),
                                          Dimension::quantized("ratio", 0.0, 1.0, 5),
                                          Dimension::integer_range("mode", 0, 2)});
        std::mt19937_64 rng(101);
        for (int trial = 0; trial < 1000; ++trial) {
            auto p = space->point_at(rng() % space->point_count());
            REQUIRE(decode(space, encode(p)) == p);
        }
    }
    SECTION("decode rejects codes naming no value") {
        auto space = ConfigSpace::create({Dimension::integer_range("mode", 0, 2)});
        REQUIRE_THROWS_AS(decode(space, BitVec::from_string("11")), RangeError);
    }
}

TEST_CASE("bit distance") {
    auto space = boolean_space(3);
    auto zero = space->point_from_ordinals({0, 0, 0});
    auto ones = space->point_from_ordinals({1, 1, 1});
    REQUIRE(bit_distance(zero, zero) == 0);
    REQUIRE(bit_distance(zero, ones) == 3);

    SECTION("space mismatch is rejected") {
        auto other = boolean_space(3);
        REQUIRE_THROWS_AS(bit_distance(zero, other->point_at(0)), SpaceMismatchError);
    }

    SECTION("random pairs against per-bit counting oracle") {
        auto big = ConfigSpace::create({Dimension::integer_range("a", 0, 12),
                                        Dimension::integer_range("b", 0, 6),
                                        Dimension::boolean("c")});
        std::mt19937_64 rng(7);
        for (int trial = 0; trial < 400; ++trial) {
            auto p = big->point_at(rng() % big->point_count());
            auto q = big->point_at(rng() % big->point_count());
            const auto pb = p.bits().to_string();
            const auto qb = q.bits().to_string();
            std::size_t expected = 0;
            for (std::size_t i = 0; i < pb.size(); ++i) {
                expected += pb[i] != qb[i] ? 1 : 0;
            }
            REQUIRE(bit_distance(p, q) == expected);
        }
    }

    SECTION("metric axioms, exhaustive on a 2^7 space") {
        auto small = boolean_space(7);
        const auto n = small->point_count();
        std::vector<BitVec> codes;
        for (std::uint64_t i = 0; i < n; ++i) {
            codes.push_back(small->point_at(i).bits());
        }
        for (std::uint64_t i = 0; i < n; ++i) {
            REQUIRE(hamming(codes[i], codes[i]) == 0);
            for (std::uint64_t j = i + 1; j < n; ++j) {
                const auto d = hamming(codes[i], codes[j]);
                REQUIRE(d > 0);
                REQUIRE(d == hamming(codes[j], codes[i]));
            }
        }
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 20000; ++trial) {
            const auto a = rng() % n;
            const auto b = rng() % n;
            const auto c = rng() % n;
            REQUIRE(hamming(codes[a], codes[c]) <=
                    hamming(codes[a], codes[b]) + hamming(codes[b], codes[c]));
        }
    }
}

TEST_CASE("hazard key") {
    SECTION("single pair equals bit distance") {
        LegalityMap legality;
        legality.blacklist = {7}; // 111
        auto space = boolean_space(3, legality);
        std::vector<std::uint64_t> l_subset = {0}; // 000
        REQUIRE(hazard_key(space, &l_subset) == 3);
    }
    SECTION("adjacent pair dominates the minimum") {
        LegalityMap legality;
        legality.blacklist = {7}; // 111
        auto space = boolean_space(3, legality);
        REQUIRE(hazard_key(space) == 1); // 011, 101, 110 are all legal
    }
    SECTION("empty N is reported distinctly from 0") {
        auto space = boolean_space(3);
        REQUIRE_THROWS_AS(hazard_key(space), NoHazardError);
    }
    SECTION("key is zero iff the provided L overlaps N") {
        LegalityMap legality;
        legality.blacklist = {5};
        auto space = boolean_space(3, legality);
        std::vector<std::uint64_t> overlapping = {5};
        REQUIRE(hazard_key(space, &overlapping) == 0);
    }
    SECTION("random spaces against the all-pairs oracle") {
        std::mt19937_64 rng(21);
        for (int trial = 0; trial < 30; ++trial) {
            const std::size_t nbits = 3 + trial % 4;
            LegalityMap legality;
            const std::uint64_t count = std::uint64_t{1} << nbits;
            for (std::uint64_t i = 0; i < count; ++i) {
                if (rng() % 3 == 0) {
                    legality.blacklist.insert(i);
                }
            }
            if (legality.blacklist.empty() || legality.blacklist.size() == count) {
                continue;
            }
            auto space = boolean_space(nbits, legality);
            std::size_t expected = SIZE_MAX;
            for (std::uint64_t l = 0; l < count; ++l) {
                if (!space->index_is_legal(l)) {
                    continue;
                }
                for (std::uint64_t n = 0; n < count; ++n) {
                    if (space->index_is_legal(n)) {
                        continue;
                    }
                    expected = std::min(
                        expected, hamming(space->point_at(l).bits(), space->point_at(n).bits()));
                }
            }
            REQUIRE(hazard_key(space) == expected);
        }
    }
    SECTION("stable under reorganization of L into sub-behaviors") {
        LegalityMap legality;
        legality.blacklist = {9, 12, 30};
        auto space = boolean_space(5, legality);
        std::vector<std::uint64_t> all_legal;
        for (std::uint64_t i = 0; i < space->point_count(); ++i) {
            if (space->index_is_legal(i)) {
                all_legal.push_back(i);
            }
        }
        std::vector<std::uint64_t> behavior_a(all_legal.begin(),
                                              all_legal.begin() + all_legal.size() / 2);
        std::vector<std::uint64_t> behavior_b(all_legal.begin() + all_legal.size() / 2,
                                              all_legal.end());
        const auto key_union = hazard_key(space, &all_legal);
        const auto key_min =
            std::min(hazard_key(space, &behavior_a), hazard_key(space, &behavior_b));
        REQUIRE(key_union == key_min);
    }
}

TEST_CASE("bridges and barriers") {
    SECTION("goal equals start") {
        auto space = boolean_space(4);
        auto p = space->point_at(3);
        auto report = detect_bridges_and_barriers(space, p, p, 1);
        REQUIRE(report.reachable);
        REQUIRE(report.path.size() == 1);
    }
    SECTION("unconstrained jump with budget >= width") {
        auto space = boolean_space(4);
        auto report = detect_bridges_and_barriers(space, space->point_at(0), space->point_at(15), 4);
        REQUIRE(report.reachable);
        REQUIRE(report.path.size() == 2);
        // With every point legal even single-bit steps connect the space.
        REQUIRE(report.min_budget == 1);
    }
    SECTION("island space separated by a 3-bit barrier") {
        // Legal: 00000 cluster {00000,00001} and 11100 cluster {11100,11101}.
        // Any transit flips the three leading bits at once.
        LegalityMap legality;
        legality.whitelist_mode = true;
        legality.whitelist = {0b00000, 0b00001, 0b11100, 0b11101};
        auto space = boolean_space(5, legality);
        auto start = space->point_at(0b00000);
        auto goal = space->point_at(0b11101);

        auto blocked = detect_bridges_and_barriers(space, start, goal, 2);
        REQUIRE_FALSE(blocked.reachable);
        REQUIRE(blocked.min_budget == 3);

        auto open = detect_bridges_and_barriers(space, start, goal, 3);
        REQUIRE(open.reachable);

        // Independent oracle: BFS over an explicitly constructed adjacency list.
        const std::vector<std::uint64_t> nodes = {0b00000, 0b00001, 0b11100, 0b11101};
        for (std::size_t budget = 1; budget <= 5; ++budget) {
            std::vector<std::vector<std::size_t>> adj(nodes.size());
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                for (std::size_t j = 0; j < nodes.size(); ++j) {
                    if (i != j && std::popcount(nodes[i] ^ nodes[j]) <= static_cast<int>(budget)) {
                        adj[i].push_back(j);
                    }
                }
            }
            std::vector<int> dist(nodes.size(), -1);
            std::vector<std::size_t> queue = {0};
            dist[0] = 0;
            for (std::size_t qi = 0; qi < queue.size(); ++qi) {
                for (auto next : adj[queue[qi]]) {
                    if (dist[next] < 0) {
                        dist[next] = dist[queue[qi]] + 1;
                        queue.push_back(next);
                    }
                }
            }
            const bool oracle_reachable = dist[3] >= 0;
            auto rep = detect_bridges_and_barriers(space, start, goal, budget);
            REQUIRE(rep.reachable == oracle_reachable);
            if (oracle_reachable) {
                REQUIRE(rep.path.size() == static_cast<std::size_t>(dist[3]) + 1);
            }
        }
    }
    SECTION("larger budget never lengthens the shortest path") {
        LegalityMap legality;
        legality.blacklist = {5, 6, 9, 17, 20};
        auto space = boolean_space(5, legality);
        auto start = space->point_at(0);
        auto goal = space->point_at(31);
        std::size_t previous = SIZE_MAX;
        for (std::size_t budget = 1; budget <= 5; ++budget) {
            auto rep = detect_bridges_and_barriers(space, start, goal, budget);
            if (rep.reachable) {
                REQUIRE(rep.path.size() <= previous);
                previous = rep.path.size();
            }
        }
    }
    SECTION("illegal start is a precondition error") {
        LegalityMap legality;
        legality.blacklist = {0};
        auto space = boolean_space(3, legality);
        REQUIRE_THROWS_AS(
            detect_bridges_and_barriers(space, space->point_at(0), space->point_at(1), 1),
            RangeError);
    }
}

TEST_CASE("polynomial encoder") {
    SECTION("zero polynomial") {
        auto p = encode_polynomial({0.0, 0.0, 0.0}, 0.0, 1.0, 4);
        REQUIRE(p.bits().to_string() == "000000");
    }
    SECTION("boundary coefficient hits the top level") {
        auto p = encode_polynomial({1.0}, 0.0, 1.0, 2);
        REQUIRE(p.ordinals() == std::vector<std::uint32_t>{1});
    }
    SECTION("out-of-range coefficient") {
        REQUIRE_THROWS_AS(encode_polynomial({2.5}, 0.0, 1.0, 8), RangeError);
    }
    SECTION("quantization error is at most half a step") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> coeff(-2.0, 2.0);
        for (int trial = 0; trial < 500; ++trial) {
            std::vector<double> cs = {coeff(rng), coeff(rng), coeff(rng)};
            auto p = encode_polynomial(cs, -2.0, 2.0, 33);
            auto back = decode_polynomial(p);
            const double step = 4.0 / 32.0;
            for (std::size_t i = 0; i < cs.size(); ++i) {
                REQUIRE(std::abs(back[i] - cs[i]) <= step / 2.0 + 1e-12);
            }
        }
    }
}

TEST_CASE("graph encoder") {
    SECTION("empty arc list leaves all relation bits clear") {
        GraphConfig g{.node_count = 3, .arc_type_count = 2, .arcs = {}, .attributes = {}};
        auto p = encode_graph(g);
        REQUIRE(p.bits().popcount() == 0);
        REQUIRE(p.space()->dimensions().size() == 3 * 3 * 2);
    }
    SECTION("single arc sets exactly the lexicographic bit") {
        GraphConfig g{.node_count = 2, .arc_type_count = 1, .arcs = {{0, 0, 1}}, .attributes = {}};
        auto p = encode_graph(g);
        REQUIRE(p.bits().to_string() == "0100");
    }
    SECTION("dangling endpoint") {
        GraphConfig g{.node_count = 2, .arc_type_count = 1, .arcs = {{0, 0, 5}}, .attributes = {}};
        REQUIRE_THROWS_AS(encode_graph(g), ReferenceError);
    }
    SECTION("adjacency round-trip on random small graphs") {
        std::mt19937_64 rng(31);
        for (int trial = 0; trial < 60; ++trial) {
            GraphConfig g;
            g.node_count = 2 + rng() % 5;
            g.arc_type_count = 1 + rng() % 3;
            std::set<GraphArc> arcs;
            const auto arc_count = rng() % 8;
            for (std::uint64_t a = 0; a < arc_count; ++a) {
                arcs.insert(GraphArc{static_cast<std::uint32_t>(rng() % g.arc_type_count),
                                     static_cast<std::uint32_t>(rng() % g.node_count),
                                     static_cast<std::uint32_t>(rng() % g.node_count)});
            }
            g.arcs.assign(arcs.begin(), arcs.end());
            auto decoded = decode_graph(encode_graph(g), g.node_count, g.arc_type_count);
            std::set<GraphArc> got(decoded.arcs.begin(), decoded.arcs.end());
            REQUIRE(got == arcs);
        }
    }
    SECTION("attributes ride along after relation dimensions") {
        GraphConfig g;
        g.node_count = 2;
        g.arc_type_count = 1;
        g.arcs = {{0, 1, 0}};
        g.attributes = {{"weight", 0, 3, {2, 1}}};
        auto p = encode_graph(g);
        REQUIRE(p.space()->dimensions().size() == 4 + 2);
        REQUIRE(p.ordinal(4) == 2);
        REQUIRE(p.ordinal(5) == 1);
    }
}

TEST_CASE("string encoder") {
    const std::string text = "a a b c b b a c c";
    SECTION("level 0 yields 9 character dimensions") {
        auto p = encode_string(text, 0);
        REQUIRE(p.space()->dimensions().size() == 9);
        REQUIRE(p.ordinal(0) == static_cast<std::uint32_t>('a'));
        REQUIRE(p.ordinal(3) == static_cast<std::uint32_t>('c'));
    }
    SECTION("level 1 with the three-token dictionary yields 3 dimensions") {
        auto p = encode_string(text, 1, {"a a b", "c b b", "a c c"});
        REQUIRE(p.space()->dimensions().size() == 3);
        REQUIRE(p.ordinals() == std::vector<std::uint32_t>{0, 1, 2});
    }
    SECTION("empty string yields a zero-dimension point") {
        auto p = encode_string("", 0);
        REQUIRE(p.space()->dimensions().empty());
        REQUIRE(p.bits().size() == 0);
    }
    SECTION("unknown token") {
        REQUIRE_THROWS_AS(encode_string("a a b z", 1, {"a a b"}), UnknownTokenError);
    }
}

TEST_CASE("input/output mapping redundancy") {
    auto space = boolean_space(3);
    SECTION("identity mapping has zero redundancy") {
        auto report = io_mapping_redundancy([](const ConfigPoint& p) { return p; }, space);
        REQUIRE(report.groups.empty());
        REQUIRE(report.redundant_fraction == 0.0);
    }
    SECTION("constant mapping groups all eight points") {
        auto constant = space->point_at(5);
        auto report =
            io_mapping_redundancy([&](const ConfigPoint&) { return constant; }, space);
        REQUIRE(report.groups.size() == 1);
        REQUIRE(report.groups[0].size() == 8);
        REQUIRE(report.redundant_fraction == Catch::Approx(7.0 / 8.0));
    }
    SECTION("random many-to-one mapping matches a hash-grouping oracle") {
        std::mt19937_64 rng(77);
        std::vector<std::uint64_t> image(space->point_count());
        for (auto& v : image) {
            v = rng() % 4;
        }
        auto mapping = [&](const ConfigPoint& p) { return space->point_at(image[p.index()]); };
        auto report = io_mapping_redundancy(mapping, space);

        std::map<std::uint64_t, std::vector<std::uint64_t>> oracle;
        for (std::uint64_t i = 0; i < space->point_count(); ++i) {
            oracle[image[i]].push_back(i);
        }
        std::size_t oracle_groups = 0;
        for (const auto& [out, members] : oracle) {
            if (members.size() > 1) {
                ++oracle_groups;
                bool found = false;
                for (const auto& group : report.groups) {
                    found = found || group == members;
                }
                REQUIRE(found);
            }
        }
        REQUIRE(report.groups.size() == oracle_groups);
    }
}
