#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "omegasim/bitvec.hpp"
#include "omegasim/errors.hpp"

namespace omegasim {

enum class PatternKind { full, fragment };

struct StoredPattern {
    std::uint32_t address = 0;
    BitVec bits;
    std::optional<std::uint32_t> cluster;
    PatternKind kind = PatternKind::full;
};

struct RetrievalResult {
    const StoredPattern* pattern = nullptr;
    std::size_t address_cost_bits = 0;
};

/// Distinguishes relative in-cluster hops from absolute selections. One
/// flag bit is always paid to signal the mode, so the total never exceeds
/// the absolute cost plus one.
struct AddressCost {
    bool relative = false;
    std::size_t payload_bits = 0;
    std::size_t flag_bits = 1;

    std::size_t total() const { return payload_bits + flag_bits; }
};

/// A fragment spliced into a target bit range; the fragment's stored
/// length defines the range width.
struct FragmentRef {
    std::uint32_t address = 0;
    std::size_t offset = 0;
};

struct AssemblyRule {
    std::string name;
    std::size_t total_bits = 0;
    bool default_bit = false;
    std::vector<FragmentRef> fragments;
};

/// The pattern repository: addressed bit patterns, contextual clusters for
/// relative addressing, assembly rules and trigger associations for
/// memory-based planning. Copy-on-write: mutating operations return or
/// build new instances, reads are shareable.
class Repository {
  public:
    void add_pattern(std::uint32_t address, BitVec bits, PatternKind kind = PatternKind::full) {
        if (patterns_.count(address) > 0) {
            throw ConflictError("pattern address " + std::to_string(address) + " already stored");
        }
        patterns_.emplace(address, StoredPattern{address, std::move(bits), std::nullopt, kind});
    }

    bool has_pattern(std::uint32_t address) const { return patterns_.count(address) > 0; }
    std::size_t pattern_count() const { return patterns_.size(); }

    const std::map<std::uint32_t, StoredPattern>& patterns() const { return patterns_; }

    /// Bits needed to select one pattern: ceil(log2(pattern count)).
    std::size_t address_bits() const {
        return patterns_.empty() ? 0 : std::bit_width(patterns_.size() - 1);
    }

    const StoredPattern& pattern(std::uint32_t address) const {
        const auto it = patterns_.find(address);
        if (it == patterns_.end()) {
            throw NotFoundError("no pattern at address " + std::to_string(address));
        }
        return it->second;
    }

    RetrievalResult retrieve(std::uint32_t address) const {
        return RetrievalResult{&pattern(address), address_bits()};
    }

    /// Installs a cluster (ordered member list). Members must exist.
    void set_cluster(std::uint32_t cluster_id, const std::vector<std::uint32_t>& members) {
        for (auto address : members) {
            pattern(address); // existence check
        }
        clusters_[cluster_id] = members;
        for (auto address : members) {
            patterns_.at(address).cluster = cluster_id;
        }
    }

    const std::map<std::uint32_t, std::vector<std::uint32_t>>& clusters() const {
        return clusters_;
    }

    void clear_clusters() {
        clusters_.clear();
        for (auto& [address, pattern] : patterns_) {
            pattern.cluster = std::nullopt;
        }
    }

    /// Cost of naming `to` when `from` is the current position: the rank
    /// distance inside a shared cluster when that is cheaper, otherwise
    /// the absolute address.
    AddressCost relative_address(std::uint32_t from, std::uint32_t to) const {
        const auto& pf = pattern(from);
        const auto& pt = pattern(to);
        AddressCost absolute{false, address_bits(), 1};
        if (!pf.cluster || pf.cluster != pt.cluster) {
            return absolute;
        }
        const auto& order = clusters_.at(*pf.cluster);
        const auto rank_of = [&order](std::uint32_t address) {
            return static_cast<std::size_t>(
                std::find(order.begin(), order.end(), address) - order.begin());
        };
        const std::size_t rf = rank_of(from);
        const std::size_t rt = rank_of(to);
        const std::size_t distance = rf > rt ? rf - rt : rt - rf;
        const std::size_t relative_bits = std::bit_width(distance);
        if (relative_bits >= absolute.payload_bits) {
            return absolute;
        }
        return AddressCost{true, relative_bits, 1};
    }

    // Trigger-signature associations for memory-based configuration.
    void associate(BitVec signature, std::uint32_t address) {
        pattern(address);
        associations_.emplace_back(std::move(signature), address);
    }

    struct MemoryHit {
        std::uint32_t address = 0;
        bool exact = false;
    };

    /// Nearest stored signature by bit distance; ties resolve to the
    /// lowest address.
    MemoryHit recall(const BitVec& trigger) const {
        if (associations_.empty()) {
            throw NoMemoryError("no trigger associations stored");
        }
        std::size_t best_distance = SIZE_MAX;
        std::uint32_t best_address = 0;
        for (const auto& [signature, address] : associations_) {
            if (signature.size() != trigger.size()) {
                continue;
            }
            const auto d = hamming(signature, trigger);
            if (d < best_distance || (d == best_distance && address < best_address)) {
                best_distance = d;
                best_address = address;
            }
        }
        if (best_distance == SIZE_MAX) {
            throw ShapeError("trigger width matches no stored signature");
        }
        return MemoryHit{best_address, best_distance == 0};
    }

    std::size_t association_count() const { return associations_.size(); }

    const std::vector<std::pair<BitVec, std::uint32_t>>& associations() const {
        return associations_;
    }

    void add_rule(AssemblyRule rule) { rules_[rule.name] = std::move(rule); }

    const AssemblyRule& rule(const std::string& name) const {
        const auto it = rules_.find(name);
        if (it == rules_.end()) {
            throw NotFoundError("no assembly rule '" + name + "'");
        }
        return it->second;
    }

    const std::map<std::string, AssemblyRule>& rules() const { return rules_; }

  private:
    std::map<std::uint32_t, StoredPattern> patterns_;
    std::map<std::uint32_t, std::vector<std::uint32_t>> clusters_;
    std::vector<std::pair<BitVec, std::uint32_t>> associations_;
    std::map<std::string, AssemblyRule> rules_;
};

// --- Delta encoding ----------------------------------------------------------

struct Delta {
    std::uint32_t base_address = 0;
    std::vector<std::size_t> positions; // sorted indices of changed bits
    BitVec values;                      // new bit per listed position

    /// Transport size: each entry names a position and carries one bit.
    std::size_t payload_bits(std::size_t pattern_length) const {
        const std::size_t position_width =
            pattern_length <= 1 ? 1 : std::bit_width(pattern_length - 1);
        return positions.size() * (position_width + 1);
    }
};

inline Delta delta_encode(const BitVec& old_bits, const BitVec& new_bits) {
    if (old_bits.size() != new_bits.size()) {
        throw ShapeError("delta endpoints must have equal length");
    }
    Delta delta;
    for (std::size_t i = 0; i < old_bits.size(); ++i) {
        if (old_bits.get(i) != new_bits.get(i)) {
            delta.positions.push_back(i);
        }
    }
    delta.values = BitVec(delta.positions.size());
    for (std::size_t k = 0; k < delta.positions.size(); ++k) {
        delta.values.set(k, new_bits.get(delta.positions[k]));
    }
    return delta;
}

inline BitVec apply_delta(const Delta& delta, const BitVec& base) {
    BitVec out = base;
    for (std::size_t k = 0; k < delta.positions.size(); ++k) {
        if (delta.positions[k] >= base.size()) {
            throw ShapeError("delta position beyond pattern length");
        }
        out.set(delta.positions[k], delta.values.get(k));
    }
    return out;
}

// --- Compression -------------------------------------------------------------
//
// Stream layout, reference codec:
//   [1]   repairable flag
//   [14]  original length (patterns cap at 16383 bits)
//   [1]   body codec: 0 = raw, 1 = run-length
//   [8]   mask tag (repairable only; FNV tag of the coverage mask)
//   body  raw bits, or first-bit + Elias-gamma run lengths

enum class CompressMode { lossless, repairable };

namespace detail {

inline void gamma_append(BitVec& out, std::uint64_t n) {
    const unsigned width = static_cast<unsigned>(std::bit_width(n));
    for (unsigned i = 1; i < width; ++i) {
        out.append_field(0, 1);
    }
    out.append_field(n, width);
}

inline std::uint64_t gamma_read(const BitVec& in, std::size_t& pos) {
    unsigned zeros = 0;
    while (!in.get(pos)) {
        ++zeros;
        ++pos;
    }
    const auto value = in.extract_field(pos, zeros + 1);
    pos += zeros + 1;
    return value;
}

inline BitVec rle_body(const BitVec& bits) {
    BitVec body;
    body.append_field(bits.get(0) ? 1 : 0, 1);
    std::size_t run_start = 0;
    for (std::size_t i = 1; i <= bits.size(); ++i) {
        if (i == bits.size() || bits.get(i) != bits.get(run_start)) {
            gamma_append(body, i - run_start);
            run_start = i;
        }
    }
    return body;
}

inline std::uint8_t mask_tag(const BitVec& mask) {
    return static_cast<std::uint8_t>(mask.hash() & 0xffu);
}

} // namespace detail

inline constexpr std::size_t compress_length_cap = (std::size_t{1} << 14) - 1;

/// Reference codec. Lossless mode round-trips exactly; repairable mode
/// drops the bits covered by the corrective-field mask and tags the
/// stream so decompression can verify it gets the same mask back.
inline BitVec compress(const BitVec& pattern, CompressMode mode,
                       const BitVec* coverage_mask = nullptr) {
    if (pattern.size() > compress_length_cap) {
        throw CapacityError("pattern exceeds the 16383-bit codec cap");
    }
    if (mode == CompressMode::repairable &&
        (coverage_mask == nullptr || coverage_mask->size() != pattern.size())) {
        throw MissingMaskError("repairable compression needs a coverage mask of pattern length");
    }
    BitVec payload;
    if (mode == CompressMode::repairable) {
        for (std::size_t i = 0; i < pattern.size(); ++i) {
            if (!coverage_mask->get(i)) {
                payload.append_field(pattern.get(i) ? 1 : 0, 1);
            }
        }
    } else {
        payload = pattern;
    }

    BitVec out;
    out.append_field(mode == CompressMode::repairable ? 1 : 0, 1);
    out.append_field(pattern.size(), 14);
    const BitVec rle = payload.size() == 0 ? BitVec() : detail::rle_body(payload);
    const bool use_rle = payload.size() > 0 && rle.size() < payload.size();
    out.append_field(use_rle ? 1 : 0, 1);
    if (mode == CompressMode::repairable) {
        out.append_field(detail::mask_tag(*coverage_mask), 8);
    }
    const BitVec& body = use_rle ? rle : payload;
    for (std::size_t i = 0; i < body.size(); ++i) {
        out.append_field(body.get(i) ? 1 : 0, 1);
    }
    return out;
}

/// Inverse of compress. Repairable streams restore dropped positions with
/// 0, the default the corrective field repairs from.
inline BitVec decompress(const BitVec& stream, const BitVec* coverage_mask = nullptr) {
    std::size_t pos = 0;
    const bool repairable = stream.get(pos);
    pos += 1;
    const auto length = static_cast<std::size_t>(stream.extract_field(pos, 14));
    pos += 14;
    const bool use_rle = stream.get(pos);
    pos += 1;
    if (repairable) {
        if (coverage_mask == nullptr || coverage_mask->size() != length) {
            throw MissingMaskError("repairable stream needs its coverage mask to decompress");
        }
        const auto tag = static_cast<std::uint8_t>(stream.extract_field(pos, 8));
        pos += 8;
        if (tag != detail::mask_tag(*coverage_mask)) {
            throw MissingMaskError("coverage mask does not match the stream tag");
        }
    }
    const std::size_t payload_len =
        repairable ? length - coverage_mask->popcount() : length;
    BitVec payload(payload_len);
    if (use_rle) {
        std::size_t at = 0;
        const bool first = stream.get(pos);
        pos += 1;
        bool value = first;
        while (at < payload_len) {
            const auto run = detail::gamma_read(stream, pos);
            for (std::uint64_t i = 0; i < run; ++i) {
                payload.set(at++, value);
            }
            value = !value;
        }
    } else {
        for (std::size_t i = 0; i < payload_len; ++i) {
            payload.set(i, stream.get(pos + i));
        }
    }
    if (!repairable) {
        return payload;
    }
    BitVec out(length);
    std::size_t taken = 0;
    for (std::size_t i = 0; i < length; ++i) {
        out.set(i, coverage_mask->get(i) ? false : payload.get(taken++));
    }
    return out;
}

// --- Assembly ----------------------------------------------------------------

/// Splices the rule's fragments into one pattern. Fragments must cover
/// disjoint ranges; uncovered positions take the declared default.
inline BitVec assemble(const Repository& repo, const AssemblyRule& rule) {
    BitVec out(rule.total_bits);
    if (rule.default_bit) {
        for (std::size_t i = 0; i < rule.total_bits; ++i) {
            out.set(i, true);
        }
    }
    std::vector<std::pair<std::size_t, std::size_t>> ranges; // (begin, end)
    for (const auto& ref : rule.fragments) {
        const auto& frag = repo.pattern(ref.address);
        const std::size_t begin = ref.offset;
        const std::size_t end = ref.offset + frag.bits.size();
        if (end > rule.total_bits) {
            throw ShapeError("fragment at address " + std::to_string(ref.address) +
                             " exceeds the assembled length");
        }
        for (const auto& [b, e] : ranges) {
            if (begin < e && b < end) {
                throw ConflictError("fragments overlap in [" + std::to_string(std::max(b, begin)) +
                                    ", " + std::to_string(std::min(e, end)) + ")");
            }
        }
        ranges.emplace_back(begin, end);
        for (std::size_t i = 0; i < frag.bits.size(); ++i) {
            out.set(begin + i, frag.bits.get(i));
        }
    }
    return out;
}

// --- Reclustering ------------------------------------------------------------

/// Greedy agglomerative grouping over the co-access graph. Merges are
/// accepted while they increase the weighted modularity of the grouping;
/// pure within-count maximization would collapse everything into one
/// cluster, so the degree term acts as the stopping rule. Ties resolve to
/// the merge containing the lowest address. Cluster ranks order members
/// by co-access frequency, then address.
inline Repository recluster(const Repository& repo,
                            const std::vector<std::pair<std::uint32_t, std::uint32_t>>& log) {
    Repository out = repo;
    if (log.empty()) {
        return out;
    }
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> weight;
    std::map<std::uint32_t, double> degree;
    double total = 0.0;
    for (auto [a, b] : log) {
        out.pattern(a);
        out.pattern(b);
        if (a == b) {
            continue;
        }
        const auto key = std::minmax(a, b);
        weight[{key.first, key.second}] += 1.0;
        degree[a] += 1.0;
        degree[b] += 1.0;
        total += 1.0;
    }
    if (total == 0.0) {
        return out;
    }
    out.clear_clusters();

    // Clusters as sorted member lists; only accessed addresses take part.
    std::vector<std::vector<std::uint32_t>> groups;
    std::map<std::uint32_t, std::size_t> where;
    for (const auto& [address, deg] : degree) {
        where[address] = groups.size();
        groups.push_back({address});
    }
    auto cross_weight = [&](const std::vector<std::uint32_t>& a,
                            const std::vector<std::uint32_t>& b) {
        double w = 0.0;
        for (auto x : a) {
            for (auto y : b) {
                const auto key = std::minmax(x, y);
                const auto it = weight.find({key.first, key.second});
                if (it != weight.end()) {
                    w += it->second;
                }
            }
        }
        return w;
    };
    auto group_degree = [&](const std::vector<std::uint32_t>& g) {
        double d = 0.0;
        for (auto x : g) {
            d += degree.at(x);
        }
        return d;
    };

    while (groups.size() > 1) {
        double best_gain = 0.0;
        std::size_t best_a = SIZE_MAX;
        std::size_t best_b = SIZE_MAX;
        for (std::size_t i = 0; i < groups.size(); ++i) {
            for (std::size_t j = i + 1; j < groups.size(); ++j) {
                const double w = cross_weight(groups[i], groups[j]);
                if (w <= 0.0) {
                    continue;
                }
                const double gain =
                    w / total - group_degree(groups[i]) * group_degree(groups[j]) /
                                    (2.0 * total * total);
                const bool better =
                    gain > best_gain + 1e-12 ||
                    (gain > best_gain - 1e-12 && best_a != SIZE_MAX &&
                     std::min(groups[i][0], groups[j][0]) < std::min(groups[best_a][0],
                                                                     groups[best_b][0]));
                if (better) {
                    best_gain = gain;
                    best_a = i;
                    best_b = j;
                }
            }
        }
        if (best_a == SIZE_MAX || best_gain <= 0.0) {
            break;
        }
        auto merged = groups[best_a];
        merged.insert(merged.end(), groups[best_b].begin(), groups[best_b].end());
        std::sort(merged.begin(), merged.end());
        groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(best_b));
        groups[best_a] = std::move(merged);
    }

    std::sort(groups.begin(), groups.end());
    std::uint32_t next_id = 0;
    for (const auto& group : groups) {
        std::vector<std::uint32_t> ordered = group;
        std::stable_sort(ordered.begin(), ordered.end(),
                         [&](std::uint32_t a, std::uint32_t b) {
                             if (degree.at(a) != degree.at(b)) {
                                 return degree.at(a) > degree.at(b);
                             }
                             return a < b;
                         });
        out.set_cluster(next_id++, ordered);
    }
    return out;
}

} // namespace omegasim
