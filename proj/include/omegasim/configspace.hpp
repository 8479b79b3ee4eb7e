#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "omegasim/bitvec.hpp"
#include "omegasim/errors.hpp"

namespace omegasim {

enum class DimKind { boolean, integer_range, quantized_real };

/// One axis of a configuration space. The canonical encoding of a value is
/// its ordinal (0..cardinality-1) written as plain binary over bit_width()
/// bits, most significant bit first.
class Dimension {
  public:
    static Dimension boolean(std::string name) {
        Dimension d;
        d.name_ = std::move(name);
        d.kind_ = DimKind::boolean;
        d.card_ = 2;
        return d;
    }

    static Dimension integer_range(std::string name, std::int64_t lo, std::int64_t hi) {
        if (hi <= lo) {
            throw RangeError("dimension '" + name + "': integer range needs hi > lo");
        }
        Dimension d;
        d.name_ = std::move(name);
        d.kind_ = DimKind::integer_range;
        d.lo_i_ = lo;
        d.hi_i_ = hi;
        d.card_ = static_cast<std::uint64_t>(hi - lo) + 1;
        return d;
    }

    static Dimension quantized(std::string name, double lo, double hi, std::uint64_t levels) {
        if (levels < 2) {
            throw RangeError("dimension '" + name + "': quantized-real needs >= 2 levels");
        }
        if (!(hi > lo)) {
            throw RangeError("dimension '" + name + "': quantized-real needs hi > lo");
        }
        Dimension d;
        d.name_ = std::move(name);
        d.kind_ = DimKind::quantized_real;
        d.lo_r_ = lo;
        d.hi_r_ = hi;
        d.card_ = levels;
        return d;
    }

    const std::string& name() const { return name_; }
    DimKind kind() const { return kind_; }
    std::uint64_t cardinality() const { return card_; }

    /// ceil(log2(cardinality)); cardinality >= 2 so always >= 1.
    unsigned bit_width() const { return static_cast<unsigned>(std::bit_width(card_ - 1)); }

    std::int64_t int_lo() const { return lo_i_; }
    std::int64_t int_hi() const { return hi_i_; }
    double real_lo() const { return lo_r_; }
    double real_hi() const { return hi_r_; }

    double real_step() const { return (hi_r_ - lo_r_) / static_cast<double>(card_ - 1); }

    /// Ordinal of an integer value (boolean and integer-range kinds).
    std::uint32_t ordinal_of_int(std::int64_t v) const {
        if (kind_ == DimKind::boolean) {
            if (v != 0 && v != 1) {
                throw RangeError("dimension '" + name_ + "': boolean value must be 0 or 1");
            }
            return static_cast<std::uint32_t>(v);
        }
        if (kind_ != DimKind::integer_range || v < lo_i_ || v > hi_i_) {
            throw RangeError("dimension '" + name_ + "': value " + std::to_string(v) +
                             " out of range");
        }
        return static_cast<std::uint32_t>(v - lo_i_);
    }

    /// Ordinal of the nearest quantization level for a real value.
    std::uint32_t ordinal_of_real(double v) const {
        if (kind_ != DimKind::quantized_real || !std::isfinite(v) || v < lo_r_ || v > hi_r_) {
            throw RangeError("dimension '" + name_ + "': value out of quantization range");
        }
        const auto level = static_cast<std::uint64_t>(std::llround((v - lo_r_) / real_step()));
        return static_cast<std::uint32_t>(std::min(level, card_ - 1));
    }

    std::int64_t int_of_ordinal(std::uint32_t ord) const {
        return kind_ == DimKind::boolean ? static_cast<std::int64_t>(ord) : lo_i_ + ord;
    }

    double real_of_ordinal(std::uint32_t ord) const { return lo_r_ + ord * real_step(); }

    bool operator==(const Dimension&) const = default;

  private:
    std::string name_;
    DimKind kind_ = DimKind::boolean;
    std::int64_t lo_i_ = 0;
    std::int64_t hi_i_ = 0;
    double lo_r_ = 0.0;
    double hi_r_ = 0.0;
    std::uint64_t card_ = 2;
};

/// Conjunctive per-dimension interval (inclusive, in ordinals).
struct IntervalConstraint {
    std::size_t dim = 0;
    std::uint32_t lo_ord = 0;
    std::uint32_t hi_ord = 0;
};

/// Classifies every point of a space as legal (L) or illegal (N).
/// Interval constraints combine conjunctively; the blacklist removes
/// individual points; whitelist mode inverts the default to deny-all.
struct LegalityMap {
    std::vector<IntervalConstraint> constraints;
    std::set<std::uint64_t> blacklist;
    std::set<std::uint64_t> whitelist;
    bool whitelist_mode = false;
};

class ConfigPoint;

/// An immutable, totally ordered list of dimensions plus a legality map.
/// Points are addressed three ways: ordinal tuple, linear index
/// (mixed-radix over cardinalities) and canonical bit encoding.
class ConfigSpace : public std::enable_shared_from_this<ConfigSpace> {
  public:
    static std::shared_ptr<const ConfigSpace> create(std::vector<Dimension> dims,
                                                     LegalityMap legality = {}) {
        auto space = std::shared_ptr<ConfigSpace>(new ConfigSpace());
        space->dims_ = std::move(dims);
        space->legality_ = std::move(legality);
        space->total_bits_ = 0;
        space->count_ = 1;
        for (const auto& d : space->dims_) {
            space->total_bits_ += d.bit_width();
            if (!space->enumerable_ || space->count_ > (std::uint64_t{1} << 62) / d.cardinality()) {
                // Too many points to index linearly; the space stays usable
                // through ordinal tuples and bit encodings.
                space->enumerable_ = false;
                space->count_ = UINT64_MAX;
            } else {
                space->count_ *= d.cardinality();
            }
        }
        for (const auto& c : space->legality_.constraints) {
            if (c.dim >= space->dims_.size()) {
                throw RangeError("legality constraint names dimension index out of range");
            }
        }
        return space;
    }

    const std::vector<Dimension>& dimensions() const { return dims_; }
    std::size_t total_bits() const { return total_bits_; }
    bool enumerable() const { return enumerable_; }

    /// Saturates at UINT64_MAX when the space is too large to index.
    std::uint64_t point_count() const { return count_; }
    const LegalityMap& legality() const { return legality_; }

    ConfigPoint point_from_ordinals(std::vector<std::uint32_t> ords) const;
    ConfigPoint point_at(std::uint64_t index) const;

    std::uint64_t index_of_ordinals(const std::vector<std::uint32_t>& ords) const {
        if (!enumerable_) {
            throw CapacityError("space too large for linear point indexing");
        }
        std::uint64_t index = 0;
        for (std::size_t i = 0; i < dims_.size(); ++i) {
            index = index * dims_[i].cardinality() + ords[i];
        }
        return index;
    }

    std::vector<std::uint32_t> ordinals_at(std::uint64_t index) const {
        if (!enumerable_) {
            throw CapacityError("space too large for linear point indexing");
        }
        std::vector<std::uint32_t> ords(dims_.size(), 0);
        for (std::size_t i = dims_.size(); i-- > 0;) {
            ords[i] = static_cast<std::uint32_t>(index % dims_[i].cardinality());
            index /= dims_[i].cardinality();
        }
        return ords;
    }

    BitVec encode_ordinals(const std::vector<std::uint32_t>& ords) const {
        BitVec bits;
        for (std::size_t i = 0; i < dims_.size(); ++i) {
            bits.append_field(ords[i], dims_[i].bit_width());
        }
        return bits;
    }

    /// Decodes a canonical bit string; rejects codes naming nonexistent
    /// ordinals (cardinalities that are not powers of two leave gaps).
    std::vector<std::uint32_t> decode_bits(const BitVec& bits) const {
        if (bits.size() != total_bits_) {
            throw ShapeError("bit string length does not match space width");
        }
        std::vector<std::uint32_t> ords(dims_.size(), 0);
        std::size_t pos = 0;
        for (std::size_t i = 0; i < dims_.size(); ++i) {
            const auto field = bits.extract_field(pos, dims_[i].bit_width());
            if (field >= dims_[i].cardinality()) {
                throw RangeError("dimension '" + dims_[i].name() + "': code " +
                                 std::to_string(field) + " names no value");
            }
            ords[i] = static_cast<std::uint32_t>(field);
            pos += dims_[i].bit_width();
        }
        return ords;
    }

    bool index_is_legal(std::uint64_t index) const {
        if (legality_.whitelist_mode) {
            return legality_.whitelist.count(index) > 0;
        }
        if (legality_.blacklist.count(index) > 0) {
            return false;
        }
        if (!legality_.constraints.empty()) {
            const auto ords = ordinals_at(index);
            for (const auto& c : legality_.constraints) {
                if (ords[c.dim] < c.lo_ord || ords[c.dim] > c.hi_ord) {
                    return false;
                }
            }
        }
        return true;
    }

    bool same_as(const ConfigSpace& other) const { return this == &other; }

  private:
    ConfigSpace() = default;

    std::vector<Dimension> dims_;
    LegalityMap legality_;
    std::size_t total_bits_ = 0;
    std::uint64_t count_ = 1;
    bool enumerable_ = true;
};

using SpacePtr = std::shared_ptr<const ConfigSpace>;

/// A configuration: an ordered tuple of dimension values bound to its
/// space. Values are stored as ordinals; the canonical bit string is
/// derived on demand.
class ConfigPoint {
  public:
    ConfigPoint() = default;

    ConfigPoint(SpacePtr space, std::vector<std::uint32_t> ords)
        : space_(std::move(space)), ords_(std::move(ords)) {}

    const SpacePtr& space() const { return space_; }
    const std::vector<std::uint32_t>& ordinals() const { return ords_; }
    std::uint32_t ordinal(std::size_t dim) const { return ords_[dim]; }

    std::uint64_t index() const { return space_->index_of_ordinals(ords_); }
    BitVec bits() const { return space_->encode_ordinals(ords_); }
    bool legal() const { return space_->index_is_legal(index()); }

    bool operator==(const ConfigPoint& other) const {
        return space_.get() == other.space_.get() && ords_ == other.ords_;
    }

  private:
    SpacePtr space_;
    std::vector<std::uint32_t> ords_;
};

inline ConfigPoint ConfigSpace::point_from_ordinals(std::vector<std::uint32_t> ords) const {
    if (ords.size() != dims_.size()) {
        throw ShapeError("ordinal tuple arity does not match space");
    }
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (ords[i] >= dims_[i].cardinality()) {
            throw RangeError("dimension '" + dims_[i].name() + "': ordinal " +
                             std::to_string(ords[i]) + " out of range");
        }
    }
    return ConfigPoint(shared_from_this(), std::move(ords));
}

inline ConfigPoint ConfigSpace::point_at(std::uint64_t index) const {
    if (index >= count_) {
        throw RangeError("point index " + std::to_string(index) + " out of space");
    }
    return ConfigPoint(shared_from_this(), ordinals_at(index));
}

/// Canonical encoding: fixed-width concatenation of per-dimension binary
/// fields in dimension order.
inline BitVec encode(const ConfigPoint& p) { return p.bits(); }

inline ConfigPoint decode(const SpacePtr& space, const BitVec& bits) {
    return ConfigPoint(space, space->decode_bits(bits));
}

/// Hamming distance between canonical encodings, in bits.
inline std::size_t bit_distance(const ConfigPoint& a, const ConfigPoint& b) {
    if (a.space().get() != b.space().get()) {
        throw SpaceMismatchError("bit_distance across different spaces");
    }
    return hamming(a.bits(), b.bits());
}

struct AnalysisLimits {
    std::uint64_t enumeration_cap = std::uint64_t{1} << 20;
    std::size_t bridge_node_cap = 4096;
    unsigned hypercube_bits_cap = 24;
};

namespace detail {

/// Minimum Hamming distance between two nonempty sets of equal-width
/// encodings, via multi-source BFS over the full bit hypercube. Valid for
/// widths small enough to materialize 2^width visit flags.
inline std::size_t min_hamming_bfs(const std::vector<std::uint64_t>& from_codes,
                                   const std::vector<std::uint64_t>& to_codes, unsigned width) {
    const std::uint64_t volume = std::uint64_t{1} << width;
    std::vector<std::uint8_t> target(volume, 0);
    for (auto c : to_codes) {
        target[c] = 1;
    }
    std::vector<std::uint8_t> seen(volume, 0);
    std::deque<std::uint64_t> frontier;
    for (auto c : from_codes) {
        if (!seen[c]) {
            seen[c] = 1;
            frontier.push_back(c);
        }
    }
    std::size_t dist = 0;
    while (!frontier.empty()) {
        std::deque<std::uint64_t> next;
        for (auto c : frontier) {
            if (target[c]) {
                return dist;
            }
        }
        for (auto c : frontier) {
            for (unsigned b = 0; b < width; ++b) {
                const std::uint64_t n = c ^ (std::uint64_t{1} << b);
                if (!seen[n]) {
                    seen[n] = 1;
                    next.push_back(n);
                }
            }
        }
        frontier = std::move(next);
        ++dist;
    }
    return dist; // unreachable: the hypercube is connected
}

inline std::uint64_t code_of(const ConfigSpace& space, std::uint64_t index) {
    const BitVec bits = space.encode_ordinals(space.ordinals_at(index));
    return bits.size() == 0 ? 0 : bits.extract_field(0, static_cast<unsigned>(bits.size()));
}

} // namespace detail

/// Hazard key h_k: minimum bit distance between the legal set L (or the
/// provided subset of it) and the illegal set N. Throws NoHazardError when
/// N is empty, which is reported distinctly from a key of 0.
inline std::size_t hazard_key(const SpacePtr& space,
                              const std::vector<std::uint64_t>* l_subset = nullptr,
                              const AnalysisLimits& limits = {}) {
    if (space->point_count() > limits.enumeration_cap) {
        throw CapacityError("space too large for exhaustive hazard analysis; provide subsets");
    }
    std::vector<std::uint64_t> l_codes;
    std::vector<std::uint64_t> n_codes;
    const unsigned width = static_cast<unsigned>(space->total_bits());
    if (width > limits.hypercube_bits_cap) {
        throw CapacityError("space width exceeds hypercube cap for hazard analysis");
    }
    for (std::uint64_t i = 0; i < space->point_count(); ++i) {
        if (!space->index_is_legal(i)) {
            n_codes.push_back(detail::code_of(*space, i));
        }
    }
    if (l_subset != nullptr) {
        l_codes.reserve(l_subset->size());
        for (auto i : *l_subset) {
            l_codes.push_back(detail::code_of(*space, i));
        }
    } else {
        for (std::uint64_t i = 0; i < space->point_count(); ++i) {
            if (space->index_is_legal(i)) {
                l_codes.push_back(detail::code_of(*space, i));
            }
        }
    }
    if (n_codes.empty()) {
        throw NoHazardError("N is empty: hazard key undefined");
    }
    if (l_codes.empty()) {
        throw RangeError("hazard key needs a non-empty L set");
    }
    if (width == 0) {
        return 0;
    }
    return detail::min_hamming_bfs(n_codes, l_codes, width);
}

struct BridgeReport {
    bool reachable = false;
    std::vector<ConfigPoint> path;    // start..goal inclusive when reachable
    std::size_t min_budget = 0;       // smallest bits/step making goal reachable
};

namespace detail {

/// BFS over legal points with edges of Hamming length <= budget.
/// Returns the path (inclusive) or empty when unreachable.
inline std::vector<std::uint64_t> legal_bfs(const std::vector<std::uint64_t>& nodes,
                                            const std::vector<BitVec>& codes, std::size_t start_pos,
                                            std::size_t goal_pos, std::size_t budget) {
    std::vector<std::size_t> parent(nodes.size(), SIZE_MAX);
    std::vector<std::uint8_t> seen(nodes.size(), 0);
    std::deque<std::size_t> queue;
    seen[start_pos] = 1;
    queue.push_back(start_pos);
    while (!queue.empty()) {
        const std::size_t cur = queue.front();
        queue.pop_front();
        if (cur == goal_pos) {
            std::vector<std::uint64_t> path;
            for (std::size_t at = cur; at != SIZE_MAX; at = parent[at]) {
                path.push_back(nodes[at]);
            }
            std::reverse(path.begin(), path.end());
            return path;
        }
        for (std::size_t next = 0; next < nodes.size(); ++next) {
            if (!seen[next] && hamming(codes[cur], codes[next]) <= budget) {
                seen[next] = 1;
                parent[next] = cur;
                queue.push_back(next);
            }
        }
    }
    return {};
}

} // namespace detail

/// Searches for a reconfiguration corridor: nodes are legal points, edges
/// connect points whose encodings differ by at most step_budget bits.
inline BridgeReport detect_bridges_and_barriers(const SpacePtr& space, const ConfigPoint& start,
                                                const ConfigPoint& goal, std::size_t step_budget,
                                                const AnalysisLimits& limits = {}) {
    if (start.space().get() != space.get() || goal.space().get() != space.get()) {
        throw SpaceMismatchError("start/goal not in the analyzed space");
    }
    if (!start.legal() || !goal.legal()) {
        throw RangeError("bridge search requires legal start and goal");
    }
    std::vector<std::uint64_t> nodes;
    for (std::uint64_t i = 0; i < space->point_count(); ++i) {
        if (space->index_is_legal(i)) {
            nodes.push_back(i);
            if (nodes.size() > limits.bridge_node_cap) {
                throw CapacityError("legal set exceeds bridge node cap; analyze a subset");
            }
        }
    }
    std::vector<BitVec> codes;
    codes.reserve(nodes.size());
    std::size_t start_pos = 0;
    std::size_t goal_pos = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        codes.push_back(space->encode_ordinals(space->ordinals_at(nodes[i])));
        if (nodes[i] == start.index()) {
            start_pos = i;
        }
        if (nodes[i] == goal.index()) {
            goal_pos = i;
        }
    }

    BridgeReport report;
    auto run = [&](std::size_t budget) {
        return detail::legal_bfs(nodes, codes, start_pos, goal_pos, budget);
    };
    const auto path = run(step_budget);
    report.reachable = !path.empty();
    for (auto index : path) {
        report.path.push_back(space->point_at(index));
    }

    // Reachability is monotone in the budget: binary search the threshold.
    // At budget = total width the direct jump always exists.
    std::size_t lo = 1;
    std::size_t hi = space->total_bits() == 0 ? 1 : space->total_bits();
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (!run(mid).empty()) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    report.min_budget = lo;
    return report;
}

/// One quantized-real dimension per coefficient, highest order first.
/// None of the values is optional.
inline ConfigPoint encode_polynomial(const std::vector<double>& coefficients, double lo, double hi,
                                     std::uint64_t levels) {
    std::vector<Dimension> dims;
    dims.reserve(coefficients.size());
    for (std::size_t i = 0; i < coefficients.size(); ++i) {
        dims.push_back(
            Dimension::quantized("c" + std::to_string(coefficients.size() - 1 - i), lo, hi, levels));
    }
    auto space = ConfigSpace::create(std::move(dims));
    std::vector<std::uint32_t> ords;
    ords.reserve(coefficients.size());
    for (std::size_t i = 0; i < coefficients.size(); ++i) {
        ords.push_back(space->dimensions()[i].ordinal_of_real(coefficients[i]));
    }
    return ConfigPoint(space, std::move(ords));
}

inline std::vector<double> decode_polynomial(const ConfigPoint& p) {
    std::vector<double> coeffs;
    coeffs.reserve(p.ordinals().size());
    for (std::size_t i = 0; i < p.ordinals().size(); ++i) {
        coeffs.push_back(p.space()->dimensions()[i].real_of_ordinal(p.ordinal(i)));
    }
    return coeffs;
}

struct GraphArc {
    std::uint32_t type = 0;
    std::uint32_t from = 0;
    std::uint32_t to = 0;

    auto operator<=>(const GraphArc&) const = default;
};

struct GraphAttribute {
    std::string name;
    std::int64_t lo = 0;
    std::int64_t hi = 0;
    std::vector<std::int64_t> values; // one per node
};

struct GraphConfig {
    std::uint32_t node_count = 0;
    std::uint32_t arc_type_count = 0;
    std::vector<GraphArc> arcs;
    std::vector<GraphAttribute> attributes;
};

/// One boolean dimension per (type, from, to) triple in lexicographic
/// order, then one integer dimension per (attribute, node).
inline ConfigPoint encode_graph(const GraphConfig& g) {
    for (const auto& arc : g.arcs) {
        if (arc.from >= g.node_count || arc.to >= g.node_count || arc.type >= g.arc_type_count) {
            throw ReferenceError("arc references a nonexistent node or type");
        }
    }
    std::vector<Dimension> dims;
    for (std::uint32_t t = 0; t < g.arc_type_count; ++t) {
        for (std::uint32_t from = 0; from < g.node_count; ++from) {
            for (std::uint32_t to = 0; to < g.node_count; ++to) {
                dims.push_back(Dimension::boolean("arc" + std::to_string(t) + "_" +
                                                  std::to_string(from) + "_" + std::to_string(to)));
            }
        }
    }
    for (const auto& attr : g.attributes) {
        if (attr.values.size() != g.node_count) {
            throw ShapeError("attribute '" + attr.name + "' must list one value per node");
        }
        for (std::uint32_t n = 0; n < g.node_count; ++n) {
            dims.push_back(
                Dimension::integer_range(attr.name + "_" + std::to_string(n), attr.lo, attr.hi));
        }
    }
    auto space = ConfigSpace::create(std::move(dims));
    std::vector<std::uint32_t> ords(space->dimensions().size(), 0);
    const std::uint64_t per_type = std::uint64_t{g.node_count} * g.node_count;
    for (const auto& arc : g.arcs) {
        ords[arc.type * per_type + std::uint64_t{arc.from} * g.node_count + arc.to] = 1;
    }
    std::size_t base = g.arc_type_count * per_type;
    for (const auto& attr : g.attributes) {
        for (std::uint32_t n = 0; n < g.node_count; ++n) {
            ords[base + n] = space->dimensions()[base + n].ordinal_of_int(attr.values[n]);
        }
        base += g.node_count;
    }
    return ConfigPoint(space, std::move(ords));
}

/// Reconstructs the arc set (and attribute values, using the dimension
/// layout implied by node/type counts) from an encoded graph point.
inline GraphConfig decode_graph(const ConfigPoint& p, std::uint32_t node_count,
                                std::uint32_t arc_type_count) {
    GraphConfig g;
    g.node_count = node_count;
    g.arc_type_count = arc_type_count;
    const std::uint64_t per_type = std::uint64_t{node_count} * node_count;
    for (std::uint32_t t = 0; t < arc_type_count; ++t) {
        for (std::uint32_t from = 0; from < node_count; ++from) {
            for (std::uint32_t to = 0; to < node_count; ++to) {
                if (p.ordinal(t * per_type + std::uint64_t{from} * node_count + to) != 0) {
                    g.arcs.push_back(GraphArc{t, from, to});
                }
            }
        }
    }
    return g;
}

/// Level 0: one dimension per character, whitespace stripped. Level 1: one
/// dimension per dictionary token occurrence, matched greedily left to
/// right (longest token first).
inline ConfigPoint encode_string(const std::string& s, int level,
                                 const std::vector<std::string>& dictionary = {}) {
    std::vector<Dimension> dims;
    std::vector<std::uint32_t> ords;
    if (level == 0) {
        std::string stripped;
        for (char c : s) {
            if (!std::isspace(static_cast<unsigned char>(c))) {
                stripped.push_back(c);
            }
        }
        for (std::size_t i = 0; i < stripped.size(); ++i) {
            dims.push_back(Dimension::integer_range("ch" + std::to_string(i), 0, 255));
            ords.push_back(static_cast<std::uint32_t>(static_cast<unsigned char>(stripped[i])));
        }
    } else if (level == 1) {
        if (dictionary.empty()) {
            throw UnknownTokenError("level-1 interpretation requires a dictionary");
        }
        std::vector<std::size_t> by_length(dictionary.size());
        for (std::size_t i = 0; i < dictionary.size(); ++i) {
            by_length[i] = i;
        }
        std::stable_sort(by_length.begin(), by_length.end(), [&](std::size_t a, std::size_t b) {
            return dictionary[a].size() > dictionary[b].size();
        });
        const std::int64_t max_ord =
            std::max<std::int64_t>(1, static_cast<std::int64_t>(dictionary.size()) - 1);
        std::size_t pos = 0;
        std::size_t token_index = 0;
        while (pos < s.size()) {
            if (std::isspace(static_cast<unsigned char>(s[pos]))) {
                ++pos;
                continue;
            }
            bool matched = false;
            for (auto ti : by_length) {
                const auto& tok = dictionary[ti];
                if (!tok.empty() && s.compare(pos, tok.size(), tok) == 0) {
                    dims.push_back(
                        Dimension::integer_range("tok" + std::to_string(token_index), 0, max_ord));
                    ords.push_back(static_cast<std::uint32_t>(ti));
                    pos += tok.size();
                    ++token_index;
                    matched = true;
                    break;
                }
            }
            if (!matched) {
                throw UnknownTokenError("no dictionary token matches at position " +
                                        std::to_string(pos));
            }
        }
    } else {
        throw RangeError("string interpretation level must be 0 or 1");
    }
    auto space = ConfigSpace::create(std::move(dims));
    return ConfigPoint(space, std::move(ords));
}

struct RedundancyReport {
    std::vector<std::vector<std::uint64_t>> groups; // input indices sharing one output, size > 1
    double redundant_fraction = 0.0;
};

/// Groups input points by identical output point and reports isolines.
inline RedundancyReport io_mapping_redundancy(
    const std::function<ConfigPoint(const ConfigPoint&)>& mapping, const SpacePtr& input_space,
    const AnalysisLimits& limits = {}) {
    if (input_space->point_count() > limits.enumeration_cap) {
        throw CapacityError("input space too large to enumerate");
    }
    std::map<std::string, std::size_t> first_seen;
    std::vector<std::vector<std::uint64_t>> all_groups;
    for (std::uint64_t i = 0; i < input_space->point_count(); ++i) {
        const auto out = mapping(input_space->point_at(i));
        const auto key = out.bits().to_string();
        auto it = first_seen.find(key);
        if (it == first_seen.end()) {
            first_seen.emplace(key, all_groups.size());
            all_groups.push_back({i});
        } else {
            all_groups[it->second].push_back(i);
        }
    }
    RedundancyReport report;
    std::uint64_t redundant = 0;
    for (auto& group : all_groups) {
        if (group.size() > 1) {
            redundant += group.size() - 1;
            report.groups.push_back(std::move(group));
        }
    }
    report.redundant_fraction =
        input_space->point_count() == 0
            ? 0.0
            : static_cast<double>(redundant) / static_cast<double>(input_space->point_count());
    return report;
}

/// Hazard metrics bundle (Eq. 8-10 quantities).
struct SafetyMetrics {
    std::optional<std::size_t> h_k;  // hazard key over the plant space
    std::optional<std::size_t> h_kp; // hazard key over the hybrid plant x environment space
    double reliability = 0.0;        // R
    std::optional<double> product_safety; // S = h_kp * R
};

} // namespace omegasim
