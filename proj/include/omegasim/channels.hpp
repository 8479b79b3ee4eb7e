#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "omegasim/bitvec.hpp"
#include "omegasim/errors.hpp"

namespace omegasim {

enum class Channel { q, r, n, m };

inline const char* channel_name(Channel c) {
    switch (c) {
        case Channel::q: return "q";
        case Channel::r: return "r";
        case Channel::n: return "n";
        case Channel::m: return "m";
    }
    return "?";
}

/// The four links in bits per tick. s and a are measured information
/// rates between plant and environment, not capacities.
struct ChannelSet {
    double q = 1.0;
    double r = 1.0;
    double n = 1.0;
    double m = 1.0;
    double bit_error_rate = 0.0;
    bool duplex_repair = true;

    double rate(Channel c) const {
        switch (c) {
            case Channel::q: return q;
            case Channel::r: return r;
            case Channel::n: return n;
            case Channel::m: return m;
        }
        throw RangeError("unknown channel");
    }
};

struct PrioritySegment {
    std::uint64_t bits = 0;
    std::uint32_t priority = 1; // 1 = most important
};

struct TransferJob {
    Channel channel = Channel::m;
    std::uint64_t payload_bits = 0;
    std::vector<PrioritySegment> segments; // optional; bits must sum to payload

    void validate() const {
        if (!segments.empty()) {
            std::uint64_t sum = 0;
            for (const auto& s : segments) {
                sum += s.bits;
            }
            if (sum != payload_bits) {
                throw ShapeError("segment bits do not sum to the payload");
            }
        }
    }
};

/// Whole ticks to push `payload` bits through a channel; zero payload
/// costs nothing.
inline std::uint64_t transfer_time(std::uint64_t payload_bits, double rate) {
    if (rate <= 0.0) {
        throw RangeError("channel rate must be positive");
    }
    if (payload_bits == 0) {
        return 0;
    }
    return static_cast<std::uint64_t>(
        std::ceil(static_cast<double>(payload_bits) / rate - 1e-9));
}

inline std::uint64_t transfer_time(const TransferJob& job, const ChannelSet& set) {
    job.validate();
    return transfer_time(job.payload_bits, set.rate(job.channel));
}

/// Even fan-out over replicated channel instances.
inline std::uint64_t parallel_transfer_time(std::uint64_t payload_bits, double rate,
                                            std::uint64_t instances) {
    if (instances == 0) {
        throw RangeError("need at least one channel instance");
    }
    const std::uint64_t share = (payload_bits + instances - 1) / instances;
    return transfer_time(share, rate);
}

// --- Prioritized implementation ---------------------------------------------

struct SegmentCompletion {
    std::uint32_t priority = 0;
    std::uint64_t completed_tick = 0; // 1-based: done at the end of this tick
};

struct ServiceCurve {
    std::vector<double> mass_fraction; // entry t-1: serviced priority mass after tick t
    std::vector<SegmentCompletion> completions;
    std::uint64_t total_ticks = 0;
};

/// Services segments strictly by priority rank; the priority mass of a
/// segment is bits weighted by 1/rank, so the cumulative curve rises
/// steeply first and flattens out.
inline ServiceCurve prioritized_implement(const TransferJob& job, const ChannelSet& set) {
    job.validate();
    const double rate = set.rate(job.channel);
    if (rate <= 0.0) {
        throw RangeError("channel rate must be positive");
    }
    if (job.payload_bits == 0) {
        return ServiceCurve{};
    }
    std::vector<PrioritySegment> order = job.segments;
    if (order.empty()) {
        order.push_back(PrioritySegment{job.payload_bits, 1});
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const PrioritySegment& a, const PrioritySegment& b) {
                         return a.priority < b.priority;
                     });
    double total_mass = 0.0;
    for (const auto& s : order) {
        total_mass += static_cast<double>(s.bits) / s.priority;
    }
    ServiceCurve curve;
    double carried = 0.0; // bits available but unused this tick
    std::size_t at = 0;
    std::uint64_t remaining = order.empty() ? 0 : order[0].bits;
    double mass_done = 0.0;
    std::uint64_t tick = 0;
    while (at < order.size()) {
        ++tick;
        carried += rate;
        while (at < order.size() && static_cast<double>(remaining) <= carried + 1e-9) {
            carried -= static_cast<double>(remaining);
            mass_done += static_cast<double>(remaining) / order[at].priority;
            curve.completions.push_back(SegmentCompletion{order[at].priority, tick});
            ++at;
            remaining = at < order.size() ? order[at].bits : 0;
        }
        if (at < order.size()) {
            const auto served = static_cast<std::uint64_t>(carried);
            remaining -= served;
            mass_done += static_cast<double>(served) / order[at].priority;
            carried -= static_cast<double>(served);
        }
        curve.mass_fraction.push_back(total_mass == 0.0 ? 1.0 : mass_done / total_mass);
    }
    curve.total_ticks = tick;
    return curve;
}

// --- Transmission with errors -------------------------------------------------

inline constexpr std::size_t parity_block_bits = 64;
inline constexpr std::size_t parity_bits_per_block = 8;
inline constexpr unsigned transmit_retry_cap = 8;

namespace detail {

/// CRC-8 (AUTOSAR polynomial 0x2f): detects all 1-3 bit errors within a
/// 64+8 bit block.
inline std::uint8_t crc8(const BitVec& bits, std::size_t begin, std::size_t end) {
    std::uint8_t crc = 0xff;
    for (std::size_t i = begin; i < end; ++i) {
        crc ^= static_cast<std::uint8_t>(bits.get(i) ? 0x80 : 0x00);
        crc = static_cast<std::uint8_t>((crc & 0x80) ? (crc << 1) ^ 0x2f : (crc << 1));
    }
    return crc ^ 0xff;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Deterministic per-position noise in [0, 1). Counter-based so that a
/// higher error rate flips a pointwise superset of bits: raising the rate
/// can only add corruption, never rearrange it.
inline double unit_hash(std::uint64_t seed, std::uint64_t block, std::uint64_t attempt,
                        std::uint64_t position) {
    std::uint64_t h = splitmix64(seed ^ splitmix64(block));
    h = splitmix64(h ^ splitmix64(attempt));
    h = splitmix64(h ^ splitmix64(position));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

} // namespace detail

struct TransmitResult {
    BitVec received;
    std::uint64_t payload_bits = 0;     // first-pass data bits
    std::uint64_t redundancy_bits = 0;  // first-pass parity bits
    std::uint64_t rerequest_bits = 0;   // retransmitted data+parity bits
    std::uint64_t reverse_bits = 0;     // block addresses sent back over the duplex channel
    std::uint32_t repaired_blocks = 0;
    bool exact = false;
    std::uint64_t divergence_bits = 0;  // Hamming distance delivered vs intended

    std::uint64_t forward_bits_total() const {
        return payload_bits + redundancy_bits + rerequest_bits;
    }
};

/// Carries a payload over a noisy channel in 64-bit blocks with 8 parity
/// bits each. Corrupted blocks are detected by parity; with duplex repair
/// their indices are re-requested over the reverse channel until clean or
/// the retry cap trips.
inline TransmitResult transmit_with_errors(const BitVec& payload, const ChannelSet& set,
                                           std::uint64_t seed) {
    const std::size_t block_count =
        payload.size() == 0 ? 0 : (payload.size() + parity_block_bits - 1) / parity_block_bits;
    const std::size_t index_bits =
        block_count <= 1 ? 1 : std::bit_width(block_count - 1);

    TransmitResult result;
    result.payload_bits = payload.size();
    result.redundancy_bits = block_count * parity_bits_per_block;
    result.received = BitVec(payload.size());

    for (std::size_t b = 0; b < block_count; ++b) {
        const std::size_t begin = b * parity_block_bits;
        const std::size_t end = std::min(payload.size(), begin + parity_block_bits);
        const std::uint8_t sent_crc = detail::crc8(payload, begin, end);

        unsigned attempt = 0;
        while (true) {
            BitVec block(end - begin);
            for (std::size_t i = begin; i < end; ++i) {
                block.set(i - begin, payload.get(i));
            }
            if (set.bit_error_rate > 0.0) {
                for (std::size_t i = 0; i < block.size(); ++i) {
                    if (detail::unit_hash(seed, b, attempt, i) < set.bit_error_rate) {
                        block.flip(i);
                    }
                }
            }
            std::uint8_t crc_word = sent_crc;
            if (set.bit_error_rate > 0.0) {
                for (std::size_t i = 0; i < parity_bits_per_block; ++i) {
                    if (detail::unit_hash(seed, b, attempt, parity_block_bits + i) <
                        set.bit_error_rate) {
                        crc_word = static_cast<std::uint8_t>(crc_word ^ (1u << i));
                    }
                }
            }
            const bool clean = detail::crc8(block, 0, block.size()) == crc_word;
            if (clean || !set.duplex_repair) {
                for (std::size_t i = 0; i < block.size(); ++i) {
                    result.received.set(begin + i, block.get(i));
                }
                break;
            }
            ++attempt;
            if (attempt > transmit_retry_cap) {
                throw UnrecoverableTransferError("block " + std::to_string(b) +
                                                 " still corrupted after " +
                                                 std::to_string(transmit_retry_cap) + " retries");
            }
            result.repaired_blocks += attempt == 1 ? 1 : 0;
            result.reverse_bits += index_bits;
            result.rerequest_bits += (end - begin) + parity_bits_per_block;
        }
    }
    result.divergence_bits = hamming(result.received, payload);
    result.exact = result.divergence_bits == 0;
    return result;
}

// --- Monitoring (q) ------------------------------------------------------------

inline constexpr double kl_smoothing_epsilon = 1e-9;

/// Kullback-Leibler divergence KL(observed || predicted) in bits, with
/// additive smoothing and renormalization on both distributions.
inline double measure_q(const std::vector<double>& predicted,
                        const std::vector<double>& observed) {
    if (predicted.size() != observed.size() || predicted.empty()) {
        throw ShapeError("distributions must share a non-empty support");
    }
    auto normalize = [](const std::vector<double>& in) {
        std::vector<double> out(in.size());
        double sum = 0.0;
        for (double v : in) {
            if (v < 0.0 || !std::isfinite(v)) {
                throw RangeError("probabilities must be finite and non-negative");
            }
            sum += v + kl_smoothing_epsilon;
        }
        for (std::size_t i = 0; i < in.size(); ++i) {
            out[i] = (in[i] + kl_smoothing_epsilon) / sum;
        }
        return out;
    };
    const auto p = normalize(predicted);
    const auto o = normalize(observed);
    double divergence = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        divergence += o[i] * std::log2(o[i] / p[i]);
    }
    return std::max(divergence, 0.0);
}

struct QReport {
    std::vector<double> values; // quantized divergence per fragment, 0 when masked out
    std::uint64_t q_bits = 0;   // monitoring bits this report costs
};

/// Selective monitoring: only fragments flagged by the active
/// configuration's qr-map report, quantized to the configured resolution.
inline QReport qr_mask_filter(const std::vector<double>& fragment_divergences,
                              const std::vector<bool>& mask, unsigned resolution_bits,
                              double quantization_step) {
    if (fragment_divergences.size() != mask.size()) {
        throw ShapeError("qr mask length must equal the fragment count");
    }
    if (quantization_step <= 0.0) {
        throw RangeError("quantization step must be positive");
    }
    QReport report;
    report.values.resize(mask.size(), 0.0);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) {
            report.values[i] =
                std::round(fragment_divergences[i] / quantization_step) * quantization_step;
            report.q_bits += resolution_bits;
        }
    }
    return report;
}

} // namespace omegasim
