#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "omegasim/errors.hpp"

namespace omegasim {

/// Fixed-length bit string. Bit 0 is the first (leftmost) bit of the
/// canonical encoding; multi-bit fields are stored most significant first.
class BitVec {
  public:
    BitVec() = default;

    explicit BitVec(std::size_t nbits) : nbits_(nbits), words_((nbits + 63) / 64, 0) {}

    static BitVec from_string(const std::string& s) {
        BitVec v(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '1') {
                v.set(i, true);
            } else if (s[i] != '0') {
                throw RangeError("bit string may contain only '0' and '1'");
            }
        }
        return v;
    }

    std::size_t size() const { return nbits_; }
    bool empty() const { return nbits_ == 0; }

    bool get(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1u; }

    void set(std::size_t i, bool bit) {
        const std::uint64_t mask = std::uint64_t{1} << (i % 64);
        if (bit) {
            words_[i / 64] |= mask;
        } else {
            words_[i / 64] &= ~mask;
        }
    }

    void flip(std::size_t i) { words_[i / 64] ^= std::uint64_t{1} << (i % 64); }

    /// Appends `width` bits of `value`, most significant bit first.
    void append_field(std::uint64_t value, unsigned width) {
        for (unsigned b = 0; b < width; ++b) {
            const bool bit = (value >> (width - 1 - b)) & 1u;
            nbits_ += 1;
            if ((nbits_ + 63) / 64 > words_.size()) {
                words_.push_back(0);
            }
            set(nbits_ - 1, bit);
        }
    }

    /// Reads `width` bits starting at `pos`, most significant bit first.
    std::uint64_t extract_field(std::size_t pos, unsigned width) const {
        std::uint64_t value = 0;
        for (unsigned b = 0; b < width; ++b) {
            value = (value << 1) | (get(pos + b) ? 1u : 0u);
        }
        return value;
    }

    std::size_t popcount() const {
        std::size_t n = 0;
        for (std::uint64_t w : words_) {
            n += static_cast<std::size_t>(std::popcount(w));
        }
        return n;
    }

    BitVec operator^(const BitVec& other) const {
        if (other.nbits_ != nbits_) {
            throw ShapeError("xor of bit strings of different lengths");
        }
        BitVec out(nbits_);
        for (std::size_t i = 0; i < words_.size(); ++i) {
            out.words_[i] = words_[i] ^ other.words_[i];
        }
        return out;
    }

    bool operator==(const BitVec& other) const = default;

    std::string to_string() const {
        std::string s(nbits_, '0');
        for (std::size_t i = 0; i < nbits_; ++i) {
            if (get(i)) {
                s[i] = '1';
            }
        }
        return s;
    }

    /// FNV-1a over the semantic bits; padding bits beyond size() never
    /// carry data so hashing whole words is stable.
    std::uint64_t hash() const {
        std::uint64_t h = 1469598103934665603ull;
        for (std::uint64_t w : words_) {
            for (int i = 0; i < 8; ++i) {
                h ^= (w >> (i * 8)) & 0xffu;
                h *= 1099511628211ull;
            }
        }
        return h ^ nbits_;
    }

    bool operator<(const BitVec& other) const {
        if (nbits_ != other.nbits_) {
            return nbits_ < other.nbits_;
        }
        for (std::size_t i = 0; i < nbits_; ++i) {
            const bool a = get(i);
            const bool b = other.get(i);
            if (a != b) {
                return b;
            }
        }
        return false;
    }

  private:
    std::size_t nbits_ = 0;
    std::vector<std::uint64_t> words_;
};

/// Hamming distance between equal-length bit strings.
inline std::size_t hamming(const BitVec& a, const BitVec& b) {
    return (a ^ b).popcount();
}

} // namespace omegasim
