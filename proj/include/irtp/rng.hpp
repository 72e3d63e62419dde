#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace irtp {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Each
// (key, stream) pair is an independent sequence; the block counter occupies
// the low 64 bits of the counter and the stream id the high 64 bits.
// Satisfies UniformRandomBitGenerator.
class Philox4x32 {
public:
    using result_type = std::uint32_t;
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    Philox4x32(std::uint64_t key, std::uint64_t stream);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();

    // The raw bijection, exposed for known-answer tests.
    static Block encrypt(Block counter, Key key);

private:
    Key key_;
    Block counter_;
    Block buffer_{};
    int used_ = 4;
};

enum class StreamPurpose : std::uint32_t {
    kItemParams = 1,
    kResponses = 2,
    kOracle = 3,
};

// Generator for one (seed, condition, replication, purpose) cell of a study.
Philox4x32 make_stream(std::uint64_t seed, std::uint32_t condition, std::uint32_t replication,
                       StreamPurpose purpose);

}  // namespace irtp
