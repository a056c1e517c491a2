#pragma once
#include <array>
#include <cstdint>
#include <vector>

namespace mfl {

// Counter-based RNG: Philox4x32-10.  Every stream is a pure function of
// (master_seed, replica_index, domain), so replica scheduling and thread count
// can never change a trajectory.
//
// Counter layout per 128-bit block:
//   word0, word1 : 64-bit block index within the stream
//   word2        : domain tag (which kind of randomness)
//   word3        : replica index
// Key = master_seed split into two 32-bit words.
struct Philox4x32 {
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key);
};

// Domain tags keep independent uses of randomness on disjoint counters.
enum class RngDomain : std::uint32_t {
    init_position = 1,
    init_velocity = 2,
    init_latent = 3,
    noise = 4,
    features = 5,
    verify_pick = 6,
};

struct RngLineage {
    std::uint64_t master_seed = 0;
    std::uint32_t replica_index = 0;
};

// One replica-and-domain stream of N(0,1) variates (Box-Muller over 53-bit
// uniforms).  Consumption order within a stream is part of the determinism
// contract; callers draw in a fixed order.
class NormalStream {
  public:
    NormalStream(RngLineage lineage, RngDomain domain);

    double next();
    void fill(double* out, std::size_t n);
    void fill(std::vector<double>& out) { fill(out.data(), out.size()); }

    // Uniform in (0,1), 53-bit.  Consumes from the same counter sequence.
    double next_uniform();

  private:
    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> ctr_;
    double cached_ = 0.0;
    bool has_cached_ = false;

    std::array<std::uint32_t, 4> next_block();
};

}  // namespace mfl
