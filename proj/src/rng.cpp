#include "mfl/rng.hpp"

#include <cmath>

namespace mfl {

namespace {

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline void philox_round(std::array<std::uint32_t, 4>& c, const std::array<std::uint32_t, 2>& k) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(Philox4x32::kMul0, c[0], hi0, lo0);
    mulhilo(Philox4x32::kMul1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

// Two 32-bit words -> one double uniform in (0,1) with 53 random bits.
inline double u53(std::uint32_t a, std::uint32_t b) {
    std::uint64_t r = (static_cast<std::uint64_t>(b) << 32) | a;
    return (static_cast<double>(r >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> Philox4x32::block(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        philox_round(ctr, key);
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

NormalStream::NormalStream(RngLineage lineage, RngDomain domain)
    : key_{static_cast<std::uint32_t>(lineage.master_seed),
           static_cast<std::uint32_t>(lineage.master_seed >> 32)},
      ctr_{0u, 0u, static_cast<std::uint32_t>(domain), lineage.replica_index} {}

std::array<std::uint32_t, 4> NormalStream::next_block() {
    auto out = Philox4x32::block(ctr_, key_);
    if (++ctr_[0] == 0u) ++ctr_[1];  // 64-bit block index
    return out;
}

double NormalStream::next() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    auto b = next_block();
    double u1 = u53(b[0], b[1]);
    double u2 = u53(b[2], b[3]);
    double r = std::sqrt(-2.0 * std::log(u1));
    double c = std::cos(2.0 * M_PI * u2);
    double s = std::sin(2.0 * M_PI * u2);
    cached_ = r * s;
    has_cached_ = true;
    return r * c;
}

void NormalStream::fill(double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = next();
}

double NormalStream::next_uniform() {
    auto b = next_block();
    return u53(b[0], b[1]);
}

}  // namespace mfl
