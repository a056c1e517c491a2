#pragma once
#include <cstddef>
#include <vector>

namespace mfl {

// Fixed-topology pairwise tree sum.  The result depends only on the order of
// `v`, never on how work was scheduled, so parallel reductions that combine
// per-replica terms in replica-index order are bit-reproducible across thread
// counts.  Also better conditioned than a left fold.
inline double tree_sum(const double* v, std::size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = v[0];
        for (std::size_t i = 1; i < n; ++i) s += v[i];
        return s;
    }
    std::size_t half = n / 2;
    return tree_sum(v, half) + tree_sum(v + half, n - half);
}

inline double tree_sum(const std::vector<double>& v) { return tree_sum(v.data(), v.size()); }

}  // namespace mfl
