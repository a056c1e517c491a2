#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "mfl/model.hpp"

namespace mfl {

// ---- partition combinatorics ----------------------------------------------

// A partition of {0..m-1} into disjoint nonempty blocks (each block sorted,
// blocks ordered by smallest element).
using Partition = std::vector<std::vector<int>>;

// Exhaustive duplicate-free enumeration via restricted growth strings.
// Guarded at m <= 12 (Bell(12) = 4,213,597).
std::vector<Partition> set_partitions(int m);
std::uint64_t bell_number(int m);  // m <= 12
double binomial(int n, int k);

// ---- U-statistics ----------------------------------------------------------

// U_m = ((N-m)!/N!)·Σ_{distinct i_1..i_m} ∏_l vals[i_l], computed through
// power sums p_k and the elementary-symmetric Newton recurrence in O(N + m²);
// exactly equal (up to roundoff) to the naive distinct-index sum.
double ustat_tested_moment(const double* vals, int N, int m);
// All orders 1..m_max in one pass; U[j-1] = U_j.
void ustat_all_orders(const double* vals, int N, int m_max, double* U);
// Brute-force oracle, O(N^m): only for small N in tests.
double ustat_naive(const double* vals, int N, int m);

// ---- moments <-> cumulants -------------------------------------------------

// κ_m = a_m − Σ_{j<m} C(m-1, j-1)·κ_j·a_{m-j}  (recurrence form).
std::vector<double> cumulants_from_moments(const std::vector<double>& a);
// Inverse; round-trips to machine precision.
std::vector<double> moments_from_cumulants(const std::vector<double>& kappa);
// Independent oracle: top-order cumulant via the explicit partition sum
// Σ_π (−1)^{#π−1}(#π−1)!·∏_B a_{#B}.
double cumulant_partition_sum(const std::vector<double>& a);

// ---- replica-level moment storage ------------------------------------------

// Per-replica tested moments of one (test function, time) cell.  Values are
// centered by `center` (the mean-field pairing) before accumulation; the
// order-m polynomial combinations for m >= 2 are exactly invariant under
// centering, which only reduces their variance.
struct MomentCell {
    std::string phi_id;
    double t = 0.0;
    int N = 0;
    int m_max = 1;
    double center = 0.0;
    std::vector<double> ustats;   // [replica * m_max + (j-1)] = U_j of centered values
    std::vector<double> usq;      // per replica: (1/N)Σφ_c², kept when m_max >= 2
    std::vector<double> twin_u1;  // optional coupled-baseline U_1 (control variate)

    int replicas() const { return m_max == 0 ? 0 : static_cast<int>(ustats.size()) / m_max; }
    double u(int r, int j) const { return ustats[static_cast<std::size_t>(r) * m_max + j - 1]; }

    // Accumulate one replica from raw observable values φ(z_i) (uncentered).
    void add_replica(const double* phi_vals, int N_vals, const double* twin_vals = nullptr);

    std::vector<double> moment_means() const;  // a_j, tree-sum order, j=1..m_max
    std::vector<double> moment_se() const;     // SE of each a_j
};

// ---- correlation estimates ---------------------------------------------------

struct CorrelationEstimate {
    enum class Route { moebius, cumulant };
    int m = 1;
    std::string phi_id;
    double t = 0.0;
    double value = 0.0;
    double se = 0.0;  // jackknife over replicas
    Route route = Route::moebius;
};

// Σ_π (−1)^{#π−1}(#π−1)!·∏_B a_{#B} on the cell's moment means, with
// leave-one-replica-out jackknife SE.
CorrelationEstimate correlation_moebius(const MomentCell& cell, int m);
// Sample cumulant of the replica scalars X_r = U_1 (plug-in 1/M moments).
CorrelationEstimate correlation_cumulant(const MomentCell& cell, int m);

// Exact m=2 route identity on stored samples:
//   Var_M(U₁) − { [⟨U₂⟩−⟨U₁⟩²] + N⁻¹·(⟨q⟩−⟨U₂⟩) },  q = (1/N)Σφ_c².
// Zero to machine precision for every dataset; returned for the test.
double route_identity_residual_m2(const MomentCell& cell);

// ∫φ^{⊗m}(F^{N,m} − μ^{⊗m}) from centered moment means and the mean-field
// pairing: Σ_{j=1}^m C(m,j)·μφ^{m−j}·a_j^c (binomial-signed expansion).
double tensorized_marginal_gap(const std::vector<double>& a_centered, double mu_pairing, int m);

// ---- weighted moments and concentration ------------------------------------

// Q_r(μ^N) = (1/N)Σ_i ⟨z_i⟩^r, ⟨z⟩ = sqrt(1+|z|²) over the phase point.
double empirical_Qr(const Ensemble& e, double r);

struct ConcentrationRow {
    int m = 0;
    double value = 0.0;  // Ê[(Q − L)₊^m]
    double se = 0.0;
};
std::vector<ConcentrationRow> concentration_scan(const std::vector<double>& q_replicas, double L,
                                                 const std::vector<int>& m_list);

}  // namespace mfl
