#include "mfl/statistics.hpp"

#include <array>
#include <cmath>

#include "mfl/errors.hpp"
#include "mfl/reduce.hpp"

namespace mfl {

namespace {
constexpr int kOrderCap = 12;
constexpr std::array<std::uint64_t, 13> kBell{1,    1,     2,      5,      15,     52,    203,
                                              877,  4140,  21147,  115975, 678570, 4213597};
}  // namespace

std::uint64_t bell_number(int m) {
    if (m < 0 || m > kOrderCap) throw DomainError("bell_number: m outside [0, 12]");
    return kBell[static_cast<std::size_t>(m)];
}

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

std::vector<Partition> set_partitions(int m) {
    if (m < 1 || m > kOrderCap) throw DomainError("set_partitions: m outside [1, 12]");
    // restricted growth strings: rgs[0] = 0, rgs[i] <= 1 + max(rgs[0..i-1])
    std::vector<Partition> out;
    out.reserve(kBell[static_cast<std::size_t>(m)]);
    std::vector<int> rgs(m, 0), maxv(m, 0);
    while (true) {
        int nblocks = maxv[m - 1] + 1;
        Partition p(nblocks);
        for (int i = 0; i < m; ++i) p[rgs[i]].push_back(i);
        out.push_back(std::move(p));
        // next string
        int i = m - 1;
        for (; i > 0; --i) {
            if (rgs[i] <= maxv[i - 1]) break;
        }
        if (i == 0) break;
        ++rgs[i];
        maxv[i] = std::max(maxv[i - 1], rgs[i]);
        for (int j = i + 1; j < m; ++j) {
            rgs[j] = 0;
            maxv[j] = maxv[i];
        }
    }
    return out;
}

void ustat_all_orders(const double* vals, int N, int m_max, double* U) {
    if (m_max < 1) throw DomainError("ustat: m must be >= 1");
    if (m_max > N) throw DomainError("ustat: m exceeds N");
    if (m_max > kOrderCap) throw DomainError("ustat: m outside [1, 12]");
    // power sums
    std::array<double, kOrderCap + 1> p{};
    for (int i = 0; i < N; ++i) {
        double x = vals[i], xp = x;
        for (int k = 1; k <= m_max; ++k) {
            p[k] += xp;
            xp *= x;
        }
    }
    // Newton: k·e_k = Σ_{i=1..k} (−1)^{i−1} e_{k−i} p_i
    std::array<double, kOrderCap + 1> e{};
    e[0] = 1.0;
    for (int k = 1; k <= m_max; ++k) {
        double s = 0.0;
        double sign = 1.0;
        for (int i = 1; i <= k; ++i) {
            s += sign * e[k - i] * p[i];
            sign = -sign;
        }
        e[k] = s / k;
    }
    for (int k = 1; k <= m_max; ++k) {
        // U_k = e_k / C(N,k)
        U[k - 1] = e[k] / binomial(N, k);
    }
}

double ustat_tested_moment(const double* vals, int N, int m) {
    std::array<double, kOrderCap> U{};
    ustat_all_orders(vals, N, m, U.data());
    return U[m - 1];
}

double ustat_naive(const double* vals, int N, int m) {
    if (m < 1 || m > N) throw DomainError("ustat_naive: m outside [1, N]");
    // sum over ordered distinct index tuples, recursively
    double sum = 0.0;
    std::vector<int> idx(m, -1);
    std::vector<bool> used(N, false);
    std::vector<double> prod(m + 1, 1.0);
    int depth = 0;
    while (depth >= 0) {
        int& i = idx[depth];
        if (i >= 0) used[i] = false;
        ++i;
        while (i < N && used[i]) ++i;
        if (i >= N) {
            idx[depth] = -1;
            --depth;
            continue;
        }
        used[i] = true;
        prod[depth + 1] = prod[depth] * vals[i];
        if (depth == m - 1) {
            sum += prod[m];
            continue;  // advance same depth
        }
        ++depth;
    }
    double denom = 1.0;
    for (int k = 0; k < m; ++k) denom *= (N - k);
    return sum / denom;
}

std::vector<double> cumulants_from_moments(const std::vector<double>& a) {
    int m = static_cast<int>(a.size());
    if (m > kOrderCap) throw DomainError("cumulants_from_moments: order above 12");
    std::vector<double> k(m);
    for (int n = 1; n <= m; ++n) {
        double s = a[n - 1];
        for (int j = 1; j < n; ++j) s -= binomial(n - 1, j - 1) * k[j - 1] * a[n - j - 1];
        k[n - 1] = s;
    }
    return k;
}

std::vector<double> moments_from_cumulants(const std::vector<double>& kappa) {
    int m = static_cast<int>(kappa.size());
    if (m > kOrderCap) throw DomainError("moments_from_cumulants: order above 12");
    std::vector<double> a(m);
    for (int n = 1; n <= m; ++n) {
        double s = kappa[n - 1];
        for (int j = 1; j < n; ++j) s += binomial(n - 1, j - 1) * kappa[j - 1] * a[n - j - 1];
        a[n - 1] = s;
    }
    return a;
}

double cumulant_partition_sum(const std::vector<double>& a) {
    int m = static_cast<int>(a.size());
    auto parts = set_partitions(m);
    double total = 0.0;
    for (const auto& p : parts) {
        int nb = static_cast<int>(p.size());
        double prod = 1.0;
        for (const auto& blk : p) prod *= a[blk.size() - 1];
        double coeff = (nb % 2 == 1) ? 1.0 : -1.0;  // (−1)^{#π−1}
        for (int j = 2; j < nb; ++j) coeff *= j;    // (#π−1)!
        total += coeff * prod;
    }
    return total;
}

void MomentCell::add_replica(const double* phi_vals, int N_vals, const double* twin_vals) {
    if (N_vals != N) throw DomainError("MomentCell: replica size mismatch");
    std::vector<double> c(static_cast<std::size_t>(N_vals));
    for (int i = 0; i < N_vals; ++i) c[i] = phi_vals[i] - center;
    std::size_t base = ustats.size();
    ustats.resize(base + m_max);
    ustat_all_orders(c.data(), N_vals, m_max, ustats.data() + base);
    if (m_max >= 2) {
        double q = 0.0;
        for (int i = 0; i < N_vals; ++i) q += c[i] * c[i];
        usq.push_back(q / N_vals);
    }
    if (twin_vals) {
        double s = 0.0;
        for (int i = 0; i < N_vals; ++i) s += twin_vals[i] - center;
        twin_u1.push_back(s / N_vals);
    }
}

std::vector<double> MomentCell::moment_means() const {
    int M = replicas();
    std::vector<double> a(m_max, 0.0), col(M);
    for (int j = 1; j <= m_max; ++j) {
        for (int r = 0; r < M; ++r) col[r] = u(r, j);
        a[j - 1] = tree_sum(col) / M;
    }
    return a;
}

std::vector<double> MomentCell::moment_se() const {
    int M = replicas();
    auto a = moment_means();
    std::vector<double> se(m_max, 0.0), col(M);
    if (M < 2) return se;
    for (int j = 1; j <= m_max; ++j) {
        for (int r = 0; r < M; ++r) {
            double d = u(r, j) - a[j - 1];
            col[r] = d * d;
        }
        se[j - 1] = std::sqrt(tree_sum(col) / (static_cast<double>(M) * (M - 1)));
    }
    return se;
}

namespace {

// leave-one-replica-out jackknife SE from the M leave-one-out estimates
double jackknife_se(int M, const std::vector<double>& loo_values) {
    if (M < 2) return 0.0;
    std::vector<double> sq(M);
    double mean = tree_sum(loo_values) / M;
    for (int r = 0; r < M; ++r) {
        double d = loo_values[r] - mean;
        sq[r] = d * d;
    }
    return std::sqrt((static_cast<double>(M) - 1.0) / M * tree_sum(sq));
}

}  // namespace

CorrelationEstimate correlation_moebius(const MomentCell& cell, int m) {
    if (m > cell.m_max) throw DomainError("correlation_moebius: order above cell m_max");
    const int M = cell.replicas();
    if (M < 1) throw DomainError("correlation_moebius: empty cell");
    CorrelationEstimate est;
    est.m = m;
    est.phi_id = cell.phi_id;
    est.t = cell.t;
    est.route = CorrelationEstimate::Route::moebius;

    std::vector<double> a(m), sums(m), col(M);
    for (int j = 1; j <= m; ++j) {
        for (int r = 0; r < M; ++r) col[r] = cell.u(r, j);
        sums[j - 1] = tree_sum(col);
        a[j - 1] = sums[j - 1] / M;
    }
    est.value = cumulants_from_moments(a)[m - 1];

    if (M >= 2) {
        std::vector<double> loo(M), aj(m);
        for (int r = 0; r < M; ++r) {
            for (int j = 1; j <= m; ++j) aj[j - 1] = (sums[j - 1] - cell.u(r, j)) / (M - 1);
            loo[r] = cumulants_from_moments(aj)[m - 1];
        }
        est.se = jackknife_se(M, loo);
    }
    return est;
}

CorrelationEstimate correlation_cumulant(const MomentCell& cell, int m) {
    const int M = cell.replicas();
    if (M < 1) throw DomainError("correlation_cumulant: empty cell");
    CorrelationEstimate est;
    est.m = m;
    est.phi_id = cell.phi_id;
    est.t = cell.t;
    est.route = CorrelationEstimate::Route::cumulant;

    // raw 1/M sample moments of X_r = U_1
    std::vector<double> sums(m, 0.0), col(M);
    for (int j = 1; j <= m; ++j) {
        for (int r = 0; r < M; ++r) col[r] = std::pow(cell.u(r, 1), j);
        sums[j - 1] = tree_sum(col);
    }
    std::vector<double> b(m);
    for (int j = 0; j < m; ++j) b[j] = sums[j] / M;
    est.value = cumulants_from_moments(b)[m - 1];

    if (M >= 2) {
        std::vector<double> loo(M), bj(m);
        for (int r = 0; r < M; ++r) {
            double x = cell.u(r, 1), xp = x;
            for (int j = 1; j <= m; ++j) {
                bj[j - 1] = (sums[j - 1] - xp) / (M - 1);
                xp *= x;
            }
            loo[r] = cumulants_from_moments(bj)[m - 1];
        }
        est.se = jackknife_se(M, loo);
    }
    return est;
}

double route_identity_residual_m2(const MomentCell& cell) {
    if (cell.m_max < 2 || cell.usq.empty())
        throw DomainError("route identity needs m_max >= 2 with usq column");
    const int M = cell.replicas();
    std::vector<double> col(M);
    for (int r = 0; r < M; ++r) col[r] = cell.u(r, 1);
    double a1 = tree_sum(col) / M;
    for (int r = 0; r < M; ++r) col[r] = cell.u(r, 1) * cell.u(r, 1);
    double x2 = tree_sum(col) / M;
    for (int r = 0; r < M; ++r) col[r] = cell.u(r, 2);
    double a2 = tree_sum(col) / M;
    double aq = tree_sum(cell.usq) / M;
    double lhs = x2 - a1 * a1;                            // cumulant route, plug-in
    double rhs = (a2 - a1 * a1) + (aq - a2) / cell.N;     // moebius + N⁻¹ correction
    return lhs - rhs;
}

double tensorized_marginal_gap(const std::vector<double>& a_centered, double mu_pairing, int m) {
    if (static_cast<int>(a_centered.size()) < m) throw DomainError("gap: needs a_1..a_m");
    double total = 0.0;
    for (int j = 1; j <= m; ++j)
        total += binomial(m, j) * std::pow(mu_pairing, m - j) * a_centered[j - 1];
    return total;
}

double empirical_Qr(const Ensemble& e, double r) {
    if (r < 0.0) throw DomainError("empirical_Qr: r must be >= 0");
    double s = 0.0;
    for (int i = 0; i < e.n; ++i) {
        double z2 = 0.0;
        for (int c = 0; c < e.d; ++c) {
            double xc = e.xi(i, c);
            z2 += xc * xc;
        }
        if (e.has_v)
            for (int c = 0; c < e.d; ++c) {
                double vc = e.v[static_cast<std::size_t>(i) * e.d + c];
                z2 += vc * vc;
            }
        s += std::pow(1.0 + z2, 0.5 * r);
    }
    return s / e.n;
}

std::vector<ConcentrationRow> concentration_scan(const std::vector<double>& q_replicas, double L,
                                                 const std::vector<int>& m_list) {
    const int M = static_cast<int>(q_replicas.size());
    std::vector<ConcentrationRow> out;
    std::vector<double> col(M), sq(M);
    for (int m : m_list) {
        ConcentrationRow row;
        row.m = m;
        for (int r = 0; r < M; ++r) {
            double d = std::max(q_replicas[r] - L, 0.0);
            col[r] = std::pow(d, m);
        }
        row.value = tree_sum(col) / M;
        if (M >= 2) {
            for (int r = 0; r < M; ++r) {
                double d = col[r] - row.value;
                sq[r] = d * d;
            }
            row.se = std::sqrt(tree_sum(sq) / (static_cast<double>(M) * (M - 1)));
        }
        out.push_back(row);
    }
    return out;
}

}  // namespace mfl
