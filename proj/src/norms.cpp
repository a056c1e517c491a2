#include "mfl/norms.hpp"

#include <cmath>
#include <complex>
#include <cstddef>

#include "mfl/errors.hpp"

namespace mfl {

namespace {

using cplx = std::complex<double>;

double abs_pow(double x, double q) {
    double a = std::fabs(x);
    if (a == 0.0) return 0.0;
    int qi = static_cast<int>(q);
    if (static_cast<double>(qi) == q && qi > 0 && qi % 2 == 0) {
        // even integer exponent: |x|^q = (x²)^{q/2} by squaring
        double base = x * x, out = 1.0;
        int e = qi / 2;
        while (e > 0) {
            if (e & 1) out *= base;
            base *= base;
            e >>= 1;
        }
        return out;
    }
    return std::pow(a, q);
}

// derivative polynomials of h(t) = e^{−t²/(2σ²)} e^{iξt}:
//   h^{(n)}(t) = P_n(t)·h(t),   P_{n+1} = P_n′ + (−t/σ² + iξ)·P_n,  P_0 = 1
std::vector<std::vector<cplx>> derivative_polys(int r, double sigma, double xi) {
    std::vector<std::vector<cplx>> polys(r + 1);
    polys[0] = {cplx(1.0, 0.0)};
    const double inv_s2 = 1.0 / (sigma * sigma);
    for (int n = 0; n < r; ++n) {
        const auto& P = polys[n];
        std::vector<cplx> Q(P.size() + 1, cplx(0.0, 0.0));
        for (std::size_t k = 0; k + 1 < P.size(); ++k) Q[k] += static_cast<double>(k + 1) * P[k + 1];
        for (std::size_t k = 0; k < P.size(); ++k) {
            Q[k] += cplx(0.0, xi) * P[k];
            Q[k + 1] -= inv_s2 * P[k];
        }
        polys[n + 1] = std::move(Q);
    }
    return polys;
}

cplx horner(const std::vector<cplx>& P, double t) {
    cplx v(0.0, 0.0);
    for (std::size_t k = P.size(); k-- > 0;) v = v * t + P[k];
    return v;
}

int node_cap(const QuadratureSpec& quad, int dim) {
    return dim == 1 ? quad.max_nodes_1d : (dim == 2 ? quad.max_nodes_2d : quad.max_nodes_3d);
}

// smallest 2^k + 1 >= n_min
int pow2p1_at_least(int n_min) {
    int n = 3;
    while (n < n_min) n = 2 * (n - 1) + 1;
    return n;
}

struct AxisTable {
    std::vector<double> w;                // trapezoid weight per node (0.5 at ends)
    std::vector<std::vector<cplx>> vals;  // [order][node] = h^{(order)}(t)
};

AxisTable build_axis(double sigma, double xi, int r, double L, int n) {
    AxisTable ax;
    ax.w.assign(n, 1.0);
    ax.w.front() = ax.w.back() = 0.5;
    auto polys = derivative_polys(r, sigma, xi);
    ax.vals.assign(r + 1, std::vector<cplx>(n));
    const double h = 2.0 * L / (n - 1);
    for (int j = 0; j < n; ++j) {
        double t = -L + h * j;
        double env = std::exp(-t * t / (2.0 * sigma * sigma));
        cplx mod = std::polar(env, xi * t);
        for (int o = 0; o <= r; ++o) ax.vals[o][j] = horner(polys[o], t) * mod;
    }
    return ax;
}

// Σ_{|α|<=r} ∫ |∂^α g|^{q′} over [−L, L]^dim by tensor trapezoid, for unit
// amplitude g; `n` nodes per axis.
double norm_power_sum(int dim, const std::vector<double>& xi, double theta, double sigma, int r,
                      double q_prime, double L, int n) {
    std::vector<AxisTable> ax;
    ax.reserve(dim);
    for (int c = 0; c < dim; ++c) ax.push_back(build_axis(sigma, xi[c], r, L, n));
    const double h = 2.0 * L / (n - 1);
    const cplx rot = std::polar(1.0, theta);

    double total = 0.0;
    if (dim == 1) {
        for (int a0 = 0; a0 <= r; ++a0) {
            double s = 0.0;
            for (int j = 0; j < n; ++j)
                s += ax[0].w[j] * abs_pow((rot * ax[0].vals[a0][j]).real(), q_prime);
            total += s * h;
        }
    } else if (dim == 2) {
        for (int a0 = 0; a0 <= r; ++a0)
            for (int a1 = 0; a0 + a1 <= r; ++a1) {
                double s = 0.0;
                for (int j0 = 0; j0 < n; ++j0) {
                    cplx f0 = rot * ax[0].vals[a0][j0];
                    double w0 = ax[0].w[j0];
                    double row = 0.0;
                    for (int j1 = 0; j1 < n; ++j1)
                        row += ax[1].w[j1] * abs_pow((f0 * ax[1].vals[a1][j1]).real(), q_prime);
                    s += w0 * row;
                }
                total += s * h * h;
            }
    } else {
        for (int a0 = 0; a0 <= r; ++a0)
            for (int a1 = 0; a0 + a1 <= r; ++a1)
                for (int a2 = 0; a0 + a1 + a2 <= r; ++a2) {
                    double s = 0.0;
                    for (int j0 = 0; j0 < n; ++j0) {
                        cplx f0 = rot * ax[0].vals[a0][j0];
                        double w0 = ax[0].w[j0];
                        for (int j1 = 0; j1 < n; ++j1) {
                            cplx f01 = f0 * ax[1].vals[a1][j1];
                            double w01 = w0 * ax[1].w[j1];
                            double row = 0.0;
                            for (int j2 = 0; j2 < n; ++j2)
                                row += ax[2].w[j2] *
                                       abs_pow((f01 * ax[2].vals[a2][j2]).real(), q_prime);
                            s += w01 * row;
                        }
                    }
                    total += s * h * h * h;
                }
    }
    return total;
}

void validate_exponents(int dim, int r, double q_prime, double sigma) {
    if (dim < 1 || dim > 3)
        throw ConfigError("test-function quadrature supports phase dimension 1..3");
    if (r < 0 || r > 4) throw ConfigError("smoothness order r must lie in 0..4");
    if (q_prime < 2.0) throw ConfigError("integrability exponent q' must be >= 2");
    if (!(sigma > 0.0)) throw ConfigError("window width sigma must be positive");
}

// node spacing that resolves the q′-th power of the modulated window: spectrum
// extends to ~ q′·|ξ|∞ with Gaussian tail width sqrt(q′)/σ
int base_nodes(const std::vector<double>& xi, double sigma, double q_prime, double L) {
    double ximax = 0.0;
    for (double x : xi) ximax = std::max(ximax, std::fabs(x));
    double h_target = 2.0 * M_PI / (q_prime * ximax + 8.6 * std::sqrt(q_prime) / sigma + 1.0);
    return pow2p1_at_least(static_cast<int>(std::ceil(2.0 * L / h_target)) + 1);
}

double raw_norm_checked(int dim, const std::vector<double>& xi, double theta, double sigma, int r,
                        double q_prime, const QuadratureSpec& quad) {
    const double L = quad.half_width_sigmas * sigma;
    const int cap = node_cap(quad, dim);
    int n0 = std::min(std::max(base_nodes(xi, sigma, q_prime, L), pow2p1_at_least(quad.min_nodes)),
                      cap);
    int n1 = std::min(2 * (n0 - 1) + 1, cap);
    if (n1 <= n0)
        throw NumericError(
            "normalization quadrature hit the per-axis node cap before the refinement check; "
            "reduce q', the frequency, or the dimension");
    double v0 = std::pow(norm_power_sum(dim, xi, theta, sigma, r, q_prime, L, n0), 1.0 / q_prime);
    double v1 = std::pow(norm_power_sum(dim, xi, theta, sigma, r, q_prime, L, n1), 1.0 / q_prime);
    double scale = std::max(std::fabs(v1), 1e-300);
    if (std::fabs(v1 - v0) / scale > quad.rel_tol)
        throw NumericError("normalization quadrature did not converge: refinement moved the "
                           "norm by more than the tolerance");
    return v1;
}

}  // namespace

double TestFunction::eval(const double* z) const {
    double s2 = 0.0, arg = theta;
    for (int c = 0; c < dim; ++c) {
        s2 += z[c] * z[c];
        arg += xi[static_cast<std::size_t>(c)] * z[c];
    }
    double val = std::exp(-s2 / (2.0 * sigma * sigma)) * std::cos(arg);
    if (p != 0.0) val *= std::pow(1.0 + s2, 0.5 * p);
    return amplitude / c * val;
}

double TestFunction::eval1(double z) const { return eval(&z); }

TestFunction normalize_testfn(const RawTestFn& raw, int r, double q_prime, double p,
                              const QuadratureSpec& quad) {
    int dim = static_cast<int>(raw.xi.size());
    validate_exponents(dim, r, q_prime, raw.sigma);
    if (p < 0.0) throw ConfigError("weight exponent p must be >= 0");
    if (raw.amplitude == 0.0) throw ConfigError("test-function amplitude must be nonzero");

    double unit = raw_norm_checked(dim, raw.xi, raw.theta, raw.sigma, r, q_prime, quad);
    double c = std::fabs(raw.amplitude) * unit;
    if (!(c > 1e-14))
        throw ConfigError("test function '" + raw.id + "' normalizes to zero (degenerate probe)");

    TestFunction fn;
    fn.id = raw.id;
    fn.dim = dim;
    fn.xi = raw.xi;
    fn.theta = raw.theta;
    fn.sigma = raw.sigma;
    fn.p = p;
    fn.amplitude = raw.amplitude;
    fn.c = c;
    return fn;
}

double testfn_norm(const TestFunction& fn, int r, double q_prime, const QuadratureSpec& quad) {
    double unit = raw_norm_checked(fn.dim, fn.xi, fn.theta, fn.sigma, r, q_prime, quad);
    return std::fabs(fn.amplitude) * unit / fn.c;
}

Dictionary build_dictionary(const DictionarySpec& spec, const QuadratureSpec& quad) {
    if (spec.freqs_per_axis < 1 || spec.sigmas.empty())
        throw ConfigError("dictionary needs at least one frequency and one sigma");
    validate_exponents(spec.dim, spec.r, spec.q_prime, spec.sigmas.front());

    // per-axis frequency grid over [−freq_max, freq_max]
    std::vector<double> grid(spec.freqs_per_axis);
    for (int i = 0; i < spec.freqs_per_axis; ++i)
        grid[i] = spec.freqs_per_axis == 1
                      ? 0.0
                      : -spec.freq_max + 2.0 * spec.freq_max * i / (spec.freqs_per_axis - 1);

    std::vector<std::vector<double>> freqs;
    std::vector<int> idx(spec.dim, 0);
    while (true) {
        std::vector<double> xi(spec.dim);
        for (int c = 0; c < spec.dim; ++c) xi[c] = grid[idx[c]];
        // keep one of each mirror pair: the first nonzero component positive
        bool keep = true;
        for (int c = 0; c < spec.dim; ++c) {
            if (xi[c] != 0.0) {
                keep = xi[c] > 0.0;
                break;
            }
        }
        if (keep) freqs.push_back(xi);
        int c = 0;
        for (; c < spec.dim; ++c) {
            if (++idx[c] < spec.freqs_per_axis) break;
            idx[c] = 0;
        }
        if (c == spec.dim) break;
    }

    Dictionary dict;
    dict.spec = spec;
    char buf[160];
    for (double sigma : spec.sigmas) {
        for (const auto& xi : freqs) {
            bool zero_freq = true;
            for (double x : xi) zero_freq = zero_freq && x == 0.0;
            for (int ph = 0; ph < 2; ++ph) {
                if (ph == 1 && zero_freq) continue;  // sin(0·z) ≡ 0
                RawTestFn raw;
                raw.sigma = sigma;
                raw.xi = xi;
                raw.theta = ph == 0 ? 0.0 : M_PI / 2.0;
                int off = std::snprintf(buf, sizeof buf, "phi_s%g_k", sigma);
                for (int c = 0; c < spec.dim; ++c)
                    off += std::snprintf(buf + off, sizeof buf - off, "%s%g", c ? "," : "", xi[c]);
                std::snprintf(buf + off, sizeof buf - off, "_%s", ph == 0 ? "cos" : "sin");
                raw.id = buf;
                dict.fns.push_back(normalize_testfn(raw, spec.r, spec.q_prime, spec.p, quad));
            }
        }
    }
    return dict;
}

ProxyResult dual_norm_proxy(const std::map<std::string, double>& pairings,
                            const Dictionary& dict) {
    if (dict.fns.empty()) throw DomainError("dual_norm_proxy: empty dictionary");
    ProxyResult best;
    best.value = -1.0;
    for (const auto& fn : dict.fns) {
        auto it = pairings.find(fn.id);
        if (it == pairings.end())
            throw DomainError("dual_norm_proxy: missing pairing for '" + fn.id + "'");
        double a = std::fabs(it->second);
        if (a > best.value) {
            best.value = a;
            best.argmax_id = fn.id;
        }
    }
    return best;
}

double pair_with_gaussian(const TestFunction& fn, const std::vector<double>& mean,
                          const std::vector<double>& var, const QuadratureSpec& quad) {
    int dim = fn.dim;
    if (static_cast<int>(mean.size()) != dim || static_cast<int>(var.size()) != dim)
        throw DomainError("pair_with_gaussian: mean/var size mismatch");
    for (double v : var)
        if (!(v > 0.0)) throw DomainError("pair_with_gaussian: variance must be positive");

    // per-axis grids wide enough for both the window and the density
    std::vector<std::vector<double>> nodes(dim), dens(dim);
    double ximax = 0.0, sdmin = fn.sigma;
    for (int c = 0; c < dim; ++c) {
        ximax = std::max(ximax, std::fabs(fn.xi[c]));
        sdmin = std::min(sdmin, std::sqrt(var[c]));
    }
    double h_target = 2.0 * M_PI / (ximax + 8.6 / sdmin + 1.0);
    for (int c = 0; c < dim; ++c) {
        double sd = std::sqrt(var[c]);
        double half = quad.half_width_sigmas * std::max(fn.sigma, sd) + std::fabs(mean[c]);
        int n = std::min(pow2p1_at_least(static_cast<int>(std::ceil(2.0 * half / h_target)) + 1),
                         node_cap(quad, dim));
        nodes[c].resize(n);
        dens[c].resize(n);
        double h = 2.0 * half / (n - 1);
        for (int j = 0; j < n; ++j) {
            double t = -half + h * j;
            nodes[c][j] = t;
            double u = (t - mean[c]) / sd;
            dens[c][j] = std::exp(-0.5 * u * u) / (sd * std::sqrt(2.0 * M_PI)) * h *
                         ((j == 0 || j == n - 1) ? 0.5 : 1.0);
        }
    }

    double total = 0.0;
    double z[3];
    if (dim == 1) {
        for (std::size_t j = 0; j < nodes[0].size(); ++j) {
            z[0] = nodes[0][j];
            total += dens[0][j] * fn.eval(z);
        }
    } else if (dim == 2) {
        for (std::size_t j0 = 0; j0 < nodes[0].size(); ++j0) {
            z[0] = nodes[0][j0];
            double acc = 0.0;
            for (std::size_t j1 = 0; j1 < nodes[1].size(); ++j1) {
                z[1] = nodes[1][j1];
                acc += dens[1][j1] * fn.eval(z);
            }
            total += dens[0][j0] * acc;
        }
    } else {
        for (std::size_t j0 = 0; j0 < nodes[0].size(); ++j0) {
            z[0] = nodes[0][j0];
            for (std::size_t j1 = 0; j1 < nodes[1].size(); ++j1) {
                z[1] = nodes[1][j1];
                double acc = 0.0;
                for (std::size_t j2 = 0; j2 < nodes[2].size(); ++j2) {
                    z[2] = nodes[2][j2];
                    acc += dens[2][j2] * fn.eval(z);
                }
                total += dens[0][j0] * dens[1][j1] * acc;
            }
        }
    }
    return total;
}

double pair_with_grid(const TestFunction& fn, const std::vector<double>& nodes,
                      const std::vector<double>& density) {
    if (fn.dim != 1) throw DomainError("pair_with_grid: one-dimensional probes only");
    if (nodes.size() != density.size() || nodes.size() < 2)
        throw DomainError("pair_with_grid: nodes/density size mismatch");
    double total = 0.0, prev = fn.eval1(nodes[0]) * density[0];
    for (std::size_t j = 1; j < nodes.size(); ++j) {
        double cur = fn.eval1(nodes[j]) * density[j];
        total += 0.5 * (prev + cur) * (nodes[j] - nodes[j - 1]);
        prev = cur;
    }
    return total;
}

}  // namespace mfl
