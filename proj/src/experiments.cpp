#include "mfl/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

#include "mfl/dynamics.hpp"
#include "mfl/errors.hpp"
#include "mfl/reduce.hpp"
#include "mfl/statistics.hpp"

namespace mfl {

namespace {

// Reference and companion runs must not share (seed, replica) streams with the
// scan replicas, or the "independent" comparison baseline would be correlated
// with the data it checks.
constexpr std::uint64_t kReferenceSeedSalt = 0x9E3779B97F4A7C15ull;
constexpr std::uint32_t kCompanionReplicaOffset = 1u << 24;

inline double sqr(double v) { return v * v; }

double jackknife_from_loo(const std::vector<double>& loo) {
    const std::size_t B = loo.size();
    if (B < 2) return 0.0;
    double mean = tree_sum(loo) / static_cast<double>(B);
    std::vector<double> ss(B);
    for (std::size_t b = 0; b < B; ++b) ss[b] = sqr(loo[b] - mean);
    return std::sqrt((static_cast<double>(B) - 1.0) / static_cast<double>(B) * tree_sum(ss));
}

// ---- fits ---------------------------------------------------------------------

struct LinSolve {
    double c = 0.0, b = 0.0, ssr = 0.0;
    double S11 = 0.0, S1u = 0.0, Suu = 0.0, det = 0.0;
    bool degenerate = false;
};

// weighted least squares for y = c + b·u at fixed basis u_i
LinSolve solve_affine(const std::vector<double>& u, const std::vector<double>& y,
                      const std::vector<double>& w) {
    LinSolve r;
    const std::size_t n = u.size();
    double S1y = 0.0, Suy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        r.S11 += w[i];
        r.S1u += w[i] * u[i];
        r.Suu += w[i] * u[i] * u[i];
        S1y += w[i] * y[i];
        Suy += w[i] * u[i] * y[i];
    }
    r.det = r.S11 * r.Suu - r.S1u * r.S1u;
    if (!(r.det > 1e-14 * r.S11 * r.Suu)) {
        // basis collinear with the constant (λ ≈ 0): fall back to the mean
        r.degenerate = true;
        r.c = S1y / r.S11;
        r.b = 0.0;
    } else {
        r.c = (r.Suu * S1y - r.S1u * Suy) / r.det;
        r.b = (r.S11 * Suy - r.S1u * S1y) / r.det;
    }
    for (std::size_t i = 0; i < n; ++i) r.ssr += w[i] * sqr(y[i] - r.c - r.b * u[i]);
    return r;
}

}  // namespace

SlopeFit fit_loglog_slope(const std::vector<ScalePoint>& points) {
    SlopeFit fit;
    std::vector<double> x, y, sig;
    int dropped = 0;
    for (const auto& p : points) {
        if (!(p.value > 0.0) || !(p.x > 0.0)) {
            ++dropped;
            continue;
        }
        x.push_back(std::log(p.x));
        y.push_back(std::log(p.value));
        sig.push_back(p.se > 0.0 ? p.se / p.value : 0.0);
    }
    if (dropped > 0)
        fit.warnings.push_back("dropped " + std::to_string(dropped) +
                               " nonpositive point(s) before the log-log fit");
    const int n = static_cast<int>(x.size());
    if (n < 3)
        throw DomainError("fit_loglog_slope: only " + std::to_string(n) +
                          " positive points, need at least 3");

    bool weighted = true;
    for (double s : sig)
        if (!(s > 0.0)) weighted = false;
    std::vector<double> w(n, 1.0);
    if (weighted)
        for (int i = 0; i < n; ++i) w[i] = 1.0 / sqr(sig[i]);

    double Sw = 0, Sx = 0, Sy = 0, Sxx = 0, Sxy = 0;
    for (int i = 0; i < n; ++i) {
        Sw += w[i];
        Sx += w[i] * x[i];
        Sy += w[i] * y[i];
        Sxx += w[i] * x[i] * x[i];
        Sxy += w[i] * x[i] * y[i];
    }
    const double det = Sw * Sxx - Sx * Sx;
    if (!(det > 0.0)) throw DomainError("fit_loglog_slope: degenerate abscissas");
    fit.slope = (Sw * Sxy - Sx * Sy) / det;
    fit.intercept = (Sxx * Sy - Sx * Sxy) / det;

    double ssr = 0.0, ss0 = 0.0;
    const double ybar = Sy / Sw;
    for (int i = 0; i < n; ++i) {
        ssr += w[i] * sqr(y[i] - fit.intercept - fit.slope * x[i]);
        ss0 += w[i] * sqr(y[i] - ybar);
    }
    fit.r2 = ss0 > 0.0 ? 1.0 - ssr / ss0 : 1.0;
    // with real SEs the χ² scale is only allowed to inflate the quoted error
    const double sigma2 = weighted ? std::max(1.0, ssr / std::max(1, n - 2))
                                   : (n > 2 ? ssr / (n - 2) : 0.0);
    fit.slope_se = std::sqrt(sigma2 * Sw / det);
    fit.point_se = sig;
    fit.n_points = n;
    return fit;
}

DecayFit fit_decay_plateau(const std::vector<ScalePoint>& series) {
    auto pts = series;
    std::sort(pts.begin(), pts.end(), [](const ScalePoint& a, const ScalePoint& b) { return a.x < b.x; });
    const int n = static_cast<int>(pts.size());
    if (n < 8) throw DomainError("fit_decay_plateau: need at least 8 points, got " + std::to_string(n));

    DecayFit fit;
    fit.t_lo = pts.front().x;
    fit.t_hi = pts.back().x;
    const double span = fit.t_hi - fit.t_lo;
    if (!(span > 0.0)) throw DomainError("fit_decay_plateau: zero time span");
    double min_gap = span;
    for (int i = 1; i < n; ++i) min_gap = std::min(min_gap, pts[i].x - pts[i - 1].x);
    if (!(min_gap > 0.0)) throw DomainError("fit_decay_plateau: duplicate time points");

    bool weighted = true;
    for (const auto& p : pts)
        if (!(p.se > 0.0)) weighted = false;
    std::vector<double> t(n), y(n), w(n, 1.0);
    for (int i = 0; i < n; ++i) {
        t[i] = pts[i].x;
        y[i] = pts[i].value;
        if (weighted) w[i] = 1.0 / sqr(pts[i].se);
    }

    const double t0 = t.front();
    std::vector<double> u(n);
    auto at_lambda = [&](double lam) {
        for (int i = 0; i < n; ++i) u[i] = std::exp(-lam * (t[i] - t0));
        return solve_affine(u, y, w);
    };

    // constant-only baseline
    const LinSolve base = [&] {
        std::vector<double> uz(n, 0.0);
        return solve_affine(uz, y, w);
    }();
    const double ssr0 = base.ssr;

    // coarse log-spaced sweep brackets the basin; golden section refines it
    const double lam_lo = 1e-3 / span, lam_hi = 12.0 / min_gap;
    const int kCoarse = 96;
    int best_i = 0;
    double best_ssr = 0.0;
    std::vector<double> lam_grid(kCoarse);
    for (int i = 0; i < kCoarse; ++i) {
        lam_grid[i] = lam_lo * std::pow(lam_hi / lam_lo, static_cast<double>(i) / (kCoarse - 1));
        double s = at_lambda(lam_grid[i]).ssr;
        if (i == 0 || s < best_ssr) {
            best_ssr = s;
            best_i = i;
        }
    }
    double la = std::log(lam_grid[std::max(0, best_i - 1)]);
    double lb = std::log(lam_grid[std::min(kCoarse - 1, best_i + 1)]);
    const double gr = 0.6180339887498949;
    double c1 = lb - gr * (lb - la), c2 = la + gr * (lb - la);
    double f1 = at_lambda(std::exp(c1)).ssr, f2 = at_lambda(std::exp(c2)).ssr;
    for (int it = 0; it < 90; ++it) {
        if (f1 < f2) {
            lb = c2;
            c2 = c1;
            f2 = f1;
            c1 = lb - gr * (lb - la);
            f1 = at_lambda(std::exp(c1)).ssr;
        } else {
            la = c1;
            c1 = c2;
            f1 = f2;
            c2 = la + gr * (lb - la);
            f2 = at_lambda(std::exp(c2)).ssr;
        }
    }
    const double lam = std::exp(0.5 * (la + lb));
    LinSolve best = at_lambda(lam);

    const double sigma2 = weighted ? std::max(1.0, best.ssr / std::max(1, n - 3))
                                   : (n > 3 ? best.ssr / (n - 3) : 0.0);

    double scale_y = 0.0;
    for (int i = 0; i < n; ++i) scale_y = std::max(scale_y, std::abs(y[i]));

    double b_se_shift = 0.0;
    if (!best.degenerate) b_se_shift = std::sqrt(sigma2 * best.S11 / best.det);
    const double improvement = ssr0 - best.ssr;
    const bool interior = lam > lam_lo * 1.02 && lam < lam_hi / 1.02;
    fit.identifiable = !best.degenerate && interior &&
                       improvement > 1e-10 * (ssr0 + 1e-300) &&
                       std::abs(best.b) > 3.0 * b_se_shift + 1e-12 * scale_y;

    if (!fit.identifiable) {
        fit.plateau = base.c;
        fit.plateau_se = std::sqrt((weighted ? std::max(1.0, ssr0 / std::max(1, n - 1))
                                             : (n > 1 ? ssr0 / (n - 1) : 0.0)) /
                                   base.S11);
        fit.amplitude = 0.0;
        fit.rate = 0.0;
        fit.residual_rms = std::sqrt(
            [&] {
                double s = 0.0;
                for (int i = 0; i < n; ++i) s += sqr(y[i] - base.c);
                return s / n;
            }());
        fit.r2 = 0.0;
        fit.warnings.push_back("decay not identifiable; plateau reported as the weighted mean");
        return fit;
    }

    fit.rate = lam;
    fit.plateau = best.c;
    fit.plateau_se = std::sqrt(sigma2 * best.Suu / best.det);
    const double lift = std::exp(std::min(lam * t0, 300.0));
    fit.amplitude = best.b * lift;
    fit.amplitude_se = b_se_shift * lift;
    fit.r2 = ssr0 > 0.0 ? 1.0 - best.ssr / ssr0 : 1.0;
    double rs = 0.0;
    for (int i = 0; i < n; ++i) rs += sqr(y[i] - best.c - best.b * std::exp(-lam * (t[i] - t0)));
    fit.residual_rms = std::sqrt(rs / n);

    // profile-curvature error bar on λ̂
    const double h = std::max(lam * 1e-4, (lam_hi - lam_lo) * 1e-10);
    const double d2 =
        (at_lambda(lam + h).ssr - 2.0 * best.ssr + at_lambda(lam - h).ssr) / (h * h);
    if (d2 > 0.0)
        fit.rate_se = std::sqrt(2.0 * sigma2 / d2);
    else {
        fit.rate_se = std::numeric_limits<double>::infinity();
        fit.warnings.push_back("flat λ profile; rate error bar unreliable");
    }
    if (lam * span < 3.0)
        fit.warnings.push_back("window spans fewer than 3 fitted e-foldings");
    return fit;
}

// ---- scan kinds --------------------------------------------------------------------

std::string scan_kind_name(ScanKind k) {
    switch (k) {
        case ScanKind::chaos_scaling: return "chaos_scaling";
        case ScanKind::correlation_scaling: return "correlation_scaling";
        case ScanKind::decay_fit: return "decay_fit";
        case ScanKind::concentration: return "concentration";
        case ScanKind::relax_to_gibbs: return "relax_to_gibbs";
    }
    throw DomainError("unknown scan kind");
}

ScanKind scan_kind_from_string(const std::string& s, int line) {
    if (s == "chaos_scaling") return ScanKind::chaos_scaling;
    if (s == "correlation_scaling") return ScanKind::correlation_scaling;
    if (s == "decay_fit") return ScanKind::decay_fit;
    if (s == "concentration") return ScanKind::concentration;
    if (s == "relax_to_gibbs") return ScanKind::relax_to_gibbs;
    throw ConfigError("unknown scan.kind '" + s + "'", line);
}

namespace {

bool needs_dictionary(ScanKind k) {
    return k == ScanKind::chaos_scaling || k == ScanKind::correlation_scaling ||
           k == ScanKind::decay_fit;
}

bool slope_fit_kind(ScanKind k) {
    return k == ScanKind::chaos_scaling || k == ScanKind::correlation_scaling ||
           k == ScanKind::concentration;
}

void check_times_on_step(const std::vector<double>& times, double dt) {
    for (double t : times) {
        double k = t / dt;
        if (std::abs(k - std::llround(k)) > 1e-6)
            throw ConfigError("scan.times entry " + std::to_string(t) +
                              " is not a multiple of model.dt");
    }
}

std::vector<double> window_times(const std::vector<double>& times,
                                 const std::vector<double>& win) {
    if (win.empty()) return times;
    std::vector<double> out;
    for (double t : times)
        if (t >= win[0] - 1e-12 && t <= win[1] + 1e-12) out.push_back(t);
    return out;
}

InitSpec iidified(const InitSpec& init) {
    InitSpec out = init;
    out.kind = InitSpec::Kind::iid;
    out.eps = 0.0;
    return out;
}

}  // namespace

void ScanSpec::validate() const {
    model.validate();
    init.validate(model);
    if (n_list.empty()) throw ConfigError("scan.n_list must be nonempty");
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        if (n_list[i] < 1) throw ConfigError("scan.n_list entries must be >= 1");
        if (i > 0 && n_list[i] <= n_list[i - 1])
            throw ConfigError("scan.n_list must be strictly increasing");
    }
    if (slope_fit_kind(kind) && n_list.size() < 3)
        throw ConfigError("scan.n_list needs at least 3 values for a scaling fit");
    if (replicas < 100) throw ConfigError("scan.replicas must be >= 100");
    if (times.empty()) throw ConfigError("scan.times must be nonempty");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < 0.0) throw ConfigError("scan.times entries must be >= 0");
        if (i > 0 && times[i] <= times[i - 1])
            throw ConfigError("scan.times must be strictly increasing");
    }
    check_times_on_step(times, model.dt);
    if (threads < 1 || threads > 64) throw ConfigError("scan.threads must be in [1, 64]");
    if (!fit_window.empty() &&
        (fit_window.size() != 2 || !(fit_window[0] < fit_window[1])))
        throw ConfigError("scan.fit_window must be [t_lo, t_hi] with t_lo < t_hi");

    const bool dict_kind = needs_dictionary(kind);
    if (dict_kind || kind == ScanKind::concentration) {
        if (m_list.empty()) throw ConfigError("scan.m_list must be nonempty");
        for (std::size_t i = 0; i < m_list.size(); ++i) {
            if (m_list[i] < 1 || m_list[i] > (dict_kind ? 6 : 8))
                throw ConfigError("scan.m_list entries out of range");
            if (i > 0 && m_list[i] <= m_list[i - 1])
                throw ConfigError("scan.m_list must be strictly increasing");
        }
    }
    if (dict_kind) {
        if (m_list.back() > n_list.front())
            throw ConfigError("largest order in scan.m_list exceeds the smallest N");
        if (init.kind != InitSpec::Kind::iid && m_list.front() < 2)
            throw ConfigError(
                "m = 1 compares against the chaotic mean-field flow and needs iid initial "
                "data; restrict scan.m_list to m >= 2 for latent initial laws");
        if (dict.dim != model.phase_dim())
            throw ConfigError("dictionary.dim must equal the phase dimension " +
                              std::to_string(model.phase_dim()));
        if (ref_method_set && ref_method != MeanFieldReference::Method::reference_ensemble &&
            (model.dynamics != Dynamics::overdamped || model.d != 1))
            throw ConfigError("grid references (discrete_map, grid_pde) need the overdamped "
                              "d = 1 model; use reference_ensemble");
        if (n_ref < 4) throw ConfigError("scan.n_ref must be >= 4");
        if (ref_replicas < 1) throw ConfigError("scan.ref_replicas must be >= 1");
    }
    if (use_twin) {
        if (!dict_kind) throw ConfigError("scan.use_twin only applies to dictionary scans");
        if (model.dynamics != Dynamics::overdamped)
            throw ConfigError("scan.use_twin needs the overdamped model (the coupled "
                              "kappa = 0 baseline has a closed-form marginal there)");
        if (init.kind == InitSpec::Kind::latent_scale)
            throw ConfigError("scan.use_twin supports iid and latent_shift initial data");
    }
    if (kind == ScanKind::decay_fit || kind == ScanKind::relax_to_gibbs) {
        if (window_times(times, fit_window).size() < 8)
            throw ConfigError("decay fits need at least 8 time points inside the fit window");
    }
    if (kind == ScanKind::relax_to_gibbs && model.d != 1)
        throw ConfigError("relax_to_gibbs compares against the d = 1 Gibbs grid");
    if (kind == ScanKind::concentration) {
        if (!(conc_exponent > 0.0) || conc_exponent > 2.0)
            throw ConfigError("scan.conc_exponent must be in (0, 2]");
        if (n_ref < 100) throw ConfigError("scan.n_ref must be >= 100 for the concentration level");
    }
}

namespace {

std::string make_dictionary_id(const DictionarySpec& d) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "wf-d%d-r%d-q%g-p%g-f%dx%g", d.dim, d.r, d.q_prime, d.p,
                  d.freqs_per_axis, d.freq_max);
    std::string id = buf;
    id += "-s";
    for (std::size_t i = 0; i < d.sigmas.size(); ++i) {
        if (i) id += "_";
        std::snprintf(buf, sizeof(buf), "%g", d.sigmas[i]);
        id += buf;
    }
    return id;
}

}  // namespace

ScanSpec scan_spec_from_toml(const TomlTable& t) {
    ScanSpec s;
    s.model = model_from_toml(t);
    s.init = init_from_toml(t, s.model);
    s.force = force_mode_from_toml(t);
    s.kind = scan_kind_from_string(t.get_str("scan.kind"), t.line_of("scan.kind"));
    for (auto v : t.get_i64_array("scan.n_list")) s.n_list.push_back(v);
    s.replicas = t.get_i64("scan.replicas");
    s.times = t.get_f64_array("scan.times");
    if (t.has("scan.m_list")) {
        for (auto v : t.get_i64_array("scan.m_list")) s.m_list.push_back(static_cast<int>(v));
    } else if (s.kind == ScanKind::concentration) {
        s.m_list = {2, 4};
    }
    s.master_seed = static_cast<std::uint64_t>(t.get_i64_or("scan.master_seed", 1));
    s.threads = static_cast<int>(t.get_i64_or("scan.threads", 1));
    if (t.has("scan.reference")) {
        const std::string r = t.get_str("scan.reference");
        if (r == "reference_ensemble") s.ref_method = MeanFieldReference::Method::reference_ensemble;
        else if (r == "grid_pde") s.ref_method = MeanFieldReference::Method::grid_pde;
        else if (r == "discrete_map") s.ref_method = MeanFieldReference::Method::discrete_map;
        else throw ConfigError("unknown scan.reference '" + r + "'", t.line_of("scan.reference"));
        s.ref_method_set = true;
    }
    s.n_ref = t.get_i64_or("scan.n_ref", 100000);
    s.ref_replicas = static_cast<int>(t.get_i64_or("scan.ref_replicas", 2));
    s.use_twin = t.get_bool_or("scan.use_twin", false);
    s.conc_exponent = t.get_f64_or("scan.conc_exponent", 1.0 / 3.0);
    if (t.has("scan.fit_window")) s.fit_window = t.get_f64_array("scan.fit_window");

    s.dict.dim = static_cast<int>(t.get_i64_or("dictionary.dim", s.model.phase_dim()));
    s.dict.r = static_cast<int>(t.get_i64_or("dictionary.r", 3));
    s.dict.q_prime = t.get_f64_or("dictionary.q_prime", 12.0);
    s.dict.p = t.get_f64_or("dictionary.p", 1.0 / 6.0);
    s.dict.freqs_per_axis = static_cast<int>(t.get_i64_or("dictionary.freqs_per_axis", 9));
    s.dict.freq_max = t.get_f64_or("dictionary.freq_max", 4.0);
    if (t.has("dictionary.sigmas")) s.dict.sigmas = t.get_f64_array("dictionary.sigmas");
    s.dictionary_id = make_dictionary_id(s.dict);
    s.validate();
    return s;
}

Json dictionary_snapshot(const Dictionary& dict) {
    Json arr = Json::array();
    for (const auto& fn : dict.fns) {
        Json j;
        j["id"] = fn.id;
        j["dim"] = fn.dim;
        j["xi"] = fn.xi;
        j["theta"] = fn.theta;
        j["sigma"] = fn.sigma;
        j["p"] = fn.p;
        j["amplitude"] = fn.amplitude;
        j["c"] = fn.c;
        arr.push_back(j);
    }
    return arr;
}

Json scan_run_params(const ScanSpec& spec) {
    Json j;
    j["kind"] = scan_kind_name(spec.kind);
    j["n_list"] = spec.n_list;
    j["replicas"] = spec.replicas;
    j["times"] = spec.times;
    j["m_list"] = spec.m_list;
    j["master_seed"] = spec.master_seed;
    j["force"] = force_mode_to_string(spec.force);
    j["dictionary_id"] = spec.dictionary_id;
    j["n_ref"] = spec.n_ref;
    j["ref_replicas"] = spec.ref_replicas;
    j["use_twin"] = spec.use_twin;
    j["conc_exponent"] = spec.conc_exponent;
    j["fit_window"] = spec.fit_window;
    Json model;
    model["dynamics"] = spec.model.dynamics == Dynamics::kinetic ? "kinetic" : "overdamped";
    model["d"] = spec.model.d;
    model["kappa"] = spec.model.kappa;
    model["beta"] = spec.model.beta;
    model["a"] = spec.model.a;
    model["dt"] = spec.model.dt;
    model["potential"] = potential_to_string(spec.model.potential);
    j["model"] = model;
    Json init;
    init["kind"] = spec.init.kind == InitSpec::Kind::iid ? "iid"
                   : spec.init.kind == InitSpec::Kind::latent_shift ? "latent_shift"
                                                                    : "latent_scale";
    init["mean_x"] = spec.init.mean_x;
    init["var_x"] = spec.init.var_x;
    init["mean_v"] = spec.init.mean_v;
    init["var_v"] = spec.init.var_v;
    init["eps"] = spec.init.eps;
    j["init"] = init;
    if (spec.ref_method_set) j["reference"] = method_to_string(spec.ref_method);
    return j;
}

// ---- scan execution ------------------------------------------------------------------

namespace {

// Equal-size replica batches are the parallel work unit and the jackknife
// resampling unit.  Replicas inside a batch are processed in index order and
// batch partials combine in batch order, so results cannot depend on thread
// scheduling.  M gets trimmed only when it has no divisor in [64, 256].
void choose_batches(long long M, long long& B, long long& M_adj,
                    std::vector<std::string>& warnings) {
    M_adj = M;
    if (M <= 256) {
        B = M;
        return;
    }
    long long best = 1;
    for (long long b = 256; b >= 2; --b)
        if (M % b == 0) {
            best = b;
            break;
        }
    if (best >= 64) {
        B = best;
        return;
    }
    M_adj = 200 * (M / 200);
    B = 200;
    warnings.push_back("replicas trimmed from " + std::to_string(M) + " to " +
                       std::to_string(M_adj) + " for equal replica batching");
}

struct JobFailure {
    long long job = 0;
    std::string what;
};

// Self-scheduling worker pool.  On a failure the pool stops claiming new jobs,
// lets in-flight jobs finish, and reports the failure with the smallest job
// index — jobs are claimed in increasing order, so that minimum is exactly the
// failure a sequential run would hit first, whatever the thread count.
std::optional<JobFailure> parallel_jobs(int threads, long long n_jobs,
                                        const std::function<void(int, long long)>& fn) {
    threads = static_cast<int>(std::min<long long>(threads, n_jobs));
    if (threads <= 1) {
        for (long long j = 0; j < n_jobs; ++j) {
            try {
                fn(0, j);
            } catch (const std::exception& e) {
                return JobFailure{j, e.what()};
            }
        }
        return std::nullopt;
    }
    std::atomic<long long> next{0};
    std::atomic<bool> stop{false};
    std::mutex mu;
    std::optional<JobFailure> failure;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int wk = 0; wk < threads; ++wk) {
        pool.emplace_back([&, wk] {
            for (;;) {
                if (stop.load(std::memory_order_relaxed)) break;
                long long j = next.fetch_add(1, std::memory_order_relaxed);
                if (j >= n_jobs) break;
                try {
                    fn(wk, j);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lk(mu);
                    if (!failure || j < failure->job) failure = JobFailure{j, e.what()};
                    stop.store(true, std::memory_order_relaxed);
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    return failure;
}

// φ(z_i) for every particle; kinetic probes see z = (x, v).
void eval_probe(const Ensemble& e, const TestFunction& fn, std::vector<double>& out) {
    out.resize(e.n);
    if (!e.has_v && e.d == 1) {
        for (int i = 0; i < e.n; ++i) out[i] = fn.eval1(e.x[i]);
        return;
    }
    double z[6];
    for (int i = 0; i < e.n; ++i) {
        for (int c = 0; c < e.d; ++c) z[c] = e.xi(i, c);
        if (e.has_v)
            for (int c = 0; c < e.d; ++c) z[e.d + c] = e.v[static_cast<std::size_t>(i) * e.d + c];
        out[i] = fn.eval(z);
    }
}

// Exact marginal of the κ = 0 overdamped chain after k Euler–Maruyama steps —
// the control-variate baseline's law, so its contribution can be re-centered
// without Monte Carlo error.  A shared latent shift only widens the t = 0
// variance; the chain stays coordinate-wise Gaussian.
void twin_marginal(const ModelConfig& cfg, const InitSpec& init, long long k,
                   std::vector<double>& mean, std::vector<double>& var) {
    const double r = 1.0 - cfg.a * cfg.dt;
    const double rk = std::pow(r, static_cast<double>(k));
    const double r2 = r * r;
    double v0 = init.var_x;
    if (init.kind == InitSpec::Kind::latent_shift) v0 += sqr(init.eps);
    double vk;
    if (std::abs(1.0 - r2) < 1e-14)
        vk = v0 + static_cast<double>(k) * cfg.dt;
    else
        vk = v0 * rk * rk + cfg.dt * (1.0 - rk * rk) / (1.0 - r2);
    mean.assign(cfg.d, 0.0);
    var.assign(cfg.d, vk);
    for (int c = 0; c < cfg.d; ++c) mean[c] = init.mean_x_at(c) * rk;
}

// ---- batched per-cell statistics ---------------------------------------------------

// Batch partial sums for one (N, φ, t) cell: U-statistic sums, power sums of
// U₁ for the cumulant route, Σφ_c² for the m = 2 identity, and the twin's U₁.
// Everything downstream is a smooth function of batch means, so leave-one-
// batch-out jackknife gives every standard error from these tables alone.
struct CellTables {
    int n_phi = 0, n_t = 0, m_max = 0;
    long long B = 0, s = 0, M = 0;
    bool twin = false;
    std::vector<double> su, sp;   // [b][phi][t][j]
    std::vector<double> sq, stw;  // [b][phi][t]

    CellTables(int np, int nt, int mm, long long B_, long long s_, bool tw)
        : n_phi(np), n_t(nt), m_max(mm), B(B_), s(s_), M(B_ * s_), twin(tw) {
        const std::size_t nu = static_cast<std::size_t>(B) * n_phi * n_t * m_max;
        const std::size_t nq = static_cast<std::size_t>(B) * n_phi * n_t;
        su.assign(nu, 0.0);
        sp.assign(nu, 0.0);
        sq.assign(nq, 0.0);
        if (twin) stw.assign(nq, 0.0);
    }
    std::size_t iu(long long b, int p, int ti, int j) const {
        return ((static_cast<std::size_t>(b) * n_phi + p) * n_t + ti) * m_max + j;
    }
    std::size_t iq(long long b, int p, int ti) const {
        return (static_cast<std::size_t>(b) * n_phi + p) * n_t + ti;
    }
};

// One (φ, t) slice gathered across batches, with totals.
struct CellSlice {
    int m_max = 0;
    long long B = 0, s = 0, M = 0;
    bool twin = false;
    std::vector<double> su, sp;  // [j][b]
    std::vector<double> sq, stw;
    std::vector<double> Su, Sp;
    double Sq = 0.0, Stw = 0.0;

    CellSlice(const CellTables& tab, int p, int ti)
        : m_max(tab.m_max), B(tab.B), s(tab.s), M(tab.M), twin(tab.twin) {
        su.resize(static_cast<std::size_t>(m_max) * B);
        sp.resize(static_cast<std::size_t>(m_max) * B);
        sq.resize(B);
        if (twin) stw.resize(B);
        for (long long b = 0; b < B; ++b) {
            for (int j = 0; j < m_max; ++j) {
                su[static_cast<std::size_t>(j) * B + b] = tab.su[tab.iu(b, p, ti, j)];
                sp[static_cast<std::size_t>(j) * B + b] = tab.sp[tab.iu(b, p, ti, j)];
            }
            sq[b] = tab.sq[tab.iq(b, p, ti)];
            if (twin) stw[b] = tab.stw[tab.iq(b, p, ti)];
        }
        Su.resize(m_max);
        Sp.resize(m_max);
        for (int j = 0; j < m_max; ++j) {
            Su[j] = tree_sum(&su[static_cast<std::size_t>(j) * B], B);
            Sp[j] = tree_sum(&sp[static_cast<std::size_t>(j) * B], B);
        }
        Sq = tree_sum(sq);
        if (twin) Stw = tree_sum(stw);
    }

    std::vector<double> a_means() const {
        std::vector<double> a(m_max);
        for (int j = 0; j < m_max; ++j) a[j] = Su[j] / M;
        return a;
    }
    std::vector<double> a_ses() const {
        std::vector<double> se(m_max);
        std::vector<double> loo(B);
        for (int j = 0; j < m_max; ++j) {
            for (long long b = 0; b < B; ++b)
                loo[b] = (Su[j] - su[static_cast<std::size_t>(j) * B + b]) / (M - s);
            se[j] = jackknife_from_loo(loo);
        }
        return se;
    }
    double q_mean() const { return Sq / M; }
    double twin_mean() const { return twin ? Stw / M : 0.0; }

    double moebius(int m, double& se) const {
        std::vector<double> a(m);
        for (int j = 0; j < m; ++j) a[j] = Su[j] / M;
        double value = cumulants_from_moments(a)[m - 1];
        std::vector<double> loo(B);
        for (long long b = 0; b < B; ++b) {
            std::vector<double> al(m);
            for (int j = 0; j < m; ++j)
                al[j] = (Su[j] - su[static_cast<std::size_t>(j) * B + b]) / (M - s);
            loo[b] = cumulants_from_moments(al)[m - 1];
        }
        se = jackknife_from_loo(loo);
        return value;
    }

    double cumulant(int m, double& se) const {
        std::vector<double> mom(m);
        for (int j = 0; j < m; ++j) mom[j] = Sp[j] / M;
        double value = cumulants_from_moments(mom)[m - 1];
        std::vector<double> loo(B);
        for (long long b = 0; b < B; ++b) {
            std::vector<double> ml(m);
            for (int j = 0; j < m; ++j)
                ml[j] = (Sp[j] - sp[static_cast<std::size_t>(j) * B + b]) / (M - s);
            loo[b] = cumulants_from_moments(ml)[m - 1];
        }
        se = jackknife_from_loo(loo);
        return value;
    }

    // ∫φ^{⊗m}(F^{N,m} − μ^{⊗m}); with the twin active, U₁'s mean is replaced by
    // the control-variate form ⟨U₁ − U₁_twin⟩ + (ν_twin φ − center).
    double gap(int m, double center, double cv_offset, double& se) const {
        auto combine = [&](const std::vector<double>& a, double tw_mean) {
            std::vector<double> adj(a.begin(), a.begin() + m);
            if (twin) adj[0] = adj[0] - tw_mean + cv_offset;
            return tensorized_marginal_gap(adj, center, m);
        };
        std::vector<double> a(m_max);
        for (int j = 0; j < m_max; ++j) a[j] = Su[j] / M;
        double value = combine(a, twin_mean());
        std::vector<double> loo(B);
        for (long long b = 0; b < B; ++b) {
            std::vector<double> al(m_max);
            for (int j = 0; j < m_max; ++j)
                al[j] = (Su[j] - su[static_cast<std::size_t>(j) * B + b]) / (M - s);
            double twl = twin ? (Stw - stw[b]) / (M - s) : 0.0;
            loo[b] = combine(al, twl);
        }
        se = jackknife_from_loo(loo);
        return value;
    }
};

// ---- shared scan context ----------------------------------------------------------

struct ScanCtx {
    const ScanSpec& spec;
    ResultSink& sink;
    ScanOutput& out;
    std::string kind_name;
    long long M = 0, B = 0, s = 0;

    void cell_error(long long N, const std::string& stage, const std::string& msg) {
        Json j;
        j["record"] = "cell_error";
        j["scan_kind"] = kind_name;
        j["N"] = N;
        j["stage"] = stage;
        j["message"] = msg;
        sink.record(j);
        out.cell_errors.push_back("N=" + std::to_string(N) + " [" + stage + "]: " + msg);
    }
};

struct SeriesKey {
    std::string metric;
    int m;
    double t;
    bool operator<(const SeriesKey& o) const {
        if (metric != o.metric) return metric < o.metric;
        if (m != o.m) return m < o.m;
        return t < o.t;
    }
};

using ProxyValue = std::pair<double, double>;  // value, se

// one integrator pair + scratch buffers per worker thread
struct DictWorker {
    std::unique_ptr<Integrator> integ, integ_twin;
    std::vector<double> vals, vals_tw, U;
};

bool run_dict_cell(ScanCtx& cx, const Dictionary& dict, long long N,
                   const std::vector<double>& centers, const std::vector<double>& cv_offsets,
                   const InitSpec& init_used, std::uint32_t replica_offset, bool emit_gaps,
                   const std::vector<double>& cell_times, const std::string& metric_suffix,
                   std::map<SeriesKey, std::vector<std::pair<long long, ProxyValue>>>& series,
                   std::map<SeriesKey, std::string>& argmax_ids) {
    const ScanSpec& spec = cx.spec;
    const int n_phi = static_cast<int>(dict.fns.size());
    const int n_t = static_cast<int>(cell_times.size());
    const int m_max = spec.m_list.back();
    const bool twin = spec.use_twin;

    ModelConfig cfgN = spec.model;
    cfgN.n_particles = static_cast<int>(N);
    cfgN.t_final = std::max(cell_times.back(), spec.model.dt);
    ModelConfig cfgTw = cfgN;
    cfgTw.kappa = 0.0;

    CellTables tab(n_phi, n_t, m_max, cx.B, cx.s, twin);
    std::vector<DictWorker> workers(std::max(1, spec.threads));

    auto body = [&](int wk, long long b) {
        DictWorker& w = workers[wk];
        if (!w.integ) {
            w.integ = std::make_unique<Integrator>(cfgN, spec.force, RngLineage{spec.master_seed, 0});
            if (twin)
                w.integ_twin =
                    std::make_unique<Integrator>(cfgTw, spec.force, RngLineage{spec.master_seed, 0});
            w.U.resize(m_max);
        }
        for (long long r = b * cx.s; r < (b + 1) * cx.s; ++r) {
            const RngLineage lin{spec.master_seed,
                                 static_cast<std::uint32_t>(r) + replica_offset};
            Ensemble e = draw_initial_ensemble(cfgN, init_used, lin);
            w.integ->set_lineage(lin);
            for (int ti = 0; ti < n_t; ++ti) {
                w.integ->run_to(e, cell_times[ti]);
                for (int p = 0; p < n_phi; ++p) {
                    eval_probe(e, dict.fns[p], w.vals);
                    const double c = centers[static_cast<std::size_t>(p) * n_t + ti];
                    double q = 0.0;
                    for (int i = 0; i < static_cast<int>(N); ++i) {
                        w.vals[i] -= c;
                        q += w.vals[i] * w.vals[i];
                    }
                    ustat_all_orders(w.vals.data(), static_cast<int>(N), m_max, w.U.data());
                    const std::size_t base = tab.iu(b, p, ti, 0);
                    double pw = w.U[0];
                    for (int j = 0; j < m_max; ++j) {
                        tab.su[base + j] += w.U[j];
                        tab.sp[base + j] += pw;
                        pw *= w.U[0];
                    }
                    tab.sq[tab.iq(b, p, ti)] += q / static_cast<double>(N);
                }
            }
            if (twin) {
                Ensemble et = draw_initial_ensemble(cfgTw, init_used, lin);
                w.integ_twin->set_lineage(lin);
                for (int ti = 0; ti < n_t; ++ti) {
                    w.integ_twin->run_to(et, cell_times[ti]);
                    for (int p = 0; p < n_phi; ++p) {
                        eval_probe(et, dict.fns[p], w.vals_tw);
                        const double c = centers[static_cast<std::size_t>(p) * n_t + ti];
                        double mean = tree_sum(w.vals_tw) / static_cast<double>(N);
                        tab.stw[tab.iq(b, p, ti)] += mean - c;
                    }
                }
            }
        }
    };

    auto failure = parallel_jobs(spec.threads, cx.B, body);
    if (failure) {
        cx.cell_error(N, "cell", "replica batch " + std::to_string(failure->job) + ": " +
                                     failure->what);
        return false;
    }

    // gather every slice once, then emit records in fixed (t, φ) order
    std::vector<std::unique_ptr<CellSlice>> slices(static_cast<std::size_t>(n_phi) * n_t);
    for (int p = 0; p < n_phi; ++p)
        for (int ti = 0; ti < n_t; ++ti)
            slices[static_cast<std::size_t>(p) * n_t + ti] = std::make_unique<CellSlice>(tab, p, ti);
    auto slice = [&](int p, int ti) -> const CellSlice& {
        return *slices[static_cast<std::size_t>(p) * n_t + ti];
    };

    for (int ti = 0; ti < n_t; ++ti) {
        for (int p = 0; p < n_phi; ++p) {
            const CellSlice& sl = slice(p, ti);
            Json j;
            j["record"] = "moment";
            j["scan_kind"] = cx.kind_name;
            j["N"] = N;
            j["phi"] = dict.fns[p].id;
            j["t"] = cell_times[ti];
            j["M"] = tab.M;
            j["center"] = centers[static_cast<std::size_t>(p) * n_t + ti];
            j["a"] = sl.a_means();
            j["a_se"] = sl.a_ses();
            if (m_max >= 2) j["q_mean"] = sl.q_mean();
            if (twin) {
                j["twin_mean"] = sl.twin_mean();
                j["twin_offset"] = cv_offsets[static_cast<std::size_t>(p) * n_t + ti];
            }
            cx.sink.record(j);
        }

        for (int m : spec.m_list) {
            if (m < 2) continue;
            for (int p = 0; p < n_phi; ++p) {
                const CellSlice& sl = slice(p, ti);
                for (int route = 0; route < 2; ++route) {
                    double se = 0.0;
                    double v = route == 0 ? sl.moebius(m, se) : sl.cumulant(m, se);
                    Json j;
                    j["record"] = "correlation";
                    j["scan_kind"] = cx.kind_name;
                    j["N"] = N;
                    j["m"] = m;
                    j["phi"] = dict.fns[p].id;
                    j["t"] = cell_times[ti];
                    j["route"] = route == 0 ? "moebius" : "cumulant";
                    j["value"] = v;
                    j["se"] = se;
                    cx.sink.record(j);
                }
            }
        }

        if (emit_gaps) {
            for (int m : spec.m_list) {
                for (int p = 0; p < n_phi; ++p) {
                    const CellSlice& sl = slice(p, ti);
                    double se = 0.0;
                    double v = sl.gap(m, centers[static_cast<std::size_t>(p) * n_t + ti],
                                      twin ? cv_offsets[static_cast<std::size_t>(p) * n_t + ti] : 0.0,
                                      se);
                    Json j;
                    j["record"] = "gap";
                    j["scan_kind"] = cx.kind_name;
                    j["N"] = N;
                    j["m"] = m;
                    j["phi"] = dict.fns[p].id;
                    j["t"] = cell_times[ti];
                    j["value"] = v;
                    j["se"] = se;
                    j["cv"] = twin;
                    cx.sink.record(j);
                }
            }
        }

        // dual-norm proxies: max |pairing| over the dictionary, argmax logged
        for (int m : spec.m_list) {
            struct Best {
                double v = -1.0, val = 0.0, se = 0.0;
                int p = -1;
            };
            auto emit_proxy = [&](const std::string& metric, const Best& best) {
                Json j;
                j["record"] = "proxy";
                j["scan_kind"] = cx.kind_name;
                j["N"] = N;
                j["m"] = m;
                j["t"] = cell_times[ti];
                j["metric"] = metric;
                j["value"] = std::abs(best.val);
                j["se"] = best.se;
                j["argmax_phi"] = dict.fns[best.p].id;
                cx.sink.record(j);
                SummaryRow row;
                row.scan_kind = cx.kind_name;
                row.n = N;
                row.m = m;
                row.t_or_window = format_double(cell_times[ti]);
                row.metric = metric;
                row.value = std::abs(best.val);
                row.se = best.se;
                cx.sink.summary(row);
                SeriesKey key{metric, m, cell_times[ti]};
                series[key].push_back({N, {std::abs(best.val), best.se}});
                argmax_ids[key] = dict.fns[best.p].id;
            };

            if (emit_gaps) {
                Best best;
                for (int p = 0; p < n_phi; ++p) {
                    double se = 0.0;
                    double v = slice(p, ti).gap(
                        m, centers[static_cast<std::size_t>(p) * n_t + ti],
                        twin ? cv_offsets[static_cast<std::size_t>(p) * n_t + ti] : 0.0, se);
                    if (std::abs(v) > best.v) best = {std::abs(v), v, se, p};
                }
                emit_proxy("F_gap_proxy" + metric_suffix, best);
            }
            if (m >= 2) {
                Best best;
                for (int p = 0; p < n_phi; ++p) {
                    double se = 0.0;
                    double v = slice(p, ti).moebius(m, se);
                    if (std::abs(v) > best.v) best = {std::abs(v), v, se, p};
                }
                emit_proxy("G_corr_proxy" + metric_suffix, best);
                // replica-cumulant route: same N^{1-m} order, different constant
                // (per the route identity), usually the better-conditioned series
                Best bc;
                for (int p = 0; p < n_phi; ++p) {
                    double se = 0.0;
                    double v = slice(p, ti).cumulant(m, se);
                    if (std::abs(v) > bc.v) bc = {std::abs(v), v, se, p};
                }
                emit_proxy("G_corr_cum_proxy" + metric_suffix, bc);
            }
        }
    }
    return true;
}

// centers[p * n_t + ti] from the configured mean-field reference; emits the
// provenance record.  Centers always come from the iid flow — for m ≥ 2 the
// estimators are exactly shift-invariant, so the center only reduces variance.
bool build_centers(ScanCtx& cx, const Dictionary& dict, MeanFieldReference::Method method,
                   std::vector<double>& centers) {
    const ScanSpec& spec = cx.spec;
    const auto& times = spec.times;
    const int n_t = static_cast<int>(times.size());
    try {
        MeanFieldReference ref;
        if (method == MeanFieldReference::Method::reference_ensemble) {
            ref = meanfield_reference_ensemble(
                spec.model, iidified(spec.init), static_cast<int>(spec.n_ref), dict.fns, times,
                spec.master_seed ^ kReferenceSeedSalt, spec.force, spec.ref_replicas,
                static_cast<int>(spec.n_list.back()));
        } else {
            GridSpec1D grid = default_grid(spec.model, iidified(spec.init), 2048);
            const double mean = spec.init.mean_x_at(0);
            const double var = spec.init.var_x;
            auto mu0_of = [&](const GridSpec1D& g) { return gaussian_density(g, mean, var); };
            if (method == MeanFieldReference::Method::discrete_map) {
                ref = solve_discrete_map_extrapolated(spec.model, grid, mu0_of, dict.fns, times);
            } else {
                ref = solve_mckean_vlasov_1d(spec.model, mu0_of(grid), grid, dict.fns, times);
            }
        }
        centers.assign(static_cast<std::size_t>(dict.fns.size()) * n_t, 0.0);
        for (std::size_t p = 0; p < dict.fns.size(); ++p)
            for (int ti = 0; ti < n_t; ++ti)
                centers[p * n_t + ti] = ref.lookup(dict.fns[p].id, times[ti]);

        Json j;
        j["record"] = "reference";
        j["scan_kind"] = cx.kind_name;
        j["method"] = method_to_string(ref.method);
        if (ref.n_ref > 0) j["n_ref"] = ref.n_ref;
        j["bias_estimate"] = ref.bias_estimate;
        double mass_err = 0.0;
        for (const auto& kv : ref.mass) mass_err = std::max(mass_err, std::abs(kv.second - 1.0));
        j["mass_err"] = mass_err;
        j["warnings"] = ref.warnings;
        if (method == MeanFieldReference::Method::grid_pde && spec.m_list.front() == 1)
            j["note"] =
                "grid_pde solves the continuous-time flow; its O(dt) offset from the chain "
                "enters the m = 1 gap as an N-independent floor";
        cx.sink.record(j);
        return true;
    } catch (const std::exception& e) {
        cx.cell_error(-1, "reference", e.what());
        return false;
    }
}

void emit_slope_fit(ScanCtx& cx, const std::string& metric, int m, double t,
                    const std::vector<std::pair<long long, ProxyValue>>& pts) {
    try {
        std::vector<ScalePoint> sp;
        for (const auto& pr : pts)
            sp.push_back({static_cast<double>(pr.first), pr.second.first, pr.second.second});
        SlopeFit fit = fit_loglog_slope(sp);
        Json j;
        j["record"] = "fit";
        j["scan_kind"] = cx.kind_name;
        j["kind"] = "loglog";
        j["metric"] = metric;
        j["m"] = m;
        j["t"] = t;
        j["slope"] = fit.slope;
        j["slope_se"] = fit.slope_se;
        j["intercept"] = fit.intercept;
        j["r2"] = fit.r2;
        j["n_points"] = fit.n_points;
        j["warnings"] = fit.warnings;
        cx.sink.record(j);
        SummaryRow row;
        row.scan_kind = cx.kind_name;
        row.m = m;
        row.t_or_window = "t=" + format_double(t);
        row.metric = metric;
        row.value = fit.slope;
        row.se = fit.slope_se;
        row.fit_field = "r2";
        row.fit_value = fit.r2;
        cx.sink.summary(row);
        cx.out.slope_fits.push_back({metric, m, t, fit});
    } catch (const std::exception& e) {
        cx.cell_error(-1, "fit", metric + " m=" + std::to_string(m) + ": " + e.what());
    }
}

void emit_decay_fit(ScanCtx& cx, const std::string& metric, int m, long long N,
                    const std::vector<ScalePoint>& pts, DecayFit* out_fit) {
    try {
        DecayFit fit = fit_decay_plateau(pts);
        Json j;
        j["record"] = "fit";
        j["scan_kind"] = cx.kind_name;
        j["kind"] = "decay";
        j["metric"] = metric;
        j["m"] = m;
        j["N"] = N;
        j["window"] = std::vector<double>{fit.t_lo, fit.t_hi};
        j["plateau"] = fit.plateau;
        j["plateau_se"] = fit.plateau_se;
        j["amplitude"] = fit.amplitude;
        j["amplitude_se"] = fit.amplitude_se;
        j["rate"] = fit.rate;
        j["rate_se"] = std::isfinite(fit.rate_se) ? fit.rate_se : -1.0;
        j["residual_rms"] = fit.residual_rms;
        j["r2"] = fit.r2;
        j["identifiable"] = fit.identifiable;
        j["warnings"] = fit.warnings;
        cx.sink.record(j);
        SummaryRow row;
        row.scan_kind = cx.kind_name;
        row.n = N;
        row.m = m;
        row.t_or_window = format_double(fit.t_lo) + ".." + format_double(fit.t_hi);
        row.metric = metric;
        row.value = fit.rate;
        row.se = std::isfinite(fit.rate_se) ? fit.rate_se : 0.0;
        row.fit_field = "r2";
        row.fit_value = fit.r2;
        cx.sink.summary(row);
        cx.out.decay_fits.push_back({metric, m, N, fit});
        if (out_fit) *out_fit = fit;
    } catch (const std::exception& e) {
        cx.cell_error(N, "fit", metric + " m=" + std::to_string(m) + ": " + e.what());
    }
}

// chaos_scaling / correlation_scaling / decay_fit share the dictionary-cell
// machinery and differ only in which fits run at the end.
void run_dictionary_scan(ScanCtx& cx, long long only_n) {
    const ScanSpec& spec = cx.spec;
    Dictionary dict = build_dictionary(spec.dict);
    const int n_t = static_cast<int>(spec.times.size());
    const bool iid = spec.init.kind == InitSpec::Kind::iid;
    const bool decay = spec.kind == ScanKind::decay_fit;

    MeanFieldReference::Method method =
        spec.ref_method_set
            ? spec.ref_method
            : (spec.model.dynamics == Dynamics::overdamped && spec.model.d == 1
                   ? MeanFieldReference::Method::discrete_map
                   : MeanFieldReference::Method::reference_ensemble);

    std::vector<double> centers;
    if (!build_centers(cx, dict, method, centers)) return;

    // control-variate offsets ν_twin φ − center at each (φ, t)
    std::vector<double> cv_offsets;
    if (spec.use_twin) {
        cv_offsets.resize(centers.size());
        std::vector<double> mean, var;
        for (int ti = 0; ti < n_t; ++ti) {
            const long long k = std::llround(spec.times[ti] / spec.model.dt);
            twin_marginal(spec.model, spec.init, k, mean, var);
            for (std::size_t p = 0; p < dict.fns.size(); ++p)
                cv_offsets[p * n_t + ti] =
                    pair_with_gaussian(dict.fns[p], mean, var) - centers[p * n_t + ti];
        }
    }

    std::map<SeriesKey, std::vector<std::pair<long long, ProxyValue>>> series;
    std::map<SeriesKey, std::string> argmax_ids;

    for (long long N : spec.n_list) {
        if (only_n >= 0 && N != only_n) continue;
        bool ok = run_dict_cell(cx, dict, N, centers, cv_offsets, spec.init, 0, iid, spec.times,
                                "", series, argmax_ids);
        if (ok && decay && spec.init.kind != InitSpec::Kind::iid) {
            // iid companion at the final time: the plateau's chaotic baseline
            std::vector<double> comp_times{spec.times.back()};
            std::vector<double> comp_centers(dict.fns.size());
            std::vector<double> comp_cv(dict.fns.size());
            for (std::size_t p = 0; p < dict.fns.size(); ++p) {
                comp_centers[p] = centers[p * n_t + (n_t - 1)];
                if (spec.use_twin) comp_cv[p] = cv_offsets[p * n_t + (n_t - 1)];
            }
            run_dict_cell(cx, dict, N, comp_centers, comp_cv, iidified(spec.init),
                          kCompanionReplicaOffset, false, comp_times, "_iid", series, argmax_ids);
        }
        if (ok) ++cx.out.cells_done;
    }
    if (only_n >= 0) return;

    if (!decay) {
        for (int m : spec.m_list) {
            for (int ti = 0; ti < n_t; ++ti) {
                SeriesKey fk{"F_gap_proxy", m, spec.times[ti]};
                if (series.count(fk)) emit_slope_fit(cx, fk.metric, m, fk.t, series[fk]);
                SeriesKey gk{"G_corr_proxy", m, spec.times[ti]};
                if (series.count(gk)) emit_slope_fit(cx, gk.metric, m, gk.t, series[gk]);
                SeriesKey ck{"G_corr_cum_proxy", m, spec.times[ti]};
                if (series.count(ck)) emit_slope_fit(cx, ck.metric, m, ck.t, series[ck]);
            }
        }
        return;
    }

    // decay fits per (metric, N, m) over the window, then the iid plateau comparison
    for (long long N : spec.n_list) {
        for (int m : spec.m_list) {
            if (m < 2) continue;
            for (const char* metric : {"G_corr_proxy", "G_corr_cum_proxy"}) {
                std::vector<ScalePoint> pts;
                for (int ti = 0; ti < n_t; ++ti) {
                    SeriesKey key{metric, m, spec.times[ti]};
                    auto it = series.find(key);
                    if (it == series.end()) continue;
                    for (const auto& pr : it->second)
                        if (pr.first == N) {
                            if (spec.fit_window.empty() ||
                                (spec.times[ti] >= spec.fit_window[0] - 1e-12 &&
                                 spec.times[ti] <= spec.fit_window[1] + 1e-12))
                                pts.push_back({spec.times[ti], pr.second.first, pr.second.second});
                        }
                }
                DecayFit fit;
                emit_decay_fit(cx, metric, m, N, pts, &fit);

                SeriesKey ik{std::string(metric) + "_iid", m, spec.times.back()};
                auto it = series.find(ik);
                if (it == series.end()) continue;
                for (const auto& pr : it->second) {
                    if (pr.first != N) continue;
                    const double iid_value = pr.second.first, iid_se = pr.second.second;
                    const double comb =
                        std::sqrt(sqr(fit.plateau_se) + sqr(iid_se)) + 1e-300;
                    Json j;
                    j["record"] = "plateau_check";
                    j["scan_kind"] = cx.kind_name;
                    j["metric"] = metric;
                    j["N"] = N;
                    j["m"] = m;
                    j["t"] = spec.times.back();
                    j["plateau"] = fit.plateau;
                    j["plateau_se"] = fit.plateau_se;
                    j["iid_value"] = iid_value;
                    j["iid_se"] = iid_se;
                    j["n_sigma"] = std::abs(fit.plateau - iid_value) / comb;
                    cx.sink.record(j);
                }
            }
        }
    }
}

// ---- concentration scan ----------------------------------------------------------

void run_concentration(ScanCtx& cx, long long only_n) {
    const ScanSpec& spec = cx.spec;
    const int n_t = static_cast<int>(spec.times.size());
    const double r_exp = spec.conc_exponent;

    // level L(t): reference mean of Q_{2p} at a large independent ensemble
    std::vector<double> L(n_t, 0.0), L_se(n_t, 0.0);
    try {
        ModelConfig cfgR = spec.model;
        cfgR.n_particles = static_cast<int>(spec.n_ref);
        cfgR.t_final = std::max(spec.times.back(), spec.model.dt);
        const int R = spec.ref_replicas;
        std::vector<double> qref(static_cast<std::size_t>(R) * n_t);
        for (int r = 0; r < R; ++r) {
            const RngLineage lin{spec.master_seed ^ kReferenceSeedSalt,
                                 static_cast<std::uint32_t>(r)};
            Ensemble e = draw_initial_ensemble(cfgR, iidified(spec.init), lin);
            Integrator integ(cfgR, spec.force, lin);
            for (int ti = 0; ti < n_t; ++ti) {
                integ.run_to(e, spec.times[ti]);
                qref[static_cast<std::size_t>(r) * n_t + ti] = empirical_Qr(e, r_exp);
            }
        }
        for (int ti = 0; ti < n_t; ++ti) {
            std::vector<double> col(R);
            for (int r = 0; r < R; ++r) col[r] = qref[static_cast<std::size_t>(r) * n_t + ti];
            L[ti] = tree_sum(col) / R;
            if (R >= 2) {
                double ss = 0.0;
                for (double v : col) ss += sqr(v - L[ti]);
                L_se[ti] = std::sqrt(ss / (R * (R - 1.0)));
            }
            Json j;
            j["record"] = "conc_reference";
            j["scan_kind"] = cx.kind_name;
            j["t"] = spec.times[ti];
            j["r"] = r_exp;
            j["L"] = L[ti];
            j["L_se"] = L_se[ti];
            j["n_ref"] = spec.n_ref;
            j["replicas"] = R;
            cx.sink.record(j);
        }
    } catch (const std::exception& e) {
        cx.cell_error(-1, "reference", e.what());
        return;
    }

    std::map<SeriesKey, std::vector<std::pair<long long, ProxyValue>>> series;

    for (long long N : spec.n_list) {
        if (only_n >= 0 && N != only_n) continue;
        ModelConfig cfgN = spec.model;
        cfgN.n_particles = static_cast<int>(N);
        cfgN.t_final = std::max(spec.times.back(), spec.model.dt);

        std::vector<double> q(static_cast<std::size_t>(cx.M) * n_t, 0.0);
        struct W {
            std::unique_ptr<Integrator> integ;
        };
        std::vector<W> workers(std::max(1, spec.threads));
        auto body = [&](int wk, long long b) {
            W& w = workers[wk];
            if (!w.integ)
                w.integ =
                    std::make_unique<Integrator>(cfgN, spec.force, RngLineage{spec.master_seed, 0});
            for (long long r = b * cx.s; r < (b + 1) * cx.s; ++r) {
                const RngLineage lin{spec.master_seed, static_cast<std::uint32_t>(r)};
                Ensemble e = draw_initial_ensemble(cfgN, spec.init, lin);
                w.integ->set_lineage(lin);
                for (int ti = 0; ti < n_t; ++ti) {
                    w.integ->run_to(e, spec.times[ti]);
                    q[static_cast<std::size_t>(r) * n_t + ti] = empirical_Qr(e, r_exp);
                }
            }
        };
        auto failure = parallel_jobs(spec.threads, cx.B, body);
        if (failure) {
            cx.cell_error(N, "cell",
                          "replica batch " + std::to_string(failure->job) + ": " + failure->what);
            continue;
        }

        for (int ti = 0; ti < n_t; ++ti) {
            std::vector<double> col(cx.M);
            for (long long r = 0; r < cx.M; ++r) col[r] = q[static_cast<std::size_t>(r) * n_t + ti];
            auto rows = concentration_scan(col, L[ti], spec.m_list);
            for (const auto& row : rows) {
                Json j;
                j["record"] = "concentration";
                j["scan_kind"] = cx.kind_name;
                j["N"] = N;
                j["m"] = row.m;
                j["t"] = spec.times[ti];
                j["r"] = r_exp;
                j["L"] = L[ti];
                j["value"] = row.value;
                j["se"] = row.se;
                cx.sink.record(j);
                SummaryRow srow;
                srow.scan_kind = cx.kind_name;
                srow.n = N;
                srow.m = row.m;
                srow.t_or_window = format_double(spec.times[ti]);
                srow.metric = "excess_moment";
                srow.value = row.value;
                srow.se = row.se;
                cx.sink.summary(srow);
                series[SeriesKey{"excess_moment", row.m, spec.times[ti]}].push_back(
                    {N, {row.value, row.se}});
            }
        }
        ++cx.out.cells_done;
    }
    if (only_n >= 0) return;

    for (int m : spec.m_list)
        for (int ti = 0; ti < n_t; ++ti) {
            SeriesKey key{"excess_moment", m, spec.times[ti]};
            if (series.count(key)) emit_slope_fit(cx, key.metric, m, key.t, series[key]);
        }
}

// ---- relaxation to Gibbs ----------------------------------------------------------

void run_relax(ScanCtx& cx, long long only_n) {
    const ScanSpec& spec = cx.spec;
    const int n_t = static_cast<int>(spec.times.size());

    GridSpec1D grid;
    std::vector<double> gibbs_cdf;
    try {
        grid = default_grid(spec.model, spec.init, 2048);
        GibbsState gs = gibbs_fixed_point(spec.model, grid);
        gibbs_cdf.resize(grid.n_cells);
        double acc = 0.0;
        for (int i = 0; i < grid.n_cells; ++i) {
            acc += gs.rho[i] * grid.dx();  // rho is a density; cells carry rho·dx mass
            gibbs_cdf[i] = acc;
        }
        Json j;
        j["record"] = "reference";
        j["scan_kind"] = cx.kind_name;
        j["method"] = "gibbs_fixed_point";
        j["iterations"] = gs.iterations;
        j["residual"] = gs.residual;
        j["velocity_var"] = gs.velocity_var;
        cx.sink.record(j);
    } catch (const std::exception& e) {
        cx.cell_error(-1, "reference", e.what());
        return;
    }

    for (long long N : spec.n_list) {
        if (only_n >= 0 && N != only_n) continue;
        ModelConfig cfgN = spec.model;
        cfgN.n_particles = static_cast<int>(N);
        cfgN.t_final = std::max(spec.times.back(), spec.model.dt);

        const int nc = grid.n_cells;
        // per-replica CDF counts at cell right edges, one row per (replica, t)
        std::vector<std::uint32_t> counts(static_cast<std::size_t>(cx.M) * n_t * nc, 0);
        std::atomic<long long> outside{0};
        struct W {
            std::unique_ptr<Integrator> integ;
            std::vector<double> xs;
        };
        std::vector<W> workers(std::max(1, spec.threads));
        auto body = [&](int wk, long long b) {
            W& w = workers[wk];
            if (!w.integ)
                w.integ =
                    std::make_unique<Integrator>(cfgN, spec.force, RngLineage{spec.master_seed, 0});
            for (long long r = b * cx.s; r < (b + 1) * cx.s; ++r) {
                const RngLineage lin{spec.master_seed, static_cast<std::uint32_t>(r)};
                Ensemble e = draw_initial_ensemble(cfgN, spec.init, lin);
                w.integ->set_lineage(lin);
                for (int ti = 0; ti < n_t; ++ti) {
                    w.integ->run_to(e, spec.times[ti]);
                    w.xs.assign(e.x.begin(), e.x.end());
                    std::sort(w.xs.begin(), w.xs.end());
                    std::uint32_t* row =
                        &counts[(static_cast<std::size_t>(r) * n_t + ti) * nc];
                    std::size_t k = 0;
                    for (int i = 0; i < nc; ++i) {
                        const double edge = grid.x_min + (i + 1) * grid.dx();
                        while (k < w.xs.size() && w.xs[k] <= edge) ++k;
                        row[i] = static_cast<std::uint32_t>(k);
                    }
                    if (!w.xs.empty() &&
                        (w.xs.front() < grid.x_min || w.xs.back() > grid.x_max))
                        outside.fetch_add(1, std::memory_order_relaxed);
                }
            }
        };
        auto failure = parallel_jobs(spec.threads, cx.B, body);
        if (failure) {
            cx.cell_error(N, "cell",
                          "replica batch " + std::to_string(failure->job) + ": " + failure->what);
            continue;
        }
        if (outside.load() > 0)
            cx.out.warnings.push_back("relax cell N=" + std::to_string(N) +
                                      ": samples left the Gibbs grid in " +
                                      std::to_string(outside.load()) + " replica-times");

        std::vector<ScalePoint> pts;
        std::vector<double> pooled(nc), loo(cx.M);
        for (int ti = 0; ti < n_t; ++ti) {
            std::fill(pooled.begin(), pooled.end(), 0.0);
            for (long long r = 0; r < cx.M; ++r) {
                const std::uint32_t* row = &counts[(static_cast<std::size_t>(r) * n_t + ti) * nc];
                for (int i = 0; i < nc; ++i) pooled[i] += row[i];
            }
            const double total = static_cast<double>(cx.M) * static_cast<double>(N);
            double w1 = 0.0;
            for (int i = 0; i < nc; ++i) w1 += std::abs(pooled[i] / total - gibbs_cdf[i]);
            w1 *= grid.dx();
            for (long long r = 0; r < cx.M; ++r) {
                const std::uint32_t* row = &counts[(static_cast<std::size_t>(r) * n_t + ti) * nc];
                const double tl = static_cast<double>(cx.M - 1) * static_cast<double>(N);
                double v = 0.0;
                for (int i = 0; i < nc; ++i) v += std::abs((pooled[i] - row[i]) / tl - gibbs_cdf[i]);
                loo[r] = v * grid.dx();
            }
            const double se = jackknife_from_loo(loo);

            Json j;
            j["record"] = "relax";
            j["scan_kind"] = cx.kind_name;
            j["N"] = N;
            j["t"] = spec.times[ti];
            j["metric"] = "w1_to_gibbs";
            j["value"] = w1;
            j["se"] = se;
            cx.sink.record(j);
            SummaryRow row;
            row.scan_kind = cx.kind_name;
            row.n = N;
            row.t_or_window = format_double(spec.times[ti]);
            row.metric = "w1_to_gibbs";
            row.value = w1;
            row.se = se;
            cx.sink.summary(row);

            if (spec.fit_window.empty() || (spec.times[ti] >= spec.fit_window[0] - 1e-12 &&
                                            spec.times[ti] <= spec.fit_window[1] + 1e-12))
                pts.push_back({spec.times[ti], w1, se});
        }
        ++cx.out.cells_done;
        if (only_n < 0) emit_decay_fit(cx, "w1_to_gibbs", 0, N, pts, nullptr);
    }
}

}  // namespace

ScanOutput run_scan(const ScanSpec& spec, ResultSink& sink, long long only_n) {
    spec.validate();
    ScanOutput out;
    ScanCtx cx{spec, sink, out, scan_kind_name(spec.kind)};
    choose_batches(spec.replicas, cx.B, cx.M, out.warnings);
    cx.s = cx.M / cx.B;

    Json head;
    head["record"] = "scan";
    head["kind"] = cx.kind_name;
    head["M"] = cx.M;
    head["batches"] = cx.B;
    head["n_list"] = spec.n_list;
    head["m_list"] = spec.m_list;
    head["times"] = spec.times;
    head["dictionary_id"] = spec.dictionary_id;
    head["master_seed"] = spec.master_seed;
    sink.record(head);
    for (const auto& w : out.warnings) {
        Json j;
        j["record"] = "warning";
        j["message"] = w;
        sink.record(j);
    }

    switch (spec.kind) {
        case ScanKind::chaos_scaling:
        case ScanKind::correlation_scaling:
        case ScanKind::decay_fit:
            run_dictionary_scan(cx, only_n);
            break;
        case ScanKind::concentration:
            run_concentration(cx, only_n);
            break;
        case ScanKind::relax_to_gibbs:
            run_relax(cx, only_n);
            break;
    }
    return out;
}

}  // namespace mfl
