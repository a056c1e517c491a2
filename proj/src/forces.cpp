#include "mfl/forces.hpp"

#include <cmath>

#include "mfl/errors.hpp"

namespace mfl {

ForceMode force_mode_from_toml(const TomlTable& t) {
    ForceMode m;
    std::string kind = t.get_str_or("force.mode", "exact_pairwise");
    if (kind == "exact_pairwise") m.kind = ForceMode::Kind::exact_pairwise;
    else if (kind == "fourier_factored") m.kind = ForceMode::Kind::fourier_factored;
    else if (kind == "spectral_grid") m.kind = ForceMode::Kind::spectral_grid;
    else throw ConfigError("unknown force.mode '" + kind + "'", t.line_of("force.mode"));
    m.K = static_cast<int>(t.get_i64_or("force.n_features", 256));
    if (m.K < 1) throw ConfigError("force.n_features must be >= 1", t.line_of("force.n_features"));
    m.feature_seed = static_cast<std::uint64_t>(t.get_i64_or("force.feature_seed", 0));
    m.x_halfwidth = t.get_f64_or("force.x_halfwidth", 8.0);
    m.grad_tol = t.get_f64_or("force.grad_tol", 1e-6);
    return m;
}

std::string force_mode_to_string(const ForceMode& m) {
    switch (m.kind) {
        case ForceMode::Kind::exact_pairwise: return "exact_pairwise";
        case ForceMode::Kind::fourier_factored:
            return "fourier_factored(K=" + std::to_string(m.K) +
                   ",feature_seed=" + std::to_string(m.feature_seed) + ")";
        case ForceMode::Kind::spectral_grid:
            return "spectral_grid(x_halfwidth=" + std::to_string(m.x_halfwidth) + ")";
    }
    return "?";
}

double SpectralKernel::eval_W(double u) const {
    double s = 0.0;
    for (std::size_t k = 0; k < xi.size(); ++k) s += c[k] * std::cos(xi[k] * u);
    return s;
}

double SpectralKernel::eval_dW(double u) const {
    double s = 0.0;
    for (std::size_t k = 0; k < xi.size(); ++k) s -= c[k] * xi[k] * std::sin(xi[k] * u);
    return s;
}

SpectralKernel spectral_kernel_1d(const PotentialSpec& spec, double max_abs_u, double grad_tol) {
    SpectralKernel out;
    if (spec.kind == PotentialSpec::Kind::finite_fourier) {
        // The potential already is a finite cosine sum: factorization is exact.
        for (const auto& m : spec.modes) {
            out.c.push_back(m.c);
            out.xi.push_back(m.xi.at(0));
        }
        return out;
    }
    // gaussian_bump: W(u) = (1/π)∫₀^∞ Ŵ(ξ)cos(ξu)dξ, Ŵ(ξ) = w·ℓ·√(2π)·e^{−ℓ²ξ²/2}.
    // Trapezoid spacing Δξ periodizes W with period P = 2π/Δξ: the nearest
    // image sits P − max|u| away, so P = max|u| + margin·ℓ keeps the aliasing
    // below e^{−margin²/2}.  Truncation at Ξ bounds the gradient quadrature
    // error by ~ (w√(2π)/πℓ)·e^{−ℓ²Ξ²/2}·(Ξℓ+1).
    const double w = spec.w, ell = spec.ell;
    if (ell <= 0.0) throw ConfigError("spectral kernel: ell must be > 0");
    const double margin = std::sqrt(2.0 * std::log(std::max(1e4, 100.0 * std::abs(w) / grad_tol)));
    const double period = max_abs_u + margin * ell;
    const double dxi = 2.0 * M_PI / period;
    double cut = std::sqrt(2.0 * std::log(std::max(1e4, std::abs(w) / (grad_tol * ell)))) / ell;
    const int K = static_cast<int>(std::ceil(cut / dxi)) + 1;
    out.xi.resize(K);
    out.c.resize(K);
    const double amp = w * ell * std::sqrt(2.0 * M_PI) / M_PI * dxi;
    for (int k = 0; k < K; ++k) {
        double xik = k * dxi;
        out.xi[k] = xik;
        out.c[k] = amp * std::exp(-0.5 * ell * ell * xik * xik) * (k == 0 ? 0.5 : 1.0);
    }
    return out;
}

ForceEngine::ForceEngine(const ModelConfig& cfg, const ForceMode& mode) : cfg_(cfg), mode_(mode) {
    if (mode_.kind == ForceMode::Kind::fourier_factored) {
        if (cfg_.potential.kind != PotentialSpec::Kind::gaussian_bump)
            throw ConfigError("fourier_factored requires a gaussian_bump potential");
        omega_.resize(static_cast<std::size_t>(mode_.K) * cfg_.d);
        NormalStream fs({mode_.feature_seed, 0u}, RngDomain::features);
        fs.fill(omega_);
        for (auto& o : omega_) o /= cfg_.potential.ell;
        cosw_.resize(mode_.K);
        sinw_.resize(mode_.K);
    } else if (mode_.kind == ForceMode::Kind::spectral_grid) {
        if (cfg_.d != 1) throw ConfigError("spectral_grid force mode requires d = 1");
        kernel_ = spectral_kernel_1d(cfg_.potential, 2.0 * mode_.x_halfwidth, mode_.grad_tol);
        const std::size_t K = kernel_.xi.size();
        tc_.resize(K);
        ts_.resize(K);
    }
}

void ForceEngine::eval(const Ensemble& e, std::vector<double>& force) {
    force.assign(static_cast<std::size_t>(e.n) * e.d, 0.0);
    if (cfg_.kappa == 0.0) return;
    switch (mode_.kind) {
        case ForceMode::Kind::exact_pairwise: eval_exact(e, force); break;
        case ForceMode::Kind::fourier_factored: eval_factored(e, force); break;
        case ForceMode::Kind::spectral_grid: eval_spectral(e, force); break;
    }
}

void ForceEngine::eval_exact(const Ensemble& e, std::vector<double>& f) const {
    const int n = e.n, d = e.d;
    const double scale = -cfg_.kappa / n;
    std::vector<double> diff(d), grad(d);
    double W;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;  // ∇W(0) = 0 for even W; skipping is exact
            for (int c = 0; c < d; ++c) diff[c] = e.xi(i, c) - e.xi(j, c);
            eval_potential(cfg_.potential, diff.data(), d, W, grad.data());
            for (int c = 0; c < d; ++c) f[static_cast<std::size_t>(i) * d + c] += scale * grad[c];
        }
    }
}

void ForceEngine::eval_factored(const Ensemble& e, std::vector<double>& f) {
    // W(x−y) ≈ (w/K) Σ_k cos(ω_k·(x−y));  F_i = −(κ/N)(w/K) Σ_k ω_k ·
    //   [−sin(ω_k·x_i)·C_k + cos(ω_k·x_i)·S_k],  C_k = Σ_j cos(ω_k·x_j), etc.
    const int n = e.n, d = e.d, K = mode_.K;
    const double amp = cfg_.kappa * cfg_.potential.w / (static_cast<double>(n) * K);
    for (int k = 0; k < K; ++k) {
        const double* om = &omega_[static_cast<std::size_t>(k) * d];
        double C = 0.0, S = 0.0;
        for (int i = 0; i < n; ++i) {
            double ph = 0.0;
            for (int c = 0; c < d; ++c) ph += om[c] * e.xi(i, c);
            C += std::cos(ph);
            S += std::sin(ph);
        }
        for (int i = 0; i < n; ++i) {
            double ph = 0.0;
            for (int c = 0; c < d; ++c) ph += om[c] * e.xi(i, c);
            double g = amp * (std::sin(ph) * C - std::cos(ph) * S);
            for (int c = 0; c < d; ++c) f[static_cast<std::size_t>(i) * d + c] += g * om[c];
        }
    }
}

void ForceEngine::eval_spectral(const Ensemble& e, std::vector<double>& f) {
    // Phase-ladder factorization over gridded modes ξ_k = k·Δξ:
    //   z_i = e^{iΔξ·x_i}  (one sincos per particle), z_i^k by recurrence,
    //   T_k = Σ_j z_j^k,   F_i = (κ/N) Σ_k c_k ξ_k · Im[z_i^k · conj(T_k)].
    const int n = e.n;
    const int K = static_cast<int>(kernel_.xi.size());
    const double lim = mode_.x_halfwidth;
    const bool gridded = K >= 2 && kernel_.xi[0] == 0.0;
    const double dxi = gridded ? kernel_.xi[1] : 0.0;

    re_.resize(static_cast<std::size_t>(n) * K);
    im_.resize(static_cast<std::size_t>(n) * K);
    std::fill(tc_.begin(), tc_.end(), 0.0);
    std::fill(ts_.begin(), ts_.end(), 0.0);

    for (int i = 0; i < n; ++i) {
        double x = e.x[i];
        if (std::abs(x) > lim)
            throw NumericError("spectral_grid force: |x| = " + std::to_string(std::abs(x)) +
                               " exceeds x_halfwidth = " + std::to_string(lim) +
                               " at t = " + std::to_string(e.t));
        double* re = &re_[static_cast<std::size_t>(i) * K];
        double* im = &im_[static_cast<std::size_t>(i) * K];
        if (gridded) {
            double c1 = std::cos(dxi * x), s1 = std::sin(dxi * x);
            double cr = 1.0, ci = 0.0;
            for (int k = 0; k < K; ++k) {
                re[k] = cr;
                im[k] = ci;
                tc_[k] += cr;
                ts_[k] += ci;
                double nr = cr * c1 - ci * s1;
                ci = cr * s1 + ci * c1;
                cr = nr;
            }
        } else {
            for (int k = 0; k < K; ++k) {
                double ph = kernel_.xi[k] * x;
                re[k] = std::cos(ph);
                im[k] = std::sin(ph);
                tc_[k] += re[k];
                ts_[k] += im[k];
            }
        }
    }

    const double scale = cfg_.kappa / n;
    for (int i = 0; i < n; ++i) {
        const double* re = &re_[static_cast<std::size_t>(i) * K];
        const double* im = &im_[static_cast<std::size_t>(i) * K];
        double acc = 0.0;
        for (int k = 0; k < K; ++k) {
            double g = kernel_.c[k] * kernel_.xi[k];
            acc += g * (im[k] * tc_[k] - re[k] * ts_[k]);
        }
        f[i] = scale * acc;
    }
}

double ForceEngine::deviation_from_exact(const Ensemble& e) {
    std::vector<double> approx, exact;
    eval(e, approx);
    ForceEngine ref(cfg_, ForceMode::exact());
    ref.eval(e, exact);
    double dev = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i)
        dev = std::max(dev, std::abs(approx[i] - exact[i]));
    return dev;
}

}  // namespace mfl
