#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "mfl/model.hpp"

namespace mfl {

// Force evaluation strategy for F_i = −(κ/N) Σ_j ∇W(x_i − x_j).
//   exact_pairwise   O(N²·d), any potential; the correctness oracle.
//   fourier_factored O(N·K·d); Monte Carlo feature expansion of the Gaussian
//                    bump with K frequencies ~ N(0, ℓ⁻²I) fixed per run by
//                    feature_seed; unbiased over features, error ~ K^{-1/2}.
//   spectral_grid    O(N·K), d = 1 only; deterministic cosine-mode
//                    factorization.  For finite_fourier potentials the modes
//                    are the potential's own (the pairwise sum is evaluated
//                    exactly); for gaussian_bump they come from trapezoid
//                    quadrature of the closed-form Fourier transform, with
//                    kernel error < grad_tol uniformly over |x−y| ≤ 2·x_halfwidth.
struct ForceMode {
    enum class Kind { exact_pairwise, fourier_factored, spectral_grid };
    Kind kind = Kind::exact_pairwise;
    int K = 256;                      // fourier_factored feature count
    std::uint64_t feature_seed = 0;   // fourier_factored frequency stream
    double x_halfwidth = 8.0;         // spectral_grid admissible |x_i|
    double grad_tol = 1e-6;           // spectral_grid kernel accuracy target

    static ForceMode exact() { return {}; }
};

ForceMode force_mode_from_toml(const TomlTable& t);
std::string force_mode_to_string(const ForceMode& m);

// Cosine-mode decomposition W(u) ≈ Σ_k c_k cos(ξ_k u) shared by the
// spectral_grid force path, the PDE drift convolution, and the Gibbs solver.
struct SpectralKernel {
    std::vector<double> xi;  // mode frequencies
    std::vector<double> c;   // mode coefficients

    double eval_W(double u) const;
    double eval_dW(double u) const;  // W'(u)
};

// Builds the decomposition for a d=1 potential; max_abs_u is the largest
// |x − y| the kernel will be evaluated at.  Throws ConfigError for d > 1
// gaussian specs used with spectral paths.
SpectralKernel spectral_kernel_1d(const PotentialSpec& spec, double max_abs_u, double grad_tol);

class ForceEngine {
  public:
    ForceEngine(const ModelConfig& cfg, const ForceMode& mode);

    // Writes the N·d force array.  Workspace is reused across calls; one
    // engine per worker thread.
    void eval(const Ensemble& e, std::vector<double>& force);

    // Feature-sampling error probe for fourier_factored (max abs deviation
    // from exact_pairwise on the given ensemble).
    double deviation_from_exact(const Ensemble& e);

    const ForceMode& mode() const { return mode_; }
    const SpectralKernel& kernel() const { return kernel_; }

  private:
    ModelConfig cfg_;
    ForceMode mode_;
    SpectralKernel kernel_;                 // spectral_grid
    std::vector<double> omega_;             // fourier_factored frequencies, K*d
    // workspace
    std::vector<double> re_, im_, tc_, ts_; // spectral ladder
    std::vector<double> cosw_, sinw_;       // factored sums

    void eval_exact(const Ensemble& e, std::vector<double>& f) const;
    void eval_factored(const Ensemble& e, std::vector<double>& f);
    void eval_spectral(const Ensemble& e, std::vector<double>& f);
};

}  // namespace mfl
