#pragma once
#include <map>
#include <string>
#include <vector>

namespace mfl {

// ---- test functions ----------------------------------------------------------

// Windowed Fourier probe on phase space,
//   φ(z) = c⁻¹ · ⟨z⟩^p · exp(−|z|²/(2σ²)) · cos(ξ·z + θ),  ⟨z⟩ = sqrt(1+|z|²).
// The normalization c is fixed so that ‖⟨z⟩^{−p}φ‖_{W^{r,q′}} = 1; the weight
// cancels against ⟨z⟩^p, so c is the plain W^{r,q′} norm of the windowed cosine
// and is independent of p.
struct TestFunction {
    std::string id;
    int dim = 1;
    std::vector<double> xi;   // frequency, one entry per phase coordinate
    double theta = 0.0;       // 0 (cosine) or π/2 (sine, up to sign)
    double sigma = 1.0;       // window width
    double p = 0.0;           // weight exponent, >= 0
    double amplitude = 1.0;   // raw amplitude; cancels in φ = (amplitude/c)·...
    double c = 1.0;           // W^{r,q′} norm of the raw windowed cosine

    double eval(const double* z) const;  // z has `dim` entries
    double eval1(double z) const;        // dim == 1 convenience
};

// Quadrature controls for the normalization integrals.  Node counts are chosen
// from the modulation frequency and window width; `refine` doubles the density
// for the convergence check.
struct QuadratureSpec {
    double half_width_sigmas = 8.0;  // integrate over [−Lσ, Lσ] per axis
    int min_nodes = 0;               // floor on the per-axis base count (testing dial)
    int max_nodes_1d = 8193;         // per-axis caps keep tensor grids tractable
    int max_nodes_2d = 2049;
    int max_nodes_3d = 257;
    double rel_tol = 1e-4;           // refinement agreement threshold
};

// Raw (un-normalized) spec for a probe; `normalize_testfn` fills in c.
struct RawTestFn {
    std::string id;
    std::vector<double> xi;
    double theta = 0.0;
    double sigma = 1.0;
    double amplitude = 1.0;
};

// ‖⟨z⟩^{−p}φ_raw‖_{W^{r,q′}} = (Σ_{|α|≤r} ‖∂^α g‖_{L^{q′}}^{q′})^{1/q′} with
// g the raw windowed cosine.  Derivatives are analytic: each axis factor is
// P_n(t)·e^{−t²/(2σ²)}e^{iξt} with the complex polynomial recurrence
// P_{n+1} = P_n′ + (−t/σ² + iξ)P_n, combined across axes before Re(·).
// Throws NumericError when a 2× refinement moves the value by more than
// quad.rel_tol relative; throws ConfigError on bad exponents or dim > 3.
TestFunction normalize_testfn(const RawTestFn& raw, int r, double q_prime, double p,
                              const QuadratureSpec& quad = {});

// Recompute the norm of an already-built probe (used by the stability check).
double testfn_norm(const TestFunction& fn, int r, double q_prime, const QuadratureSpec& quad);

// ---- dictionary ----------------------------------------------------------------

struct DictionarySpec {
    int dim = 1;
    int r = 3;
    double q_prime = 12.0;
    double p = 1.0 / 6.0;
    int freqs_per_axis = 9;    // grid over [−freq_max, freq_max] per axis
    double freq_max = 4.0;
    std::vector<double> sigmas = {1.0, 2.0, 4.0};
};

struct Dictionary {
    DictionarySpec spec;
    std::vector<TestFunction> fns;
};

// Builds the windowed-Fourier dictionary.  Mirror frequencies are dropped
// (cos is even, the sine probe only flips sign) and the identically-zero
// (ξ = 0, sine) combination is skipped, so every retained probe is distinct.
Dictionary build_dictionary(const DictionarySpec& spec, const QuadratureSpec& quad = {});

// ---- dual-norm proxy -------------------------------------------------------------

// max over the dictionary of |pairing(φ)| — a lower bound for the dual norm
// restricted to the unit ball probes; monotone in dictionary size.
struct ProxyResult {
    double value = 0.0;
    std::string argmax_id;
};
ProxyResult dual_norm_proxy(const std::map<std::string, double>& pairings,
                            const Dictionary& dict);

// ---- pairings against explicit densities ----------------------------------------

// ∫ φ dμ for μ Gaussian with independent coordinates (diagonal covariance),
// by the same tensor trapezoid rule as the normalization.
double pair_with_gaussian(const TestFunction& fn, const std::vector<double>& mean,
                          const std::vector<double>& var, const QuadratureSpec& quad = {});

// ∫ φ ρ dx on a uniform 1-D grid (trapezoid); nodes must be increasing.
double pair_with_grid(const TestFunction& fn, const std::vector<double>& nodes,
                      const std::vector<double>& density);

}  // namespace mfl
