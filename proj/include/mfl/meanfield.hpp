#pragma once
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mfl/forces.hpp"
#include "mfl/model.hpp"
#include "mfl/norms.hpp"

namespace mfl {

// ---- 1-D cell grid ---------------------------------------------------------------

struct GridSpec1D {
    double x_min = -8.0;
    double x_max = 8.0;
    int n_cells = 2048;

    double dx() const { return (x_max - x_min) / n_cells; }
    double center(int i) const { return x_min + (i + 0.5) * dx(); }
    void validate() const;
};

// grid wide enough that both the initial law and the equilibrium have tail
// mass below ~1e-12 inside the box
GridSpec1D default_grid(const ModelConfig& cfg, const InitSpec& init, int n_cells = 2048);

// cell-centered Gaussian density, normalized so the cell sum is exactly 1
std::vector<double> gaussian_density(const GridSpec1D& grid, double mean, double var);

// midpoint-rule pairing ∫φ dμ for a cell-centered density
double pair_cells(const TestFunction& fn, const GridSpec1D& grid, const std::vector<double>& rho);

// mean and variance of a cell-centered density
void grid_mean_var(const GridSpec1D& grid, const std::vector<double>& rho, double& mean,
                   double& var);

// ---- Gibbs equilibrium ------------------------------------------------------------

// Fixed point of ρ ∝ exp(−β_eff(A + κW∗ρ)) on the grid; β_eff is β for the
// kinetic model (velocity marginal Gaussian with variance 1/β) and 2 for the
// overdamped model (unit-diffusion gradient flow).
struct GibbsState {
    GridSpec1D grid;
    std::vector<double> rho;
    double velocity_var = 0.0;  // 1/β for kinetic, 0 for overdamped
    double c_M = 0.0;           // density normalization constant
    int iterations = 0;
    double residual = 0.0;
    std::vector<double> residual_history;
};

// Damped Picard iteration (full steps while the residual decreases, damping
// 0.5 once it oscillates).  Converges when κ·β_eff·sup|W| < 1; on failure
// throws NumericError whose message carries the residual history.
GibbsState gibbs_fixed_point(const ModelConfig& cfg, const GridSpec1D& grid, double tol = 1e-10,
                             int max_iter = 500);

// ---- mean-field references ---------------------------------------------------------

struct MfObservation {
    std::string phi_id;
    double t = 0.0;
    double value = 0.0;
    double se = 0.0;
};

struct MeanFieldReference {
    enum class Method { reference_ensemble, grid_pde, discrete_map };
    Method method = Method::reference_ensemble;
    int n_ref = 0;
    std::vector<MfObservation> observations;
    std::map<double, double> mass;  // total mass at each output time
    double bias_estimate = 0.0;     // Richardson gap (ensemble) / renorm drift (grids)
    int substeps_total = 0;         // grid routes: sub-steps taken under the CFL bound
    std::vector<std::string> warnings;

    double lookup(const std::string& phi_id, double t) const;
    const MfObservation& find(const std::string& phi_id, double t) const;
};

std::string method_to_string(MeanFieldReference::Method m);

// Large-N_ref particle ensemble route (kinetic or overdamped).  Runs
// `replicas` independent copies at N_ref plus matching copies at N_ref/2;
// the Richardson gap max|V_{N/2} − V_N| estimates the O(1/N_ref) bias.
// Kinetic probes pair against z = (x, v), so φ.dim must equal 2d.
MeanFieldReference meanfield_reference_ensemble(const ModelConfig& cfg, const InitSpec& init,
                                                int n_ref,
                                                const std::vector<TestFunction>& observables,
                                                const std::vector<double>& timegrid,
                                                std::uint64_t master_seed, const ForceMode& mode,
                                                int replicas = 2, int max_experiment_n = 0);

// Conservative finite-volume solver for the overdamped nonlinear Fokker–Planck
// equation ∂_t μ = ½∂_xx μ − ∂_x(μ(κK∗μ − ax)) with zero-flux walls.  Interface
// advection is central, switching to upwind where the cell Péclet number
// exceeds 2; explicit sub-steps respect the positivity/CFL bound.  The nonlocal
// drift is recomputed from the current density every sub-step.
MeanFieldReference solve_mckean_vlasov_1d(const ModelConfig& cfg, const std::vector<double>& mu0,
                                          const GridSpec1D& grid,
                                          const std::vector<TestFunction>& observables,
                                          const std::vector<double>& timegrid);

// Fixed-step companion reference: the exact N → ∞ law of the Euler–Maruyama
// chain itself (drift pushforward by conservative remap, then convolution with
// the N(0, dt) increment).  Shares the integrator's time-discretization bias,
// so differences against finite-N runs isolate the 1/N effect.
MeanFieldReference solve_discrete_map_1d(const ModelConfig& cfg, const std::vector<double>& mu0,
                                         const GridSpec1D& grid,
                                         const std::vector<TestFunction>& observables,
                                         const std::vector<double>& timegrid);

// Runs the discrete map on `grid` and on its 2× refinement and Richardson-
// extrapolates every pairing: the map's spatial error is cleanly O(Δx²), so
// (4·V_fine − V_coarse)/3 removes it, leaving O(Δx⁴).  `mu0_of` rebuilds the
// initial density on each grid; bias_estimate reports the removed correction.
MeanFieldReference solve_discrete_map_extrapolated(
    const ModelConfig& cfg, const GridSpec1D& grid,
    const std::function<std::vector<double>(const GridSpec1D&)>& mu0_of,
    const std::vector<TestFunction>& observables, const std::vector<double>& timegrid);

}  // namespace mfl
