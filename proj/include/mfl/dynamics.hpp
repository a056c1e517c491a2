#pragma once
#include <cstdint>
#include <functional>
#include <vector>

#include "mfl/forces.hpp"
#include "mfl/model.hpp"
#include "mfl/rng.hpp"

namespace mfl {

// Random-access normal fill: block `block_base + j` of the (lineage, domain)
// counter stream yields out[2j], out[2j+1].  Noise for step k of an N-particle
// run occupies blocks [k·B, (k+1)·B), B = ⌈N·d/2⌉, so a trajectory is a pure
// function of (master_seed, replica, step count) however it is scheduled.
void fill_normals_at(RngLineage lineage, RngDomain domain, std::uint64_t block_base, double* out,
                     std::size_t n);

// One-step integrators.
//   kinetic:    BAOAB-style splitting — half drift kick, half free flight,
//               exact OU velocity substep (friction β/2, unit diffusion:
//               c = e^{−βh/2}, s = √((1−e^{−βh})/β)), half flight, half kick.
//               One force evaluation per step via end-of-step caching.
//   overdamped: Euler–Maruyama, x += h·(F − a·x) + √h·ξ.
// Blow-up guard: any coordinate above 10⁶ raises NumericError with the time.
class Integrator {
  public:
    using NoiseOverride = std::function<void(std::uint64_t step, double* out, std::size_t n)>;

    Integrator(const ModelConfig& cfg, const ForceMode& mode, RngLineage lineage);

    void step(Ensemble& e);
    void run_to(Ensemble& e, double t_end);  // steps round((t_end − t)/dt) times

    // Test hook: replaces the per-step noise source (zero noise, matched
    // Richardson noise, ...).  Signature mirrors fill_normals_at.
    void set_noise_override(NoiseOverride f) { override_ = std::move(f); }

    // Re-targets the integrator at another replica stream so one engine (and
    // its spectral kernel) serves a whole batch; invalidates the force cache.
    void set_lineage(RngLineage l) {
        lin_ = l;
        force_step_ = ~0ull;
    }

    ForceEngine& force_engine() { return engine_; }

  private:
    ModelConfig cfg_;
    ForceEngine engine_;
    RngLineage lin_;
    NoiseOverride override_;
    std::vector<double> force_, noise_;
    std::uint64_t force_step_ = ~0ull;
    double ou_c_ = 0.0, ou_s_ = 0.0;

    std::uint64_t step_index(const Ensemble& e) const;
    void draw_noise(std::uint64_t k, std::size_t n);
    void step_kinetic_impl(Ensemble& e, std::uint64_t k);
    void step_overdamped_impl(Ensemble& e, std::uint64_t k);
    void check_finite(const Ensemble& e) const;
};

// Single-step forms matching the operation contracts; these construct a
// transient exact_pairwise engine, so repeated calls reproduce exactly what a
// persistent Integrator produces with the same mode.
void step_kinetic(Ensemble& e, const ModelConfig& cfg, RngLineage lineage);
void step_overdamped(Ensemble& e, const ModelConfig& cfg, RngLineage lineage);

// F_i = −(κ/N)·Σ_j ∇W(x_i − x_j) under the given evaluation mode.
std::vector<double> mean_field_force(const Ensemble& e, const ModelConfig& cfg,
                                     const ForceMode& mode);

}  // namespace mfl
