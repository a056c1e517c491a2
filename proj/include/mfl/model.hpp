#pragma once
#include <string>
#include <utility>
#include <vector>

#include "mfl/mini_toml.hpp"
#include "mfl/rng.hpp"

namespace mfl {

enum class Dynamics { kinetic, overdamped };

// Interaction potential W: even, smooth, globally bounded with bounded
// gradient.  gaussian_bump: W(x) = w·exp(−|x|²/(2ℓ²)).  finite_fourier:
// W(x) = Σ_k c_k cos(ξ_k·x) (even and real by construction).
struct PotentialSpec {
    enum class Kind { gaussian_bump, finite_fourier };
    struct Mode {
        double c = 0.0;
        std::vector<double> xi;  // length d
    };

    Kind kind = Kind::gaussian_bump;
    double w = 1.0;
    double ell = 1.0;
    std::vector<Mode> modes;

    double sup_norm() const;  // sup_x |W(x)|
};

// (W(x), ∇W(x)); throws DomainError on non-finite input.
void eval_potential(const PotentialSpec& spec, const double* x, int d, double& W, double* gradW);
std::pair<double, double> eval_potential_1d(const PotentialSpec& spec, double x);

struct ModelConfig {
    Dynamics dynamics = Dynamics::overdamped;
    int d = 1;
    double kappa = 0.0;
    double beta = 1.0;  // kinetic only
    double a = 1.0;
    PotentialSpec potential;
    int n_particles = 1;
    double dt = 0.01;
    double t_final = 1.0;

    int phase_dim() const { return dynamics == Dynamics::kinetic ? 2 * d : d; }
    void validate() const;  // throws ConfigError on bad values
};

// Initial data families.  All are exchangeable; iid is the chaotic case.
//   iid:          particles drawn independently from the base Gaussian.
//   latent_shift: one latent Θ ~ N(0,1) per replica; every position gets +εΘ
//                 (each coordinate), giving order-ε² pair correlations.
//   latent_scale: one latent unit-mean log-normal s = exp(εΘ − ε²/2) per
//                 replica scales the centered Gaussian fluctuation of the
//                 velocities (kinetic) or positions (overdamped).
struct InitSpec {
    enum class Kind { iid, latent_shift, latent_scale };
    Kind kind = Kind::iid;
    std::vector<double> mean_x;  // broadcast to d components if size 1
    double var_x = 1.0;
    std::vector<double> mean_v;  // kinetic only
    double var_v = 1.0;
    double eps = 0.0;

    void validate(const ModelConfig& cfg) const;
    double mean_x_at(int comp) const { return mean_x.empty() ? 0.0 : mean_x[mean_x.size() == 1 ? 0 : comp]; }
    double mean_v_at(int comp) const { return mean_v.empty() ? 0.0 : mean_v[mean_v.size() == 1 ? 0 : comp]; }
};

// N particle states at one time; flat row-major coordinate arrays.
struct Ensemble {
    double t = 0.0;
    int n = 0;
    int d = 1;
    bool has_v = false;
    std::vector<double> x;  // n*d
    std::vector<double> v;  // n*d when has_v

    double& xi(int i, int c) { return x[static_cast<std::size_t>(i) * d + c]; }
    double xi(int i, int c) const { return x[static_cast<std::size_t>(i) * d + c]; }
};

// Deterministic draw: positions from the init_position stream in index order,
// velocities from init_velocity, then the replica's latent from init_latent.
Ensemble draw_initial_ensemble(const ModelConfig& cfg, const InitSpec& init, RngLineage lineage);

// Config-file bindings ([model], [potential], [init] sections).
ModelConfig model_from_toml(const TomlTable& t);
InitSpec init_from_toml(const TomlTable& t, const ModelConfig& cfg);
std::string potential_to_string(const PotentialSpec& spec);

}  // namespace mfl
