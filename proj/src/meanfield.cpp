#include "mfl/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mfl/dynamics.hpp"
#include "mfl/errors.hpp"

namespace mfl {

namespace {

double beta_eff(const ModelConfig& cfg) { return cfg.dynamics == Dynamics::kinetic ? cfg.beta : 2.0; }

// cosine/sine transforms of the density against the kernel modes, then the
// nonlocal drift κ(K∗ρ)(x) − a·x at the requested points:
//   (W∗ρ)(x) = Σ_k c_k [cos(ξ_k x)·C_k + sin(ξ_k x)·S_k]
//   (K∗ρ)(x) = Σ_k c_k ξ_k [sin(ξ_k x)·C_k − cos(ξ_k x)·S_k],  K = −W′
struct DriftOperator {
    const ModelConfig* cfg = nullptr;
    SpectralKernel kernel;
    // tables[k] holds cos(ξ_k ·), sin(ξ_k ·) at density cells and at eval points
    std::vector<std::vector<double>> cos_cell, sin_cell, cos_eval, sin_eval;
    std::vector<double> ck, sk;  // per-step transforms

    DriftOperator(const ModelConfig& c, const GridSpec1D& grid, const std::vector<double>& eval_x)
        : cfg(&c) {
        if (c.kappa == 0.0) return;
        double span = grid.x_max - grid.x_min;
        kernel = spectral_kernel_1d(c.potential, span, 1e-8);
        std::size_t K = kernel.xi.size();
        cos_cell.resize(K);
        sin_cell.resize(K);
        cos_eval.resize(K);
        sin_eval.resize(K);
        ck.resize(K);
        sk.resize(K);
        for (std::size_t k = 0; k < K; ++k) {
            cos_cell[k].resize(grid.n_cells);
            sin_cell[k].resize(grid.n_cells);
            for (int i = 0; i < grid.n_cells; ++i) {
                cos_cell[k][i] = std::cos(kernel.xi[k] * grid.center(i));
                sin_cell[k][i] = std::sin(kernel.xi[k] * grid.center(i));
            }
            cos_eval[k].resize(eval_x.size());
            sin_eval[k].resize(eval_x.size());
            for (std::size_t j = 0; j < eval_x.size(); ++j) {
                cos_eval[k][j] = std::cos(kernel.xi[k] * eval_x[j]);
                sin_eval[k][j] = std::sin(kernel.xi[k] * eval_x[j]);
            }
        }
    }

    // b(eval_x[j]) into out; rho is cell-centered with spacing dx
    void eval(const std::vector<double>& rho, double dx, const std::vector<double>& eval_x,
              std::vector<double>& out) {
        for (std::size_t j = 0; j < eval_x.size(); ++j) out[j] = -cfg->a * eval_x[j];
        if (cfg->kappa == 0.0) return;
        std::size_t K = kernel.xi.size();
        for (std::size_t k = 0; k < K; ++k) {
            double C = 0.0, S = 0.0;
            const double* cc = cos_cell[k].data();
            const double* ss = sin_cell[k].data();
            for (std::size_t i = 0; i < rho.size(); ++i) {
                C += cc[i] * rho[i];
                S += ss[i] * rho[i];
            }
            ck[k] = C * dx;
            sk[k] = S * dx;
        }
        for (std::size_t j = 0; j < eval_x.size(); ++j) {
            double drift = 0.0;
            for (std::size_t k = 0; k < K; ++k)
                drift += kernel.c[k] * kernel.xi[k] *
                         (sin_eval[k][j] * ck[k] - cos_eval[k][j] * sk[k]);
            out[j] += cfg->kappa * drift;
        }
    }
};

std::vector<double> observable_row(const Ensemble& e, const TestFunction& fn) {
    int dim = e.has_v ? 2 * e.d : e.d;
    if (fn.dim != dim)
        throw ConfigError("observable '" + fn.id + "' has dim " + std::to_string(fn.dim) +
                          " but the phase space has dim " + std::to_string(dim));
    std::vector<double> out(e.n);
    double z[6];
    for (int i = 0; i < e.n; ++i) {
        for (int c = 0; c < e.d; ++c) z[c] = e.xi(i, c);
        if (e.has_v)
            for (int c = 0; c < e.d; ++c) z[e.d + c] = e.v[static_cast<std::size_t>(i) * e.d + c];
        out[i] = fn.eval(z);
    }
    return out;
}

void check_timegrid(const std::vector<double>& timegrid, double dt) {
    double prev = -1e300;
    for (double t : timegrid) {
        if (t < 0.0) throw ConfigError("output times must be nonnegative");
        if (t <= prev) throw ConfigError("output times must be strictly increasing");
        double steps = t / dt;
        if (std::fabs(steps - std::round(steps)) > 1e-6)
            throw ConfigError("output time " + std::to_string(t) +
                              " is not a multiple of dt = " + std::to_string(dt));
        prev = t;
    }
}

}  // namespace

void GridSpec1D::validate() const {
    if (!(x_max > x_min)) throw ConfigError("grid needs x_max > x_min");
    if (n_cells < 8) throw ConfigError("grid needs at least 8 cells");
}

GridSpec1D default_grid(const ModelConfig& cfg, const InitSpec& init, int n_cells) {
    double sd_eq = 1.0 / std::sqrt(cfg.a * beta_eff(cfg));
    double sd_init = std::sqrt(init.var_x);
    double half = std::fabs(init.mean_x_at(0)) + 8.0 * std::max(sd_eq, sd_init) + 6.0 * init.eps;
    half = std::max(half, 6.0);
    GridSpec1D g;
    g.x_min = -half;
    g.x_max = half;
    g.n_cells = n_cells;
    return g;
}

std::vector<double> gaussian_density(const GridSpec1D& grid, double mean, double var) {
    grid.validate();
    if (!(var > 0.0)) throw ConfigError("gaussian_density needs positive variance");
    std::vector<double> rho(grid.n_cells);
    double mass = 0.0;
    for (int i = 0; i < grid.n_cells; ++i) {
        double u = grid.center(i) - mean;
        rho[i] = std::exp(-0.5 * u * u / var);
        mass += rho[i];
    }
    mass *= grid.dx();
    for (auto& r : rho) r /= mass;
    return rho;
}

double pair_cells(const TestFunction& fn, const GridSpec1D& grid, const std::vector<double>& rho) {
    if (fn.dim != 1) throw DomainError("pair_cells: one-dimensional probes only");
    double s = 0.0;
    for (int i = 0; i < grid.n_cells; ++i) s += fn.eval1(grid.center(i)) * rho[i];
    return s * grid.dx();
}

void grid_mean_var(const GridSpec1D& grid, const std::vector<double>& rho, double& mean,
                   double& var) {
    double m0 = 0.0, m1 = 0.0;
    for (int i = 0; i < grid.n_cells; ++i) {
        m0 += rho[i];
        m1 += grid.center(i) * rho[i];
    }
    mean = m1 / m0;
    double m2 = 0.0;
    for (int i = 0; i < grid.n_cells; ++i) {
        double u = grid.center(i) - mean;
        m2 += u * u * rho[i];
    }
    var = m2 / m0;
}

GibbsState gibbs_fixed_point(const ModelConfig& cfg, const GridSpec1D& grid, double tol,
                             int max_iter) {
    if (cfg.d != 1) throw ConfigError("gibbs_fixed_point is one-dimensional");
    grid.validate();
    const int n = grid.n_cells;
    const double dx = grid.dx();
    const double be = beta_eff(cfg);

    // exact interaction table on the difference grid
    std::vector<double> w_tab;
    if (cfg.kappa != 0.0) {
        w_tab.resize(n);
        for (int k = 0; k < n; ++k) w_tab[k] = eval_potential_1d(cfg.potential, k * dx).first;
    }
    std::vector<double> conf(n);
    for (int i = 0; i < n; ++i) {
        double x = grid.center(i);
        conf[i] = 0.5 * cfg.a * x * x;
    }

    // start from the interaction-free Gaussian
    std::vector<double> rho(n), work(n), rho_new(n);
    {
        double mass = 0.0;
        for (int i = 0; i < n; ++i) {
            rho[i] = std::exp(-be * conf[i]);
            mass += rho[i];
        }
        for (auto& r : rho) r /= mass * dx;
    }

    GibbsState state;
    state.grid = grid;
    double gamma = 1.0, z_x = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        if (cfg.kappa != 0.0) {
            for (int i = 0; i < n; ++i) {
                double conv = 0.0;
                for (int j = 0; j < n; ++j) conv += w_tab[std::abs(i - j)] * rho[j];
                work[i] = conf[i] + cfg.kappa * conv * dx;
            }
        } else {
            work = conf;
        }
        double mass = 0.0;
        for (int i = 0; i < n; ++i) {
            rho_new[i] = std::exp(-be * work[i]);
            mass += rho_new[i];
        }
        z_x = mass * dx;
        for (auto& r : rho_new) r /= z_x;

        double res = 0.0;
        for (int i = 0; i < n; ++i) res = std::max(res, std::fabs(rho_new[i] - rho[i]));
        if (!state.residual_history.empty() && res > state.residual_history.back()) gamma = 0.5;
        state.residual_history.push_back(res);
        for (int i = 0; i < n; ++i) rho[i] += gamma * (rho_new[i] - rho[i]);
        if (res < tol) {
            state.rho = rho;
            state.velocity_var = cfg.dynamics == Dynamics::kinetic ? 1.0 / cfg.beta : 0.0;
            state.c_M = cfg.dynamics == Dynamics::kinetic
                            ? 1.0 / (z_x * std::sqrt(2.0 * M_PI / cfg.beta))
                            : 1.0 / z_x;
            state.iterations = it + 1;
            state.residual = res;
            return state;
        }
    }

    std::ostringstream msg;
    msg << "Gibbs fixed point did not converge in " << max_iter
        << " iterations (kappa*beta_eff*supW = " << cfg.kappa * be * cfg.potential.sup_norm()
        << "); residual history tail:";
    std::size_t from = state.residual_history.size() > 8 ? state.residual_history.size() - 8 : 0;
    for (std::size_t i = from; i < state.residual_history.size(); ++i)
        msg << " " << state.residual_history[i];
    throw NumericError(msg.str());
}

double MeanFieldReference::lookup(const std::string& phi_id, double t) const {
    return find(phi_id, t).value;
}

const MfObservation& MeanFieldReference::find(const std::string& phi_id, double t) const {
    for (const auto& o : observations)
        if (o.phi_id == phi_id && std::fabs(o.t - t) < 1e-9) return o;
    throw DomainError("mean-field reference has no record for ('" + phi_id + "', t=" +
                      std::to_string(t) + ")");
}

std::string method_to_string(MeanFieldReference::Method m) {
    switch (m) {
        case MeanFieldReference::Method::reference_ensemble: return "reference_ensemble";
        case MeanFieldReference::Method::grid_pde: return "grid_pde";
        default: return "discrete_map";
    }
}

MeanFieldReference meanfield_reference_ensemble(const ModelConfig& cfg, const InitSpec& init,
                                                int n_ref,
                                                const std::vector<TestFunction>& observables,
                                                const std::vector<double>& timegrid,
                                                std::uint64_t master_seed, const ForceMode& mode,
                                                int replicas, int max_experiment_n) {
    if (init.kind != InitSpec::Kind::iid)
        throw ConfigError("reference ensemble requires a product-form (iid) initial law");
    if (n_ref < 4) throw ConfigError("reference ensemble needs n_ref >= 4");
    if (replicas < 1) throw ConfigError("reference ensemble needs at least one replica");
    check_timegrid(timegrid, cfg.dt);

    MeanFieldReference ref;
    ref.method = MeanFieldReference::Method::reference_ensemble;
    ref.n_ref = n_ref;
    if (max_experiment_n > 0 && n_ref < 10 * max_experiment_n)
        ref.warnings.push_back("n_ref = " + std::to_string(n_ref) + " is below 10x the largest "
                               "experiment N = " + std::to_string(max_experiment_n));

    // value[size][rep][obs*T + ti]; size 0 = full n_ref, size 1 = halved
    const std::size_t cells = observables.size() * timegrid.size();
    std::vector<std::vector<std::vector<double>>> vals(
        2, std::vector<std::vector<double>>(replicas, std::vector<double>(cells, 0.0)));

    for (int half = 0; half < 2; ++half) {
        ModelConfig run_cfg = cfg;
        run_cfg.n_particles = half ? n_ref / 2 : n_ref;
        for (int r = 0; r < replicas; ++r) {
            RngLineage lin{master_seed, static_cast<std::uint32_t>(half * replicas + r)};
            Ensemble e = draw_initial_ensemble(run_cfg, init, lin);
            Integrator integ(run_cfg, mode, lin);
            std::size_t slot = 0;
            for (double t : timegrid) {
                integ.run_to(e, t);
                for (const auto& fn : observables) {
                    auto row = observable_row(e, fn);
                    double s = 0.0;
                    for (double x : row) s += x;
                    vals[half][r][slot++] = s / e.n;
                }
            }
        }
    }

    double gap = 0.0;
    std::size_t slot = 0;
    for (double t : timegrid) {
        ref.mass[t] = 1.0;  // empirical measures carry unit mass exactly
        for (const auto& fn : observables) {
            MfObservation o;
            o.phi_id = fn.id;
            o.t = t;
            double s = 0.0, s_half = 0.0;
            for (int r = 0; r < replicas; ++r) {
                s += vals[0][r][slot];
                s_half += vals[1][r][slot];
            }
            o.value = s / replicas;
            if (replicas >= 2) {
                double ss = 0.0;
                for (int r = 0; r < replicas; ++r) {
                    double d = vals[0][r][slot] - o.value;
                    ss += d * d;
                }
                o.se = std::sqrt(ss / (static_cast<double>(replicas) * (replicas - 1)));
            }
            gap = std::max(gap, std::fabs(s_half / replicas - o.value));
            ref.observations.push_back(o);
            ++slot;
        }
    }
    ref.bias_estimate = gap;
    return ref;
}

MeanFieldReference solve_mckean_vlasov_1d(const ModelConfig& cfg, const std::vector<double>& mu0,
                                          const GridSpec1D& grid,
                                          const std::vector<TestFunction>& observables,
                                          const std::vector<double>& timegrid) {
    if (cfg.dynamics != Dynamics::overdamped || cfg.d != 1)
        throw ConfigError("the grid solver covers the overdamped d = 1 model only");
    grid.validate();
    if (static_cast<int>(mu0.size()) != grid.n_cells)
        throw ConfigError("initial density does not match the grid");
    for (double t : timegrid)
        if (t < 0.0) throw ConfigError("output times must be nonnegative");

    const int n = grid.n_cells;
    const double dx = grid.dx();
    const double D = 0.5;

    std::vector<double> rho = mu0;
    {
        double mass = 0.0;
        for (double r : rho) mass += r;
        mass *= dx;
        if (std::fabs(mass - 1.0) > 1e-6)
            throw ConfigError("initial density must carry unit mass (got " +
                              std::to_string(mass) + ")");
        for (auto& r : rho) r /= mass;
    }

    std::vector<double> centers(n);
    for (int i = 0; i < n; ++i) centers[i] = grid.center(i);
    DriftOperator drift(cfg, grid, centers);

    MeanFieldReference ref;
    ref.method = MeanFieldReference::Method::grid_pde;

    std::vector<double> b(n), flux(n + 1, 0.0), next(n);
    double t_now = 0.0;
    auto record = [&](double t) {
        double mass = 0.0;
        for (double r : rho) mass += r;
        ref.mass[t] = mass * dx;
        for (const auto& fn : observables) {
            MfObservation o;
            o.phi_id = fn.id;
            o.t = t;
            o.value = pair_cells(fn, grid, rho);
            ref.observations.push_back(o);
        }
    };

    for (double t_out : timegrid) {
        while (t_now < t_out - 1e-12) {
            drift.eval(rho, dx, centers, b);
            double bmax = 0.0;
            for (double v : b) bmax = std::max(bmax, std::fabs(v));
            double dt_sub = 0.9 / (2.0 * D / (dx * dx) + bmax / dx);
            dt_sub = std::min(dt_sub, t_out - t_now);

            // interface fluxes; walls carry none
            flux[0] = flux[n] = 0.0;
            for (int i = 1; i < n; ++i) {
                double bf = 0.5 * (b[i - 1] + b[i]);
                double adv;
                if (std::fabs(bf) * dx <= 2.0 * D)
                    adv = bf * 0.5 * (rho[i - 1] + rho[i]);  // central within Peclet bound
                else
                    adv = bf * (bf > 0.0 ? rho[i - 1] : rho[i]);  // upwind
                flux[i] = adv - D * (rho[i] - rho[i - 1]) / dx;
            }
            for (int i = 0; i < n; ++i) next[i] = rho[i] - dt_sub * (flux[i + 1] - flux[i]) / dx;
            rho.swap(next);
            t_now += dt_sub;
            ++ref.substeps_total;
        }
        record(t_out);
    }
    return ref;
}

MeanFieldReference solve_discrete_map_1d(const ModelConfig& cfg, const std::vector<double>& mu0,
                                         const GridSpec1D& grid,
                                         const std::vector<TestFunction>& observables,
                                         const std::vector<double>& timegrid) {
    if (cfg.dynamics != Dynamics::overdamped || cfg.d != 1)
        throw ConfigError("the discrete map covers the overdamped d = 1 model only");
    grid.validate();
    if (static_cast<int>(mu0.size()) != grid.n_cells)
        throw ConfigError("initial density does not match the grid");
    check_timegrid(timegrid, cfg.dt);

    const int n = grid.n_cells;
    const double dx = grid.dx();
    const double h = cfg.dt;

    // cell edges, where the drift map acts
    std::vector<double> edges(n + 1);
    for (int j = 0; j <= n; ++j) edges[j] = grid.x_min + j * dx;
    DriftOperator drift(cfg, grid, edges);

    const double sd = std::sqrt(h);

    std::vector<double> rho = mu0;
    {
        double mass = 0.0;
        for (double r : rho) mass += r;
        for (auto& r : rho) r /= mass * dx;
    }

    MeanFieldReference ref;
    ref.method = MeanFieldReference::Method::discrete_map;

    // G(u) = ∫_{−∞}^{u} Φ(v) dv = uΦ(u) + φ(u); the mass a uniform block on
    // [p, q] convolved with N(0, sd²) leaves below y is then
    //   F(y) = sd/(q−p) · [G((y−p)/sd) − G((y−q)/sd)],
    // which deposits each drifted cell through the increment law in closed
    // form — no intermediate remap, hence no cumulative numerical diffusion.
    auto G = [](double u) {
        if (u <= -9.0) return 0.0;
        if (u >= 9.0) return u;
        double Phi = 0.5 * std::erfc(-u / std::sqrt(2.0));
        double phi = std::exp(-0.5 * u * u) / std::sqrt(2.0 * M_PI);
        return u * Phi + phi;
    };

    std::vector<double> b(n + 1), mapped(n + 1), next(n), F;
    double renorm_drift = 0.0;
    auto one_step = [&]() {
        drift.eval(rho, dx, edges, b);
        for (int j = 0; j <= n; ++j) mapped[j] = edges[j] + h * b[j];
        for (int j = 0; j < n; ++j)
            if (mapped[j + 1] <= mapped[j])
                throw NumericError("discrete map: drift step is not monotone; reduce dt");

        std::fill(next.begin(), next.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            double m = rho[i] * dx;
            if (m == 0.0) continue;
            const double p = mapped[i], q = mapped[i + 1];
            const double scale = sd / (q - p);
            int j0 = std::max(0, static_cast<int>(std::floor((p - 8.0 * sd - grid.x_min) / dx)));
            int j1 = std::min(n, static_cast<int>(std::ceil((q + 8.0 * sd - grid.x_min) / dx)));
            if (j1 <= j0) continue;
            F.resize(j1 - j0 + 1);
            for (int j = j0; j <= j1; ++j) {
                double y = edges[j];
                F[j - j0] = scale * (G((y - p) / sd) - G((y - q) / sd));
            }
            for (int j = j0; j < j1; ++j) next[j] += m * (F[j - j0 + 1] - F[j - j0]);
        }
        double mass = 0.0;
        for (double s : next) mass += s;
        renorm_drift += std::fabs(1.0 - mass);
        for (int i = 0; i < n; ++i) rho[i] = next[i] / (mass * dx);
    };

    long step_now = 0;
    for (double t_out : timegrid) {
        long target = std::lround(t_out / h);
        for (; step_now < target; ++step_now) {
            one_step();
            ++ref.substeps_total;
        }
        double mass = 0.0;
        for (double r : rho) mass += r;
        ref.mass[t_out] = mass * dx;
        for (const auto& fn : observables) {
            MfObservation o;
            o.phi_id = fn.id;
            o.t = t_out;
            o.value = pair_cells(fn, grid, rho);
            ref.observations.push_back(o);
        }
    }
    ref.bias_estimate = renorm_drift;
    if (renorm_drift > 1e-9)
        ref.warnings.push_back("discrete map lost mass " + std::to_string(renorm_drift) +
                               " to the walls before renormalization; widen the grid");
    return ref;
}

MeanFieldReference solve_discrete_map_extrapolated(
    const ModelConfig& cfg, const GridSpec1D& grid,
    const std::function<std::vector<double>(const GridSpec1D&)>& mu0_of,
    const std::vector<TestFunction>& observables, const std::vector<double>& timegrid) {
    GridSpec1D fine = grid;
    fine.n_cells = 2 * grid.n_cells;
    auto coarse_ref = solve_discrete_map_1d(cfg, mu0_of(grid), grid, observables, timegrid);
    auto fine_ref = solve_discrete_map_1d(cfg, mu0_of(fine), fine, observables, timegrid);

    MeanFieldReference ref = fine_ref;
    double correction = 0.0;
    for (std::size_t i = 0; i < ref.observations.size(); ++i) {
        double vc = coarse_ref.observations[i].value;
        double vf = fine_ref.observations[i].value;
        ref.observations[i].value = (4.0 * vf - vc) / 3.0;
        correction = std::max(correction, std::fabs(vf - vc) / 3.0);
    }
    for (auto& kv : ref.mass) kv.second = (4.0 * kv.second - coarse_ref.mass.at(kv.first)) / 3.0;
    ref.bias_estimate = correction;
    ref.substeps_total += coarse_ref.substeps_total;
    return ref;
}

}  // namespace mfl
