#include "mfl/model.hpp"

#include <cmath>
#include <sstream>

#include "mfl/errors.hpp"

namespace mfl {

double PotentialSpec::sup_norm() const {
    if (kind == Kind::gaussian_bump) return std::abs(w);
    double s = 0.0;
    for (const auto& m : modes) s += std::abs(m.c);
    return s;
}

void eval_potential(const PotentialSpec& spec, const double* x, int d, double& W, double* gradW) {
    for (int c = 0; c < d; ++c)
        if (!std::isfinite(x[c])) throw DomainError("eval_potential: non-finite position");

    if (spec.kind == PotentialSpec::Kind::gaussian_bump) {
        double r2 = 0.0;
        for (int c = 0; c < d; ++c) r2 += x[c] * x[c];
        double l2 = spec.ell * spec.ell;
        W = spec.w * std::exp(-r2 / (2.0 * l2));
        for (int c = 0; c < d; ++c) gradW[c] = -(x[c] / l2) * W;
        return;
    }

    W = 0.0;
    for (int c = 0; c < d; ++c) gradW[c] = 0.0;
    for (const auto& m : spec.modes) {
        double phase = 0.0;
        for (int c = 0; c < d; ++c) phase += m.xi[c] * x[c];
        double cp = std::cos(phase), sp = std::sin(phase);
        W += m.c * cp;
        for (int c = 0; c < d; ++c) gradW[c] -= m.c * sp * m.xi[c];
    }
}

std::pair<double, double> eval_potential_1d(const PotentialSpec& spec, double x) {
    double W, g;
    eval_potential(spec, &x, 1, W, &g);
    return {W, g};
}

void ModelConfig::validate() const {
    if (d < 1 || d > 3) throw ConfigError("d must be in [1, 3]");
    if (kappa < 0.0) throw ConfigError("kappa must be >= 0");
    if (dynamics == Dynamics::kinetic && beta <= 0.0) throw ConfigError("beta must be > 0");
    if (a <= 0.0) throw ConfigError("a must be > 0");
    if (n_particles < 1) throw ConfigError("n_particles must be >= 1");
    if (dt <= 0.0) throw ConfigError("dt must be > 0");
    if (t_final <= 0.0) throw ConfigError("t_final must be > 0");
    if (potential.kind == PotentialSpec::Kind::gaussian_bump && potential.ell <= 0.0)
        throw ConfigError("potential width ell must be > 0");
    for (const auto& m : potential.modes)
        if (static_cast<int>(m.xi.size()) != d)
            throw ConfigError("finite_fourier mode frequency dimension != d");
}

void InitSpec::validate(const ModelConfig& cfg) const {
    if (var_x <= 0.0) throw ConfigError("init var_x must be > 0");
    if (cfg.dynamics == Dynamics::kinetic && var_v <= 0.0)
        throw ConfigError("init var_v must be > 0");
    if (eps < 0.0) throw ConfigError("init eps must be >= 0");
    if (kind != Kind::iid && eps == 0.0) {
        // ε = 0 latent specs are legal (degenerate to iid); nothing to check.
    }
    auto chk = [&](const std::vector<double>& m, const char* name) {
        if (!m.empty() && m.size() != 1 && static_cast<int>(m.size()) != cfg.d)
            throw ConfigError(std::string("init ") + name + " must have 1 or d entries");
    };
    chk(mean_x, "mean_x");
    chk(mean_v, "mean_v");
}

Ensemble draw_initial_ensemble(const ModelConfig& cfg, const InitSpec& init, RngLineage lineage) {
    init.validate(cfg);
    Ensemble e;
    e.t = 0.0;
    e.n = cfg.n_particles;
    e.d = cfg.d;
    e.has_v = (cfg.dynamics == Dynamics::kinetic);
    const std::size_t nd = static_cast<std::size_t>(e.n) * e.d;
    e.x.resize(nd);

    NormalStream xs(lineage, RngDomain::init_position);
    xs.fill(e.x);
    const double sx = std::sqrt(init.var_x);
    for (int i = 0; i < e.n; ++i)
        for (int c = 0; c < e.d; ++c) e.xi(i, c) = init.mean_x_at(c) + sx * e.xi(i, c);

    if (e.has_v) {
        e.v.resize(nd);
        NormalStream vs(lineage, RngDomain::init_velocity);
        vs.fill(e.v);
        const double sv = std::sqrt(init.var_v);
        for (std::size_t i = 0; i < nd; ++i) {
            int c = static_cast<int>(i % e.d);
            e.v[i] = init.mean_v_at(c) + sv * e.v[i];
        }
    }

    if (init.kind == InitSpec::Kind::latent_shift) {
        NormalStream ls(lineage, RngDomain::init_latent);
        double theta = ls.next();
        double shift = init.eps * theta;
        for (auto& xc : e.x) xc += shift;
    } else if (init.kind == InitSpec::Kind::latent_scale) {
        NormalStream ls(lineage, RngDomain::init_latent);
        double theta = ls.next();
        double s = std::exp(init.eps * theta - 0.5 * init.eps * init.eps);
        if (e.has_v) {
            for (std::size_t i = 0; i < nd; ++i) {
                int c = static_cast<int>(i % e.d);
                double m = init.mean_v_at(c);
                e.v[i] = m + s * (e.v[i] - m);
            }
        } else {
            for (std::size_t i = 0; i < nd; ++i) {
                int c = static_cast<int>(i % e.d);
                double m = init.mean_x_at(c);
                e.x[i] = m + s * (e.x[i] - m);
            }
        }
    }
    return e;
}

namespace {

PotentialSpec potential_from_toml(const TomlTable& t, int d) {
    PotentialSpec p;
    std::string kind = t.get_str_or("potential.kind", "gaussian_bump");
    if (kind == "gaussian_bump") {
        p.kind = PotentialSpec::Kind::gaussian_bump;
        p.w = t.get_f64_or("potential.w", 1.0);
        p.ell = t.get_f64_or("potential.ell", 1.0);
    } else if (kind == "finite_fourier") {
        p.kind = PotentialSpec::Kind::finite_fourier;
        auto c = t.get_f64_array("potential.c");
        auto xi = t.get_f64_array("potential.xi");  // d = 1 layout: one ξ per mode
        if (d != 1) throw ConfigError("finite_fourier config entry supports d = 1 only",
                                      t.line_of("potential.xi"));
        if (c.size() != xi.size())
            throw ConfigError("potential.c and potential.xi must have equal length",
                              t.line_of("potential.c"));
        for (std::size_t k = 0; k < c.size(); ++k)
            p.modes.push_back({c[k], {xi[k]}});
    } else {
        throw ConfigError("unknown potential.kind '" + kind + "'", t.line_of("potential.kind"));
    }
    return p;
}

}  // namespace

ModelConfig model_from_toml(const TomlTable& t) {
    ModelConfig cfg;
    std::string dyn = t.get_str_or("model.dynamics", "overdamped");
    if (dyn == "kinetic") cfg.dynamics = Dynamics::kinetic;
    else if (dyn == "overdamped") cfg.dynamics = Dynamics::overdamped;
    else throw ConfigError("model.dynamics must be 'kinetic' or 'overdamped'",
                           t.line_of("model.dynamics"));
    cfg.d = static_cast<int>(t.get_i64_or("model.d", 1));
    cfg.kappa = t.get_f64_or("model.kappa", 0.0);
    cfg.beta = t.get_f64_or("model.beta", 1.0);
    cfg.a = t.get_f64_or("model.a", 1.0);
    cfg.n_particles = static_cast<int>(t.get_i64_or("model.n_particles", 1));
    cfg.dt = t.get_f64_or("model.dt", 0.01);
    cfg.t_final = t.get_f64_or("model.t_final", 1.0);
    cfg.potential = potential_from_toml(t, cfg.d);
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("[model] ") + e.what());
    }
    return cfg;
}

InitSpec init_from_toml(const TomlTable& t, const ModelConfig& cfg) {
    InitSpec init;
    std::string kind = t.get_str_or("init.kind", "iid");
    if (kind == "iid") init.kind = InitSpec::Kind::iid;
    else if (kind == "latent_shift") init.kind = InitSpec::Kind::latent_shift;
    else if (kind == "latent_scale") init.kind = InitSpec::Kind::latent_scale;
    else throw ConfigError("unknown init.kind '" + kind + "'", t.line_of("init.kind"));
    if (t.has("init.mean_x")) init.mean_x = t.get_f64_array("init.mean_x");
    init.var_x = t.get_f64_or("init.var_x", 1.0);
    if (t.has("init.mean_v")) init.mean_v = t.get_f64_array("init.mean_v");
    init.var_v = t.get_f64_or("init.var_v", 1.0);
    init.eps = t.get_f64_or("init.eps", 0.0);
    init.validate(cfg);
    return init;
}

std::string potential_to_string(const PotentialSpec& spec) {
    std::ostringstream ss;
    if (spec.kind == PotentialSpec::Kind::gaussian_bump) {
        ss << "gaussian_bump(w=" << spec.w << ",ell=" << spec.ell << ")";
    } else {
        ss << "finite_fourier[";
        for (std::size_t k = 0; k < spec.modes.size(); ++k) {
            if (k) ss << ",";
            ss << "(" << spec.modes[k].c << ";";
            for (std::size_t c = 0; c < spec.modes[k].xi.size(); ++c) {
                if (c) ss << " ";
                ss << spec.modes[k].xi[c];
            }
            ss << ")";
        }
        ss << "]";
    }
    return ss.str();
}

}  // namespace mfl
