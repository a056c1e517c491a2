#include "mfl/dynamics.hpp"

#include <cmath>

#include "mfl/errors.hpp"

namespace mfl {

namespace {
constexpr double kBlowUpLimit = 1e6;

inline double u53(std::uint32_t a, std::uint32_t b) {
    std::uint64_t r = (static_cast<std::uint64_t>(b) << 32) | a;
    return (static_cast<double>(r >> 11) + 0.5) * 0x1.0p-53;
}
}  // namespace

void fill_normals_at(RngLineage lineage, RngDomain domain, std::uint64_t block_base, double* out,
                     std::size_t n) {
    std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(lineage.master_seed),
                                     static_cast<std::uint32_t>(lineage.master_seed >> 32)};
    const std::size_t nblocks = (n + 1) / 2;
    for (std::size_t j = 0; j < nblocks; ++j) {
        std::uint64_t ctr = block_base + j;
        auto b = Philox4x32::block({static_cast<std::uint32_t>(ctr),
                                    static_cast<std::uint32_t>(ctr >> 32),
                                    static_cast<std::uint32_t>(domain), lineage.replica_index},
                                   key);
        double u1 = u53(b[0], b[1]);
        double u2 = u53(b[2], b[3]);
        double r = std::sqrt(-2.0 * std::log(u1));
        out[2 * j] = r * std::cos(2.0 * M_PI * u2);
        if (2 * j + 1 < n) out[2 * j + 1] = r * std::sin(2.0 * M_PI * u2);
    }
}

Integrator::Integrator(const ModelConfig& cfg, const ForceMode& mode, RngLineage lineage)
    : cfg_(cfg), engine_(cfg, mode), lin_(lineage) {
    cfg_.validate();
    if (cfg_.dynamics == Dynamics::kinetic) {
        ou_c_ = std::exp(-0.5 * cfg_.beta * cfg_.dt);
        ou_s_ = std::sqrt((1.0 - std::exp(-cfg_.beta * cfg_.dt)) / cfg_.beta);
    }
}

std::uint64_t Integrator::step_index(const Ensemble& e) const {
    double k = e.t / cfg_.dt;
    auto ki = static_cast<std::uint64_t>(std::llround(k));
    if (std::abs(k - static_cast<double>(ki)) > 1e-6)
        throw NumericError("ensemble time is not a step multiple: t = " + std::to_string(e.t));
    return ki;
}

void Integrator::draw_noise(std::uint64_t k, std::size_t n) {
    noise_.resize(n);
    if (override_) {
        override_(k, noise_.data(), n);
        return;
    }
    const std::uint64_t blocks_per_step = (n + 1) / 2;
    fill_normals_at(lin_, RngDomain::noise, k * blocks_per_step, noise_.data(), n);
}

void Integrator::check_finite(const Ensemble& e) const {
    double mx = 0.0;
    for (double c : e.x) mx = std::max(mx, std::abs(c));
    for (double c : e.v) mx = std::max(mx, std::abs(c));
    if (!(mx <= kBlowUpLimit))
        throw NumericError("simulation blow-up: max |z| = " + std::to_string(mx) +
                           " at t = " + std::to_string(e.t));
}

void Integrator::step(Ensemble& e) {
    const std::uint64_t k = step_index(e);
    if (cfg_.dynamics == Dynamics::kinetic) step_kinetic_impl(e, k);
    else step_overdamped_impl(e, k);
    e.t = static_cast<double>(k + 1) * cfg_.dt;
    check_finite(e);
}

void Integrator::step_kinetic_impl(Ensemble& e, std::uint64_t k) {
    const std::size_t nd = e.x.size();
    const double h = cfg_.dt, a = cfg_.a;
    if (force_step_ != k) engine_.eval(e, force_);
    draw_noise(k, nd);
    for (std::size_t i = 0; i < nd; ++i) {
        e.v[i] += 0.5 * h * (force_[i] - a * e.x[i]);
        e.x[i] += 0.5 * h * e.v[i];
        e.v[i] = ou_c_ * e.v[i] + ou_s_ * noise_[i];
        e.x[i] += 0.5 * h * e.v[i];
    }
    engine_.eval(e, force_);
    for (std::size_t i = 0; i < nd; ++i) e.v[i] += 0.5 * h * (force_[i] - a * e.x[i]);
    force_step_ = k + 1;
}

void Integrator::step_overdamped_impl(Ensemble& e, std::uint64_t k) {
    const std::size_t nd = e.x.size();
    const double h = cfg_.dt, a = cfg_.a, sq = std::sqrt(cfg_.dt);
    engine_.eval(e, force_);
    draw_noise(k, nd);
    for (std::size_t i = 0; i < nd; ++i)
        e.x[i] += h * (force_[i] - a * e.x[i]) + sq * noise_[i];
}

void Integrator::run_to(Ensemble& e, double t_end) {
    auto nsteps = static_cast<long long>(std::llround((t_end - e.t) / cfg_.dt));
    for (long long s = 0; s < nsteps; ++s) step(e);
}

void step_kinetic(Ensemble& e, const ModelConfig& cfg, RngLineage lineage) {
    if (cfg.dynamics != Dynamics::kinetic) throw ConfigError("step_kinetic: cfg is not kinetic");
    Integrator integ(cfg, ForceMode::exact(), lineage);
    integ.step(e);
}

void step_overdamped(Ensemble& e, const ModelConfig& cfg, RngLineage lineage) {
    if (cfg.dynamics != Dynamics::overdamped)
        throw ConfigError("step_overdamped: cfg is not overdamped");
    Integrator integ(cfg, ForceMode::exact(), lineage);
    integ.step(e);
}

std::vector<double> mean_field_force(const Ensemble& e, const ModelConfig& cfg,
                                     const ForceMode& mode) {
    ForceEngine engine(cfg, mode);
    std::vector<double> f;
    engine.eval(e, f);
    return f;
}

}  // namespace mfl
