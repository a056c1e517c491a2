#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "mfl/forces.hpp"
#include "mfl/io.hpp"
#include "mfl/meanfield.hpp"
#include "mfl/model.hpp"
#include "mfl/norms.hpp"

namespace mfl {

// ---- scaling-law fits -------------------------------------------------------

struct ScalePoint {
    double x = 0.0;  // N for log-log fits, t for decay fits
    double value = 0.0;
    double se = 0.0;  // 0 = unweighted point
};

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;  // of log value at log x = 0
    double r2 = 0.0;
    double slope_se = 0.0;
    std::vector<double> point_se;  // SE of each surviving log value
    int n_points = 0;
    std::vector<std::string> warnings;
};

// Weighted least squares on (log x, log value); weights from the delta-method
// SEs se/value (unweighted when any point lacks an SE).  Nonpositive values
// are dropped with a warning; fewer than 3 survivors is an error.
SlopeFit fit_loglog_slope(const std::vector<ScalePoint>& points);

struct DecayFit {
    double plateau = 0.0;  // c
    double plateau_se = 0.0;
    double amplitude = 0.0;  // b
    double amplitude_se = 0.0;
    double rate = 0.0;  // λ̂; 0 when non-identifiable
    double rate_se = 0.0;
    double residual_rms = 0.0;
    double r2 = 0.0;
    bool identifiable = false;
    double t_lo = 0.0, t_hi = 0.0;
    std::vector<std::string> warnings;
};

// Fits y(t) = c + b·e^{−λt}: golden-section search over λ (bracketed by a
// coarse log-spaced sweep) with the weighted linear solve for (c, b) at each
// candidate.  A flat series comes back flagged non-identifiable with λ̂ = 0
// and plateau = weighted mean rather than a spurious rate.  Needs ≥ 8 points;
// a window under 3 fitted e-foldings only warns.
DecayFit fit_decay_plateau(const std::vector<ScalePoint>& series);

// ---- scans ------------------------------------------------------------------

enum class ScanKind { chaos_scaling, correlation_scaling, decay_fit, concentration, relax_to_gibbs };

std::string scan_kind_name(ScanKind k);
ScanKind scan_kind_from_string(const std::string& s, int line = 0);

struct ScanSpec {
    ScanKind kind = ScanKind::chaos_scaling;
    ModelConfig model;  // n_particles/t_final overridden per cell
    InitSpec init;
    ForceMode force;
    std::vector<long long> n_list;
    long long replicas = 0;  // M per cell (may be trimmed for equal batching)
    std::vector<double> times;
    std::vector<int> m_list;
    DictionarySpec dict;
    std::string dictionary_id;
    std::uint64_t master_seed = 1;
    int threads = 1;

    // mean-field reference for the probe centers / the m = 1 gap
    MeanFieldReference::Method ref_method = MeanFieldReference::Method::discrete_map;
    bool ref_method_set = false;  // false → by dynamics (map / ensemble)
    long long n_ref = 100000;
    int ref_replicas = 2;

    bool use_twin = false;        // κ = 0 coupled copy as control variate (overdamped)
    double conc_exponent = 1.0 / 3.0;  // concentration: the weight power 2p
    std::vector<double> fit_window;    // decay/relax: [t_lo, t_hi] subset of times

    void validate() const;  // throws ConfigError
};

// Parses [scan] + [dictionary] on top of the model/potential/init/force
// sections.  `config_line_hint` keys error messages to the source file.
ScanSpec scan_spec_from_toml(const TomlTable& t);

struct KeyedSlopeFit {
    std::string metric;
    int m = 0;
    double t = 0.0;
    SlopeFit fit;
};

struct KeyedDecayFit {
    std::string metric;
    int m = 0;
    long long N = 0;
    DecayFit fit;
};

struct ScanOutput {
    std::vector<KeyedSlopeFit> slope_fits;
    std::vector<KeyedDecayFit> decay_fits;
    std::vector<std::string> cell_errors;
    std::vector<std::string> warnings;
    int cells_done = 0;
};

// Runs the scan, streaming records and summary rows into `sink` in cell-index
// order (records never depend on thread count or scheduling).  A failing cell
// is recorded and skipped; remaining cells still run.  `only_n` restricts to a
// single N cell (the verify path); fits need every cell, so they are skipped
// under the restriction.
ScanOutput run_scan(const ScanSpec& spec, ResultSink& sink, long long only_n = -1);

// Dictionary snapshot for the manifest: one entry per probe with its
// normalization constant.
Json dictionary_snapshot(const Dictionary& dict);

// Normalized scan knobs for the manifest hash payload.
Json scan_run_params(const ScanSpec& spec);

}  // namespace mfl
