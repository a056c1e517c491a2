#include "mfl/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfl/dynamics.hpp"
#include "mfl/errors.hpp"
#include "mfl/experiments.hpp"
#include "mfl/io.hpp"
#include "mfl/meanfield.hpp"
#include "mfl/reduce.hpp"

namespace mfl {

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<long long> replicas;
    std::optional<int> threads;
};

void add_common(CLI::App* sub, CommonOpts& o, bool config_required = true) {
    auto* cfg = sub->add_option("--config", o.config_path, "TOML configuration file");
    if (config_required) cfg->required();
    sub->add_option("--out", o.out_dir, "output directory");
    sub->add_option("--seed", o.seed, "master seed override");
    sub->add_option("--replicas", o.replicas, "replica count override");
    sub->add_option("--threads", o.threads, "worker threads (never affects results)");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string join_argv(int argc, const char* const* argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += ' ';
        s += argv[i];
    }
    return s;
}

RunManifest make_manifest(const std::string& command, std::uint64_t seed,
                          const CommonOpts& o, const std::string& config_text,
                          Json run_params) {
    RunManifest man;
    man.command = command;
    man.master_seed = seed;
    man.config_path = o.config_path;
    man.config_text = config_text;
    man.run_params = std::move(run_params);
    man.threads = o.threads.value_or(1);
    return man;
}

// ---- simulate ----------------------------------------------------------------------

int cmd_simulate(const CommonOpts& o) {
    const std::string text = read_file(o.config_path);
    TomlTable t = parse_toml_string(text);
    ModelConfig cfg = model_from_toml(t);
    InitSpec init = init_from_toml(t, cfg);
    ForceMode force = force_mode_from_toml(t);
    std::vector<double> times = t.has("simulate.times")
                                    ? t.get_f64_array("simulate.times")
                                    : std::vector<double>{cfg.t_final};
    long long M = o.replicas.value_or(t.get_i64_or("simulate.replicas", 100));
    std::uint64_t seed =
        o.seed.value_or(static_cast<std::uint64_t>(t.get_i64_or("simulate.master_seed", 1)));
    if (M < 1) throw ConfigError("need at least one replica");
    std::sort(times.begin(), times.end());
    for (double tv : times)
        if (tv < 0) throw ConfigError("simulate.times entries must be >= 0");

    Json params;
    params["times"] = times;
    params["replicas"] = M;
    params["n_particles"] = cfg.n_particles;
    FileResultsWriter out(o.out_dir, make_manifest("simulate", seed, o, text, params));

    const int n_t = static_cast<int>(times.size());
    const int pd = cfg.phase_dim();
    // replica-level means/second moments per (time, phase coordinate)
    std::vector<double> m1(static_cast<std::size_t>(M) * n_t * pd);
    std::vector<double> m2(static_cast<std::size_t>(M) * n_t * pd);
    Integrator integ(cfg, force, RngLineage{seed, 0});
    for (long long r = 0; r < M; ++r) {
        RngLineage lin{seed, static_cast<std::uint32_t>(r)};
        Ensemble e = draw_initial_ensemble(cfg, init, lin);
        integ.set_lineage(lin);
        for (int ti = 0; ti < n_t; ++ti) {
            try {
                integ.run_to(e, times[ti]);
            } catch (const NumericError& err) {
                throw NumericError("replica " + std::to_string(r) + ", t <= " +
                                   format_double(times[ti]) + ": " + err.what());
            }
            for (int c = 0; c < pd; ++c) {
                double s1 = 0, s2 = 0;
                for (int i = 0; i < e.n; ++i) {
                    double zc = c < cfg.d ? e.xi(i, c)
                                          : e.v[static_cast<std::size_t>(i) * cfg.d + (c - cfg.d)];
                    s1 += zc;
                    s2 += zc * zc;
                }
                const std::size_t at = (static_cast<std::size_t>(r) * n_t + ti) * pd + c;
                m1[at] = s1 / e.n;
                m2[at] = s2 / e.n;
            }
        }
    }

    for (int ti = 0; ti < n_t; ++ti) {
        Json rec;
        rec["record"] = "ensemble_moment";
        rec["t"] = times[ti];
        rec["N"] = cfg.n_particles;
        rec["M"] = M;
        std::vector<double> mean(pd), var(pd), mean_se(pd);
        std::vector<double> col(M);
        for (int c = 0; c < pd; ++c) {
            for (long long r = 0; r < M; ++r)
                col[r] = m1[(static_cast<std::size_t>(r) * n_t + ti) * pd + c];
            mean[c] = tree_sum(col) / M;
            double ss = 0;
            for (long long r = 0; r < M; ++r) ss += (col[r] - mean[c]) * (col[r] - mean[c]);
            mean_se[c] = M > 1 ? std::sqrt(ss / (M * (M - 1.0))) : 0.0;
            for (long long r = 0; r < M; ++r)
                col[r] = m2[(static_cast<std::size_t>(r) * n_t + ti) * pd + c];
            var[c] = tree_sum(col) / M - mean[c] * mean[c];
        }
        rec["mean"] = mean;
        rec["mean_se"] = mean_se;
        rec["var"] = var;
        out.record(rec);
        for (int c = 0; c < pd; ++c) {
            SummaryRow row;
            row.scan_kind = "simulate";
            row.n = cfg.n_particles;
            row.t_or_window = format_double(times[ti]);
            row.metric = (c < cfg.d ? "mean_x" : "mean_v") + std::to_string(c % cfg.d);
            row.value = mean[c];
            row.se = mean_se[c];
            out.summary(row);
        }
    }
    out.finalize();
    std::cout << "simulate: " << M << " replicas of N=" << cfg.n_particles << " at " << n_t
              << " sample times -> " << o.out_dir << "\n";
    return 0;
}

// ---- gibbs ------------------------------------------------------------------------

int cmd_gibbs(const CommonOpts& o) {
    const std::string text = read_file(o.config_path);
    TomlTable t = parse_toml_string(text);
    ModelConfig cfg = model_from_toml(t);
    InitSpec init{};
    if (t.has("init.kind")) init = init_from_toml(t, cfg);
    const int n_cells = static_cast<int>(t.get_i64_or("gibbs.n_cells", 2048));
    const double tol = t.get_f64_or("gibbs.tol", 1e-10);
    const int max_iter = static_cast<int>(t.get_i64_or("gibbs.max_iter", 500));
    GridSpec1D grid = default_grid(cfg, init, n_cells);

    Json params;
    params["n_cells"] = n_cells;
    params["tol"] = tol;
    params["max_iter"] = max_iter;
    FileResultsWriter out(o.out_dir, make_manifest("gibbs", 0, o, text, params));

    GibbsState gs = gibbs_fixed_point(cfg, grid, tol, max_iter);

    Json rec;
    rec["record"] = "gibbs_profile";
    rec["x_min"] = grid.x_min;
    rec["x_max"] = grid.x_max;
    rec["n_cells"] = grid.n_cells;
    rec["rho"] = gs.rho;
    rec["velocity_var"] = gs.velocity_var;
    rec["c_M"] = gs.c_M;
    rec["iterations"] = gs.iterations;
    rec["residual"] = gs.residual;
    out.record(rec);
    double mean = 0, var = 0;
    grid_mean_var(grid, gs.rho, mean, var);
    SummaryRow row;
    row.scan_kind = "gibbs";
    row.metric = "gibbs_var_x";
    row.value = var;
    out.summary(row);
    out.finalize();
    std::cout << "gibbs: converged in " << gs.iterations << " iterations, residual "
              << format_double(gs.residual) << ", Var(x) = " << format_double(var) << " -> "
              << o.out_dir << "\n";
    return 0;
}

// ---- mean-field references (ensemble / map and PDE oracle) --------------------------

Dictionary dictionary_from_config(const TomlTable& t, const ModelConfig& cfg) {
    DictionarySpec d;
    d.dim = static_cast<int>(t.get_i64_or("dictionary.dim", cfg.phase_dim()));
    d.r = static_cast<int>(t.get_i64_or("dictionary.r", 3));
    d.q_prime = t.get_f64_or("dictionary.q_prime", 12.0);
    d.p = t.get_f64_or("dictionary.p", 1.0 / 6.0);
    d.freqs_per_axis = static_cast<int>(t.get_i64_or("dictionary.freqs_per_axis", 9));
    d.freq_max = t.get_f64_or("dictionary.freq_max", 4.0);
    if (t.has("dictionary.sigmas")) d.sigmas = t.get_f64_array("dictionary.sigmas");
    return build_dictionary(d);
}

void write_reference(FileResultsWriter& out, const MeanFieldReference& ref,
                     const std::string& label) {
    Json meta;
    meta["record"] = "reference";
    meta["method"] = method_to_string(ref.method);
    if (ref.n_ref > 0) meta["n_ref"] = ref.n_ref;
    meta["bias_estimate"] = ref.bias_estimate;
    if (ref.substeps_total > 0) meta["substeps_total"] = ref.substeps_total;
    meta["warnings"] = ref.warnings;
    out.record(meta);
    for (const auto& ob : ref.observations) {
        Json rec;
        rec["record"] = "mf_observable";
        rec["phi"] = ob.phi_id;
        rec["t"] = ob.t;
        rec["value"] = ob.value;
        rec["se"] = ob.se;
        out.record(rec);
        SummaryRow row;
        row.scan_kind = label;
        row.t_or_window = format_double(ob.t);
        row.metric = "mf_pairing:" + ob.phi_id;
        row.value = ob.value;
        row.se = ob.se;
        out.summary(row);
    }
}

int cmd_meanfield(const CommonOpts& o) {
    const std::string text = read_file(o.config_path);
    TomlTable t = parse_toml_string(text);
    ModelConfig cfg = model_from_toml(t);
    InitSpec init = init_from_toml(t, cfg);
    ForceMode force = force_mode_from_toml(t);
    std::vector<double> times = t.get_f64_array("meanfield.times");
    const long long n_ref = o.replicas ? *o.replicas : t.get_i64_or("meanfield.n_ref", 100000);
    const int ref_replicas = static_cast<int>(t.get_i64_or("meanfield.ref_replicas", 2));
    std::uint64_t seed =
        o.seed.value_or(static_cast<std::uint64_t>(t.get_i64_or("meanfield.master_seed", 1)));
    std::string method = t.get_str_or("meanfield.method",
                                      cfg.dynamics == Dynamics::overdamped && cfg.d == 1
                                          ? "discrete_map"
                                          : "reference_ensemble");
    Dictionary dict = dictionary_from_config(t, cfg);

    Json params;
    params["times"] = times;
    params["n_ref"] = n_ref;
    params["method"] = method;
    RunManifest man = make_manifest("meanfield", seed, o, text, params);
    man.dictionary = dictionary_snapshot(dict);
    FileResultsWriter out(o.out_dir, man);

    MeanFieldReference ref;
    if (method == "reference_ensemble") {
        ref = meanfield_reference_ensemble(cfg, init, static_cast<int>(n_ref), dict.fns, times,
                                           seed, force, ref_replicas);
    } else if (method == "discrete_map") {
        if (cfg.dynamics != Dynamics::overdamped || cfg.d != 1)
            throw ConfigError("discrete_map needs the overdamped d = 1 model");
        GridSpec1D grid = default_grid(cfg, init, 2048);
        ref = solve_discrete_map_extrapolated(
            cfg, grid,
            [&](const GridSpec1D& g) {
                return gaussian_density(g, init.mean_x_at(0), init.var_x);
            },
            dict.fns, times);
    } else {
        throw ConfigError("unknown meanfield.method '" + method + "'",
                          t.line_of("meanfield.method"));
    }
    write_reference(out, ref, "meanfield");
    out.finalize();
    std::cout << "meanfield: " << method << " with " << dict.fns.size() << " observables at "
              << times.size() << " times -> " << o.out_dir << "\n";
    return 0;
}

int cmd_oracle_pde(const CommonOpts& o) {
    const std::string text = read_file(o.config_path);
    TomlTable t = parse_toml_string(text);
    ModelConfig cfg = model_from_toml(t);
    InitSpec init = init_from_toml(t, cfg);
    if (cfg.dynamics != Dynamics::overdamped || cfg.d != 1)
        throw ConfigError("oracle-pde solves the overdamped d = 1 continuity equation");
    std::vector<double> times = t.get_f64_array("meanfield.times");
    const int n_cells = static_cast<int>(t.get_i64_or("meanfield.n_cells", 2048));
    Dictionary dict = dictionary_from_config(t, cfg);

    Json params;
    params["times"] = times;
    params["n_cells"] = n_cells;
    RunManifest man = make_manifest("oracle-pde", 0, o, text, params);
    man.dictionary = dictionary_snapshot(dict);
    FileResultsWriter out(o.out_dir, man);

    GridSpec1D grid = default_grid(cfg, init, n_cells);
    std::vector<double> mu0 = gaussian_density(grid, init.mean_x_at(0), init.var_x);
    MeanFieldReference ref = solve_mckean_vlasov_1d(cfg, mu0, grid, dict.fns, times);
    write_reference(out, ref, "oracle_pde");
    out.finalize();
    std::cout << "oracle-pde: " << ref.substeps_total << " sub-steps on " << n_cells
              << " cells -> " << o.out_dir << "\n";
    return 0;
}

// ---- correlations (single-N convenience) ---------------------------------------------

int cmd_correlations(const CommonOpts& o) {
    const std::string text = read_file(o.config_path);
    TomlTable t = parse_toml_string(text);
    if (!t.has("scan.kind")) {
        TomlValue v;
        v.kind = TomlValue::Kind::string;
        v.s = "correlation_scaling";
        t.set("scan.kind", v);
    }
    auto n_list = t.get_i64_array("scan.n_list");
    if (n_list.empty()) throw ConfigError("scan.n_list must name the ensemble size");
    const long long n0 = n_list.front();
    if (n_list.size() < 3) {
        // pad so the scaling-fit arity rule is satisfied; only the first cell runs
        TomlValue arr;
        arr.kind = TomlValue::Kind::array;
        for (long long v : {n0, 2 * n0, 4 * n0}) {
            TomlValue e;
            e.kind = TomlValue::Kind::integer;
            e.i = v;
            arr.arr.push_back(e);
        }
        t.set("scan.n_list", arr);
    }
    ScanSpec spec = scan_spec_from_toml(t);
    if (o.seed) spec.master_seed = *o.seed;
    if (o.replicas) spec.replicas = *o.replicas;
    if (o.threads) spec.threads = *o.threads;
    spec.validate();

    Json params = scan_run_params(spec);
    params["only_n"] = n0;
    RunManifest man = make_manifest("correlations", spec.master_seed, o, text, params);
    man.dictionary = dictionary_snapshot(build_dictionary(spec.dict));
    man.threads = spec.threads;
    FileResultsWriter out(o.out_dir, man);
    ScanOutput res = run_scan(spec, out, n0);
    out.finalize();
    for (const auto& e : res.cell_errors) std::cerr << "cell error: " << e << "\n";
    if (!res.cell_errors.empty())
        throw NumericError("correlations run failed: " + res.cell_errors.front());
    std::cout << "correlations: N=" << n0 << ", " << res.cells_done << " cell(s) -> "
              << o.out_dir << "\n";
    return 0;
}

// ---- scan -----------------------------------------------------------------------------

int cmd_scan(const CommonOpts& o, bool verify, const std::string& command_line) {
    const std::string text = read_file(o.config_path);
    TomlTable t = parse_toml_string(text);
    ScanSpec spec = scan_spec_from_toml(t);
    if (o.seed) spec.master_seed = *o.seed;
    if (o.replicas) spec.replicas = *o.replicas;
    if (o.threads) spec.threads = *o.threads;
    spec.validate();

    const bool dict_kind = spec.kind == ScanKind::chaos_scaling ||
                           spec.kind == ScanKind::correlation_scaling ||
                           spec.kind == ScanKind::decay_fit;

    RunManifest man = make_manifest("scan", spec.master_seed, o, text, scan_run_params(spec));
    man.command = command_line;
    if (dict_kind) man.dictionary = dictionary_snapshot(build_dictionary(spec.dict));
    man.threads = spec.threads;

    ScanOutput res;
    {
        FileResultsWriter out(o.out_dir, man);
        res = run_scan(spec, out);
        out.finalize();
    }
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& e : res.cell_errors) std::cerr << "cell error: " << e << "\n";

    if (verify) {
        // one randomly chosen size, re-run from scratch, hash-compared
        NormalStream pick(RngLineage{spec.master_seed, 0}, RngDomain::verify_pick);
        const long long N =
            spec.n_list[static_cast<std::size_t>(pick.next_uniform() * spec.n_list.size())];
        MemorySink redo;
        run_scan(spec, redo, N);

        auto cell_payload = [&](const std::vector<Json>& recs) {
            std::string s;
            for (const auto& r : recs) {
                const std::string type = r.at("record");
                if (type != "moment" && type != "correlation" && type != "gap" &&
                    type != "proxy" && type != "concentration" && type != "relax")
                    continue;
                if (!r.contains("N") || r.at("N") != N) continue;
                s += r.dump();
                s += '\n';
            }
            return s;
        };
        const std::string a = cell_payload(read_jsonl(o.out_dir + "/results.jsonl"));
        const std::string b = cell_payload(redo.records);
        if (a.empty() || sha256_hex(a) != sha256_hex(b))
            throw NumericError("verification cell N=" + std::to_string(N) +
                               " did not reproduce byte-identically");
        std::cout << "verify: cell N=" << N << " reproduced, hash " << sha256_hex(a).substr(0, 16)
                  << "\n";
    }

    std::cout << "scan " << scan_kind_name(spec.kind) << ": " << res.cells_done << " cells, "
              << res.slope_fits.size() + res.decay_fits.size() << " fits -> " << o.out_dir
              << "\n";
    if (!res.cell_errors.empty())
        throw NumericError("scan finished with failing cells: " + res.cell_errors.front());
    return 0;
}

// ---- fit -------------------------------------------------------------------------------

std::map<std::string, std::string> parse_filter(const std::string& filter) {
    std::map<std::string, std::string> out;
    std::istringstream is(filter);
    std::string item;
    while (std::getline(is, item, ',')) {
        if (item.empty()) continue;
        auto eq = item.find('=');
        if (eq == std::string::npos)
            throw ConfigError("bad --filter entry '" + item + "' (expected key=value)");
        out[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return out;
}

bool record_matches(const Json& r, const std::map<std::string, std::string>& filter) {
    for (const auto& [k, v] : filter) {
        if (!r.contains(k)) return false;
        const Json& f = r.at(k);
        if (f.is_string()) {
            if (f.get<std::string>() != v) return false;
        } else {
            // numeric fields compare numerically so "m=2" matches 2 and 2.0
            try {
                if (std::abs(f.get<double>() - std::stod(v)) > 1e-12) return false;
            } catch (...) {
                return false;
            }
        }
    }
    return true;
}

int cmd_fit(const std::string& in_path, const std::string& kind, const std::string& filter) {
    if (kind != "loglog" && kind != "decay")
        throw ConfigError("--kind must be loglog or decay, got '" + kind + "'");
    auto records = read_jsonl(in_path);
    auto flt = parse_filter(filter);

    // group series: loglog keys (metric, m, t) with x = N;
    //               decay keys (metric, m, N) with x = t
    std::map<std::string, std::vector<ScalePoint>> groups;
    for (const auto& r : records) {
        if (!r.contains("record")) continue;
        const std::string type = r.at("record");
        if (type != "proxy" && type != "concentration" && type != "relax") continue;
        if (!record_matches(r, flt)) continue;
        const std::string metric =
            r.contains("metric") ? r.at("metric").get<std::string>() : "excess_moment";
        const long long n_val = r.at("N").get<long long>();
        const double t_val = r.at("t").get<double>();
        const int m_val = r.contains("m") ? r.at("m").get<int>() : 0;
        std::ostringstream key;
        ScalePoint p{0.0, r.at("value").get<double>(), r.at("se").get<double>()};
        if (kind == "loglog") {
            key << "metric=" << metric << " m=" << m_val << " t=" << format_double(t_val);
            p.x = static_cast<double>(n_val);
        } else {
            key << "metric=" << metric << " m=" << m_val << " N=" << n_val;
            p.x = t_val;
        }
        groups[key.str()].push_back(p);
    }
    if (groups.empty()) throw ConfigError("no records in '" + in_path + "' match the filter");

    for (auto& [key, pts] : groups) {
        std::sort(pts.begin(), pts.end(),
                  [](const ScalePoint& a, const ScalePoint& b) { return a.x < b.x; });
        try {
            if (kind == "loglog") {
                SlopeFit fit = fit_loglog_slope(pts);
                std::cout << "loglog " << key << " slope=" << format_double(fit.slope)
                          << " slope_se=" << format_double(fit.slope_se)
                          << " intercept=" << format_double(fit.intercept)
                          << " r2=" << format_double(fit.r2) << " n=" << fit.n_points << "\n";
            } else {
                DecayFit fit = fit_decay_plateau(pts);
                std::cout << "decay " << key << " rate=" << format_double(fit.rate)
                          << " rate_se=" << format_double(fit.rate_se)
                          << " plateau=" << format_double(fit.plateau)
                          << " plateau_se=" << format_double(fit.plateau_se)
                          << " amplitude=" << format_double(fit.amplitude)
                          << " r2=" << format_double(fit.r2)
                          << " identifiable=" << (fit.identifiable ? 1 : 0) << "\n";
            }
        } catch (const DomainError& e) {
            std::cout << kind << " " << key << " unfit: " << e.what() << "\n";
        }
    }
    return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"mean-field Langevin particle scans and chaos-scaling estimators"};
    app.require_subcommand(1);

    CommonOpts sim_o, gibbs_o, mf_o, pde_o, corr_o, scan_o;
    bool verify = false;
    std::string fit_in, fit_kind, fit_filter;

    add_common(app.add_subcommand("simulate", "integrate replica ensembles, record moments"),
               sim_o);
    add_common(app.add_subcommand("gibbs", "solve the Gibbs fixed point on a grid"), gibbs_o);
    add_common(app.add_subcommand("meanfield", "mean-field reference observables"), mf_o);
    add_common(app.add_subcommand("oracle-pde", "finite-volume McKean-Vlasov oracle"), pde_o);
    add_common(
        app.add_subcommand("correlations", "moment and correlation estimates at a single N"),
        corr_o);
    auto* scan_cmd = app.add_subcommand("scan", "full scaling / decay / concentration scans");
    add_common(scan_cmd, scan_o);
    scan_cmd->add_flag("--verify", verify, "re-run one random cell and compare hashes");
    auto* fit_cmd = app.add_subcommand("fit", "re-fit stored results records");
    fit_cmd->add_option("--in", fit_in, "results.jsonl to read")->required();
    fit_cmd->add_option("--kind", fit_kind, "loglog | decay")->required();
    fit_cmd->add_option("--filter", fit_filter, "comma-separated key=value record filters");

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            int code = app.exit(e);  // prints help or the usage error
            return code == 0 ? 0 : 2;
        }
        if (app.got_subcommand("simulate")) return cmd_simulate(sim_o);
        if (app.got_subcommand("gibbs")) return cmd_gibbs(gibbs_o);
        if (app.got_subcommand("meanfield")) return cmd_meanfield(mf_o);
        if (app.got_subcommand("oracle-pde")) return cmd_oracle_pde(pde_o);
        if (app.got_subcommand("correlations")) return cmd_correlations(corr_o);
        if (app.got_subcommand("scan"))
            return cmd_scan(scan_o, verify, join_argv(argc, argv));
        if (app.got_subcommand("fit")) return cmd_fit(fit_in, fit_kind, fit_filter);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace mfl
