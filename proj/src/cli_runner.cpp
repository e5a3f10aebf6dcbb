#include "qds/cli_runner.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "qds/config.hpp"
#include "qds/math_kernel.hpp"
#include "qds/protocol_sim.hpp"
#include "qds/report.hpp"

namespace qds {
namespace {

// Returns 0 on success, 1 when the output file cannot be written.
int deliver(const std::string& content, const std::string& out_path, std::ostream& out,
            std::ostream& err) {
    if (out_path.empty()) {
        out << content;
        return 0;
    }
    std::ofstream file(out_path, std::ios::binary);
    if (!file) {
        err << "error: cannot open output file '" << out_path << "'\n";
        return 1;
    }
    file << content;
    if (!file.good()) {
        err << "error: failed writing output file '" << out_path << "'\n";
        return 1;
    }
    return 0;
}

const std::vector<std::string>& sweep_params() {
    static const std::vector<std::string> names = {"distance_km",     "qx",      "qz",
                                                   "dark_count_prob", "n_pulses", "f_ec"};
    return names;
}

bool known_param(const std::string& name) {
    for (const auto& candidate : sweep_params())
        if (candidate == name) return true;
    return false;
}

std::vector<double> make_grid(double from, double to, double step) {
    if (!(step > 0.0)) throw ConfigError("sweep: --step must be positive");
    std::vector<double> grid;
    if (from > to) return grid;  // empty range: header-only output
    const auto count =
        static_cast<std::uint64_t>(std::floor((to - from) / step + 1e-9)) + 1;
    grid.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) grid.push_back(from + static_cast<double>(i) * step);
    return grid;
}

// Applies one sweep-parameter value; n_pulses sweeps override the run mode.
void apply_param(RunConfig& config, const std::string& name, double value) {
    if (name == "distance_km")
        config.channel.distance_km = value;
    else if (name == "qx")
        config.channel.optical_error_x = value;
    else if (name == "qz")
        config.channel.optical_error_z = value;
    else if (name == "dark_count_prob")
        config.channel.dark_count_prob = value;
    else if (name == "n_pulses")
        config.n_pulses = value;
    else if (name == "f_ec")
        config.analysis.f_ec = value;
    else
        throw ConfigError("unknown sweep parameter '" + name + "'");
}

struct PointOutcome {
    bool evaluated = false;  // false when the point itself failed to analyze
    SecurityReport report;
};

PointOutcome evaluate_point(const RunConfig& config) {
    PointOutcome outcome;
    try {
        if (config.n_pulses) {
            outcome.report = analyze_pulses(*config.n_pulses, config.channel, config.decoy,
                                            config.security, config.analysis);
        } else {
            const SignatureLengthResult found = required_signature_length(
                config.channel, config.decoy, config.security, config.analysis);
            outcome.report = found.report;
        }
        outcome.evaluated = true;
    } catch (const InfeasibleError&) {
        outcome.evaluated = false;
    }
    return outcome;
}

void require_analyze_mode(const RunConfig& config) {
    if (config.n_pulses.has_value() == config.target_level.has_value())
        throw ConfigError(
            "exactly one of run.n_pulses and run.target_level must be set");
}

int cmd_analyze(const RunConfig& config, const std::string& out_path, std::ostream& out,
                std::ostream& err) {
    require_analyze_mode(config);
    SecurityReport report;
    std::string mode;
    if (config.n_pulses) {
        report = analyze_pulses(*config.n_pulses, config.channel, config.decoy, config.security,
                                config.analysis);
        mode = "fixed_pulses";
    } else {
        const SignatureLengthResult found = required_signature_length(
            config.channel, config.decoy, config.security, config.analysis);
        report = found.report;
        mode = "search";
    }
    const int rc = deliver(render_analyze_report(config, report, mode), out_path, out, err);
    if (rc != 0) return rc;
    if (!report.feasible) {
        err << "infeasible: the configured sample cannot separate honest errors from forgers\n";
        return 2;
    }
    return 0;
}

int cmd_sweep(const RunConfig& config, const std::string& param, double from, double to,
              double step, const std::string& out_path, std::ostream& out, std::ostream& err) {
    if (!known_param(param)) throw ConfigError("unknown sweep parameter '" + param + "'");
    if (param == "n_pulses") {
        if (config.target_level)
            throw ConfigError("sweeping n_pulses conflicts with run.target_level");
    } else {
        require_analyze_mode(config);
    }

    std::string csv = csv_line({"param", "value", "feasible", "L", "k", "n_pulses", "e_x_upper",
                                "p_e", "s_a", "s_v", "h_min_bits", "p_abort_linear",
                                "p_abort_log2", "p_forge_linear", "p_forge_log2",
                                "p_repud_linear", "p_repud_log2", "qkd_key_length",
                                "warning_count"});
    for (const double value : make_grid(from, to, step)) {
        RunConfig point = config;
        apply_param(point, param, value);
        const PointOutcome outcome = evaluate_point(point);
        const SecurityReport& r = outcome.report;
        const bool feasible = outcome.evaluated && r.feasible;
        if (!outcome.evaluated) {
            csv += csv_line({param, format_g12(value), "false", "0", "0", "0", "0", "0", "0", "0",
                             "0", "0", "0", "0", "0", "0", "0", "0", "1"});
            continue;
        }
        csv += csv_line({param, format_g12(value), feasible ? "true" : "false",
                         std::to_string(r.L), std::to_string(r.k), format_g12(r.n_pulses),
                         format_g12(r.e_x_upper), format_g12(r.p_e), format_g12(r.s_a),
                         format_g12(r.s_v), format_g12(r.h_min),
                         format_g12(linear_capped(r.p_abort_log2)), format_g12(r.p_abort_log2),
                         format_g12(linear_capped(r.p_forge_log2)), format_g12(r.p_forge_log2),
                         format_g12(linear_capped(r.p_repud_log2)), format_g12(r.p_repud_log2),
                         format_g12(r.qkd_key_length), std::to_string(r.warnings.size())});
    }
    return deliver(csv, out_path, out, err);
}

int cmd_compare_qkd(const RunConfig& config, const std::string& param, double from, double to,
                    double step, const std::string& out_path, std::ostream& out,
                    std::ostream& err) {
    if (!known_param(param)) throw ConfigError("unknown sweep parameter '" + param + "'");
    if (param == "n_pulses") {
        if (config.target_level)
            throw ConfigError("sweeping n_pulses conflicts with run.target_level");
    } else {
        require_analyze_mode(config);
    }

    std::string csv =
        csv_line({"param", "value", "feasible_qds", "qkd_key_length", "classification"});
    for (const double value : make_grid(from, to, step)) {
        RunConfig point = config;
        apply_param(point, param, value);
        const PointOutcome outcome = evaluate_point(point);
        const bool qds_ok = outcome.evaluated && outcome.report.feasible;
        const double qkd = outcome.evaluated ? outcome.report.qkd_key_length : 0.0;
        const bool qkd_ok = outcome.evaluated && qkd > 0.0;
        const char* classification = qds_ok ? (qkd_ok ? "both" : "qds_only")
                                            : (qkd_ok ? "qkd_only" : "neither");
        csv += csv_line({param, format_g12(value), qds_ok ? "true" : "false", format_g12(qkd),
                         classification});
    }
    return deliver(csv, out_path, out, err);
}

std::string simulate_header() {
    return csv_line(
        {"scenario", "metric", "trials", "seed", "value", "ci_low", "ci_high", "reference"});
}

std::string frequency_row(const std::string& scenario, const std::string& metric,
                          std::uint64_t seed, const FrequencyEstimate& estimate,
                          double reference) {
    return csv_line({scenario, metric, std::to_string(estimate.trials), std::to_string(seed),
                     format_g12(estimate.frequency), format_g12(estimate.wilson_low),
                     format_g12(estimate.wilson_high), format_g12(reference)});
}

// Mean of per-trial integer counts with a +-5 sigma interval from the sample
// variance.
std::string mean_row(const std::string& scenario, const std::string& metric,
                     std::uint64_t trials, std::uint64_t seed, std::uint64_t sum,
                     std::uint64_t sumsq, double reference) {
    const double T = static_cast<double>(trials);
    const double mean = T > 0.0 ? static_cast<double>(sum) / T : 0.0;
    double sigma_mean = 0.0;
    if (trials > 1) {
        const double variance =
            (static_cast<double>(sumsq) - T * mean * mean) / (T - 1.0);
        sigma_mean = std::sqrt(std::max(variance, 0.0) / T);
    }
    return csv_line({scenario, metric, std::to_string(trials), std::to_string(seed),
                     format_g12(mean), format_g12(mean - 5.0 * sigma_mean),
                     format_g12(mean + 5.0 * sigma_mean), format_g12(reference)});
}

int cmd_simulate(const RunConfig& config, const std::string& scenario, std::uint64_t trials,
                 std::uint64_t seed, unsigned threads, const std::string& out_path,
                 std::ostream& out, std::ostream& err) {
    if (trials == 0) trials = config.sim.trials;
    if (trials == 0) throw ConfigError("simulate: --trials (or sim.trials) must be positive");
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());

    std::string csv = simulate_header();
    if (scenario == "honest") {
        if (config.sim.L == 0 || config.sim.n_pulses <= 0.0)
            throw ConfigError("simulate honest: sim.l and sim.n_pulses must be positive");
        HonestScenarioConfig hc;
        hc.kgp.n_pulses = static_cast<std::uint64_t>(config.sim.n_pulses);
        hc.kgp.channel = config.channel;
        hc.kgp.decoy = config.decoy;
        hc.kgp.sifting = config.analysis.sifting;
        hc.kgp.L = config.sim.L;
        hc.kgp.k_fraction = config.analysis.k_fraction;
        hc.s_a = config.sim.s_a;
        hc.s_v = config.sim.s_v;
        const HonestScenarioResult result = run_honest_scenario(hc, trials, seed, threads);

        // Analytic companion: the kept/forwarded halves are near-binomial
        // samples of the channel's expected sifted error rate.
        const ExpectedStatistics expected = expected_statistics(
            config.sim.n_pulses, config.channel, config.decoy, config.analysis.sifting);
        const double e_mix = expected.expected_observed_ex;
        const std::uint64_t half = config.sim.L / 2;
        const double half_d = static_cast<double>(half);
        const double accept_one_bob = binomial_tail_below(half, e_mix, config.sim.s_a * half_d);
        const double accept_one_charlie =
            binomial_tail_below(half, e_mix, config.sim.s_v * half_d);
        csv += frequency_row("honest", "bob_accept_frequency", seed, result.bob_accepts,
                             accept_one_bob * accept_one_bob);
        csv += frequency_row("honest", "charlie_accept_frequency", seed, result.charlie_accepts,
                             accept_one_charlie * accept_one_charlie);
        csv += mean_row("honest", "bob_direct_mismatch_mean", trials, seed,
                        result.direct_mismatch_sum, result.direct_mismatch_sumsq,
                        e_mix * half_d);
        csv += mean_row("honest", "bob_forwarded_mismatch_mean", trials, seed,
                        result.forwarded_mismatch_sum, result.forwarded_mismatch_sumsq,
                        e_mix * half_d);
    } else if (scenario == "repudiation") {
        if (config.sim.L == 0)
            throw ConfigError("simulate repudiation: sim.l must be positive");
        AdversaryStrategy strategy;
        strategy.kind = AdversaryStrategy::Kind::repudiating_alice;
        strategy.e_b = config.sim.e_b;
        strategy.e_c = config.sim.e_c;
        const RepudiationScenarioResult result = run_repudiation_scenario(
            strategy, config.sim.L, config.sim.s_a, config.sim.s_v, trials, seed, threads);
        csv += frequency_row("repudiation", "success_frequency", seed, result.repudiation,
                             linear_capped(result.bound_log2));
        csv += csv_line({"repudiation", "kept_mismatch_mean", std::to_string(trials),
                         std::to_string(seed), format_g12(result.kept_mismatch_mean),
                         format_g12(result.kept_mismatch_expected -
                                    5.0 * result.kept_mismatch_sigma_mean),
                         format_g12(result.kept_mismatch_expected +
                                    5.0 * result.kept_mismatch_sigma_mean),
                         format_g12(result.kept_mismatch_expected)});
    } else if (scenario == "forgery") {
        if (config.sim.L == 0) throw ConfigError("simulate forgery: sim.l must be positive");
        const ForgeryScenarioResult result = run_forgery_scenario(
            config.sim.forger_error_rate, config.sim.L, config.sim.s_v, trials, seed, threads);
        csv += frequency_row("forgery", "success_frequency", seed, result.success,
                             result.exact_probability);
    } else {
        throw ConfigError("unknown scenario '" + scenario +
                          "' (expected honest, repudiation, or forgery)");
    }
    return deliver(csv, out_path, out, err);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Finite-size security analysis and Monte Carlo simulation of a "
                 "three-party decoy-state quantum signature protocol"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::string param;
    std::string scenario;
    double from = 0.0;
    double to = 0.0;
    double step = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t trials = 0;
    unsigned threads = 1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration file")->required();
        cmd->add_option("--out", out_path, "output file (default: stdout)");
    };

    CLI::App* analyze = app.add_subcommand(
        "analyze", "security analysis for a pulse budget or a target level");
    add_common(analyze);

    CLI::App* sweep =
        app.add_subcommand("sweep", "analysis across a parameter range (CSV)");
    add_common(sweep);
    sweep->add_option("--param", param, "one of: distance_km, qx, qz, dark_count_prob, n_pulses, f_ec")
        ->required();
    sweep->add_option("--from", from, "first value")->required();
    sweep->add_option("--to", to, "last value (inclusive)")->required();
    sweep->add_option("--step", step, "grid step, > 0")->required();

    CLI::App* simulate =
        app.add_subcommand("simulate", "Monte Carlo protocol scenarios (CSV)");
    add_common(simulate);
    simulate->add_option("--scenario", scenario, "honest, repudiation, or forgery")->required();
    simulate->add_option("--trials", trials, "number of trials (default: sim.trials)");
    simulate->add_option("--seed", seed, "master RNG seed (required)")->required();
    simulate->add_option("--threads", threads, "worker threads (0 = hardware)");

    CLI::App* compare = app.add_subcommand(
        "compare-qkd", "feasibility of signing vs key distillation across a range (CSV)");
    add_common(compare);
    compare->add_option("--param", param, "one of: distance_km, qx, qz, dark_count_prob, n_pulses, f_ec")
        ->required();
    compare->add_option("--from", from, "first value")->required();
    compare->add_option("--to", to, "last value (inclusive)")->required();
    compare->add_option("--step", step, "grid step, > 0")->required();

    std::vector<std::string> argv_storage;
    argv_storage.reserve(args.size() + 1);
    argv_storage.push_back("qds");
    for (const auto& arg : args) argv_storage.push_back(arg);
    std::vector<const char*> argv;
    argv.reserve(argv_storage.size());
    for (const auto& arg : argv_storage) argv.push_back(arg.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        const RunConfig config = load_config(config_path);
        if (analyze->parsed()) return cmd_analyze(config, out_path, out, err);
        if (sweep->parsed()) return cmd_sweep(config, param, from, to, step, out_path, out, err);
        if (simulate->parsed())
            return cmd_simulate(config, scenario, trials, seed, threads, out_path, out, err);
        if (compare->parsed())
            return cmd_compare_qkd(config, param, from, to, step, out_path, out, err);
        err << "error: no subcommand selected\n";
        return 1;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const InfeasibleError& e) {
        err << "infeasible: " << e.what() << "\n";
        return 2;
    } catch (const InsufficientCountsError& e) {
        err << "simulation failure: " << e.what() << "\n";
        return 3;
    } catch (const EstimationError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace qds
