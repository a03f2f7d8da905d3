#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <thread>

#include <rdars/rdars.hpp>

namespace {

enum ExitCode { ok = 0, config_error = 1, runtime_error = 2 };

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> trials;
    int threads = 0;
};

rdars::ExperimentConfig resolve_config(const Flags& f, std::optional<rdars::Scenario> scenario)
{
    rdars::ExperimentConfig cfg = f.config.empty() ? rdars::ExperimentConfig{} : rdars::load_config(f.config);
    if (scenario)
        cfg.scenario = *scenario;
    if (f.seed)
        cfg.base_seed = *f.seed;
    if (f.trials)
        cfg.trials = *f.trials;
    cfg.validate();
    return cfg;
}

int thread_count(const Flags& f)
{
    if (f.threads > 0)
        return f.threads;
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void write_outputs(const rdars::ExperimentConfig& cfg, const rdars::ExperimentResult& res, const std::string& path)
{
    if (path.empty()) {
        rdars::write_csv(std::cout, res.rows);
        return;
    }
    std::ofstream csv(path, std::ios::binary);
    if (!csv)
        throw rdars::ComputeError("cannot write '" + path + "'");
    rdars::write_csv(csv, res.rows);

    std::ofstream man(path + ".manifest", std::ios::binary);
    if (!man)
        throw rdars::ComputeError("cannot write '" + path + ".manifest'");
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(rdars::fnv1a64(rdars::canonical_config(cfg))));
    man << "artifact_version=" << rdars::kArtifactVersion << "\n"
        << "config_hash=fnv1a64:" << hash << "\n"
        << "base_seed=" << cfg.base_seed << "\n"
        << "scenario=" << rdars::scenario_name(cfg.scenario) << "\n"
        << "trials=" << cfg.trials << "\n";
}

int run_sweep(const Flags& f, rdars::Scenario scenario)
{
    const auto cfg = resolve_config(f, scenario);
    const auto res = rdars::run_experiment(cfg, thread_count(f));
    write_outputs(cfg, res, f.out);
    return ok;
}

int run_validate(const Flags& f)
{
    const auto checks = rdars::run_validation(f.seed.value_or(1));
    bool all = true;
    for (const auto& c : checks) {
        std::cout << (c.passed ? "PASS  " : "FAIL  ") << c.name << ": " << c.detail << "\n";
        all = all && c.passed;
    }
    return all ? ok : runtime_error;
}

int run_decompose(const Flags& f)
{
    using namespace rdars;
    auto cfg = resolve_config(f, Scenario::uplink);
    const Eigen::Index a = cfg.a_values.front();
    Rng rng = make_rng(cfg.base_seed, {0, detail::channel_stream});
    const auto ch = generate_uplink_channels(cfg.geometry, cfg.fading, cfg.M, cfg.N, rng);
    OptimizerOptions opts = cfg.optimizer;
    opts.seed = derive_seed(cfg.base_seed, {0, detail::optimizer_stream, static_cast<std::uint64_t>(a)});
    const auto sol = solve_p1(ch, a, opts);
    const auto dflt = ModeSelection::first(cfg.N, a);
    const auto approx = ris_approx_gains(ch, sol.phases, sol.mode, dflt);
    const double p = dbm_to_watt(cfg.power_sweep_dbm.front());
    const double gbar = p / cfg.noise_power();

    std::cout << "realization: trial 0, base_seed " << cfg.base_seed << ", M=" << cfg.M << " N=" << cfg.N
              << " a=" << a << ", p=" << cfg.power_sweep_dbm.front() << " dBm\n";
    std::cout << "connected elements:";
    for (auto n : sol.mode.connected())
        std::cout << ' ' << n;
    std::cout << "\n\n" << std::left << std::setw(22) << "term" << std::setw(18) << "linear" << "dB\n";
    auto row = [](const char* name, double v) {
        std::cout << std::left << std::setw(22) << name << std::setw(18) << format_g9(v)
                  << (v > 0.0 ? format_g9(linear_to_db(v)) : std::string("-")) << "\n";
    };
    const auto& g = sol.gains;
    row("reflection gain", g.reflection_gain);
    row("distribution gain", g.distribution_gain);
    row("selection gain", g.selection_gain);
    row("sum", g.reflection_gain + g.distribution_gain + g.selection_gain);
    row("G_RIS (no mask)", approx.ris);
    row("SNR", gbar * (g.reflection_gain + g.distribution_gain + g.selection_gain));
    std::cout << "rate " << format_g9(std::log2(1.0 + sol.snr * gbar)) << " bit/s/Hz\n";
    return ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"RDARS uplink / ISAC simulator"};
    app.require_subcommand(1);
    Flags flags;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config, "config file (key = value)");
        sub->add_option("--seed", flags.seed, "override base_seed");
        sub->add_option("--out", flags.out, "output CSV path (stdout if omitted)");
        sub->add_option("--trials", flags.trials, "override trials")->check(CLI::PositiveNumber);
        sub->add_option("--threads", flags.threads, "worker threads (default: hardware)")->check(CLI::NonNegativeNumber);
    };
    auto* uplink = app.add_subcommand("uplink", "uplink rate sweep");
    auto* isac = app.add_subcommand("isac", "ISAC radar SNR sweep");
    auto* validate = app.add_subcommand("validate", "oracle checks on small instances");
    auto* decompose = app.add_subcommand("decompose", "gain table for one realization");
    for (auto* s : {uplink, isac, validate, decompose})
        add_common(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        if (*uplink)
            return run_sweep(flags, rdars::Scenario::uplink);
        if (*isac)
            return run_sweep(flags, rdars::Scenario::isac);
        if (*validate)
            return run_validate(flags);
        return run_decompose(flags);
    } catch (const rdars::InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return runtime_error;
    }
}
