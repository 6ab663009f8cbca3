// Trace simulator and anomaly-detection runner for the V2G aggregator.
//
//   v2g_sim generate --synth --evs 50 --households 10 --hours 24 --seed 7 --out DIR
//   v2g_sim generate --scenario scenario.json --out DIR
//   v2g_sim inject   --trace DIR --attack over_report --count 100 --seed 3
//   v2g_sim run      --trace DIR --config engine.conf --report report.json
//   v2g_sim report   --report report.json --format text

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "v2g/config.hpp"
#include "v2g/datagen.hpp"
#include "v2g/harness.hpp"
#include "v2g/io.hpp"

namespace fs = std::filesystem;
using namespace v2g;

namespace {

struct TraceDir {
    std::string scenario, trace, labels, load, verdicts;
    explicit TraceDir(const std::string& dir)
        : scenario(dir + "/scenario.json"),
          trace(dir + "/trace.jsonl"),
          labels(dir + "/labels.jsonl"),
          load(dir + "/load.csv"),
          verdicts(dir + "/verdicts.jsonl") {}
};

int cmd_generate(const std::string& scenario_path, bool synth, int evs, int households,
                 double hours, std::uint64_t seed, const std::string& out_dir) {
    Scenario scenario;
    if (!scenario_path.empty()) {
        scenario = load_scenario_file(scenario_path);
    } else if (synth) {
        SynthParams p;
        p.n_evs = evs;
        p.n_households = households;
        p.hours = hours;
        p.seed = seed;
        scenario = synth_scenario(p);
    } else {
        std::cerr << "generate: need --scenario FILE or --synth\n";
        return 1;
    }
    scenario.validate();
    LabeledTrace trace = generate_packet_trace(scenario);

    fs::create_directories(out_dir);
    TraceDir paths(out_dir);
    save_scenario_file(paths.scenario, scenario);
    write_trace_file(paths.trace, trace.packets);
    write_labels_file(paths.labels, trace.labels);
    write_load_csv_file(paths.load, trace.load);
    std::cout << "wrote " << trace.packets.size() << " packets, " << trace.load.size()
              << " load samples to " << out_dir << '\n';
    return 0;
}

int cmd_inject(const std::string& dir, const std::string& attack, int count, double magnitude,
               double delta, std::uint64_t seed) {
    auto kind = attack_from_string(attack);
    if (!kind) {
        std::cerr << "inject: unknown attack kind " << attack << '\n';
        return 1;
    }
    TraceDir paths(dir);
    LabeledTrace trace;
    trace.packets = read_trace_file(paths.trace);
    trace.labels = read_labels_file(paths.labels);
    trace.load = read_load_csv_file(paths.load);

    AttackSpec spec;
    spec.kind = *kind;
    spec.count = count;
    spec.magnitude_kw = magnitude;
    spec.delta = delta;
    spec.seed = seed;
    LabeledTrace attacked = inject_attack(trace, spec);

    write_trace_file(paths.trace, attacked.packets);
    write_labels_file(paths.labels, attacked.labels);
    long labeled = 0;
    for (const Label& l : attacked.labels)
        if (l && *l == *kind) ++labeled;
    std::cout << "injected " << attack << ": " << labeled << " labeled packets\n";
    return 0;
}

int cmd_run(const std::string& dir, const std::string& config_path,
            const std::string& report_path, const std::string& verdicts_path, bool timing) {
    TraceDir paths(dir);
    Scenario scenario = load_scenario_file(paths.scenario);
    LabeledTrace trace;
    trace.packets = read_trace_file(paths.trace);
    trace.labels = read_labels_file(paths.labels);
    trace.load = read_load_csv_file(paths.load);

    LoadedConfig cfg;
    if (!config_path.empty()) cfg = load_config_file(config_path);
    RunOptions options;
    options.with_latency = timing;
    options.table = resolve_table(cfg);

    std::vector<VerdictRecord> records;
    RunReport report = run_simulation(scenario, trace, cfg.engine, options, &records);
    write_verdicts_file(verdicts_path.empty() ? paths.verdicts : verdicts_path, records, timing);
    if (!report_path.empty()) save_report_file(report_path, report);
    std::cout << report_to_text(report);
    return 0;
}

int cmd_report(const std::string& report_path, const std::string& format) {
    RunReport r = load_report_file(report_path);
    if (format == "json")
        std::cout << report_to_json(r) << '\n';
    else
        std::cout << report_to_text(r);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"V2G aggregator anomaly-detection simulator"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate", "synthesize a benign trace + load profile");
    std::string scenario_path, out_dir;
    bool synth = false;
    int evs = 50, households = 10;
    double hours = 24.0;
    std::uint64_t seed = 1;
    gen->add_option("--scenario", scenario_path, "scenario JSON file");
    gen->add_flag("--synth", synth, "synthesize a randomized scenario");
    gen->add_option("--evs", evs, "synth: number of EVs");
    gen->add_option("--households", households, "synth: number of households");
    gen->add_option("--hours", hours, "synth: simulated hours");
    gen->add_option("--seed", seed, "synth: RNG seed");
    gen->add_option("--out", out_dir, "output directory")->required();

    auto* inj = app.add_subcommand("inject", "inject one attack class into a trace");
    std::string trace_dir, attack;
    int count = 1;
    double magnitude = 1.0, delta = 0.5;
    std::uint64_t inj_seed = 1;
    inj->add_option("--trace", trace_dir, "trace directory")->required();
    inj->add_option("--attack", attack,
                    "over_report|under_report|out_of_sequence|beyond_subscription|"
                    "wrong_periodicity")
        ->required();
    inj->add_option("--count", count, "number of anomalous packets (minimum for retiming)");
    inj->add_option("--magnitude-kw", magnitude, "power shift for over/under reporting");
    inj->add_option("--delta", delta, "fractional period offset for wrong_periodicity");
    inj->add_option("--seed", inj_seed, "RNG seed");

    auto* run = app.add_subcommand("run", "run the detection engine over a trace");
    std::string config_path, report_path, verdicts_path, run_dir;
    bool no_timing = false;
    run->add_option("--trace", run_dir, "trace directory")->required();
    run->add_option("--config", config_path, "engine key-value config file");
    run->add_option("--report", report_path, "write the run report (JSON)");
    run->add_option("--verdicts", verdicts_path, "verdict JSONL path (default: trace dir)");
    run->add_flag("--no-timing", no_timing,
                  "omit wall-clock fields so identical runs emit identical bytes");

    auto* rep = app.add_subcommand("report", "render a run report");
    std::string rep_path, format = "text";
    rep->add_option("--report", rep_path, "report JSON file")->required();
    rep->add_option("--format", format, "json|text")->check(CLI::IsMember({"json", "text"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_generate(scenario_path, synth, evs, households, hours, seed, out_dir);
        if (inj->parsed())
            return cmd_inject(trace_dir, attack, count, magnitude, delta, inj_seed);
        if (run->parsed())
            return cmd_run(run_dir, config_path, report_path, verdicts_path, !no_timing);
        if (rep->parsed()) return cmd_report(rep_path, format);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
