#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "herald/cli/commands.hpp"

namespace {

using namespace herald;
using namespace herald::cli;

struct Options {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string output;
    std::string format;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
};

RunConfig load_config(const Options& opt) {
    auto cfg = opt.config_path.empty() ? RunConfig{} : RunConfig::load(opt.config_path);
    for (const auto& o : opt.overrides) {
        cfg.apply_override(o);
    }
    if (!opt.output.empty()) {
        cfg.set("output.path", opt.output);
    }
    if (!opt.format.empty()) {
        cfg.set("output.format", opt.format);
    }
    return cfg;
}

template <class Writer>
void emit(const RunConfig& cfg, Writer&& write) {
    const auto path = cfg.get("output.path");
    if (!path || *path == "-") {
        write(std::cout);
        return;
    }
    std::ofstream out(*path);
    if (!out) {
        throw ConfigError("cannot write " + *path);
    }
    write(out);
}

void emit_table(const RunConfig& cfg, const Table& table) {
    const auto format = cfg.output_format();
    emit(cfg, [&](std::ostream& out) {
        if (format == "json") {
            write_json(out, table);
        } else {
            write_csv(out, table);
        }
    });
}

int run(const std::string& command, const Options& opt) {
    const auto cfg = load_config(opt);
    const unsigned threads = opt.threads ? opt.threads : default_thread_count();
    if (command == "source-metrics") {
        emit_table(cfg, cmd_source_metrics(cfg, threads));
    } else if (command == "distribution") {
        emit_table(cfg, cmd_distribution(cfg, threads));
    } else if (command == "fano-vs-theta") {
        emit_table(cfg, cmd_fano_vs_theta(cfg, threads));
    } else if (command == "gain-sweep") {
        emit_table(cfg, cmd_gain_sweep(cfg, threads));
    } else if (command == "optimize") {
        emit_table(cfg, cmd_optimize(cfg, threads));
    } else if (command == "max-distance") {
        emit_table(cfg, cmd_max_distance(cfg, threads));
    } else if (command == "estimate") {
        const auto json = cmd_estimate(cfg);
        emit(cfg, [&](std::ostream& out) { out << json.dump(2) << '\n'; });
    } else if (command == "validate") {
        const auto seed = opt.seed.value_or(static_cast<std::uint64_t>(cfg.get_int("validate.seed", 1)));
        const auto report = cmd_validate(cfg, seed, threads);
        emit_table(cfg, report.table);
        if (!report.passed) {
            std::cerr << "validate: tolerance exceeded\n";
            return kExitValidationFailed;
        }
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heralded single-photon source model and QKD gain analysis"};
    app.require_subcommand(1);
    Options opt;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"source-metrics", "p_post, p_coinc, p_vac, c_multi and Fano factor over a source.mu sweep"},
        {"distribution", "idler photon-number distribution"},
        {"fano-vs-theta", "Fano factor over a coupling.theta sweep"},
        {"gain-sweep", "gain G over a source.mu sweep at fixed length"},
        {"optimize", "optimized gain and breakdown over a link.L_km sweep"},
        {"max-distance", "maximum secure distance and relative gain improvement"},
        {"estimate", "fit slopes and derive coupling parameters from rate measurements"},
        {"validate", "check closed forms against direct summation and Monte Carlo"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", opt.config_path, "key = value configuration file")->check(CLI::ExistingFile);
        sub->add_option("-s,--set", opt.overrides, "override a key, e.g. --set source.mu=0.5");
        sub->add_option("-o,--output", opt.output, "output file (default stdout)");
        sub->add_option("-f,--format", opt.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--seed", opt.seed, "Monte Carlo seed");
        sub->add_option("-j,--threads", opt.threads, "worker threads (default HERALD_THREADS or all cores)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return run(command, opt);
    } catch (const InsecureAtZeroDistance& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInsecure;
    } catch (const InvalidParameter& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InconsistentBounds& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const herald::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}
