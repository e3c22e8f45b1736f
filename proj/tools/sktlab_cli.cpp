#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sktlab/errors.hpp"
#include "sktlab/experiments.hpp"

namespace {

enum Exit { kPass = 0, kCertificate = 1, kConfig = 2, kIo = 3 };

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::optional<int> threads;
    std::string format = "csv";
};

int run(sktlab::StudyKind kind, const Options& opt) {
    using namespace sktlab;
    StudyConfig config = opt.config_path.empty() ? default_config(kind) : load_config(opt.config_path);
    if (config.kind != kind)
        throw ConfigError("config describes study '" + study_name(config.kind) + "', not '" + study_name(kind) + "'");
    if (opt.seed) config.seed = *opt.seed;
    if (opt.threads) config.threads = *opt.threads;
    const int threads = resolve_threads(config.threads);

    const auto start = std::chrono::steady_clock::now();
    const StudyResult result = run_study(config);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const auto format = opt.format == "json" ? OutputFormat::json : OutputFormat::csv;
    const std::string path = emit_results(result, opt.out, format, wall, threads);

    std::printf("%s: %s (slope %.4g +- %.2g) -> %s\n", result.study.c_str(), result.passed ? "PASS" : "FAIL",
                result.slope, result.slope_err, path.c_str());
    if (!result.message.empty()) std::printf("  %s\n", result.message.c_str());
    return result.passed ? kPass : kCertificate;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-diffusion walker studies"};
    app.require_subcommand(1);
    Options opt;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"gap-vs-n", "stochastic gap against a constant target as N grows"},
        {"det-order", "semi-discrete convergence order against a fine reference"},
        {"rough", "L2 distance between walkers and the ODE as N grows"},
        {"qv", "martingale variance against its predicted quadratic variation"},
        {"duality", "duality estimate certificates on random instances"},
        {"stability", "stability ratio across grids and perturbation sizes"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opt.config_path, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "master seed");
        sub->add_option("--out", opt.out, "output directory");
        sub->add_option("--threads", opt.threads, "worker threads (SKTLAB_THREADS overrides)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--format", opt.format, "output format")->check(CLI::IsMember({"csv", "json"}));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kConfig;
    }

    try {
        const auto kind = sktlab::study_from_name(app.get_subcommands().front()->get_name());
        return run(kind, opt);
    } catch (const sktlab::IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const sktlab::CertificationError& e) {
        std::cerr << "certificate failure: " << e.what() << '\n';
        return kCertificate;
    } catch (const sktlab::SktError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kConfig;
    }
}
