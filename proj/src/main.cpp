#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "lda/commands.hpp"
#include "lda/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"loss-distribution engine for operational risk capital"};
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    int threads = 0;
    app.add_option("--config", config_path, "run configuration file")->required();
    auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides the config)");
    auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides the config)");
    auto* threads_opt =
        app.add_option("--threads", threads, "worker threads (overrides the config)");
    CLI11_PARSE(app, argc, argv);

    try {
        lda::RunConfig cfg = lda::parse_config(config_path);
        if (seed_opt->count() > 0) cfg.seed = seed;
        if (out_opt->count() > 0) cfg.output = out_dir;
        if (threads_opt->count() > 0) {
            if (threads < 1) throw lda::ConfigError("--threads must be at least 1");
            cfg.threads = threads;
        }
        lda::run_command(cfg, std::cout);
        return 0;
    } catch (const lda::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const lda::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const lda::NumericsError& e) {
        std::cerr << "numerics error: " << e.what() << '\n';
        return 4;
    } catch (const lda::ConvergenceError& e) {
        std::cerr << "convergence error: " << e.what() << '\n';
        return 5;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
