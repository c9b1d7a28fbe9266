#include <iostream>

#include <CLI11.hpp>

#include "cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"magnetic Weyl calculus lab"};
    magweyl::cli::RunArgs args;
    std::uint64_t seed = 0;
    app.add_option("--config", args.config, "INI run configuration")->required()->check(CLI::ExistingFile);
    app.add_option("--out", args.out, "output directory")->capture_default_str();
    auto* seed_opt = app.add_option("--seed", seed, "seed for randomized checks (overrides [task] seed)");
    app.add_option("--threads", args.threads, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : magweyl::cli::kError;
    }
    if (*seed_opt) args.seed = seed;
    return magweyl::cli::run(args, std::cout, std::cerr);
}
