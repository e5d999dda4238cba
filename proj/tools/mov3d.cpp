#include <CLI11.hpp>

#include <iostream>

#include "mov3d/pipeline.h"

int main(int argc, char** argv) {
    CLI::App app{"Audio-visual voxel reconstruction pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    bool force = false;
    std::size_t threads = 1;

    for (const auto& name : mov3d::command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "key=value run config")->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--seed", seed, "overrides the config seed");
        sub->add_flag("--force", force, "rebuild existing artifacts");
        sub->add_option("--threads", threads, "evaluation worker threads")->check(CLI::PositiveNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        mov3d::RunConfig cfg = config_path.empty() ? mov3d::RunConfig{} : mov3d::read_config(config_path);
        if (seed) cfg.seed = *seed;
        const bool ran = mov3d::run_command(command, cfg, {out_dir, force, threads}, std::cout);
        if (!ran) std::cout << "skipped " << command << "\n";
        return 0;
    } catch (const mov3d::Error& e) {
        std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
        return mov3d::exit_code_for(e);
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
}
