// Command-line front end: align curve sets, simulate shape-valued SDEs,
// train conditioning scores, sample bridges, and evaluate checkpoints.

#include <CLI11.hpp>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shapebridge/commands.hpp"

namespace {

void add_seed_and_threads(CLI::App* cmd, std::optional<std::uint64_t>& seed,
                          std::optional<int>& threads) {
    cmd->add_option("--seed", seed, "override the config seed");
    cmd->add_option("--threads", threads, "override the config thread count")
        ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"shape-valued SDE simulation, endpoint conditioning, and score training"};
    app.require_subcommand(1);

    shapebridge::AlignOptions align;
    CLI::App* cmd_align = app.add_subcommand(
        "align", "resample and Procrustes-align curve files, writing the consensus mean");
    cmd_align->add_option("inputs", align.inputs, "curve files (CSV or JSON)")->required();
    cmd_align->add_option("--points", align.points, "resampled points per curve")
        ->capture_default_str();
    cmd_align->add_option("--out", align.out_dir, "output directory")->required();

    shapebridge::SimulateOptions simulate;
    CLI::App* cmd_simulate = app.add_subcommand(
        "simulate", "simulate unconditioned trajectories from a start shape");
    cmd_simulate->add_option("--config", simulate.config_path, "run config JSON")->required();
    cmd_simulate->add_option("--shape", simulate.shape_path, "start shape file")->required();
    cmd_simulate->add_option("--out", simulate.out_dir, "output directory")->required();
    add_seed_and_threads(cmd_simulate, simulate.seed, simulate.threads);

    shapebridge::TrainOptions train;
    CLI::App* cmd_train = app.add_subcommand(
        "train", "train the conditioning score anchored at a target shape");
    cmd_train->add_option("--config", train.config_path, "run config JSON")->required();
    cmd_train->add_option("--target", train.target_path,
                          "target shape (training trajectories start here)")
        ->required();
    cmd_train->add_option("--start", train.start_path,
                          "optional start shape recorded for a later bridge run");
    cmd_train->add_option("--resume", train.resume_path, "checkpoint to continue from");
    cmd_train->add_option("--out", train.out_dir, "output directory")->required();
    add_seed_and_threads(cmd_train, train.seed, train.threads);

    shapebridge::BridgeOptions bridge;
    CLI::App* cmd_bridge = app.add_subcommand(
        "bridge", "sample endpoint-conditioned trajectories between two shapes");
    cmd_bridge->add_option("--config", bridge.config_path, "run config JSON")->required();
    cmd_bridge->add_option("--start", bridge.start_path, "start shape file")->required();
    cmd_bridge->add_option("--target", bridge.target_path,
                           "target shape file (overrides the config)");
    cmd_bridge->add_option("--checkpoint", bridge.checkpoint_path,
                           "trained score checkpoint (default: closed form)");
    cmd_bridge->add_option("--out", bridge.out_dir, "output directory")->required();
    add_seed_and_threads(cmd_bridge, bridge.seed, bridge.threads);

    shapebridge::EvalOptions eval;
    CLI::App* cmd_eval = app.add_subcommand(
        "eval", "evaluate a trained checkpoint against the closed-form score");
    cmd_eval->add_option("--config", eval.config_path, "run config JSON")->required();
    cmd_eval->add_option("--checkpoint", eval.checkpoint_path, "trained checkpoint")
        ->required();
    cmd_eval->add_option("--anchor", eval.anchor_path, "shape the score was anchored at")
        ->required();
    cmd_eval->add_option("--out", eval.out_dir, "output directory")->required();
    cmd_eval->add_option("--seed", eval.seed, "override the config seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : shapebridge::kExitUsage;
    }

    if (cmd_align->parsed()) return shapebridge::cmd_align(align);
    if (cmd_simulate->parsed()) return shapebridge::cmd_simulate(simulate);
    if (cmd_train->parsed()) return shapebridge::cmd_train(train);
    if (cmd_bridge->parsed()) return shapebridge::cmd_bridge(bridge);
    if (cmd_eval->parsed()) return shapebridge::cmd_eval(eval);
    return shapebridge::kExitUsage;
}
