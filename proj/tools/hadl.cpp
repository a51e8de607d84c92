#include <algorithm>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "hadl/error.hpp"
#include "hadl/experiment.hpp"

namespace {

struct Overrides {
    std::string config_file;
    std::map<std::string, std::string> values;
    bool quiet = false;
};

std::string dashed(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

void add_config_options(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_file, "key = value config file (applied before overrides)");
    for (const auto& key : hadl::config_keys()) {
        std::string names = "--" + key.name;
        if (dashed(key.name) != key.name) names += ",--" + dashed(key.name);
        cmd->add_option(names, o.values[key.name], key.help);
    }
    cmd->add_flag("--quiet,-q", o.quiet, "suppress progress lines");
}

hadl::ExperimentConfig resolve(CLI::App* cmd, const Overrides& o) {
    hadl::ExperimentConfig config;
    if (!o.config_file.empty()) hadl::apply_config_file(config, o.config_file);
    for (const auto& key : hadl::config_keys()) {
        if (cmd->count("--" + key.name) > 0) hadl::apply_config_value(config, key.name, o.values.at(key.name));
    }
    config.quiet = o.quiet;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Haar + DCT + low-rank linear forecaster"};
    app.require_subcommand(1);

    Overrides train_o, robust_o, ablate_o, params_o;
    auto* train = app.add_subcommand("train", "train and evaluate every configured horizon");
    add_config_options(train, train_o);

    auto* robust = app.add_subcommand("robustness", "train under each noise level and report NRR / MAV");
    add_config_options(robust, robust_o);

    auto* ablate = app.add_subcommand("ablate", "run one ablation grid");
    add_config_options(ablate, ablate_o);
    std::string axis;
    ablate->add_option("--axis", axis, "haar, head, dct, rank or lookback")->required();

    auto* params = app.add_subcommand("params", "print the parameter count of a configuration");
    add_config_options(params, params_o);
    std::size_t horizon = 0;
    params->add_option("--horizon,-H", horizon, "horizon (default: first of --horizons)");

    auto* exp = app.add_subcommand("export-weights", "write P*Q of a low-rank checkpoint as CSV");
    std::string checkpoint, out;
    exp->add_option("--checkpoint", checkpoint, "model.ckpt path")->required();
    exp->add_option("--out", out, "output CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            hadl::cmd_train(resolve(train, train_o), std::cerr);
        } else if (robust->parsed()) {
            hadl::cmd_robustness(resolve(robust, robust_o), std::cerr);
        } else if (ablate->parsed()) {
            const auto parsed_axis = hadl::parse_axis(axis);
            hadl::cmd_ablate(resolve(ablate, ablate_o), parsed_axis, std::cerr);
        } else if (params->parsed()) {
            const auto config = resolve(params, params_o);
            const std::size_t h = horizon ? horizon : config.horizons.front();
            hadl::cmd_params(config.lookback, h, config.variant, std::cout);
        } else if (exp->parsed()) {
            hadl::cmd_export_weights(checkpoint, out);
        }
    } catch (const hadl::Error& e) {
        std::cerr << "hadl: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "hadl: error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
