#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "shiftquant/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Class-prior quantification and domain adaptation under label and "
               "conditional shift"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<int> dims;
  std::optional<int> clusters;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config, "JSON config path");
    opt->check(CLI::ExistingFile);
    if (config_required) opt->required();
    sub->add_option("--out", out_dir, "output directory (default: current)");
    sub->add_option("--seed", seed, "seed override");
    return sub;
  };

  auto* generate = add_common(app.add_subcommand("generate", "sample a dataset from a spec"), true);
  auto* train_cmd = add_common(app.add_subcommand("train", "train the softmax classifier"), true);
  auto* quantify = add_common(
      app.add_subcommand("quantify", "estimate the target class prior"), true);
  quantify->add_option("--method", method, "hard or soft confusion (default: soft)");
  auto* adapt = add_common(
      app.add_subcommand("adapt", "quantify and recalibrate against a target"), true);
  adapt->add_option("--method", method,
                    "none, global-hard, global-soft, subspace-hard, subspace-soft");
  adapt->add_option("--dims", dims, "PCA dimensions for subspace methods");
  adapt->add_option("--clusters", clusters, "K-Means clusters for subspace methods");
  auto* eval = add_common(app.add_subcommand("eval", "score an estimated prior"), true);
  auto* exp_label = add_common(
      app.add_subcommand("exp-label-shift", "label-shift benchmark across seeds"), false);
  auto* exp_cond = add_common(
      app.add_subcommand("exp-cond-shift", "conditional+label shift benchmark"), false);
  exp_cond->add_option("--dims", dims, "PCA dimensions override");
  exp_cond->add_option("--clusters", clusters, "K-Means clusters override");
  auto* noise = add_common(
      app.add_subcommand("noise-scaling", "hard vs soft estimator noise sweep"), false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const shiftquant::CommandOverrides overrides{seed, method, dims, clusters};
  const auto optional_config = [&](CLI::App* sub) {
    return sub->count("--config") ? std::optional<std::string>(config) : std::nullopt;
  };

  try {
    if (generate->parsed()) {
      shiftquant::cmd_generate(config, out_dir, overrides);
    } else if (train_cmd->parsed()) {
      shiftquant::cmd_train(config, out_dir, overrides);
    } else if (quantify->parsed()) {
      shiftquant::cmd_quantify(config, out_dir, overrides);
    } else if (adapt->parsed()) {
      shiftquant::cmd_adapt(config, out_dir, overrides);
    } else if (eval->parsed()) {
      shiftquant::cmd_eval(config, out_dir, overrides);
    } else if (exp_label->parsed()) {
      shiftquant::cmd_exp_label_shift(optional_config(exp_label), out_dir, overrides);
    } else if (exp_cond->parsed()) {
      shiftquant::cmd_exp_cond_shift(optional_config(exp_cond), out_dir, overrides);
    } else if (noise->parsed()) {
      shiftquant::cmd_noise_scaling(optional_config(noise), out_dir, overrides);
    }
  } catch (const shiftquant::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const shiftquant::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
