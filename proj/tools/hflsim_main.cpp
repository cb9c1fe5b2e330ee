/*
 * Copyright 2026 The HFLSim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hfl/report.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "hflsim - deterministic hierarchical federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> rounds;
  std::optional<std::string> out_dir;

  auto add_overrides = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "scenario config file")->required();
    cmd->add_option("--seed", seed, "override the master seed");
    cmd->add_option("--rounds", rounds, "override the number of global rounds");
    cmd->add_option("--out", out_dir, "override the output directory");
  };

  CLI::App* run = app.add_subcommand("run", "run a scenario, write outputs");
  add_overrides(run);

  CLI::App* validate =
      app.add_subcommand("validate", "validate a scenario config");
  validate->add_option("config", config_path, "scenario config file")
      ->required();

  CLI::App* compare = app.add_subcommand(
      "compare-flat", "run a scenario and its flattened equivalent");
  add_overrides(compare);

  CLI11_PARSE(app, argc, argv);

  hfl::RunOverrides ov;
  ov.seed = seed;
  ov.rounds = rounds;
  ov.out_dir = out_dir;

  if (run->parsed()) return hfl::cmd_run(config_path, ov);
  if (validate->parsed()) return hfl::cmd_validate(config_path);
  return hfl::cmd_compare_flat(config_path, ov);
}
