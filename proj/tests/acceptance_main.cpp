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

// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
// the process exits non-zero if any criterion fails.
//
// Usage: acceptance <scenarios-dir> <hflsim-binary>

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hfl/engine.hpp"
#include "hfl/privacy.hpp"
#include "hfl/report.hpp"

namespace fs = std::filesystem;
using namespace hfl;

namespace {

fs::path g_scenarios;
fs::path g_binary;

struct CheckFailure {
  std::string message;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw CheckFailure{message};
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

fs::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  const fs::path p = fs::temp_directory_path() /
                     ("hflsim_acc_" + std::to_string(::getpid()) + "_" + tag +
                      "_" + std::to_string(counter++));
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd =
      g_binary.string() + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), "cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

NodeSpecEntry entry(NodeId id, NodeKind kind,
                    std::optional<NodeId> parent = std::nullopt) {
  NodeSpecEntry e;
  e.id = id;
  e.kind = kind;
  e.parent = parent;
  return e;
}

ScenarioConfig tree_config(int depth3, int servers, int users_per_server,
                           std::uint64_t seed, int rounds) {
  ScenarioConfig cfg;
  cfg.master_seed = seed;
  cfg.global_rounds = rounds;
  cfg.hierarchy.nodes.push_back(entry(0, NodeKind::Root));
  NodeId next_user = 100;
  if (!depth3) {
    for (int s = 1; s <= servers; ++s) {
      cfg.hierarchy.nodes.push_back(entry(s, NodeKind::GroupServer, 0));
      for (int u = 0; u < users_per_server; ++u) {
        cfg.hierarchy.nodes.push_back(entry(next_user++, NodeKind::User, s));
      }
    }
  } else {
    NodeId leaf = 10;
    for (NodeId mid = 1; mid <= 2; ++mid) {
      cfg.hierarchy.nodes.push_back(entry(mid, NodeKind::GroupServer, 0));
      for (int k = 0; k < servers; ++k) {
        cfg.hierarchy.nodes.push_back(entry(leaf, NodeKind::GroupServer, mid));
        for (int u = 0; u < users_per_server; ++u) {
          cfg.hierarchy.nodes.push_back(entry(next_user++, NodeKind::User, leaf));
        }
        ++leaf;
      }
    }
  }
  cfg.data.classes = 2;
  cfg.data.dim = 2;
  cfg.data.n_per_class = 100;
  cfg.data.spread = 0.25;
  cfg.data.test_fraction = 0.2;
  cfg.model.hyperparams = {0.5, 1, 8};
  return cfg;
}

Update single_sample_update(Rng& rng, const ModelArch& arch, Vector* x_out,
                            int* label_out) {
  const Vector x = rng.normal_vector(arch.input_dim, 0.0, 2.0);
  const int label = static_cast<int>(rng.uniform_int(arch.num_classes));
  ModelParams p = init_params(arch, 0);
  Matrix xf(1, arch.input_dim);
  xf.row(0) = x.transpose();
  Eigen::VectorXi y(1);
  y[0] = label;
  Update u;
  u.origin = 10;
  u.round = 1;
  u.weight = 1.0;
  u.delta = -0.5 * loss_and_grad(p, xf, y).second;
  *x_out = x;
  *label_out = label;
  return u;
}

// ---------------------------------------------------------------------------

void criterion_flat_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    {
      const EngineSetup s = prepare_setup(tree_config(0, 4, 4, seed, 3));
      const RunResult r = run_prepared(s);
      worst = std::max(worst, (r.final_model.values - flat_reference_model(s))
                                  .cwiseAbs()
                                  .maxCoeff());
    }
    {
      const EngineSetup s = prepare_setup(tree_config(1, 2, 3, seed, 3));
      const RunResult r = run_prepared(s);
      worst = std::max(worst, (r.final_model.values - flat_reference_model(s))
                                  .cwiseAbs()
                                  .maxCoeff());
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  require(worst <= 1e-12,
          "max coordinate diff " + num(worst) + " exceeds 1e-12");
  require(secs < 10.0, "runtime " + num(secs) + "s exceeds 10s");
  std::cout << "  (max diff " << worst << ", " << num(secs) << "s)\n";
}

void criterion_gradient_check() {
  Rng rng(505);
  for (const ArchKind kind : {ArchKind::LogReg, ArchKind::Mlp1}) {
    for (int trial = 0; trial < 20; ++trial) {
      const int d = 2 + static_cast<int>(rng.uniform_int(3));
      const int classes = 2 + static_cast<int>(rng.uniform_int(3));
      const int batch = 1 + static_cast<int>(rng.uniform_int(5));
      const ModelArch arch{kind, d, classes, kind == ArchKind::Mlp1 ? 4 : 0};
      ModelParams p;
      p.arch = arch;
      p.values = rng.normal_vector(arch.param_count(), 0.0, 0.8);
      Matrix x(batch, d);
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        x.data()[i] = rng.normal(0.0, 1.5);
      }
      Eigen::VectorXi y(batch);
      for (int i = 0; i < batch; ++i) {
        y[i] = static_cast<int>(rng.uniform_int(classes));
      }
      const Vector analytic = loss_and_grad(p, x, y).second;
      Vector numeric(analytic.size());
      const double h = 1e-6;
      ModelParams probe = p;
      for (Eigen::Index i = 0; i < p.values.size(); ++i) {
        probe.values[i] = p.values[i] + h;
        const double up = loss_and_grad(probe, x, y).first;
        probe.values[i] = p.values[i] - h;
        const double down = loss_and_grad(probe, x, y).first;
        probe.values[i] = p.values[i];
        numeric[i] = (up - down) / (2.0 * h);
      }
      const double rel = (analytic - numeric).cwiseAbs().maxCoeff() /
                         std::max(1e-8, analytic.cwiseAbs().maxCoeff());
      require(rel < 1e-5, "relative gradient error " + num(rel));
    }
  }
}

void criterion_mask_cancellation() {
  double worst = 0.0;
  for (int size = 2; size <= 8; ++size) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(derive_seed(seed, StreamTag::Mask,
                          {static_cast<std::uint64_t>(size)}));
      MaskGroup group;
      group.pairwise_seed = 7000 + seed * 100 + static_cast<std::uint64_t>(size);
      std::vector<Update> ups;
      for (int m = 0; m < size; ++m) {
        Update u;
        u.origin = 10 + m;
        u.weight = rng.uniform(0.5, 5.0);
        u.delta = rng.normal_vector(6, 0.0, 1.0);
        group.members.push_back(u.origin);
        ups.push_back(u);
      }
      const auto masked = mask_updates(ups, group);
      const Update plain = fedavg(ups, 0, 1);
      const Update hidden = fedavg(masked, 0, 1);
      worst = std::max(
          worst, (plain.delta - hidden.delta).cwiseAbs().maxCoeff());

      if (size >= 3) {  // drop one member, correct, compare with survivors
        std::vector<Update> survivors(masked.begin() + 1, masked.end());
        const Update corrected = fedavg_with_dropout(survivors, group, 0, 1);
        std::vector<Update> plain_surv(ups.begin() + 1, ups.end());
        const Update expect = fedavg(plain_surv, 0, 1);
        worst = std::max(
            worst, (corrected.delta - expect.delta).cwiseAbs().maxCoeff());
      }
    }
  }
  require(worst < 1e-9, "mask cancellation error " + num(worst));
  std::cout << "  (worst error " << worst << ")\n";
}

void criterion_reconstruction() {
  const ModelArch arch{ArchKind::LogReg, 2, 2, 0};
  Rng rng(808);
  Rng noise_rng(809);
  double clean_worst = 0.0;
  double noisy_worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    Vector x;
    int label = 0;
    const Update u = single_sample_update(rng, arch, &x, &label);

    const Reconstruction clean = reconstruct_from_gradient(u, arch);
    require(clean.label == label, "label mismatch on clean probe");
    clean_worst =
        std::max(clean_worst, (clean.features - x).cwiseAbs().maxCoeff());

    DefensePipeline dp{{ClipStep{1.0}, GaussNoiseStep{0.1}}};
    const Update defended = apply_pipeline(u, dp, noise_rng);
    const Reconstruction noisy = reconstruct_from_gradient(defended, arch);
    noisy_worst =
        std::max(noisy_worst, (noisy.features - x).cwiseAbs().maxCoeff());
  }
  require(clean_worst < 1e-6,
          "undefended reconstruction error " + num(clean_worst));
  require(noisy_worst >= 10.0 * clean_worst,
          "defended error " + num(noisy_worst) + " not 10x clean error " +
              num(clean_worst));
  std::cout << "  (clean " << clean_worst << ", defended " << noisy_worst
            << ")\n";

  // The in-engine probe path agrees: exact without defenses, degraded with.
  const ScenarioConfig cfg = load_and_validate(g_scenarios / "recon_probe.cfg");
  const RunResult plain = run_simulation(cfg);
  require(plain.probe.has_value() && plain.probe->reconstructed,
          "engine probe did not reconstruct");
  require(plain.probe->max_abs_error < 1e-6,
          "engine probe error " + num(plain.probe->max_abs_error));

  ScenarioConfig defended_cfg = cfg;
  defended_cfg.user_default_pipeline =
      DefensePipeline{{ClipStep{1.0}, GaussNoiseStep{0.1}}};
  const RunResult defended = run_simulation(defended_cfg);
  require(defended.probe.has_value() && defended.probe->reconstructed,
          "defended engine probe missing");
  require(defended.probe->max_abs_error >=
              10.0 * plain.probe->max_abs_error,
          "defended engine probe error not 10x the clean error");
}

void criterion_robust_aggregation() {
  Rng rng(2025);
  Vector lo = Vector::Constant(6, 1e18);
  Vector hi = Vector::Constant(6, -1e18);
  std::vector<Update> benign;
  for (int b = 0; b < 7; ++b) {
    Update u;
    u.origin = b;
    u.weight = 1.0;
    u.delta = rng.normal_vector(6, 0.0, 0.5);
    lo = lo.cwiseMin(u.delta);
    hi = hi.cwiseMax(u.delta);
    benign.push_back(u);
  }
  std::vector<Update> all = benign;
  for (int f = 0; f < 3; ++f) {
    Update u = benign[static_cast<std::size_t>(f)];
    u.origin = 100 + f;
    u.delta *= 100.0;  // gamma = 100 boost
    all.push_back(u);
  }
  const Update med = median_aggregate(all, 0, 1);
  for (int c = 0; c < 6; ++c) {
    require(med.delta[c] >= lo[c] && med.delta[c] <= hi[c],
            "median left the benign envelope at coordinate " +
                std::to_string(c));
  }
  const Update benign_mean = fedavg(benign, 0, 1);
  const Update naive = fedavg(all, 0, 1);
  const double naive_dev =
      (naive.delta - benign_mean.delta).cwiseAbs().maxCoeff();
  const double med_dev = (med.delta - benign_mean.delta).cwiseAbs().maxCoeff();
  require(naive_dev >= 10.0 * med_dev,
          "fedavg deviation " + num(naive_dev) + " not 10x median deviation " +
              num(med_dev));
  std::cout << "  (median dev " << med_dev << ", fedavg dev " << naive_dev
            << ")\n";
}

void criterion_detection_exclusion() {
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioConfig cfg =
      load_and_validate(g_scenarios / "poisoned_server.cfg");
  const RunResult r = run_simulation(cfg);

  int first_active = 1 << 30;
  NodeId attacker = -1;
  for (const AdversarySpec& a : cfg.adversaries) {
    if (const auto* ms = std::get_if<MaliciousServer>(&a.kind)) {
      first_active = a.active_from_round;
      attacker = ms->id;
    }
  }
  bool flagged_first_round = false;
  for (const Notification& n : r.notifications) {
    if (n.note == "excluded" && n.flagged == attacker) {
      require(n.round == first_active,
              "flagged at round " + std::to_string(n.round) + ", expected " +
                  std::to_string(first_active));
      flagged_first_round = true;
    }
  }
  require(flagged_first_round, "attacker was never flagged");
  require(!r.final_hierarchy.contains(attacker), "attacker not excluded");
  require(r.metrics.back().round == 30, "run did not reach round 30");
  require(r.metrics.back().test_accuracy >= 0.95,
          "accuracy " + num(r.metrics.back().test_accuracy) + " below 0.95");
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  require(secs < 60.0, "runtime " + num(secs) + "s exceeds 60s");
  std::cout << "  (accuracy " << r.metrics.back().test_accuracy << ", "
            << num(secs) << "s)\n";
}

void criterion_verification_cost() {
  const fs::path out = fresh_dir("cost");
  const int code = run_cli("compare-flat " +
                           (g_scenarios / "cost_exp.cfg").string() + " --out " +
                           out.string());
  require(code == 0, "compare-flat exited with " + std::to_string(code));
  const auto j = nlohmann::json::parse(slurp(out / "compare.json"));
  const double flat = j.at("flat").at("verify_units_per_round").get<double>();
  const double hier =
      j.at("hierarchical").at("verify_units_per_round").get<double>();
  require(flat == 1048576.0, "flat verify units " + num(flat));
  require(hier == 112.0, "hierarchical verify units " + num(hier));
  std::cout << "  (flat " << flat << ", hierarchical " << hier << ")\n";
}

void criterion_linkability() {
  ScenarioConfig cfg = load_and_validate(g_scenarios / "default.cfg");
  cfg.masking.enabled = true;
  const EngineSetup hier_setup = prepare_setup(cfg);
  const RunResult hier = run_prepared(hier_setup);
  require(hier.linkability.total_links == 0,
          "masked hierarchy leaked " +
              std::to_string(hier.linkability.total_links) + " links");

  const EngineSetup flat_setup = flatten_setup(hier_setup);
  const RunResult flat = run_prepared(flat_setup);
  const std::vector<NodeId> users = flat_setup.hierarchy.users();
  const NodeId root = flat_setup.hierarchy.root();
  for (NodeId u : users) {
    require(flat.linkability.linked(root, u),
            "flat run missing link to user " + std::to_string(u));
  }
  std::cout << "  (hier links 0, flat links "
            << flat.linkability.total_links << "/" << users.size() << ")\n";
}

void criterion_determinism() {
  const std::vector<std::string> names{"fig1.cfg",         "default.cfg",
                                       "trusted_groups.cfg", "poisoned_server.cfg",
                                       "recon_probe.cfg",  "cost_exp.cfg"};
  for (const std::string& name : names) {
    const fs::path a = fresh_dir("det_a");
    const fs::path b = fresh_dir("det_b");
    const std::string cfg = (g_scenarios / name).string();
    require(run_cli("run " + cfg + " --out " + a.string()) == 0,
            name + ": first run failed");
    require(run_cli("run " + cfg + " --out " + b.string()) == 0,
            name + ": second run failed");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a)) {
      files.push_back(e.path().filename());
    }
    require(!files.empty(), name + ": no outputs written");
    for (const fs::path& f : files) {
      require(fs::exists(b / f), name + ": " + f.string() + " missing in rerun");
      require(slurp(a / f) == slurp(b / f),
              name + ": " + f.string() + " differs between runs");
    }
  }
}

void criterion_churn() {
  ScenarioConfig cfg = load_and_validate(g_scenarios / "default.cfg");
  // Drop one leaf server (and its eight users) at round 10.
  cfg.churn.push_back({10, 2});
  const RunResult r = run_simulation(cfg);
  require(r.metrics.back().round == 30, "run did not complete");
  require(!r.final_hierarchy.contains(2), "server 2 still present");
  require(r.final_accuracy >= 0.90,
          "accuracy " + num(r.final_accuracy) + " below 0.90");
  std::cout << "  (final accuracy " << r.final_accuracy << ")\n";
}

struct Criterion {
  int id;
  const char* name;
  std::function<void()> fn;
};

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: acceptance <scenarios-dir> <hflsim-binary>\n";
    return 2;
  }
  g_scenarios = argv[1];
  g_binary = argv[2];

  const std::vector<Criterion> criteria{
      {1, "flat equivalence within 1e-12 across 10 seeds",
       criterion_flat_equivalence},
      {2, "analytic gradients match finite differences", criterion_gradient_check},
      {3, "mask cancellation and dropout correction within 1e-9",
       criterion_mask_cancellation},
      {4, "single-sample gradient inversion: exact, and degraded by DP",
       criterion_reconstruction},
      {5, "median aggregation withstands gamma=100 boosting",
       criterion_robust_aggregation},
      {6, "poisoned server flagged, excluded, and accuracy recovers",
       criterion_detection_exclusion},
      {7, "verification cost: flat 1048576 vs hierarchical 112",
       criterion_verification_cost},
      {8, "leaf masking removes linkability; flat FL exposes every user",
       criterion_linkability},
      {9, "bundled scenarios reproduce byte-identical outputs",
       criterion_determinism},
      {10, "mid-run churn completes with accuracy >= 0.90", criterion_churn},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    try {
      c.fn();
      std::cout << "PASS criterion " << c.id << ": " << c.name << "\n";
    } catch (const CheckFailure& f) {
      ++failures;
      std::cout << "FAIL criterion " << c.id << ": " << c.name << " — "
                << f.message << "\n";
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "FAIL criterion " << c.id << ": " << c.name
                << " — exception: " << e.what() << "\n";
    }
  }
  std::cout << (failures == 0 ? "ALL CRITERIA PASSED"
                              : std::to_string(failures) + " CRITERIA FAILED")
            << "\n";
  return failures == 0 ? 0 : 1;
}
