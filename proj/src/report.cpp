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

#include "hfl/report.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "hfl/errors.hpp"

namespace hfl {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const char* trace_kind_name(TraceKind k) {
  switch (k) {
    case TraceKind::RoundBegin:
      return "round_begin";
    case TraceKind::RoundEnd:
      return "round_end";
    case TraceKind::UpDelivery:
      return "up";
    case TraceKind::DownDelivery:
      return "down";
    case TraceKind::Verify:
      return "verify";
    case TraceKind::Exposure:
      return "exposure";
  }
  return "unknown";
}

ordered_json metrics_row_json(const MetricsRecord& m) {
  ordered_json j;
  j["round"] = m.round;
  j["node"] = m.node;
  j["test_accuracy"] = m.test_accuracy;
  j["test_loss"] = m.test_loss;
  j["comm_up_bytes"] = m.comm_up_bytes;
  j["comm_down_bytes"] = m.comm_down_bytes;
  j["verify_units"] = m.verify_units;
  j["detections"] = m.detections;
  j["exclusions"] = m.exclusions;
  if (m.recon_err) j["recon_err"] = *m.recon_err;
  j["new_links"] = m.new_links;
  j["participants"] = m.participants;
  return j;
}

}  // namespace

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise(Errc::IoError, "cannot open " + tmp.string());
    out << content;
    if (!out) raise(Errc::IoError, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string metrics_csv(const std::vector<MetricsRecord>& metrics) {
  std::string out =
      "round,node,test_accuracy,test_loss,comm_up_bytes,comm_down_bytes,"
      "verify_units,detections,exclusions,recon_err\n";
  for (const MetricsRecord& m : metrics) {
    out += std::to_string(m.round) + "," + std::to_string(m.node) + "," +
           fmt(m.test_accuracy) + "," + fmt(m.test_loss) + "," +
           fmt(m.comm_up_bytes) + "," + fmt(m.comm_down_bytes) + "," +
           fmt(m.verify_units) + "," + std::to_string(m.detections) + "," +
           std::to_string(m.exclusions) + ",";
    if (m.recon_err) out += fmt(*m.recon_err);
    out += "\n";
  }
  return out;
}

std::string linkability_json(const LinkabilityReport& report) {
  ordered_json j;
  j["total_links"] = report.total_links;
  j["root_links"] = report.root_links;
  ordered_json layers = ordered_json::object();
  for (const auto& [depth, count] : report.per_layer_counts) {
    layers[std::to_string(depth)] = count;
  }
  j["per_layer_counts"] = layers;
  ordered_json links = ordered_json::array();
  for (const auto& [observer, users] : report.links) {
    ordered_json entry;
    entry["observer"] = observer;
    entry["users"] = users;
    links.push_back(entry);
  }
  j["links"] = links;
  return j.dump(2) + "\n";
}

std::string results_json(const ScenarioConfig& cfg, const RunResult& result) {
  ordered_json j;
  j["seed"] = cfg.master_seed;
  j["global_rounds"] = cfg.global_rounds;
  j["arch"] = cfg.model.arch == ArchKind::LogReg ? "logreg" : "mlp1";
  j["nodes"] = result.final_hierarchy.size();

  ordered_json final;
  final["accuracy"] = result.final_accuracy;
  final["loss"] = result.final_loss;
  final["params"] = std::vector<double>(
      result.final_model.values.data(),
      result.final_model.values.data() + result.final_model.values.size());
  j["final"] = final;

  ordered_json rounds = ordered_json::array();
  for (const MetricsRecord& m : result.metrics) rounds.push_back(metrics_row_json(m));
  j["rounds"] = rounds;

  ordered_json notes = ordered_json::array();
  for (const Notification& n : result.notifications) {
    ordered_json nj;
    nj["round"] = n.round;
    nj["detector"] = n.detector;
    nj["subject"] = n.flagged;
    nj["zscore"] = n.zscore;
    nj["note"] = n.note;
    notes.push_back(nj);
  }
  j["notifications"] = notes;

  ordered_json priv = ordered_json::array();
  for (const PrivacyAccountRow& row : result.privacy) {
    ordered_json pj;
    pj["user"] = row.user;
    pj["noise_multiplier"] = row.noise_multiplier;
    pj["rounds"] = row.rounds;
    priv.push_back(pj);
  }
  j["privacy_accounting"] = priv;

  j["linkability"] = ordered_json::parse(linkability_json(result.linkability));

  if (result.probe) {
    const ProbeOutcome& p = *result.probe;
    ordered_json pj;
    pj["user"] = p.user;
    pj["round"] = p.round;
    pj["true_label"] = p.true_label;
    pj["true_features"] = std::vector<double>(
        p.true_features.data(), p.true_features.data() + p.true_features.size());
    pj["reconstructed"] = p.reconstructed;
    if (p.reconstructed) {
      pj["rec_label"] = p.rec_label;
      pj["rec_features"] = std::vector<double>(
          p.rec_features.data(), p.rec_features.data() + p.rec_features.size());
      pj["max_abs_error"] = p.max_abs_error;
    } else {
      pj["failure"] = p.failure;
    }
    j["probe"] = pj;
  }

  j["adversary_observations"] = result.adversary_log.size();
  return j.dump(2) + "\n";
}

std::string observation_record(int round, NodeId observer, NodeId origin,
                               double weight, bool masked, double norm,
                               Eigen::Index params) {
  ordered_json j;
  j["round"] = round;
  j["observer"] = observer;
  j["origin"] = origin;
  j["weight"] = weight;
  j["masked"] = masked;
  j["norm"] = norm;
  j["params"] = params;
  return j.dump();
}

std::string adversary_jsonl(const AdversaryLog& log) {
  std::string out;
  for (const Observation& o : log) {
    ordered_json j = ordered_json::parse(observation_record(
        o.round, o.observer, o.update.origin, o.update.weight, o.update.masked,
        o.update.delta.norm(), o.update.delta.size()));
    j["delta"] = std::vector<double>(
        o.update.delta.data(), o.update.delta.data() + o.update.delta.size());
    out += j.dump() + "\n";
  }
  return out;
}

std::string trace_jsonl(const Trace& trace) {
  std::string out;
  for (const TraceEvent& e : trace.events) {
    ordered_json j;
    j["kind"] = trace_kind_name(e.kind);
    j["round"] = e.round;
    switch (e.kind) {
      case TraceKind::RoundBegin:
      case TraceKind::RoundEnd:
        break;
      case TraceKind::UpDelivery:
      case TraceKind::Exposure:
        j["receiver"] = e.receiver;
        j["receiver_depth"] = e.receiver_depth;
        j["origin"] = e.origin;
        j["origin_is_user"] = e.origin_is_user;
        j["masked"] = e.masked;
        j["weight"] = e.weight;
        j["norm"] = e.norm;
        j["params"] = e.param_count;
        break;
      case TraceKind::DownDelivery:
        j["receiver"] = e.receiver;
        j["origin"] = e.origin;
        j["params"] = e.param_count;
        break;
      case TraceKind::Verify:
        j["node"] = e.receiver;
        j["children"] = e.verified_children;
        break;
    }
    out += j.dump() + "\n";
  }
  return out;
}

namespace {

std::filesystem::path resolve_out_dir(const ScenarioConfig& cfg,
                                      const RunOverrides& ov) {
  if (ov.out_dir) return *ov.out_dir;
  if (const char* env = std::getenv("HFLSIM_OUT")) return env;
  return cfg.output.directory;
}

int report_issues(const std::filesystem::path& path,
                  const std::vector<ValidationIssue>& issues) {
  std::cerr << path.string() << ": " << issues.size()
            << " validation error(s)\n";
  for (const ValidationIssue& i : issues) {
    std::cerr << "  [" << i.where << "] " << i.message << "\n";
  }
  return 2;
}

struct LoadedScenario {
  ScenarioConfig cfg;
  int exit_code = 0;
};

LoadedScenario load_with_overrides(const std::filesystem::path& path,
                                   const RunOverrides& ov) {
  LoadedScenario out;
  try {
    out.cfg = load_scenario(path);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    out.exit_code = 2;
    return out;
  }
  if (ov.seed) {
    out.cfg.master_seed = *ov.seed;
    out.cfg.master_seed_present = true;
  }
  if (ov.rounds) out.cfg.global_rounds = *ov.rounds;
  const auto issues = validate_scenario(out.cfg);
  if (!issues.empty()) out.exit_code = report_issues(path, issues);
  return out;
}

bool has_observer(const ScenarioConfig& cfg) {
  for (const AdversarySpec& a : cfg.adversaries) {
    if (std::holds_alternative<PassiveObserver>(a.kind)) return true;
  }
  return false;
}

void write_run_outputs(const ScenarioConfig& cfg, const EngineSetup& setup,
                       const RunResult& result,
                       const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text_atomic(dir / "metrics.csv", metrics_csv(result.metrics));
  write_text_atomic(dir / "results.json", results_json(cfg, result));
  write_text_atomic(dir / "linkability.json",
                    linkability_json(result.linkability));
  if (has_observer(cfg)) {
    write_text_atomic(dir / "adversary.jsonl",
                      adversary_jsonl(result.adversary_log));
  }
  if (cfg.output.trace_jsonl) {
    write_text_atomic(dir / "trace.jsonl", trace_jsonl(result.trace));
  }
  if (cfg.data.export_csv) {
    save_dataset_csv(setup.train, dir / "train.csv");
    save_dataset_csv(setup.test, dir / "test.csv");
  }
  if (cfg.output.dump_params_csv) {
    save_params_csv(result.final_model, dir / "final_params.csv");
  }
}

double round1_verify_units(const RunResult& r) {
  for (const MetricsRecord& m : r.metrics) {
    if (m.round == 1) return m.verify_units;
  }
  return 0.0;
}

}  // namespace

int cmd_run(const std::filesystem::path& config_path, const RunOverrides& ov) {
  LoadedScenario loaded = load_with_overrides(config_path, ov);
  if (loaded.exit_code != 0) return loaded.exit_code;
  try {
    const EngineSetup setup = prepare_setup(loaded.cfg);
    const RunResult result = run_prepared(setup);
    const std::filesystem::path dir = resolve_out_dir(loaded.cfg, ov);
    write_run_outputs(loaded.cfg, setup, result, dir);
    std::cout << "rounds=" << loaded.cfg.global_rounds
              << " final_accuracy=" << fmt(result.final_accuracy)
              << " final_loss=" << fmt(result.final_loss) << " out=" << dir.string()
              << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_validate(const std::filesystem::path& config_path) {
  ScenarioConfig cfg;
  try {
    cfg = load_scenario(config_path);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  const auto issues = validate_scenario(cfg);
  if (!issues.empty()) return report_issues(config_path, issues);
  std::cout << config_path.string() << ": OK\n";
  return 0;
}

int cmd_compare_flat(const std::filesystem::path& config_path,
                     const RunOverrides& ov) {
  LoadedScenario loaded = load_with_overrides(config_path, ov);
  if (loaded.exit_code != 0) return loaded.exit_code;
  try {
    const EngineSetup hier_setup = prepare_setup(loaded.cfg);
    const RunResult hier = run_prepared(hier_setup);
    const EngineSetup flat_setup = flatten_setup(hier_setup);
    const RunResult flat = run_prepared(flat_setup);

    const double max_diff =
        (hier.final_model.values - flat.final_model.values)
            .cwiseAbs()
            .maxCoeff();

    ordered_json j;
    auto side = [&](const RunResult& r) {
      ordered_json s;
      s["final_accuracy"] = r.final_accuracy;
      s["final_loss"] = r.final_loss;
      s["verify_units_per_round"] = round1_verify_units(r);
      s["comm_up_bytes_round1"] =
          r.metrics.empty() ? 0.0 : r.metrics.front().comm_up_bytes;
      s["comm_down_bytes_round1"] =
          r.metrics.empty() ? 0.0 : r.metrics.front().comm_down_bytes;
      s["root_user_links"] = r.linkability.root_links;
      s["total_links"] = r.linkability.total_links;
      return s;
    };
    j["hierarchical"] = side(hier);
    j["flat"] = side(flat);
    j["max_coordinate_diff"] = max_diff;

    const std::filesystem::path dir = resolve_out_dir(loaded.cfg, ov);
    std::filesystem::create_directories(dir);
    write_text_atomic(dir / "compare.json", j.dump(2) + "\n");

    auto line = [&](const std::string& name, const std::string& h,
                    const std::string& f) {
      std::printf("%-26s %-22s %s\n", name.c_str(), h.c_str(), f.c_str());
    };
    line("metric", "hierarchical", "flat");
    line("final_accuracy", fmt(hier.final_accuracy), fmt(flat.final_accuracy));
    line("final_loss", fmt(hier.final_loss), fmt(flat.final_loss));
    line("verify_units_per_round", fmt(round1_verify_units(hier)),
         fmt(round1_verify_units(flat)));
    line("root_user_links", std::to_string(hier.linkability.root_links),
         std::to_string(flat.linkability.root_links));
    line("total_links", std::to_string(hier.linkability.total_links),
         std::to_string(flat.linkability.total_links));
    line("max_coordinate_diff", fmt(max_diff), "");
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace hfl
