// Copyright 2026 The mvrisk Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvrisk/mvrisk.h"

namespace {

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::string variant;
  long long seed = -1;
  long long threads = -1;
  std::vector<std::string> checkpoints;
};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out;
}

int report(mvr_status status, const std::string& message) {
  std::fprintf(stderr, "error code=%s message=\"%s\"\n", mvr_status_name(status), escape(message).c_str());
  return static_cast<int>(status);
}

int check(mvr_status status) { return status == MVR_OK ? 0 : report(status, mvr_last_error()); }

void print_summary(char* summary) {
  if (!summary) return;
  std::printf("%s\n", summary);
  mvr_free_string(summary);
}

void on_epoch(size_t epoch, double rmse, double val_auc, void*) {
  if (std::isnan(val_auc)) {
    std::fprintf(stderr, "epoch %zu train_rmse=%.6f\n", epoch, rmse);
  } else {
    std::fprintf(stderr, "epoch %zu train_rmse=%.6f val_auc=%.6f\n", epoch, rmse, val_auc);
  }
}

void on_check(const char* name, double err, int passed, void*) {
  std::printf("%s %s max_rel_error=%.3e\n", passed ? "PASS" : "FAIL", name, err);
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  sub->add_option("--set", o.sets, "Override a config key (dotted.key=value); repeatable");
  sub->add_option("--out", o.out, "Output directory");
  sub->add_option("--seed", o.seed, "Seed for every stochastic component")->check(CLI::NonNegativeNumber);
  sub->add_option("--threads", o.threads, "Worker thread cap")->check(CLI::PositiveNumber);
}

int run(const std::string& command, const Options& o) {
  mvr_config* cfg = nullptr;
  if (int rc = check(mvr_config_create(&cfg))) return rc;
  struct Guard {
    mvr_config* c;
    ~Guard() { mvr_config_destroy(c); }
  } guard{cfg};
  if (!o.config.empty()) {
    if (int rc = check(mvr_config_load_file(cfg, o.config.c_str()))) return rc;
  }
  for (const std::string& s : o.sets) {
    if (int rc = check(mvr_config_set(cfg, s.c_str()))) return rc;
  }
  std::vector<std::string> flags;
  if (!o.out.empty()) flags.push_back("out=\"" + escape(o.out) + "\"");
  if (o.seed >= 0) flags.push_back("seed=" + std::to_string(o.seed));
  if (o.threads > 0) flags.push_back("threads=" + std::to_string(o.threads));
  if (!o.variant.empty()) flags.push_back("model.variant=\"" + o.variant + "\"");
  for (const std::string& f : flags) {
    if (int rc = check(mvr_config_set(cfg, f.c_str()))) return rc;
  }

  char* summary = nullptr;
  mvr_status status = MVR_OK;
  if (command == "synth") {
    status = mvr_synth(cfg, &summary);
  } else if (command == "ingest") {
    status = mvr_ingest(cfg, &summary);
  } else if (command == "train") {
    status = mvr_train_with_progress(cfg, on_epoch, nullptr, &summary);
  } else if (command == "evaluate" || command == "explain") {
    if (o.checkpoints.size() != 1) return report(MVR_ERR_USAGE, command + " needs exactly one --checkpoint");
    const char* ckpt = o.checkpoints[0].c_str();
    status = command == "evaluate" ? mvr_evaluate(cfg, ckpt, &summary) : mvr_explain(cfg, ckpt, &summary);
  } else if (command == "compare") {
    if (o.checkpoints.size() != 2) return report(MVR_ERR_USAGE, "compare needs two --checkpoint values");
    status = mvr_compare(cfg, o.checkpoints[0].c_str(), o.checkpoints[1].c_str(), &summary);
  } else if (command == "gradcheck") {
    status = mvr_gradcheck(cfg, on_check, nullptr);
  }
  if (status != MVR_OK) return check(status);
  print_summary(summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ventilation risk pipeline: synthetic cohorts, training, evaluation and explanation"};
  app.require_subcommand(1);
  Options o;
  struct Spec {
    const char* name;
    const char* help;
    bool variant;
    bool checkpoint;
  };
  const Spec specs[] = {
      {"synth", "Generate a synthetic cohort", false, false},
      {"ingest", "Validate a cohort and report exclusions", false, false},
      {"train", "Train one model variant", true, false},
      {"evaluate", "Score the test partition and write report.json", false, true},
      {"compare", "DeLong comparison of two checkpoints", false, true},
      {"explain", "Relevance heatmap for ventilated test patients", false, true},
      {"gradcheck", "Finite-difference checks of every primitive and variant", false, false},
  };
  std::string command;
  for (const Spec& s : specs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    add_common(sub, o);
    if (s.variant) {
      sub->add_option("--variant", o.variant, "ffnn|ffnn_sa|ffnn_ca|ffnn_mha")
          ->check(CLI::IsMember({"ffnn", "ffnn_sa", "ffnn_ca", "ffnn_mha"}));
    }
    if (s.checkpoint) sub->add_option("--checkpoint", o.checkpoints, "Checkpoint file")->required();
    sub->callback([&command, name = std::string(s.name)] { command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report(MVR_ERR_USAGE, e.what());
  }
  return run(command, o);
}
