// Copyright 2026 The fedpad-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: gen-data, run, sweep, report.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedpad/datagen.hpp"
#include "fedpad/error.hpp"
#include "fedpad/harness.hpp"
#include "fedpad/metrics.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> mode;
};

void add_common(CLI::App* cmd, Common& c, bool with_mode) {
  cmd->add_option("--config", c.config, "experiment config (JSON)");
  cmd->add_option("--seed", c.seed, "override the config seed");
  cmd->add_option("--out", c.out, "output directory");
  if (with_mode) cmd->add_option("--mode", c.mode, "single|fused|all|fedpad|fedgpad");
}

fedpad::ExperimentConfig resolve(const Common& c) {
  fedpad::ExperimentConfig cfg =
      c.config.empty() ? fedpad::config_from_json(nlohmann::json::object()) : fedpad::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.output_dir = *c.out;
  if (c.mode) cfg.mode = fedpad::parse_mode(*c.mode);
  return cfg;
}

void print_row(const fedpad::RunRecord& r) {
  using fedpad::metrics::format_number;
  std::printf("%s user=%u hter=%s eer=%s auc=%s (%.1fs) [%s]\n", fedpad::mode_name(r.mode),
              r.user_domain, format_number(r.report.hter).c_str(), format_number(r.report.eer).c_str(),
              format_number(r.report.auc).c_str(), r.wall_seconds, r.config_hash.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated face anti-spoofing simulator"};
  app.require_subcommand(1);

  Common gen_opts, run_opts, sweep_opts;
  auto* gen = app.add_subcommand("gen-data", "write the synthetic family as dataset directories");
  add_common(gen, gen_opts, false);
  auto* run = app.add_subcommand("run", "train and evaluate one configuration");
  add_common(run, run_opts, true);
  auto* sweep = app.add_subcommand("sweep", "leave-one-domain-out over a domain list");
  add_common(sweep, sweep_opts, true);
  std::vector<std::uint32_t> sweep_domains;
  sweep->add_option("--domains", sweep_domains, "domain ids (default: all)")->delimiter(',');
  auto* report = app.add_subcommand("report", "re-render CSVs from stored run records");
  std::string report_dir = "out";
  std::optional<std::string> report_mode;
  report->add_option("--out", report_dir, "directory holding runs/");
  report->add_option("--mode", report_mode, "only records of this mode");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto cfg = resolve(gen_opts);
      if (!cfg.data.synthetic) throw fedpad::ConfigError("gen-data needs a synthetic data source");
      for (const auto& d : fedpad::load_domains(cfg)) {
        const auto dir = std::filesystem::path(cfg.output_dir) / ("domain_" + std::to_string(d.domain_id()));
        fedpad::save_dataset(d, dir);
        std::printf("wrote %s (%zu samples)\n", dir.string().c_str(), d.size());
      }
    } else if (*run) {
      const auto cfg = resolve(run_opts);
      const auto rec = fedpad::run(cfg);
      fedpad::write_run_outputs(rec, cfg.output_dir);
      print_row(rec);
    } else if (*sweep) {
      const auto cfg = resolve(sweep_opts);
      std::vector<std::uint32_t> domains = sweep_domains;
      if (domains.empty()) {
        for (const auto& d : fedpad::load_domains(cfg)) domains.push_back(d.domain_id());
      }
      const auto res = fedpad::sweep_leave_one_out(cfg, domains);
      for (const auto& r : res.runs) print_row(r);
      std::cout << res.summary;
    } else if (*report) {
      std::optional<fedpad::Mode> only;
      if (report_mode) only = fedpad::parse_mode(*report_mode);
      const std::size_t n = fedpad::render_report(report_dir, only);
      std::printf("rendered %zu run records into %s\n", n, report_dir.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
