// Campaign runner: Monte Carlo ground truth, adaptive diffusion training,
// the cross-entropy baseline, metric evaluation, and PCA exports, all driven
// by a JSON config and a master seed. Exit codes: 0 success, 2 config error,
// 3 runtime failure.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "difs/campaign.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_override;
  uint64_t seed_override = 0;
  bool has_seed_override = false;
  int threads = 1;
};

difs::CampaignConfig load_config(const CliOptions& opt) {
  difs::CampaignConfig cfg = difs::CampaignConfig::load(opt.config_path);
  if (opt.has_seed_override) cfg.seed = opt.seed_override;
  if (!opt.out_override.empty()) cfg.out_dir = opt.out_override;
  return cfg;
}

void print_report(const difs::MetricsReport& report) {
  std::printf("environment=%s method=%s R_fail=%.4f", report.environment.c_str(),
              report.method.c_str(), report.failure_rate);
  if (report.density) std::printf(" D=%.4f", *report.density);
  if (report.coverage) std::printf(" C=%.4f", *report.coverage);
  std::printf(" n_failing=%d/%d\n", report.n_failing, report.n_eval);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diffusion-based failure sampling campaigns"};
  app.require_subcommand(1);

  CliOptions opt;
  app.add_option("--threads", opt.threads, "worker threads (results are identical for any value)")
      ->check(CLI::PositiveNumber);

  auto add_common = [&](CLI::App* sub, bool config_required = true) {
    sub->fallthrough();  // lets --threads appear after the subcommand
    auto* c = sub->add_option("--config", opt.config_path, "campaign config JSON");
    if (config_required) c->required();
    sub->add_option("--out", opt.out_override, "output directory (overrides config)");
    sub->add_option("--seed", opt.seed_override, "master seed (overrides config)")
        ->each([&](const std::string&) { opt.has_seed_override = true; });
  };

  auto* mc = app.add_subcommand("mc", "harvest Monte Carlo ground-truth failure samples");
  add_common(mc);
  auto* difs_cmd = app.add_subcommand("difs", "run the adaptive diffusion campaign");
  add_common(difs_cmd);
  auto* cem_cmd = app.add_subcommand("cem2", "run the cross-entropy baseline campaign");
  add_common(cem_cmd);
  auto* eval_cmd =
      app.add_subcommand("eval", "evaluate a trained run directory against ground truth");
  add_common(eval_cmd);
  auto* analyze_cmd =
      app.add_subcommand("analyze", "export PCA projections for a run directory");
  add_common(analyze_cmd);
  auto* repro = app.add_subcommand("repro-toy", "full toy pipeline with built-in defaults");
  add_common(repro);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are config errors
  }

  try {
    const difs::CampaignConfig cfg = load_config(opt);
    if (mc->parsed()) {
      difs::run_mc(cfg, opt.threads);
      std::printf("ground truth written to %s\n", cfg.out_dir.c_str());
    } else if (difs_cmd->parsed()) {
      print_report(difs::run_difs_campaign(cfg, opt.threads));
    } else if (cem_cmd->parsed()) {
      print_report(difs::run_cem_campaign(cfg, opt.threads));
    } else if (eval_cmd->parsed()) {
      print_report(difs::run_eval(cfg, cfg.out_dir, opt.threads));
    } else if (analyze_cmd->parsed()) {
      difs::run_analyze(cfg, cfg.out_dir);
      std::printf("pca exports written to %s/pca\n", cfg.out_dir.c_str());
    } else if (repro->parsed()) {
      print_report(difs::run_repro_toy(cfg, opt.threads));
    }
  } catch (const difs::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
