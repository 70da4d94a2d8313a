// szgan: synth | preprocess | train | evaluate | report | run

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "szgan/pipeline.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::string> scenario;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<int> repeats;
  bool force = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config (JSON)")->required();
  cmd->add_option("--scenario", c.scenario, "cnn_supervised | gan_cnn | gan_ps_cnn | gan_ps_ospl_cnn");
  cmd->add_option("--jobs", c.jobs, "parallel jobs")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "base seed");
  cmd->add_option("--repeats", c.repeats, "cross-validation repeats")->check(CLI::PositiveNumber);
  cmd->add_flag("--force", c.force, "ignore up-to-date stamps");
  cmd->add_flag("-q,--quiet", c.quiet, "no progress lines on stderr");
}

szgan::ExperimentConfig resolve(const Common& c) {
  auto cfg = szgan::load_experiment_config(c.config);
  if (c.scenario) cfg.scenario = szgan::scenario_from_string(*c.scenario);
  if (c.jobs) cfg.jobs = *c.jobs;
  if (c.seed) cfg.seed = *c.seed;
  if (c.repeats) cfg.repeats = *c.repeats;
  cfg.validate();
  szgan::set_verbose(!c.quiet);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised seizure prediction from EEG spectrograms"};
  app.require_subcommand(1);
  Common common;

  auto* synth = app.add_subcommand("synth", "write synthetic recordings and annotations for the configured patients");
  add_common(synth, common);
  szgan::SynthOptions synth_opts;
  synth->add_option("--duration-h", synth_opts.duration_h, "length of the recording with seizures, hours");
  synth->add_option("--seizures", synth_opts.seizures, "number of seizures");
  synth->add_option("--patient", synth_opts.patient, "only this patient");

  auto* preprocess = app.add_subcommand("preprocess", "cache labeled spectrogram windows");
  add_common(preprocess, common);
  auto* train = app.add_subcommand("train", "train trunks and classifier heads for one scenario");
  add_common(train, common);
  auto* evaluate = app.add_subcommand("evaluate", "score validation folds and write reports");
  add_common(evaluate, common);
  auto* report = app.add_subcommand("report", "print the AUC table of every evaluated scenario");
  add_common(report, common);
  auto* run = app.add_subcommand("run", "preprocess, train, evaluate and report in one go");
  add_common(run, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto cfg = resolve(common);
    if (*synth) {
      for (const auto& o : szgan::cmd_synth(cfg, synth_opts)) {
        std::cout << o.patient_id << ": " << (o.eligibility.eligible ? "eligible" : "not eligible");
        for (const auto& r : o.eligibility.reasons) std::cout << " [" << r << "]";
        std::cout << '\n';
        for (const auto& f : o.files) std::cout << "  " << f.string() << '\n';
      }
    } else if (*preprocess) {
      for (const auto& o : szgan::cmd_preprocess(cfg, common.force)) {
        std::cout << o.patient_id << ": " << o.windows << " windows of shape " << szgan::shape_string(o.shape)
                  << (o.reused ? " (cached)" : "") << (o.eligible ? "" : " (not eligible)") << '\n';
      }
    } else if (*train) {
      const auto o = szgan::cmd_train(cfg, common.force);
      std::cout << (o.reused ? "checkpoints up to date" : "trained " + std::to_string(o.trunks.size()) + " trunk(s), " +
                                                              std::to_string(o.heads.size()) + " head(s)")
                << '\n';
    } else if (*evaluate) {
      for (const auto& r : szgan::cmd_evaluate(cfg, common.force)) {
        std::cout << r.patient_id << ": AUC " << r.auc_mean << " sd " << r.auc_sd << '\n';
      }
    } else if (*report) {
      std::cout << szgan::cmd_report(cfg);
    } else if (*run) {
      szgan::cmd_preprocess(cfg, common.force);
      szgan::cmd_train(cfg, common.force);
      szgan::cmd_evaluate(cfg, common.force);
      std::cout << szgan::cmd_report(cfg);
    }
    return 0;
  } catch (const szgan::Error& e) {
    std::cerr << "szgan: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "szgan: " << e.what() << '\n';
    return 1;
  }
}
