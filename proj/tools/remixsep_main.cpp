// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Command-line front end: data generation, pretraining, unsupervised
// refinement, semi-supervised adaptation, evaluation and plotting.

#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "remixsep/metrics.hpp"
#include "remixsep/plot.hpp"
#include "remixsep/trainer.hpp"

namespace fs = std::filesystem;
using namespace remixsep;

namespace {

struct CommonTrainArgs {
  std::string data_dir;
  std::string valid_dir;
  std::string out_dir;
  std::string config_file;
  std::uint64_t seed = 0;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<int> grad_accum;
  std::optional<double> lr;
  std::optional<int> warmup;
  std::optional<std::int64_t> max_steps;
  std::optional<double> alpha;
  std::optional<double> l_thres;
  std::optional<int> n_teacher, n_student, n_remix;
  std::optional<int> hidden;
  std::optional<bool> mc_shuffler, mc_solver;
  bool mc_inference = false;
};

void add_common_train_options(CLI::App* cmd, CommonTrainArgs& a, bool needs_valid) {
  cmd->add_option("--data", a.data_dir, "training dataset directory")->required();
  if (needs_valid)
    cmd->add_option("--valid", a.valid_dir, "validation dataset directory")->required();
  cmd->add_option("--out", a.out_dir, "output directory for checkpoints and logs")->required();
  cmd->add_option("--config", a.config_file, "JSON config file (flags override it)");
  cmd->add_option("--seed", a.seed, "random seed")->required();
  cmd->add_option("--epochs", a.epochs, "number of epochs");
  cmd->add_option("--batch-size", a.batch_size, "mixtures per step");
  cmd->add_option("--grad-accum", a.grad_accum, "gradient accumulation steps");
  cmd->add_option("--lr", a.lr, "peak learning rate");
  cmd->add_option("--warmup", a.warmup, "linear warmup steps");
  cmd->add_option("--max-steps", a.max_steps, "stop after this many training steps");
  cmd->add_option("--alpha", a.alpha, "EMA coefficient for the shuffler update");
  cmd->add_option("--l-thres", a.l_thres, "loss-zeroing threshold in dB");
  cmd->add_option("--n-teacher", a.n_teacher, "shuffler output channels");
  cmd->add_option("--n-student", a.n_student, "solver output channels");
  cmd->add_option("--n-remix", a.n_remix, "sources used in remixing");
  cmd->add_option("--hidden", a.hidden, "mask net hidden width");
  cmd->add_option("--mc-shuffler", a.mc_shuffler, "mixture consistency on shuffler sources");
  cmd->add_option("--mc-solver", a.mc_solver, "mixture consistency on solver sources");
  cmd->add_flag("--mc-inference", a.mc_inference, "mixture consistency at evaluation time");
}

TrainConfig build_config(const CommonTrainArgs& a, Method method) {
  TrainConfig cfg;
  if (!a.config_file.empty()) cfg = load_train_config(a.config_file);
  cfg.method = method;
  cfg.seed = a.seed;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.grad_accum) cfg.grad_accum_steps = *a.grad_accum;
  if (a.lr) cfg.peak_lr = *a.lr;
  if (a.warmup) cfg.warmup_steps = *a.warmup;
  if (a.max_steps) cfg.max_steps = *a.max_steps;
  if (a.alpha) cfg.alpha = *a.alpha;
  if (a.l_thres) cfg.l_thres = *a.l_thres;
  if (a.n_teacher) cfg.n_teacher = *a.n_teacher;
  if (a.n_student) cfg.n_student = *a.n_student;
  if (a.n_remix) cfg.n_remix = *a.n_remix;
  if (a.hidden) cfg.hidden = *a.hidden;
  if (a.mc_shuffler) cfg.mc.shuffler = *a.mc_shuffler;
  if (a.mc_solver) cfg.mc.solver = *a.mc_solver;
  cfg.mc.inference = cfg.mc.inference || a.mc_inference;
  return cfg;
}

void print_report(const TrainReport& r) {
  std::cout << "initial valid SI-SDR: " << r.initial_valid_sisdr << " dB\n"
            << "best epoch valid SI-SDR: " << r.best_epoch_valid_sisdr << " dB\n"
            << "averaged checkpoint SI-SDR: " << r.final_valid_sisdr << " dB\n"
            << "steps: " << r.total_steps << "\n"
            << "averaged checkpoint: " << r.averaged_ckpt_path << "\n"
            << "metrics log: " << r.metrics_path << "\n";
}

int run_generate(const std::string& out_dir, int train_n, int valid_n, int test_n,
                 std::uint64_t seed, double duration, int rate, int speakers) {
  const struct {
    const char* name;
    int count;
    std::uint64_t offset;
  } splits[] = {{"train", train_n, 0}, {"valid", valid_n, 1000000}, {"test", test_n, 2000000}};
  for (const auto& s : splits) {
    if (s.count <= 0) continue;
    DatasetSpec spec;
    spec.count = s.count;
    spec.base_seed = seed + s.offset;  // disjoint seed ranges across splits
    spec.duration_s = duration;
    spec.sample_rate_hz = rate;
    spec.n_speech = speakers;
    spec.id_prefix = s.name;
    Dataset ds = build_dataset(spec);
    save_dataset(ds, fs::path(out_dir) / s.name);
    std::cout << "wrote " << s.count << " mixtures to " << (fs::path(out_dir) / s.name).string()
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"remixing-based self-supervised speech separation trainer"};
  app.require_subcommand(1);

  // generate-data
  auto* gen = app.add_subcommand("generate-data", "synthesize a train/valid/test dataset");
  std::string gen_out;
  int gen_train = 500, gen_valid = 50, gen_test = 50, gen_rate = 8000, gen_speakers = 2;
  double gen_duration = 2.0;
  std::uint64_t gen_seed = 1234;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--train", gen_train, "training mixtures");
  gen->add_option("--valid", gen_valid, "validation mixtures");
  gen->add_option("--test", gen_test, "test mixtures");
  gen->add_option("--seed", gen_seed, "base seed");
  gen->add_option("--duration", gen_duration, "mixture length in seconds");
  gen->add_option("--rate", gen_rate, "sample rate in Hz");
  gen->add_option("--speakers", gen_speakers, "speech sources per mixture (0 = mixed 1/2)");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "supervised PIT or unsupervised MixIT pretraining");
  CommonTrainArgs pre_args;
  std::string pre_method = "mixit";
  pre->add_option("--method", pre_method, "pit | mixit")->required();
  add_common_train_options(pre, pre_args, true);

  // refine
  auto* ref = app.add_subcommand("refine", "unsupervised refinement of a pretrained model");
  CommonTrainArgs ref_args;
  std::string ref_method = "self-remixing-batch";
  std::string ref_init;
  std::string ref_protocol = "ema";
  ref->add_option("--method", ref_method,
                  "remixit | rccl | self-remixing-pair | self-remixing-batch")
      ->required();
  ref->add_option("--init", ref_init, "pretrained checkpoint")->required();
  ref->add_option("--protocol", ref_protocol, "shuffler update protocol: ema | frozen");
  add_common_train_options(ref, ref_args, true);

  // adapt
  auto* ada = app.add_subcommand("adapt", "semi-supervised domain adaptation");
  CommonTrainArgs ada_args;
  std::string ada_method = "self-remixing-batch";
  std::string ada_init;
  std::string ada_sup;
  ada->add_option("--method", ada_method,
                  "remixit | rccl | self-remixing-pair | self-remixing-batch | "
                  "remixit+self-remixing")
      ->required();
  ada->add_option("--init", ada_init, "PIT-pretrained checkpoint")->required();
  ada->add_option("--sup-data", ada_sup, "labeled out-of-domain dataset directory")->required();
  add_common_train_options(ada, ada_args, true);

  // evaluate
  auto* eva = app.add_subcommand("evaluate", "best-permutation SI-SDR of a checkpoint");
  std::string eva_ckpt, eva_data, eva_json;
  bool eva_mc = false;
  eva->add_option("--ckpt", eva_ckpt, "checkpoint to evaluate")->required();
  eva->add_option("--data", eva_data, "dataset directory")->required();
  eva->add_option("--json", eva_json, "write per-item results to this file");
  eva->add_flag("--mc", eva_mc, "enforce mixture consistency at inference");

  // plot
  auto* plo = app.add_subcommand("plot", "render training curves from a metrics log");
  std::string plo_log, plo_out;
  plo->add_option("--log", plo_log, "metrics.jsonl produced by training")->required();
  plo->add_option("--out", plo_out, "output directory for SVG charts")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return run_generate(gen_out, gen_train, gen_valid, gen_test, gen_seed, gen_duration,
                          gen_rate, gen_speakers);

    if (pre->parsed()) {
      const Method method = method_from_string(pre_method);
      RS_REQUIRE(method == Method::pit || method == Method::mixit,
                 "pretrain supports pit or mixit");
      TrainConfig cfg = build_config(pre_args, method);
      if (method == Method::pit && !pre_args.n_student) cfg.n_student = 3;
      Dataset train = load_dataset(pre_args.data_dir);
      Dataset valid = load_dataset(pre_args.valid_dir);
      TrainInputs inputs{&train, &valid, nullptr};
      TrainReport report = run_training(cfg, inputs, pre_args.out_dir);
      print_report(report);
      return 0;
    }

    if (ref->parsed()) {
      const Method method = method_from_string(ref_method);
      TrainConfig cfg = build_config(ref_args, method);
      cfg.protocol =
          ref_protocol == "frozen" ? UpdateProtocol::frozen : UpdateProtocol::ema_epoch_end;
      Checkpoint init = load_checkpoint(ref_init);
      // Architecture follows the checkpoint unless explicitly overridden.
      cfg.n_teacher = init.model.config().n_outputs;
      cfg.stft = init.model.config().stft;
      cfg.hidden = init.model.config().hidden;
      cfg.context = init.model.config().context;
      cfg.sample_rate_hz = init.model.config().sample_rate_hz;
      if (cfg.protocol == UpdateProtocol::ema_epoch_end || method == Method::rccl)
        cfg.n_student = cfg.n_teacher;
      else if (ref_args.n_student)
        cfg.n_student = *ref_args.n_student;
      if (method == Method::rccl || method == Method::self_remixing_pair) {
        cfg.n_remix = method == Method::rccl ? cfg.n_student : cfg.n_teacher;
        if (!cfg.l_thres) cfg.l_thres = -15.0;  // pair remixing default threshold
      } else if (!ref_args.mc_solver && cfg.method == Method::self_remixing_batch) {
        cfg.mc.solver = true;  // make up for discarded sources
      }
      Dataset train = load_dataset(ref_args.data_dir);
      Dataset valid = load_dataset(ref_args.valid_dir);
      TrainInputs inputs{&train, &valid, nullptr};
      TrainReport report = run_training(cfg, inputs, ref_args.out_dir, init.model);
      print_report(report);
      return 0;
    }

    if (ada->parsed()) {
      const Method method = method_from_string(ada_method);
      TrainConfig cfg = build_config(ada_args, method);
      cfg.semi_supervised = true;
      if (!ada_args.alpha) cfg.alpha = 0.9;
      if (!ada_args.epochs) cfg.epochs = 20;
      cfg.lr_decay = LrDecay{0.97, 1};
      Checkpoint init = load_checkpoint(ada_init);
      cfg.n_teacher = cfg.n_student = init.model.config().n_outputs;
      cfg.stft = init.model.config().stft;
      cfg.hidden = init.model.config().hidden;
      cfg.context = init.model.config().context;
      cfg.sample_rate_hz = init.model.config().sample_rate_hz;
      if (method == Method::rccl || method == Method::self_remixing_pair) {
        cfg.n_remix = cfg.n_student;
        if (!cfg.l_thres) cfg.l_thres = -15.0;
      } else {
        cfg.n_remix = std::min(cfg.n_remix, cfg.n_student);
      }
      Dataset sup = load_dataset(ada_sup);
      Dataset train = load_dataset(ada_args.data_dir);
      Dataset valid = load_dataset(ada_args.valid_dir);
      TrainInputs inputs{&train, &valid, &sup};
      TrainReport report = run_training(cfg, inputs, ada_args.out_dir, init.model);
      print_report(report);
      return 0;
    }

    if (eva->parsed()) {
      Checkpoint ckpt = load_checkpoint(eva_ckpt);
      Dataset ds = load_dataset(eva_data);
      const double mean_sisdr = validation_sisdr(ckpt.model, ds, eva_mc);
      const double collapse = collapse_metric(ckpt.model, ds);
      std::cout << "mixtures: " << ds.size() << "\n"
                << "mean best-permutation SI-SDR: " << mean_sisdr << " dB\n"
                << "collapse metric: " << collapse << "\n";
      if (!eva_json.empty()) {
        nlohmann::ordered_json j;
        j["checkpoint"] = eva_ckpt;
        j["mixtures"] = ds.size();
        j["mean_sisdr_db"] = mean_sisdr;
        j["collapse_metric"] = collapse;
        j["mc_inference"] = eva_mc;
        std::ofstream os(eva_json);
        os << j.dump(2) << "\n";
      }
      return 0;
    }

    if (plo->parsed()) {
      plot_metrics(plo_log, plo_out);
      std::cout << "wrote loss.svg, sisdr.svg, collapse.svg to " << plo_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
