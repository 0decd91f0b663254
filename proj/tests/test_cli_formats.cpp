// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>

#include "remixsep/plot.hpp"
#include "remixsep/trainer.hpp"

using namespace remixsep;

TEST_CASE("method names round-trip, with underscore aliases") {
  for (Method m : {Method::pit, Method::mixit, Method::remixit, Method::rccl,
                   Method::self_remixing_pair, Method::self_remixing_batch,
                   Method::remixit_plus_self_remixing})
    CHECK(method_from_string(to_string(m)) == m);
  CHECK(method_from_string("self_remixing_batch") == Method::self_remixing_batch);
  CHECK_THROWS_AS(method_from_string("nonsense"), std::invalid_argument);
}

TEST_CASE("train config serializes to JSON and back") {
  TrainConfig cfg;
  cfg.method = Method::self_remixing_pair;
  cfg.batch_size = 6;
  cfg.grad_accum_steps = 8;
  cfg.peak_lr = 2e-5;
  cfg.warmup_steps = 40000;
  cfg.lr_decay = LrDecay{0.98, 2};
  cfg.epochs = 250;
  cfg.alpha = 0.8;
  cfg.l_thres = -15.0;
  cfg.n_teacher = cfg.n_student = cfg.n_remix = 6;
  cfg.mc.shuffler = true;
  cfg.mc.solver = false;
  cfg.mc.inference = true;
  cfg.seed = 99;
  cfg.protocol = UpdateProtocol::frozen;
  cfg.pair_placement = PairPlacement::tops_stay_home;
  cfg.remix_algo = RemixAlgo::pair;
  cfg.hidden = 32;
  cfg.max_steps = 1234;

  const std::string text = train_config_to_json_text(cfg);
  TrainConfig back = train_config_from_json_text(text);
  CHECK(back.method == cfg.method);
  CHECK(back.batch_size == cfg.batch_size);
  CHECK(back.grad_accum_steps == cfg.grad_accum_steps);
  CHECK(back.peak_lr == cfg.peak_lr);
  CHECK(back.warmup_steps == cfg.warmup_steps);
  CHECK(back.lr_decay.factor == cfg.lr_decay.factor);
  CHECK(back.lr_decay.every_n_epochs == cfg.lr_decay.every_n_epochs);
  CHECK(back.epochs == cfg.epochs);
  CHECK(back.alpha == cfg.alpha);
  REQUIRE(back.l_thres.has_value());
  CHECK(*back.l_thres == -15.0);
  CHECK(back.n_teacher == 6);
  CHECK(back.mc.inference == true);
  CHECK(back.mc.solver == false);
  CHECK(back.seed == 99);
  CHECK(back.protocol == UpdateProtocol::frozen);
  CHECK(back.pair_placement == PairPlacement::tops_stay_home);
  REQUIRE(back.remix_algo.has_value());
  CHECK(*back.remix_algo == RemixAlgo::pair);
  CHECK(back.hidden == 32);
  REQUIRE(back.max_steps.has_value());
  CHECK(*back.max_steps == 1234);
}

TEST_CASE("partial configs keep defaults for unspecified keys") {
  TrainConfig cfg = train_config_from_json_text(R"({"method":"mixit","peak_lr":0.002})");
  CHECK(cfg.method == Method::mixit);
  CHECK(cfg.peak_lr == 0.002);
  CHECK(cfg.batch_size == 8);       // default
  CHECK(cfg.tau == 1e-3);           // default
  CHECK(!cfg.l_thres.has_value());  // default: thresholding off
}

TEST_CASE("plot renders SVG charts from a metrics log") {
  const auto dir = std::filesystem::temp_directory_path() / "remixsep_plot_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream log(dir / "metrics.jsonl");
    log << R"({"epoch":0,"step":10,"train_loss_db":-5.0,"valid_sisdr_db":1.2,"lr":0.001,"collapse_metric":0.5,"wall_time_s":3.0})"
        << "\n"
        << R"({"epoch":1,"step":20,"train_loss_db":-8.5,"valid_sisdr_db":2.4,"lr":0.001,"collapse_metric":0.48,"wall_time_s":6.1})"
        << "\n";
  }
  plot_metrics(dir / "metrics.jsonl", dir);
  for (const char* name : {"loss.svg", "sisdr.svg", "collapse.svg"}) {
    const auto path = dir / name;
    REQUIRE(std::filesystem::exists(path));
    std::ifstream is(path);
    std::string content((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    CHECK(content.find("<svg") != std::string::npos);
    CHECK(content.find("<polyline") != std::string::npos);
    CHECK(content.find("</svg>") != std::string::npos);
  }
  CHECK_THROWS(plot_metrics(dir / "missing.jsonl", dir));
  std::filesystem::remove_all(dir);
}

TEST_CASE("a real training metrics log feeds the plotter") {
  DatasetSpec spec;
  spec.count = 4;
  spec.base_seed = 70;
  spec.duration_s = 0.2;
  Dataset ds = build_dataset(spec);
  TrainConfig cfg;
  cfg.method = Method::mixit;
  cfg.stft = StftConfig{64, 48, 16};
  cfg.hidden = 8;
  cfg.context = 1;
  cfg.batch_size = 4;
  cfg.n_student = 6;
  cfg.epochs = 2;
  cfg.seed = 3;
  const auto dir = std::filesystem::temp_directory_path() / "remixsep_cli_run";
  std::filesystem::remove_all(dir);
  TrainInputs inputs{&ds, &ds, nullptr};
  TrainReport rep = run_training(cfg, inputs, dir);
  plot_metrics(rep.metrics_path, dir / "curves");
  CHECK(std::filesystem::exists(dir / "curves" / "sisdr.svg"));
  std::filesystem::remove_all(dir);
}
