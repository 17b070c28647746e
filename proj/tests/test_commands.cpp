#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "doctest.h"
#include "reponet/commands.hpp"

using namespace reponet;
namespace fs = std::filesystem;

namespace {

struct Workdir {
  fs::path path;
  explicit Workdir(const std::string& name) {
    path = fs::temp_directory_path() / ("reponet_cmd_" + name);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Workdir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json blob_config(const std::string& kind, int classes) {
  return Json{{"seed", 11},
              {"epochs", 30},
              {"batch_size", 16},
              {"lr", 0.005},
              {"hidden_widths", {32}},
              {"classifier", {{"kind", kind}, {"classes", classes}}},
              {"loss", {{"type", "margin"}, {"margin", "max"}}},
              {"dataset", {{"type", "blobs"}, {"dim", 8}, {"per_class", 100}}},
              {"output_dir", "run"}};
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kIo;
}

#ifdef REPONET_CLI_PATH
int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + REPONET_CLI_PATH + "\" " + args + " > \"" +
                          log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
#endif

}  // namespace

TEST_CASE("parse_run_config") {
  SUBCASE("margin max resolves to phi and is echoed") {
    Json j = blob_config("orthoplex", 10);
    const RunConfig c = parse_run_config(j);
    CHECK(c.loss.margin == std::numbers::pi / 2);
    CHECK(c.margin_was_max);
    const Json snap = run_config_to_json(c);
    CHECK(snap["loss"]["margin"].get<double>() == std::numbers::pi / 2);
    CHECK(snap["loss"]["margin_rule"] == "max");
    CHECK(snap["loss"]["tail"] == "linear");
    CHECK(snap["loss"]["kappa"].get<double>() == 30.0);
    CHECK_FALSE(snap.contains("output_dir"));
    // The snapshot parses back to the same run.
    const RunConfig again = parse_run_config(snap);
    CHECK(again.loss.margin == c.loss.margin);
    CHECK(run_config_to_json(again) == snap);
  }
  SUBCASE("absent margin is the maximal one; explicit numbers are kept") {
    Json j = blob_config("simplex", 10);
    j["loss"].erase("margin");
    CHECK(parse_run_config(j).loss.margin == std::acos(-1.0 / 9.0));
    j["loss"]["margin"] = 0.25;
    CHECK(parse_run_config(j).loss.margin == 0.25);
    CHECK_FALSE(parse_run_config(j).margin_was_max);
    j["loss"]["tail"] = "clamp";
    CHECK(parse_run_config(j).loss.tail == MarginTail::kClamp);
  }
  SUBCASE("layer widths end with the embedding dimension") {
    const RunConfig c = parse_run_config(blob_config("cube", 47));
    CHECK(c.layer_widths() == std::vector<int>{32, 6});
  }
  SUBCASE("config errors") {
    Json j = blob_config("simplex", 4);
    j["learning_rate"] = 0.1;
    CHECK(code_of([&] { parse_run_config(j); }) == ErrorCode::kConfig);
    j = blob_config("simplex", 4);
    j["loss"]["kapa"] = 30;
    CHECK(code_of([&] { parse_run_config(j); }) == ErrorCode::kConfig);
    j = blob_config("simplex", 4);
    j["classifier"]["d"] = 4;
    CHECK(code_of([&] { parse_run_config(j); }) == ErrorCode::kConfig);
    j = blob_config("simplex", 4);
    j["loss"]["margin"] = 4.0;
    CHECK(code_of([&] { parse_run_config(j); }) == ErrorCode::kMargin);
    j = blob_config("simplex", 2);  // phi = pi for the 1-simplex
    CHECK(code_of([&] { parse_run_config(j); }) == ErrorCode::kMargin);
    j = blob_config("simplex", 4);
    j["loss"] = Json{{"type", "norm_scaled"}, {"margin", 0.5}};
    CHECK(code_of([&] { parse_run_config(j); }) == ErrorCode::kConfig);
    j = blob_config("hexagon", 4);
    CHECK(code_of([&] { parse_run_config(j); }) == ErrorCode::kConfig);
    j = blob_config("simplex", 1);
    CHECK(code_of([&] { parse_run_config(j); }) == ErrorCode::kInvalidClassCount);
    j = blob_config("simplex", 4);
    j["dataset"]["type"] = "csv";
    CHECK(code_of([&] { parse_run_config(j); }) == ErrorCode::kConfig);
  }
  SUBCASE("parse errors report line and column") {
    Workdir dir("parse");
    write_text(dir.path / "bad.json", "{\n  \"seed\": 1,\n  \"epochs\": ,\n}\n");
    try {
      read_json_file(dir.path / "bad.json");
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kConfig);
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    CHECK(code_of([&] { read_json_file(dir.path / "absent.json"); }) == ErrorCode::kIo);
  }
}

TEST_CASE("derive_seed separates streams") {
  CHECK(derive_seed(1, 1) == derive_seed(1, 1));
  CHECK(derive_seed(1, 1) != derive_seed(1, 2));
  CHECK(derive_seed(1, 1) != derive_seed(2, 1));
}

TEST_CASE("cmd_gen_weights and cmd_check") {
  Workdir dir("weights");
  std::ostringstream log;
  CHECK(cmd_gen_weights("cube", 47, dir.path / "c.json", log) == kExitOk);
  CHECK(log.str().find("d=6\n") != std::string::npos);
  log.str("");
  CHECK(cmd_gen_weights("orthoplex", 10, dir.path / "o.json", log) == kExitOk);
  CHECK(log.str().find("phi=1.5707963267948966") != std::string::npos);
  CHECK(code_of([&] { cmd_gen_weights("simplex", 1, dir.path / "s.json", log); }) ==
        ErrorCode::kInvalidClassCount);

  CHECK(cmd_check(dir.path / "c.json", 1e-10, log) == kExitOk);
  Json j = read_json_file(dir.path / "o.json");
  j["rows"][3][0] = 0.5;
  write_json_file(j, dir.path / "bad.json");
  log.str("");
  CHECK(cmd_check(dir.path / "bad.json", 1e-10, log) == kExitVerificationFailed);
  CHECK(log.str().find("worst deviation") != std::string::npos);
  CHECK(code_of([&] { cmd_check(dir.path / "none.json", 1e-10, log); }) == ErrorCode::kIo);
}

TEST_CASE("cmd_train and cmd_eval on blobs") {
  Workdir dir("train");
  std::ostringstream log;

  SUBCASE("simplex K=4 reaches the tetrahedral geometry") {
    write_json_file(blob_config("simplex", 4), dir.path / "run.json");
    CHECK(cmd_train(dir.path / "run.json", log) == kExitOk);
    const fs::path out = dir.path / "run";
    for (const char* f : {"config.json", "checkpoint.json", "epochs.csv", "geometry.json",
                          "features.csv", "features_normalized.csv"}) {
      CHECK(fs::exists(out / f));
    }
    const Json geometry = read_json_file(out / "geometry.json");
    const double angle = geometry["min_pairwise_mean_angle"].get<double>();
    CHECK(std::abs(angle - std::acos(-1.0 / 3.0)) < 0.15);
    const Json snap = read_json_file(out / "config.json");
    CHECK(snap["loss"]["margin"].get<double>() == std::acos(-1.0 / 3.0));

    const std::string epochs = slurp(out / "epochs.csv");
    CHECK(epochs.rfind("epoch,mean_loss,train_accuracy\n", 0) == 0);

    // Eval regenerates the training blobs from the checkpoint config.
    CHECK(cmd_eval(EvalRequest{out / "checkpoint.json", std::nullopt, std::nullopt, {}}, log) == kExitOk);
    const Json eval = read_json_file(out / "eval_geometry.json");
    CHECK(eval["accuracy"].get<double>() >= 0.99);
    CHECK(eval == geometry);

    // Same inputs, different output directory: byte-identical artifacts.
    Json j = blob_config("simplex", 4);
    j["output_dir"] = "again";
    write_json_file(j, dir.path / "again.json");
    CHECK(cmd_train(dir.path / "again.json", log) == kExitOk);
    for (const char* f : {"config.json", "checkpoint.json", "epochs.csv", "geometry.json",
                          "features.csv", "features_normalized.csv"}) {
      CHECK(slurp(out / f) == slurp(dir.path / "again" / f));
    }
    // A different seed changes them.
    CHECK(cmd_train(dir.path / "again.json", log, 12) == kExitOk);
    CHECK(slurp(out / "checkpoint.json") != slurp(dir.path / "again" / "checkpoint.json"));
  }
  SUBCASE("trainable baseline changes its classifier rows") {
    Json j = blob_config("orthoplex", 4);
    j["classifier"]["trainable"] = true;
    j["epochs"] = 3;
    write_json_file(j, dir.path / "run.json");
    CHECK(cmd_train(dir.path / "run.json", log) == kExitOk);
    const MlpModel trained = model_from_json(read_json_file(dir.path / "run" / "checkpoint.json"));
    const RunConfig config = parse_run_config(j);
    const MlpModel start = build_model(config, 8);
    CHECK_FALSE(trained.fixed_head());
    CHECK(trained.classifier_rows() != start.classifier_rows());
  }
  SUBCASE("eval errors") {
    Json j = blob_config("cube", 4);
    j["epochs"] = 1;
    write_json_file(j, dir.path / "run.json");
    CHECK(cmd_train(dir.path / "run.json", log) == kExitOk);
    const fs::path ckpt = dir.path / "run" / "checkpoint.json";
    CHECK(code_of([&] {
            cmd_eval(EvalRequest{ckpt, DatasetSpec{BlobSpec{5, 10, 1.0, 6.0}}, std::nullopt, {}}, log);
          }) == ErrorCode::kDimension);
    CHECK(code_of([&] {
            cmd_eval(EvalRequest{ckpt, DatasetSpec{BlobSpec{8, 0, 1.0, 6.0}}, std::nullopt, {}}, log);
          }) == ErrorCode::kEmptyDataset);
  }
}

TEST_CASE("checkpoint round trip reproduces predictions bit-exactly") {
  for (const bool trainable : {false, true}) {
    Json j = blob_config("cube", 6);
    j["classifier"]["trainable"] = trainable;
    const RunConfig config = parse_run_config(j);
    MlpModel model = build_model(config, 8);
    const LabeledBatch data = load_dataset(config.dataset, 6, 3);
    TrainConfig tc = config.train_config();
    tc.epochs = 2;
    model = train(model, data, tc).model;
    const MlpModel back = model_from_json(Json::parse(model_to_json(model, run_config_to_json(config)).dump()));
    CHECK(forward(back, data.inputs).features == forward(model, data.inputs).features);
    CHECK(predict(back, data.inputs) == predict(model, data.inputs));
  }
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(Error(ErrorCode::kStructural, "")) == kExitVerificationFailed);
  CHECK(exit_code_for(Error(ErrorCode::kConfig, "")) == kExitUsage);
  CHECK(exit_code_for(Error(ErrorCode::kMargin, "")) == kExitUsage);
  CHECK(exit_code_for(Error(ErrorCode::kIo, "")) == kExitIo);
  CHECK(exit_code_for(Error(ErrorCode::kBadMagic, "")) == kExitIo);
  CHECK(exit_code_for(Error(ErrorCode::kTruncated, "")) == kExitIo);

#ifdef REPONET_CLI_PATH
  Workdir dir("cli");
  const fs::path log = dir.path / "log.txt";
  const std::string d = "\"" + dir.path.string() + "\"";
  CHECK(run_cli("gen-weights --kind cube --classes 47 --out " + d + "/c.json", log) == 0);
  CHECK(slurp(log).find("d=6") != std::string::npos);
  CHECK(run_cli("gen-weights --kind simplex --classes 1 --out " + d + "/s.json", log) == 2);
  CHECK(run_cli("gen-weights --kind prism --classes 4 --out " + d + "/p.json", log) == 2);
  CHECK(run_cli("gen-weights --kind cube", log) == 2);
  CHECK(run_cli("frobnicate", log) == 2);
  CHECK(run_cli("--help", log) == 0);
  CHECK(run_cli("check --weights " + d + "/c.json", log) == 0);
  Json bad = read_json_file(dir.path / "c.json");
  bad["rows"][0] = bad["rows"][1];
  write_json_file(bad, dir.path / "bad.json");
  CHECK(run_cli("check --weights " + d + "/bad.json", log) == 1);
  CHECK(run_cli("check --weights " + d + "/missing.json", log) == 3);
  write_text(dir.path / "broken.json", "{ \"seed\": ");
  CHECK(run_cli("train --config " + d + "/broken.json", log) == 2);
  CHECK(slurp(log).find("line") != std::string::npos);
  Json typo = blob_config("simplex", 4);
  typo["epoch"] = 3;
  write_json_file(typo, dir.path / "typo.json");
  CHECK(run_cli("train --config " + d + "/typo.json", log) == 2);
  Json idx = blob_config("simplex", 4);
  idx["dataset"] = Json{{"type", "idx"}, {"images", "nope-images"}, {"labels", "nope-labels"}};
  write_json_file(idx, dir.path / "idx.json");
  CHECK(run_cli("train --config " + d + "/idx.json", log) == 3);
  Json small = blob_config("simplex", 4);
  small["epochs"] = 2;
  write_json_file(small, dir.path / "small.json");
  CHECK(run_cli("train --config " + d + "/small.json", log) == 0);
  CHECK(run_cli("eval --checkpoint " + d + "/run/checkpoint.json --blobs", log) == 0);
  CHECK(run_cli("eval --checkpoint " + d + "/run/checkpoint.json --blobs --blob-dim 3", log) == 2);
  CHECK(run_cli("eval --checkpoint " + d + "/run/checkpoint.json", log) == 2);
#endif
}
