// reponet: fixed polytope classifiers with a maximal angular margin.
//
//   reponet gen-weights --kind cube --classes 47 --out cube47.json
//   reponet check --weights cube47.json --tol 1e-10
//   reponet train --config run.json
//   reponet eval --checkpoint out/checkpoint.json --images X --labels Y
//   reponet eval --checkpoint out/checkpoint.json --blobs

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "reponet/commands.hpp"

int main(int argc, char** argv) {
  using namespace reponet;

  CLI::App app{"Regular-polytope fixed classifiers with additive angular margin"};
  app.require_subcommand(1);

  std::string kind;
  int classes = 0;
  std::string out_path;
  auto* gen = app.add_subcommand("gen-weights", "Generate a fixed classifier weight matrix");
  gen->add_option("--kind", kind, "simplex | orthoplex | cube")
      ->required()
      ->check(CLI::IsMember({"simplex", "orthoplex", "cube"}));
  gen->add_option("--classes", classes, "Number of classes K")->required();
  gen->add_option("--out", out_path, "Output JSON path")->required();

  std::string weights_path;
  double tol = 1e-10;
  auto* check = app.add_subcommand("check", "Verify the geometry of a weight file");
  check->add_option("--weights", weights_path, "Weight JSON file")->required();
  check->add_option("--tol", tol, "Tolerance (default 1e-10)");

  std::string config_path;
  std::optional<std::uint64_t> seed;
  auto* train = app.add_subcommand("train", "Train a network from a JSON config");
  train->add_option("--config", config_path, "Run configuration JSON")->required();
  train->add_option("--seed", seed, "Override the config seed");

  EvalRequest eval_request;
  std::string checkpoint, images, labels, report;
  bool transpose = false;
  std::size_t limit = 0;
  bool blobs = false;
  std::optional<int> blob_dim, per_class;
  std::optional<double> spread, separation;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval->add_option("--checkpoint", checkpoint, "checkpoint.json from train")->required();
  auto* images_opt = eval->add_option("--images", images, "IDX image file (.gz accepted)");
  auto* labels_opt = eval->add_option("--labels", labels, "IDX label file (.gz accepted)");
  images_opt->needs(labels_opt);
  labels_opt->needs(images_opt);
  eval->add_flag("--emnist", transpose, "Transpose images (EMNIST orientation)");
  eval->add_option("--limit", limit, "Use only the first N samples");
  auto* blobs_flag =
      eval->add_flag("--blobs", blobs, "Gaussian blobs (defaults from the checkpoint config)");
  blobs_flag->excludes(images_opt);
  eval->add_option("--blob-dim", blob_dim, "Blob input dimension")->needs(blobs_flag);
  eval->add_option("--per-class", per_class, "Blob samples per class")->needs(blobs_flag);
  eval->add_option("--spread", spread, "Blob standard deviation")->needs(blobs_flag);
  eval->add_option("--separation", separation, "Blob centre distance")->needs(blobs_flag);
  eval->add_option("--seed", eval_request.seed, "Run seed to regenerate blobs from");
  eval->add_option("--report", report, "Where to write the geometry report JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version are "errors" with exit code 0.
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_weights(kind, classes, out_path, std::cout);
    if (*check) return cmd_check(weights_path, tol, std::cout);
    if (*train) return cmd_train(config_path, std::cout, seed);
    if (*eval) {
      eval_request.checkpoint = checkpoint;
      eval_request.report = report;
      if (!images.empty()) {
        eval_request.dataset = IdxSpec{images, labels, transpose, limit};
      } else if (blobs && (blob_dim || per_class || spread || separation)) {
        // Start from the checkpoint's blob settings and apply the overrides.
        const RunConfig config =
            parse_run_config(read_json_file(checkpoint).at("config"));
        BlobSpec spec = std::holds_alternative<BlobSpec>(config.dataset)
                            ? std::get<BlobSpec>(config.dataset)
                            : BlobSpec{};
        if (blob_dim) spec.dim = *blob_dim;
        if (per_class) spec.per_class = *per_class;
        if (spread) spec.spread = *spread;
        if (separation) spec.separation = *separation;
        eval_request.dataset = spec;
      } else if (!blobs) {
        std::cerr << "eval: pass --images/--labels or --blobs\n";
        return kExitUsage;
      }
      return cmd_eval(eval_request, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
