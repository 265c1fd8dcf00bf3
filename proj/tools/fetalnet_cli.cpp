#include <CLI11.hpp>

#include <iostream>

#include "fetalnet/cli/commands.hpp"

using namespace fetalnet;

int main(int argc, char** argv) {
  CLI::App app{"fetalnet: fetal ultrasound clip segmentation, classification and biometry"};
  app.require_subcommand(1);

  cli::TrainArgs train;
  auto* t = app.add_subcommand("train", "train a model from a JSON config");
  t->add_option("--config", train.config, "config file (flat JSON)")->required()->check(CLI::ExistingFile);
  t->add_option("--epochs", train.epochs, "override epochs");
  t->add_option("--seed", train.seed, "override seed");
  t->add_option("--output-dir", train.output_dir, "override output_dir");
  t->add_flag("--quiet", train.quiet, "no per-epoch lines on stderr");

  cli::EvalArgs eval;
  auto* e = app.add_subcommand("eval", "score a checkpoint on a manifest");
  e->add_option("--checkpoint", eval.checkpoint)->required();
  e->add_option("--manifest", eval.manifest)->required();
  e->add_option("--json", eval.json_out, "write the report as JSON");
  e->add_option("--csv", eval.csv_out, "write the report as a CSV row");
  e->add_option("--frames", eval.frames_out, "write per-frame measurements");
  e->add_flag("--letterbox", eval.letterbox, "pad non-square frames");

  cli::InferArgs infer;
  auto* i = app.add_subcommand("infer", "label, segment and measure one clip");
  i->add_option("--checkpoint", infer.checkpoint)->required();
  i->add_option("--clip", infer.clip_dir, "directory with frames (and optional clip.json)");
  i->add_option("--manifest", infer.manifest, "take the clip from a manifest");
  i->add_option("--clip-id", infer.clip_id, "clip id within --manifest");
  i->add_option("--out", infer.out_dir, "output directory")->required();
  i->add_option("--spacing", infer.spacing, "pixel spacing in mm (overrides metadata)");
  i->add_flag("--letterbox", infer.letterbox, "pad non-square frames");

  cli::MeasureArgs measure;
  auto* m = app.add_subcommand("measure", "measure a mask image");
  m->add_option("--mask", measure.mask, "mask or probability PNG")->required();
  m->add_option("--label", measure.label, "Head, Abdomen, Femur or Background")->required();
  m->add_option("--spacing", measure.spacing, "pixel spacing in mm")->required();
  m->add_flag("--prob", measure.probability, "input is a probability map; clean it first");
  m->add_option("--frame-id", measure.frame_id);
  m->add_option("--overlay", measure.overlay, "write the fitted shape over the input");

  cli::AblateArgs ablate;
  auto* a = app.add_subcommand("ablate", "train and score the five component variants");
  a->add_option("--config", ablate.config)->required()->check(CLI::ExistingFile);
  a->add_option("--seeds", ablate.seeds, "number of seeds, starting at the config seed");
  a->add_option("--csv", ablate.csv_out, "output CSV (default output_dir/ablation.csv)");
  a->add_option("--epochs", ablate.epochs, "override epochs");

  cli::SynthArgs synth;
  auto* s = app.add_subcommand("synth", "write a phantom suite with manifest and analytic ground truth");
  s->add_option("--out", synth.out_dir)->required();
  s->add_option("--clips", synth.clips);
  s->add_option("--seed", synth.seed);
  s->add_option("--size", synth.options.size);
  s->add_option("--clip-len", synth.options.clip_len);
  s->add_option("--noise", synth.options.noise, "speckle sigma");
  s->add_option("--spacing-min", synth.options.spacing_min);
  s->add_option("--spacing-max", synth.options.spacing_max);
  s->add_option("--clips-per-patient", synth.options.clips_per_patient);
  s->add_option("--mix", synth.mix, "class weights Head,Abdomen,Femur,Background")->delimiter(',')->expected(4);
  s->add_flag("--split", synth.split, "also write train/val/test manifests split by patient");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : cli::kConfigError;
  }

  try {
    if (*t) return cli::cmd_train(train);
    if (*e) return cli::cmd_eval(eval);
    if (*i) return cli::cmd_infer(infer);
    if (*m) return cli::cmd_measure(measure);
    if (*a) return cli::cmd_ablate(ablate);
    if (*s) return cli::cmd_synth(synth);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return cli::exit_code_for(err);
  }
  return cli::kFailure;
}
