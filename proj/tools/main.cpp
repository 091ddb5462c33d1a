// Copyright 2026 The RefPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "refprompt/config.hpp"
#include "refprompt/metrics.hpp"
#include "refprompt/pipeline.hpp"
#include "refprompt/synthdata.hpp"

namespace {

namespace fs = std::filesystem;
using namespace refprompt;

int run_gen_data(const std::string& config_path, const std::string& out_dir) {
  const cfg::RunConfig cfg = cfg::load_config(config_path);
  cfg.validate();
  data::DatasetConfig dc;
  dc.video.frames = cfg.data_frames;
  dc.video.objects = cfg.data_objects;
  dc.video.height = cfg.data_size;
  dc.video.width = cfg.data_size;
  dc.video.motion_only_pairs = cfg.data_motion_only_pairs;
  dc.n_videos = cfg.data_videos;
  dc.seed = cfg.data_seed;
  data::generate_dataset(dc, out_dir);
  std::cout << "wrote " << dc.n_videos << " videos (" << cfg.data_frames
            << " frames, " << cfg.data_objects << " objects, "
            << cfg.data_size << "x" << cfg.data_size << ") to " << out_dir
            << std::endl;
  return 0;
}

int run_train(const std::string& config_path, const std::string& out_dir,
              const std::string& resume) {
  const cfg::RunConfig cfg = cfg::load_config(config_path);
  const pipe::TrainResult result =
      pipe::train(cfg, out_dir, resume.empty() ? fs::path() : fs::path(resume),
                  &std::cerr);
  std::cout << "trained " << result.steps << " steps" << std::endl;
  if (!result.history.empty()) {
    const loss::LossBreakdown& last = result.history.back();
    std::printf("final losses: box %.6f cls %.6f textcon %.6f modalcon %.6f "
                "total %.6f\n",
                last.box, last.cls, last.textcon, last.modalcon, last.total);
  }
  std::cout << "checkpoint: " << result.checkpoint_path.string() << '\n'
            << "train state: " << result.state_path.string() << '\n'
            << "loss log: " << result.log_path.string() << std::endl;
  return 0;
}

int run_infer(const std::string& ckpt, const std::string& video,
              const std::string& sentence, const std::string& adapter_name,
              const std::string& out_dir) {
  const pipe::BuiltModel built = pipe::load_model(ckpt);
  const data::VideoSample sample = data::load_video(video);
  const auto adapter = seg::make_adapter(adapter_name, sample);
  const std::vector<pipe::InferenceFrame> frames =
      pipe::infer(built, sample.frames, sentence, *adapter);
  fs::create_directories(out_dir);
  nlohmann::json records = nlohmann::json::array();
  for (std::size_t t = 0; t < frames.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "mask_%04zu.pgm", t);
    write_pgm(fs::path(out_dir) / name, frames[t].mask);
    nlohmann::json rec;
    rec["frame"] = t;
    rec["box"] = {frames[t].box.cx, frames[t].box.cy, frames[t].box.w,
                  frames[t].box.h};
    rec["confidence"] = frames[t].confidence;
    records.push_back(rec);
  }
  std::ofstream boxes(fs::path(out_dir) / "boxes.json", std::ios::trunc);
  boxes << records.dump(2) << '\n';
  std::cout << "wrote " << frames.size() << " masks + boxes.json to "
            << out_dir << std::endl;
  return 0;
}

int run_evaluate(const std::string& ckpt, const std::string& data,
                 const std::string& protocol, const std::string& out_dir) {
  const pipe::BuiltModel built = pipe::load_model(ckpt);
  const data::Dataset dataset = data::load_dataset(data);
  pipe::EvalOptions opts;
  opts.protocol = metrics::protocol_from_name(protocol);
  opts.adapter = built.run_config.adapter;
  const pipe::EvalResult result = pipe::evaluate(built, dataset, opts);
  fs::create_directories(out_dir);
  std::ofstream report(fs::path(out_dir) / "report.json", std::ios::trunc);
  report << pipe::eval_result_to_json(result) << '\n';
  metrics::write_per_frame_csv(fs::path(out_dir) / "per_frame.csv",
                               result.per_frame);
  std::printf("Box %.1f  J&F %.3f  J %.3f  F %.3f  (protocol %s, adapter %s)\n",
              100.0 * result.box_iou_mean, result.report.jf_mean,
              result.report.j_mean, result.report.f_mean, protocol.c_str(),
              opts.adapter.c_str());
  std::cout << "report: " << (fs::path(out_dir) / "report.json").string()
            << std::endl;
  return 0;
}

int run_ablate(const std::string& config_path, const std::string& out_dir) {
  const cfg::RunConfig cfg = cfg::load_config(config_path);
  const std::vector<pipe::AblationRow> rows =
      pipe::ablate(cfg, out_dir, &std::cerr);
  std::cout << pipe::ablation_table(rows);
  std::cout << "details: " << (fs::path(out_dir) / "ablation.json").string()
            << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "refprompt: trainable text-conditioned box proposals prompting a "
      "frozen segmenter, for referring video object segmentation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string resume;
  std::string ckpt;
  std::string video;
  std::string sentence;
  std::string adapter = "oracle";
  std::string data_dir;
  std::string protocol = "davis_style";

  CLI::App* gen = app.add_subcommand("gen-data",
                                     "Generate a synthetic dataset");
  gen->add_option("--config", config_path, "Run config file")->required();
  gen->add_option("--out", out_dir, "Output dataset directory")->required();

  CLI::App* train = app.add_subcommand("train", "Train the proposal network");
  train->add_option("--config", config_path, "Run config file")->required();
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_option("--resume", resume, "train_state.bin to resume from");

  CLI::App* infer = app.add_subcommand(
      "infer", "Online per-frame boxes + masks for one video and sentence");
  infer->add_option("--ckpt", ckpt, "Checkpoint file")->required();
  infer->add_option("--video", video, "Video directory or video.json")
      ->required();
  infer->add_option("--sentence", sentence, "Referring expression")
      ->required();
  infer->add_option("--adapter", adapter, "Segmenter adapter name");
  infer->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Evaluate a checkpoint on a dataset");
  evaluate->add_option("--ckpt", ckpt, "Checkpoint file")->required();
  evaluate->add_option("--data", data_dir, "Dataset directory")->required();
  evaluate->add_option("--protocol", protocol,
                       "davis_style or a2d_style");
  evaluate->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* ablate = app.add_subcommand(
      "ablate", "Train + evaluate all arms and print the comparison table");
  ablate->add_option("--config", config_path, "Run config file")->required();
  ablate->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* keys = app.add_subcommand(
      "config-keys", "List every config key with its default and meaning");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_gen_data(config_path, out_dir);
    if (train->parsed()) return run_train(config_path, out_dir, resume);
    if (infer->parsed())
      return run_infer(ckpt, video, sentence, adapter, out_dir);
    if (evaluate->parsed())
      return run_evaluate(ckpt, data_dir, protocol, out_dir);
    if (ablate->parsed()) return run_ablate(config_path, out_dir);
    if (keys->parsed()) {
      std::cout << refprompt::cfg::describe_keys();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
