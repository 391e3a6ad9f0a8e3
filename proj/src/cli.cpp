#include "planefield/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "planefield/checkpoint.hpp"
#include "planefield/errors.hpp"
#include "planefield/synth.hpp"

namespace planefield {

namespace fs = std::filesystem;

Image render_frame(TrainState& state, double tau, std::vector<double>* depth_t) {
  const auto nets = sample_net_ptrs(state);
  const RenderedImage r = render_image(state.model, nets, state.camera, tau, render_settings(state, false));
  Image img(r.width, r.height, 3);
  for (std::size_t i = 0; i < r.rgb.size(); ++i) img.data[i] = std::clamp(r.rgb[i], 0.0, 1.0);
  if (depth_t) *depth_t = r.depth;
  return img;
}

EvalReport evaluate(TrainState& state, const Dataset& data, bool whole_image) {
  if (data.camera.width != state.camera.width || data.camera.height != state.camera.height)
    throw ContractViolation("evaluate: dataset resolution differs from the checkpoint camera");
  EvalReport report;
  report.mask_mode = whole_image ? "whole" : "tissue";
  for (std::size_t f = 0; f < data.frames.size(); ++f) {
    const auto& frame = data.frames[f];
    const bool any = std::any_of(frame.mask.begin(), frame.mask.end(), [](auto m) { return m != 0; });
    if (!whole_image && !any) continue;  // fully occluded frame has nothing to score
    const Image pred = render_frame(state, frame.time);
    const std::span<const std::uint8_t> mask =
        whole_image ? std::span<const std::uint8_t>{} : std::span<const std::uint8_t>(frame.mask);
    FrameMetrics m;
    m.frame = f;
    m.psnr = psnr(pred, frame.image, mask);
    try {
      m.ssim = ssim(pred, frame.image, mask);
    } catch (const ContractViolation&) {
      m.ssim = std::numeric_limits<double>::quiet_NaN();
    }
    report.frames.push_back(m);
  }
  report.summarize();
  return report;
}

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::pair<std::size_t, std::size_t> parse_res(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t used = 0;
    const auto w = std::stoul(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(s);
    const auto h = std::stoul(s.substr(x + 1), &used);
    if (used != s.size() - x - 1 || w == 0 || h == 0) throw std::invalid_argument(s);
    return {w, h};
  } catch (const std::exception&) {
    throw ContractViolation("--res expects WxH with positive integers, got '" + s + "'");
  }
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ContractViolation("cannot write " + path.string());
  out << text;
}

}  // namespace

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 256 << 20);
#endif
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Factorized space-time radiance field for single-viewpoint video"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Write a synthetic moving-blob dataset");
  std::string synth_out, synth_res = "32x32";
  std::size_t synth_frames = 20;
  std::uint64_t synth_seed = 0;
  bool synth_tool = false;
  synth->add_option("--out", synth_out, "Output dataset directory")->required();
  synth->add_option("--frames", synth_frames, "Frame count");
  synth->add_option("--res", synth_res, "Resolution WxH");
  synth->add_option("--seed", synth_seed, "Scene seed");
  synth->add_flag("--tool", synth_tool, "Add a sweeping occluder bar with masks");

  auto* train_cmd = app.add_subcommand("train", "Train on a dataset directory");
  std::string train_data, train_config, train_out, train_preset, train_resume;
  std::optional<std::size_t> train_iters;
  std::optional<std::uint64_t> train_seed;
  bool train_dry = false;
  train_cmd->add_option("--data", train_data, "Dataset directory")->required();
  train_cmd->add_option("--config", train_config, "key = value config file");
  train_cmd->add_option("--out", train_out, "Output directory")->required();
  train_cmd->add_option("--iters", train_iters, "Iteration count");
  train_cmd->add_option("--seed", train_seed, "Random seed");
  train_cmd->add_option("--preset", train_preset, "9k or 32k")->check(CLI::IsMember({"9k", "32k"}));
  train_cmd->add_option("--resume", train_resume, "Checkpoint to continue from");
  train_cmd->add_flag("--dry-run", train_dry, "Resolve and echo the config without training");

  auto* render_cmd = app.add_subcommand("render", "Render one frame from a checkpoint");
  std::string render_ckpt, render_out;
  std::optional<std::size_t> render_frame_index;
  std::optional<double> render_time;
  render_cmd->add_option("--ckpt", render_ckpt, "Checkpoint file")->required();
  render_cmd->add_option("--frame", render_frame_index, "Frame index");
  render_cmd->add_option("--out", render_out, "Output PNG")->required();
  render_cmd->add_option("--time", render_time, "Normalized time in [-1, 1]");

  auto* eval_cmd = app.add_subcommand("eval", "Score renders against a dataset");
  std::string eval_ckpt, eval_data, eval_out;
  bool eval_whole = false;
  eval_cmd->add_option("--ckpt", eval_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "Dataset directory")->required();
  eval_cmd->add_option("--out", eval_out, "Output JSON")->required();
  eval_cmd->add_flag("--whole-image", eval_whole, "Score every pixel, including tool pixels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n" << app.help();
    return 2;
  }

  try {
    if (*synth) {
      const auto [w, h] = parse_res(synth_res);
      if (synth_frames == 0) throw ContractViolation("--frames must be at least 1");
      SynthSpec spec = default_synth_spec(w, h, synth_frames, synth_seed);
      spec.tool_bar = synth_tool;
      const auto scene = synth_scene(spec);
      write_dataset(synth_out, scene.data);
      std::cout << "wrote " << synth_frames << " frames to " << synth_out << "\n";
    } else if (*train_cmd) {
      TrainConfig config;
      ConfigEntries file;
      if (!train_config.empty()) file = read_config_file(train_config);
      apply_config(config, file);
      if (!train_preset.empty()) config.iters = train_preset == "9k" ? 9000 : 32000;
      if (train_iters) config.iters = *train_iters;
      if (train_seed) config.seed = *train_seed;
      if (!file.count("lr_warmup_iters") && config.lr_warmup_iters >= config.iters)
        config.lr_warmup_iters = config.iters / 10;
      config.validate();

      const Dataset data = load_dataset(train_data);
      for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";
      const fs::path out(train_out);
      fs::create_directories(out);
      write_text(out / "config.txt", format_config(config));
      if (train_dry) {
        std::cout << format_config(config);
        return 0;
      }

      TrainState state = train_resume.empty() ? make_train_state(config, data.camera, data.times)
                                              : load_checkpoint(train_resume);
      if (!train_resume.empty()) {
        if (state.config.iters != config.iters) state.config.iters = config.iters;
        if (state.camera.width != data.camera.width || state.camera.height != data.camera.height)
          throw ContractViolation("--resume checkpoint resolution differs from the dataset");
      }
      const TrainContext ctx = make_context(data, state.config, out / "cache");
      TrainLoopOptions opts;
      opts.out_dir = out;
      const auto records = train(state, ctx, opts);
      if (!records.empty())
        std::cout << "trained to iteration " << state.iter << ", final loss " << records.back().terms.total << "\n";
    } else if (*render_cmd) {
      TrainState state = load_checkpoint(render_ckpt);
      double tau = 0;
      if (render_time) {
        tau = *render_time;
        if (!(tau >= -1.0 && tau <= 1.0)) throw ContractViolation("--time must lie in [-1, 1]");
      } else if (render_frame_index) {
        if (*render_frame_index >= state.frame_times.size())
          throw ContractViolation("--frame " + std::to_string(*render_frame_index) + " out of range (" +
                                  std::to_string(state.frame_times.size()) + " frames)");
        tau = state.frame_times[*render_frame_index];
      } else {
        throw ContractViolation("render needs --frame or --time");
      }
      std::vector<double> depth;
      const Image img = render_frame(state, tau, &depth);
      const fs::path out(render_out);
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
      write_png8(out, img);
      const double peak = depth.empty() ? 0.0 : *std::max_element(depth.begin(), depth.end());
      PngPixels d{img.width, img.height, 1, 16, std::vector<std::uint16_t>(depth.size(), 0)};
      for (std::size_t i = 0; i < depth.size(); ++i)
        d.samples[i] = peak > 0 ? static_cast<std::uint16_t>(std::lround(std::clamp(depth[i] / peak, 0.0, 1.0) * 65535)) : 0;
      fs::path depth_path = out;
      depth_path.replace_filename(out.stem().string() + "_depth.png");
      write_png(depth_path, d);
    } else if (*eval_cmd) {
      TrainState state = load_checkpoint(eval_ckpt);
      const Dataset data = load_dataset(eval_data);
      const EvalReport report = evaluate(state, data, eval_whole);
      const fs::path out(eval_out);
      write_text(out, report.to_json());
      fs::path csv = out;
      csv.replace_extension(".csv");
      write_text(csv, report.to_csv());
      std::cout << "psnr " << report.psnr_mean << " ssim " << report.ssim_mean << "\n";
    }
  } catch (const ValidationError& e) {
    std::string msg;
    for (const auto& p : e.problems()) msg += (msg.empty() ? "" : "; ") + p;
    std::cerr << "error: " << one_line(msg) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}

}  // namespace planefield
