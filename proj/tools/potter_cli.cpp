// SPDX-License-Identifier: Apache-2.0
// Command-line front end. Talks to the library only through potter.h.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "potter/potter.h"

namespace {

// Exit codes: 0 success, 1 check or run failure, 2 usage or config error.
int exit_code(potter_status s) {
  switch (s) {
    case POTTER_OK: return 0;
    case POTTER_CHECK_FAILED:
    case POTTER_ERR_DIVERGED:
    case POTTER_ERR_INTERNAL: return 1;
    default: return 2;
  }
}

struct Failure {
  potter_status status;
};

void check(potter_status s) {
  if (s == POTTER_OK) return;
  std::cerr << "potter: " << potter_status_name(s) << ": " << potter_last_error() << "\n";
  throw Failure{s};
}

struct StringDeleter {
  void operator()(char* s) const { potter_string_free(s); }
};
struct ConfigDeleter {
  void operator()(potter_config* c) const { potter_config_free(c); }
};
struct ModelDeleter {
  void operator()(potter_model* m) const { potter_model_free(m); }
};
struct TensorDeleter {
  void operator()(potter_tensor* t) const { potter_tensor_free(t); }
};
using CString = std::unique_ptr<char, StringDeleter>;
using Config = std::unique_ptr<potter_config, ConfigDeleter>;
using Model = std::unique_ptr<potter_model, ModelDeleter>;
using TensorHandle = std::unique_ptr<potter_tensor, TensorDeleter>;

CString take(char* s) { return CString(s); }

void write_text(const std::string& path, const std::string& text, bool append = false) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) {
    std::cerr << "potter: cannot write '" << path << "'\n";
    throw Failure{POTTER_ERR_IO};
  }
  out << text;
  if (!out.flush()) {
    std::cerr << "potter: failed writing '" << path << "'\n";
    throw Failure{POTTER_ERR_IO};
  }
}

struct ConfigFlags {
  std::string path;
  std::string preset;
  std::string fallback;

  void attach(CLI::App* cmd, const std::string& default_preset) {
    fallback = default_preset;
    auto* c = cmd->add_option("--config", path, "model config JSON file");
    auto* p = cmd->add_option("--preset", preset,
                              "built-in config: cls_s12, potter_hmr, micro, micro_hr (default " +
                                  default_preset + ")");
    c->excludes(p);
  }

  Config resolve() const {
    potter_config* raw = nullptr;
    if (!path.empty())
      check(potter_config_load(path.c_str(), &raw));
    else
      check(potter_config_preset((preset.empty() ? fallback : preset).c_str(), &raw));
    Config cfg(raw);
    announce(cfg.get());
    return cfg;
  }

  static void announce(const potter_config* cfg) {
    char* hash = nullptr;
    check(potter_config_hash(cfg, &hash));
    std::cerr << "config " << take(hash).get() << "\n";
  }
};

void parse_hw(const std::string& text, std::size_t& h, std::size_t& w) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    h = std::stoul(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(text);
    w = std::stoul(text.substr(x + 1), &used);
    if (used != text.size() - x - 1) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw CLI::ValidationError("--input", "expected HxW, got '" + text + "'");
  }
}

struct TrainFlags {
  potter_train_options o{};
  std::string schedule = "constant";

  TrainFlags() { potter_train_options_init(&o); }

  void attach(CLI::App* cmd) {
    cmd->add_option("--epochs", o.epochs, "training epochs")->capture_default_str();
    cmd->add_option("--batch", o.batch, "batch size")->capture_default_str();
    cmd->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--schedule", schedule, "constant or cosine")->capture_default_str();
    cmd->add_option("--warmup", o.warmup_epochs, "warmup epochs (cosine only)")
        ->capture_default_str();
    cmd->add_option("--seed", o.seed, "seed for init, data and shuffling")->capture_default_str();
    cmd->add_option("--samples", o.samples, "synthetic dataset size")->capture_default_str();
    cmd->add_option("--classes", o.classes, "synthetic classes (1-4)")->capture_default_str();
  }

  const potter_train_options& get() {
    o.schedule = schedule.c_str();
    return o;
  }
};

void log_epoch(const char* line, void* user) {
  auto* log = static_cast<std::ofstream*>(user);
  *log << line << "\n";
  log->flush();
  std::cerr << line << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"POTTER pooling-attention backbone: profile, check, train, infer, ablate"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(potter_version()));

  // profile
  auto* profile = app.add_subcommand("profile", "parameter and MAC counts");
  ConfigFlags profile_cfg;
  profile_cfg.attach(profile, "cls_s12");
  std::string input_hw, mode = "exact", mixer, json_path, text_path;
  std::uint64_t dim = 0, tokens = 0, batch = 1;
  profile->add_option("--input", input_hw, "input resolution HxW (default: the config's)");
  profile->add_option("--mode", mode, "table or exact")->capture_default_str();
  profile->add_option("--mixer", mixer, "poolattn, pooling or attention");
  auto* d_opt = profile->add_option("-D", dim, "profile a single mixer at this dimension");
  auto* n_opt = profile->add_option("-N", tokens, "token count for a single-mixer profile");
  d_opt->needs(n_opt);
  n_opt->needs(d_opt);
  profile->add_option("--batch", batch, "batch size")->capture_default_str();
  profile->add_option("--json", json_path, "write the JSON report here");
  profile->add_option("--text", text_path, "write the text table here as well as stdout");

  // check
  auto* check_cmd = app.add_subcommand("check", "gradient and invariant suites");
  std::string suite = "all", check_json;
  std::uint64_t check_seed = 0;
  std::size_t check_seeds = 10;
  double tol = 1e-4;
  check_cmd->add_option("--suite", suite, "grad, invariants or all")->capture_default_str();
  check_cmd->add_option("--seed", check_seed, "first seed")->capture_default_str();
  check_cmd->add_option("--seeds", check_seeds, "number of gradient-check seeds")
      ->capture_default_str();
  check_cmd->add_option("--tol", tol, "relative gradient tolerance")->capture_default_str();
  check_cmd->add_option("--json", check_json, "write the JSON report here");

  // train
  auto* train = app.add_subcommand("train", "train on the synthetic shape task");
  ConfigFlags train_cfg;
  train_cfg.attach(train, "micro");
  TrainFlags train_flags;
  train_flags.attach(train);
  std::string out_path, log_path, csv_path, ckpt_path, resume_path;
  train->add_option("--out", out_path, "weights file to write")->required();
  train->add_option("--log", log_path, "JSON-lines epoch log (default <out>.jsonl)");
  train->add_option("--csv", csv_path, "CSV summary (default <out>.csv)");
  train->add_option("--checkpoint", ckpt_path, "training state (default <out>.ckpt)");
  train->add_option("--resume", resume_path, "continue from a checkpoint");

  // infer
  auto* infer = app.add_subcommand("infer", "forward one input tensor");
  ConfigFlags infer_cfg;
  infer_cfg.attach(infer, "micro");
  std::string weights_path, input_path, output_path;
  infer->add_option("--weights", weights_path, "weights file")->required();
  infer->add_option("--input", input_path, "input tensor [3,H,W] (single-tensor file)")
      ->required();
  infer->add_option("--output", output_path, "output tensor file")->required();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "mixer or HR-stream ablation table");
  ConfigFlags ablate_cfg;
  ablate_cfg.attach(ablate, "micro");
  TrainFlags ablate_flags;
  ablate_flags.attach(ablate);
  std::string ablation = "mixer_ablation", ablate_json;
  ablate->add_option("--name", ablation, "mixer_ablation or hr_ablation")->capture_default_str();
  ablate->add_option("--json", ablate_json, "write the JSON table here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*profile) {
      if (dim != 0 || tokens != 0) {
        if (mixer.empty()) throw CLI::ValidationError("-D/-N", "a single-mixer profile needs --mixer");
        profile_cfg.resolve();
        char* text = nullptr;
        check(potter_profile_mixer(mixer.c_str(), dim, tokens, mode.c_str(), POTTER_FORMAT_TEXT,
                                   &text));
        const CString t = take(text);
        std::cout << t.get();
        if (!text_path.empty()) write_text(text_path, t.get());
        if (!json_path.empty()) {
          char* json = nullptr;
          check(potter_profile_mixer(mixer.c_str(), dim, tokens, mode.c_str(), POTTER_FORMAT_JSON,
                                     &json));
          write_text(json_path, take(json).get());
        }
        return 0;
      }
      Config cfg = profile_cfg.resolve();
      if (!mixer.empty()) {
        check(potter_config_set_mixer(cfg.get(), mixer.c_str()));
        ConfigFlags::announce(cfg.get());
      }
      std::size_t h = 0, w = 0;
      check(potter_config_input(cfg.get(), &h, &w));
      if (!input_hw.empty()) parse_hw(input_hw, h, w);
      char* text = nullptr;
      check(potter_profile(cfg.get(), h, w, mode.c_str(), batch, POTTER_FORMAT_TEXT, &text));
      const CString t = take(text);
      std::cout << t.get();
      if (!text_path.empty()) write_text(text_path, t.get());
      if (!json_path.empty()) {
        char* json = nullptr;
        check(potter_profile(cfg.get(), h, w, mode.c_str(), batch, POTTER_FORMAT_JSON, &json));
        write_text(json_path, take(json).get());
      }
      return 0;
    }

    if (*check_cmd) {
      // The suites build their own models; the end-to-end cases use micro.
      Config micro;
      {
        potter_config* raw = nullptr;
        check(potter_config_preset("micro", &raw));
        micro.reset(raw);
      }
      ConfigFlags::announce(micro.get());
      char* text = nullptr;
      const potter_status s =
          potter_check(suite.c_str(), check_seed, check_seeds, tol, POTTER_FORMAT_TEXT, &text);
      if (s != POTTER_OK && s != POTTER_CHECK_FAILED) check(s);
      std::cout << take(text).get();
      if (!check_json.empty()) {
        char* json = nullptr;
        potter_check(suite.c_str(), check_seed, check_seeds, tol, POTTER_FORMAT_JSON, &json);
        write_text(check_json, take(json).get());
      }
      if (s == POTTER_CHECK_FAILED) std::cerr << "potter: " << potter_last_error() << "\n";
      return exit_code(s);
    }

    if (*train) {
      Config cfg = train_cfg.resolve();
      if (log_path.empty()) log_path = out_path + ".jsonl";
      if (csv_path.empty()) csv_path = out_path + ".csv";
      if (ckpt_path.empty()) ckpt_path = out_path + ".ckpt";
      std::ofstream log(log_path, resume_path.empty() ? std::ios::trunc : std::ios::app);
      if (!log) {
        std::cerr << "potter: cannot write '" << log_path << "'\n";
        return 2;
      }
      potter_model* raw = nullptr;
      char* csv = nullptr;
      check(potter_train(cfg.get(), &train_flags.get(),
                         resume_path.empty() ? nullptr : resume_path.c_str(), ckpt_path.c_str(),
                         log_epoch, &log, &raw, &csv));
      const Model model(raw);
      const CString c = take(csv);
      check(potter_model_save(model.get(), out_path.c_str()));
      write_text(csv_path, c.get());
      std::cerr << "wrote " << out_path << "\n";
      return 0;
    }

    if (*infer) {
      Config cfg = infer_cfg.resolve();
      potter_model* m = nullptr;
      check(potter_model_load(cfg.get(), weights_path.c_str(), &m));
      const Model model(m);
      potter_tensor* in = nullptr;
      check(potter_tensor_load(input_path.c_str(), &in));
      const TensorHandle input(in);
      potter_tensor* out = nullptr;
      check(potter_model_forward(model.get(), input.get(), &out));
      const TensorHandle output(out);
      check(potter_tensor_save(output.get(), output_path.c_str()));
      std::cerr << "output [";
      for (std::size_t a = 0; a < potter_tensor_rank(output.get()); ++a)
        std::cerr << (a ? "," : "") << potter_tensor_dim(output.get(), a);
      std::cerr << "] -> " << output_path << "\n";
      return 0;
    }

    if (*ablate) {
      Config cfg = ablate_cfg.resolve();
      const potter_train_options& o = ablate_flags.get();
      char* text = nullptr;
      check(potter_ablate(cfg.get(), ablation.c_str(), o.samples > 0 ? &o : nullptr,
                          POTTER_FORMAT_TEXT, &text));
      std::cout << take(text).get();
      if (!ablate_json.empty()) {
        char* json = nullptr;
        check(potter_ablate(cfg.get(), ablation.c_str(), o.samples > 0 ? &o : nullptr,
                            POTTER_FORMAT_JSON, &json));
        write_text(ablate_json, take(json).get());
      }
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const Failure& f) {
    return exit_code(f.status);
  }
  return 2;
}
