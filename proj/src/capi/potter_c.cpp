// SPDX-License-Identifier: Apache-2.0
#include "potter/potter.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "potter/backbone.hpp"
#include "potter/config.hpp"
#include "potter/error.hpp"
#include "potter/harness.hpp"
#include "potter/profiler.hpp"
#include "potter/weights_io.hpp"

struct potter_config {
  potter::ModelConfig config;
};

struct potter_model {
  potter::PotterModel model;
  potter::ParamStore params;
};

struct potter_tensor {
  potter::Tensor tensor;
};

namespace {

thread_local std::string last_error;

potter_status set_error(potter_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <typename F>
potter_status guarded(F&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const potter::Error& e) {
    return set_error(static_cast<potter_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(POTTER_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(POTTER_ERR_INTERNAL, e.what());
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void need(const void* p, const char* what) {
  if (!p) potter::fail(potter::ErrorCode::invalid_argument, std::string(what) + " is null");
}

potter::TrainOptions train_options(const potter_train_options& o) {
  potter::TrainOptions t;
  t.epochs = o.epochs;
  t.batch = o.batch;
  t.seed = o.seed;
  t.adam.lr = o.lr;
  t.adam.schedule = potter::parse_lr_schedule(o.schedule ? o.schedule : "constant");
  t.adam.warmup_epochs = o.warmup_epochs;
  return t;
}

}  // namespace

extern "C" {

const char* potter_version(void) { return POTTER_VERSION; }

const char* potter_last_error(void) { return last_error.c_str(); }

const char* potter_status_name(potter_status status) {
  switch (status) {
    case POTTER_OK: return "ok";
    case POTTER_ERR_INVALID_ARGUMENT: return "invalid argument";
    case POTTER_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case POTTER_ERR_IO: return "i/o error";
    case POTTER_ERR_FORMAT: return "format error";
    case POTTER_ERR_CONFIG: return "config error";
    case POTTER_ERR_DIVERGED: return "diverged";
    case POTTER_ERR_INTERNAL: return "internal error";
    case POTTER_CHECK_FAILED: return "check failed";
  }
  return "unknown status";
}

void potter_string_free(char* s) { std::free(s); }

// ---------------------------------------------------------------- configs

potter_status potter_config_preset(const char* name, potter_config** out) {
  return guarded([&] {
    need(name, "name");
    need(out, "out");
    *out = new potter_config{potter::preset(name)};
    return POTTER_OK;
  });
}

potter_status potter_config_load(const char* path, potter_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new potter_config{potter::load_config(path)};
    return POTTER_OK;
  });
}

potter_status potter_config_parse(const char* json, potter_config** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    *out = new potter_config{potter::config_from_json(json)};
    return POTTER_OK;
  });
}

potter_status potter_config_set_mixer(potter_config* config, const char* kind) {
  return guarded([&] {
    need(config, "config");
    need(kind, "kind");
    config->config.mixer = potter::parse_mixer_kind(kind);
    return POTTER_OK;
  });
}

potter_status potter_config_to_json(const potter_config* config, char** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = copy_string(potter::config_to_json(config->config, 2));
    return POTTER_OK;
  });
}

potter_status potter_config_hash(const potter_config* config, char** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = copy_string(potter::config_hash(config->config));
    return POTTER_OK;
  });
}

potter_status potter_config_input(const potter_config* config, size_t* h, size_t* w) {
  return guarded([&] {
    need(config, "config");
    if (h) *h = config->config.input_h;
    if (w) *w = config->config.input_w;
    return POTTER_OK;
  });
}

void potter_config_free(potter_config* config) { delete config; }

// ---------------------------------------------------------------- tensors

potter_status potter_tensor_create(const size_t* shape, size_t rank, const double* data,
                                   potter_tensor** out) {
  return guarded([&] {
    need(out, "out");
    if (rank > 0) need(shape, "shape");
    potter::Shape s(shape, shape + rank);
    potter::Tensor t(s);
    if (data) std::memcpy(t.values().data(), data, t.size() * sizeof(double));
    *out = new potter_tensor{std::move(t)};
    return POTTER_OK;
  });
}

potter_status potter_tensor_load(const char* path, potter_tensor** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new potter_tensor{potter::load_tensor(path)};
    return POTTER_OK;
  });
}

potter_status potter_tensor_save(const potter_tensor* tensor, const char* path) {
  return guarded([&] {
    need(tensor, "tensor");
    need(path, "path");
    potter::save_tensor(path, tensor->tensor);
    return POTTER_OK;
  });
}

size_t potter_tensor_rank(const potter_tensor* tensor) {
  return tensor ? tensor->tensor.shape().size() : 0;
}

size_t potter_tensor_dim(const potter_tensor* tensor, size_t axis) {
  if (!tensor || axis >= tensor->tensor.shape().size()) return 0;
  return tensor->tensor.shape()[axis];
}

size_t potter_tensor_size(const potter_tensor* tensor) { return tensor ? tensor->tensor.size() : 0; }

const double* potter_tensor_data(const potter_tensor* tensor) {
  return tensor ? tensor->tensor.values().data() : nullptr;
}

void potter_tensor_free(potter_tensor* tensor) { delete tensor; }

// ---------------------------------------------------------------- models

potter_status potter_model_create(const potter_config* config, uint64_t seed, potter_model** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    potter::PotterModel model(config->config);
    potter::ParamStore params = model.initialize(seed);
    *out = new potter_model{std::move(model), std::move(params)};
    return POTTER_OK;
  });
}

potter_status potter_model_load(const potter_config* config, const char* path, potter_model** out) {
  return guarded([&] {
    need(config, "config");
    need(path, "path");
    need(out, "out");
    potter::PotterModel model(config->config);
    potter::ParamStore params = potter::load_weights(path);
    model.check_weights(params);
    *out = new potter_model{std::move(model), std::move(params)};
    return POTTER_OK;
  });
}

potter_status potter_model_save(const potter_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    potter::save_weights(path, model->params);
    return POTTER_OK;
  });
}

potter_status potter_model_param_count(const potter_model* model, uint64_t* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = model->params.numel();
    return POTTER_OK;
  });
}

potter_status potter_model_forward(const potter_model* model, const potter_tensor* image,
                                   potter_tensor** out) {
  return guarded([&] {
    need(model, "model");
    need(image, "image");
    need(out, "out");
    *out = new potter_tensor{model->model.infer(model->params, image->tensor)};
    return POTTER_OK;
  });
}

void potter_model_free(potter_model* model) { delete model; }

// ---------------------------------------------------------------- complexity

potter_status potter_profile(const potter_config* config, size_t h, size_t w, const char* mode,
                             uint64_t batch, potter_format format, char** out) {
  return guarded([&] {
    need(config, "config");
    need(mode, "mode");
    need(out, "out");
    const potter::ComplexityReport r =
        potter::count_macs(config->config, h, w, potter::parse_count_mode(mode), batch);
    *out = copy_string(format == POTTER_FORMAT_JSON ? potter::report_to_json(r) + "\n"
                                                    : potter::report_to_text(r));
    return POTTER_OK;
  });
}

potter_status potter_profile_mixer(const char* kind, uint64_t d, uint64_t n, const char* mode,
                                   potter_format format, char** out) {
  return guarded([&] {
    need(kind, "kind");
    need(mode, "mode");
    need(out, "out");
    const potter::ComplexityReport r = potter::profile_mixer(
        potter::parse_mixer_kind(kind), d, n, potter::parse_count_mode(mode));
    *out = copy_string(format == POTTER_FORMAT_JSON ? potter::report_to_json(r) + "\n"
                                                    : potter::report_to_text(r));
    return POTTER_OK;
  });
}

// ---------------------------------------------------------------- harness

potter_status potter_check(const char* suite, uint64_t seed, size_t num_seeds, double tolerance,
                           potter_format format, char** out) {
  return guarded([&] {
    need(suite, "suite");
    need(out, "out");
    const std::string which = suite;
    if (which != "grad" && which != "invariants" && which != "all")
      potter::fail(potter::ErrorCode::invalid_argument,
                   "unknown suite '" + which + "' (expected grad, invariants or all)");
    if (!(tolerance > 0.0))
      potter::fail(potter::ErrorCode::invalid_argument, "tolerance must be positive");
    potter::SuiteReport report;
    if (which != "invariants") {
      if (num_seeds == 0) potter::fail(potter::ErrorCode::invalid_argument, "need at least one seed");
      std::vector<std::uint64_t> seeds;
      for (std::size_t i = 0; i < num_seeds; ++i) seeds.push_back(seed + i);
      report = potter::run_gradcheck_suite(tolerance, seeds);
    }
    if (which != "grad") {
      const potter::SuiteReport inv = potter::run_invariants_suite(seed);
      report.entries.insert(report.entries.end(), inv.entries.begin(), inv.entries.end());
    }
    *out = copy_string(format == POTTER_FORMAT_JSON ? report.to_json() + "\n" : report.to_text());
    if (!report.passed())
      return set_error(POTTER_CHECK_FAILED,
                       std::to_string(report.failures()) + " of " +
                           std::to_string(report.entries.size()) + " checks failed");
    return POTTER_OK;
  });
}

void potter_train_options_init(potter_train_options* options) {
  if (!options) return;
  const potter::TrainOptions t;
  options->epochs = t.epochs;
  options->batch = t.batch;
  options->seed = t.seed;
  options->lr = t.adam.lr;
  options->schedule = "constant";
  options->warmup_epochs = t.adam.warmup_epochs;
  options->samples = potter::AblationOptions{}.samples;
  options->classes = potter::AblationOptions{}.classes;
}

potter_status potter_train(const potter_config* config, const potter_train_options* options,
                           const char* resume_path, const char* checkpoint_path,
                           potter_epoch_callback on_epoch, void* user, potter_model** out_model,
                           char** out_csv) {
  return guarded([&] {
    need(config, "config");
    need(options, "options");
    const potter::TrainOptions opts = train_options(*options);
    potter::PotterModel model(config->config);
    const potter::ModelConfig& c = model.config();
    const potter::SynthDataset data =
        potter::generate_synth(opts.seed, options->samples, options->classes, c.input_h, c.input_w);
    potter::TrainState state;
    if (resume_path) {
      state = potter::load_checkpoint(resume_path);
      model.check_weights(potter::model_params(model, state.params));
      if (state.epoch > opts.epochs)
        potter::fail(potter::ErrorCode::invalid_argument,
                     "checkpoint is at epoch " + std::to_string(state.epoch) +
                         ", past the requested " + std::to_string(opts.epochs));
    } else {
      state = potter::initial_train_state(model, options->classes, opts.seed);
    }
    const std::string hash = potter::config_hash(c);
    potter::EpochCallback cb;
    if (on_epoch)
      cb = [&](const potter::EpochRecord& r) { on_epoch(potter::epoch_jsonl(r, hash).c_str(), user); };
    const potter::TrainReport report = potter::train_toy(model, data, opts, state, cb);
    if (checkpoint_path) potter::save_checkpoint(checkpoint_path, state);
    char* csv = out_csv ? copy_string(potter::report_csv(report)) : nullptr;
    if (out_model)
      *out_model = new potter_model{model, potter::model_params(model, state.params)};
    if (out_csv) *out_csv = csv;
    return POTTER_OK;
  });
}

potter_status potter_ablate(const potter_config* config, const char* name,
                            const potter_train_options* options, potter_format format,
                            char** out) {
  return guarded([&] {
    need(config, "config");
    need(name, "name");
    need(out, "out");
    potter::AblationOptions a;
    if (options) {
      a.train = train_options(*options);
      a.samples = options->samples;
      a.classes = options->classes;
    } else {
      a.samples = 0;
    }
    const potter::AblationTable t = potter::run_ablation(name, config->config, a);
    *out = copy_string(format == POTTER_FORMAT_JSON ? t.to_json() + "\n" : t.to_text());
    return POTTER_OK;
  });
}

}  // extern "C"
