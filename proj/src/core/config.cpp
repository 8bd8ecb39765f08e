// SPDX-License-Identifier: Apache-2.0
#include "potter/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "potter/error.hpp"
#include "potter/rng.hpp"

namespace potter {

using nlohmann::json;

const char* to_string(HeadKind kind) {
  return kind == HeadKind::classify ? "classify" : "features";
}

const char* to_string(EmbedKind kind) {
  return kind == EmbedKind::patchify ? "patchify" : "overlap7";
}

const char* to_string(MergeKind kind) {
  return kind == MergeKind::linear2x2 ? "linear2x2" : "conv3x3";
}

void ModelConfig::validate() const {
  const auto bad = [](const std::string& msg) { fail(ErrorCode::config, msg); };
  if (patch_size == 0) bad("patch_size must be positive");
  const std::size_t unit = patch_size * 8;
  if (input_h == 0 || input_w == 0 || input_h % unit || input_w % unit)
    bad("input " + std::to_string(input_h) + "x" + std::to_string(input_w) +
        " must be a positive multiple of " + std::to_string(unit) + " (8 x patch_size)");
  if (embed == EmbedKind::overlap7 && patch_size != 4)
    bad("the overlap7 stem has stride 4 and requires patch_size 4");
  for (std::size_t i = 0; i < 4; ++i) {
    if (dims[i] == 0) bad("dims must be positive");
    const Factorization f = factorizations[i];
    if ((f.rows == 0) != (f.cols == 0)) bad("factorization entries must both be set or both 0");
    if (f.rows && f.rows * f.cols != dims[i])
      bad("factorization " + std::to_string(f.rows) + "x" + std::to_string(f.cols) +
          " of stage " + std::to_string(i + 1) + " does not multiply to " +
          std::to_string(dims[i]));
  }
  if (head == HeadKind::classify && classes == 0) bad("classify head needs at least one class");
}

Factorization ModelConfig::factorization(std::size_t stage) const {
  const Factorization f = factorizations.at(stage);
  return f.rows ? f : default_factorization(dims.at(stage));
}

Shape ModelConfig::stage_shape(std::size_t stage) const {
  const std::size_t div = patch_size << stage;
  return {dims.at(stage), input_h / div, input_w / div};
}

Shape ModelConfig::hr_shape() const { return stage_shape(0); }

Shape ModelConfig::output_shape() const {
  if (head == HeadKind::classify) return {classes};
  return hr_enabled ? hr_shape() : stage_shape(3);
}

ModelConfig preset(const std::string& name) {
  ModelConfig c;
  if (name == "cls_s12") {
    c.embed = EmbedKind::overlap7;
    c.merge = MergeKind::conv3x3;
  } else if (name == "potter_hmr") {
    c.input_h = c.input_w = 256;
    c.embed = EmbedKind::overlap7;
    c.merge = MergeKind::conv3x3;
    c.hr_enabled = true;
    c.head = HeadKind::features;
    c.classes = 0;
  } else if (name == "micro" || name == "micro_hr") {
    c.input_h = c.input_w = 32;
    c.dims = {4, 8, 12, 16};
    c.depths = {1, 1, 1, 1};
    c.hr_depths = {1, 1, 1};
    c.classes = 4;
    if (name == "micro_hr") {
      c.hr_enabled = true;
      c.head = HeadKind::features;
      c.classes = 0;
    }
  } else {
    fail(ErrorCode::config,
         "unknown preset '" + name + "' (expected cls_s12, potter_hmr, micro or micro_hr)");
  }
  return c;
}

bool is_preset(const std::string& name) {
  return name == "cls_s12" || name == "potter_hmr" || name == "micro" || name == "micro_hr";
}

namespace {

template <std::size_t N>
std::array<std::size_t, N> read_sizes(const json& j, const char* key) {
  if (!j.is_array() || j.size() != N)
    fail(ErrorCode::config, std::string("'") + key + "' must be an array of " +
                                std::to_string(N) + " integers");
  std::array<std::size_t, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!j[i].is_number_unsigned())
      fail(ErrorCode::config, std::string("'") + key + "' entries must be non-negative integers");
    out[i] = j[i].get<std::size_t>();
  }
  return out;
}

std::size_t read_size(const json& j, const char* key) {
  if (!j.is_number_unsigned())
    fail(ErrorCode::config, std::string("'") + key + "' must be a non-negative integer");
  return j.get<std::size_t>();
}

}  // namespace

ModelConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::config, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::config, "config must be a JSON object");
  static const std::set<std::string> known{"input_h", "input_w", "patch_size", "dims",
                                           "depths", "hr_depths", "hr_enabled", "head",
                                           "factorizations", "mixer", "embed", "merge"};
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) fail(ErrorCode::config, "unknown config key '" + key + "'");

  ModelConfig c;
  try {
    if (j.contains("input_h")) c.input_h = read_size(j.at("input_h"), "input_h");
    if (j.contains("input_w")) c.input_w = read_size(j.at("input_w"), "input_w");
    if (j.contains("patch_size")) c.patch_size = read_size(j.at("patch_size"), "patch_size");
    if (j.contains("dims")) c.dims = read_sizes<4>(j.at("dims"), "dims");
    if (j.contains("depths")) c.depths = read_sizes<4>(j.at("depths"), "depths");
    if (j.contains("hr_depths")) c.hr_depths = read_sizes<3>(j.at("hr_depths"), "hr_depths");
    if (j.contains("hr_enabled")) c.hr_enabled = j.at("hr_enabled").get<bool>();
    if (j.contains("head")) {
      const json& h = j.at("head");
      const std::string kind = h.at("kind").get<std::string>();
      if (kind == "classify") {
        c.head = HeadKind::classify;
        c.classes = read_size(h.at("classes"), "head.classes");
      } else if (kind == "features") {
        c.head = HeadKind::features;
        c.classes = h.contains("classes") ? read_size(h.at("classes"), "head.classes") : 0;
      } else {
        fail(ErrorCode::config, "head.kind must be 'classify' or 'features'");
      }
    }
    if (j.contains("factorizations")) {
      const json& f = j.at("factorizations");
      if (!f.is_array() || f.size() != 4)
        fail(ErrorCode::config, "'factorizations' must be an array of 4 entries");
      for (std::size_t i = 0; i < 4; ++i) {
        if (f[i].is_null()) continue;
        const auto pair = read_sizes<2>(f[i], "factorizations[i]");
        c.factorizations[i] = {pair[0], pair[1]};
      }
    }
    if (j.contains("mixer")) c.mixer = parse_mixer_kind(j.at("mixer").get<std::string>());
    if (j.contains("embed")) {
      const std::string e = j.at("embed").get<std::string>();
      if (e == "patchify") c.embed = EmbedKind::patchify;
      else if (e == "overlap7") c.embed = EmbedKind::overlap7;
      else fail(ErrorCode::config, "embed must be 'patchify' or 'overlap7'");
    }
    if (j.contains("merge")) {
      const std::string m = j.at("merge").get<std::string>();
      if (m == "linear2x2") c.merge = MergeKind::linear2x2;
      else if (m == "conv3x3") c.merge = MergeKind::conv3x3;
      else fail(ErrorCode::config, "merge must be 'linear2x2' or 'conv3x3'");
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::config, std::string("malformed config: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorCode::config, e.what());
  }
  c.validate();
  return c;
}

std::string config_to_json(const ModelConfig& c, int indent) {
  json j;
  j["input_h"] = c.input_h;
  j["input_w"] = c.input_w;
  j["patch_size"] = c.patch_size;
  j["dims"] = c.dims;
  j["depths"] = c.depths;
  j["hr_depths"] = c.hr_depths;
  j["hr_enabled"] = c.hr_enabled;
  j["head"] = {{"kind", to_string(c.head)}, {"classes", c.classes}};
  json f = json::array();
  for (std::size_t i = 0; i < 4; ++i) {
    const Factorization r = c.factorization(i);
    f.push_back({r.rows, r.cols});
  }
  j["factorizations"] = f;
  j["mixer"] = to_string(c.mixer);
  j["embed"] = to_string(c.embed);
  j["merge"] = to_string(c.merge);
  return j.dump(indent);
}

ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string config_hash(const ModelConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_to_json(config))));
  return buf;
}

}  // namespace potter
