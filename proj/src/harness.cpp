// Copyright 2026 The fedpad-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedpad/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <set>
#include <sstream>

#include "fedpad/binary_io.hpp"
#include "fedpad/error.hpp"
#include "fedpad/federation.hpp"
#include "fedpad/rng.hpp"

namespace fedpad {

using nlohmann::json;

namespace {

// Domain id given to the pooled dataset of the "all" baseline.
constexpr std::uint32_t kPooledDomainId = 0xFFFFFFF0u;

// --- strict JSON reading ---------------------------------------------------

/// Reads known keys from one JSON object and rejects the rest.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  void get(const char* key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) throw ConfigError(where(key) + " must be a boolean");
      out = v->get<bool>();
    }
  }
  void get(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) throw ConfigError(where(key) + " must be a number");
      out = v->get<double>();
    }
  }
  template <typename U>
    requires std::is_unsigned_v<U>
  void get(const char* key, U& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(where(key) + " must be a non-negative integer");
      const auto raw = v->get<std::uint64_t>();
      if (raw > std::numeric_limits<U>::max()) throw ConfigError(where(key) + " is too large");
      out = static_cast<U>(raw);
    }
  }
  void get(const char* key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) throw ConfigError(where(key) + " must be a string");
      out = v->get<std::string>();
    }
  }
  template <typename T>
  void get_array(const char* key, std::vector<T>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) throw ConfigError(where(key) + " must be an array");
      out.clear();
      for (const auto& item : *v) {
        if constexpr (std::is_same_v<T, std::string>) {
          if (!item.is_string()) throw ConfigError(where(key) + " must hold strings");
        } else {
          if (!item.is_number_unsigned()) throw ConfigError(where(key) + " must hold non-negative integers");
        }
        out.push_back(item.get<T>());
      }
    }
  }
  void get3(const char* key, std::array<double, 3>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array() || v->size() != 3) throw ConfigError(where(key) + " must be 3 numbers");
      for (std::size_t i = 0; i < 3; ++i) {
        if (!(*v)[i].is_number()) throw ConfigError(where(key) + " must be 3 numbers");
        out[i] = (*v)[i].get<double>();
      }
    }
  }
  /// Nested object, or nullptr when absent.
  const json* child(const char* key) { return take(key); }

  std::string where(const char* key = nullptr) const {
    std::string s = path_.empty() ? "config" : path_;
    if (key) s += std::string(".") + key;
    return s;
  }

  /// Throws ConfigError naming the first key that was never read.
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown key '" + where(k.c_str()) + "'");
    }
  }

 private:
  const json* take(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_signal(const json& j, const std::string& path, SignalSpec& s) {
  Fields f(j, path);
  f.get("face_level", s.face_level);
  f.get("real_relief", s.real_relief);
  f.get("spoof_relief", s.spoof_relief);
  f.get("grid_amplitude", s.grid_amplitude);
  f.get("bump_sigma", s.bump_sigma);
  f.get("amp_lo", s.amp_lo);
  f.get("amp_hi", s.amp_hi);
  f.get3("skin_tone", s.skin_tone);
  f.finish();
}

void read_recipe(const json& j, const std::string& path, FamilyRecipe& r) {
  Fields f(j, path);
  if (const json* s = f.child("signal")) read_signal(*s, path + ".signal", r.signal);
  f.get("image_h", r.image_h);
  f.get("image_w", r.image_w);
  f.get("depth_h", r.depth_h);
  f.get("depth_w", r.depth_w);
  f.get("tint_magnitude", r.tint_magnitude);
  f.get("tint_spread", r.tint_spread);
  f.get("held_out_tint", r.held_out_tint);
  f.get("color_shift_max", r.color_shift_max);
  f.get("gain_lo", r.gain_lo);
  f.get("gain_hi", r.gain_hi);
  f.get("held_out_gain", r.held_out_gain);
  f.get("noise_lo", r.noise_lo);
  f.get("noise_hi", r.noise_hi);
  f.get("held_out_noise", r.held_out_noise);
  f.get("texture_amplitude", r.texture_amplitude);
  f.get("moire_amplitude", r.moire_amplitude);
  f.get("moire_freq_lo", r.moire_freq_lo);
  f.get("moire_freq_hi", r.moire_freq_hi);
  f.get("training_textures", r.training_textures);
  f.finish();
}

json signal_json(const SignalSpec& s) {
  return {{"face_level", s.face_level},     {"real_relief", s.real_relief},
          {"spoof_relief", s.spoof_relief}, {"grid_amplitude", s.grid_amplitude},
          {"bump_sigma", s.bump_sigma},     {"amp_lo", s.amp_lo},
          {"amp_hi", s.amp_hi},         {"skin_tone", s.skin_tone}};
}

json recipe_json(const FamilyRecipe& r) {
  return {{"signal", signal_json(r.signal)},
          {"image_h", r.image_h},
          {"image_w", r.image_w},
          {"depth_h", r.depth_h},
          {"depth_w", r.depth_w},
          {"tint_magnitude", r.tint_magnitude},
          {"tint_spread", r.tint_spread},
          {"held_out_tint", r.held_out_tint},
          {"color_shift_max", r.color_shift_max},
          {"gain_lo", r.gain_lo},
          {"gain_hi", r.gain_hi},
          {"held_out_gain", r.held_out_gain},
          {"noise_lo", r.noise_lo},
          {"noise_hi", r.noise_hi},
          {"held_out_noise", r.held_out_noise},
          {"texture_amplitude", r.texture_amplitude},
          {"moire_amplitude", r.moire_amplitude},
          {"moire_freq_lo", r.moire_freq_lo},
          {"moire_freq_hi", r.moire_freq_hi},
          {"training_textures", r.training_textures}};
}

void validate(const ExperimentConfig& c) {
  c.model.validate();
  if (c.rounds == 0) throw ConfigError("rounds must be at least 1");
  if (!(c.optimizer.lr >= 0.0)) throw ConfigError("optimizer.lr must be non-negative");
  if (c.optimizer.kind != "adam" && c.optimizer.kind != "sgd") {
    throw ConfigError("optimizer.kind must be 'adam' or 'sgd', got '" + c.optimizer.kind + "'");
  }
  if (c.mode != Mode::kFedGPad && !(c.ablation == LossFlags{})) {
    throw ConfigError(std::string("ablation flags only apply to fedgpad, mode is ") +
                      mode_name(c.mode));
  }
  if (c.data.synthetic) {
    const auto& g = c.data.generator;
    if (g.num_domains == 0) throw ConfigError("data.num_domains must be at least 1");
    if (g.per_domain < 4 || g.held_out_size < 4) {
      throw ConfigError("data.per_domain and data.held_out_size must be at least 4");
    }
    const auto& r = g.recipe;
    if (r.image_h != c.model.image_h || r.image_w != c.model.image_w ||
        r.depth_h != c.model.depth_h || r.depth_w != c.model.depth_w) {
      throw ConfigError("data.recipe image/depth size disagrees with model");
    }
  } else if (c.data.paths.empty()) {
    throw ConfigError("data.paths is empty");
  }
}

// --- training helpers ------------------------------------------------------

Rng run_rng(const ExperimentConfig& cfg) { return Rng(cfg.seed, 0); }

DataCenter make_trainer(const ExperimentConfig& cfg, DomainDataset data, AnyModel model) {
  LocalTraining lt{cfg.local_epochs, cfg.effective_batch_size(), cfg.ablation};
  Rng rng = run_rng(cfg).fork("dc", data.domain_id());
  return DataCenter(std::move(data), std::move(model), cfg.optimizer.make(), lt, rng);
}

void append_telemetry(std::vector<TelemetryRow>& out, std::uint64_t round,
                      const DataCenterReport& r) {
  out.push_back({round, r.data_center, r.mean.cls, r.mean.dep, r.mean.rec, r.mean.diff});
}

/// Trains one monolithic model without any exchange (single, all).
MonolithicModel train_alone(const ExperimentConfig& cfg, const DomainDataset& data,
                            std::vector<TelemetryRow>& telemetry) {
  DataCenter dc = make_trainer(cfg, data, build_monolithic(cfg.model, run_rng(cfg).fork("model")));
  for (std::size_t t = 0; t < cfg.rounds; ++t) {
    dc.train_local(t);
    append_telemetry(telemetry, t, dc.last_report());
  }
  return std::get<MonolithicModel>(dc.model());
}

/// Per-sample mean of several score vectors, combined in sorted order so
/// identical members reproduce their common score exactly.
Tensor fused_scores(const std::vector<Tensor>& members) {
  Tensor out = members.front();
  std::vector<double> col(members.size());
  const double inv = 1.0 / static_cast<double>(members.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < members.size(); ++k) col[k] = members[k][i];
    std::sort(col.begin(), col.end());
    double acc = 0.0;
    for (std::size_t k = 1; k < col.size(); ++k) acc += col[k] - col[0];
    out[i] = col[0] + acc * inv;
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string domain_label(std::uint32_t d) { return std::to_string(d); }

}  // namespace

// --- enums, optimizer ------------------------------------------------------

const char* mode_name(Mode mode) noexcept {
  switch (mode) {
    case Mode::kSingle: return "single";
    case Mode::kFused: return "fused";
    case Mode::kAll: return "all";
    case Mode::kFedPad: return "fedpad";
    case Mode::kFedGPad: return "fedgpad";
  }
  return "?";
}

Mode parse_mode(const std::string& name) {
  for (Mode m : {Mode::kSingle, Mode::kFused, Mode::kAll, Mode::kFedPad, Mode::kFedGPad}) {
    if (name == mode_name(m)) return m;
  }
  throw ConfigError("unknown mode '" + name + "' (single, fused, all, fedpad, fedgpad)");
}

nn::Optimizer OptimizerConfig::make() const {
  if (kind == "sgd") return nn::Optimizer(nn::SgdSpec{lr});
  if (kind == "adam") return nn::Optimizer(nn::AdamSpec{lr, beta1, beta2, eps});
  throw ConfigError("unknown optimizer '" + kind + "'");
}

std::size_t ExperimentConfig::effective_batch_size() const {
  if (batch_size != 0) return batch_size;
  return mode == Mode::kFedGPad ? 8 : 16;
}

// --- config I/O ------------------------------------------------------------

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Fields f(j, "");
  std::string mode = mode_name(c.mode);
  f.get("mode", mode);
  c.mode = parse_mode(mode);
  f.get("seed", c.seed);
  if (const json* u = f.child("user_domain")) {
    if (!u->is_null()) {
      if (!u->is_number_unsigned()) throw ConfigError("config.user_domain must be a non-negative integer");
      c.user_domain = u->get<std::uint32_t>();
    }
  }
  f.get_array("train_domains", c.train_domains);
  f.get("rounds", c.rounds);
  f.get("local_epochs", c.local_epochs);
  f.get("batch_size", c.batch_size);
  f.get("concurrent", c.concurrent);
  f.get("output_dir", c.output_dir);
  if (const json* o = f.child("optimizer")) {
    Fields g(*o, "config.optimizer");
    g.get("kind", c.optimizer.kind);
    g.get("lr", c.optimizer.lr);
    g.get("beta1", c.optimizer.beta1);
    g.get("beta2", c.optimizer.beta2);
    g.get("eps", c.optimizer.eps);
    g.finish();
  }
  if (const json* m = f.child("model")) {
    Fields g(*m, "config.model");
    g.get("image_h", c.model.image_h);
    g.get("image_w", c.model.image_w);
    g.get("channels", c.model.channels);
    g.get("conv1", c.model.conv1);
    g.get("conv2", c.model.conv2);
    g.get("depth_h", c.model.depth_h);
    g.get("depth_w", c.model.depth_w);
    g.get("decoder_channels", c.model.decoder_channels);
    g.get("classifier_hidden", c.model.classifier_hidden);
    g.finish();
  }
  if (const json* a = f.child("ablation")) {
    Fields g(*a, "config.ablation");
    g.get("diff", c.ablation.diff);
    g.get("rec", c.ablation.rec);
    g.get("dep", c.ablation.dep);
    g.finish();
  }
  if (const json* d = f.child("data")) {
    Fields g(*d, "config.data");
    std::string source = "synthetic";
    g.get("source", source);
    if (source != "synthetic" && source != "paths") {
      throw ConfigError("config.data.source must be 'synthetic' or 'paths'");
    }
    c.data.synthetic = source == "synthetic";
    g.get_array("paths", c.data.paths);
    g.get("num_domains", c.data.generator.num_domains);
    g.get("per_domain", c.data.generator.per_domain);
    g.get("held_out_size", c.data.generator.held_out_size);
    if (const json* r = g.child("recipe")) read_recipe(*r, "config.data.recipe", c.data.generator.recipe);
    g.finish();
  }
  f.finish();
  validate(c);
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json data = {{"source", c.data.synthetic ? "synthetic" : "paths"}};
  if (c.data.synthetic) {
    data["num_domains"] = c.data.generator.num_domains;
    data["per_domain"] = c.data.generator.per_domain;
    data["held_out_size"] = c.data.generator.held_out_size;
    data["recipe"] = recipe_json(c.data.generator.recipe);
  } else {
    data["paths"] = c.data.paths;
  }
  return {{"mode", mode_name(c.mode)},
          {"seed", c.seed},
          {"user_domain", c.user_domain ? json(*c.user_domain) : json(nullptr)},
          {"train_domains", c.train_domains},
          {"rounds", c.rounds},
          {"local_epochs", c.local_epochs},
          {"batch_size", c.batch_size},
          {"concurrent", c.concurrent},
          {"output_dir", c.output_dir},
          {"optimizer",
           {{"kind", c.optimizer.kind},
            {"lr", c.optimizer.lr},
            {"beta1", c.optimizer.beta1},
            {"beta2", c.optimizer.beta2},
            {"eps", c.optimizer.eps}}},
          {"model",
           {{"image_h", c.model.image_h},
            {"image_w", c.model.image_w},
            {"channels", c.model.channels},
            {"conv1", c.model.conv1},
            {"conv2", c.model.conv2},
            {"depth_h", c.model.depth_h},
            {"depth_w", c.model.depth_w},
            {"decoder_channels", c.model.decoder_channels},
            {"classifier_hidden", c.model.classifier_hidden}}},
          {"ablation", {{"diff", c.ablation.diff}, {"rec", c.ablation.rec}, {"dep", c.ablation.dep}}},
          {"data", data}};
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const Error& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = config_to_json(cfg);
  j.erase("output_dir");
  j.erase("concurrent");
  // Dataset contents behind paths are hashed by location only.
  return hex64(fnv1a64(j.dump()));
}

// --- domains ---------------------------------------------------------------

std::vector<DomainDataset> load_domains(const ExperimentConfig& cfg) {
  std::vector<DomainDataset> out;
  if (cfg.data.synthetic) {
    const auto& g = cfg.data.generator;
    DomainFamily fam = generate_family(g.num_domains, g.per_domain, g.recipe, cfg.seed, g.held_out_size);
    out = std::move(fam.training);
    out.push_back(std::move(fam.held_out));
  } else {
    for (const auto& p : cfg.data.paths) out.push_back(load_dataset(p));
  }
  std::set<std::uint32_t> ids;
  for (const auto& d : out) {
    if (!ids.insert(d.domain_id()).second) {
      throw ConfigError("duplicate domain id " + std::to_string(d.domain_id()));
    }
  }
  return out;
}

// --- run -------------------------------------------------------------------

RunRecord run_on(const ExperimentConfig& cfg, const std::vector<DomainDataset>& training,
                 const DomainDataset& user, std::shared_ptr<AccessLog> audit) {
  validate(cfg);
  if (training.empty()) throw ConfigError("no training domains");
  if (cfg.mode == Mode::kSingle && training.size() != 1) {
    throw ConfigError("single mode needs exactly one training domain, got " +
                      std::to_string(training.size()));
  }
  for (const auto& d : training) {
    if (d.domain_id() == user.domain_id()) {
      throw ConfigError("user domain " + std::to_string(user.domain_id()) +
                        " is also a training domain");
    }
  }

  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.config_hash = config_hash(cfg);
  rec.config = config_to_json(cfg);
  rec.mode = cfg.mode;
  rec.user_domain = user.domain_id();
  for (const auto& d : training) rec.train_domains.push_back(d.domain_id());

  std::vector<DomainDataset> local = training;
  DomainDataset user_data = user;
  if (audit) {
    for (auto& d : local) d.attach_audit(audit);
    user_data.attach_audit(audit);
  }

  // Development pool: every training domain, read by the evaluator.
  std::vector<const DomainDataset*> parts;
  for (const auto& d : local) parts.push_back(&d);
  const Batch user_batch = user_data.all("eval");
  std::vector<Batch> dev_batches;
  for (const auto* d : parts) dev_batches.push_back(d->all("eval"));

  // Scores a predictor on the user domain and on the pooled dev domains.
  auto score = [&](const auto& predict) {
    std::vector<metrics::Scored> dev_items;
    for (const auto& b : dev_batches) {
      const Tensor s = predict(b.images);
      for (std::size_t i = 0; i < s.size(); ++i) {
        dev_items.push_back({s[i], static_cast<int>(b.labels[i])});
      }
    }
    metrics::ScoreSet dev{std::move(dev_items), metrics::ScoreSource::kDataCenterPool};
    const metrics::ScoreSet usr =
        metrics::ScoreSet::from(predict(user_batch.images), user_batch.labels, metrics::ScoreSource::kUser);
    return metrics::evaluate(usr, dev);
  };

  switch (cfg.mode) {
    case Mode::kSingle: {
      const MonolithicModel m = train_alone(cfg, local.front(), rec.telemetry);
      rec.report = score([&](const Tensor& x) { return m.predict(x); });
      break;
    }
    case Mode::kAll: {
      DomainDataset pooled = union_of(parts, kPooledDomainId);
      if (audit) pooled.attach_audit(audit);
      const MonolithicModel m = train_alone(cfg, pooled, rec.telemetry);
      rec.report = score([&](const Tensor& x) { return m.predict(x); });
      break;
    }
    case Mode::kFused: {
      std::vector<MonolithicModel> members;
      for (const auto& d : local) members.push_back(train_alone(cfg, d, rec.telemetry));
      rec.report = score([&](const Tensor& x) {
        std::vector<Tensor> s;
        for (const auto& m : members) s.push_back(m.predict(x));
        return fused_scores(s);
      });
      break;
    }
    case Mode::kFedPad:
    case Mode::kFedGPad: {
      const bool gen = cfg.mode == Mode::kFedGPad;
      const Rng init = run_rng(cfg).fork("model");
      const AnyModel initial = gen ? AnyModel(build_disentangled(cfg.model, init))
                                   : AnyModel(build_monolithic(cfg.model, init));
      const AggregationMode agg = gen ? AggregationMode::kInvariantOnly : AggregationMode::kFull;
      std::vector<DataCenter> dcs;
      for (const auto& d : local) dcs.push_back(make_trainer(cfg, d, initial));
      Server server(model_params(initial), agg);
      FederationOptions opts;
      opts.concurrent = cfg.concurrent;
      const FederationResult res = run_rounds(server, dcs, cfg.rounds, opts);
      for (const auto& r : res.rounds) {
        for (const auto& dc : r.data_centers) append_telemetry(rec.telemetry, r.round, dc);
      }
      const MonolithicModel m(cfg.model, user_artifact(res.global, agg));
      rec.report = score([&](const Tensor& x) { return m.predict(x); });
      break;
    }
  }
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

RunRecord run(const ExperimentConfig& cfg, std::shared_ptr<AccessLog> audit) {
  validate(cfg);
  std::vector<DomainDataset> domains = load_domains(cfg);
  std::uint32_t user_id;
  if (cfg.user_domain) {
    user_id = *cfg.user_domain;
  } else if (cfg.data.synthetic) {
    user_id = static_cast<std::uint32_t>(cfg.data.generator.num_domains);
  } else {
    throw ConfigError("user_domain is required for path data");
  }
  const DomainDataset* user = nullptr;
  for (const auto& d : domains) {
    if (d.domain_id() == user_id) user = &d;
  }
  if (!user) throw ConfigError("user domain " + std::to_string(user_id) + " does not exist");

  std::vector<DomainDataset> training;
  if (cfg.train_domains.empty()) {
    for (const auto& d : domains) {
      if (d.domain_id() != user_id) training.push_back(d);
    }
  } else {
    std::set<std::uint32_t> seen;
    for (auto id : cfg.train_domains) {
      if (!seen.insert(id).second) throw ConfigError("train_domains lists " + std::to_string(id) + " twice");
      auto it = std::find_if(domains.begin(), domains.end(),
                             [&](const DomainDataset& d) { return d.domain_id() == id; });
      if (it == domains.end()) throw ConfigError("training domain " + std::to_string(id) + " does not exist");
      training.push_back(*it);
    }
  }
  return run_on(cfg, training, *user, std::move(audit));
}

// --- outputs ---------------------------------------------------------------

std::string summary_csv(const std::vector<RunRecord>& runs, bool average) {
  using metrics::format_number;
  std::ostringstream os;
  os << "mode,user_domain,hter,eer,auc\n";
  std::vector<std::string> modes;
  for (const auto& r : runs) {
    os << mode_name(r.mode) << "," << r.user_domain << "," << format_number(r.report.hter) << ","
       << format_number(r.report.eer) << "," << format_number(r.report.auc) << "\n";
    if (std::find(modes.begin(), modes.end(), mode_name(r.mode)) == modes.end()) {
      modes.push_back(mode_name(r.mode));
    }
  }
  if (average) {
    for (const auto& m : modes) {
      double h = 0, e = 0, a = 0;
      std::size_t n = 0;
      for (const auto& r : runs) {
        if (m != mode_name(r.mode)) continue;
        h += r.report.hter;
        e += r.report.eer;
        a += r.report.auc;
        ++n;
      }
      const double k = static_cast<double>(n);
      os << m << ",avg," << format_number(h / k) << "," << format_number(e / k) << ","
         << format_number(a / k) << "\n";
    }
  }
  return os.str();
}

std::string telemetry_csv(const std::vector<TelemetryRow>& rows) {
  using metrics::format_number;
  std::ostringstream os;
  os << "round,dc,L_Cls,L_Dep,L_Rec,L_Diff\n";
  for (const auto& r : rows) {
    os << r.round << "," << r.data_center << "," << format_number(r.cls) << ","
       << format_number(r.dep) << "," << format_number(r.rec) << "," << format_number(r.diff)
       << "\n";
  }
  return os.str();
}

json record_to_json(const RunRecord& r) {
  json roc = json::array();
  for (const auto& p : r.report.roc) roc.push_back({p.fpr, p.tpr, p.threshold});
  json tel = json::array();
  for (const auto& t : r.telemetry) {
    tel.push_back({t.round, t.data_center, t.cls, t.dep, t.rec, t.diff});
  }
  return {{"format", "fedpad-run"},
          {"version", 1},
          {"config_hash", r.config_hash},
          {"config", r.config},
          {"mode", mode_name(r.mode)},
          {"user_domain", r.user_domain},
          {"train_domains", r.train_domains},
          {"telemetry", tel},
          {"report",
           {{"auc", r.report.auc},
            {"eer", r.report.eer},
            {"hter", r.report.hter},
            {"threshold_used", r.report.threshold_used},
            {"roc", roc}}},
          {"wall_seconds", r.wall_seconds}};
}

RunRecord record_from_json(const json& j) {
  try {
    if (j.at("format") != "fedpad-run" || j.at("version") != 1) {
      throw SchemaError("not a version 1 run record");
    }
    RunRecord r;
    r.config_hash = j.at("config_hash").get<std::string>();
    r.config = j.at("config");
    r.mode = parse_mode(j.at("mode").get<std::string>());
    r.user_domain = j.at("user_domain").get<std::uint32_t>();
    r.train_domains = j.at("train_domains").get<std::vector<std::uint32_t>>();
    for (const auto& t : j.at("telemetry")) {
      r.telemetry.push_back({t.at(0).get<std::uint64_t>(), t.at(1).get<std::uint32_t>(),
                             t.at(2).get<double>(), t.at(3).get<double>(), t.at(4).get<double>(),
                             t.at(5).get<double>()});
    }
    const json& rep = j.at("report");
    r.report.auc = rep.at("auc").get<double>();
    r.report.eer = rep.at("eer").get<double>();
    r.report.hter = rep.at("hter").get<double>();
    r.report.threshold_used = rep.at("threshold_used").get<double>();
    for (const auto& p : rep.at("roc")) {
      r.report.roc.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
    }
    r.wall_seconds = j.at("wall_seconds").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed run record: ") + e.what());
  }
}

namespace {

void write_record(const RunRecord& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "runs");
  io::write_text(dir / "runs" / (r.config_hash + ".json"), record_to_json(r).dump(1) + "\n");
}

void write_per_domain(const RunRecord& r, const std::filesystem::path& dir, const std::string& tag,
                      bool telemetry_suffix) {
  io::write_text(dir / ("roc_" + tag + ".csv"), metrics::roc_csv(r.report.roc));
  io::write_text(dir / ("report_" + tag + ".csv"), metrics::report_csv(r.report));
  io::write_text(dir / (telemetry_suffix ? "telemetry_" + tag + ".csv" : "telemetry.csv"),
                 telemetry_csv(r.telemetry));
}

}  // namespace

void write_run_outputs(const RunRecord& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_per_domain(r, dir, domain_label(r.user_domain), false);
  io::write_text(dir / "summary.csv", summary_csv({r}, false));
  write_record(r, dir);
}

SweepResult sweep_leave_one_out(const ExperimentConfig& base, std::vector<std::uint32_t> domains) {
  validate(base);
  std::sort(domains.begin(), domains.end());
  if (std::adjacent_find(domains.begin(), domains.end()) != domains.end()) {
    throw ConfigError("sweep domain list has duplicates");
  }
  if (domains.size() < 2) throw ConfigError("sweep needs at least two domains");
  if (base.mode == Mode::kSingle && domains.size() != 2) {
    throw ConfigError("single mode sweeps need exactly two domains");
  }
  const std::filesystem::path out = base.output_dir;
  std::filesystem::create_directories(out);

  std::vector<DomainDataset> all = load_domains(base);
  auto find = [&](std::uint32_t id) -> const DomainDataset& {
    for (const auto& d : all) {
      if (d.domain_id() == id) return d;
    }
    throw ConfigError("sweep domain " + std::to_string(id) + " does not exist");
  };
  for (auto id : domains) (void)find(id);

  SweepResult res;
  for (auto user : domains) {
    ExperimentConfig cfg = base;
    cfg.user_domain = user;
    cfg.train_domains.clear();
    for (auto d : domains) {
      if (d != user) cfg.train_domains.push_back(d);
    }
    const std::string hash = config_hash(cfg);
    const auto record_path = out / "runs" / (hash + ".json");
    RunRecord rec;
    if (std::filesystem::exists(record_path)) {
      rec = record_from_json(json::parse(io::read_text(record_path)));
    } else {
      std::vector<DomainDataset> training;
      for (auto d : cfg.train_domains) training.push_back(find(d));
      rec = run_on(cfg, training, find(user));
      write_record(rec, out);
    }
    write_per_domain(rec, out, domain_label(user), true);
    res.runs.push_back(std::move(rec));
  }
  res.summary = summary_csv(res.runs, true);
  io::write_text(out / "summary.csv", res.summary);
  return res;
}

std::vector<RunRecord> load_records(const std::filesystem::path& dir) {
  std::vector<RunRecord> out;
  const auto runs = dir / "runs";
  if (!std::filesystem::is_directory(runs)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(runs)) {
    if (entry.path().extension() != ".json") continue;
    json j;
    try {
      j = json::parse(io::read_text(entry.path()));
    } catch (const json::parse_error& e) {
      throw SchemaError(entry.path().string() + ": " + e.what());
    }
    out.push_back(record_from_json(j));
  }
  std::sort(out.begin(), out.end(), [](const RunRecord& a, const RunRecord& b) {
    return std::tie(a.mode, a.user_domain, a.config_hash) <
           std::tie(b.mode, b.user_domain, b.config_hash);
  });
  return out;
}

std::size_t render_report(const std::filesystem::path& dir, std::optional<Mode> only) {
  std::vector<RunRecord> recs = load_records(dir);
  if (only) {
    std::erase_if(recs, [&](const RunRecord& r) { return r.mode != *only; });
  }
  std::set<Mode> modes;
  for (const auto& r : recs) modes.insert(r.mode);
  for (const auto& r : recs) {
    const std::string tag = modes.size() > 1
                                ? std::string(mode_name(r.mode)) + "_" + domain_label(r.user_domain)
                                : domain_label(r.user_domain);
    io::write_text(dir / ("roc_" + tag + ".csv"), metrics::roc_csv(r.report.roc));
  }
  io::write_text(dir / "summary.csv", summary_csv(recs, recs.size() > 1));
  return recs.size();
}

}  // namespace fedpad
