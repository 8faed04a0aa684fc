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

#include "fedpad/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "fedpad/binary_io.hpp"
#include "fedpad/error.hpp"

namespace fedpad {

namespace {

constexpr std::uint32_t kDatasetMagic = 0x53445046;  // "FPDS"
constexpr std::uint32_t kDatasetVersion = 1;
constexpr const char* kSchemaFile = "schema.json";
constexpr const char* kBlobFile = "samples.bin";
constexpr std::uint32_t kHeldOutStream = 0xFFFFFFFFu;

using Vec3 = std::array<double, 3>;

Vec3 normalized(Vec3 v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (n == 0.0) return {1.0, 0.0, 0.0};
  return {v[0] / n, v[1] / n, v[2] / n};
}

Vec3 random_unit(Rng& rng) {
  return normalized({rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1)});
}

// Tints live in the chroma plane (orthogonal to gray) so they never change
// luminance, which carries the liveness relief.
constexpr Vec3 kChromaU = {0.7071067811865476, -0.7071067811865476, 0.0};
constexpr Vec3 kChromaV = {0.4082482904638631, 0.4082482904638631, -0.8164965809277261};
constexpr double kGoldenAngle = 2.399963229728653;

// Shared tint component of every training domain.
Vec3 chroma_axis() { return kChromaU; }

// Shared axis plus a per-domain rotating chroma component weighted by
// tint_spread. Successive indices rotate by the golden angle so any prefix
// of domains is well spread.
double tint_angle(std::uint64_t seed) {
  Rng rng = Rng(seed, 0).fork("domain.tint");
  return 2.0 * 3.141592653589793 * rng.uniform();
}

Vec3 training_tint_direction(const FamilyRecipe& f, std::uint64_t seed, std::uint32_t index) {
  const double theta = tint_angle(seed) + kGoldenAngle * index;
  const Vec3 a = chroma_axis();
  Vec3 d{};
  for (int c = 0; c < 3; ++c) {
    d[c] = a[c] + f.tint_spread * (std::cos(theta) * kChromaU[c] + std::sin(theta) * kChromaV[c]);
  }
  return normalized(d);
}

double texture(std::uint32_t id, double y, double x) {
  const double angle = 2.399963229728653 * static_cast<double>(id);  // golden angle
  const double freq = 0.55 + 0.17 * static_cast<double>(id % 5);
  const double phase = 1.3 * static_cast<double>(id);
  return std::sin(freq * (x * std::cos(angle) + y * std::sin(angle)) + phase);
}

double bump(const SignalSpec& s, std::size_t h, std::size_t w, double y, double x) {
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  const double r2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
  return std::exp(-r2 / (2.0 * s.bump_sigma * s.bump_sigma));
}

// Block means of the bump over the depth grid, scaled so the peak block is 1.
std::vector<double> depth_template(const FamilyRecipe& f) {
  const std::size_t bh = f.image_h / f.depth_h, bw = f.image_w / f.depth_w;
  std::vector<double> t(f.depth_h * f.depth_w, 0.0);
  for (std::size_t i = 0; i < f.depth_h; ++i)
    for (std::size_t j = 0; j < f.depth_w; ++j) {
      double s = 0.0;
      for (std::size_t y = i * bh; y < (i + 1) * bh; ++y)
        for (std::size_t x = j * bw; x < (j + 1) * bw; ++x)
          s += bump(f.signal, f.image_h, f.image_w, static_cast<double>(y), static_cast<double>(x));
      t[i * f.depth_w + j] = s / static_cast<double>(bh * bw);
    }
  const double peak = *std::max_element(t.begin(), t.end());
  for (double& v : t) v /= peak;
  return t;
}

void check_family(const FamilyRecipe& f) {
  if (f.image_h == 0 || f.image_w == 0 || f.depth_h == 0 || f.depth_w == 0 ||
      f.image_h % f.depth_h != 0 || f.image_w % f.depth_w != 0) {
    throw ParameterError("family recipe: depth grid must evenly divide a nonzero image");
  }
  if (!(f.gain_lo <= f.gain_hi) || !(f.noise_lo <= f.noise_hi) || f.noise_lo < 0.0 ||
      !(f.signal.amp_lo <= f.signal.amp_hi) || f.signal.bump_sigma <= 0.0 ||
      !(f.moire_freq_lo <= f.moire_freq_hi) || f.moire_amplitude < 0.0) {
    throw ParameterError("family recipe: invalid ranges");
  }
  if (!(f.tint_spread >= 0.0)) throw ParameterError("family recipe: tint_spread must be >= 0");
}

nlohmann::json recipe_to_json(const DomainRecipe& r) {
  return {{"domain_id", r.domain_id},
          {"color_shift", r.color_shift},
          {"spoof_tint", r.spoof_tint},
          {"texture_id", r.texture_id},
          {"texture_amplitude", r.texture_amplitude},
          {"moire_amplitude", r.moire_amplitude},
          {"moire_frequency", r.moire_frequency},
          {"moire_angle", r.moire_angle},
          {"illumination_gain", r.illumination_gain},
          {"noise_std", r.noise_std}};
}

DomainRecipe recipe_from_json(const nlohmann::json& j) {
  DomainRecipe r;
  r.domain_id = j.at("domain_id").get<std::uint32_t>();
  r.color_shift = j.at("color_shift").get<Vec3>();
  r.spoof_tint = j.at("spoof_tint").get<Vec3>();
  r.texture_id = j.at("texture_id").get<std::uint32_t>();
  r.texture_amplitude = j.at("texture_amplitude").get<double>();
  r.moire_amplitude = j.at("moire_amplitude").get<double>();
  r.moire_frequency = j.at("moire_frequency").get<double>();
  r.moire_angle = j.at("moire_angle").get<double>();
  r.illumination_gain = j.at("illumination_gain").get<double>();
  r.noise_std = j.at("noise_std").get<double>();
  return r;
}

}  // namespace

Tensor rgb_to_hsv(const Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.dim(2) != 3) {
    throw DimensionError("rgb_to_hsv: expected [h x w x 3], got " + shape_str(rgb.shape()));
  }
  Tensor hsv(rgb.shape());
  for (std::size_t p = 0; p < rgb.size() / 3; ++p) {
    const double r = rgb[3 * p], g = rgb[3 * p + 1], b = rgb[3 * p + 2];
    for (double v : {r, g, b}) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw RangeError("rgb_to_hsv: channel value " + std::to_string(v) + " outside [0, 1]");
      }
    }
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double delta = mx - mn;
    double h = 0.0;
    if (delta > 0.0) {
      if (mx == r) {
        h = (g - b) / delta;
        if (h < 0.0) h += 6.0;
      } else if (mx == g) {
        h = (b - r) / delta + 2.0;
      } else {
        h = (r - g) / delta + 4.0;
      }
      h /= 6.0;
      if (h >= 1.0) h -= 1.0;
    }
    hsv[3 * p] = h;
    hsv[3 * p + 1] = mx > 0.0 ? delta / mx : 0.0;
    hsv[3 * p + 2] = mx;
  }
  return hsv;
}

// --- AccessLog -------------------------------------------------------------

void AccessLog::record(const std::string& reader, std::uint32_t domain_id, std::size_t count) {
  std::lock_guard lock(mu_);
  reads_[reader][domain_id] += count;
}

std::map<std::string, std::map<std::uint32_t, std::size_t>> AccessLog::snapshot() const {
  std::lock_guard lock(mu_);
  return reads_;
}

void AccessLog::clear() {
  std::lock_guard lock(mu_);
  reads_.clear();
}

// --- DomainDataset ---------------------------------------------------------

DomainDataset::DomainDataset(std::uint32_t domain_id, std::vector<Sample> samples,
                             DomainRecipe recipe)
    : domain_id_(domain_id), samples_(std::move(samples)), recipe_(recipe) {}

std::size_t DomainDataset::count(int label) const {
  return static_cast<std::size_t>(std::count_if(
      samples_.begin(), samples_.end(), [label](const Sample& s) { return s.label == label; }));
}

Batch DomainDataset::gather(std::span<const std::size_t> indices, const std::string& reader) const {
  if (indices.empty()) throw ProtocolError("gather: empty batch from domain " + std::to_string(domain_id_));
  const Sample& first = samples_.at(indices[0]);
  const std::size_t per_image = first.image.size();
  const std::size_t per_depth = first.depth.size();
  const std::size_t n = indices.size();
  Shape image_shape{n};
  image_shape.insert(image_shape.end(), first.image.shape().begin(), first.image.shape().end());
  Batch batch{Tensor(image_shape), Tensor(Shape{n}), Tensor(Shape{n, per_depth})};
  for (std::size_t k = 0; k < n; ++k) {
    const Sample& s = samples_.at(indices[k]);
    std::copy(s.image.raw(), s.image.raw() + per_image, batch.images.raw() + k * per_image);
    std::copy(s.depth.raw(), s.depth.raw() + per_depth, batch.depth.raw() + k * per_depth);
    batch.labels[k] = static_cast<double>(s.label);
  }
  if (audit_) audit_->record(reader, domain_id_, n);
  return batch;
}

Batch DomainDataset::all(const std::string& reader) const {
  std::vector<std::size_t> idx(samples_.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return gather(idx, reader);
}

void DomainDataset::validate() const {
  if (samples_.empty()) throw SchemaError("domain " + std::to_string(domain_id_) + " has no samples");
  const Shape& is = samples_[0].image.shape();
  const Shape& ds = samples_[0].depth.shape();
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const Sample& s = samples_[i];
    const std::string where = "domain " + std::to_string(domain_id_) + " sample " + std::to_string(i);
    if (s.label != kSpoof && s.label != kReal) {
      throw SchemaError(where + ": label " + std::to_string(s.label) + " outside {0,1}");
    }
    if (s.image.shape() != is || s.depth.shape() != ds) throw SchemaError(where + ": inconsistent shapes");
    if (s.image.rank() != 3 || s.image.dim(2) != 6) throw SchemaError(where + ": image must be [h x w x 6]");
    for (double v : s.image.data()) {
      if (!(v >= 0.0 && v <= 1.0)) throw SchemaError(where + ": channel value outside [0,1]");
    }
    double depth_max = 0.0;
    for (double v : s.depth.data()) depth_max = std::max(depth_max, std::abs(v));
    if ((s.label == kSpoof) != (depth_max == 0.0)) {
      throw SchemaError(where + ": depth must be all-zero exactly for spoof samples");
    }
  }
  if (count(kReal) == 0 || count(kSpoof) == 0) {
    throw SchemaError("domain " + std::to_string(domain_id_) + " needs both real and spoof samples");
  }
}

// --- Generation ------------------------------------------------------------

DomainRecipe training_recipe(const FamilyRecipe& f, std::uint64_t seed, std::uint32_t index) {
  check_family(f);
  Rng rng = Rng(seed, 0).fork("domain.recipe", index);
  DomainRecipe r;
  r.domain_id = index;
  const Vec3 shift_dir = random_unit(rng);
  const double shift = rng.uniform(0.0, f.color_shift_max);
  const Vec3 tint_dir = training_tint_direction(f, seed, index);
  for (int c = 0; c < 3; ++c) {
    r.color_shift[c] = shift * shift_dir[c];
    r.spoof_tint[c] = f.tint_magnitude * tint_dir[c];
  }
  r.texture_id = static_cast<std::uint32_t>(rng.below(std::max<std::uint32_t>(1, f.training_textures)));
  r.texture_amplitude = f.texture_amplitude;
  r.moire_amplitude = f.moire_amplitude;
  r.moire_frequency = rng.uniform(f.moire_freq_lo, f.moire_freq_hi);
  r.moire_angle = std::fmod(tint_angle(seed) + 0.5 * kGoldenAngle * index, 3.141592653589793);
  r.illumination_gain = rng.uniform(f.gain_lo, f.gain_hi);
  r.noise_std = rng.uniform(f.noise_lo, f.noise_hi);
  return r;
}

DomainRecipe held_out_recipe(const FamilyRecipe& f, std::uint64_t seed, std::uint32_t id) {
  check_family(f);
  Rng rng = Rng(seed, 0).fork("domain.held_out");
  DomainRecipe r;
  r.domain_id = id;
  const Vec3 shift_dir = random_unit(rng);
  const Vec3 axis = chroma_axis();
  for (int c = 0; c < 3; ++c) {
    r.color_shift[c] = f.color_shift_max * shift_dir[c];
    r.spoof_tint[c] = f.held_out_tint * f.tint_magnitude * axis[c];
  }
  r.texture_id = f.training_textures + static_cast<std::uint32_t>(rng.below(4));
  r.texture_amplitude = f.texture_amplitude;
  r.illumination_gain = f.held_out_gain;
  r.noise_std = f.held_out_noise;
  return r;
}

DomainDataset generate_domain(const FamilyRecipe& f, const DomainRecipe& recipe, std::size_t n,
                              std::uint64_t seed) {
  check_family(f);
  if (n < 4) throw ParameterError("generate_domain: need at least 4 samples per domain");
  const std::size_t H = f.image_h, W = f.image_w;
  const std::vector<double> tmpl = depth_template(f);
  const SignalSpec& sig = f.signal;
  Rng base = Rng(seed, 0).fork("domain.samples", recipe.domain_id);
  std::vector<Sample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = base.fork("sample", i);
    const int label = (i % 2 == 0) ? kReal : kSpoof;
    const bool real = label == kReal;
    const double amp = rng.uniform(sig.amp_lo, sig.amp_hi);
    const double phase = 2.0 * 3.141592653589793 * rng.uniform();
    Tensor rgb(Shape{H, W, 3});
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const double yy = static_cast<double>(y), xx = static_cast<double>(x);
        const double b = bump(sig, H, W, yy, xx);
        double lum = sig.face_level + (real ? sig.real_relief : sig.spoof_relief) * amp * b;
        if (!real) {
          lum += sig.grid_amplitude * (((x + y) % 2 == 0) ? 1.0 : -1.0);
          lum += recipe.moire_amplitude *
                 std::sin(recipe.moire_frequency * (xx * std::cos(recipe.moire_angle) +
                                                   yy * std::sin(recipe.moire_angle)) +
                          phase);
        }
        lum += recipe.texture_amplitude * texture(recipe.texture_id, yy, xx) * (1.0 - b);
        for (std::size_t c = 0; c < 3; ++c) {
          double v = recipe.illumination_gain * lum * sig.skin_tone[c] + recipe.color_shift[c];
          if (!real) v += recipe.spoof_tint[c];
          v += rng.normal(0.0, recipe.noise_std);
          rgb[(y * W + x) * 3 + c] = std::clamp(v, 0.0, 1.0);
        }
      }
    }
    const Tensor hsv = rgb_to_hsv(rgb);
    Tensor image(Shape{H, W, 6});
    for (std::size_t p = 0; p < H * W; ++p) {
      for (std::size_t c = 0; c < 3; ++c) {
        image[p * 6 + c] = rgb[p * 3 + c];
        image[p * 6 + 3 + c] = hsv[p * 3 + c];
      }
    }
    Tensor depth(Shape{f.depth_h, f.depth_w});
    if (real) {
      for (std::size_t k = 0; k < tmpl.size(); ++k) depth[k] = amp * tmpl[k];
    }
    samples.push_back(Sample{std::move(image), label, std::move(depth)});
  }
  return DomainDataset(recipe.domain_id, std::move(samples), recipe);
}

DomainFamily generate_family(std::size_t k, std::size_t n, const FamilyRecipe& recipe,
                             std::uint64_t seed, std::size_t held_out_n) {
  if (k < 1) throw ParameterError("generate_family: need at least one training domain");
  if (n < 4) throw ParameterError("generate_family: need at least 4 samples per domain");
  if (held_out_n == 0) held_out_n = n;
  DomainFamily family;
  for (std::uint32_t i = 0; i < k; ++i) {
    family.training.push_back(generate_domain(recipe, training_recipe(recipe, seed, i), n, seed));
  }
  // Samples come from a stream that does not depend on k, so families of
  // different sizes share the same user domain; only the id says k.
  const auto id = static_cast<std::uint32_t>(k);
  DomainDataset held = generate_domain(recipe, held_out_recipe(recipe, seed, kHeldOutStream),
                                       held_out_n, seed);
  DomainRecipe r = held.recipe();
  r.domain_id = id;
  family.held_out = DomainDataset(id, held.samples(), r);
  return family;
}

DomainDataset union_of(const std::vector<const DomainDataset*>& parts, std::uint32_t id) {
  std::vector<Sample> all;
  for (const auto* p : parts) all.insert(all.end(), p->samples().begin(), p->samples().end());
  DomainRecipe r;
  r.domain_id = id;
  return DomainDataset(id, std::move(all), r);
}

// --- On-disk format --------------------------------------------------------

void save_dataset(const DomainDataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  const Shape& is = ds.samples()[0].image.shape();
  const Shape& dsh = ds.samples()[0].depth.shape();

  io::ByteWriter w;
  w.u32(kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u32(ds.domain_id());
  w.u64(ds.size());
  w.shape(is);
  w.shape(dsh);
  for (const Sample& s : ds.samples()) {
    w.u8(static_cast<std::uint8_t>(s.label));
    w.values(s.image);
    w.values(s.depth);
  }
  w.checksum();

  nlohmann::json schema = {{"format", "fedpad-dataset"},
                           {"version", kDatasetVersion},
                           {"domain_id", ds.domain_id()},
                           {"count", ds.size()},
                           {"num_real", ds.count(kReal)},
                           {"num_spoof", ds.count(kSpoof)},
                           {"image_shape", is},
                           {"depth_shape", dsh},
                           {"blob", kBlobFile},
                           {"recipe", recipe_to_json(ds.recipe())}};
  io::write_file(dir / kBlobFile, w.buffer());
  io::write_text(dir / kSchemaFile, schema.dump(2) + "\n");
}

DomainDataset load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw SchemaError(dir.string() + " is not a directory");
  if (!std::filesystem::exists(dir / kSchemaFile)) {
    throw SchemaError(dir.string() + ": missing " + kSchemaFile);
  }
  nlohmann::json schema;
  try {
    schema = nlohmann::json::parse(io::read_text(dir / kSchemaFile));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(dir.string() + "/" + kSchemaFile + ": " + e.what());
  }
  Shape image_shape, depth_shape;
  std::uint64_t count = 0;
  std::uint32_t domain_id = 0;
  DomainRecipe recipe;
  try {
    if (schema.at("format") != "fedpad-dataset" || schema.at("version") != kDatasetVersion) {
      throw SchemaError(dir.string() + ": unsupported dataset format/version");
    }
    image_shape = schema.at("image_shape").get<Shape>();
    depth_shape = schema.at("depth_shape").get<Shape>();
    count = schema.at("count").get<std::uint64_t>();
    domain_id = schema.at("domain_id").get<std::uint32_t>();
    recipe = recipe_from_json(schema.at("recipe"));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(dir.string() + "/" + kSchemaFile + ": " + e.what());
  }

  const auto bytes = io::read_file(dir / kBlobFile);
  io::ByteReader r(bytes);
  if (r.u32() != kDatasetMagic) throw ParseError("bad dataset magic", 0);
  if (const auto v = r.u32(); v != kDatasetVersion) {
    throw ParseError("unsupported dataset version " + std::to_string(v), 4);
  }
  const std::size_t id_at = r.offset();
  if (r.u32() != domain_id) throw ParseError("domain id disagrees with schema", id_at);
  const std::size_t count_at = r.offset();
  if (r.u64() != count) throw ParseError("sample count disagrees with schema", count_at);
  const std::size_t shape_at = r.offset();
  if (r.shape() != image_shape || r.shape() != depth_shape) {
    throw ParseError("sample shapes disagree with schema", shape_at);
  }
  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1 << 20)));
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t label_at = r.offset();
    const std::uint8_t label = r.u8();
    Tensor image = r.tensor(image_shape);
    Tensor depth = r.tensor(depth_shape);
    if (label > 1) {
      throw SchemaError("sample " + std::to_string(i) + " at byte " + std::to_string(label_at) +
                        ": label " + std::to_string(label) + " outside {0,1}");
    }
    samples.push_back(Sample{std::move(image), static_cast<int>(label), std::move(depth)});
  }
  r.verify_checksum();
  r.expect_end();
  DomainDataset ds(domain_id, std::move(samples), recipe);
  ds.validate();
  return ds;
}

}  // namespace fedpad
