#include "canopyscan/cgan/model.hpp"

#include <algorithm>
#include <random>

#include "canopyscan/common/errors.hpp"
#include "canopyscan/tensor/ops.hpp"

namespace canopyscan::cgan {

using tensor::Graph;
using tensor::Parameter;
using tensor::Tensor;
using tensor::Var;

const char* to_string(Injection i) { return i == Injection::film ? "film" : "bottleneck_concat"; }

Injection injection_from_string(const std::string& s) {
  if (s == "bottleneck_concat") return Injection::bottleneck_concat;
  if (s == "film") return Injection::film;
  throw ConfigError("unknown conditioning injection '" + s + "'");
}

const char* to_string(ThermalEncoding e) { return e == ThermalEncoding::absolute ? "absolute" : "air_relative"; }

ThermalEncoding thermal_encoding_from_string(const std::string& s) {
  if (s == "absolute") return ThermalEncoding::absolute;
  if (s == "air_relative") return ThermalEncoding::air_relative;
  throw ConfigError("unknown thermal encoding '" + s + "'");
}

void GeneratorConfig::validate() const {
  if (depth < 1 || depth > 8) throw ConfigError("generator depth must be in [1, 8]");
  if (image_size < 2 || (image_size & (image_size - 1)) != 0) throw ConfigError("image_size must be a power of two");
  if (image_size % (1 << depth) != 0) throw ConfigError("image_size must be divisible by 2^depth");
  if (base_channels < 1) throw ConfigError("base_channels must be positive");
  if (embedding_dim < 1) throw ConfigError("embedding_dim must be positive");
  if (species_vocab_size < 1) throw ConfigError("species_vocab_size must be positive");
  if (output_channels != 1) throw ConfigError("output_channels must be 1");
}

int GeneratorConfig::stage_channels(int stage) const { return base_channels << std::min(stage, 3); }

void DiscriminatorConfig::validate() const {
  if (base_channels < 1) throw ConfigError("discriminator base_channels must be positive");
  if (layers < 1 || layers > 6) throw ConfigError("discriminator layers must be in [1, 6]");
}

void ModelConfig::validate() const {
  generator.validate();
  discriminator.validate();
  if (static_cast<int>(species_vocab.size()) != generator.species_vocab_size)
    throw ConfigError("species vocabulary has " + std::to_string(species_vocab.size()) + " names but vocab size is " +
                      std::to_string(generator.species_vocab_size));
  physical.validate();
  if (!(thermal_anomaly_span_c > 0.0)) throw ConfigError("thermal_anomaly_span_c must be positive");
  const auto& c = conditioning;
  if (!(c.radiation_min < c.radiation_max && c.elevation_min < c.elevation_max && c.t_air_min < c.t_air_max))
    throw ConfigError("conditioning ranges need min < max");
  // the patch map must stay at least 1x1
  int s = generator.image_size >> discriminator.layers;
  if (s - 2 < 1) throw ConfigError("image too small for the discriminator stack");
}

bool ModelConfig::operator==(const ModelConfig& o) const { return config_to_json(*this) == config_to_json(o); }

// ---- parameters ----

Parameter& ParameterSet::add(const std::string& name, Tensor value) {
  if (index_.count(name)) throw ContractError("duplicate parameter " + name);
  if (params_.size() == params_.capacity() && !params_.empty())
    throw ContractError("ParameterSet grew past its reserved size; parameter addresses would move");
  index_[name] = params_.size();
  params_.emplace_back(name, std::move(value));
  return params_.back();
}

Parameter& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("no parameter named " + name);
  return params_[it->second];
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("no parameter named " + name);
  return params_[it->second];
}

std::vector<Parameter*> ParameterSet::pointers() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

namespace {

constexpr int kKernel = 4;
constexpr double kLeak = 0.2;

// Layer shapes in construction order; forward passes look parameters up by
// the same names.
struct LayerSpec {
  std::string name;
  tensor::Shape shape;
  bool normal_init;  // N(0, 0.02) vs zeros
};

std::vector<LayerSpec> generator_layout(const GeneratorConfig& c) {
  std::vector<LayerSpec> out;
  const int d = c.depth;
  int in = 3;
  for (int i = 0; i < d; ++i) {
    const int ch = c.stage_channels(i);
    out.push_back({"g.enc" + std::to_string(i) + ".w", {ch, in, kKernel, kKernel}, true});
    in = ch;
  }
  out.push_back({"g.emb.species", {c.species_vocab_size, c.embedding_dim}, true});
  out.push_back({"g.emb.proj.w", {c.embedding_dim, static_cast<int>(solar::kConditioningFeatures)}, true});
  out.push_back({"g.emb.proj.b", {c.embedding_dim}, false});
  out.push_back({"g.emb.out.w", {c.output_channels, c.embedding_dim}, true});
  out.push_back({"g.emb.out.b", {c.output_channels}, false});
  const int bottleneck = c.stage_channels(d - 1);
  if (c.injection == Injection::film) {
    out.push_back({"g.film.gamma.w", {bottleneck, c.embedding_dim}, true});
    out.push_back({"g.film.gamma.b", {bottleneck}, false});
    out.push_back({"g.film.beta.w", {bottleneck, c.embedding_dim}, true});
    out.push_back({"g.film.beta.b", {bottleneck}, false});
  }
  int dec_in = c.injection == Injection::film ? bottleneck : bottleneck + c.embedding_dim;
  for (int j = d - 1; j >= 0; --j) {
    const int out_ch = j == 0 ? c.output_channels : c.stage_channels(j - 1);
    out.push_back({"g.dec" + std::to_string(j) + ".w", {dec_in, out_ch, kKernel, kKernel}, true});
    out.push_back({"g.dec" + std::to_string(j) + ".b", {out_ch}, false});
    // next stage sees this output concatenated with the mirrored encoder map
    if (j > 0) dec_in = out_ch + c.stage_channels(j - 1);
  }
  return out;
}

std::vector<LayerSpec> discriminator_layout(const DiscriminatorConfig& c) {
  std::vector<LayerSpec> out;
  int in = 4;
  for (int i = 0; i <= c.layers; ++i) {
    const int ch = c.stage_channels(i);
    out.push_back({"d.conv" + std::to_string(i) + ".w", {ch, in, kKernel, kKernel}, true});
    if (i == 0) out.push_back({"d.conv0.b", {ch}, false});
    in = ch;
  }
  out.push_back({"d.out.w", {1, in, kKernel, kKernel}, true});
  out.push_back({"d.out.b", {1}, false});
  return out;
}

void materialize(ParameterSet& set, const std::vector<LayerSpec>& layout, std::mt19937_64& rng) {
  std::normal_distribution<double> init(0.0, 0.02), unit(0.0, 1.0);
  set.reserve(layout.size());
  for (const auto& spec : layout) {
    Tensor t(spec.shape, 0.0);
    const bool rows = spec.name == "g.emb.species";
    if (spec.normal_init)
      for (double& v : t.data) v = rows ? unit(rng) : init(rng);
    set.add(spec.name, std::move(t));
  }
}

class Binder {
 public:
  Binder(Graph& g, const ParameterSet& set, ParameterSet* trainable) : g_(g), set_(set), trainable_(trainable) {}
  Var operator()(const std::string& name) const {
    if (trainable_) return g_.parameter(trainable_->at(name));
    return g_.constant(set_.at(name).value);
  }

 private:
  Graph& g_;
  const ParameterSet& set_;
  ParameterSet* trainable_;
};

Binder bind(Graph& g, ParameterSet& set, Binding b) { return Binder(g, set, b == Binding::trainable ? &set : nullptr); }

Var embed_impl(Graph& g, const Binder& p, const GeneratorConfig& c, std::span<const Conditioning> cond) {
  const int n = static_cast<int>(cond.size());
  std::vector<double> feats;
  std::vector<int> ids;
  for (const auto& k : cond) {
    feats.insert(feats.end(), k.features.begin(), k.features.end());
    ids.push_back(k.species_id);
  }
  for (int id : ids)
    if (id < 0 || id >= c.species_vocab_size)
      throw VocabularyError("species id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(c.species_vocab_size));
  Var f = g.constant(Tensor({n, static_cast<int>(solar::kConditioningFeatures)}, std::move(feats)));
  Var proj = tensor::linear(f, p("g.emb.proj.w"), p("g.emb.proj.b"));
  return tensor::add(proj, tensor::embedding(p("g.emb.species"), ids));
}

Var generator_impl(Graph& g, const Binder& p, const GeneratorConfig& c, Var rgb, std::span<const Conditioning> cond) {
  if (rgb.value().rank() != 4 || rgb.dim(1) != 3 || rgb.dim(2) != c.image_size || rgb.dim(3) != c.image_size)
    throw DimensionError("generator expects [N,3," + std::to_string(c.image_size) + "," +
                         std::to_string(c.image_size) + "], got " + tensor::to_string(rgb.shape()));
  if (static_cast<int>(cond.size()) != rgb.dim(0))
    throw DimensionError("conditioning count " + std::to_string(cond.size()) + " != batch " +
                         std::to_string(rgb.dim(0)));
  const int d = c.depth;
  std::vector<Var> enc;
  Var x = rgb;
  for (int i = 0; i < d; ++i) {
    x = tensor::conv2d(x, p("g.enc" + std::to_string(i) + ".w"), std::nullopt, 2, 1);
    if (i > 0) x = tensor::instance_norm(x);
    x = tensor::leaky_relu(x, kLeak);
    enc.push_back(x);
  }

  Var emb = embed_impl(g, p, c, cond);
  const int bs = x.dim(2);
  if (c.injection == Injection::film) {
    Var gamma = tensor::linear(emb, p("g.film.gamma.w"), p("g.film.gamma.b"));
    Var beta = tensor::linear(emb, p("g.film.beta.w"), p("g.film.beta.b"));
    x = tensor::film(x, gamma, beta);
  } else {
    x = tensor::concat({x, tensor::broadcast_spatial(emb, bs, bs)}, 1);
  }

  for (int j = d - 1; j >= 0; --j) {
    if (j < d - 1) x = tensor::concat({x, enc[static_cast<std::size_t>(j)]}, 1);
    // No normalization on the way up: instance norm would subtract the
    // spatially constant conditioning channels right after they join.
    const std::string stage = "g.dec" + std::to_string(j);
    x = tensor::conv_transpose2d(x, p(stage + ".w"), p(stage + ".b"), 2, 1);
    if (j == 0) {
      // per-sample output offset straight from the embedding; global levels
      // (air temperature) need not survive the whole decoder
      Var offset = tensor::linear(emb, p("g.emb.out.w"), p("g.emb.out.b"));
      x = tensor::tanh(tensor::add(x, tensor::broadcast_spatial(offset, x.dim(2), x.dim(3))));
    } else {
      x = tensor::relu(x);
    }
  }
  return x;
}

Var discriminator_impl(const Binder& p, const DiscriminatorConfig& c, Var rgb, Var candidate) {
  if (rgb.value().rank() != 4 || candidate.value().rank() != 4 || rgb.dim(0) != candidate.dim(0) ||
      rgb.dim(2) != candidate.dim(2) || rgb.dim(3) != candidate.dim(3) || candidate.dim(1) != 1 || rgb.dim(1) != 3)
    throw DimensionError("discriminator inputs disagree: " + tensor::to_string(rgb.shape()) + " vs " +
                         tensor::to_string(candidate.shape()));
  Var x = tensor::concat({rgb, candidate}, 1);
  for (int i = 0; i <= c.layers; ++i) {
    const std::string w = "d.conv" + std::to_string(i) + ".w";
    const int stride = i < c.layers ? 2 : 1;
    x = i == 0 ? tensor::conv2d(x, p(w), p("d.conv0.b"), stride, 1)
               : tensor::instance_norm(tensor::conv2d(x, p(w), std::nullopt, stride, 1));
    x = tensor::leaky_relu(x, kLeak);
  }
  return tensor::conv2d(x, p("d.out.w"), p("d.out.b"), 1, 1);
}

Tensor batch_slice_check(const Tensor& t, int channels, const char* what) {
  if (t.rank() != 4 || t.dim(1) != channels)
    throw DimensionError(std::string(what) + " must be [N," + std::to_string(channels) + ",H,W], got " +
                         tensor::to_string(t.shape));
  return t;
}

}  // namespace

CganModel init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  CganModel m;
  m.config = config;
  std::mt19937_64 rng(seed);
  materialize(m.generator, generator_layout(config.generator), rng);
  materialize(m.discriminator, discriminator_layout(config.discriminator), rng);

  const auto& rows = m.generator.at("g.emb.species").value;
  const int v = config.generator.species_vocab_size, e = config.generator.embedding_dim;
  for (int a = 0; a < v; ++a)
    for (int b = 0; b < a; ++b)
      if (std::equal(rows.data.begin() + a * e, rows.data.begin() + (a + 1) * e, rows.data.begin() + b * e))
        throw ContractError("species embedding rows " + std::to_string(a) + " and " + std::to_string(b) +
                            " are identical");
  return m;
}

Conditioning make_conditioning(const solar::ConditioningVector& cond, const ModelConfig& config) {
  if (cond.species_id < 0 || cond.species_id >= config.generator.species_vocab_size)
    throw VocabularyError("species id " + std::to_string(cond.species_id) + " outside vocabulary of " +
                          std::to_string(config.generator.species_vocab_size));
  return {solar::normalize_conditioning(cond, config.conditioning), cond.species_id};
}

Var embed_conditioning(Graph& g, CganModel& model, std::span<const Conditioning> cond, Binding binding) {
  return embed_impl(g, bind(g, model.generator, binding), model.config.generator, cond);
}

Var generator_forward(Graph& g, CganModel& model, Var rgb, std::span<const Conditioning> cond, Binding binding) {
  return generator_impl(g, bind(g, model.generator, binding), model.config.generator, rgb, cond);
}

Var discriminator_forward(Graph& g, CganModel& model, Var rgb, Var candidate, Binding binding) {
  return discriminator_impl(bind(g, model.discriminator, binding), model.config.discriminator, rgb, candidate);
}

Tensor generate(const CganModel& model, data::Channel expected, const Tensor& rgb,
                std::span<const solar::ConditioningVector> cond) {
  if (model.config.target != expected)
    throw ChannelMismatchError(std::string("checkpoint generates ") + data::to_string(model.config.target) +
                               " but " + data::to_string(expected) + " was requested");
  batch_slice_check(rgb, 3, "rgb");
  std::vector<Conditioning> c;
  for (const auto& k : cond) c.push_back(make_conditioning(k, model.config));
  Graph g(false);
  Var x = g.constant(rgb);
  const Binder p(g, model.generator, nullptr);
  return generator_impl(g, p, model.config.generator, x, c).value();
}

Tensor discriminate(const CganModel& model, const Tensor& rgb, const Tensor& candidate) {
  batch_slice_check(rgb, 3, "rgb");
  batch_slice_check(candidate, 1, "candidate");
  Graph g(false);
  const Binder p(g, model.discriminator, nullptr);
  return discriminator_impl(p, model.config.discriminator, g.constant(rgb), g.constant(candidate)).value();
}

}  // namespace canopyscan::cgan
