#include <bit>
#include <cstring>
#include <set>

#include "canopyscan/cgan/model.hpp"
#include "canopyscan/common/errors.hpp"
#include "canopyscan/data/image_io.hpp"
#include "json.hpp"

namespace canopyscan::cgan {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'C', 'G', 'T', 'C'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}
  void need(std::size_t n, const char* what) const {
    if (n > data_.size() - pos_) throw CorruptionError(std::string("checkpoint truncated in ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

json ranges_json(const solar::ConditioningRanges& r) {
  return {{"radiation_min", r.radiation_min}, {"radiation_max", r.radiation_max},
          {"elevation_min", r.elevation_min}, {"elevation_max", r.elevation_max},
          {"t_air_min", r.t_air_min},         {"t_air_max", r.t_air_max}};
}

}  // namespace

std::string config_to_json(const ModelConfig& c) {
  const auto& g = c.generator;
  json j;
  j["target_channel"] = data::to_string(c.target);
  j["generator"] = {{"image_size", g.image_size},
                    {"base_channels", g.base_channels},
                    {"depth", g.depth},
                    {"embedding_dim", g.embedding_dim},
                    {"species_vocab_size", g.species_vocab_size},
                    {"conditioning_injection", to_string(g.injection)},
                    {"output_channels", g.output_channels}};
  j["discriminator"] = {{"base_channels", c.discriminator.base_channels}, {"layers", c.discriminator.layers}};
  j["species_vocab"] = c.species_vocab;
  j["conditioning_ranges"] = ranges_json(c.conditioning);
  j["normalization"] = {{"thermal_min_c", c.physical.thermal_min_c},
                        {"thermal_max_c", c.physical.thermal_max_c},
                        {"thermal_encoding", to_string(c.thermal_encoding)},
                        {"thermal_anomaly_span_c", c.thermal_anomaly_span_c}};
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  ModelConfig c;
  try {
    const json j = json::parse(text);
    c.target = data::channel_from_string(j.at("target_channel").get<std::string>());
    const auto& g = j.at("generator");
    c.generator.image_size = g.at("image_size").get<int>();
    c.generator.base_channels = g.at("base_channels").get<int>();
    c.generator.depth = g.at("depth").get<int>();
    c.generator.embedding_dim = g.at("embedding_dim").get<int>();
    c.generator.species_vocab_size = g.at("species_vocab_size").get<int>();
    c.generator.injection = injection_from_string(g.at("conditioning_injection").get<std::string>());
    c.generator.output_channels = g.at("output_channels").get<int>();
    c.discriminator.base_channels = j.at("discriminator").at("base_channels").get<int>();
    c.discriminator.layers = j.at("discriminator").at("layers").get<int>();
    c.species_vocab = j.at("species_vocab").get<std::vector<std::string>>();
    const auto& r = j.at("conditioning_ranges");
    c.conditioning = {r.at("radiation_min").get<double>(), r.at("radiation_max").get<double>(),
                      r.at("elevation_min").get<double>(), r.at("elevation_max").get<double>(),
                      r.at("t_air_min").get<double>(),     r.at("t_air_max").get<double>()};
    c.physical.thermal_min_c = j.at("normalization").at("thermal_min_c").get<double>();
    c.physical.thermal_max_c = j.at("normalization").at("thermal_max_c").get<double>();
    c.thermal_encoding = thermal_encoding_from_string(j.at("normalization").at("thermal_encoding").get<std::string>());
    c.thermal_anomaly_span_c = j.at("normalization").at("thermal_anomaly_span_c").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint config: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config: ") + e.what());
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config: ") + e.what());
  }
  return c;
}

std::vector<std::uint8_t> serialize_checkpoint(const CganModel& model) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  const std::string cfg = config_to_json(model.config);
  w.u32(static_cast<std::uint32_t>(cfg.size()));
  w.bytes(cfg.data(), cfg.size());

  std::vector<const tensor::Parameter*> all;
  for (const auto& p : model.generator.all()) all.push_back(&p);
  for (const auto& p : model.discriminator.all()) all.push_back(&p);

  w.u32(static_cast<std::uint32_t>(all.size()));
  for (const auto* p : all) {
    w.u32(static_cast<std::uint32_t>(p->name.size()));
    w.bytes(p->name.data(), p->name.size());
    w.u32(static_cast<std::uint32_t>(p->value.shape.size()));
    for (int d : p->value.shape) w.u32(static_cast<std::uint32_t>(d));
    w.u64(static_cast<std::uint64_t>(p->value.size()) * 4);
  }
  for (const auto* p : all)
    for (double v : p->value.data) w.f32(static_cast<float>(v));
  return w.take();
}

CganModel deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not a CGTC checkpoint");
  Reader r(bytes);
  r.str(4, "magic");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t cfg_len = r.u32("config length");
  CganModel model = init_model(config_from_json(r.str(cfg_len, "config")), 0);

  struct Entry {
    std::string name;
    tensor::Shape shape;
    std::uint64_t payload;
  };
  const std::uint32_t count = r.u32("tensor count");
  std::vector<Entry> index;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name = r.str(r.u32("name length"), "tensor name");
    const std::uint32_t ndim = r.u32("rank");
    if (ndim > 8) throw CorruptionError("tensor " + e.name + " has implausible rank " + std::to_string(ndim));
    std::uint64_t elements = 1;
    for (std::uint32_t k = 0; k < ndim; ++k) {
      const std::uint32_t d = r.u32("shape");
      if (d == 0 || d > (1u << 24)) throw CorruptionError("tensor " + e.name + " has implausible dimension");
      e.shape.push_back(static_cast<int>(d));
      elements *= d;
    }
    e.payload = r.u64("payload length");
    if (e.payload != elements * 4)
      throw CorruptionError("tensor " + e.name + ": shape " + tensor::to_string(e.shape) + " needs " +
                            std::to_string(elements * 4) + " bytes, index says " + std::to_string(e.payload));
    index.push_back(std::move(e));
  }

  std::set<std::string> seen;
  for (const auto& e : index) {
    tensor::Parameter* target = nullptr;
    for (auto* set : {&model.generator, &model.discriminator})
      for (auto& p : set->all())
        if (p.name == e.name) target = &p;
    if (!target) throw CorruptionError("unexpected tensor " + e.name);
    if (!seen.insert(e.name).second) throw CorruptionError("tensor " + e.name + " stored twice");
    if (target->value.shape != e.shape)
      throw CorruptionError("tensor " + e.name + " has shape " + tensor::to_string(e.shape) + ", config implies " +
                            tensor::to_string(target->value.shape));
    r.need(e.payload, "tensor payload");
    for (double& v : target->value.data) v = static_cast<double>(r.f32("tensor payload"));
  }
  if (seen.size() != model.generator.all().size() + model.discriminator.all().size())
    throw CorruptionError("checkpoint is missing tensors");
  if (r.remaining() != 0) throw CorruptionError("trailing bytes after checkpoint payload");
  return model;
}

void save_checkpoint(const CganModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(model);
  // write-then-rename so a crash never leaves a torn checkpoint
  auto tmp = path;
  tmp += ".tmp";
  data::write_file(tmp, bytes);
  std::filesystem::rename(tmp, path);
}

CganModel load_checkpoint(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = data::read_file(path);
  } catch (const FormatError&) {
    throw FormatError("cannot read checkpoint " + path.string());
  }
  return deserialize_checkpoint(bytes);
}

}  // namespace canopyscan::cgan
