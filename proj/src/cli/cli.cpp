#include "canopyscan/cli/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "canopyscan/common/errors.hpp"
#include "canopyscan/data/image_io.hpp"
#include "canopyscan/data/synth.hpp"
#include "canopyscan/survey/survey.hpp"
#include "json.hpp"

namespace canopyscan::cli {

using nlohmann::json;
namespace fs = std::filesystem;

TrainSettings parse_train_settings(const std::string& text) {
  TrainSettings s;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("training config must be a JSON object");
    s.model_seed = j.value("model_seed", std::uint64_t{0});
    if (j.contains("species_vocab")) {
      s.model.species_vocab = j["species_vocab"].get<std::vector<std::string>>();
      s.model.generator.species_vocab_size = static_cast<int>(s.model.species_vocab.size());
      s.has_vocab = true;
    }
    auto& g = s.model.generator;
    if (j.contains("generator")) {
      const auto& gj = j["generator"];
      g.image_size = gj.value("image_size", g.image_size);
      g.base_channels = gj.value("base_channels", g.base_channels);
      g.depth = gj.value("depth", g.depth);
      g.embedding_dim = gj.value("embedding_dim", g.embedding_dim);
      if (gj.contains("conditioning_injection"))
        g.injection = cgan::injection_from_string(gj["conditioning_injection"].get<std::string>());
    }
    auto& d = s.model.discriminator;
    if (j.contains("discriminator")) {
      d.base_channels = j["discriminator"].value("base_channels", d.base_channels);
      d.layers = j["discriminator"].value("layers", d.layers);
    }
    if (j.contains("thermal")) {
      const auto& th = j["thermal"];
      if (th.contains("encoding"))
        s.model.thermal_encoding = cgan::thermal_encoding_from_string(th["encoding"].get<std::string>());
      s.model.thermal_anomaly_span_c = th.value("anomaly_span_c", s.model.thermal_anomaly_span_c);
    }
    auto& t = s.train;
    if (j.contains("train")) {
      const auto& tj = j["train"];
      t.lambda_l1 = tj.value("lambda_l1", t.lambda_l1);
      t.adam.learning_rate = tj.value("learning_rate", t.adam.learning_rate);
      t.adam.beta1 = tj.value("beta1", t.adam.beta1);
      t.adam.beta2 = tj.value("beta2", t.adam.beta2);
      t.adam.epsilon = tj.value("epsilon", t.adam.epsilon);
      t.batch_size = tj.value("batch_size", t.batch_size);
      t.max_steps = tj.value("max_steps", t.max_steps);
      t.seed = tj.value("seed", t.seed);
      t.checkpoint_interval = tj.value("checkpoint_interval", t.checkpoint_interval);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  } catch (const Error& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  return s;
}

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  const auto bytes = std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
  data::write_file(p, bytes);
}

data::MultiSpectralSample fit_to(data::MultiSpectralSample s, int size) {
  if (s.width() == size && s.height() == size) return s;
  s.rgb = data::center_crop_resize(s.rgb, size);
  s.nir = data::center_crop_resize(s.nir, size);
  s.thermal = data::center_crop_resize(s.thermal, size);
  return s;
}

ingest::BBox parse_bbox(const std::string& text) {
  ingest::BBox b;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lf,%lf,%lf,%lf%c", &b.min_lon, &b.min_lat, &b.max_lon, &b.max_lat, &tail) != 4)
    throw ValidationError("--bbox expects min_lon,min_lat,max_lon,max_lat, got '" + text + "'");
  b.validate();
  return b;
}

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ValidationError("--splits expects comma-separated fractions, got '" + text + "'");
    }
  }
  return out;
}

// ---- train ----

struct TrainArgs {
  fs::path manifest, config, out, log;
  std::string target, split = "train";
};

int cmd_train(const TrainArgs& a) {
  TrainSettings s = a.config.empty() ? TrainSettings{} : parse_train_settings(read_text(a.config));
  const auto ds = data::Dataset::open(a.manifest);
  const auto& m = ds.manifest();
  std::vector<std::string> ids;
  if (a.split == "all") {
    for (const auto& e : m.samples) ids.push_back(e.id);
  } else {
    ids = a.split == "train" ? m.splits.train : a.split == "val" ? m.splits.val : m.splits.test;
    if (a.split != "train" && a.split != "val" && a.split != "test")
      throw ConfigError("--split must be train, val, test or all");
    if (ids.empty()) throw SplitError("split '" + a.split + "' is empty");
  }

  s.model.target = data::channel_from_string(a.target);
  s.model.physical = m.normalization;
  std::vector<data::MultiSpectralSample> samples;
  int max_species = 0;
  for (const auto& id : ids) {
    samples.push_back(fit_to(ds.load(id), s.model.generator.image_size));
    max_species = std::max(max_species, samples.back().cond.species_id);
  }
  if (!s.has_vocab) {
    for (int i = 0; i <= max_species; ++i) s.model.species_vocab.push_back("species-" + std::to_string(i));
    s.model.generator.species_vocab_size = max_species + 1;
  }
  s.model.validate();
  s.train.validate();

  auto model = cgan::init_model(s.model, s.model_seed);
  std::vector<cgan::TrainingPair> pairs;
  for (const auto& sample : samples) pairs.push_back(cgan::make_pair(sample, s.model));

  const fs::path log = a.log.empty() ? fs::path(a.out.string() + ".loss.jsonl") : a.log;
  std::error_code ec;
  fs::remove(log, ec);
  const auto reports = cgan::train(model, pairs, s.train, {a.out, log});
  std::cout << "trained " << reports.size() << " steps on " << pairs.size() << " pairs";
  if (!reports.empty()) std::cout << "; final l1 " << reports.back().loss_g_l1;
  std::cout << "\ncheckpoint " << a.out.string() << " (" << survey::fnv1a_hex(data::read_file(a.out)) << ")\n";
  return kExitOk;
}

// ---- infer ----

struct InferArgs {
  fs::path checkpoint, rgb, out;
  std::string target, time;
  double radiation = 0, t_air = 0, lat = 0, lon = 0;
  int species_id = 0;
};

int cmd_infer(const InferArgs& a) {
  const auto model = cgan::load_checkpoint(a.checkpoint);
  const data::Channel channel = a.target.empty() ? model.config.target : data::channel_from_string(a.target);
  const UtcTime when = parse_rfc3339(a.time);
  const auto sun = solar::solar_position(a.lat, a.lon, when);
  const auto cond = solar::assemble_conditioning({a.radiation, a.t_air, "cli", when}, sun, a.species_id);
  const auto frame = data::decode_rgb(data::decode_image_rgb8(data::read_file(a.rgb)));
  const RgbImage rgb = data::center_crop_resize(frame, model.config.generator.image_size);
  const Raster out = survey::run_model(model, channel, rgb, cond);
  const auto png = data::encode_png(channel == data::Channel::nir ? data::encode_reflectance16(out)
                                                                  : data::encode_thermal16(out));
  data::write_file(a.out, png);
  std::cout << "wrote " << data::to_string(channel) << " " << out.width << "x" << out.height << " to "
            << a.out.string() << "\n";
  return kExitOk;
}

// ---- survey ----

struct SurveyArgs {
  std::string bbox, api_url, weather_url, token, start, end, generated_at, inventory_format, red_source = "input";
  fs::path inventory, checkpoint_nir, checkpoint_thermal, thresholds, out_geojson, out_report;
  double max_radius = 20.0;
  int workers = 4;
};

int cmd_survey(const SurveyArgs& a) {
  survey::SurveyOptions opts;
  opts.bbox = parse_bbox(a.bbox);
  if (!a.start.empty()) opts.window.start = parse_rfc3339(a.start);
  if (!a.end.empty()) opts.window.end = parse_rfc3339(a.end);
  opts.max_radius_m = a.max_radius;
  opts.workers = a.workers;
  opts.generated_at = a.generated_at.empty()
                          ? std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now())
                          : parse_rfc3339(a.generated_at);
  if (!(opts.max_radius_m > 0)) throw ValidationError("--max-radius must be positive");

  std::string fmt = a.inventory_format;
  if (fmt.empty()) {
    const auto ext = a.inventory.extension().string();
    fmt = ext == ".geojson" || ext == ".json" ? "geojson" : "csv";
  }
  const auto inventory = ingest::load_tree_inventory(a.inventory, ingest::inventory_format_from_string(fmt));
  for (const auto& e : inventory.errors)
    std::cerr << "inventory: line " << e.line << ": " << e.message << "\n";
  const auto thresholds =
      a.thresholds.empty() ? health::GenusThresholds{} : health::GenusThresholds::load(a.thresholds);
  const survey::CheckpointTranslator translator(a.checkpoint_nir, a.checkpoint_thermal);
  const std::string token = a.token.empty() ? ingest::token_from_env() : a.token;

  const auto report = survey::run_survey(inventory, {a.api_url, token, a.weather_url}, translator, thresholds, opts);
  write_text(a.out_geojson, survey::to_geojson(report));
  if (!a.out_report.empty()) write_text(a.out_report, survey::to_json(report));
  const auto& s = report.summary;
  std::cout << s.n_trees << " trees: " << s.n_healthy << " healthy, " << s.n_stressed << " stressed, " << s.n_unknown
            << " unknown\n";
  return kExitOk;
}

// ---- eval ----

struct EvalArgs {
  fs::path manifest, out;
  std::vector<std::string> checkpoints;
  std::string split = "test";
};

int cmd_eval(const EvalArgs& a) {
  const auto ds = data::Dataset::open(a.manifest);
  survey::EvalReport merged;
  merged.split = a.split;
  for (const auto& path : a.checkpoints) {
    const survey::SingleModelTranslator t{fs::path(path)};
    auto r = survey::run_eval(ds, a.split, t, {t.channel()});
    merged.samples.insert(merged.samples.end(), r.samples.begin(), r.samples.end());
    merged.aggregates.insert(merged.aggregates.end(), r.aggregates.begin(), r.aggregates.end());
  }
  const std::string text = survey::to_json(merged);
  if (a.out.empty())
    std::cout << text;
  else
    write_text(a.out, text);
  for (const auto& agg : merged.aggregates) {
    std::cerr << data::to_string(agg.channel) << ": " << agg.samples << " samples, mae " << agg.mean.mae;
    if (agg.mean_abs_delta_ndvi) std::cerr << ", mean |dNDVI| " << *agg.mean_abs_delta_ndvi;
    if (agg.mean_abs_delta_ctd) std::cerr << ", mean |dCTD| " << *agg.mean_abs_delta_ctd;
    std::cerr << "\n";
  }
  return kExitOk;
}

// ---- synth ----

struct SynthArgs {
  fs::path out, palette;
  int samples = 32, size = 64;
  std::uint64_t seed = 1;
  double noise = 0.01;
  std::string splits = "0.75,0.125,0.125";
};

int cmd_synth(const SynthArgs& a) {
  data::SynthDatasetConfig cfg;
  cfg.palette = data::SpeciesPalette::load(a.palette);
  cfg.samples = a.samples;
  cfg.seed = a.seed;
  cfg.size = a.size;
  cfg.noise_sigma = a.noise;
  auto manifest = data::synth_dataset(a.out, cfg);
  manifest = data::split_dataset(std::move(manifest), parse_fractions(a.splits), a.seed);
  data::save_manifest(manifest, a.out / "manifest.json");
  std::cout << "wrote " << manifest.samples.size() << " samples to " << a.out.string() << " (train "
            << manifest.splits.train.size() << ", val " << manifest.splits.val.size() << ", test "
            << manifest.splits.test.size() << ")\n";
  return kExitOk;
}

int fail(const std::exception& e, int code) {
  std::cerr << "error: " << e.what() << "\n";
  return code;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Street-level tree health survey from RGB imagery"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);  // last flag wins
  const std::vector<std::string> channels{"nir", "thermal"};

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a generator for one target channel");
  train->add_option("--manifest", ta.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--target", ta.target, "nir or thermal")->required()->check(CLI::IsMember(channels));
  train->add_option("--config", ta.config, "Training config (JSON)")->check(CLI::ExistingFile);
  train->add_option("--out", ta.out, "Checkpoint path")->required();
  train->add_option("--log", ta.log, "Loss log (JSONL); default <out>.loss.jsonl");
  train->add_option("--split", ta.split, "Manifest split to train on (train, val, test, all)");

  InferArgs ia;
  auto* infer = app.add_subcommand("infer", "Generate one channel for one RGB frame");
  infer->add_option("--checkpoint", ia.checkpoint)->required()->check(CLI::ExistingFile);
  infer->add_option("--rgb", ia.rgb, "PNG or JPEG frame")->required()->check(CLI::ExistingFile);
  infer->add_option("--radiation", ia.radiation, "Global radiation, W/m^2")->required();
  infer->add_option("--t-air", ia.t_air, "Air temperature, deg C")->required();
  infer->add_option("--lat", ia.lat)->required();
  infer->add_option("--lon", ia.lon)->required();
  infer->add_option("--time", ia.time, "Capture time, RFC 3339")->required();
  infer->add_option("--species-id", ia.species_id)->default_val(0);
  infer->add_option("--target", ia.target, "Expected channel; must match the checkpoint")
      ->check(CLI::IsMember(channels));
  infer->add_option("--out", ia.out, "16-bit PNG output")->required();

  SurveyArgs sa;
  auto* surv = app.add_subcommand("survey", "Run the end-to-end health survey");
  surv->add_option("--bbox", sa.bbox, "min_lon,min_lat,max_lon,max_lat")->required();
  surv->add_option("--inventory", sa.inventory)->required()->check(CLI::ExistingFile);
  surv->add_option("--inventory-format", sa.inventory_format)->check(CLI::IsMember({"csv", "geojson"}));
  surv->add_option("--api-url", sa.api_url, "Street-level imagery API base URL")->required();
  surv->add_option("--weather-url", sa.weather_url, "Weather observation API base URL")->required();
  surv->add_option("--token", sa.token, std::string("API token; default $") + ingest::kTokenEnvVar);
  surv->add_option("--checkpoint-nir", sa.checkpoint_nir)->required()->check(CLI::ExistingFile);
  surv->add_option("--checkpoint-thermal", sa.checkpoint_thermal)->required()->check(CLI::ExistingFile);
  surv->add_option("--thresholds", sa.thresholds, "Per-genus thresholds (JSON)")->check(CLI::ExistingFile);
  surv->add_option("--out-geojson", sa.out_geojson)->required();
  surv->add_option("--out-report", sa.out_report);
  surv->add_option("--start", sa.start, "Earliest capture time, RFC 3339");
  surv->add_option("--end", sa.end, "Latest capture time, RFC 3339");
  surv->add_option("--max-radius", sa.max_radius, "Tree-to-image match radius, m")->default_val(20.0);
  surv->add_option("--workers", sa.workers, "Concurrent per-tree inferences")->default_val(4)->check(CLI::Range(1, 64));
  surv->add_option("--generated-at", sa.generated_at, "Report timestamp, RFC 3339; default now");
  surv->add_option("--ndvi-red-source", sa.red_source, "Red band for NDVI (only the input frame is supported)")
      ->check(CLI::IsMember({"input"}));

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Compare generated channels with ground truth");
  eval->add_option("--manifest", ea.manifest)->required()->check(CLI::ExistingFile);
  eval->add_option("--checkpoint", ea.checkpoints, "One per channel")
      ->required()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->check(CLI::ExistingFile);
  eval->add_option("--split", ea.split)->default_val("test");
  eval->add_option("--out", ea.out, "JSON output; default stdout");

  SynthArgs ya;
  auto* synth = app.add_subcommand("synth", "Write a synthetic paired dataset");
  synth->add_option("--out", ya.out)->required();
  synth->add_option("--palette", ya.palette, "Species palette (JSON)")->required()->check(CLI::ExistingFile);
  synth->add_option("--samples", ya.samples)->default_val(32)->check(CLI::PositiveNumber);
  synth->add_option("--seed", ya.seed)->default_val(1);
  synth->add_option("--size", ya.size)->default_val(64);
  synth->add_option("--noise", ya.noise)->default_val(0.01);
  synth->add_option("--splits", ya.splits, "train,val,test fractions")->default_val("0.75,0.125,0.125");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return cmd_train(ta);
    if (*infer) return cmd_infer(ia);
    if (*surv) return cmd_survey(sa);
    if (*eval) return cmd_eval(ea);
    if (*synth) return cmd_synth(ya);
  } catch (const ChannelMismatchError& e) {
    return fail(e, kExitMismatch);
  } catch (const survey::StageError& e) {
    std::cerr << "survey failed at stage '" << e.stage() << "'\n";
    return fail(e, kExitService);
  } catch (const ServiceError& e) {
    return fail(e, kExitService);
  } catch (const ConfigError& e) {
    return fail(e, kExitUsage);
  } catch (const ValidationError& e) {
    return fail(e, kExitUsage);
  } catch (const ManifestError& e) {
    return fail(e, kExitUsage);
  } catch (const SplitError& e) {
    return fail(e, kExitUsage);
  } catch (const VocabularyError& e) {
    return fail(e, kExitUsage);
  } catch (const std::exception& e) {
    return fail(e, kExitFailure);
  }
  return kExitUsage;
}

}  // namespace canopyscan::cli
