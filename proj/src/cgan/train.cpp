#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "canopyscan/cgan/model.hpp"
#include "canopyscan/common/errors.hpp"
#include "canopyscan/tensor/ops.hpp"

namespace canopyscan::cgan {

using tensor::Graph;
using tensor::Tensor;
using tensor::Var;

void TrainConfig::validate() const {
  if (!(lambda_l1 >= 0.0)) throw ConfigError("lambda_l1 must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (max_steps < 0) throw ConfigError("max_steps must be non-negative");
  if (checkpoint_interval < 0) throw ConfigError("checkpoint_interval must be non-negative");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

std::string to_json_line(const LossReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "{\"step\":%d,\"loss_d\":%.17g,\"loss_g_adv\":%.17g,\"loss_g_l1\":%.17g,\"loss_g_total\":%.17g}", r.step,
                r.loss_d, r.loss_g_adv, r.loss_g_l1, r.loss_g_total);
  return buf;
}

Raster target_to_network(const Raster& physical, const ModelConfig& config, double t_air) {
  if (config.target == data::Channel::nir || config.thermal_encoding == ThermalEncoding::absolute)
    return data::to_network(physical, config.target, config.physical);
  Raster out = physical;
  for (double& v : out.values) v = (v - t_air) / config.thermal_anomaly_span_c;
  return out;
}

Raster target_from_network(const Raster& network, const ModelConfig& config, double t_air) {
  if (config.target == data::Channel::nir || config.thermal_encoding == ThermalEncoding::absolute)
    return data::from_network(network, config.target, config.physical);
  Raster out = network;
  for (double& v : out.values) v = t_air + v * config.thermal_anomaly_span_c;
  return out;
}

TrainingPair make_pair(const data::MultiSpectralSample& s, const ModelConfig& config) {
  const int size = config.generator.image_size;
  if (s.width() != size || s.height() != size)
    throw DimensionError("sample " + s.id + " is " + std::to_string(s.width()) + "x" + std::to_string(s.height()) +
                         ", model expects " + std::to_string(size));
  const RgbImage rgb = data::rgb_to_network(s.rgb);
  const Raster target =
      target_to_network(config.target == data::Channel::nir ? s.nir : s.thermal, config, s.cond.t_air);
  TrainingPair p;
  p.rgb = Tensor({3, size, size});
  std::copy(rgb.r.values.begin(), rgb.r.values.end(), p.rgb.data.begin());
  std::copy(rgb.g.values.begin(), rgb.g.values.end(), p.rgb.data.begin() + static_cast<std::ptrdiff_t>(rgb.r.size()));
  std::copy(rgb.b.values.begin(), rgb.b.values.end(), p.rgb.data.begin() + 2 * static_cast<std::ptrdiff_t>(rgb.r.size()));
  p.target = Tensor({1, size, size}, target.values);
  p.cond = make_conditioning(s.cond, config);
  return p;
}

Optimizers make_optimizers(CganModel& model, const tensor::AdamHyperparams& hyper) {
  const auto g = model.generator.pointers();
  const auto d = model.discriminator.pointers();
  return {tensor::make_adam_state(g, hyper), tensor::make_adam_state(d, hyper)};
}

namespace {

Tensor stack(std::span<const TrainingPair* const> batch, bool rgb) {
  const Tensor& first = rgb ? batch[0]->rgb : batch[0]->target;
  tensor::Shape shape{static_cast<int>(batch.size())};
  shape.insert(shape.end(), first.shape.begin(), first.shape.end());
  Tensor out(shape);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Tensor& t = rgb ? batch[i]->rgb : batch[i]->target;
    if (t.shape != first.shape) throw DimensionError("training batch mixes image sizes");
    std::copy(t.data.begin(), t.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * t.size()));
  }
  return out;
}

void require_finite(double v, const char* what, int step) {
  if (!std::isfinite(v)) throw TrainingError(std::string("non-finite ") + what + " at step " + std::to_string(step));
}

}  // namespace

LossReport train_step(CganModel& model, Optimizers& opt, std::span<const TrainingPair* const> batch,
                      const TrainConfig& config, int step) {
  if (batch.empty()) throw ConfigError("empty training batch");
  const Tensor rgb_t = stack(batch, true);
  const Tensor real_t = stack(batch, false);
  std::vector<Conditioning> cond;
  for (const auto* p : batch) cond.push_back(p->cond);

  LossReport rep;
  rep.step = step;

  // generator forward, recorded for the later G update
  Graph gg;
  Var rgb = gg.constant(rgb_t);
  Var real = gg.constant(real_t);
  Var fake = generator_forward(gg, model, rgb, cond, Binding::trainable);

  // discriminator update on real vs detached fake
  {
    model.discriminator.zero_grad();
    Graph gd;
    Var drgb = gd.constant(rgb_t);
    Var on_real = discriminator_forward(gd, model, drgb, gd.constant(real_t));
    Var on_fake = discriminator_forward(gd, model, drgb, gd.constant(fake.value()));
    Var loss_d = tensor::scale(
        tensor::add(tensor::bce_with_logits(on_real, 1.0), tensor::bce_with_logits(on_fake, 0.0)), 0.5);
    rep.loss_d = loss_d.value()[0];
    require_finite(rep.loss_d, "discriminator loss", step);
    gd.backward(loss_d);
    const auto params = model.discriminator.pointers();
    tensor::adam_step(params, opt.discriminator);
  }

  // generator update against the freshly updated discriminator
  model.generator.zero_grad();
  Var adv = tensor::bce_with_logits(discriminator_forward(gg, model, rgb, fake, Binding::frozen), 1.0);
  Var l1 = tensor::l1_loss(fake, real);
  Var total = tensor::add(adv, tensor::scale(l1, config.lambda_l1));
  rep.loss_g_adv = adv.value()[0];
  rep.loss_g_l1 = l1.value()[0];
  rep.loss_g_total = total.value()[0];
  require_finite(rep.loss_g_total, "generator loss", step);
  gg.backward(total);
  const auto params = model.generator.pointers();
  tensor::adam_step(params, opt.generator);
  return rep;
}

std::vector<LossReport> train(CganModel& model, std::span<const TrainingPair> pairs, const TrainConfig& config,
                              const TrainOutputs& outputs) {
  config.validate();
  if (pairs.empty()) throw ConfigError("training set is empty");

  Optimizers opt = make_optimizers(model, config.adam);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();

  std::ofstream log;
  if (!outputs.loss_log.empty()) {
    log.open(outputs.loss_log, std::ios::app);
    if (!log) throw ConfigError("cannot open loss log " + outputs.loss_log.string());
  }

  std::vector<LossReport> reports;
  for (int step = 1; step <= config.max_steps; ++step) {
    std::vector<const TrainingPair*> batch;
    while (static_cast<int>(batch.size()) < config.batch_size) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(&pairs[order[cursor++]]);
    }
    reports.push_back(train_step(model, opt, batch, config, step));
    if (log) log << to_json_line(reports.back()) << '\n' << std::flush;
    if (!outputs.checkpoint.empty() && config.checkpoint_interval > 0 && step % config.checkpoint_interval == 0)
      save_checkpoint(model, outputs.checkpoint);
  }
  if (!outputs.checkpoint.empty()) save_checkpoint(model, outputs.checkpoint);
  return reports;
}

}  // namespace canopyscan::cgan
