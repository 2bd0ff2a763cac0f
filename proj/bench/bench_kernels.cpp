// Serial vs OpenMP convolution kernels on the default generator/discriminator
// layer shapes.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <vector>

#include <omp.h>

#include "canopyscan/tensor/kernels.hpp"

namespace k = canopyscan::tensor::kernels;

namespace {

struct Layer {
  const char* name;
  k::ConvGeometry geo;
};

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto end = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(end - start).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
  int batch = argc > 1 ? std::atoi(argv[1]) : 4;
  int reps = argc > 2 ? std::atoi(argv[2]) : 20;
  std::printf("threads available: %d, batch %d, reps %d\n", omp_get_max_threads(), batch, reps);

  const std::vector<Layer> layers = {
      {"enc1 3->16 64px s2", k::make_conv_geometry(batch, 3, 64, 64, 16, 4, 4, 2, 1)},
      {"enc2 16->32 32px s2", k::make_conv_geometry(batch, 16, 32, 32, 32, 4, 4, 2, 1)},
      {"enc3 32->64 16px s2", k::make_conv_geometry(batch, 32, 16, 16, 64, 4, 4, 2, 1)},
      {"enc4 64->128 8px s2", k::make_conv_geometry(batch, 64, 8, 8, 128, 4, 4, 2, 1)},
      {"disc4 64->128 8px s1", k::make_conv_geometry(batch, 64, 8, 8, 128, 4, 4, 1, 1)},
  };

  std::mt19937_64 rng(1);
  std::printf("%-22s %-12s %10s %10s %10s %8s\n", "layer", "kernel", "serial ms", "omp ms", "GMAC/s", "equal");
  for (const auto& layer : layers) {
    const auto& g = layer.geo;
    const auto x = random_vec(g.input_size(), rng);
    const auto w = random_vec(g.weight_size(), rng);
    const auto gy = random_vec(g.output_size(), rng);
    const double macs = static_cast<double>(g.output_size()) * g.in_channels * g.kernel_h * g.kernel_w;

    std::vector<double> a(g.output_size()), b(g.output_size());
    const double fs = time_ms([&] { k::serial::conv2d_forward(g, x, w, a); }, reps);
    const double fp = time_ms([&] { k::parallel::conv2d_forward(g, x, w, b); }, reps);
    std::printf("%-22s %-12s %10.3f %10.3f %10.2f %8s\n", layer.name, "forward", fs, fp, macs / fs / 1e6,
                std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0 ? "yes" : "NO");

    std::vector<double> ia(g.input_size()), ib(g.input_size());
    const double is = time_ms([&] { k::serial::conv2d_input_grad(g, gy, w, ia); }, reps);
    const double ip = time_ms([&] { k::parallel::conv2d_input_grad(g, gy, w, ib); }, reps);
    std::printf("%-22s %-12s %10.3f %10.3f %10.2f %8s\n", "", "input_grad", is, ip, macs / is / 1e6,
                std::memcmp(ia.data(), ib.data(), ia.size() * sizeof(double)) == 0 ? "yes" : "NO");

    std::vector<double> wa(g.weight_size()), wb(g.weight_size());
    const double ws = time_ms([&] { k::serial::conv2d_weight_grad(g, x, gy, wa); }, reps);
    const double wp = time_ms([&] { k::parallel::conv2d_weight_grad(g, x, gy, wb); }, reps);
    std::printf("%-22s %-12s %10.3f %10.3f %10.2f %8s\n", "", "weight_grad", ws, wp, macs / ws / 1e6,
                std::memcmp(wa.data(), wb.data(), wa.size() * sizeof(double)) == 0 ? "yes" : "NO");
  }
  return 0;
}
