#include "canopyscan/tensor/kernels.hpp"

#include <atomic>

#include "canopyscan/common/errors.hpp"

namespace canopyscan::tensor::kernels {

namespace {
std::atomic<Execution> g_execution{Execution::Serial};
}

std::size_t ConvGeometry::input_size() const {
  return static_cast<std::size_t>(batch) * in_channels * in_h * in_w;
}
std::size_t ConvGeometry::weight_size() const {
  return static_cast<std::size_t>(out_channels) * in_channels * kernel_h * kernel_w;
}
std::size_t ConvGeometry::output_size() const {
  return static_cast<std::size_t>(batch) * out_channels * out_h * out_w;
}

ConvGeometry make_conv_geometry(int batch, int in_channels, int in_h, int in_w, int out_channels,
                                int kernel_h, int kernel_w, int stride, int pad) {
  if (stride < 1 || stride > 8) throw DimensionError("stride must be in [1, 8]");
  if (pad < 0) throw DimensionError("padding must be non-negative");
  if (kernel_h > in_h + 2 * pad || kernel_w > in_w + 2 * pad)
    throw DimensionError("kernel " + std::to_string(kernel_h) + "x" + std::to_string(kernel_w) +
                         " exceeds padded input " + std::to_string(in_h + 2 * pad) + "x" +
                         std::to_string(in_w + 2 * pad) + " (axes H,W)");
  ConvGeometry g;
  g.batch = batch;
  g.in_channels = in_channels;
  g.in_h = in_h;
  g.in_w = in_w;
  g.out_channels = out_channels;
  g.kernel_h = kernel_h;
  g.kernel_w = kernel_w;
  g.stride = stride;
  g.pad = pad;
  g.out_h = (in_h + 2 * pad - kernel_h) / stride + 1;
  g.out_w = (in_w + 2 * pad - kernel_w) / stride + 1;
  return g;
}

void set_execution(Execution mode) { g_execution.store(mode); }
Execution execution() { return g_execution.load(); }

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<double> output) {
  if (execution() == Execution::Parallel)
    parallel::conv2d_forward(g, input, weight, output);
  else
    serial::conv2d_forward(g, input, weight, output);
}

void conv2d_input_grad(const ConvGeometry& g, std::span<const double> grad_output,
                       std::span<const double> weight, std::span<double> grad_input) {
  if (execution() == Execution::Parallel)
    parallel::conv2d_input_grad(g, grad_output, weight, grad_input);
  else
    serial::conv2d_input_grad(g, grad_output, weight, grad_input);
}

void conv2d_weight_grad(const ConvGeometry& g, std::span<const double> input,
                        std::span<const double> grad_output, std::span<double> grad_weight) {
  if (execution() == Execution::Parallel)
    parallel::conv2d_weight_grad(g, input, grad_output, grad_weight);
  else
    serial::conv2d_weight_grad(g, input, grad_output, grad_weight);
}

}  // namespace canopyscan::tensor::kernels
