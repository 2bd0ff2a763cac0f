#pragma once

#include <span>

namespace canopyscan::tensor::kernels {

/// Geometry of a 2-D cross-correlation, always described from the conv2d
/// side: input [batch, in_channels, in_h, in_w], weight [out_channels,
/// in_channels, kernel_h, kernel_w], output [batch, out_channels, out_h, out_w].
/// The transposed convolution reuses the same geometry with the roles of
/// input and output swapped.
struct ConvGeometry {
  int batch = 1;
  int in_channels = 1;
  int in_h = 1;
  int in_w = 1;
  int out_channels = 1;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int pad = 0;
  int out_h = 1;
  int out_w = 1;

  std::size_t input_size() const;
  std::size_t weight_size() const;
  std::size_t output_size() const;
};

/// Standard conv2d output extent for the given input extent.
ConvGeometry make_conv_geometry(int batch, int in_channels, int in_h, int in_w, int out_channels,
                                int kernel_h, int kernel_w, int stride, int pad);

enum class Execution { Serial, Parallel };

/// Process-wide kernel selection. Serial is the default; both paths produce
/// bitwise-identical results because every output element is accumulated in
/// the same order regardless of how work is split across threads.
void set_execution(Execution mode);
Execution execution();

// Accumulation orders (per output element):
//   conv2d_forward:      in_channel, kernel row, kernel column; padding
//                        contributes explicit zero products; bias added last.
//   conv2d_input_grad:   out_channel, kernel row, kernel column.
//   conv2d_weight_grad:  batch, output row, output column.

namespace serial {
void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<double> output);
void conv2d_input_grad(const ConvGeometry& g, std::span<const double> grad_output,
                       std::span<const double> weight, std::span<double> grad_input);
void conv2d_weight_grad(const ConvGeometry& g, std::span<const double> input,
                        std::span<const double> grad_output, std::span<double> grad_weight);
}  // namespace serial

namespace parallel {
void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<double> output);
void conv2d_input_grad(const ConvGeometry& g, std::span<const double> grad_output,
                       std::span<const double> weight, std::span<double> grad_input);
void conv2d_weight_grad(const ConvGeometry& g, std::span<const double> input,
                        std::span<const double> grad_output, std::span<double> grad_weight);
}  // namespace parallel

// Dispatch on execution(). Outputs are overwritten, not accumulated.
void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<double> output);
void conv2d_input_grad(const ConvGeometry& g, std::span<const double> grad_output,
                       std::span<const double> weight, std::span<double> grad_input);
void conv2d_weight_grad(const ConvGeometry& g, std::span<const double> input,
                        std::span<const double> grad_output, std::span<double> grad_weight);

}  // namespace canopyscan::tensor::kernels
