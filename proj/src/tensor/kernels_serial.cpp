#include <vector>

#include "canopyscan/tensor/kernels.hpp"
#include "conv_detail.hpp"

namespace canopyscan::tensor::kernels::serial {

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<double> output) {
  std::vector<double> cols(detail::patch_len(g) * detail::out_plane(g));
  for (int n = 0; n < g.batch; ++n) {
    detail::im2col(g, input.data() + n * g.in_channels * detail::in_plane(g), cols.data());
    double* y = output.data() + n * g.out_channels * detail::out_plane(g);
    for (int k = 0; k < g.out_channels; ++k) detail::gemm_row(g, weight.data(), cols.data(), y, k);
  }
}

void conv2d_input_grad(const ConvGeometry& g, std::span<const double> grad_output,
                       std::span<const double> weight, std::span<double> grad_input) {
  if (detail::prefer_channels_last(g)) {
    std::vector<double> weight_t(weight.size());
    detail::transpose_weight_taps(g, weight.data(), weight_t.data());
    std::vector<double> scratch(detail::channels_last_scratch(g));
    for (int n = 0; n < g.batch; ++n)
      detail::scatter_channels_last(g, grad_output.data() + n * g.out_channels * detail::out_plane(g),
                                    weight_t.data(), grad_input.data() + n * g.in_channels * detail::in_plane(g),
                                    scratch.data());
    return;
  }
  std::vector<double> scratch(detail::scatter_scratch(g));
  for (int n = 0; n < g.batch; ++n) {
    const double* gy = grad_output.data() + n * g.out_channels * detail::out_plane(g);
    double* gx = grad_input.data() + n * g.in_channels * detail::in_plane(g);
    for (int c = 0; c < g.in_channels; ++c) detail::scatter_plane(g, gy, weight.data(), gx, c, scratch.data());
  }
}

void conv2d_weight_grad(const ConvGeometry& g, std::span<const double> input,
                        std::span<const double> grad_output, std::span<double> grad_weight) {
  std::fill(grad_weight.begin(), grad_weight.end(), 0.0);
  std::vector<double> cols_t(detail::patch_len(g) * detail::out_plane(g));
  for (int n = 0; n < g.batch; ++n) {
    detail::im2col_transposed(g, input.data() + n * g.in_channels * detail::in_plane(g), cols_t.data());
    const double* gy = grad_output.data() + n * g.out_channels * detail::out_plane(g);
    for (int k = 0; k < g.out_channels; ++k)
      detail::weight_grad_row(g, gy, cols_t.data(), grad_weight.data(), k);
  }
}

}  // namespace canopyscan::tensor::kernels::serial
