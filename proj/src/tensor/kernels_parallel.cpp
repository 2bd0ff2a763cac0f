#include <vector>

#include "canopyscan/tensor/kernels.hpp"
#include "conv_detail.hpp"

namespace canopyscan::tensor::kernels::parallel {

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<double> output) {
  const std::size_t block = detail::patch_len(g) * detail::out_plane(g);
  std::vector<double> cols(block * g.batch);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < g.batch; ++n)
    detail::im2col(g, input.data() + n * g.in_channels * detail::in_plane(g), cols.data() + n * block);

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < g.batch; ++n)
    for (int k = 0; k < g.out_channels; ++k)
      detail::gemm_row(g, weight.data(), cols.data() + n * block,
                       output.data() + n * g.out_channels * detail::out_plane(g), k);
}

void conv2d_input_grad(const ConvGeometry& g, std::span<const double> grad_output,
                       std::span<const double> weight, std::span<double> grad_input) {
  if (detail::prefer_channels_last(g)) {
    std::vector<double> weight_t(weight.size());
    detail::transpose_weight_taps(g, weight.data(), weight_t.data());
#pragma omp parallel
    {
      std::vector<double> scratch(detail::channels_last_scratch(g));
#pragma omp for schedule(static)
      for (int n = 0; n < g.batch; ++n)
        detail::scatter_channels_last(g, grad_output.data() + n * g.out_channels * detail::out_plane(g),
                                      weight_t.data(), grad_input.data() + n * g.in_channels * detail::in_plane(g),
                                      scratch.data());
    }
    return;
  }
#pragma omp parallel
  {
    std::vector<double> scratch(detail::scatter_scratch(g));
#pragma omp for collapse(2) schedule(static)
    for (int n = 0; n < g.batch; ++n)
      for (int c = 0; c < g.in_channels; ++c)
        detail::scatter_plane(g, grad_output.data() + n * g.out_channels * detail::out_plane(g), weight.data(),
                              grad_input.data() + n * g.in_channels * detail::in_plane(g), c, scratch.data());
  }
}

void conv2d_weight_grad(const ConvGeometry& g, std::span<const double> input,
                        std::span<const double> grad_output, std::span<double> grad_weight) {
  const std::size_t block = detail::patch_len(g) * detail::out_plane(g);
  std::vector<double> cols_t(block * g.batch);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < g.batch; ++n)
    detail::im2col_transposed(g, input.data() + n * g.in_channels * detail::in_plane(g),
                              cols_t.data() + n * block);

  std::fill(grad_weight.begin(), grad_weight.end(), 0.0);
  // Each thread owns whole rows of the weight gradient and walks the batch in order.
#pragma omp parallel for schedule(static)
  for (int k = 0; k < g.out_channels; ++k)
    for (int n = 0; n < g.batch; ++n)
      detail::weight_grad_row(g, grad_output.data() + n * g.out_channels * detail::out_plane(g),
                              cols_t.data() + n * block, grad_weight.data(), k);
}

}  // namespace canopyscan::tensor::kernels::parallel
