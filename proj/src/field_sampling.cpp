#include "mtldesc/field_sampling.hpp"

#include <sstream>
#include <stdexcept>

namespace mtldesc {

namespace F = torch::nn::functional;

torch::Tensor sample_field(const torch::Tensor& field, const torch::Tensor& points, cv::Size image_size) {
  const auto f = field.dim() == 3 ? field.unsqueeze(0) : field;
  if (f.dim() != 4 || f.size(0) != 1) throw std::invalid_argument("sample_field expects a single C x h x w field");
  if (points.dim() != 2 || points.size(1) != 2) throw std::invalid_argument("points must be N x 2");
  const int64_t h4 = f.size(2);
  const int64_t w4 = f.size(3);
  if (points.size(0) == 0) return torch::empty({0, f.size(1)}, f.options());

  const auto p = points.to(f.scalar_type());
  {
    torch::NoGradGuard no_grad;
    const auto x = p.select(1, 0);
    const auto y = p.select(1, 1);
    const bool inside = (x >= 0).all().item<bool>() && (y >= 0).all().item<bool>() &&
                        (x <= image_size.width - 1).all().item<bool>() &&
                        (y <= image_size.height - 1).all().item<bool>();
    if (!inside) {
      std::ostringstream os;
      os << "sample point outside the " << image_size.width << "x" << image_size.height << " image";
      throw std::out_of_range(os.str());
    }
  }
  const double sx = w4 > 1 ? 2.0 / (static_cast<double>(kFieldStride) * static_cast<double>(w4 - 1)) : 0.0;
  const double sy = h4 > 1 ? 2.0 / (static_cast<double>(kFieldStride) * static_cast<double>(h4 - 1)) : 0.0;
  const auto gx = p.select(1, 0) * sx - 1.0;
  const auto gy = p.select(1, 1) * sy - 1.0;
  const auto grid = torch::stack({gx, gy}, 1).view({1, 1, -1, 2});
  const auto out = F::grid_sample(f, grid,
                                  F::GridSampleFuncOptions()
                                      .mode(torch::kBilinear)
                                      .padding_mode(torch::kBorder)
                                      .align_corners(true));
  return out.view({f.size(1), -1}).t();
}

std::pair<DescriptorMatrix, std::vector<float>> sample_at_keypoints(const torch::Tensor& descriptors,
                                                                    const torch::Tensor& attention,
                                                                    const std::vector<cv::Point2d>& coords,
                                                                    cv::Size image_size) {
  torch::NoGradGuard no_grad;
  const auto n = static_cast<int64_t>(coords.size());
  auto pts = torch::empty({n, 2}, torch::kFloat64);
  auto acc = pts.accessor<double, 2>();
  for (int64_t i = 0; i < n; ++i) {
    acc[i][0] = coords[static_cast<std::size_t>(i)].x;
    acc[i][1] = coords[static_cast<std::size_t>(i)].y;
  }
  auto d = sample_field(descriptors.to(torch::kFloat32), pts, image_size);
  d = d / torch::linalg_vector_norm(d, 2, {1}, true).clamp_min(1e-12);
  const auto w = sample_field(attention.to(torch::kFloat32), pts, image_size).view({-1}).contiguous();
  d = d.contiguous();

  DescriptorMatrix desc(n, d.size(1));
  if (n > 0) std::copy_n(d.data_ptr<float>(), d.numel(), desc.data());
  std::vector<float> weights(w.data_ptr<float>(), w.data_ptr<float>() + w.numel());
  return {std::move(desc), std::move(weights)};
}

}  // namespace mtldesc
