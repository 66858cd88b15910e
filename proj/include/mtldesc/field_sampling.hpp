#pragma once

#include <utility>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "mtldesc/keypoints.hpp"

namespace mtldesc {

inline constexpr int64_t kFieldStride = 4;

/// Bilinearly samples a C x h4 x w4 field (or 1 x C x h4 x w4) at image-frame points (N x 2, x then y),
/// using field coordinate p / stride. Differentiable w.r.t. the field. Returns N x C.
/// Points must lie inside [0, w - 1] x [0, h - 1] of the image the field was computed from.
torch::Tensor sample_field(const torch::Tensor& field, const torch::Tensor& points, cv::Size image_size);

/// Descriptors (re-normalized to unit length) and attention weights at keypoint coordinates.
std::pair<DescriptorMatrix, std::vector<float>> sample_at_keypoints(const torch::Tensor& descriptors,
                                                                    const torch::Tensor& attention,
                                                                    const std::vector<cv::Point2d>& coords,
                                                                    cv::Size image_size);

}  // namespace mtldesc
