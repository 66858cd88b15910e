#include "mtldesc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mtldesc {
namespace {

namespace F = torch::nn::functional;

void require_finite(const torch::Tensor& t, const char* name) {
  if (!t.defined()) throw std::invalid_argument(std::string(name) + " is undefined");
  if (!torch::isfinite(t).all().item<bool>()) {
    throw std::invalid_argument(std::string(name) + " contains non-finite values");
  }
}

torch::Tensor weighted(const torch::Tensor& desc, const torch::Tensor& att) { return desc * att.unsqueeze(1); }

double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

}  // namespace

void CorrespondenceBatch::validate(bool require_unit_norm, double norm_tolerance) const {
  require_finite(desc_a, "desc_a");
  require_finite(desc_b, "desc_b");
  require_finite(att_a, "att_a");
  require_finite(att_b, "att_b");
  if (desc_a.dim() != 2 || desc_b.sizes() != desc_a.sizes()) {
    throw std::invalid_argument("descriptor blocks must both be N x D");
  }
  const int64_t n = desc_a.size(0);
  if (att_a.dim() != 1 || att_b.dim() != 1 || att_a.size(0) != n || att_b.size(0) != n) {
    throw std::invalid_argument("attention vectors must have N entries");
  }
  if (n < 2) throw std::invalid_argument("a correspondence batch needs N >= 2, got " + std::to_string(n));
  if ((att_a <= 0).any().item<bool>() || (att_b <= 0).any().item<bool>()) {
    throw std::invalid_argument("attention scores must be positive");
  }
  if (require_unit_norm) {
    torch::NoGradGuard no_grad;
    for (const auto* d : {&desc_a, &desc_b}) {
      const double dev = (torch::linalg_vector_norm(*d, 2, {1}) - 1).abs().max().item<double>();
      if (dev > norm_tolerance) {
        throw std::invalid_argument("descriptor rows deviate from unit norm by " + std::to_string(dev));
      }
    }
  }
}

torch::Tensor positive_distances(const CorrespondenceBatch& batch) {
  return torch::linalg_vector_norm(weighted(batch.desc_a, batch.att_a) - weighted(batch.desc_b, batch.att_b), 2,
                                   {1});
}

std::vector<int64_t> hardest_negative_indices(const CorrespondenceBatch& batch) {
  const int64_t n = batch.size();
  if (n < 2) throw std::invalid_argument("hardest-negative mining needs N >= 2, got " + std::to_string(n));
  torch::NoGradGuard no_grad;
  const auto xa = weighted(batch.desc_a, batch.att_a);
  const auto xb = weighted(batch.desc_b, batch.att_b);
  auto dist = torch::linalg_vector_norm(xa.unsqueeze(1) - xb.unsqueeze(0), 2, {2});
  dist.fill_diagonal_(std::numeric_limits<double>::infinity());
  // argmin returns the first minimal index on ties.
  const auto idx = dist.argmin(1).to(torch::kCPU).contiguous();
  const auto* p = idx.data_ptr<int64_t>();
  return std::vector<int64_t>(p, p + n);
}

torch::Tensor hardest_negative_distances(const CorrespondenceBatch& batch) {
  const auto idx_vec = hardest_negative_indices(batch);
  const auto idx = torch::tensor(idx_vec, torch::TensorOptions().dtype(torch::kLong)).to(batch.desc_a.device());
  const auto xa = weighted(batch.desc_a, batch.att_a);
  const auto xb = weighted(batch.desc_b, batch.att_b).index_select(0, idx);
  return torch::linalg_vector_norm(xa - xb, 2, {1});
}

torch::Tensor attention_softmax(const torch::Tensor& att, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  return torch::softmax(att / temperature, 0);
}

torch::Tensor atrip_loss(const CorrespondenceBatch& batch, const LossConfig& config) {
  batch.validate(false);
  const auto pos = positive_distances(batch);
  const auto neg = hardest_negative_distances(batch);
  const auto triplet = torch::relu(pos - neg + config.margin);
  return (attention_softmax(batch.att_a, config.temperature) * triplet).sum();
}

std::vector<double> positive_distance_gradient(double weight, std::span<const double> descriptor,
                                               std::span<const double> positive) {
  if (descriptor.size() != positive.size()) throw std::invalid_argument("dimension mismatch");
  std::vector<double> diff(descriptor.size());
  double norm2 = 0.0;
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff[i] = weight * descriptor[i] - positive[i];
    norm2 += diff[i] * diff[i];
  }
  const double norm = std::sqrt(norm2);
  if (norm == 0.0) throw std::domain_error("gradient undefined where x equals its positive");
  for (auto& v : diff) v *= weight / norm;
  return diff;
}

double GradCheckReport::loss_max_rel_error() const {
  return std::max({desc_a_max_rel_error, desc_b_max_rel_error, att_a_max_rel_error, att_b_max_rel_error});
}

std::string GradCheckReport::to_json() const {
  nlohmann::json j;
  j["trials"] = trials;
  j["resampled_degenerate"] = resampled_degenerate;
  j["positive_gradient"] = {{"max_abs_error", positive_gradient_max_abs_error}};
  j["atrip_loss"] = {{"desc_a", {{"max_rel_error", desc_a_max_rel_error}}},
                     {"desc_b", {{"max_rel_error", desc_b_max_rel_error}}},
                     {"att_a", {{"max_rel_error", att_a_max_rel_error}}},
                     {"att_b", {{"max_rel_error", att_b_max_rel_error}}},
                     {"max_rel_error", loss_max_rel_error()}};
  j["worst_case"] = worst_case;
  j["passed"] = passed;
  return j.dump(2);
}

GradCheckReport atrip_gradient_check(const GradCheckOptions& options, const PositiveGradientFn& analytic) {
  if (options.trials < 1 || options.points < 2 || options.dim < 1 || !(options.step > 0.0)) {
    throw std::invalid_argument("invalid gradient-check options");
  }
  GradCheckReport report;
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> weight_dist(0.5, 2.0);
  constexpr double kMargin = 1e-3;
  const auto opts = torch::TensorOptions().dtype(torch::kFloat64);

  auto unit_rows = [&](int64_t n, int64_t d) {
    auto t = torch::empty({n, d}, opts);
    auto a = t.accessor<double, 2>();
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t k = 0; k < d; ++k) a[i][k] = normal(rng);
    }
    return t / torch::linalg_vector_norm(t, 2, {1}, true);
  };

  // (a) positive-distance gradient formula.
  const auto dim = static_cast<std::size_t>(options.dim);
  for (int trial = 0; trial < options.trials; ++trial) {
    std::vector<double> d(dim);
    std::vector<double> xp(dim);
    const double w = weight_dist(rng);
    double gap = 0.0;
    do {
      gap = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        d[k] = normal(rng);
        xp[k] = normal(rng);
        gap += (w * d[k] - xp[k]) * (w * d[k] - xp[k]);
      }
      if (gap < 1e-4) ++report.resampled_degenerate;
    } while (gap < 1e-4);
    const auto g = analytic(w, d, xp);
    if (g.size() != dim) throw std::runtime_error("analytic gradient has the wrong dimension");
    auto f = [&](const std::vector<double>& v) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) s += (w * v[k] - xp[k]) * (w * v[k] - xp[k]);
      return std::sqrt(s);
    };
    for (std::size_t k = 0; k < dim; ++k) {
      auto plus = d;
      auto minus = d;
      plus[k] += options.step;
      minus[k] -= options.step;
      const double fd = (f(plus) - f(minus)) / (2.0 * options.step);
      const double err = std::abs(fd - g[k]);
      if (err > report.positive_gradient_max_abs_error) {
        report.positive_gradient_max_abs_error = err;
        std::ostringstream os;
        os << "positive gradient, trial " << trial << ", component " << k << ": analytic " << g[k] << ", fd " << fd;
        if (err > options.abs_tolerance) report.worst_case = os.str();
      }
    }
  }

  // (b) full loss gradients.
  LossConfig config;
  config.temperature = options.temperature;
  const int64_t n = options.points;
  std::string worst_loss;
  double worst_loss_err = 0.0;
  for (int trial = 0; trial < options.trials; ++trial) {
    CorrespondenceBatch batch;
    for (;;) {
      batch.desc_a = unit_rows(n, options.dim);
      batch.desc_b = batch.desc_a + 0.4 * unit_rows(n, options.dim);
      batch.desc_b = batch.desc_b / torch::linalg_vector_norm(batch.desc_b, 2, {1}, true);
      batch.att_a = torch::empty({n}, opts);
      batch.att_b = torch::empty({n}, opts);
      for (int64_t i = 0; i < n; ++i) {
        batch.att_a[i] = weight_dist(rng);
        batch.att_b[i] = weight_dist(rng);
      }
      // Stay clear of the hinge, the argmin switch and x = x+.
      const auto xa = weighted(batch.desc_a, batch.att_a);
      const auto xb = weighted(batch.desc_b, batch.att_b);
      auto dist = torch::linalg_vector_norm(xa.unsqueeze(1) - xb.unsqueeze(0), 2, {2});
      const auto pos = dist.diagonal().clone();
      dist.fill_diagonal_(std::numeric_limits<double>::infinity());
      const auto two = std::get<0>(dist.topk(2, 1, false, true));
      const bool ok = (pos > kMargin).all().item<bool>() &&
                      ((two.select(1, 1) - two.select(1, 0)) > kMargin).all().item<bool>() &&
                      ((pos - two.select(1, 0) + config.margin).abs() > kMargin).all().item<bool>();
      if (ok) break;
      ++report.resampled_degenerate;
    }

    auto leaves = std::array<torch::Tensor*, 4>{&batch.desc_a, &batch.desc_b, &batch.att_a, &batch.att_b};
    for (auto* t : leaves) *t = t->detach().clone().set_requires_grad(true);
    const auto loss = atrip_loss(batch, config);
    const auto grads = torch::autograd::grad({loss}, {batch.desc_a, batch.desc_b, batch.att_a, batch.att_b});

    torch::NoGradGuard no_grad;
    const std::array<const char*, 4> names{"desc_a", "desc_b", "att_a", "att_b"};
    std::array<double*, 4> maxima{&report.desc_a_max_rel_error, &report.desc_b_max_rel_error,
                                  &report.att_a_max_rel_error, &report.att_b_max_rel_error};
    for (std::size_t g = 0; g < leaves.size(); ++g) {
      auto flat = leaves[g]->view({-1});
      const auto grad = grads[g].contiguous().view({-1});
      for (int64_t e = 0; e < flat.size(0); ++e) {
        const double orig = flat[e].item<double>();
        flat[e] = orig + options.step;
        const double up = atrip_loss(batch, config).item<double>();
        flat[e] = orig - options.step;
        const double down = atrip_loss(batch, config).item<double>();
        flat[e] = orig;
        const double fd = (up - down) / (2.0 * options.step);
        const double an = grad[e].item<double>();
        const double err = rel_error(an, fd);
        *maxima[g] = std::max(*maxima[g], err);
        if (err > worst_loss_err) {
          worst_loss_err = err;
          std::ostringstream os;
          os << "loss gradient, trial " << trial << ", " << names[g] << "[" << e << "]: autodiff " << an << ", fd "
             << fd;
          worst_loss = os.str();
        }
      }
    }
  }
  report.trials = options.trials;
  report.passed = report.positive_gradient_max_abs_error <= options.abs_tolerance &&
                  report.loss_max_rel_error() <= options.rel_tolerance;
  if (report.worst_case.empty()) report.worst_case = worst_loss;
  return report;
}

double weighted_bce(double k, double g, double lambda) {
  const double kc = std::clamp(k, kBceEpsilon, 1.0 - kBceEpsilon);
  return -lambda * g * std::log(kc) - (1.0 - g) * std::log(1.0 - kc);
}

torch::Tensor detector_loss(const torch::Tensor& heatmap, const torch::Tensor& labels, double lambda) {
  if (heatmap.sizes() != labels.sizes()) {
    std::ostringstream os;
    os << "detector loss shape mismatch: heatmap " << heatmap.sizes() << " vs labels " << labels.sizes();
    throw std::invalid_argument(os.str());
  }
  const auto k = heatmap.clamp(kBceEpsilon, 1.0 - kBceEpsilon);
  const auto g = labels.to(heatmap.scalar_type());
  return (-lambda * g * torch::log(k) - (1 - g) * torch::log(1 - k)).mean();
}

torch::Tensor total_loss(const torch::Tensor& l_det, const torch::Tensor& l_des) {
  require_finite(l_det, "detector loss");
  require_finite(l_des, "description loss");
  return l_det + l_des;
}

}  // namespace mtldesc
