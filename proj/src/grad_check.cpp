#include "lf/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lf/rng.hpp"

namespace lf {

double grad_check(const std::function<Tensor<double>()>& loss_fn,
                  const std::vector<Tensor<double>>& params, double eps,
                  std::size_t samples_per_param, std::uint64_t seed) {
  if (params.empty()) throw UsageError("grad_check: no parameters");

  std::vector<Tensor<double>> tracked = params;
  for (auto& p : tracked) {
    p.set_requires_grad(true);
    p.ensure_grad();
    p.zero_grad();
  }

  Graph<double> graph;
  Tensor<double> loss;
  {
    Graph<double>::Scope scope(graph);
    loss = loss_fn();
  }
  if (!loss.defined() || loss.size() != 1 || !std::isfinite(loss.at(0)))
    throw NumericError("grad_check: loss is not a finite scalar");
  graph.backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(tracked.size());
  for (auto& p : tracked) analytic.emplace_back(p.grad(), p.grad() + p.size());

  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  double max_rel_err = 0.0;
  for (std::size_t pi = 0; pi < tracked.size(); ++pi) {
    Tensor<double>& p = tracked[pi];
    std::vector<std::size_t> coords(p.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() > samples_per_param) {
      for (std::size_t i = 0; i < samples_per_param; ++i) {
        const std::size_t j = i + rng.uniform_int(coords.size() - i);
        std::swap(coords[i], coords[j]);
      }
      coords.resize(samples_per_param);
    }
    for (std::size_t c : coords) {
      const double saved = p.at(c);
      Graph<double>::NoGradScope no_grad;
      p.at(c) = saved + eps;
      const double plus = loss_fn().at(0);
      p.at(c) = saved - eps;
      const double minus = loss_fn().at(0);
      p.at(c) = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus))
        throw NumericError("grad_check: non-finite loss during probing");
      const double numeric = (plus - minus) / (2.0 * eps);
      const double rel =
          std::abs(analytic[pi][c] - numeric) / std::max(1.0, std::abs(numeric));
      max_rel_err = std::max(max_rel_err, rel);
    }
  }
  return max_rel_err;
}

}  // namespace lf
