#include "hypokin/fit.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hypokin/errors.hpp"

namespace hypokin {

PowerFit fit_power_law(std::span<const std::pair<double, double>> pairs, std::size_t min_pairs) {
  if (pairs.size() < std::max<std::size_t>(min_pairs, 2)) {
    fail(ErrorKind::InsufficientData, "need at least " + std::to_string(min_pairs) +
                                          " pairs, got " + std::to_string(pairs.size()));
  }
  std::vector<double> lx, ly;
  for (const auto& [h, v] : pairs) {
    if (!(h > 0.0) || !(v > 0.0) || !std::isfinite(h) || !std::isfinite(v)) {
      fail(ErrorKind::InvalidData, "power-law fit needs positive finite pairs");
    }
    lx.push_back(std::log(h));
    ly.push_back(std::log(v));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) fail(ErrorKind::InvalidData, "abscissae must not all coincide");

  PowerFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.n = lx.size();
  for (std::size_t i = 0; i < lx.size(); ++i) {
    fit.residual = std::max(fit.residual, std::abs(ly[i] - fit.intercept - fit.slope * lx[i]));
  }
  return fit;
}

}  // namespace hypokin
