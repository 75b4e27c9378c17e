#include "oracles/dense_oracles.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

std::vector<std::vector<double>> dense_match_rows(const std::vector<std::vector<double>>& props, double lambda,
                                                  double eps) {
  const std::size_t n = props.size();
  std::vector<std::vector<double>> out(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < props[i].size(); ++k) d += std::fabs(props[j][k] - props[i][k]);
      out[i][j] = d <= eps ? std::exp(-lambda * d) : 0.0;
      total += out[i][j];
    }
    if (total > 0.0)
      for (double& x : out[i]) x /= total;
  }
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::map<long, double> discretized_truncated_normal(double y, double sigma, double lo, double hi) {
  std::map<long, double> pmf;
  const double z = normal_cdf((hi - y) / sigma) - normal_cdf((lo - y) / sigma);
  const long first = static_cast<long>(std::floor(lo + 0.5));
  const long last = static_cast<long>(std::ceil(hi - 0.5));
  for (long v = first; v <= last; ++v) {
    const double a = std::max(lo, v - 0.5), b = std::min(hi, v + 0.5);
    if (b <= a) continue;
    const double m = (normal_cdf((b - y) / sigma) - normal_cdf((a - y) / sigma)) / z;
    if (m > 0.0) pmf[v] = m;
  }
  return pmf;
}

}  // namespace oracle
